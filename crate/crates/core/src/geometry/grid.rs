//! Tensor-product discretization of the shell `x + t n(x)`.
//!
//! The normal coordinate is reached through a reference coordinate
//! `s in [-1/2, 1/2]`, `t = -g1 + (s + 1/2)(g1 + g2)`, so every column of
//! nodes carries the same number of points regardless of the local
//! thickness. Partial derivatives at fixed `t` follow from the chain rule
//! `d/dt = (1/H) d/ds` and `d/dtheta|_t = d/dtheta|_s - t_theta d/dt`, with
//! `H = g1 + g2`.

use serde::{Deserialize, Serialize};

use super::surface::{linspace, SurfacePatch, SurfacePoint, Vec3};
use super::thickness::{ThicknessPoint, ThicknessProfile};
use crate::error::{KornError, Result};
use crate::stencil::trapezoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub n_t: usize,
    pub n_theta: usize,
    pub n_z: usize,
}

impl GridDims {
    pub fn new(n_t: usize, n_theta: usize, n_z: usize) -> Self {
        GridDims { n_t, n_theta, n_z }
    }

    pub fn nodes(&self) -> usize {
        self.n_t * self.n_theta * self.n_z
    }
}

/// Geometry shared by all nodes of one `(theta, z)` column.
#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub theta: f64,
    pub z: f64,
    pub point: SurfacePoint,
    pub thick: ThicknessPoint,
    /// Trapezoid weight in `(theta, z)` times `A_z A_theta`; zero when masked.
    pub area_weight: f64,
    pub inside: bool,
}

#[derive(Debug, Clone)]
pub struct ShellGrid {
    pub dims: GridDims,
    pub s: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    pub d_s: f64,
    pub d_theta: f64,
    pub d_z: f64,
    pub columns: Vec<Column>,
    /// Normal coordinate of each node.
    pub t: Vec<f64>,
    /// Quadrature weight of each node, `A_z A_theta H w_s w_theta w_z`.
    pub weight: Vec<f64>,
    surface: SurfacePatch,
    profile: ThicknessProfile,
}

impl ShellGrid {
    pub fn new(surface: &SurfacePatch, profile: &ThicknessProfile, dims: GridDims) -> Result<Self> {
        let domain = surface.domain();
        let z = domain.z_range(dims.n_theta.max(65));
        Self::build(surface, profile, dims, (0.0, domain.omega), z)
    }

    /// Grid over the parameter window `theta_range x z_range`, which must lie
    /// in the bounding box of the patch. Used for fields supported inside it.
    pub fn window(
        surface: &SurfacePatch,
        profile: &ThicknessProfile,
        dims: GridDims,
        theta_range: (f64, f64),
        z_range: (f64, f64),
    ) -> Result<Self> {
        let domain = surface.domain();
        let (z_lo, z_hi) = domain.z_range(65);
        let tol = 1e-12;
        if !(theta_range.0 < theta_range.1 && z_range.0 < z_range.1)
            || theta_range.0 < -tol
            || theta_range.1 > domain.omega + tol
            || z_range.0 < z_lo - tol
            || z_range.1 > z_hi + tol
        {
            return Err(KornError::InvalidInput(format!(
                "window {theta_range:?} x {z_range:?} outside the patch"
            )));
        }
        Self::build(surface, profile, dims, theta_range, z_range)
    }

    fn build(
        surface: &SurfacePatch,
        profile: &ThicknessProfile,
        dims: GridDims,
        (th_lo, th_hi): (f64, f64),
        (z_lo, z_hi): (f64, f64),
    ) -> Result<Self> {
        let GridDims { n_t, n_theta, n_z } = dims;
        if n_t < 3 || n_theta < 3 || n_z < 3 {
            return Err(KornError::InvalidInput(format!(
                "grid needs at least 3 nodes per direction, got {n_t}x{n_theta}x{n_z}"
            )));
        }
        let domain = surface.domain();
        let s = linspace(-0.5, 0.5, n_t);
        let theta = linspace(th_lo, th_hi, n_theta);
        let z = linspace(z_lo, z_hi, n_z);
        let d_s = 1.0 / (n_t - 1) as f64;
        let d_theta = (th_hi - th_lo) / (n_theta - 1) as f64;
        let d_z = (z_hi - z_lo) / (n_z - 1) as f64;
        let (ws, wth, wz) = (trapezoid(n_t, d_s), trapezoid(n_theta, d_theta), trapezoid(n_z, d_z));

        let mut columns = Vec::with_capacity(n_theta * n_z);
        for (iz, &zv) in z.iter().enumerate() {
            for (ith, &th) in theta.iter().enumerate() {
                let point = surface.eval(th, zv);
                let thick = profile.eval(th, zv);
                let total = thick.total();
                if !(total > 0.0) {
                    return Err(KornError::InvalidInput(format!(
                        "non-positive total thickness {total:.3e} at (theta={th}, z={zv})"
                    )));
                }
                let inside = domain.contains(th, zv);
                let area_weight = if inside {
                    point.a_theta * point.a_z * wth[ith] * wz[iz]
                } else {
                    0.0
                };
                columns.push(Column {
                    theta: th,
                    z: zv,
                    point,
                    thick,
                    area_weight,
                    inside,
                });
            }
        }

        let n = dims.nodes();
        let mut t = vec![0.0; n];
        let mut weight = vec![0.0; n];
        for (c, col) in columns.iter().enumerate() {
            let total = col.thick.total();
            for (it, &sv) in s.iter().enumerate() {
                let idx = it + n_t * c;
                t[idx] = -col.thick.g1[0] + (sv + 0.5) * total;
                weight[idx] = col.area_weight * total * ws[it];
            }
        }

        Ok(ShellGrid {
            dims,
            s,
            theta,
            z,
            d_s,
            d_theta,
            d_z,
            columns,
            t,
            weight,
            surface: surface.clone(),
            profile: profile.clone(),
        })
    }

    pub fn surface(&self) -> &SurfacePatch {
        &self.surface
    }

    pub fn profile(&self) -> &ThicknessProfile {
        &self.profile
    }

    pub fn h(&self) -> f64 {
        self.profile.h
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[inline]
    pub fn index(&self, it: usize, ith: usize, iz: usize) -> usize {
        it + self.dims.n_t * (ith + self.dims.n_theta * iz)
    }

    /// `(it, ith, iz)` of a flat node index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n_t = self.dims.n_t;
        let n_th = self.dims.n_theta;
        (idx % n_t, (idx / n_t) % n_th, idx / (n_t * n_th))
    }

    #[inline]
    pub fn column_of(&self, idx: usize) -> &Column {
        &self.columns[idx / self.dims.n_t]
    }

    /// `(dt/dtheta, dt/dz)` at fixed reference coordinate `s`.
    #[inline]
    pub fn t_slopes(&self, idx: usize) -> [f64; 2] {
        let col = self.column_of(idx);
        let sv = self.s[idx % self.dims.n_t] + 0.5;
        let (g1, g2) = (col.thick.g1, col.thick.g2);
        [
            -g1[1] + sv * (g1[1] + g2[1]),
            -g1[2] + sv * (g1[2] + g2[2]),
        ]
    }

    /// Largest grid spacing in the surface parameters.
    pub fn delta(&self) -> f64 {
        self.d_theta.max(self.d_z)
    }

    /// Smallest `1 + t kappa` over all nodes.
    pub fn min_shift_factor(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (idx, &t) in self.t.iter().enumerate() {
            let p = &self.column_of(idx).point;
            let v = (1.0 + t * p.kappa_theta).min(1.0 + t * p.kappa_z);
            if v < best.0 {
                best = (v, idx);
            }
        }
        best
    }

    /// Reference integral of `A_z A_theta (g1 + g2)` over the patch by a
    /// fine midpoint rule, used to check quadrature consistency.
    pub fn reference_volume(&self, samples: usize) -> f64 {
        let domain = self.surface.domain();
        let (z_lo, z_hi) = (self.z[0], self.z[self.z.len() - 1]);
        let th_lo = self.theta[0];
        let dth = (self.theta[self.theta.len() - 1] - th_lo) / samples as f64;
        let dz = (z_hi - z_lo) / samples as f64;
        let mut acc = 0.0;
        for i in 0..samples {
            let th = th_lo + (i as f64 + 0.5) * dth;
            for j in 0..samples {
                let z = z_lo + (j as f64 + 0.5) * dz;
                if !domain.contains(th, z) {
                    continue;
                }
                let p = self.surface.eval(th, z);
                acc += p.a_theta * p.a_z * self.profile.eval(th, z).total();
            }
        }
        acc * dth * dz
    }
}

/// Cartesian position and local frame of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetNode {
    pub x: Vec3,
    /// Rows `(n, e_theta, e_z)`.
    pub frame: [Vec3; 3],
}

/// Nodal Cartesian points `R = r + t n` with their local frames.
pub fn offset_map(grid: &ShellGrid) -> Vec<OffsetNode> {
    (0..grid.len())
        .map(|idx| {
            let p = &grid.column_of(idx).point;
            let t = grid.t[idx];
            OffsetNode {
                x: [p.r[0] + t * p.n[0], p.r[1] + t * p.n[1], p.r[2] + t * p.n[2]],
                frame: p.frame(),
            }
        })
        .collect()
}
