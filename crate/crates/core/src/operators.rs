//! Curvilinear gradients on the shell grid, the symmetrized gradient, the
//! weighted L2 inner product and an independent Cartesian cross-check.
//!
//! Gradient matrices are stored in the local basis `(n, e_theta, e_z)`:
//! row `i` is the displacement component, column `j` the direction of
//! differentiation.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KornError, Result};
use crate::geometry::{cross, dot, offset_map, GridDims, ShellGrid, SurfacePatch, SurfacePoint, ThicknessProfile, Vec3};
use crate::stencil::Stencil;

pub type Mat3 = [[f64; 3]; 3];

/// Nodal samples of the local components `(u_t, u_theta, u_z)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldSample {
    pub u_t: Vec<f64>,
    pub u_theta: Vec<f64>,
    pub u_z: Vec<f64>,
}

impl FieldSample {
    pub fn zeros(n: usize) -> Self {
        FieldSample {
            u_t: vec![0.0; n],
            u_theta: vec![0.0; n],
            u_z: vec![0.0; n],
        }
    }

    /// Samples `f(t, theta, z)` at every node.
    pub fn from_fn(grid: &ShellGrid, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let mut out = FieldSample::zeros(grid.len());
        for idx in 0..grid.len() {
            let col = grid.column_of(idx);
            let v = f(grid.t[idx], col.theta, col.z);
            out.set(idx, v);
        }
        out
    }

    /// Field from the stacked unknown vector `U[3 node + c]`.
    pub fn from_stacked(u: &[f64]) -> Self {
        let n = u.len() / 3;
        let mut out = FieldSample::zeros(n);
        for i in 0..n {
            out.set(i, [u[3 * i], u[3 * i + 1], u[3 * i + 2]]);
        }
        out
    }

    pub fn to_stacked(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            u.extend_from_slice(&self.get(i));
        }
        u
    }

    pub fn len(&self) -> usize {
        self.u_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_t.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> [f64; 3] {
        [self.u_t[idx], self.u_theta[idx], self.u_z[idx]]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [f64; 3]) {
        self.u_t[idx] = v[0];
        self.u_theta[idx] = v[1];
        self.u_z[idx] = v[2];
    }

    pub fn component(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.u_t,
            1 => &self.u_theta,
            _ => &self.u_z,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.u_t, &self.u_theta, &self.u_z]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| a * x).collect();
        FieldSample {
            u_t: s(&self.u_t),
            u_theta: s(&self.u_theta),
            u_z: s(&self.u_z),
        }
    }

    /// `a self + b other`
    pub fn combine(&self, a: f64, other: &FieldSample, b: f64) -> Self {
        let c = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        FieldSample {
            u_t: c(&self.u_t, &other.u_t),
            u_theta: c(&self.u_theta, &other.u_theta),
            u_z: c(&self.u_z, &other.u_z),
        }
    }

    /// Normal component only (`u_out = (u . n) n`).
    pub fn normal_part(&self) -> FieldSample {
        FieldSample {
            u_t: self.u_t.clone(),
            u_theta: vec![0.0; self.len()],
            u_z: vec![0.0; self.len()],
        }
    }

    /// Tangential components only (`u_in = u - u_out`).
    pub fn inplane_part(&self) -> FieldSample {
        FieldSample {
            u_t: vec![0.0; self.len()],
            u_theta: self.u_theta.clone(),
            u_z: self.u_z.clone(),
        }
    }
}

/// Nodal 3x3 matrices in the local basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixFieldSample {
    pub m: Vec<Mat3>,
}

impl MatrixFieldSample {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|a| a.iter().flatten().all(|x| x.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &MatrixFieldSample) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .flat_map(|(a, b)| (0..9).map(move |k| (a[k / 3][k % 3] - b[k / 3][k % 3]).abs()))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &MatrixFieldSample) -> MatrixFieldSample {
        MatrixFieldSample {
            m: self
                .m
                .iter()
                .zip(&other.m)
                .map(|(a, b)| {
                    let mut c = [[0.0; 3]; 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            c[i][j] = a[i][j] - b[i][j];
                        }
                    }
                    c
                })
                .collect(),
        }
    }
}

/// Symmetric part `(M + M^T)/2` at every node.
pub fn sym(m: &MatrixFieldSample) -> MatrixFieldSample {
    MatrixFieldSample {
        m: m.m
            .iter()
            .map(|a| {
                let mut s = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        s[i][j] = if i == j { a[i][i] } else { 0.5 * (a[i][j] + a[j][i]) };
                    }
                }
                s
            })
            .collect(),
    }
}

/// Skew part `(M - M^T)/2` at every node.
pub fn skew(m: &MatrixFieldSample) -> MatrixFieldSample {
    m.sub(&sym(m))
}

/// The curvilinear gradient formula at one point.
///
/// `partials[c][d]` is the derivative of component `c` in direction `d`
/// (`t`, `theta`, `z`) at fixed values of the other two coordinates; `vals`
/// are the component values. With `full = false` the `(1 + t kappa)`
/// factors are dropped (the mid-surface, simplified gradient).
#[inline]
pub fn gradient_formula(partials: &Mat3, vals: [f64; 3], p: &SurfacePoint, t: f64, full: bool) -> Mat3 {
    let [u_t, u_th, u_z] = vals;
    let (a_th, a_z) = (p.a_theta, p.a_z);
    let (a_th_z, a_z_th) = (p.a_theta_z, p.a_z_theta);
    let (k_th, k_z) = (p.kappa_theta, p.kappa_z);
    let (s_th, s_z) = if full {
        (1.0 + t * k_th, 1.0 + t * k_z)
    } else {
        (1.0, 1.0)
    };
    let d = partials;
    let azat = a_z * a_th;
    [
        [
            d[0][0],
            (d[0][1] - a_th * k_th * u_th) / (a_th * s_th),
            (d[0][2] - a_z * k_z * u_z) / (a_z * s_z),
        ],
        [
            d[1][0],
            (a_z * d[1][1] + azat * k_th * u_t + a_th_z * u_z) / (azat * s_th),
            (a_th * d[1][2] - a_z_th * u_z) / (azat * s_z),
        ],
        [
            d[2][0],
            (a_z * d[2][1] - a_th_z * u_th) / (azat * s_th),
            (a_th * d[2][2] + azat * k_z * u_t + a_z_th * u_th) / (azat * s_z),
        ],
    ]
}

/// Physical partials `(d/dt, d/dtheta|_t, d/dz|_t)` of a nodal scalar at one node.
#[inline]
pub fn partials_at(grid: &ShellGrid, f: &[f64], idx: usize) -> [f64; 3] {
    let GridDims { n_t, n_theta, n_z } = grid.dims;
    let (it, ith, iz) = grid.coords(idx);
    let col = grid.column_of(idx);
    let f_s = Stencil::at(it, n_t, grid.d_s).apply(|k| f[grid.index(k, ith, iz)]);
    let f_th = Stencil::at(ith, n_theta, grid.d_theta).apply(|k| f[grid.index(it, k, iz)]);
    let f_z = Stencil::at(iz, n_z, grid.d_z).apply(|k| f[grid.index(it, ith, k)]);
    let f_t = f_s / col.thick.total();
    let [t_th, t_z] = grid.t_slopes(idx);
    [f_t, f_th - t_th * f_t, f_z - t_z * f_t]
}

fn check_len(grid: &ShellGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(KornError::ShapeMismatch {
            expected: grid.len(),
            got: n,
        });
    }
    Ok(())
}

fn gradient(u: &FieldSample, grid: &ShellGrid, full: bool) -> Result<MatrixFieldSample> {
    check_gradient_input(u, grid, full)?;
    let m = (0..grid.len()).map(|idx| gradient_at(u, grid, idx, full)).collect();
    Ok(MatrixFieldSample { m })
}

fn check_gradient_input(u: &FieldSample, grid: &ShellGrid, full: bool) -> Result<()> {
    check_len(grid, u.len())?;
    if !u.is_finite() {
        return Err(KornError::InvalidInput("field has non-finite entries".into()));
    }
    if full {
        let (v, node) = grid.min_shift_factor();
        if v < 0.5 {
            return Err(KornError::ShiftSingularity { value: v, node });
        }
    }
    Ok(())
}

#[inline]
fn gradient_at(u: &FieldSample, grid: &ShellGrid, idx: usize, full: bool) -> Mat3 {
    let partials = [
        partials_at(grid, &u.u_t, idx),
        partials_at(grid, &u.u_theta, idx),
        partials_at(grid, &u.u_z, idx),
    ];
    let col = grid.column_of(idx);
    gradient_formula(&partials, u.get(idx), &col.point, grid.t[idx], full)
}

/// `(|grad u|^2, |e(u)|^2)` of the full gradient without storing it. Slice
/// sums are added in order, so the result does not depend on the pool size.
pub fn gradient_energies(u: &FieldSample, grid: &ShellGrid) -> Result<(f64, f64)> {
    check_gradient_input(u, grid, true)?;
    let chunk = grid.dims.n_t * grid.dims.n_theta;
    let slices: Vec<(f64, f64)> = (0..grid.dims.n_z)
        .into_par_iter()
        .map(|iz| {
            let (mut g2, mut e2) = (0.0, 0.0);
            for idx in iz * chunk..(iz + 1) * chunk {
                let w = grid.weight[idx];
                if w == 0.0 {
                    continue;
                }
                let g = gradient_at(u, grid, idx, true);
                for i in 0..3 {
                    for j in 0..3 {
                        g2 += w * g[i][j] * g[i][j];
                        let e = 0.5 * (g[i][j] + g[j][i]);
                        e2 += w * e * e;
                    }
                }
            }
            (g2, e2)
        })
        .collect();
    Ok(slices.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

/// Full curvilinear gradient with the `(1 + t kappa)` factors.
pub fn gradient_full(u: &FieldSample, grid: &ShellGrid) -> Result<MatrixFieldSample> {
    gradient(u, grid, true)
}

/// Gradient evaluated with the mid-surface metric (`t = 0` in the factors).
pub fn gradient_simplified(u: &FieldSample, grid: &ShellGrid) -> Result<MatrixFieldSample> {
    gradient(u, grid, false)
}

/// Anything that can be integrated node by node against the grid weights.
pub trait NodalField {
    fn node_count(&self) -> usize;
    /// Pointwise Euclidean (entrywise) product at one node.
    fn dot_at(&self, other: &Self, idx: usize) -> f64;
}

impl NodalField for [f64] {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn dot_at(&self, other: &Self, idx: usize) -> f64 {
        self[idx] * other[idx]
    }
}

impl NodalField for Vec<f64> {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn dot_at(&self, other: &Self, idx: usize) -> f64 {
        self[idx] * other[idx]
    }
}

impl NodalField for FieldSample {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn dot_at(&self, other: &Self, idx: usize) -> f64 {
        dot(self.get(idx), other.get(idx))
    }
}

impl NodalField for MatrixFieldSample {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn dot_at(&self, other: &Self, idx: usize) -> f64 {
        let (a, b) = (&self.m[idx], &other.m[idx]);
        (0..3).map(|i| dot(a[i], b[i])).sum()
    }
}

/// `(f, g) = sum_nodes w A_z A_theta H f g`, the weighted inner product.
pub fn l2_inner<F: NodalField + ?Sized>(f: &F, g: &F, grid: &ShellGrid) -> Result<f64> {
    check_len(grid, f.node_count())?;
    check_len(grid, g.node_count())?;
    Ok(grid
        .weight
        .iter()
        .enumerate()
        .map(|(idx, w)| w * f.dot_at(g, idx))
        .sum())
}

pub fn l2_norm<F: NodalField + ?Sized>(f: &F, grid: &ShellGrid) -> Result<f64> {
    Ok(l2_inner(f, f, grid)?.max(0.0).sqrt())
}

/// Pulls a Cartesian vector field back to local components at every node.
pub fn pushback(grid: &ShellGrid, field: impl Fn(Vec3) -> Vec3) -> FieldSample {
    let nodes = offset_map(grid);
    let mut out = FieldSample::zeros(grid.len());
    for (idx, node) in nodes.iter().enumerate() {
        let v = field(node.x);
        out.set(idx, [dot(node.frame[0], v), dot(node.frame[1], v), dot(node.frame[2], v)]);
    }
    out
}

/// Constant translation `u(x) = c` in local components.
pub fn translation_field(grid: &ShellGrid, c: Vec3) -> FieldSample {
    pushback(grid, |_| c)
}

/// Infinitesimal rotation `u(x) = omega x x` in local components.
pub fn rotation_field(grid: &ShellGrid, omega: Vec3) -> FieldSample {
    pushback(grid, |x| cross(omega, x))
}

fn inverse3(a: &Mat3) -> Option<Mat3> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    Some([
        [
            (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * inv,
            (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv,
            (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv,
        ],
        [
            (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * inv,
            (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv,
            (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv,
        ],
        [
            (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * inv,
            (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * inv,
            (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv,
        ],
    ])
}

/// Gradient obtained by differencing the Cartesian pushforward
/// `u_t n + u_theta e_theta + u_z e_z` and the nodal positions in the
/// reference coordinates `(s, theta, z)`, then re-expressing the Cartesian
/// gradient in the local frame. Uses no metric or curvature evaluator.
pub fn cartesian_gradient(u: &FieldSample, grid: &ShellGrid) -> Result<MatrixFieldSample> {
    check_len(grid, u.len())?;
    let GridDims { n_t, n_theta, n_z } = grid.dims;
    let nodes = offset_map(grid);
    let pushed: Vec<Vec3> = nodes
        .iter()
        .enumerate()
        .map(|(idx, node)| {
            let c = u.get(idx);
            let f = node.frame;
            [
                c[0] * f[0][0] + c[1] * f[1][0] + c[2] * f[2][0],
                c[0] * f[0][1] + c[1] * f[1][1] + c[2] * f[2][1],
                c[0] * f[0][2] + c[1] * f[1][2] + c[2] * f[2][2],
            ]
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    for (idx, node) in nodes.iter().enumerate() {
        let (it, ith, iz) = grid.coords(idx);
        let st = [
            (Stencil::at(it, n_t, grid.d_s), 0usize),
            (Stencil::at(ith, n_theta, grid.d_theta), 1),
            (Stencil::at(iz, n_z, grid.d_z), 2),
        ];
        // columns: derivative direction in reference coordinates
        let mut ju = [[0.0; 3]; 3];
        let mut jr = [[0.0; 3]; 3];
        for (s, dir) in st {
            for (k, w) in s.iter() {
                let j = match dir {
                    0 => grid.index(k, ith, iz),
                    1 => grid.index(it, k, iz),
                    _ => grid.index(it, ith, k),
                };
                for r in 0..3 {
                    ju[r][dir] += w * pushed[j][r];
                    jr[r][dir] += w * nodes[j].x[r];
                }
            }
        }
        let jr_inv = inverse3(&jr).ok_or_else(|| KornError::InvalidInput("degenerate node map".into()))?;
        // Cartesian gradient G = Ju Jr^{-1}
        let mut g = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] = (0..3).map(|k| ju[r][k] * jr_inv[k][c]).sum();
            }
        }
        let f = node.frame;
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let gfj = [dot(g[0], f[j]), dot(g[1], f[j]), dot(g[2], f[j])];
                local[i][j] = dot(f[i], gfj);
            }
        }
        out.push(local);
    }
    Ok(MatrixFieldSample { m: out })
}

/// Largest entrywise deviation between the curvilinear and Cartesian
/// gradients over nodes at least one stencil away from the boundary.
pub fn cartesian_deviation(u: &FieldSample, grid: &ShellGrid) -> Result<f64> {
    let a = gradient_full(u, grid)?;
    let b = cartesian_gradient(u, grid)?;
    let GridDims { n_t, n_theta, n_z } = grid.dims;
    let mut dev = 0.0f64;
    for idx in 0..grid.len() {
        let (it, ith, iz) = grid.coords(idx);
        if it == 0 || ith == 0 || iz == 0 || it + 1 == n_t || ith + 1 == n_theta || iz + 1 == n_z {
            continue;
        }
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max((a.m[idx][i][j] - b.m[idx][i][j]).abs());
            }
        }
    }
    Ok(dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub deviation_coarse: f64,
    pub deviation_fine: f64,
    /// `log2(coarse / fine)` for a two-fold refinement.
    pub order: f64,
}

/// Runs [`cartesian_deviation`] for a smooth field `f(t, theta, z)` on two
/// grid levels and reports the observed convergence order.
pub fn cartesian_crosscheck(
    field: impl Fn(f64, f64, f64) -> [f64; 3],
    surface: &SurfacePatch,
    profile: &ThicknessProfile,
    coarse: GridDims,
    fine: GridDims,
) -> Result<CrosscheckReport> {
    let g0 = ShellGrid::new(surface, profile, coarse)?;
    let g1 = ShellGrid::new(surface, profile, fine)?;
    let d0 = cartesian_deviation(&FieldSample::from_fn(&g0, &field), &g0)?;
    let d1 = cartesian_deviation(&FieldSample::from_fn(&g1, &field), &g1)?;
    let ratio = (g0.delta() / g1.delta()).log2();
    Ok(CrosscheckReport {
        deviation_coarse: d0,
        deviation_fine: d1,
        order: (d0 / d1).log2() / ratio,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow {
    i_t: usize,
    i_theta: usize,
    i_z: usize,
    u_t: f64,
    u_theta: f64,
    u_z: f64,
}

/// Writes a field as CSV with columns `i_t,i_theta,i_z,u_t,u_theta,u_z`.
pub fn write_field_csv<W: Write>(u: &FieldSample, dims: GridDims, out: W) -> Result<()> {
    if u.len() != dims.nodes() {
        return Err(KornError::ShapeMismatch {
            expected: dims.nodes(),
            got: u.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    for idx in 0..u.len() {
        let i_t = idx % dims.n_t;
        let i_theta = (idx / dims.n_t) % dims.n_theta;
        let i_z = idx / (dims.n_t * dims.n_theta);
        let [u_t, u_theta, u_z] = u.get(idx);
        w.serialize(FieldRow {
            i_t,
            i_theta,
            i_z,
            u_t,
            u_theta,
            u_z,
        })?;
    }
    w.flush().map_err(|e| KornError::io("<csv>", e))?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; rows may come in any order.
pub fn read_field_csv<R: Read>(input: R, dims: GridDims) -> Result<FieldSample> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut u = FieldSample::zeros(dims.nodes());
    let mut seen = vec![false; dims.nodes()];
    for row in rdr.deserialize() {
        let row: FieldRow = row?;
        if row.i_t >= dims.n_t || row.i_theta >= dims.n_theta || row.i_z >= dims.n_z {
            return Err(KornError::InvalidInput(format!(
                "node ({}, {}, {}) outside grid {}x{}x{}",
                row.i_t, row.i_theta, row.i_z, dims.n_t, dims.n_theta, dims.n_z
            )));
        }
        let idx = row.i_t + dims.n_t * (row.i_theta + dims.n_theta * row.i_z);
        u.set(idx, [row.u_t, row.u_theta, row.u_z]);
        seen[idx] = true;
    }
    let missing = seen.iter().filter(|s| !**s).count();
    if missing > 0 {
        return Err(KornError::InvalidInput(format!("{missing} nodes missing from field CSV")));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, PatchDomain, SurfaceKind};
    use std::f64::consts::PI;

    fn plate() -> SurfacePatch {
        make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap()
    }

    fn sphere() -> SurfacePatch {
        make_builtin_surface(SurfaceKind::SphereCap(1.0), PatchDomain::rectangle(1.0, 1.0, 2.0)).unwrap()
    }

    fn cylinder() -> SurfacePatch {
        make_builtin_surface(SurfaceKind::Cylinder(1.0), PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_field_has_zero_gradient() {
        let g = ShellGrid::new(&sphere(), &ThicknessProfile::constant(0.05), GridDims::new(3, 7, 7)).unwrap();
        let m = gradient_full(&FieldSample::zeros(g.len()), &g).unwrap();
        assert!(m.m.iter().all(|a| a.iter().flatten().all(|x| *x == 0.0)));
    }

    #[test]
    fn plate_normal_stretch_is_diagonal() {
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(0.1), GridDims::new(5, 7, 7)).unwrap();
        let u = FieldSample::from_fn(&g, |t, _, _| [t, 0.0, 0.0]);
        let m = gradient_full(&u, &g).unwrap();
        for a in &m.m {
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                    assert!((a[i][j] - e).abs() < 1e-12);
                }
            }
        }
        // flat case: both formulas coincide
        let f = gradient_simplified(&u, &g).unwrap();
        assert_eq!(f, m);
    }

    #[test]
    fn simplified_entry_on_cylinder_equals_curvature() {
        let g = ShellGrid::new(&cylinder(), &ThicknessProfile::constant(0.05), GridDims::new(3, 7, 7)).unwrap();
        let u = FieldSample::from_fn(&g, |_, _, _| [1.0, 0.0, 0.0]);
        let f = gradient_simplified(&u, &g).unwrap();
        for a in &f.m {
            assert!((a[1][1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sym_definition() {
        let mut a = [[0.0; 3]; 3];
        a[0][1] = 1.0;
        let s = sym(&MatrixFieldSample { m: vec![a] });
        assert_eq!(s.m[0][0][1], 0.5);
        assert_eq!(s.m[0][1][0], 0.5);
        let k = [[0.0, 2.0, -1.0], [-2.0, 0.0, 3.0], [1.0, -3.0, 0.0]];
        assert!(sym(&MatrixFieldSample { m: vec![k] }).m[0].iter().flatten().all(|x| *x == 0.0));
        let sy = [[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]];
        assert_eq!(sym(&MatrixFieldSample { m: vec![sy] }).m[0], sy);
    }

    #[test]
    fn plate_volume_and_sine_integral() {
        let h = 0.1;
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(h), GridDims::new(5, 33, 33)).unwrap();
        let one = vec![1.0; g.len()];
        let zero = vec![0.0; g.len()];
        assert!((l2_inner(&one, &one, &g).unwrap() - 2.0 * h).abs() < 1e-6);
        assert_eq!(l2_inner(&one, &zero, &g).unwrap(), 0.0);
        let f: Vec<f64> = (0..g.len()).map(|i| (PI * g.column_of(i).theta).sin()).collect();
        let v = l2_inner(&f, &f, &g).unwrap();
        assert!(((v - h) / h).abs() < 1e-4);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(0.1), GridDims::new(3, 5, 5)).unwrap();
        let f = vec![1.0; 3];
        assert!(matches!(l2_inner(&f, &f, &g), Err(KornError::ShapeMismatch { .. })));
        assert!(gradient_full(&FieldSample::zeros(4), &g).is_err());
    }

    #[test]
    fn thick_shell_on_tight_curvature_is_singular() {
        let s = make_builtin_surface(SurfaceKind::Cylinder(0.1), PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let g = ShellGrid::new(&s, &ThicknessProfile::constant(0.08), GridDims::new(3, 5, 5)).unwrap();
        let u = FieldSample::zeros(g.len());
        assert!(matches!(gradient_full(&u, &g), Err(KornError::ShiftSingularity { .. })));
        assert!(gradient_simplified(&u, &g).is_ok());
    }

    #[test]
    fn plate_polynomial_field_matches_cartesian_exactly() {
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(0.1), GridDims::new(5, 9, 9)).unwrap();
        let u = FieldSample::from_fn(&g, |t, th, z| {
            [th * z + t * t, 0.5 * th * th - t * z, z * z + 2.0 * t * th]
        });
        assert!(cartesian_deviation(&u, &g).unwrap() < 1e-10);
    }

    #[test]
    fn rigid_translation_on_sphere_is_strain_free() {
        let p = ThicknessProfile::sinusoidal(0.05, 0.5);
        let mut prev = None;
        for n in [17, 33] {
            let g = ShellGrid::new(&sphere(), &p, GridDims::new(5, n, n)).unwrap();
            let u = translation_field(&g, [0.0, 0.0, 1.0]);
            let e = sym(&gradient_full(&u, &g).unwrap());
            let max = e.m.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let delta = g.delta();
            assert!(max <= 10.0 * delta * delta, "max {max}");
            if let Some(p) = prev {
                assert!(max < p);
            }
            prev = Some(max);
        }
    }

    #[test]
    fn field_csv_roundtrip() {
        let g = ShellGrid::new(&sphere(), &ThicknessProfile::constant(0.05), GridDims::new(3, 4, 5)).unwrap();
        let u = FieldSample::from_fn(&g, |t, th, z| [t.sin() + 0.1, th * 1e-7, (z * 3.3).exp()]);
        let mut buf = Vec::new();
        write_field_csv(&u, g.dims, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i_t,i_theta,i_z,u_t,u_theta,u_z\n"));
        let back = read_field_csv(buf.as_slice(), g.dims).unwrap();
        assert_eq!(back, u);
    }

    fn trig(t: f64, th: f64, z: f64) -> [f64; 3] {
        [
            (2.0 * th).sin() * z.cos() + 3.0 * t,
            (th + z).cos() * (1.0 + t),
            (th * z).sin() - 2.0 * t * th,
        ]
    }

    #[test]
    fn crosscheck_converges_at_second_order() {
        for s in [cylinder(), sphere()] {
            let p = ThicknessProfile::sinusoidal(0.1, 0.5);
            let r = cartesian_crosscheck(trig, &s, &p, GridDims::new(5, 17, 17), GridDims::new(9, 33, 33)).unwrap();
            assert!(r.order >= 1.8, "{r:?}");
        }
    }

    #[test]
    fn rotation_is_skew_to_second_order() {
        let g = ShellGrid::new(&sphere(), &ThicknessProfile::constant(0.05), GridDims::new(5, 33, 33)).unwrap();
        let u = rotation_field(&g, [0.3, -0.2, 1.0]);
        let grad = gradient_full(&u, &g).unwrap();
        let e = l2_norm(&sym(&grad), &g).unwrap();
        let w = l2_norm(&skew(&grad), &g).unwrap();
        let d = g.delta();
        assert!(e <= 10.0 * d * d * l2_norm(&grad, &g).unwrap().max(1.0));
        assert!(w > 0.1);
    }

    #[test]
    fn simplified_is_close_to_full() {
        for h in [0.04, 0.02, 0.01] {
            let g = ShellGrid::new(&sphere(), &ThicknessProfile::sinusoidal(h, 0.5), GridDims::new(5, 17, 17)).unwrap();
            let u = FieldSample::from_fn(&g, trig);
            let full = gradient_full(&u, &g).unwrap();
            let simp = gradient_simplified(&u, &g).unwrap();
            let diff = l2_norm(&full.sub(&simp), &g).unwrap();
            let n = l2_norm(&full, &g).unwrap();
            // kappa = 1, |t| <= 1.5 h, 1 + t kappa >= 1 - 1.5 h
            assert!(diff <= 1.5 * h / (1.0 - 1.5 * h) * n, "h {h}: {diff} vs {n}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grid() -> ShellGrid {
            ShellGrid::new(&sphere(), &ThicknessProfile::sinusoidal(0.05, 0.5), GridDims::new(3, 6, 5)).unwrap()
        }

        fn field(n: usize) -> impl Strategy<Value = FieldSample> {
            prop::collection::vec(-1.0f64..1.0, 3 * n).prop_map(|v| FieldSample::from_stacked(&v))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn gradient_is_linear(u in field(90), v in field(90), a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let g = grid();
                let lhs = gradient_full(&u.combine(a, &v, b), &g).unwrap();
                let gu = gradient_full(&u, &g).unwrap();
                let gv = gradient_full(&v, &g).unwrap();
                let scale = gu.m.iter().chain(&gv.m).flatten().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
                for idx in 0..g.len() {
                    for i in 0..3 {
                        for j in 0..3 {
                            let r = a * gu.m[idx][i][j] + b * gv.m[idx][i][j];
                            prop_assert!((lhs.m[idx][i][j] - r).abs() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
                        }
                    }
                }
            }

            #[test]
            fn inner_product_is_psd_and_cauchy_schwarz(u in field(90), v in field(90)) {
                let g = grid();
                let uv = l2_inner(&u, &v, &g).unwrap();
                let uu = l2_inner(&u, &u, &g).unwrap();
                let vv = l2_inner(&v, &v, &g).unwrap();
                prop_assert!(uu >= 0.0 && vv >= 0.0);
                prop_assert!(uv.abs() <= (uu * vv).sqrt() * (1.0 + 1e-12));
                prop_assert!((uv - l2_inner(&v, &u, &g).unwrap()).abs() <= 1e-15 * uu.max(vv));
            }

            #[test]
            fn sym_never_exceeds_full_norm(u in field(90)) {
                let g = grid();
                let m = gradient_full(&u, &g).unwrap();
                prop_assert!(l2_norm(&sym(&m), &g).unwrap() <= l2_norm(&m, &g).unwrap() * (1.0 + 1e-14));
            }
        }
    }
}
