//! Korn's first inequality on a thin planar strip with the optimal constant
//! skew matrix subtracted.

use crate::error::Result;
use crate::linalg::{dense_top, EigenEstimate, SymCsr};
use crate::strip::StripGrid;

/// Forms over the stacked unknown `U[2 node + c]`, `c = 0` for `u`, `1` for `v`.
#[derive(Debug, Clone)]
pub struct KornFirst2dForms {
    /// `|grad U - A*(U)|^2`
    pub g: SymCsr,
    /// `|e(U)|^2`
    pub e: SymCsr,
    /// Mass-orthogonal projector onto rigid motions, in the mass inner product.
    pub p: SymCsr,
    pub grid: StripGrid,
}

impl KornFirst2dForms {
    /// `|grad U - A*|^2 / |e(U)|^2`
    pub fn quotient(&self, u: &[f64]) -> f64 {
        self.g.quad(u) / self.e.quad(u)
    }
}

fn add_outer(trip: &mut Vec<(usize, usize, f64)>, row: &[(usize, f64)], w: f64) {
    for &(a, x) in row {
        for &(b, y) in row {
            trip.push((a, b, w * x * y));
        }
    }
}

fn dense_outer(trip: &mut Vec<(usize, usize, f64)>, v: &[f64], w: f64) {
    for (a, x) in v.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (b, y) in v.iter().enumerate() {
            if *y != 0.0 {
                trip.push((a, b, w * x * y));
            }
        }
    }
}

pub fn korn_first_2d_forms(grid: &StripGrid) -> Result<KornFirst2dForms> {
    let n = grid.len();
    let dof = |node: usize, c: usize| 2 * node + c;
    let mut tg = Vec::new();
    let mut te = Vec::new();
    // l = sum w (u_y - v_x) / 2
    let mut ell = vec![0.0; 2 * n];
    for k in 0..n {
        let w = grid.weight[k];
        let [dx, dy] = grid.partial_stencils(k);
        let ux: Vec<_> = dx.iter().map(|&(a, c)| (dof(a, 0), c)).collect();
        let uy: Vec<_> = dy.iter().map(|&(a, c)| (dof(a, 0), c)).collect();
        let vx: Vec<_> = dx.iter().map(|&(a, c)| (dof(a, 1), c)).collect();
        let vy: Vec<_> = dy.iter().map(|&(a, c)| (dof(a, 1), c)).collect();
        for r in [&ux, &uy, &vx, &vy] {
            add_outer(&mut tg, r, w);
        }
        add_outer(&mut te, &ux, w);
        add_outer(&mut te, &vy, w);
        let shear: Vec<_> = uy
            .iter()
            .map(|&(a, c)| (a, 0.5 * c))
            .chain(vx.iter().map(|&(a, c)| (a, 0.5 * c)))
            .collect();
        add_outer(&mut te, &shear, 2.0 * w);
        for &(a, c) in &uy {
            ell[a] += 0.5 * w * c;
        }
        for &(a, c) in &vx {
            ell[a] -= 0.5 * w * c;
        }
    }
    let area = grid.area();
    dense_outer(&mut tg, &ell, -2.0 / area);

    // rigid basis (1,0), (0,1), (y,-x) and the projector M R (R^T M R)^{-1} R^T M
    let mut mr = [vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]];
    for k in 0..n {
        let (_, j) = grid.coords(k);
        let w = grid.weight[k];
        mr[0][dof(k, 0)] = w;
        mr[1][dof(k, 1)] = w;
        mr[2][dof(k, 0)] = w * grid.y[j];
        mr[2][dof(k, 1)] = -w * grid.x[k];
    }
    let mut gram = [[0.0; 3]; 3];
    let r_at = |r: usize, d: usize| {
        let k = d / 2;
        let (_, j) = grid.coords(k);
        match (r, d % 2) {
            (0, 0) | (1, 1) => 1.0,
            (2, 0) => grid.y[j],
            (2, 1) => -grid.x[k],
            _ => 0.0,
        }
    };
    for (a, row) in gram.iter_mut().enumerate() {
        for (b, g) in row.iter_mut().enumerate() {
            *g = (0..2 * n).map(|d| mr[a][d] * r_at(b, d)).sum();
        }
    }
    // orthonormalize M R columns against the Gram matrix by Cholesky
    let l00 = gram[0][0].sqrt();
    let l10 = gram[1][0] / l00;
    let l20 = gram[2][0] / l00;
    let l11 = (gram[1][1] - l10 * l10).sqrt();
    let l21 = (gram[2][1] - l20 * l10) / l11;
    let l22 = (gram[2][2] - l20 * l20 - l21 * l21).sqrt();
    let q0: Vec<f64> = mr[0].iter().map(|x| x / l00).collect();
    let q1: Vec<f64> = (0..2 * n).map(|d| (mr[1][d] - l10 * q0[d]) / l11).collect();
    let q2: Vec<f64> = (0..2 * n).map(|d| (mr[2][d] - l20 * q0[d] - l21 * q1[d]) / l22).collect();
    let mut tp = Vec::new();
    for q in [&q0, &q1, &q2] {
        dense_outer(&mut tp, q, 1.0);
    }
    Ok(KornFirst2dForms {
        g: SymCsr::from_triplets(2 * n, tg),
        e: SymCsr::from_triplets(2 * n, te),
        p: SymCsr::from_triplets(2 * n, tp),
        grid: grid.clone(),
    })
}

/// `K1(h)^2 = max |grad U - A*(U)|^2 / |e(U)|^2` over fields mass-orthogonal
/// to rigid motions, via the pencil `(G, E + P)`.
pub fn korn_first_2d_constant(grid: &StripGrid) -> Result<EigenEstimate> {
    let f = korn_first_2d_forms(grid)?;
    let q = SymCsr::combine(&[(1.0, &f.e), (1.0, &f.p)])?;
    dense_top(&f.g, &q)
}
