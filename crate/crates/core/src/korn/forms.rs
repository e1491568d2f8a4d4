//! Sparse assembly of the squared norms `|grad u|^2`, `|e(u)|^2`, `|u_t|^2`,
//! `|u|^2` and `|u_in|^2` over the stacked unknown `U[3 node + c]`.

use crate::error::{KornError, Result};
use crate::geometry::{GridDims, ShellGrid};
use crate::linalg::SymCsr;
use crate::operators::{gradient_formula, FieldSample, Mat3};
use crate::stencil::Stencil;

#[derive(Debug, Clone)]
pub struct QuadraticFormSet {
    pub g: SymCsr,
    pub e: SymCsr,
    pub n: SymCsr,
    pub m: SymCsr,
    pub n_in: SymCsr,
    pub grid: ShellGrid,
}

impl QuadraticFormSet {
    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn dim(&self) -> usize {
        self.g.n()
    }

    /// `(U^T G U, U^T E U, U^T N U, U^T M U)`
    pub fn norms(&self, u: &[f64]) -> [f64; 4] {
        [self.g.quad(u), self.e.quad(u), self.n.quad(u), self.m.quad(u)]
    }
}

/// Linear map from nodal unknowns to the nine gradient entries at one node.
pub(crate) struct LocalGradient {
    pub nodes: Vec<usize>,
    /// `rows[3 i + j]` holds coefficients over `3 * nodes.len()` local unknowns.
    pub rows: Vec<Vec<f64>>,
}

fn local_slot(nodes: &mut Vec<usize>, k: usize) -> usize {
    match nodes.iter().position(|&n| n == k) {
        Some(p) => p,
        None => {
            nodes.push(k);
            nodes.len() - 1
        }
    }
}

pub(crate) fn local_gradient(grid: &ShellGrid, idx: usize) -> LocalGradient {
    let GridDims { n_t, n_theta, n_z } = grid.dims;
    let (it, ith, iz) = grid.coords(idx);
    let col = grid.column_of(idx);
    let total = col.thick.total();
    let [t_th, t_z] = grid.t_slopes(idx);
    let ss = Stencil::at(it, n_t, grid.d_s);
    let st = Stencil::at(ith, n_theta, grid.d_theta);
    let sz = Stencil::at(iz, n_z, grid.d_z);

    let mut dir: [Vec<(usize, f64)>; 3] = Default::default();
    for (k, w) in ss.iter() {
        let node = grid.index(k, ith, iz);
        dir[0].push((node, w / total));
        dir[1].push((node, -t_th * w / total));
        dir[2].push((node, -t_z * w / total));
    }
    dir[1].extend(st.iter().map(|(k, w)| (grid.index(it, k, iz), w)));
    dir[2].extend(sz.iter().map(|(k, w)| (grid.index(it, ith, k), w)));

    let mut nodes = vec![idx];
    for d in &dir {
        for &(k, _) in d {
            local_slot(&mut nodes, k);
        }
    }
    let width = 3 * nodes.len();
    let mut rows = vec![vec![0.0; width]; 9];

    let t = grid.t[idx];
    let zero: Mat3 = [[0.0; 3]; 3];
    for c in 0..3 {
        for (d, stencil) in dir.iter().enumerate() {
            let mut p = zero;
            p[c][d] = 1.0;
            let coef = gradient_formula(&p, [0.0; 3], &col.point, t, true);
            for i in 0..3 {
                for j in 0..3 {
                    let a = coef[i][j];
                    if a == 0.0 {
                        continue;
                    }
                    for &(k, w) in stencil {
                        let slot = local_slot(&mut nodes, k);
                        rows[3 * i + j][3 * slot + c] += a * w;
                    }
                }
            }
        }
        let mut v = [0.0; 3];
        v[c] = 1.0;
        let coef = gradient_formula(&zero, v, &col.point, t, true);
        for i in 0..3 {
            for j in 0..3 {
                rows[3 * i + j][c] += coef[i][j];
            }
        }
    }
    LocalGradient { nodes, rows }
}

fn push_outer(trip: &mut Vec<(usize, usize, f64)>, nodes: &[usize], rows: &[(f64, Vec<f64>)]) {
    let width = 3 * nodes.len();
    let gdof = |l: usize| 3 * nodes[l / 3] + l % 3;
    let mut local = vec![0.0; width * width];
    for (w, r) in rows {
        for a in 0..width {
            if r[a] == 0.0 {
                continue;
            }
            let ra = w * r[a];
            for b in 0..width {
                local[a * width + b] += ra * r[b];
            }
        }
    }
    for a in 0..width {
        for b in 0..width {
            let v = local[a * width + b];
            if v != 0.0 {
                trip.push((gdof(a), gdof(b), v));
            }
        }
    }
}

/// Assembles all forms of the norm functionals with the grid quadrature.
pub fn assemble_forms(grid: &ShellGrid) -> Result<QuadraticFormSet> {
    let (shift, node) = grid.min_shift_factor();
    if shift < 0.5 {
        return Err(KornError::ShiftSingularity { value: shift, node });
    }
    let n = grid.len();
    let mut tg = Vec::new();
    let mut te = Vec::new();
    for idx in 0..n {
        let w = grid.weight[idx];
        if w == 0.0 {
            continue;
        }
        let lg = local_gradient(grid, idx);
        let grows: Vec<(f64, Vec<f64>)> = lg.rows.iter().map(|r| (w, r.clone())).collect();
        push_outer(&mut tg, &lg.nodes, &grows);
        let mut erows = Vec::with_capacity(6);
        for i in 0..3 {
            erows.push((w, lg.rows[4 * i].clone()));
            for j in i + 1..3 {
                let s: Vec<f64> = lg.rows[3 * i + j]
                    .iter()
                    .zip(&lg.rows[3 * j + i])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                erows.push((2.0 * w, s));
            }
        }
        push_outer(&mut te, &lg.nodes, &erows);
    }
    let diag = |mask: [f64; 3]| {
        let d: Vec<f64> = (0..3 * n).map(|k| grid.weight[k / 3] * mask[k % 3]).collect();
        SymCsr::diagonal(&d)
    };
    Ok(QuadraticFormSet {
        g: SymCsr::from_triplets(3 * n, tg),
        e: SymCsr::from_triplets(3 * n, te),
        n: diag([1.0, 0.0, 0.0]),
        m: diag([1.0, 1.0, 1.0]),
        n_in: diag([0.0, 1.0, 1.0]),
        grid: grid.clone(),
    })
}

/// Stacked vector of a field, for use with the forms.
pub fn stack(u: &FieldSample) -> Vec<f64> {
    u.to_stacked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, PatchDomain, SurfaceKind, ThicknessProfile};
    use crate::operators::{gradient_full, l2_norm, sym, translation_field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(kind: SurfaceKind, dims: GridDims) -> ShellGrid {
        let (z0, z1) = match kind {
            SurfaceKind::SphereCap(_) => (1.0, 2.0),
            _ => (0.0, 1.0),
        };
        let s = make_builtin_surface(kind, PatchDomain::rectangle(1.0, z0, z1)).unwrap();
        ShellGrid::new(&s, &ThicknessProfile::sinusoidal(0.05, 0.5), dims).unwrap()
    }

    fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn forms_match_operator_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [SurfaceKind::SphereCap(1.0), SurfaceKind::Catenoid(1.0), SurfaceKind::Plate] {
            let g = grid(kind, GridDims::new(3, 6, 5));
            let f = assemble_forms(&g).unwrap();
            assert!(f.g.asymmetry() < 1e-9 * f.g.get(0, 0).abs());
            for _ in 0..20 {
                let u = random_field(g.len(), &mut rng);
                let fs = FieldSample::from_stacked(&u);
                let grad = gradient_full(&fs, &g).unwrap();
                let gn = l2_norm(&grad, &g).unwrap().powi(2);
                let en = l2_norm(&sym(&grad), &g).unwrap().powi(2);
                let nn = l2_norm(&fs.normal_part(), &g).unwrap().powi(2);
                let mn = l2_norm(&fs, &g).unwrap().powi(2);
                let [qg, qe, qn, qm] = f.norms(&u);
                assert!(((qg - gn) / gn).abs() < 1e-10);
                assert!(((qe - en) / en).abs() < 1e-10);
                assert!(((qn - nn) / nn).abs() < 1e-12);
                assert!(((qm - mn) / mn).abs() < 1e-12);
                assert!(qg >= qe && qe >= 0.0);
            }
        }
    }

    #[test]
    fn translation_is_nearly_strain_free() {
        let g = grid(SurfaceKind::SphereCap(1.0), GridDims::new(3, 17, 17));
        let f = assemble_forms(&g).unwrap();
        let u = stack(&translation_field(&g, [0.2, 0.0, 1.0]));
        let d = g.delta();
        assert!(f.e.quad(&u) <= (10.0 * d * d).powi(2) * f.m.quad(&u));
    }

    #[test]
    fn thick_shell_is_rejected() {
        let s = make_builtin_surface(SurfaceKind::Cylinder(0.1), PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let g = ShellGrid::new(&s, &ThicknessProfile::constant(0.08), GridDims::new(3, 5, 5)).unwrap();
        assert!(matches!(assemble_forms(&g), Err(KornError::ShiftSingularity { .. })));
    }
}
