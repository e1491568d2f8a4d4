//! Empirical optimal constants of the shell inequalities as top generalized
//! eigenvalues of the assembled forms.

mod first2d;
mod forms;

use faer::sparse::linalg::solvers::SymbolicLlt;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{KornError, Result};
use crate::linalg::{dense_top, lanczos_top, EigenEstimate, EigenOptions, SpdSolver, SymCsr};
use crate::operators::{rotation_field, translation_field};

pub use first2d::{korn_first_2d_constant, korn_first_2d_forms, KornFirst2dForms};
pub use forms::{assemble_forms, stack, QuadraticFormSet};

/// Reuses the symbolic factorization and the previous witness across a
/// family of denominators with a common sparsity pattern.
struct Pencil<'a> {
    g: &'a SymCsr,
    opts: EigenOptions,
    symbolic: Option<SymbolicLlt<usize>>,
    warm: Option<Vec<f64>>,
}

impl<'a> Pencil<'a> {
    fn new(g: &'a SymCsr, opts: &EigenOptions) -> Self {
        Pencil {
            g,
            opts: *opts,
            symbolic: None,
            warm: None,
        }
    }

    fn solve(&mut self, q: &SymCsr) -> Result<EigenEstimate> {
        let est = if self.g.n() <= self.opts.dense_max {
            dense_top(self.g, q)?
        } else {
            let solver = SpdSolver::new(q, self.symbolic.as_ref())?;
            if self.symbolic.is_none() {
                self.symbolic = Some(solver.symbolic().clone());
            }
            lanczos_top(self.g, q, &solver, &self.opts, self.warm.as_deref())?
        };
        self.warm = Some(est.witness.clone());
        Ok(est)
    }
}

fn require_rectangle(forms: &QuadraticFormSet) -> Result<()> {
    if !forms.grid.surface().domain().is_rectangle() {
        return Err(KornError::InvalidInput(
            "eigen estimates need a rectangular patch; masked nodes make the mass form singular".into(),
        ));
    }
    Ok(())
}

/// `max_U U^T G U / U^T (M + E) U`
pub fn korn_second_constant(forms: &QuadraticFormSet, opts: &EigenOptions) -> Result<EigenEstimate> {
    require_rectangle(forms)?;
    let q = SymCsr::combine(&[(1.0, &forms.m), (1.0, &forms.e)])?;
    Pencil::new(&forms.g, opts).solve(&q)
}

/// Exact interpolation quotient
/// `|grad u|^2 / (|u_t| |e(u)| / h + |u|^2 + |e(u)|^2)` of one field.
pub fn interpolation_quotient(forms: &QuadraticFormSet, u: &[f64]) -> f64 {
    let [g, e, n, m] = forms.norms(u);
    g / ((n.max(0.0) * e.max(0.0)).sqrt() / forms.h() + m + e)
}

/// Right-hand side of the interpolation inequality for constant `c`.
pub fn interpolation_rhs(forms: &QuadraticFormSet, u: &[f64], c: f64) -> f64 {
    let [_, e, n, m] = forms.norms(u);
    c * ((n.max(0.0) * e.max(0.0)).sqrt() / forms.h() + m + e)
}

/// Search bracket for the relaxation parameter, in decades of `s h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub log10_min: f64,
    pub log10_max: f64,
    /// Coarse scan points across the bracket before the golden refinement.
    pub scan_points: usize,
    /// Final bracket width in natural-log units of `s`.
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            log10_min: -6.0,
            log10_max: 4.0,
            scan_points: 21,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationEstimate {
    /// Interpolation quotient of the witness field.
    pub c_int: f64,
    /// Maximizing relaxation parameter; infinite when the supremum is the
    /// `u_t = 0` limit. May lie below the bracket when the rigid-motion
    /// span wins.
    pub s_star: f64,
    /// `lambda_max(G, Q_s)` at `s_star`; never above `c_int`.
    pub lambda_at_s_star: f64,
    pub estimate: EigenEstimate,
    pub evaluations: usize,
}

/// `Q_s = s/2 N + 1/(2 s h^2) E + M + E`
pub fn relaxed_denominator(forms: &QuadraticFormSet, s: f64) -> Result<SymCsr> {
    let h = forms.h();
    SymCsr::combine(&[
        (0.5 * s, &forms.n),
        (0.5 / (s * h * h), &forms.e),
        (1.0, &forms.m),
        (1.0, &forms.e),
    ])
}

/// The `s -> infinity` limit of `lambda_max(G, Q_s)`: the top eigenvalue of
/// `(G, M + E)` on fields with `u_t = 0`, lifted back to the full space.
/// `None` when `N` is definite.
pub fn normal_kernel_limit(forms: &QuadraticFormSet, opts: &EigenOptions) -> Result<Option<EigenEstimate>> {
    let keep: Vec<bool> = (0..forms.dim()).map(|k| forms.n.get(k, k) == 0.0).collect();
    if !keep.contains(&true) {
        return Ok(None);
    }
    let (g, kept) = forms.g.restrict(&keep);
    let q = SymCsr::combine(&[(1.0, &forms.m), (1.0, &forms.e)])?;
    let (q, _) = q.restrict(&keep);
    let mut est = Pencil::new(&g, opts).solve(&q)?;
    let mut full = vec![0.0; forms.dim()];
    for (i, &k) in kept.iter().enumerate() {
        full[k] = est.witness[i];
    }
    est.witness = full;
    Ok(Some(est))
}

/// Pushed-back translations and infinitesimal rotations, orthonormal in the
/// mass form. Empty when the forms do not live on their grid's unknowns.
pub fn rigid_basis(forms: &QuadraticFormSet) -> Vec<Vec<f64>> {
    let grid = &forms.grid;
    if forms.dim() != 3 * grid.len() {
        return Vec::new();
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..6 {
        let mut axis = [0.0; 3];
        axis[k % 3] = 1.0;
        let field = if k < 3 {
            translation_field(grid, axis)
        } else {
            rotation_field(grid, axis)
        };
        let mut v = stack(&field);
        let scale = forms.m.quad(&v).sqrt();
        for b in &basis {
            let mb = forms.m.matvec(b);
            let c: f64 = v.iter().zip(&mb).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = forms.m.quad(&v).sqrt();
        if norm > 1e-8 * scale {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

fn projected(a: &SymCsr, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let ab: Vec<Vec<f64>> = basis.iter().map(|b| a.matvec(b)).collect();
    basis
        .iter()
        .map(|bi| ab.iter().map(|abj| bi.iter().zip(abj).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

/// Drops eigenvalues of a small symmetric PSD matrix that are round-off
/// relative to the unit-mass basis, so that the `1/s` weight on it cannot
/// amplify noise of either sign.
fn clamp_round_off(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mat = Mat::from_fn(k, k, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let Ok(evd) = mat.self_adjoint_eigen(Side::Lower) else {
        return a.to_vec();
    };
    let (u, d) = (evd.U(), evd.S());
    let top = (0..k).map(|i| d[i]).fold(1.0f64, f64::max);
    let lam: Vec<f64> = (0..k).map(|i| if d[i] > 1e-12 * top { d[i] } else { 0.0 }).collect();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|l| u[(i, l)] * lam[l] * u[(j, l)]).sum()).collect())
        .collect()
}

/// `sup_s lambda_max(G, Q_s)` restricted to the rigid-motion span. The
/// restricted pencil is small and well conditioned for every `s`, so it is
/// scanned far below the search bracket.
pub fn rigid_span_supremum(forms: &QuadraticFormSet, search: &SearchOptions) -> Result<Option<InterpolationEstimate>> {
    let basis = rigid_basis(forms);
    if basis.is_empty() {
        return Ok(None);
    }
    let k = basis.len();
    let [g, n, e, m] = [&forms.g, &forms.n, &forms.e, &forms.m].map(|a| projected(a, &basis));
    let e = clamp_round_off(&e);
    let h = forms.h();
    let dense = |a: &[Vec<f64>]| {
        let trip = (0..k).flat_map(|i| (0..k).map(move |j| (i, j, a[i][j]))).collect();
        SymCsr::from_triplets(k, trip)
    };
    let g = dense(&g);
    let solve = |x: f64| -> Result<EigenEstimate> {
        let s = x.exp();
        let (cn, ce) = (0.5 * s, 1.0 + 0.5 / (s * h * h));
        let q: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| m[i][j] + cn * n[i][j] + ce * e[i][j]).collect())
            .collect();
        dense_top(&g, &dense(&q))
    };
    let ln10 = std::f64::consts::LN_10;
    let (lo, hi) = ((search.log10_min - 14.0) * ln10 - h.ln(), search.log10_max * ln10 - h.ln());
    let step = 0.25 * ln10;
    let mut best: Option<(f64, EigenEstimate)> = None;
    let mut x = lo;
    while x <= hi {
        let est = solve(x)?;
        if best.as_ref().is_none_or(|b| est.lambda > b.1.lambda) {
            best = Some((x, est));
        }
        x += step;
    }
    let (mut x_best, mut est) = best.unwrap();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (x_best - step, x_best + step);
    while b - a > search.tol {
        let (c, d) = (b - phi * (b - a), a + phi * (b - a));
        let (ec, ed) = (solve(c)?, solve(d)?);
        if ec.lambda >= ed.lambda {
            b = d;
            if ec.lambda > est.lambda {
                (x_best, est) = (c, ec);
            }
        } else {
            a = c;
            if ed.lambda > est.lambda {
                (x_best, est) = (d, ed);
            }
        }
    }
    let mut witness = vec![0.0; forms.dim()];
    for (c, v) in est.witness.iter().zip(&basis) {
        witness.iter_mut().zip(v).for_each(|(w, x)| *w += c * x);
    }
    est.witness = witness;
    let q = interpolation_quotient(forms, &est.witness);
    Ok(Some(InterpolationEstimate {
        c_int: q.max(est.lambda),
        s_star: x_best.exp(),
        lambda_at_s_star: est.lambda,
        estimate: est,
        evaluations: 0,
    }))
}

/// Largest problem solved densely when the iterative solver gives up on an
/// ill-conditioned relaxed denominator.
pub const DENSE_FALLBACK_MAX: usize = 6000;

/// Decades below the bracket a maximum at its lower edge may be followed.
pub const EXTENSION_DECADES: f64 = 3.0;

/// Optimal interpolation constant over the discrete space via
/// `C = sup_s lambda_max(G, Q_s)`: coarse scan over the bracket, then
/// golden-section refinement around the best scan point. A maximum at the
/// large-`s` end is resolved by the exact `u_t = 0` limit. A maximum at the
/// small-`s` end is followed below the bracket, by up to
/// [`EXTENSION_DECADES`], until it turns over. The pencil grows
/// ill-conditioned there, and the iterative solver hands over to the dense
/// one up to [`DENSE_FALLBACK_MAX`] unknowns; when that is not possible, the supremum is
/// carried by near-rigid fields and is resolved on the rigid-motion span if
/// that reaches the edge value. Otherwise it is reported as a bracket error.
pub fn interpolation_constant(
    forms: &QuadraticFormSet,
    search: &SearchOptions,
    opts: &EigenOptions,
) -> Result<InterpolationEstimate> {
    require_rectangle(forms)?;
    let h = forms.h();
    if !(h > 0.0) {
        return Err(KornError::InvalidInput("thickness scale must be positive".into()));
    }
    if search.log10_max - search.log10_min < 6.0 || search.scan_points < 3 {
        return Err(KornError::InvalidInput(
            "search bracket must span at least 6 decades with 3 or more scan points".into(),
        ));
    }
    let ln10 = std::f64::consts::LN_10;
    let (lo, hi) = (search.log10_min * ln10 - h.ln(), search.log10_max * ln10 - h.ln());
    let mut pencil = Pencil::new(&forms.g, opts);
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: f64, pencil: &mut Pencil| -> Result<EigenEstimate> {
        evaluations.set(evaluations.get() + 1);
        let q = relaxed_denominator(forms, x.exp())?;
        match pencil.solve(&q) {
            Err(KornError::NoConvergence { .. }) if forms.dim() <= DENSE_FALLBACK_MAX => dense_top(&forms.g, &q),
            other => other,
        }
    };

    let step = (hi - lo) / (search.scan_points - 1) as f64;
    let edge = |x: f64| KornError::BracketEdge {
        log10_sh: (x + h.ln()) / ln10,
    };
    let mut best: Option<(usize, f64, EigenEstimate)> = None;
    for k in 0..search.scan_points {
        let x = lo + k as f64 * step;
        let e = eval(x, &mut pencil)?;
        if best.as_ref().is_none_or(|b| e.lambda > b.2.lambda) {
            best = Some((k, x, e));
        }
    }
    let (k_best, mut x_best, mut e_best) = best.unwrap();
    let rigid = rigid_span_supremum(forms, search)?;
    if k_best == 0 {
        // follow the increase below the bracket while the solver still copes
        let floor = lo - EXTENSION_DECADES * ln10;
        let mut turned = false;
        while x_best - step >= floor - 1e-9 {
            match eval(x_best - step, &mut pencil) {
                Ok(e) if e.lambda > e_best.lambda => {
                    x_best -= step;
                    e_best = e;
                }
                Ok(_) => {
                    turned = true;
                    break;
                }
                Err(KornError::NoConvergence { .. }) => break,
                Err(err) => return Err(err),
            }
        }
        if !turned {
            return match rigid {
                Some(r) if r.c_int >= e_best.lambda * (1.0 - 1e-9) => Ok(InterpolationEstimate {
                    evaluations: evaluations.get(),
                    ..r
                }),
                _ => Err(edge(x_best)),
            };
        }
    }
    let limit = normal_kernel_limit(forms, opts)?;
    evaluations.set(evaluations.get() + 1);
    let from_limit = |limit: EigenEstimate, evaluations: usize| InterpolationEstimate {
        c_int: limit.lambda,
        s_star: f64::INFINITY,
        lambda_at_s_star: limit.lambda,
        estimate: limit,
        evaluations,
    };
    if k_best + 1 == search.scan_points {
        return match limit {
            Some(l) if l.lambda >= e_best.lambda * (1.0 - 1e-9) => Ok(from_limit(l, evaluations.get())),
            _ => Err(edge(x_best)),
        };
    }
    pencil.warm = Some(e_best.witness.clone());

    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (x_best - step, x_best + step);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut ec = eval(c, &mut pencil)?;
    let mut ed = eval(d, &mut pencil)?;
    while b - a > search.tol {
        if ec.lambda >= ed.lambda {
            b = d;
            d = c;
            ed = ec;
            c = b - phi * (b - a);
            ec = eval(c, &mut pencil)?;
        } else {
            a = c;
            c = d;
            ec = ed;
            d = a + phi * (b - a);
            ed = eval(d, &mut pencil)?;
        }
    }
    for (x, e) in [(c, ec), (d, ed)] {
        if e.lambda > e_best.lambda {
            x_best = x;
            e_best = e;
        }
    }
    let q = interpolation_quotient(forms, &e_best.witness);
    let c_int = q.max(e_best.lambda);
    if let Some(l) = limit.filter(|l| l.lambda > c_int) {
        return Ok(from_limit(l, evaluations.get()));
    }
    if let Some(r) = rigid.filter(|r| r.c_int > c_int) {
        return Ok(InterpolationEstimate {
            evaluations: evaluations.get(),
            ..r
        });
    }
    Ok(InterpolationEstimate {
        c_int,
        s_star: x_best.exp(),
        lambda_at_s_star: e_best.lambda,
        estimate: e_best,
        evaluations: evaluations.get(),
    })
}

/// `max_U U^T G U / U^T (N_in + E) U` on surfaces of one-signed Gaussian
/// curvature.
pub fn curvature_refined_quotients(forms: &QuadraticFormSet, opts: &EigenOptions) -> Result<EigenEstimate> {
    require_rectangle(forms)?;
    let grid = &forms.grid;
    let kg: Vec<f64> = grid.columns.iter().map(|c| c.point.gaussian_curvature()).collect();
    let min = kg.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = kg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0 || max < 0.0) {
        return Err(KornError::Rejected(format!(
            "{} has Gaussian curvature in [{min:.3e}, {max:.3e}]; the refined quotient needs K_G of one sign",
            grid.surface().kind().name()
        )));
    }
    let q = SymCsr::combine(&[(1.0, &forms.n_in), (1.0, &forms.e)])?;
    Pencil::new(&forms.g, opts).solve(&q)
}
