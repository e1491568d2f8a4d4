//! Top eigenpair of the symmetric-definite pencil `G v = lambda Q v`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Mat, MatMut, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sparse::SymCsr;
use crate::error::{KornError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Iterative,
}

impl EigenMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EigenMethod::Dense => "dense",
            EigenMethod::Iterative => "iterative",
        }
    }
}

/// Largest generalized eigenvalue together with the field attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenEstimate {
    /// Rayleigh quotient of `witness`.
    pub lambda: f64,
    /// `|G v - lambda Q v| / (lambda |Q v|)`
    pub residual: f64,
    pub iterations: usize,
    pub method: EigenMethod,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Problems with at most this many unknowns are solved densely.
    pub dense_max: usize,
    pub tol: f64,
    /// Cap on operator applications for the iterative solver.
    pub max_iter: usize,
    pub krylov_dim: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
    /// Accept the Ritz pair once its value has changed by less than this
    /// (relative) over `stall_restarts` consecutive restarts; the residual is
    /// still reported. Guards against round-off floors on badly scaled pencils.
    pub stall_tol: f64,
    pub stall_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_max: 6000,
            tol: 1e-9,
            max_iter: 20_000,
            krylov_dim: 64,
            keep: 16,
            stall_tol: 1e-13,
            stall_restarts: 4,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `v^T G v / v^T Q v`
pub fn rayleigh(g: &SymCsr, q: &SymCsr, v: &[f64]) -> f64 {
    g.quad(v) / q.quad(v)
}

/// Relative eigen-residual of `(lambda, v)`.
pub fn residual(g: &SymCsr, q: &SymCsr, v: &[f64], lambda: f64) -> f64 {
    let gv = g.matvec(v);
    let qv = q.matvec(v);
    let r: Vec<f64> = gv.iter().zip(&qv).map(|(a, b)| a - lambda * b).collect();
    let den = if lambda > 0.0 { lambda * norm(&qv) } else { norm(&qv) };
    norm(&r) / den
}

fn finish(g: &SymCsr, q: &SymCsr, v: Vec<f64>, iterations: usize, method: EigenMethod) -> EigenEstimate {
    let lambda = rayleigh(g, q, &v);
    EigenEstimate {
        lambda,
        residual: residual(g, q, &v, lambda),
        iterations,
        method,
        witness: v,
    }
}

fn check_pair(g: &SymCsr, q: &SymCsr) -> Result<()> {
    if g.n() != q.n() {
        return Err(KornError::ShapeMismatch {
            expected: q.n(),
            got: g.n(),
        });
    }
    if g.n() == 0 {
        return Err(KornError::InvalidInput("empty eigenproblem".into()));
    }
    Ok(())
}

/// Dispatches on problem size: dense below `dense_max`, Lanczos above.
pub fn top_generalized(g: &SymCsr, q: &SymCsr, opts: &EigenOptions) -> Result<EigenEstimate> {
    if g.n() <= opts.dense_max {
        dense_top(g, q)
    } else {
        let solver = SpdSolver::new(q, None)?;
        lanczos_top(g, q, &solver, opts, None)
    }
}

/// Cholesky reduction `C = L^{-1} G L^{-T}` followed by a full symmetric
/// eigendecomposition.
pub fn dense_top(g: &SymCsr, q: &SymCsr) -> Result<EigenEstimate> {
    check_pair(g, q)?;
    let n = g.n();
    let qd = q.to_dense();
    let llt = qd
        .llt(Side::Lower)
        .map_err(|e| KornError::Factorization(format!("denominator form is not positive definite: {e:?}")))?;
    let l = llt.L();
    let mut x = g.to_dense();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| KornError::Factorization(format!("{e:?}")))?;
    let u = evd.U();
    let mut y = Mat::from_fn(n, 1, |i, _| u[(i, n - 1)]);
    l.transpose().solve_upper_triangular_in_place(y.as_mut());
    let v: Vec<f64> = (0..n).map(|i| y[(i, 0)]).collect();
    Ok(finish(g, q, v, 1, EigenMethod::Dense))
}

/// Sparse Cholesky factor of a symmetric positive definite form.
pub struct SpdSolver {
    llt: Llt<usize, f64>,
    symbolic: SymbolicLlt<usize>,
    n: usize,
}

impl SpdSolver {
    /// Factors `q`, reusing a symbolic analysis of the same pattern if given.
    pub fn new(q: &SymCsr, symbolic: Option<&SymbolicLlt<usize>>) -> Result<Self> {
        let lower = q.to_faer_lower()?;
        let symbolic = match symbolic {
            Some(s) => s.clone(),
            None => SymbolicLlt::try_new(lower.symbolic(), Side::Lower)
                .map_err(|e| KornError::Factorization(format!("{e:?}")))?,
        };
        let llt = Llt::try_new_with_symbolic(symbolic.clone(), lower.as_ref(), Side::Lower)
            .map_err(|e| KornError::Factorization(format!("denominator form is not positive definite: {e:?}")))?;
        Ok(SpdSolver {
            llt,
            symbolic,
            n: q.n(),
        })
    }

    pub fn symbolic(&self) -> &SymbolicLlt<usize> {
        &self.symbolic
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    gv: Vec<Vec<f64>>,
    qv: Vec<Vec<f64>>,
    /// Projected matrix `V^T G V`, row-major, `cap x cap`.
    h: Vec<f64>,
    cap: usize,
}

impl Basis {
    fn new(cap: usize) -> Self {
        Basis {
            v: Vec::new(),
            gv: Vec::new(),
            qv: Vec::new(),
            h: vec![0.0; cap * cap],
            cap,
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// Q-orthogonalizes `w` against the basis (two passes) and appends it.
    fn push(&mut self, g: &SymCsr, q: &SymCsr, mut w: Vec<f64>) -> bool {
        let scale0 = norm(&w);
        if !(scale0 > 0.0) || !scale0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for i in 0..self.v.len() {
                let c = dot(&self.qv[i], &w);
                for (a, b) in w.iter_mut().zip(&self.v[i]) {
                    *a -= c * b;
                }
            }
        }
        if norm(&w) <= 1e-10 * scale0 {
            return false;
        }
        let mut qw = q.matvec(&w);
        let nrm = dot(&w, &qw).sqrt();
        if !(nrm > 0.0) {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        qw.iter_mut().for_each(|x| *x /= nrm);
        let gw = g.matvec(&w);
        let k = self.v.len();
        for i in 0..k {
            let hik = dot(&self.v[i], &gw);
            self.h[i * self.cap + k] = hik;
            self.h[k * self.cap + i] = hik;
        }
        self.h[k * self.cap + k] = dot(&w, &gw);
        self.v.push(w);
        self.gv.push(gw);
        self.qv.push(qw);
        true
    }

    /// Ritz values (descending) and coefficient vectors.
    fn ritz(&self) -> Result<(Vec<f64>, Mat<f64>)> {
        let k = self.len();
        let hm = Mat::from_fn(k, k, |i, j| self.h[i * self.cap + j]);
        let evd = hm
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| KornError::Factorization(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let vals = (0..k).rev().map(|i| s[i]).collect();
        let vecs = Mat::from_fn(k, k, |i, j| u[(i, k - 1 - j)]);
        Ok((vals, vecs))
    }

    fn combine(&self, which: &[Vec<f64>], coef: &Mat<f64>, col: usize) -> Vec<f64> {
        let n = which[0].len();
        let mut out = vec![0.0; n];
        for (i, b) in which.iter().enumerate() {
            let c = coef[(i, col)];
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }

    /// Replaces the basis by its leading `keep` Ritz vectors.
    fn compress(&mut self, vals: &[f64], coef: &Mat<f64>, keep: usize) {
        let keep = keep.min(self.len());
        let v: Vec<_> = (0..keep).map(|j| self.combine(&self.v, coef, j)).collect();
        let gv: Vec<_> = (0..keep).map(|j| self.combine(&self.gv, coef, j)).collect();
        let qv: Vec<_> = (0..keep).map(|j| self.combine(&self.qv, coef, j)).collect();
        self.h.iter_mut().for_each(|x| *x = 0.0);
        for (j, val) in vals.iter().enumerate().take(keep) {
            self.h[j * self.cap + j] = *val;
        }
        self.v = v;
        self.gv = gv;
        self.qv = qv;
    }
}

/// Thick-restart Lanczos on `Q^{-1} G`, which is self-adjoint in the
/// `Q` inner product. Every new direction is fully reorthogonalized and the
/// Ritz pair is extracted from the explicit projection `V^T G V`.
pub fn lanczos_top(
    g: &SymCsr,
    q: &SymCsr,
    solver: &SpdSolver,
    opts: &EigenOptions,
    start: Option<&[f64]>,
) -> Result<EigenEstimate> {
    check_pair(g, q)?;
    let n = g.n();
    let cap = opts.krylov_dim.clamp(4, n.max(4));
    let keep = opts.keep.clamp(1, cap - 2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();

    let mut basis = Basis::new(cap);
    let init = match start {
        Some(s) if s.len() == n && s.iter().any(|x| *x != 0.0) => s.to_vec(),
        _ => random(&mut rng),
    };
    if !basis.push(g, q, init) {
        basis.push(g, q, random(&mut rng));
    }
    let mut applications = 0usize;
    let mut last_res;
    let mut last_theta = f64::NAN;
    let mut stalled = 0usize;
    loop {
        let (vals, coef) = basis.ritz()?;
        let theta = vals[0];
        let gy = basis.combine(&basis.gv, &coef, 0);
        let qy = basis.combine(&basis.qv, &coef, 0);
        let r: Vec<f64> = gy.iter().zip(&qy).map(|(a, b)| a - theta * b).collect();
        let den = if theta > 0.0 { theta * norm(&qy) } else { norm(&qy) };
        last_res = norm(&r) / den;
        if last_res <= opts.tol || basis.len() == n || stalled >= opts.stall_restarts {
            let y = basis.combine(&basis.v, &coef, 0);
            return Ok(finish(g, q, y, applications, EigenMethod::Iterative));
        }
        if applications >= opts.max_iter {
            break;
        }
        let mut w = basis.gv[basis.len() - 1].clone();
        solver.solve_in_place(&mut w);
        applications += 1;
        if basis.len() == cap {
            // orthogonalize the continuation against the full basis first
            for _ in 0..2 {
                for i in 0..basis.len() {
                    let c = dot(&basis.qv[i], &w);
                    for (a, b) in w.iter_mut().zip(&basis.v[i]) {
                        *a -= c * b;
                    }
                }
            }
            basis.compress(&vals, &coef, keep);
            if ((theta - last_theta) / theta).abs() < opts.stall_tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
            last_theta = theta;
        }
        if !basis.push(g, q, w) {
            let fresh = random(&mut rng);
            if !basis.push(g, q, fresh) {
                break;
            }
        }
    }
    Err(KornError::NoConvergence {
        iterations: applications,
        residual: last_res,
    })
}
