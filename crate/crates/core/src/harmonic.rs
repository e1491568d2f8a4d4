//! Harmonic functions on thin strips: Dirichlet solves on the mapped grid and
//! the quotients of the strip lemmas.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::MatMut;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KornError, Result};
use crate::strip::StripGrid;

/// Interior residual gate relative to `max |w|`.
pub const RESIDUAL_GATE: f64 = 1e-8;

/// Dirichlet data on the strip boundary, evaluated at boundary node `k`.
pub trait BoundaryData {
    fn value(&self, grid: &StripGrid, k: usize) -> f64;
}

impl<F: Fn(f64, f64) -> f64> BoundaryData for F {
    fn value(&self, grid: &StripGrid, k: usize) -> f64 {
        let (_, j) = grid.coords(k);
        self(grid.x[k], grid.y[j])
    }
}

/// `g(y) = sum_{m=1}^{10} cos(m pi y / b + p_m) / m^3` with uniform random
/// phases `p_m`, imposed on the whole boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBoundary {
    pub b: f64,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl FourierBoundary {
    pub const MODES: usize = 10;

    /// Deterministic in `(seed, stream)`; streams separate parallel jobs.
    pub fn seeded(b: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut amplitude = Vec::with_capacity(Self::MODES);
        let mut phase = Vec::with_capacity(Self::MODES);
        for m in 1..=Self::MODES {
            amplitude.push((m as f64).powi(-3));
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        FourierBoundary { b, amplitude, phase }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .enumerate()
            .map(|(m, (c, p))| c * ((m + 1) as f64 * PI * y / self.b + p).cos())
            .sum()
    }
}

impl BoundaryData for FourierBoundary {
    fn value(&self, grid: &StripGrid, k: usize) -> f64 {
        self.eval(grid.y[grid.coords(k).1])
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicSample {
    pub grid: StripGrid,
    pub w: Vec<f64>,
    /// Largest interior residual of the row-scaled discrete Laplacian,
    /// relative to `max |w|`.
    pub residual: f64,
}

/// Mapped Laplacian `(1/W^2 + a^2) w_xixi + 2a w_xiy + w_yy + c w_xi` at an
/// interior node, with `a = xi_y` and `c` its transport term.
fn laplace_row(grid: &StripGrid, k: usize) -> [(usize, f64); 9] {
    let (i, j) = grid.coords(k);
    let (p, w) = (grid.phi1[j], grid.width[j]);
    let s = grid.xi[i] + 0.5;
    let a = grid.xi_y(k);
    let c = (p[2] - s * w[2]) / w[0] - 2.0 * a * w[1] / w[0];
    let (dx, dy) = (grid.d_xi, grid.d_y);
    let cxx = (1.0 / (w[0] * w[0]) + a * a) / (dx * dx);
    let cyy = 1.0 / (dy * dy);
    let cxy = 2.0 * a / (4.0 * dx * dy);
    let cx = c / (2.0 * dx);
    let at = |di: isize, dj: isize| grid.index((i as isize + di) as usize, (j as isize + dj) as usize);
    [
        (k, -2.0 * cxx - 2.0 * cyy),
        (at(1, 0), cxx + cx),
        (at(-1, 0), cxx - cx),
        (at(0, 1), cyy),
        (at(0, -1), cyy),
        (at(1, 1), cxy),
        (at(-1, -1), cxy),
        (at(1, -1), -cxy),
        (at(-1, 1), -cxy),
    ]
}

/// Row-scaled interior residual of `w`, relative to `max |w|`.
pub fn laplace_residual(grid: &StripGrid, w: &[f64]) -> f64 {
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut r = 0.0f64;
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            continue;
        }
        let row = laplace_row(grid, k);
        let v: f64 = row.iter().map(|(a, c)| c * w[*a]).sum();
        r = r.max((v / row[0].1).abs());
    }
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// Solves the Dirichlet problem by sparse LU with one refinement step.
pub fn solve_harmonic(grid: &StripGrid, data: &dyn BoundaryData) -> Result<HarmonicSample> {
    let n = grid.len();
    let mut trip = Vec::with_capacity(9 * n);
    let mut rhs = vec![0.0; n];
    let mut rows: Vec<Option<[(usize, f64); 9]>> = Vec::with_capacity(n);
    for k in 0..n {
        if grid.is_boundary(k) {
            trip.push(Triplet::new(k, k, 1.0));
            rhs[k] = data.value(grid, k);
            rows.push(None);
        } else {
            let row = laplace_row(grid, k);
            let d = row[0].1;
            trip.extend(row.iter().map(|&(a, c)| Triplet::new(k, a, c / d)));
            rows.push(Some(row));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| KornError::Factorization(format!("{e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| KornError::Factorization(format!("{e:?}")))?;
    let mut w = rhs.clone();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut w, n, 1));

    let apply = |w: &[f64]| -> Vec<f64> {
        rows.iter()
            .enumerate()
            .map(|(k, r)| match r {
                None => w[k],
                Some(row) => row.iter().map(|(a, c)| c * w[*a]).sum::<f64>() / row[0].1,
            })
            .collect()
    };
    let mut r: Vec<f64> = apply(&w).iter().zip(&rhs).map(|(a, b)| b - a).collect();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut r, n, 1));
    for (a, d) in w.iter_mut().zip(&r) {
        *a += d;
    }
    let residual = laplace_residual(grid, &w);
    if !(residual <= RESIDUAL_GATE) {
        return Err(KornError::NoConvergence { iterations: 2, residual });
    }
    Ok(HarmonicSample {
        grid: grid.clone(),
        w,
        residual,
    })
}

/// A quotient that may be degenerate (`0 / 0` resolved to `0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quotient {
    pub value: f64,
    pub degenerate: bool,
}

fn norms(grid: &StripGrid, w: &[f64]) -> (f64, f64, f64, Vec<[f64; 2]>) {
    let grad = grid.gradient(w);
    let wx: Vec<f64> = grad.iter().map(|g| g[0]).collect();
    let wy: Vec<f64> = grad.iter().map(|g| g[1]).collect();
    (grid.norm(w), grid.norm(&wx), grid.norm(&wy), grad)
}

/// `|w_y - a| / |w_x|` with `a` the mean of `w_y`. When `w_x` vanishes the
/// harmonic `w` is affine in `y`, so the numerator vanishes too and the
/// quotient is reported as `0`, flagged degenerate.
pub fn lemma41_quotient(grid: &StripGrid, w: &[f64]) -> Quotient {
    let (_, nx, ny, grad) = norms(grid, w);
    let wy: Vec<f64> = grad.iter().map(|g| g[1]).collect();
    let a = grid.inner(&wy, &vec![1.0; grid.len()]) / grid.area();
    let dev: Vec<f64> = wy.iter().map(|v| v - a).collect();
    let num = grid.norm(&dev);
    if nx <= 1e-12 * ny.max(grid.norm(w)) || nx == 0.0 {
        return Quotient {
            value: 0.0,
            degenerate: true,
        };
    }
    Quotient {
        value: num / nx,
        degenerate: false,
    }
}

fn check_nonzero(grid: &StripGrid, w: &[f64]) -> Result<()> {
    if grid.norm(w) == 0.0 {
        return Err(KornError::InvalidInput("quotient of the zero field".into()));
    }
    Ok(())
}

/// `|w_y|^2 / (|w| |w_x| / h + |w|^2 + |w_x|^2)`
pub fn lemma42_quotient(grid: &StripGrid, w: &[f64]) -> Result<f64> {
    check_nonzero(grid, w)?;
    let (n, nx, ny, _) = norms(grid, w);
    Ok(ny * ny / (n * nx / grid.strip.h + n * n + nx * nx))
}

/// `|w_y|^2 / (|w| |w_x| / h + |w|^2 / b^2 + |w_x|^2)`
pub fn lemma45_quotient(grid: &StripGrid, w: &[f64]) -> Result<f64> {
    check_nonzero(grid, w)?;
    let (n, nx, ny, _) = norms(grid, w);
    let b = grid.strip.b;
    Ok(ny * ny / (n * nx / grid.strip.h + n * n / (b * b) + nx * nx))
}

/// Trapezoid integral of samples `f` on a uniform grid over `[a, b]`,
/// restricted to `[lo, hi]`, with linear interpolation at the cut points.
fn integrate(f: &[f64], a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let d = (b - a) / (f.len() - 1) as f64;
    let at = |t: f64| {
        let u = ((t - a) / d).clamp(0.0, (f.len() - 1) as f64);
        let i = (u.floor() as usize).min(f.len() - 2);
        let s = u - i as f64;
        (1.0 - s) * f[i] + s * f[i + 1]
    };
    let mut pts = vec![lo];
    let first = ((lo - a) / d).floor() as usize + 1;
    let mut i = first;
    while i < f.len() && a + i as f64 * d < hi {
        pts.push(a + i as f64 * d);
        i += 1;
    }
    pts.push(hi);
    pts.windows(2).map(|p| 0.5 * (p[1] - p[0]) * (at(p[0]) + at(p[1]))).sum()
}

/// Both sides of
/// `int_{a+l(b-a)}^b f^2 <= (2/l) int_a^{a+l(b-a)} f^2 + 4 int_a^b (b-t)^2 f'^2`
/// for `f` sampled uniformly on `[a, b]`.
pub fn lemma43_check(f: &[f64], a: f64, b: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda < 1.0) || !(a < b) || f.len() < 3 {
        return Err(KornError::InvalidInput(
            "need 0 < lambda < 1, a < b and at least 3 samples".into(),
        ));
    }
    let n = f.len();
    let d = (b - a) / (n - 1) as f64;
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let df: Vec<f64> = (0..n)
        .map(|i| crate::stencil::Stencil::at(i, n, d).apply(|k| f[k]))
        .collect();
    let weighted: Vec<f64> = (0..n)
        .map(|i| {
            let t = a + i as f64 * d;
            (b - t).powi(2) * df[i] * df[i]
        })
        .collect();
    let cut = a + lambda * (b - a);
    let lhs = integrate(&f2, a, b, cut, b);
    let rhs = 2.0 / lambda * integrate(&f2, a, b, a, cut) + 4.0 * integrate(&weighted, a, b, a, b);
    Ok((lhs, rhs))
}

/// `(|delta grad u|, 2 |grad u|)` from quadrature weights, gradients and
/// distances to the boundary at the same points.
pub fn lemma44_check(weight: &[f64], grad: &[[f64; 2]], delta: &[f64]) -> (f64, f64) {
    let mut a = 0.0;
    let mut g = 0.0;
    for ((w, d), v) in weight.iter().zip(delta).zip(grad) {
        let s = v[0] * v[0] + v[1] * v[1];
        a += w * d * d * s;
        g += w * s;
    }
    (a.sqrt(), 2.0 * g.sqrt())
}

/// Distances of every node of a strip grid to the strip boundary.
pub fn strip_distances(grid: &StripGrid) -> Vec<f64> {
    (0..grid.len()).map(|k| grid.distance_to_boundary(k)).collect()
}

/// Both sides of `lemma44_check` for a solved sample on its own strip.
pub fn lemma44_on_sample(sample: &HarmonicSample, delta: &[f64]) -> (f64, f64) {
    lemma44_check(&sample.grid.weight, &sample.grid.gradient(&sample.w), delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strip::{PhiKind, StripDomain};

    fn curved(h: f64) -> StripDomain {
        StripDomain::new(1.0, h, PhiKind::Sinusoidal, 0.5).unwrap()
    }

    #[test]
    fn linear_data_is_reproduced_on_rectangle() {
        let g = StripGrid::new(&StripDomain::rectangle(1.0, 0.1), 9, 41).unwrap();
        let s = solve_harmonic(&g, &|x: f64, _y: f64| x).unwrap();
        let err = s.w.iter().zip(&g.x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "{err}");
        assert!(s.residual <= RESIDUAL_GATE);
    }

    #[test]
    fn quadratic_harmonic_converges_at_second_order() {
        let err = |n_xi: usize, n_y: usize| {
            let g = StripGrid::new(&curved(0.1), n_xi, n_y).unwrap();
            let f = |x: f64, y: f64| x * x - y * y;
            let s = solve_harmonic(&g, &f).unwrap();
            let exact = g.sample(f);
            s.w.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let (a, b) = (err(9, 41), err(17, 81));
        assert!((a / b).log2() >= 1.8, "{a} {b}");
    }

    #[test]
    fn seeded_data_is_bit_identical() {
        let g = StripGrid::new(&curved(0.1), 9, 41).unwrap();
        let a = solve_harmonic(&g, &FourierBoundary::seeded(1.0, 42, 0)).unwrap();
        let b = solve_harmonic(&g, &FourierBoundary::seeded(1.0, 42, 0)).unwrap();
        assert_eq!(a.w, b.w);
        let c = FourierBoundary::seeded(1.0, 42, 1);
        assert_ne!(c, FourierBoundary::seeded(1.0, 42, 0));
    }

    #[test]
    fn lemma41_affine_cases() {
        let g = StripGrid::new(&StripDomain::rectangle(1.0, 0.1), 9, 21).unwrap();
        let q = lemma41_quotient(&g, &g.x);
        assert!(q.value < 1e-12 && !q.degenerate);
        let g = StripGrid::new(&curved(0.1), 9, 21).unwrap();
        let y = g.sample(|_, y| y);
        let q = lemma41_quotient(&g, &y);
        assert!(q.degenerate);
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn lemma41_on_xy_matches_closed_form() {
        // rectangle (-h, h) x (0, b): w_y = x has mean 0, w_x = y
        let (h, b) = (0.1, 1.0);
        let g = StripGrid::new(&StripDomain::rectangle(b, h), 33, 21).unwrap();
        let w = g.sample(|x, y| x * y);
        let num = (2.0 * h.powi(3) / 3.0 * b).sqrt();
        let den = (2.0 * h * b.powi(3) / 3.0).sqrt();
        let q = lemma41_quotient(&g, &w);
        // trapezoid on quadratics: relative error O(d^2)
        assert!((q.value - num / den).abs() / (num / den) < 2e-3, "{} {}", q.value, num / den);
    }

    #[test]
    fn lemma42_closed_forms() {
        let (h, b) = (0.1, 1.0);
        let g = StripGrid::new(&StripDomain::rectangle(b, h), 9, 201).unwrap();
        assert!(lemma42_quotient(&g, &vec![3.0; g.len()]).unwrap() < 1e-24);
        assert!(lemma42_quotient(&g, &g.x).unwrap() < 1e-24);
        let y = g.sample(|_, y| y);
        // |1|^2 / |y|^2 = (2 h b) / (2 h b^3 / 3) = 3 / b^2
        let q = lemma42_quotient(&g, &y).unwrap();
        assert!((q - 3.0 / (b * b)).abs() < 1e-4, "{q}");
        assert!(lemma42_quotient(&g, &vec![0.0; g.len()]).is_err());
    }

    #[test]
    fn lemma45_reduces_and_rescales() {
        let g = StripGrid::new(&curved(0.1), 9, 41).unwrap();
        let s = solve_harmonic(&g, &FourierBoundary::seeded(1.0, 3, 0)).unwrap();
        let (a, b) = (lemma42_quotient(&g, &s.w).unwrap(), lemma45_quotient(&g, &s.w).unwrap());
        assert!((a - b).abs() < 1e-14 * a);
        assert!(lemma45_quotient(&g, &vec![1.0; g.len()]).unwrap() < 1e-24);

        // w(x, y) = x^2 - y^2 on the strip of height 1 against
        // w(x/beta, y/beta) on the strip scaled by beta
        let beta = 2.5;
        let base = StripDomain::rectangle(1.0, 0.1);
        let big = StripDomain::rectangle(beta, 0.1 * beta);
        let (g1, g2) = (StripGrid::new(&base, 17, 41).unwrap(), StripGrid::new(&big, 17, 41).unwrap());
        let w1 = g1.sample(|x, y| x * x - y * y);
        let w2 = g2.sample(|x, y| (x / beta).powi(2) - (y / beta).powi(2));
        let (q1, q2) = (lemma45_quotient(&g1, &w1).unwrap(), lemma45_quotient(&g2, &w2).unwrap());
        assert!((q1 - q2).abs() < 1e-12 * q1, "{q1} {q2}");
    }

    #[test]
    fn lemma43_closed_forms() {
        let n = 2001;
        let ones = vec![1.0; n];
        let (l, r) = lemma43_check(&ones, 0.0, 1.0, 0.5).unwrap();
        assert!((l - 0.5).abs() < 1e-12 && (r - 2.0).abs() < 1e-12);
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let (l, r) = lemma43_check(&t, 0.0, 1.0, 0.5).unwrap();
        assert!((l - 7.0 / 24.0).abs() < 1e-6, "{l}");
        assert!((r - 1.5).abs() < 1e-6, "{r}");
        assert!(lemma43_check(&t, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lemma43_cut_between_nodes() {
        let n = 11;
        let ones = vec![1.0; n];
        let (l, r) = lemma43_check(&ones, 1.0, 2.0, 0.33).unwrap();
        assert!((l - 0.67).abs() < 1e-12);
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lemma44_on_disk() {
        // polar midpoint quadrature of the unit disk, u = x
        let (nr, na) = (200, 256);
        let mut w = Vec::new();
        let mut grad = Vec::new();
        let mut delta = Vec::new();
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for _ in 0..na {
                w.push(r * (1.0 / nr as f64) * (2.0 * PI / na as f64));
                grad.push([1.0, 0.0]);
                delta.push(1.0 - r);
            }
        }
        let (a, b) = lemma44_check(&w, &grad, &delta);
        // |delta|^2 integral = 2 pi int (1-r)^2 r dr = pi / 6
        assert!((a - (PI / 6.0).sqrt()).abs() < 1e-4);
        assert!((b - 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!(a <= b);
    }

    #[test]
    fn lemma44_on_strip_sample() {
        let g = StripGrid::new(&curved(0.1), 9, 41).unwrap();
        let s = solve_harmonic(&g, &|x: f64, y: f64| x * x - y * y).unwrap();
        let (a, b) = lemma44_on_sample(&s, &strip_distances(&g));
        assert!(a <= b * (1.0 + 1e-3));
    }
}
