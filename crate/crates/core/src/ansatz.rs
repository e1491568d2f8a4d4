//! The bending Ansatz `u_t = W(theta / sqrt h, z)`,
//! `u_theta = -t W_xi / (A_theta sqrt h)`, `u_z = -t W_eta / A_z` and the
//! h-scaling of its norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KornError, Result};
use crate::fit::{fit_exponent, Band, FitReport};
use crate::geometry::{GridDims, PatchDomain, ShellGrid, SurfacePatch, ThicknessProfile};
use crate::operators::{gradient_energies, l2_norm, FieldSample};

/// `exp(-1/(1-x^2))` on `(-1, 1)` with its first two derivatives.
pub fn bump(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - x * x;
    let f = (-1.0 / q).exp();
    let g1 = -2.0 * x / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * x * x / (q * q * q);
    [f, f * g1, f * (g1 * g1 + g2)]
}

/// `W(xi, eta) = amplitude bump(xi / half_xi) bump(eta / half_eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub amplitude: f64,
    pub half_xi: f64,
    pub half_eta: f64,
}

impl BumpProfile {
    pub fn new(amplitude: f64, half_xi: f64, half_eta: f64) -> Result<Self> {
        if !(half_xi > 0.0 && half_eta > 0.0) || !amplitude.is_finite() {
            return Err(KornError::InvalidInput("bump half-widths must be positive".into()));
        }
        Ok(BumpProfile {
            amplitude,
            half_xi,
            half_eta,
        })
    }

    /// Support of half the patch extent in both directions at `h_max`.
    pub fn fitted(domain: &PatchDomain, h_max: f64) -> Result<Self> {
        let (z0, z1) = domain.z_range(257);
        BumpProfile::new(1.0, domain.omega / (4.0 * h_max.sqrt()), (z1 - z0) / 4.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        BumpProfile {
            amplitude: alpha * self.amplitude,
            ..*self
        }
    }

    /// `(W, W_xi, W_eta)`
    pub fn eval(&self, xi: f64, eta: f64) -> [f64; 3] {
        let (a, b) = (bump(xi / self.half_xi), bump(eta / self.half_eta));
        let c = self.amplitude;
        [c * a[0] * b[0], c * a[1] * b[0] / self.half_xi, c * a[0] * b[1] / self.half_eta]
    }

    /// `(W_xixi, W_xieta, W_etaeta)`
    pub fn hessian(&self, xi: f64, eta: f64) -> [f64; 3] {
        let (a, b) = (bump(xi / self.half_xi), bump(eta / self.half_eta));
        let (sx, sy) = (self.half_xi, self.half_eta);
        let c = self.amplitude;
        [
            c * a[2] * b[0] / (sx * sx),
            c * a[1] * b[1] / (sx * sy),
            c * a[0] * b[2] / (sy * sy),
        ]
    }
}

/// Center `(theta, z)` of the patch, where the Ansatz is placed.
pub fn ansatz_center(domain: &PatchDomain) -> (f64, f64) {
    let (z0, z1) = domain.z_range(257);
    (0.5 * domain.omega, 0.5 * (z0 + z1))
}

/// `(theta, z)` box of the support at thickness scale `h`.
pub fn support_box(w: &BumpProfile, domain: &PatchDomain, h: f64) -> ((f64, f64), (f64, f64)) {
    let (tc, zc) = ansatz_center(domain);
    let r = h.sqrt() * w.half_xi;
    ((tc - r, tc + r), (zc - w.half_eta, zc + w.half_eta))
}

fn check_support(w: &BumpProfile, domain: &PatchDomain, h: f64) -> Result<()> {
    let width = 2.0 * h.sqrt() * w.half_xi;
    if width > domain.omega {
        return Err(KornError::SupportOverflow {
            width,
            extent: domain.omega,
        });
    }
    let (z0, z1) = domain.z_range(257);
    let (width, extent) = (2.0 * w.half_eta, z1 - z0);
    if width > extent {
        return Err(KornError::SupportOverflow { width, extent });
    }
    Ok(())
}

/// Grid nodes across the support in `theta` and `z`.
pub fn support_nodes(w: &BumpProfile, grid: &ShellGrid) -> (usize, usize) {
    let across = |width: f64, d: f64| (width / d + 1e-9).floor() as usize;
    (
        across(2.0 * grid.h().sqrt() * w.half_xi, grid.d_theta),
        across(2.0 * w.half_eta, grid.d_z),
    )
}

/// Samples the Ansatz, centered in the patch, on the grid.
pub fn build_ansatz(w: &BumpProfile, grid: &ShellGrid) -> Result<FieldSample> {
    let domain = grid.surface().domain();
    check_support(w, domain, grid.h())?;
    let rh = grid.h().sqrt();
    let (tc, zc) = ansatz_center(domain);
    let mut out = FieldSample::zeros(grid.len());
    for idx in 0..grid.len() {
        let col = grid.column_of(idx);
        let t = grid.t[idx];
        let [v, v_xi, v_eta] = w.eval((col.theta - tc) / rh, col.z - zc);
        out.set(
            idx,
            [v, -t * v_xi / (col.point.a_theta * rh), -t * v_eta / col.point.a_z],
        );
    }
    Ok(out)
}

/// Norms are evaluated on a grid covering exactly the support box, outside
/// of which the field vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnsatzGridPolicy {
    pub n_t: usize,
    /// Grid intervals across the support in each in-plane direction.
    pub nodes_across: usize,
}

impl Default for AnsatzGridPolicy {
    fn default() -> Self {
        AnsatzGridPolicy {
            n_t: 33,
            nodes_across: 256,
        }
    }
}

/// Nodes across the support below which a report is refused.
pub const MIN_SUPPORT_NODES: usize = 12;

impl AnsatzGridPolicy {
    pub fn dims(&self) -> GridDims {
        GridDims::new(self.n_t, self.nodes_across + 1, self.nodes_across + 1)
    }

    pub fn grid(
        &self,
        w: &BumpProfile,
        surface: &SurfacePatch,
        profile: &ThicknessProfile,
        h: f64,
    ) -> Result<ShellGrid> {
        check_support(w, surface.domain(), h)?;
        let (th, z) = support_box(w, surface.domain(), h);
        ShellGrid::window(surface, &profile.with_h(h), self.dims(), th, z)
    }

    pub fn doubled(&self) -> Self {
        AnsatzGridPolicy {
            n_t: 2 * self.n_t - 1,
            nodes_across: 2 * self.nodes_across,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzRow {
    pub h: f64,
    pub dims: GridDims,
    /// `|grad u|`
    pub grad: f64,
    /// `|e(u)|`
    pub strain: f64,
    /// `|u_t|`
    pub normal: f64,
    /// `|u|`
    pub full: f64,
    /// `|grad u|^2 / (|u_t| |e(u)| / h + |u|^2 + |e(u)|^2)`
    pub rho1: f64,
    /// `h |grad u|^2 / (|u|^2 + |e(u)|^2)`
    pub rho2: f64,
}

impl AnsatzRow {
    pub const NAMES: [&'static str; 6] = ["grad", "strain", "normal", "full", "rho1", "rho2"];

    pub fn values(&self) -> [f64; 6] {
        [self.grad, self.strain, self.normal, self.full, self.rho1, self.rho2]
    }
}

pub fn ansatz_norms(w: &BumpProfile, grid: &ShellGrid) -> Result<AnsatzRow> {
    let u = build_ansatz(w, grid)?;
    let (g2, e2) = gradient_energies(&u, grid)?;
    let h = grid.h();
    let (grad, strain) = (g2.sqrt(), e2.sqrt());
    let normal = l2_norm(&u.normal_part(), grid)?;
    let full = l2_norm(&u, grid)?;
    let (g2, e2, m2) = (grad * grad, strain * strain, full * full);
    Ok(AnsatzRow {
        h,
        dims: grid.dims,
        grad,
        strain,
        normal,
        full,
        rho1: g2 / (normal * strain / h + m2 + e2),
        rho2: h * g2 / (m2 + e2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzReport {
    pub rows: Vec<AnsatzRow>,
    /// Fits of every quantity in `AnsatzRow::NAMES` order.
    pub fits: Vec<FitReport>,
}

/// Accepted slope of the two sharpness ratios.
pub const RATIO_BAND: f64 = 0.15;

fn grid_for(
    w: &BumpProfile,
    surface: &SurfacePatch,
    profile: &ThicknessProfile,
    h: f64,
    policy: &AnsatzGridPolicy,
) -> Result<ShellGrid> {
    let grid = policy.grid(w, surface, profile, h)?;
    let (a, b) = support_nodes(w, &grid);
    if a.min(b) < MIN_SUPPORT_NODES {
        return Err(KornError::UnderResolved {
            nodes: a.min(b),
            required: MIN_SUPPORT_NODES,
        });
    }
    Ok(grid)
}

/// Norms and ratios over an h-sweep, with power-law fits.
pub fn ansatz_scaling_report(
    w: &BumpProfile,
    surface: &SurfacePatch,
    profile: &ThicknessProfile,
    hs: &[f64],
    policy: &AnsatzGridPolicy,
) -> Result<AnsatzReport> {
    let rows = hs
        .par_iter()
        .map(|&h| ansatz_norms(w, &grid_for(w, surface, profile, h, policy)?))
        .collect::<Result<Vec<_>>>()?;
    let fits = AnsatzRow::NAMES
        .iter()
        .enumerate()
        .map(|(q, name)| {
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.values()[q])).collect();
            let band = (q >= 4).then(|| Band::new(-RATIO_BAND, RATIO_BAND));
            fit_exponent(name, &pairs, band)
        })
        .collect();
    Ok(AnsatzReport { rows, fits })
}

/// Largest relative change of any reported norm or ratio when the grid
/// density is doubled at fixed `h`.
pub fn refinement_sensitivity(
    w: &BumpProfile,
    surface: &SurfacePatch,
    profile: &ThicknessProfile,
    h: f64,
    policy: &AnsatzGridPolicy,
) -> Result<f64> {
    let a = ansatz_norms(w, &grid_for(w, surface, profile, h, policy)?)?;
    let b = ansatz_norms(w, &grid_for(w, surface, profile, h, &policy.doubled())?)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, SurfaceKind};
    use crate::operators::{gradient_formula, gradient_full, Mat3, MatrixFieldSample};

    fn sphere() -> SurfacePatch {
        make_builtin_surface(SurfaceKind::SphereCap(1.0), PatchDomain::rectangle(1.0, 1.0708, 2.0708)).unwrap()
    }

    fn plate() -> SurfacePatch {
        make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let e = 1e-5;
        for x in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let [_, d1, d2] = bump(x);
            let fd1 = (bump(x + e)[0] - bump(x - e)[0]) / (2.0 * e);
            let fd2 = (bump(x + e)[1] - bump(x - e)[1]) / (2.0 * e);
            assert!((d1 - fd1).abs() < 1e-8, "{x}");
            assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()), "{x}");
        }
        assert_eq!(bump(1.0), [0.0; 3]);
        assert_eq!(bump(-3.0), [0.0; 3]);
    }

    #[test]
    fn zero_profile_gives_zero_field() {
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(0.01), GridDims::new(3, 41, 9)).unwrap();
        let w = BumpProfile::new(0.0, 2.0, 0.25).unwrap();
        let u = build_ansatz(&w, &g).unwrap();
        assert!(u.u_t.iter().chain(&u.u_theta).chain(&u.u_z).all(|v| *v == 0.0));
    }

    #[test]
    fn mid_surface_slice_is_bare_bump() {
        // constant thickness: the middle t-layer sits at t = 0
        let h = 0.01;
        let g = ShellGrid::new(&sphere(), &ThicknessProfile::constant(h), GridDims::new(3, 41, 9)).unwrap();
        let w = BumpProfile::new(1.0, 2.0, 0.25).unwrap();
        let u = build_ansatz(&w, &g).unwrap();
        let (tc, zc) = ansatz_center(g.surface().domain());
        for idx in (0..g.len()).filter(|&i| g.coords(i).0 == 1) {
            let c = g.column_of(idx);
            assert_eq!(g.t[idx], 0.0);
            let [ut, uth, uz] = u.get(idx);
            assert_eq!(ut, w.eval((c.theta - tc) / h.sqrt(), c.z - zc)[0]);
            assert_eq!((uth, uz), (0.0, 0.0));
        }
    }

    #[test]
    fn overflow_is_reported() {
        let g = ShellGrid::new(&plate(), &ThicknessProfile::constant(0.25), GridDims::new(3, 9, 9)).unwrap();
        let w = BumpProfile::new(1.0, 2.0, 0.25).unwrap();
        assert!(matches!(build_ansatz(&w, &g), Err(KornError::SupportOverflow { .. })));
        let w = BumpProfile::new(1.0, 0.5, 0.75).unwrap();
        assert!(matches!(build_ansatz(&w, &g), Err(KornError::SupportOverflow { .. })));
    }

    #[test]
    fn normal_norm_matches_change_of_variables() {
        // |u_t|^2 = sqrt(h) int H(theta_c + sqrt(h) xi, z) W(xi, eta)^2 dxi deta on the plate
        let prof = ThicknessProfile::sinusoidal(1.0, 0.5);
        let w = BumpProfile::fitted(plate().domain(), 1.0 / 16.0).unwrap();
        let policy = AnsatzGridPolicy {
            n_t: 3,
            nodes_across: 64,
        };
        let mut pairs = Vec::new();
        let mut normalized = Vec::new();
        for k in 4..9 {
            let h = 0.5f64.powi(k);
            let g = policy.grid(&w, &plate(), &prof, h).unwrap();
            let (tc, zc) = ansatz_center(g.surface().domain());
            let row = ansatz_norms(&w, &g).unwrap();
            // midpoint oracle on the support box
            let n = 400;
            let (dx, dy) = (2.0 * w.half_xi / n as f64, 2.0 * w.half_eta / n as f64);
            let mut exact = 0.0;
            let mut thick = 0.0;
            for i in 0..n {
                let xi = -w.half_xi + (i as f64 + 0.5) * dx;
                for j in 0..n {
                    let eta = -w.half_eta + (j as f64 + 0.5) * dy;
                    let tp = prof.with_h(h).eval(tc + h.sqrt() * xi, zc + eta);
                    let v = w.eval(xi, eta)[0];
                    exact += tp.total() * v * v * dx * dy;
                    thick += tp.total() * dx * dy;
                }
            }
            exact *= h.sqrt();
            assert!((row.normal.powi(2) - exact).abs() < 1e-3 * exact, "{} {exact}", row.normal.powi(2));
            pairs.push((h, row.normal));
            let mean_thickness = thick / (4.0 * w.half_xi * w.half_eta);
            normalized.push((h, row.normal / mean_thickness.sqrt()));
        }
        // physical norm: sqrt(h) from the support times h from the thickness
        let f = fit_exponent("normal", &pairs, None);
        assert!((f.slope - 0.75).abs() < 0.05, "{}", f.slope);
        // per unit thickness only the support scaling remains
        let f = fit_exponent("normal", &normalized, None);
        assert!((f.slope - 0.25).abs() < 0.05, "{}", f.slope);
    }

    #[test]
    fn homogeneity() {
        let g = ShellGrid::new(&sphere(), &ThicknessProfile::sinusoidal(0.02, 0.5), GridDims::new(5, 61, 33)).unwrap();
        let w = BumpProfile::fitted(sphere().domain(), 0.02).unwrap();
        let a = ansatz_norms(&w, &g).unwrap();
        let b = ansatz_norms(&w.scaled(-2.5), &g).unwrap();
        for (x, y) in a.values()[..4].iter().zip(&b.values()[..4]) {
            assert!((2.5 * x - y).abs() < 1e-12 * y);
        }
        for (x, y) in a.values()[4..].iter().zip(&b.values()[4..]) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    /// Gradient of the Ansatz from its closed-form partials (sphere: `A_z`
    /// constant and `A_theta` independent of `theta`).
    fn analytic_gradient(w: &BumpProfile, g: &ShellGrid, idx: usize) -> Mat3 {
        let col = g.column_of(idx);
        let p = col.point;
        let t = g.t[idx];
        let a = 1.0 / g.h().sqrt();
        let (tc, zc) = ansatz_center(g.surface().domain());
        let (xi, eta) = ((col.theta - tc) * a, col.z - zc);
        let [v, v_xi, v_eta] = w.eval(xi, eta);
        let [v_xx, v_xe, v_ee] = w.hessian(xi, eta);
        let (ath, az) = (p.a_theta, p.a_z);
        let partials = [
            [0.0, a * v_xi, v_eta],
            [
                -a * v_xi / ath,
                -t * a * a * v_xx / ath,
                -t * a * (v_xe / ath - v_xi * p.a_theta_z / (ath * ath)),
            ],
            [-v_eta / az, -t * a * v_xe / az, -t * v_ee / az],
        ];
        let vals = [v, -t * a * v_xi / ath, -t * v_eta / az];
        gradient_formula(&partials, vals, &p, t, true)
    }

    #[test]
    fn discrete_gradient_converges_to_analytic() {
        let h = 1.0 / 16.0;
        let w = BumpProfile::fitted(sphere().domain(), h).unwrap();
        let prof = ThicknessProfile::constant(h);
        // relative entrywise L2 error; the max-norm error sits in the steep
        // flanks of the bump and is far from asymptotic at these sizes
        let err = |across: usize| {
            let policy = AnsatzGridPolicy { n_t: 3, nodes_across: across };
            let g = policy.grid(&w, &sphere(), &prof, h).unwrap();
            let num = gradient_full(&build_ansatz(&w, &g).unwrap(), &g).unwrap();
            let exact = MatrixFieldSample {
                m: (0..g.len()).map(|idx| analytic_gradient(&w, &g, idx)).collect(),
            };
            l2_norm(&num.sub(&exact), &g).unwrap() / l2_norm(&exact, &g).unwrap()
        };
        let (a, b) = (err(48), err(96));
        assert!((a / b).log2() > 1.8, "{a} {b}");
    }

    #[test]
    fn coarse_policy_is_refused() {
        let w = BumpProfile::fitted(sphere().domain(), 1.0 / 16.0).unwrap();
        let policy = AnsatzGridPolicy { n_t: 3, nodes_across: 8 };
        let r = ansatz_scaling_report(&w, &sphere(), &ThicknessProfile::constant(1.0), &[1.0 / 16.0], &policy);
        assert!(matches!(r, Err(KornError::UnderResolved { .. })));
    }
}
