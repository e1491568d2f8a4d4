//! Sampled estimates of the patch and thickness parameters.
//!
//! Bounds are estimated from point samples and difference quotients; they
//! are estimates, not certified bounds.

use std::io::Write;

use super::surface::{linspace, SurfacePatch, SurfacePoint};
use super::thickness::ThicknessProfile;
use crate::error::{KornError, Result};
use crate::stencil::Stencil;

/// How a row's estimate is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// estimate must be strictly above the bound
    Above,
    /// estimate must be at least the bound
    AtLeast,
    /// estimate must not exceed the bound
    AtMost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityRow {
    pub symbol: &'static str,
    pub estimate: f64,
    pub bound: f64,
    pub kind: BoundKind,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdmissibilityReport {
    pub rows: Vec<AdmissibilityRow>,
    pub samples: usize,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn get(&self, symbol: &str) -> Option<&AdmissibilityRow> {
        self.rows.iter().find(|r| r.symbol == symbol)
    }

    pub fn estimate(&self, symbol: &str) -> f64 {
        self.get(symbol).map_or(f64::NAN, |r| r.estimate)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.rows.iter().filter(|r| !r.pass).map(|r| r.symbol).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["symbol", "estimate", "bound", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.symbol.to_string(),
                format_num(r.estimate),
                format_num(r.bound),
                r.pass.to_string(),
            ])?;
        }
        w.flush().map_err(|e| KornError::io("<csv>", e))?;
        Ok(())
    }

    fn push(&mut self, symbol: &'static str, estimate: f64, bound: f64, kind: BoundKind) {
        let rel = 1e-12 * bound.abs().max(1.0);
        let pass = estimate.is_finite()
            && match kind {
                BoundKind::Above => estimate > bound,
                BoundKind::AtLeast => estimate >= bound - rel,
                BoundKind::AtMost => estimate <= bound + rel,
            };
        self.rows.push(AdmissibilityRow {
            symbol,
            estimate,
            bound,
            kind,
            pass,
        });
    }
}

pub(crate) fn format_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.12e}")
    }
}

/// `sup|f| + sup|df| (+ sup|d2f|)` over a sampled scalar field.
fn sobolev_sup(values: &[Vec<f64>], d_theta: f64, d_z: f64, second: bool) -> f64 {
    let n_th = values.len();
    let n_z = values[0].len();
    let mut sup0 = 0.0f64;
    let mut sup1 = 0.0f64;
    let mut sup2 = 0.0f64;
    for i in 0..n_th {
        for j in 0..n_z {
            sup0 = sup0.max(values[i][j].abs());
            let gth = Stencil::at(i, n_th, d_theta).apply(|k| values[k][j]);
            let gz = Stencil::at(j, n_z, d_z).apply(|k| values[i][k]);
            sup1 = sup1.max(gth.abs()).max(gz.abs());
            if second {
                if i > 0 && i + 1 < n_th {
                    let v = (values[i + 1][j] - 2.0 * values[i][j] + values[i - 1][j]) / (d_theta * d_theta);
                    sup2 = sup2.max(v.abs());
                }
                if j > 0 && j + 1 < n_z {
                    let v = (values[i][j + 1] - 2.0 * values[i][j] + values[i][j - 1]) / (d_z * d_z);
                    sup2 = sup2.max(v.abs());
                }
                if i > 0 && i + 1 < n_th && j > 0 && j + 1 < n_z {
                    let v = (values[i + 1][j + 1] - values[i + 1][j - 1] - values[i - 1][j + 1]
                        + values[i - 1][j - 1])
                        / (4.0 * d_theta * d_z);
                    sup2 = sup2.max(v.abs());
                }
            }
        }
    }
    sup0 + sup1 + sup2
}

fn frame_deviation(p: &SurfacePoint) -> f64 {
    let f = p.frame();
    let mut dev = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let d = f[i][0] * f[j][0] + f[i][1] * f[j][1] + f[i][2] * f[j][2];
            dev = dev.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    dev
}

fn weingarten_deviation(s: &SurfacePatch, theta: f64, z: f64) -> f64 {
    let d = 1e-5;
    let p = s.eval(theta, z);
    let (np, nm) = (s.eval(theta + d, z).n, s.eval(theta - d, z).n);
    let (zp, zm) = (s.eval(theta, z + d).n, s.eval(theta, z - d).n);
    let mut dev = 0.0f64;
    for k in 0..3 {
        let n_th = (np[k] - nm[k]) / (2.0 * d);
        let n_z = (zp[k] - zm[k]) / (2.0 * d);
        dev = dev
            .max((n_th - p.kappa_theta * p.a_theta * p.e_theta[k]).abs())
            .max((n_z - p.kappa_z * p.a_z * p.e_z[k]).abs());
    }
    dev
}

/// Samples the patch and profile on an `samples x samples` grid over the
/// parameter box and reports every parameter of the admissibility
/// conditions together with a pass flag per condition.
pub fn validate_admissibility(
    surface: &SurfacePatch,
    profile: &ThicknessProfile,
    samples: usize,
) -> Result<AdmissibilityReport> {
    if samples < 17 {
        return Err(KornError::InvalidInput(format!(
            "admissibility sampling needs at least 17x17 points, got {samples}"
        )));
    }
    let domain = surface.domain();
    let (z_lo, z_hi) = domain.z_range(samples);
    let thetas = linspace(0.0, domain.omega, samples);
    let zs = linspace(z_lo, z_hi, samples);
    let d_theta = domain.omega / (samples - 1) as f64;
    let d_z = (z_hi - z_lo) / (samples - 1) as f64;
    let h = profile.h;

    let grid_of = |f: &dyn Fn(&SurfacePoint) -> f64| -> Vec<Vec<f64>> {
        thetas
            .iter()
            .map(|&th| zs.iter().map(|&z| f(&surface.eval(th, z))).collect())
            .collect()
    };
    let a_th = grid_of(&|p| p.a_theta);
    let a_z = grid_of(&|p| p.a_z);
    let k_th = grid_of(&|p| p.kappa_theta);
    let k_z = grid_of(&|p| p.kappa_z);
    let g1: Vec<Vec<f64>> = thetas
        .iter()
        .map(|&th| zs.iter().map(|&z| profile.eval(th, z).g1[0]).collect())
        .collect();
    let g2: Vec<Vec<f64>> = thetas
        .iter()
        .map(|&th| zs.iter().map(|&z| profile.eval(th, z).g2[0]).collect())
        .collect();

    let mut a_min = f64::INFINITY;
    let mut g_min = f64::INFINITY;
    let mut g_max = 0.0f64;
    let mut grad_max = 0.0f64;
    let mut frame_dev = 0.0f64;
    let mut weingarten = 0.0f64;
    let mut shift_min = f64::INFINITY;
    for (i, &th) in thetas.iter().enumerate() {
        for (j, &z) in zs.iter().enumerate() {
            if !domain.contains(th, z) {
                continue;
            }
            let p = surface.eval(th, z);
            a_min = a_min.min(p.a_theta.min(p.a_z));
            frame_dev = frame_dev.max(frame_deviation(&p));
            weingarten = weingarten.max(weingarten_deviation(surface, th, z));
            let (v1, v2) = (g1[i][j], g2[i][j]);
            g_min = g_min.min(v1.min(v2));
            g_max = g_max.max(v1.max(v2));
            let surf_grad = |g: &Vec<Vec<f64>>| {
                let gth = Stencil::at(i, samples, d_theta).apply(|k| g[k][j]);
                let gz = Stencil::at(j, samples, d_z).apply(|k| g[i][k]);
                ((gth / p.a_theta).powi(2) + (gz / p.a_z).powi(2)).sqrt()
            };
            grad_max = grad_max.max(surf_grad(&g1) + surf_grad(&g2));
            for t in [-v1, v2] {
                shift_min = shift_min.min((1.0 + t * p.kappa_theta).min(1.0 + t * p.kappa_z));
            }
        }
    }

    let desc = domain.descriptors(samples);
    let mut report = AdmissibilityReport {
        rows: Vec::new(),
        samples,
    };
    use BoundKind::*;
    report.push("omega", domain.omega, 0.0, Above);
    report.push("l", desc.l, 0.0, Above);
    report.push("L", desc.big_l, f64::INFINITY, AtMost);
    report.push("Z", desc.big_z, f64::INFINITY, AtMost);
    report.push("a", a_min, 0.0, Above);
    report.push(
        "A",
        sobolev_sup(&a_th, d_theta, d_z, true) + sobolev_sup(&a_z, d_theta, d_z, true),
        f64::INFINITY,
        AtMost,
    );
    report.push(
        "k",
        sobolev_sup(&k_th, d_theta, d_z, false) + sobolev_sup(&k_z, d_theta, d_z, false),
        f64::INFINITY,
        AtMost,
    );
    report.push("g_min_over_h", g_min / h, 1.0, AtLeast);
    report.push("c1", g_max / h, profile.c1.unwrap_or(f64::INFINITY), AtMost);
    report.push("c2", grad_max / h, profile.c2.unwrap_or(f64::INFINITY), AtMost);
    report.push("frame_orthonormality", frame_dev, 1e-10, AtMost);
    report.push("weingarten_deviation", weingarten, 1e-8, AtMost);
    report.push("min_shift_factor", shift_min, 0.5, AtLeast);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface::{make_builtin_surface, PatchDomain, SurfaceKind};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn plate_with_constant_thickness_passes() {
        let s = make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let r = validate_admissibility(&s, &ThicknessProfile::constant(0.01), 17).unwrap();
        assert!(r.all_pass(), "{:?}", r.failures());
        assert_eq!(r.estimate("a"), 1.0);
        assert_eq!(r.estimate("k"), 0.0);
        assert_eq!(r.estimate("c1"), 1.0);
        assert!(r.estimate("c2") < 1e-12);
    }

    #[test]
    fn sphere_with_sinusoidal_thickness() {
        // theta in [0, pi] and colatitude z in [pi/4, 3pi/4] put the maximum of
        // sin(theta) sin(z) on a sample.
        let s = make_builtin_surface(
            SurfaceKind::SphereCap(1.0),
            PatchDomain::rectangle(PI, FRAC_PI_2 - PI / 4.0, FRAC_PI_2 + PI / 4.0),
        )
        .unwrap();
        let p = ThicknessProfile::sinusoidal(0.01, 0.5);
        let r = validate_admissibility(&s, &p, 33).unwrap();
        assert!(r.all_pass(), "{:?}", r.failures());
        let c1 = r.estimate("c1");
        assert!((1.5..1.5 + 1e-12).contains(&c1), "c1 = {c1}");
        // |grad(sin theta sin z)| = sqrt(cos^2 theta + sin^2 theta cos^2 z) <= 1,
        // attained at theta = 0.
        let c2 = r.estimate("c2");
        assert!((c2 - 0.5).abs() < 0.01, "c2 = {c2}");
    }

    #[test]
    fn thin_lower_profile_fails_first_clause() {
        let s = make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let h = 0.01;
        let p = ThicknessProfile::custom(h, move |_, _| [h / 2.0, 0.0, 0.0], move |_, _| [h, 0.0, 0.0]);
        let r = validate_admissibility(&s, &p, 17).unwrap();
        assert_eq!(r.failures(), vec!["g_min_over_h"]);
    }

    #[test]
    fn refinement_never_turns_failure_into_pass() {
        let s = make_builtin_surface(SurfaceKind::SphereCap(1.0), PatchDomain::rectangle(1.0, 0.5, 2.0)).unwrap();
        let h = 0.05;
        let p = ThicknessProfile {
            c1: Some(1.3),
            c2: Some(0.2),
            ..ThicknessProfile::sinusoidal(h, 0.5)
        };
        let mut prev: Option<AdmissibilityReport> = None;
        for n in [17, 33, 65, 129] {
            let r = validate_admissibility(&s, &p, n).unwrap();
            if let Some(prev) = &prev {
                for row in &prev.rows {
                    if !row.pass {
                        assert!(!r.get(row.symbol).unwrap().pass, "{} flipped at {n}", row.symbol);
                    }
                }
                // point-sampled extrema only sharpen on nested samplings
                assert!(r.estimate("c1") >= prev.estimate("c1"));
                assert!(r.estimate("a") <= prev.estimate("a"));
            }
            prev = Some(r);
        }
        assert!(!prev.unwrap().get("c1").unwrap().pass);
    }

    #[test]
    fn too_coarse_sampling_is_rejected() {
        let s = make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        assert!(validate_admissibility(&s, &ThicknessProfile::constant(0.1), 9).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let s = make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let r = validate_admissibility(&s, &ThicknessProfile::constant(0.1), 17).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("symbol,estimate,bound,pass\n"));
        assert!(text.contains("\nc1,"));
    }
}
