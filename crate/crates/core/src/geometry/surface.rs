//! Analytic mid-surface patches in principal coordinates.
//!
//! Every built-in surface is parametrized so that `theta = const` and
//! `z = const` are lines of curvature. The unit normal is oriented so that
//! `n_{,theta} = kappa_theta A_theta e_theta` and `n_{,z} = kappa_z A_z e_z`,
//! which makes `(1 + t kappa)` the exact Lamé factor of the offset surface
//! `r + t n`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KornError, Result};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn axpy(a: f64, x: Vec3, y: Vec3) -> Vec3 {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Smallest metric coefficient accepted before a parametrization is
/// considered singular.
pub const METRIC_FLOOR: f64 = 1e-8;

/// Built-in surface families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum SurfaceKind {
    Plate,
    /// Circular cylinder of the given radius; `theta` is the polar angle.
    Cylinder(f64),
    /// Sphere of the given radius; `theta` is longitude and `z` colatitude.
    SphereCap(f64),
    /// Catenoid `r = (c cosh(z/c) cos theta, c cosh(z/c) sin theta, z)`.
    Catenoid(f64),
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Plate => "plate",
            SurfaceKind::Cylinder(_) => "cylinder",
            SurfaceKind::SphereCap(_) => "sphere_cap",
            SurfaceKind::Catenoid(_) => "catenoid",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            SurfaceKind::Plate => 0.0,
            SurfaceKind::Cylinder(r) | SurfaceKind::SphereCap(r) | SurfaceKind::Catenoid(r) => r,
        }
    }

    pub fn from_name(name: &str, param: f64) -> Option<Self> {
        match name {
            "plate" => Some(SurfaceKind::Plate),
            "cylinder" => Some(SurfaceKind::Cylinder(param)),
            "sphere_cap" | "sphere" => Some(SurfaceKind::SphereCap(param)),
            "catenoid" => Some(SurfaceKind::Catenoid(param)),
            _ => None,
        }
    }
}

/// Lower or upper principal-line bound `z^i(theta)`.
#[derive(Clone)]
pub enum ZBound {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ZBound {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            ZBound::Constant(c) => *c,
            ZBound::Function(f) => f(theta),
        }
    }
}

impl fmt::Debug for ZBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZBound::Constant(c) => write!(f, "Constant({c})"),
            ZBound::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Parameter domain `D = {theta in [0, omega], z in [z1(theta), z2(theta)]}`.
#[derive(Debug, Clone)]
pub struct PatchDomain {
    pub omega: f64,
    pub z1: ZBound,
    pub z2: ZBound,
}

/// Sampled width and Lipschitz descriptors of a patch domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainDescriptors {
    /// `min (z2 - z1)`
    pub l: f64,
    /// `max (z2 - z1)`
    pub big_l: f64,
    /// `sup|z1| + sup|z1'| + sup|z2| + sup|z2'|`
    pub big_z: f64,
    /// largest sampled Lipschitz seminorm of `z1` or `z2`
    pub lipschitz: f64,
}

impl PatchDomain {
    pub fn rectangle(omega: f64, z_min: f64, z_max: f64) -> Self {
        PatchDomain {
            omega,
            z1: ZBound::Constant(z_min),
            z2: ZBound::Constant(z_max),
        }
    }

    pub fn is_rectangle(&self) -> bool {
        matches!((&self.z1, &self.z2), (ZBound::Constant(_), ZBound::Constant(_)))
    }

    pub fn contains(&self, theta: f64, z: f64) -> bool {
        let tol = 1e-12 * (1.0 + z.abs());
        theta >= -1e-12
            && theta <= self.omega + 1e-12
            && z >= self.z1.eval(theta) - tol
            && z <= self.z2.eval(theta) + tol
    }

    /// Bounding box `(z_min, z_max)` over `samples` values of theta.
    pub fn z_range(&self, samples: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for theta in linspace(0.0, self.omega, samples.max(2)) {
            lo = lo.min(self.z1.eval(theta));
            hi = hi.max(self.z2.eval(theta));
        }
        (lo, hi)
    }

    pub fn descriptors(&self, samples: usize) -> DomainDescriptors {
        let thetas = linspace(0.0, self.omega, samples.max(2));
        let z1: Vec<f64> = thetas.iter().map(|&t| self.z1.eval(t)).collect();
        let z2: Vec<f64> = thetas.iter().map(|&t| self.z2.eval(t)).collect();
        let widths = z1.iter().zip(&z2).map(|(a, b)| b - a);
        let l = widths.clone().fold(f64::INFINITY, f64::min);
        let big_l = widths.fold(f64::NEG_INFINITY, f64::max);
        let lip = |v: &[f64]| {
            thetas
                .windows(2)
                .zip(v.windows(2))
                .map(|(t, f)| ((f[1] - f[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max)
        };
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (lip1, lip2) = (lip(&z1), lip(&z2));
        DomainDescriptors {
            l,
            big_l,
            big_z: sup(&z1) + lip1 + sup(&z2) + lip2,
            lipschitz: lip1.max(lip2),
        }
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let d = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a + d * i as f64 }).collect()
}

/// All analytic evaluators of a patch at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub r: Vec3,
    pub n: Vec3,
    pub e_theta: Vec3,
    pub e_z: Vec3,
    pub a_theta: f64,
    pub a_z: f64,
    /// `dA_theta/dz`
    pub a_theta_z: f64,
    /// `dA_z/dtheta`
    pub a_z_theta: f64,
    pub kappa_theta: f64,
    pub kappa_z: f64,
    /// `(dkappa_theta/dtheta, dkappa_theta/dz)`
    pub dkappa_theta: [f64; 2],
    /// `(dkappa_z/dtheta, dkappa_z/dz)`
    pub dkappa_z: [f64; 2],
}

impl SurfacePoint {
    /// Local orthonormal frame `(n, e_theta, e_z)` as rows.
    pub fn frame(&self) -> [Vec3; 3] {
        [self.n, self.e_theta, self.e_z]
    }

    pub fn gaussian_curvature(&self) -> f64 {
        self.kappa_theta * self.kappa_z
    }
}

/// An analytic mid-surface patch in principal coordinates.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    kind: SurfaceKind,
    domain: PatchDomain,
}

impl SurfacePatch {
    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn domain(&self) -> &PatchDomain {
        &self.domain
    }

    pub fn position(&self, theta: f64, z: f64) -> Vec3 {
        self.eval(theta, z).r
    }

    /// Offset point `R(t, theta, z) = r + t n`.
    pub fn offset(&self, t: f64, theta: f64, z: f64) -> Vec3 {
        let p = self.eval(theta, z);
        axpy(t, p.n, p.r)
    }

    pub fn eval(&self, theta: f64, z: f64) -> SurfacePoint {
        let (st, ct) = theta.sin_cos();
        match self.kind {
            SurfaceKind::Plate => SurfacePoint {
                r: [theta, z, 0.0],
                n: [0.0, 0.0, 1.0],
                e_theta: [1.0, 0.0, 0.0],
                e_z: [0.0, 1.0, 0.0],
                a_theta: 1.0,
                a_z: 1.0,
                a_theta_z: 0.0,
                a_z_theta: 0.0,
                kappa_theta: 0.0,
                kappa_z: 0.0,
                dkappa_theta: [0.0; 2],
                dkappa_z: [0.0; 2],
            },
            SurfaceKind::Cylinder(radius) => SurfacePoint {
                r: [radius * ct, radius * st, z],
                n: [ct, st, 0.0],
                e_theta: [-st, ct, 0.0],
                e_z: [0.0, 0.0, 1.0],
                a_theta: radius,
                a_z: 1.0,
                a_theta_z: 0.0,
                a_z_theta: 0.0,
                kappa_theta: 1.0 / radius,
                kappa_z: 0.0,
                dkappa_theta: [0.0; 2],
                dkappa_z: [0.0; 2],
            },
            SurfaceKind::SphereCap(radius) => {
                let (sz, cz) = z.sin_cos();
                SurfacePoint {
                    r: [radius * sz * ct, radius * sz * st, radius * cz],
                    n: [sz * ct, sz * st, cz],
                    e_theta: [-st, ct, 0.0],
                    e_z: [cz * ct, cz * st, -sz],
                    a_theta: radius * sz,
                    a_z: radius,
                    a_theta_z: radius * cz,
                    a_z_theta: 0.0,
                    kappa_theta: 1.0 / radius,
                    kappa_z: 1.0 / radius,
                    dkappa_theta: [0.0; 2],
                    dkappa_z: [0.0; 2],
                }
            }
            SurfaceKind::Catenoid(c) => {
                let ch = (z / c).cosh();
                let sh = (z / c).sinh();
                let k = 1.0 / (c * ch * ch);
                let dk = -2.0 * sh / (c * c * ch * ch * ch);
                SurfacePoint {
                    r: [c * ch * ct, c * ch * st, z],
                    n: [ct / ch, st / ch, -sh / ch],
                    e_theta: [-st, ct, 0.0],
                    e_z: [sh * ct / ch, sh * st / ch, 1.0 / ch],
                    a_theta: c * ch,
                    a_z: ch,
                    a_theta_z: sh,
                    a_z_theta: 0.0,
                    kappa_theta: k,
                    kappa_z: -k,
                    dkappa_theta: [0.0, dk],
                    dkappa_z: [0.0, -dk],
                }
            }
        }
    }
}

/// Builds one of the analytic patches over `domain`.
///
/// Fails when a geometric parameter is not positive or when a metric
/// coefficient drops below [`METRIC_FLOOR`] on a 65x65 sampling of the domain.
pub fn make_builtin_surface(kind: SurfaceKind, domain: PatchDomain) -> Result<SurfacePatch> {
    if !(domain.omega > 0.0) {
        return Err(KornError::InvalidInput(format!(
            "theta extent must be positive, got {}",
            domain.omega
        )));
    }
    match kind {
        SurfaceKind::Plate => {}
        SurfaceKind::Cylinder(p) | SurfaceKind::SphereCap(p) | SurfaceKind::Catenoid(p) => {
            if !(p > 0.0) || !p.is_finite() {
                return Err(KornError::InvalidInput(format!(
                    "{} parameter must be positive, got {p}",
                    kind.name()
                )));
            }
        }
    }
    let desc = domain.descriptors(65);
    if !(desc.l > 0.0) {
        return Err(KornError::InvalidInput(
            "patch domain must satisfy z2(theta) > z1(theta)".into(),
        ));
    }
    let patch = SurfacePatch { kind, domain };
    for theta in linspace(0.0, patch.domain.omega, 65) {
        let lo = patch.domain.z1.eval(theta);
        let hi = patch.domain.z2.eval(theta);
        for z in linspace(lo, hi, 65) {
            let p = patch.eval(theta, z);
            for (metric, value) in [("A_theta", p.a_theta), ("A_z", p.a_z)] {
                if !(value >= METRIC_FLOOR) {
                    return Err(KornError::SingularParametrization {
                        metric,
                        value,
                        theta,
                        z,
                    });
                }
            }
        }
    }
    Ok(patch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(a: Vec3, b: Vec3) -> Vec3 {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    fn scale(a: f64, x: Vec3) -> Vec3 {
        [a * x[0], a * x[1], a * x[2]]
    }

    fn norm(x: Vec3) -> f64 {
        dot(x, x).sqrt()
    }

    /// Central-difference Weingarten check: `n_{,theta}` against
    /// `kappa_theta A_theta e_theta`, and likewise for z. Returns the max
    /// deviation.
    fn weingarten_deviation(s: &SurfacePatch, theta: f64, z: f64, d: f64) -> f64 {
        let p = s.eval(theta, z);
        let n_th = scale(
            0.5 / d,
            sub(s.eval(theta + d, z).n, s.eval(theta - d, z).n),
        );
        let n_z = scale(0.5 / d, sub(s.eval(theta, z + d).n, s.eval(theta, z - d).n));
        let dev_th = norm(sub(n_th, scale(p.kappa_theta * p.a_theta, p.e_theta)));
        let dev_z = norm(sub(n_z, scale(p.kappa_z * p.a_z, p.e_z)));
        dev_th.max(dev_z)
    }

    fn builtins() -> Vec<SurfacePatch> {
        vec![
            make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap(),
            make_builtin_surface(SurfaceKind::Cylinder(2.0), PatchDomain::rectangle(1.0, 0.0, 1.0))
                .unwrap(),
            make_builtin_surface(
                SurfaceKind::SphereCap(1.0),
                PatchDomain::rectangle(1.0, 0.6, 2.4),
            )
            .unwrap(),
            make_builtin_surface(
                SurfaceKind::Catenoid(1.0),
                PatchDomain::rectangle(1.0, -0.8, 0.8),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn frames_are_orthonormal() {
        for s in builtins() {
            let (lo, hi) = s.domain().z_range(5);
            for theta in linspace(0.0, 1.0, 9) {
                for z in linspace(lo, hi, 9) {
                    let f = s.eval(theta, z).frame();
                    for i in 0..3 {
                        for j in 0..3 {
                            let expect = if i == j { 1.0 } else { 0.0 };
                            assert!((dot(f[i], f[j]) - expect).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tangents_match_position_derivatives() {
        let d = 1e-6;
        for s in builtins() {
            let (lo, hi) = s.domain().z_range(5);
            for theta in linspace(0.1, 0.9, 5) {
                for z in linspace(lo + 0.1, hi - 0.1, 5) {
                    let p = s.eval(theta, z);
                    let r_th = scale(0.5 / d, sub(s.position(theta + d, z), s.position(theta - d, z)));
                    let r_z = scale(0.5 / d, sub(s.position(theta, z + d), s.position(theta, z - d)));
                    assert!(norm(sub(r_th, scale(p.a_theta, p.e_theta))) < 1e-8);
                    assert!(norm(sub(r_z, scale(p.a_z, p.e_z))) < 1e-8);
                    // metric derivatives
                    let at_z = (s.eval(theta, z + d).a_theta - s.eval(theta, z - d).a_theta) * 0.5 / d;
                    let az_t = (s.eval(theta + d, z).a_z - s.eval(theta - d, z).a_z) * 0.5 / d;
                    assert!((at_z - p.a_theta_z).abs() < 1e-8);
                    assert!((az_t - p.a_z_theta).abs() < 1e-8);
                    let kt_z = (s.eval(theta, z + d).kappa_theta - s.eval(theta, z - d).kappa_theta)
                        * 0.5
                        / d;
                    assert!((kt_z - p.dkappa_theta[1]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn weingarten_sign_convention_holds() {
        for s in builtins() {
            let (lo, hi) = s.domain().z_range(5);
            for theta in linspace(0.1, 0.9, 5) {
                for z in linspace(lo + 0.1, hi - 0.1, 5) {
                    assert!(weingarten_deviation(&s, theta, z, 1e-5) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn weingarten_oracle_converges_at_second_order() {
        for s in builtins().into_iter().skip(1) {
            let (lo, hi) = s.domain().z_range(5);
            let (theta, z) = (0.37, 0.5 * (lo + hi) + 0.05);
            let coarse = weingarten_deviation(&s, theta, z, 1e-2);
            let fine = weingarten_deviation(&s, theta, z, 5e-3);
            let order = (coarse / fine).log2();
            assert!(order >= 1.8, "{:?}: order {order}", s.kind());
        }
    }

    #[test]
    fn cylinder_metric_and_curvature() {
        let s = make_builtin_surface(SurfaceKind::Cylinder(2.0), PatchDomain::rectangle(1.0, 0.0, 1.0))
            .unwrap();
        let p = s.eval(0.3, 0.4);
        assert_eq!(p.a_theta, 2.0);
        assert_eq!(p.a_z, 1.0);
        assert_eq!(p.kappa_z, 0.0);
        assert!((p.kappa_theta - 0.5).abs() < 1e-15);
        // finite-difference Weingarten oracle n_{,theta} . e_theta / A_theta
        let d = 1e-5;
        let n_th = scale(0.5 / d, sub(s.eval(0.3 + d, 0.4).n, s.eval(0.3 - d, 0.4).n));
        assert!((dot(n_th, p.e_theta) / p.a_theta - 0.5).abs() < 1e-9);
    }

    #[test]
    fn catenoid_has_opposite_principal_curvatures() {
        let s = make_builtin_surface(SurfaceKind::Catenoid(1.0), PatchDomain::rectangle(1.0, -1.0, 1.0))
            .unwrap();
        let p = s.eval(0.2, 0.0);
        assert!((p.a_theta - 1.0).abs() < 1e-15 && (p.a_z - 1.0).abs() < 1e-15);
        assert!((p.kappa_theta + p.kappa_z).abs() < 1e-15);
        assert!((p.kappa_theta.abs() - 1.0).abs() < 1e-15);
        for z in linspace(-1.0, 1.0, 11) {
            assert!(s.eval(0.5, z).gaussian_curvature() < 0.0);
        }
    }

    #[test]
    fn sphere_is_umbilic_and_plate_is_flat() {
        let s = make_builtin_surface(SurfaceKind::SphereCap(1.5), PatchDomain::rectangle(1.0, 0.5, 2.0))
            .unwrap();
        let p = s.eval(0.7, 1.1);
        assert_eq!(p.kappa_theta, p.kappa_z);
        let plate = make_builtin_surface(SurfaceKind::Plate, PatchDomain::rectangle(1.0, 0.0, 1.0)).unwrap();
        let q = plate.eval(0.5, 0.5);
        assert_eq!((q.a_theta, q.a_z, q.kappa_theta, q.kappa_z), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_through_pole_is_singular() {
        let err = make_builtin_surface(SurfaceKind::SphereCap(1.0), PatchDomain::rectangle(1.0, 0.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, KornError::SingularParametrization { metric: "A_theta", .. }));
    }

    #[test]
    fn nonpositive_parameter_rejected() {
        assert!(make_builtin_surface(SurfaceKind::Cylinder(0.0), PatchDomain::rectangle(1.0, 0.0, 1.0)).is_err());
        assert!(make_builtin_surface(SurfaceKind::Catenoid(-1.0), PatchDomain::rectangle(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn domain_descriptors_for_variable_bounds() {
        let d = PatchDomain {
            omega: 1.0,
            z1: ZBound::Function(Arc::new(|t| 0.1 * t)),
            z2: ZBound::Constant(1.0),
        };
        let desc = d.descriptors(101);
        assert!((desc.l - 0.9).abs() < 1e-12);
        assert!((desc.big_l - 1.0).abs() < 1e-12);
        assert!((desc.lipschitz - 0.1).abs() < 1e-9);
        assert!(!d.is_rectangle());
    }
}
