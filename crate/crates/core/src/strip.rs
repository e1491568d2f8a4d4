//! Planar thin strips `{0 < y < b, -phi1(y) < x < phi2(y)}` and their mapped
//! tensor grids `x = -phi1 + (xi + 1/2)(phi1 + phi2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{KornError, Result};
use crate::geometry::linspace;
use crate::stencil::{trapezoid, Stencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKind {
    Constant,
    Sinusoidal,
    SawtoothSmoothed,
}

impl PhiKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhiKind::Constant => "constant",
            PhiKind::Sinusoidal => "sinusoidal",
            PhiKind::SawtoothSmoothed => "sawtooth-smoothed",
        }
    }
}

const SAW_TERMS: usize = 8;

/// Width functions with value and first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct StripDomain {
    pub b: f64,
    pub h: f64,
    pub kind: PhiKind,
    pub amplitude: f64,
    /// `(min, max)` of the raw sawtooth partial sum, for normalization to [0, 1].
    saw_range: (f64, f64),
}

fn saw_raw(x: f64) -> [f64; 3] {
    let mut out = [0.5, 0.0, 0.0];
    for k in 1..=SAW_TERMS {
        let kf = k as f64;
        let arg = PI * kf / (SAW_TERMS + 1) as f64;
        let sigma = arg.sin() / arg;
        let (s, c) = (2.0 * PI * kf * x).sin_cos();
        out[0] -= sigma * s / (PI * kf);
        out[1] -= 2.0 * sigma * c;
        out[2] += 4.0 * PI * kf * sigma * s;
    }
    out
}

impl StripDomain {
    pub fn new(b: f64, h: f64, kind: PhiKind, amplitude: f64) -> Result<Self> {
        if !(b > 0.0 && h > 0.0) {
            return Err(KornError::InvalidInput(format!("strip needs b > 0 and h > 0, got b={b}, h={h}")));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(KornError::InvalidInput(format!("strip amplitude must be >= 0, got {amplitude}")));
        }
        let saw_range = if kind == PhiKind::SawtoothSmoothed {
            let n = 8192;
            (0..=n).map(|i| saw_raw(i as f64 / n as f64)[0]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        } else {
            (0.0, 1.0)
        };
        Ok(StripDomain {
            b,
            h,
            kind,
            amplitude,
            saw_range,
        })
    }

    pub fn rectangle(b: f64, h: f64) -> Self {
        StripDomain::new(b, h, PhiKind::Constant, 0.0).expect("positive rectangle")
    }

    pub fn with_h(&self, h: f64) -> Self {
        StripDomain { h, ..self.clone() }
    }

    fn profile(&self, y: f64, phase: f64) -> [f64; 3] {
        let (h, a, b) = (self.h, self.amplitude, self.b);
        match self.kind {
            PhiKind::Constant => [h, 0.0, 0.0],
            PhiKind::Sinusoidal => {
                let w = 2.0 * PI / b;
                let (s, c) = (w * y + phase).sin_cos();
                [h * (1.0 + 0.5 * a * (1.0 + s)), 0.5 * h * a * w * c, -0.5 * h * a * w * w * s]
            }
            PhiKind::SawtoothSmoothed => {
                let (lo, hi) = self.saw_range;
                let r = saw_raw(y / b + phase / (2.0 * PI));
                let k = h * a / (hi - lo);
                [h + k * (r[0] - lo), k * r[1] / b, k * r[2] / (b * b)]
            }
        }
    }

    /// Left width `phi1(y)` and its first two derivatives.
    pub fn phi1(&self, y: f64) -> [f64; 3] {
        self.profile(y, 0.0)
    }

    /// Right width `phi2(y)`, a quarter period (half for the sawtooth) out of phase.
    pub fn phi2(&self, y: f64) -> [f64; 3] {
        match self.kind {
            PhiKind::SawtoothSmoothed => self.profile(y, PI),
            _ => self.profile(y, 0.5 * PI),
        }
    }

    /// Sampled `(C1, C2)` with `h <= phi <= C1 h` and `|phi'| <= C2 h`.
    pub fn constants(&self, samples: usize) -> (f64, f64) {
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        for y in linspace(0.0, self.b, samples) {
            for p in [self.phi1(y), self.phi2(y)] {
                c1 = c1.max(p[0] / self.h);
                c2 = c2.max(p[1].abs() / self.h);
            }
        }
        (c1, c2)
    }

    /// Checks `phi >= h` at sampled points.
    pub fn validate(&self, samples: usize) -> Result<()> {
        for y in linspace(0.0, self.b, samples) {
            for p in [self.phi1(y), self.phi2(y)] {
                if p[0] < self.h * (1.0 - 1e-9) {
                    return Err(KornError::InvalidInput(format!(
                        "strip width {:.6e} below h = {:.6e} at y = {y}",
                        p[0], self.h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Mapped grid on a strip; node index `i + n_xi * j` with `i` across and
/// `j` along the strip.
#[derive(Debug, Clone)]
pub struct StripGrid {
    pub strip: StripDomain,
    pub n_xi: usize,
    pub n_y: usize,
    pub xi: Vec<f64>,
    pub y: Vec<f64>,
    pub d_xi: f64,
    pub d_y: f64,
    /// `phi1` per row.
    pub phi1: Vec<[f64; 3]>,
    /// `W = phi1 + phi2` per row.
    pub width: Vec<[f64; 3]>,
    pub x: Vec<f64>,
    pub weight: Vec<f64>,
}

impl StripGrid {
    pub fn new(strip: &StripDomain, n_xi: usize, n_y: usize) -> Result<Self> {
        if n_xi < 9 || n_y < 3 {
            return Err(KornError::UnderResolved {
                nodes: n_xi.min(n_y),
                required: 9,
            });
        }
        strip.validate(4 * n_y + 1)?;
        let xi = linspace(-0.5, 0.5, n_xi);
        let y = linspace(0.0, strip.b, n_y);
        let d_xi = 1.0 / (n_xi - 1) as f64;
        let d_y = strip.b / (n_y - 1) as f64;
        let phi1: Vec<[f64; 3]> = y.iter().map(|&v| strip.phi1(v)).collect();
        let width: Vec<[f64; 3]> = y
            .iter()
            .zip(&phi1)
            .map(|(&v, p)| {
                let q = strip.phi2(v);
                [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
            })
            .collect();
        let (wx, wy) = (trapezoid(n_xi, d_xi), trapezoid(n_y, d_y));
        let n = n_xi * n_y;
        let mut x = vec![0.0; n];
        let mut weight = vec![0.0; n];
        for j in 0..n_y {
            for i in 0..n_xi {
                let k = i + n_xi * j;
                x[k] = -phi1[j][0] + (xi[i] + 0.5) * width[j][0];
                weight[k] = width[j][0] * wx[i] * wy[j];
            }
        }
        Ok(StripGrid {
            strip: strip.clone(),
            n_xi,
            n_y,
            xi,
            y,
            d_xi,
            d_y,
            phi1,
            width,
            x,
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n_xi * j
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_xi, k / self.n_xi)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.coords(k);
        i == 0 || j == 0 || i + 1 == self.n_xi || j + 1 == self.n_y
    }

    pub fn area(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// `d xi / dy` at fixed `x`.
    #[inline]
    pub fn xi_y(&self, k: usize) -> f64 {
        let (i, j) = self.coords(k);
        let (p, w) = (self.phi1[j], self.width[j]);
        (p[1] - (self.xi[i] + 0.5) * w[1]) / w[0]
    }

    /// Stencils of `d/dx` and `d/dy` (at fixed `x`) as `(node, weight)` lists.
    pub fn partial_stencils(&self, k: usize) -> [Vec<(usize, f64)>; 2] {
        let (i, j) = self.coords(k);
        let w = self.width[j][0];
        let sx = Stencil::at(i, self.n_xi, self.d_xi);
        let sy = Stencil::at(j, self.n_y, self.d_y);
        let xy = self.xi_y(k);
        let dx: Vec<_> = sx.iter().map(|(a, c)| (self.index(a, j), c / w)).collect();
        let mut dy: Vec<_> = sy.iter().map(|(a, c)| (self.index(i, a), c)).collect();
        dy.extend(sx.iter().map(|(a, c)| (self.index(a, j), xy * c)));
        [dx, dy]
    }

    /// Physical partials `(f_x, f_y)` at every node.
    pub fn gradient(&self, f: &[f64]) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|k| {
                let [dx, dy] = self.partial_stencils(k);
                [
                    dx.iter().map(|(a, c)| c * f[*a]).sum(),
                    dy.iter().map(|(a, c)| c * f[*a]).sum(),
                ]
            })
            .collect()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weight.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// Samples `f(x, y)` at the nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.x[k], self.y[k / self.n_xi])).collect()
    }

    /// Euclidean distance from node `k` to the strip boundary.
    pub fn distance_to_boundary(&self, k: usize) -> f64 {
        let (_, j) = self.coords(k);
        let (px, py) = (self.x[k], self.y[j]);
        let s = &self.strip;
        let seg = |yb: f64| {
            let (lo, hi) = (-s.phi1(yb)[0], s.phi2(yb)[0]);
            let dx = if px < lo {
                lo - px
            } else if px > hi {
                px - hi
            } else {
                0.0
            };
            (dx * dx + (py - yb) * (py - yb)).sqrt()
        };
        let lateral = |curve: &dyn Fn(f64) -> f64| {
            let d = |yv: f64| ((px - curve(yv)).powi(2) + (py - yv).powi(2)).sqrt();
            let n = 512;
            let step = s.b / n as f64;
            let (mut best, mut at) = (f64::INFINITY, 0.0);
            for m in 0..=n {
                let yv = m as f64 * step;
                let v = d(yv);
                if v < best {
                    best = v;
                    at = yv;
                }
            }
            let (mut a, mut b) = ((at - step).max(0.0), (at + step).min(s.b));
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            while b - a > 1e-13 * s.b.max(1.0) {
                let c = b - phi * (b - a);
                let e = a + phi * (b - a);
                if d(c) <= d(e) {
                    b = e;
                } else {
                    a = c;
                }
            }
            best.min(d(0.5 * (a + b)))
        };
        let left = lateral(&|yv| -s.phi1(yv)[0]);
        let right = lateral(&|yv| s.phi2(yv)[0]);
        seg(0.0).min(seg(s.b)).min(left).min(right)
    }
}
