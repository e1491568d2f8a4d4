//! Power-law fits `value ~ C h^slope` by least squares in log-log space.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Fits with `r2` below this are inconclusive whatever their slope.
pub const MIN_R2: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Combined verdict: any fail wins, then any inconclusive.
    pub fn combine(items: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in items {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepted slope interval; either end may be open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Band {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn at_least(lo: f64) -> Self {
        Band { lo: Some(lo), hi: None }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|l| x >= l) && self.hi.is_none_or(|h| x <= h)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>, inf: &str| v.map(|x| format!("{x}")).unwrap_or_else(|| inf.to_string());
        write!(f, "[{}, {}]", show(self.lo, "-inf"), show(self.hi, "inf"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub quantity: String,
    pub slope: f64,
    /// Natural log of the prefactor.
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    /// Pairs dropped for a non-positive or non-finite `h` or value.
    pub excluded: usize,
    pub band: Option<Band>,
    pub verdict: Verdict,
}

/// Least-squares fit of `ln value = intercept + slope ln h`.
pub fn fit_exponent(quantity: &str, pairs: &[(f64, f64)], band: Option<Band>) -> FitReport {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(h, v)| *h > 0.0 && *v > 0.0 && h.is_finite() && v.is_finite())
        .map(|(h, v)| (h.ln(), v.ln()))
        .collect();
    let n = pts.len();
    let excluded = pairs.len() - n;
    let mut report = FitReport {
        quantity: quantity.to_string(),
        slope: f64::NAN,
        intercept: f64::NAN,
        r2: f64::NAN,
        n_points: n,
        excluded,
        band,
        verdict: Verdict::Inconclusive,
    };
    if n < 3 {
        return report;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return report;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a constant series is fitted exactly by slope 0
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    report.slope = slope;
    report.intercept = intercept;
    report.r2 = r2;
    report.verdict = if !(r2 >= MIN_R2) {
        Verdict::Inconclusive
    } else if band.is_none_or(|b| b.contains(slope)) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn hs(n: usize) -> Vec<f64> {
        (0..n).map(|k| 0.5f64.powi(k as i32 + 2)).collect()
    }

    #[test]
    fn exact_inverse_law() {
        let p: Vec<_> = hs(5).into_iter().map(|h| (h, 1.0 / h)).collect();
        let f = fit_exponent("c", &p, Some(Band::new(-1.3, -0.7)));
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.verdict, Verdict::Pass);
    }

    #[test]
    fn prefactor_is_recovered() {
        let p: Vec<_> = hs(5).into_iter().map(|h| (h, 7.0 * h.powf(-1.5))).collect();
        let f = fit_exponent("c", &p, None);
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_point_closed_form() {
        let p = [(0.5, 3.0), (0.25, 5.0), (0.125, 9.0)];
        let f = fit_exponent("c", &p, None);
        // three equally spaced abscissae: slope = (y3 - y1) / (x3 - x1)
        let s = (9f64.ln() - 3f64.ln()) / (0.125f64.ln() - 0.5f64.ln());
        assert!((f.slope - s).abs() < 1e-12);
        let my = (3f64.ln() + 5f64.ln() + 9f64.ln()) / 3.0;
        assert!((f.intercept - (my - s * 0.25f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn noisy_law_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let p: Vec<_> = hs(8)
            .into_iter()
            .map(|h| (h, h.powf(-1.2) * (1.0 + noise.sample(&mut rng))))
            .collect();
        let f = fit_exponent("c", &p, None);
        assert!((f.slope + 1.2).abs() < 0.1);
        assert!(f.r2 >= 0.95);
    }

    #[test]
    fn bad_points_are_excluded() {
        let p = [(0.5, 1.0), (0.25, -1.0), (0.125, 0.0), (0.0625, 4.0)];
        let f = fit_exponent("c", &p, None);
        assert_eq!(f.excluded, 2);
        assert_eq!(f.verdict, Verdict::Inconclusive);
        assert!(f.slope.is_nan());
    }

    #[test]
    fn poor_fit_is_inconclusive_even_in_band() {
        let p = [(0.5, 1.0), (0.25, 3.0), (0.125, 1.0), (0.0625, 3.0), (0.03125, 1.0)];
        let f = fit_exponent("c", &p, Some(Band::new(-10.0, 10.0)));
        assert!(f.r2 < 0.95);
        assert_eq!(f.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn out_of_band_fails() {
        let p: Vec<_> = hs(5).into_iter().map(|h| (h, h.powi(-2))).collect();
        assert_eq!(fit_exponent("c", &p, Some(Band::at_least(-1.35))).verdict, Verdict::Fail);
        assert_eq!(Verdict::combine([Verdict::Pass, Verdict::Inconclusive]), Verdict::Inconclusive);
        assert_eq!(Verdict::combine([Verdict::Inconclusive, Verdict::Fail]), Verdict::Fail);
    }
}
