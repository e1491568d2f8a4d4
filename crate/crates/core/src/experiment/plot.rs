//! Static log-log scatter plots with the fitted line.

use std::fmt::Write as _;

use crate::fit::FitReport;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 56.0;

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a - 0.5, b + 0.5)
    } else {
        (a, b)
    }
}

/// Renders the points `(h, value)` and the fit `value = exp(intercept) h^slope`.
pub fn loglog_svg(fit: &FitReport, points: &[(f64, f64)]) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(h, v)| *h > 0.0 && *v > 0.0 && h.is_finite() && v.is_finite())
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(&fit.quantity));
    if pts.is_empty() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no positive data</text>"#, W / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        return out;
    }
    let (hx0, hx1) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (vy0, vy1) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (x0, x1) = decades(hx0, hx1);
    let (y0, y1) = decades(vy0, vy1);
    let sx = |h: f64| PAD + (h.log10() - x0) / (x1 - x0) * (W - 1.5 * PAD);
    let sy = |v: f64| H - PAD - (v.log10() - y0) / (y1 - y0) * (H - 1.5 * PAD);

    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        PAD / 2.0,
        W - 1.5 * PAD,
        H - 1.5 * PAD
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(10f64.powi(d));
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##, PAD / 2.0, H - PAD);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"#, H - PAD + 16.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(10f64.powi(d));
        let _ = writeln!(out, r##"<line x1="{PAD}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, W - PAD / 2.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#, PAD - 4.0, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">h</text>"#, W / 2.0, H - 12.0);

    if fit.slope.is_finite() {
        let line = |h: f64| (fit.intercept + fit.slope * h.ln()).exp();
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="steelblue" stroke-width="1.5"/>"#,
            sx(hx0),
            sy(line(hx0)),
            sx(hx1),
            sy(line(hx1))
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">slope {:.3}, R2 {:.3}, {}</text>"#,
            PAD + 8.0,
            PAD / 2.0 + 16.0,
            fit.slope,
            fit.r2,
            fit.verdict
        );
    }
    for (h, v) in &pts {
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="firebrick"/>"#, sx(*h), sy(*v));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
