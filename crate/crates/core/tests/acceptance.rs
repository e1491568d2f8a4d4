//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stderr, so the lines show up without `--nocapture`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kornlab::config::{ExperimentConfig, ExperimentKind};
use kornlab::experiment::{run, RunSummary};
use kornlab::fit::Verdict;
use kornlab::geometry::{make_builtin_surface, GridDims, PatchDomain, ShellGrid, SurfaceKind, ThicknessProfile};
use kornlab::korn::{
    assemble_forms, curvature_refined_quotients, interpolation_constant, korn_second_constant, relaxed_denominator,
    QuadraticFormSet, SearchOptions,
};
use kornlab::linalg::{dense_top, top_generalized, EigenOptions, SymCsr};

fn report(n: u32, ok: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn preset_run(kind: ExperimentKind) -> (RunSummary, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let s = run(&ExperimentConfig::preset(kind), dir.path(), None).unwrap();
    (s, t.elapsed())
}

fn cached(cell: &'static OnceLock<(RunSummary, Duration)>, kind: ExperimentKind) -> &'static (RunSummary, Duration) {
    cell.get_or_init(|| preset_run(kind))
}

static GRADCHECK: OnceLock<(RunSummary, Duration)> = OnceLock::new();
static INTERP: OnceLock<(RunSummary, Duration)> = OnceLock::new();

fn checks_with<'a>(s: &'a RunSummary, needle: &str) -> Vec<&'a kornlab::experiment::Check> {
    s.checks.iter().filter(|c| c.name.contains(needle)).collect()
}

#[test]
fn criterion_01_operator_crosscheck() {
    let (s, t) = cached(&GRADCHECK, ExperimentKind::Gradcheck);
    let orders = checks_with(s, "crosscheck order");
    let ok = orders.len() == 2 && orders.iter().all(|c| c.verdict == Verdict::Pass) && t.as_secs() < 60;
    let detail = orders
        .iter()
        .map(|c| format!("{} = {:.3}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    report(1, ok, format!("{detail}; {:.1}s", t.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_02_rigid_kernel() {
    let (s, _) = cached(&GRADCHECK, ExperimentKind::Gradcheck);
    let rigid = checks_with(s, "rigid strain ratio");
    let ok = rigid.len() == 4 && rigid.iter().all(|c| c.verdict == Verdict::Pass);
    let worst = rigid.iter().map(|c| c.value / c.bound).fold(0.0, f64::max);
    report(2, ok, format!("{} grids, worst ratio/bound {worst:.2e}", rigid.len()));
    assert!(ok);
}

#[test]
fn criterion_03_korn_second_scaling() {
    let (s, t) = preset_run(ExperimentKind::Korn2);
    let fits: Vec<_> = ["sphere_cap:c2", "plate:c2"].iter().map(|q| s.fit(q).unwrap()).collect();
    let ok = fits.iter().all(|f| f.verdict == Verdict::Pass && f.r2 >= 0.95) && t.as_secs() < 20 * 60;
    let detail = fits
        .iter()
        .map(|f| format!("{} slope {:.3} R2 {:.4}", f.quantity, f.slope, f.r2))
        .collect::<Vec<_>>()
        .join(", ");
    report(3, ok, format!("{detail}; {:.1}s", t.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_04_interpolation_boundedness() {
    let (s, t) = cached(&INTERP, ExperimentKind::Interp);
    let spread = checks_with(s, "c_int max/min");
    let ok = spread.len() == 2 && spread.iter().all(|c| c.verdict == Verdict::Pass) && s.failed_jobs.is_empty();
    let detail = spread
        .iter()
        .map(|c| format!("{} = {:.3}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    report(4, ok, format!("{detail}; {:.1}s", t.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_05_interpolation_audit() {
    let (s, _) = cached(&INTERP, ExperimentKind::Interp);
    let audits = checks_with(s, "audit violations");
    let ok = audits.len() == 2 && audits.iter().all(|c| c.verdict == Verdict::Pass);
    let detail = audits
        .iter()
        .map(|c| format!("{}: {}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    report(5, ok, detail);
    assert!(ok);
}

#[test]
fn criterion_06_ansatz_sharpness() {
    let (s, t) = preset_run(ExperimentKind::Ansatz);
    let fits: Vec<_> = ["sphere_cap:rho1", "sphere_cap:rho2"].iter().map(|q| s.fit(q).unwrap()).collect();
    let refine = s.check("sphere_cap: grid refinement sensitivity").unwrap();
    let ok = fits.iter().all(|f| f.band.unwrap().contains(f.slope)) && refine.verdict == Verdict::Pass;
    let detail = fits
        .iter()
        .map(|f| format!("{} slope {:.4} R2 {:.3}", f.quantity, f.slope, f.r2))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        6,
        ok,
        format!("{detail}, refinement {:.2e}; {:.1}s", refine.value, t.as_secs_f64()),
    );
    assert!(ok);
}

#[test]
fn criterion_07_korn_first_2d() {
    let (s, t) = preset_run(ExperimentKind::Korn1TwoD);
    let f = s.fit("strip:k1_sq").unwrap();
    let ok = f.verdict == Verdict::Pass;
    report(7, ok, format!("slope {:.3} R2 {:.4}; {:.1}s", f.slope, f.r2, t.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_08_harmonic_lemmas() {
    let (s, t) = preset_run(ExperimentKind::Harmonic);
    let names = [
        "h*q41 max/median",
        "q42 max/median",
        "lemma43 worst lhs/rhs",
        "lemma44 worst lhs/rhs",
        "laplace residual",
    ];
    let checks: Vec<_> = names.iter().map(|n| s.check(n).unwrap()).collect();
    let ok = checks.iter().all(|c| c.verdict == Verdict::Pass) && s.failed_jobs.is_empty() && t.as_secs() < 600;
    let detail = checks
        .iter()
        .map(|c| format!("{} {:.3e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    report(8, ok, format!("{detail}; {:.1}s", t.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_09_refined_quotients() {
    let (s, t) = preset_run(ExperimentKind::Refined);
    let fits: Vec<_> = ["sphere_cap:refined", "catenoid:refined"]
        .iter()
        .map(|q| s.fit(q).unwrap())
        .collect();
    // a poor fit is reported as inconclusive, which this exploratory check accepts
    let ok = fits.iter().all(|f| f.verdict != Verdict::Fail);
    let detail = fits
        .iter()
        .map(|f| format!("{} slope {:.3} R2 {:.4} {}", f.quantity, f.slope, f.r2, f.verdict))
        .collect::<Vec<_>>()
        .join(", ");
    report(9, ok, format!("{detail}; {:.1}s", t.as_secs_f64()));
    assert!(ok);
}

fn shell_forms(kind: SurfaceKind, h: f64, dims: GridDims) -> QuadraticFormSet {
    let (z0, z1) = match kind {
        SurfaceKind::SphereCap(_) => (1.0708, 2.0708),
        SurfaceKind::Catenoid(_) => (0.05, 1.05),
        _ => (0.0, 1.0),
    };
    let s = make_builtin_surface(kind, PatchDomain::rectangle(1.0, z0, z1)).unwrap();
    let g = ShellGrid::new(&s, &ThicknessProfile::sinusoidal(h, 0.5), dims).unwrap();
    assemble_forms(&g).unwrap()
}

#[test]
fn criterion_10_oracle_equivalence() {
    let iterative = EigenOptions {
        dense_max: 0,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut problems = 0;
    let kinds = [
        SurfaceKind::Plate,
        SurfaceKind::Cylinder(1.0),
        SurfaceKind::SphereCap(1.0),
        SurfaceKind::Catenoid(1.0),
    ];
    for kind in kinds {
        for h in [1.0 / 16.0, 1.0 / 64.0] {
            let f = shell_forms(kind, h, GridDims::new(3, 9, 9));
            let mut pencils: Vec<(SymCsr, &SymCsr)> = vec![
                (SymCsr::combine(&[(1.0, &f.m), (1.0, &f.e)]).unwrap(), &f.g),
                (relaxed_denominator(&f, 1.0 / h).unwrap(), &f.g),
            ];
            if matches!(kind, SurfaceKind::SphereCap(_) | SurfaceKind::Catenoid(_)) {
                pencils.push((SymCsr::combine(&[(1.0, &f.n_in), (1.0, &f.e)]).unwrap(), &f.g));
                let dense = curvature_refined_quotients(&f, &EigenOptions::default()).unwrap().lambda;
                let iter = curvature_refined_quotients(&f, &iterative).unwrap().lambda;
                worst = worst.max(((dense - iter) / dense).abs());
            }
            for (q, g) in &pencils {
                let d = dense_top(g, q).unwrap().lambda;
                let i = top_generalized(g, q, &iterative).unwrap().lambda;
                worst = worst.max(((d - i) / d).abs());
                problems += 1;
            }
            let d = korn_second_constant(&f, &EigenOptions::default()).unwrap().lambda;
            let i = korn_second_constant(&f, &iterative).unwrap().lambda;
            worst = worst.max(((d - i) / d).abs());
        }
    }

    // one unknown: C = g / (sqrt(n e) / h + m + e) in closed form
    let mut toy_err = 0.0f64;
    for (g, e, n, m, h) in [(2.0, 1.0, 1.0, 1.0, 1.0), (5.0, 0.3, 2.0, 0.7, 0.1), (1.0, 4.0, 0.5, 0.2, 0.02)] {
        let mut f = shell_forms(SurfaceKind::Plate, h, GridDims::new(3, 3, 3));
        let one = |v: f64| SymCsr::diagonal(&[v]);
        f.g = one(g);
        f.e = one(e);
        f.n = one(n);
        f.m = one(m);
        let search = SearchOptions::default();
        let est = interpolation_constant(&f, &search, &EigenOptions::default()).unwrap();
        let exact = g / ((n * e).sqrt() / h + m + e);
        toy_err = toy_err.max((est.c_int - exact).abs());
    }
    let ok = worst <= 1e-6 && toy_err <= 1e-10;
    report(
        10,
        ok,
        format!("{problems} pencils, worst dense/iterative gap {worst:.2e}, toy oracle error {toy_err:.2e}"),
    );
    assert!(ok);
}
