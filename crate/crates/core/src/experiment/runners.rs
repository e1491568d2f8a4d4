//! Per-experiment job lists and their reductions into rows, fits and checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{AnsatzResultRow, Check, FailedJob, FitSeries, HarmonicRow, ResultRow, RunOutput};
use crate::ansatz::{ansatz_scaling_report, refinement_sensitivity, AnsatzRow, BumpProfile};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::geometry::{validate_admissibility, GridDims, ShellGrid, SurfacePatch};
use crate::harmonic::{
    lemma41_quotient, lemma42_quotient, lemma43_check, lemma44_on_sample, lemma45_quotient, solve_harmonic,
    strip_distances, FourierBoundary, RESIDUAL_GATE,
};
use crate::korn::{
    assemble_forms, curvature_refined_quotients, interpolation_constant, interpolation_rhs, korn_first_2d_constant,
    korn_second_constant, stack,
};
use crate::linalg::EigenEstimate;
use crate::operators::{
    cartesian_crosscheck, gradient_energies, rotation_field, translation_field, write_field_csv, FieldSample,
};
use crate::strip::StripGrid;

/// Eigen residual expected of every reported constant.
pub const RESIDUAL_TARGET: f64 = 1e-7;

/// Smooth trigonometric field of the operator cross-check.
pub fn crosscheck_field(t: f64, th: f64, z: f64) -> [f64; 3] {
    [
        (2.0 * th).sin() * z.cos() + 3.0 * t,
        (th + z).cos() * (1.0 + t),
        (th * z).sin() - 2.0 * t * th,
    ]
}

pub(super) fn dispatch(kind: ExperimentKind, c: &ExperimentConfig) -> Result<RunOutput> {
    match kind {
        ExperimentKind::Admissibility => admissibility(c),
        ExperimentKind::Gradcheck => gradcheck(c),
        ExperimentKind::Korn2 => shell_constant(c, Constant::Korn2),
        ExperimentKind::Refined => shell_constant(c, Constant::Refined),
        ExperimentKind::Interp => interp(c),
        ExperimentKind::Korn1TwoD => korn1_2d(c),
        ExperimentKind::Ansatz => ansatz(c),
        ExperimentKind::Harmonic => harmonic(c),
    }
}

struct Case {
    label: String,
    surface: SurfacePatch,
}

fn cases(c: &ExperimentConfig) -> Result<Vec<Case>> {
    c.surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let dup = c.surfaces.iter().filter(|o| o.kind == s.kind).count() > 1;
            Ok(Case {
                label: if dup { format!("{}_{i}", s.kind) } else { s.kind.clone() },
                surface: s.build()?,
            })
        })
        .collect()
}

/// Runs `f` over `0..names.len()` on the current pool; results keep job order.
fn run_jobs<T: Send>(
    names: &[String],
    out: &mut RunOutput,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Vec<Option<T>> {
    let results: Vec<Result<T>> = (0..names.len()).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .zip(names)
        .map(|(r, name)| match r {
            Ok(v) => {
                out.completed.push(name.clone());
                Some(v)
            }
            Err(e) => {
                out.failed.push(FailedJob {
                    job: name.clone(),
                    error: e.to_string(),
                });
                None
            }
        })
        .collect()
}

fn grid_for(c: &ExperimentConfig, surface: &SurfacePatch, h: f64, dims: GridDims) -> Result<ShellGrid> {
    ShellGrid::new(surface, &c.thickness.profile(h), dims)
}

fn thickness_name(c: &ExperimentConfig) -> String {
    c.thickness.profile(1.0).kind_name().to_string()
}

#[allow(clippy::too_many_arguments)]
fn row(
    surface: &str,
    thickness: &str,
    h: f64,
    dims: GridDims,
    quantity: &str,
    value: f64,
    residual: Option<f64>,
    witness: &str,
) -> ResultRow {
    ResultRow {
        surface: surface.to_string(),
        thickness_kind: thickness.to_string(),
        h,
        n_t: dims.n_t,
        n_theta: dims.n_theta,
        n_z: dims.n_z,
        quantity_name: quantity.to_string(),
        value,
        residual,
        witness_file: witness.to_string(),
    }
}

fn save_witness(
    c: &ExperimentConfig,
    out: &mut RunOutput,
    kind: ExperimentKind,
    label: &str,
    k: usize,
    est: &EigenEstimate,
    dims: GridDims,
) -> Result<String> {
    if !c.save_witnesses || est.witness.len() != 3 * dims.nodes() {
        return Ok(String::new());
    }
    let name = format!("witnesses/{kind}_{label}_h{k}.csv");
    let mut buf = Vec::new();
    write_field_csv(&FieldSample::from_stacked(&est.witness), dims, &mut buf)?;
    out.files.push((name.clone(), buf));
    Ok(name)
}

fn admissibility(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let cases = cases(c)?;
    let hs = c.h_values();
    let samples = c.grid.n_theta.max(c.grid.n_z).max(17);
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|s| (0..hs.len()).map(move |k| (s, k))).collect();
    let names: Vec<String> = jobs
        .iter()
        .map(|&(s, k)| format!("admissibility {} h={}", cases[s].label, hs[k]))
        .collect();
    let reports = run_jobs(&names, &mut out, |j| {
        let (s, k) = jobs[j];
        validate_admissibility(&cases[s].surface, &c.thickness.profile(hs[k]), samples)
    });
    let thick = thickness_name(c);
    let dims = GridDims::new(1, samples, samples);
    for (&(s, k), rep) in jobs.iter().zip(reports) {
        let Some(rep) = rep else { continue };
        let label = &cases[s].label;
        let file = if hs.len() == 1 {
            format!("admissibility_{label}.csv")
        } else {
            format!("admissibility_{label}_h{k}.csv")
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf)?;
        out.files.push((file, buf));
        for r in &rep.rows {
            out.rows.push(row(label, &thick, hs[k], dims, r.symbol, r.estimate, None, ""));
        }
        out.checks.push(Check::at_most(
            format!("{label} h={}: failed conditions", hs[k]),
            rep.failures().len() as f64,
            0.0,
        ));
    }
    Ok(out)
}

fn gradcheck(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let cases = cases(c)?;
    let hs = c.h_values();
    let coarse = c.grid;
    let fine = GridDims::new(2 * coarse.n_t - 1, 2 * coarse.n_theta - 1, 2 * coarse.n_z - 1);
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|s| (0..hs.len()).map(move |k| (s, k))).collect();
    let names: Vec<String> = jobs
        .iter()
        .map(|&(s, k)| format!("gradcheck {} h={}", cases[s].label, hs[k]))
        .collect();
    let results = run_jobs(&names, &mut out, |j| {
        let (s, k) = jobs[j];
        let surface = &cases[s].surface;
        let rep = cartesian_crosscheck(crosscheck_field, surface, &c.thickness.profile(hs[k]), coarse, fine)?;
        let mut rigid = Vec::new();
        for dims in [coarse, fine] {
            let grid = grid_for(c, surface, hs[k], dims)?;
            let mut worst = 0.0f64;
            for a in 0..6 {
                let mut axis = [0.0; 3];
                axis[a % 3] = 1.0;
                let u = if a < 3 {
                    translation_field(&grid, axis)
                } else {
                    rotation_field(&grid, axis)
                };
                let (g2, e2) = gradient_energies(&u, &grid)?;
                worst = worst.max(e2.sqrt() / g2.sqrt().max(1.0));
            }
            rigid.push((dims, worst, grid.delta()));
        }
        Ok((rep, rigid))
    });
    let thick = thickness_name(c);
    for (&(s, k), r) in jobs.iter().zip(results) {
        let Some((rep, rigid)) = r else { continue };
        let (label, h) = (&cases[s].label, hs[k]);
        out.rows.push(row(label, &thick, h, coarse, "deviation", rep.deviation_coarse, None, ""));
        out.rows.push(row(label, &thick, h, fine, "deviation", rep.deviation_fine, None, ""));
        out.rows.push(row(label, &thick, h, coarse, "order", rep.order, None, ""));
        out.checks.push(Check::at_least(
            format!("{label} h={h}: crosscheck order"),
            rep.order,
            c.bands.gradcheck_order,
        ));
        for (dims, worst, delta) in rigid {
            out.rows.push(row(label, &thick, h, dims, "rigid_strain_ratio", worst, None, ""));
            out.checks.push(Check::at_most(
                format!("{label} h={h} n_theta={}: rigid strain ratio", dims.n_theta),
                worst,
                c.bands.rigid_factor * delta * delta,
            ));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Constant {
    Korn2,
    Refined,
}

fn shell_constant(c: &ExperimentConfig, which: Constant) -> Result<RunOutput> {
    let kind = c.kind()?;
    let mut out = RunOutput::default();
    let cases = cases(c)?;
    let hs = c.h_values();
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|s| (0..hs.len()).map(move |k| (s, k))).collect();
    let names: Vec<String> = jobs
        .iter()
        .map(|&(s, k)| format!("{kind} {} h={}", cases[s].label, hs[k]))
        .collect();
    let results = run_jobs(&names, &mut out, |j| {
        let (s, k) = jobs[j];
        let grid = grid_for(c, &cases[s].surface, hs[k], c.grid)?;
        let kg = grid.columns[0].point.gaussian_curvature();
        let forms = assemble_forms(&grid)?;
        let est = match which {
            Constant::Korn2 => korn_second_constant(&forms, &c.eigen)?,
            Constant::Refined => curvature_refined_quotients(&forms, &c.eigen)?,
        };
        Ok((est, kg))
    });
    let thick = thickness_name(c);
    let quantity = match which {
        Constant::Korn2 => "c2",
        Constant::Refined => "refined",
    };
    for (s, case) in cases.iter().enumerate() {
        let mut points = Vec::new();
        let mut worst_res = 0.0f64;
        let mut sign = 0.0;
        for (j, &(js, k)) in jobs.iter().enumerate() {
            if js != s {
                continue;
            }
            let Some((est, kg)) = &results[j] else { continue };
            let witness = save_witness(c, &mut out, kind, &case.label, k, est, c.grid)?;
            out.rows.push(row(
                &case.label,
                &thick,
                hs[k],
                c.grid,
                quantity,
                est.lambda,
                Some(est.residual),
                &witness,
            ));
            points.push((hs[k], est.lambda));
            worst_res = worst_res.max(est.residual);
            sign = kg.signum();
        }
        let band = match which {
            Constant::Korn2 => c.bands.korn2_slope,
            Constant::Refined if sign < 0.0 => c.bands.refined_negative_slope,
            Constant::Refined => c.bands.refined_positive_slope,
        };
        out.fits
            .push(FitSeries::new(format!("{}:{quantity}", case.label), points, Some(band)));
        out.checks.push(
            Check::at_most(format!("{}:{quantity} eigen residual", case.label), worst_res, RESIDUAL_TARGET).advisory(),
        );
    }
    Ok(out)
}

/// Random smooth field: a few products of low cosine modes in the
/// normalized surface parameters, each with a linear profile across the
/// thickness.
pub fn random_smooth_field(grid: &ShellGrid, rng: &mut ChaCha8Rng) -> FieldSample {
    let (th0, th1) = (grid.theta[0], grid.theta[grid.theta.len() - 1]);
    let (z0, z1) = (grid.z[0], grid.z[grid.z.len() - 1]);
    let h = grid.h();
    let mut modes = Vec::new();
    for comp in 0..3 {
        for _ in 0..4 {
            let a: f64 = rng.sample(StandardNormal);
            let slope: f64 = rng.sample(StandardNormal);
            let p = rng.random_range(0..4) as f64;
            let q = rng.random_range(0..4) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let psi = rng.random_range(0.0..std::f64::consts::TAU);
            modes.push((comp, a, slope, p, q, phase, psi));
        }
    }
    let pi = std::f64::consts::PI;
    FieldSample::from_fn(grid, |t, th, z| {
        let (x, y) = ((th - th0) / (th1 - th0), (z - z0) / (z1 - z0));
        let mut v = [0.0; 3];
        for &(comp, a, slope, p, q, phase, psi) in &modes {
            v[comp] += a * (p * pi * x + phase).cos() * (q * pi * y + psi).cos() * (1.0 + slope * t / h);
        }
        v
    })
}

fn interp(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let cases = cases(c)?;
    let hs = c.h_values();
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|s| (0..hs.len()).map(move |k| (s, k))).collect();
    let names: Vec<String> = jobs
        .iter()
        .map(|&(s, k)| format!("interp {} h={}", cases[s].label, hs[k]))
        .collect();
    let results = run_jobs(&names, &mut out, |j| {
        let (s, k) = jobs[j];
        let grid = grid_for(c, &cases[s].surface, hs[k], c.grid)?;
        interpolation_constant(&assemble_forms(&grid)?, &c.search, &c.eigen)
    });
    let thick = thickness_name(c);
    let mut sweep_max = vec![0.0f64; cases.len()];
    for (s, case) in cases.iter().enumerate() {
        let mut points = Vec::new();
        let mut worst_res = 0.0f64;
        for (j, &(js, k)) in jobs.iter().enumerate() {
            if js != s {
                continue;
            }
            let Some(est) = &results[j] else { continue };
            let witness = save_witness(c, &mut out, ExperimentKind::Interp, &case.label, k, &est.estimate, c.grid)?;
            let h = hs[k];
            out.rows.push(row(
                &case.label,
                &thick,
                h,
                c.grid,
                "c_int",
                est.c_int,
                Some(est.estimate.residual),
                &witness,
            ));
            out.rows
                .push(row(&case.label, &thick, h, c.grid, "lambda_at_s_star", est.lambda_at_s_star, None, ""));
            out.rows.push(row(&case.label, &thick, h, c.grid, "s_star_h", est.s_star * h, None, ""));
            points.push((h, est.c_int));
            worst_res = worst_res.max(est.estimate.residual);
            sweep_max[s] = sweep_max[s].max(est.c_int);
        }
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
        out.checks.push(Check::at_most(
            format!("{}:c_int max/min", case.label),
            hi / lo,
            c.bands.interp_spread,
        ));
        out.checks.push(
            Check::at_most(format!("{}:c_int eigen residual", case.label), worst_res, RESIDUAL_TARGET).advisory(),
        );
        out.fits.push(FitSeries::new(format!("{}:c_int", case.label), points, None));
    }

    // audit: random smooth fields and rigid motions against the sweep maximum
    let audit_names: Vec<String> = jobs
        .iter()
        .enumerate()
        .filter(|(j, _)| results[*j].is_some())
        .map(|(_, &(s, k))| format!("audit {} h={}", cases[s].label, hs[k]))
        .collect();
    let audit_jobs: Vec<(usize, (usize, usize))> = jobs
        .iter()
        .copied()
        .enumerate()
        .filter(|(j, _)| results[*j].is_some())
        .collect();
    let audits = run_jobs(&audit_names, &mut out, |a| {
        let (j, (s, k)) = audit_jobs[a];
        let grid = grid_for(c, &cases[s].surface, hs[k], c.grid)?;
        let forms = assemble_forms(&grid)?;
        let cst = sweep_max[s];
        let mut rng = ChaCha8Rng::seed_from_u64(c.master_seed);
        rng.set_stream(j as u64);
        let mut fields: Vec<Vec<f64>> = (0..c.audit_fields)
            .map(|_| stack(&random_smooth_field(&grid, &mut rng)))
            .collect();
        for a in 0..6 {
            let mut axis = [0.0; 3];
            axis[a % 3] = 1.0;
            fields.push(stack(&if a < 3 {
                translation_field(&grid, axis)
            } else {
                rotation_field(&grid, axis)
            }));
        }
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for u in &fields {
            let lhs = forms.g.quad(u);
            let rhs = interpolation_rhs(&forms, u, cst);
            if lhs > rhs {
                violations += 1;
            }
            worst = worst.max(lhs / rhs);
        }
        Ok((violations, worst, fields.len()))
    });
    let mut per_surface = vec![(0usize, 0.0f64, 0usize); cases.len()];
    for (&(_, (s, k)), r) in audit_jobs.iter().zip(audits) {
        let Some((v, worst, n)) = r else { continue };
        out.rows.push(row(
            &cases[s].label,
            &thick,
            hs[k],
            c.grid,
            "audit_worst_ratio",
            worst,
            None,
            "",
        ));
        let e = &mut per_surface[s];
        e.0 += v;
        e.1 = e.1.max(worst);
        e.2 += n;
    }
    for (case, (v, _, n)) in cases.iter().zip(per_surface) {
        out.checks.push(Check::at_most(
            format!("{}: audit violations in {n} fields", case.label),
            v as f64,
            0.0,
        ));
    }
    Ok(out)
}

fn korn1_2d(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let strip = c.strip.expect("validated");
    let sg = c.strip_grid.expect("validated");
    let hs = c.h_values();
    let names: Vec<String> = hs.iter().map(|h| format!("korn1_2d h={h}")).collect();
    let results = run_jobs(&names, &mut out, |k| {
        let grid = StripGrid::new(&strip.domain(hs[k])?, sg.n_xi, sg.n_y(strip.b, hs[k]))?;
        korn_first_2d_constant(&grid)
    });
    let mut points = Vec::new();
    let mut worst_res = 0.0f64;
    for (k, r) in results.iter().enumerate() {
        let Some(est) = r else { continue };
        let dims = GridDims::new(sg.n_xi, sg.n_y(strip.b, hs[k]), 1);
        out.rows.push(row(
            "strip",
            strip.phi_kind.name(),
            hs[k],
            dims,
            "k1_sq",
            est.lambda,
            Some(est.residual),
            "",
        ));
        points.push((hs[k], est.lambda));
        worst_res = worst_res.max(est.residual);
    }
    out.fits
        .push(FitSeries::new("strip:k1_sq".into(), points, Some(c.bands.korn1_2d_slope)));
    out.checks
        .push(Check::at_most("strip:k1_sq eigen residual", worst_res, RESIDUAL_TARGET).advisory());
    Ok(out)
}

fn ansatz(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let cases = cases(c)?;
    let hs = c.h_values();
    let thick = thickness_name(c);
    let policy = c.ansatz_grid;
    for case in &cases {
        let name = format!("ansatz {}", case.label);
        let report = BumpProfile::fitted(case.surface.domain(), hs[0]).and_then(|w| {
            let profile = c.thickness.profile(hs[0]);
            let rep = ansatz_scaling_report(&w, &case.surface, &profile, &hs, &policy)?;
            // one doubled grid at a time: each holds tens of millions of nodes
            let refine = hs
                .iter()
                .map(|&h| refinement_sensitivity(&w, &case.surface, &profile, h, &policy))
                .collect::<Result<Vec<f64>>>()?;
            Ok((rep, refine))
        });
        let (rep, refine) = match report {
            Ok(r) => {
                out.completed.push(name);
                r
            }
            Err(e) => {
                out.failed.push(FailedJob {
                    job: name,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let mut fits = Vec::new();
        for (q, norm) in AnsatzRow::NAMES.iter().enumerate() {
            let points: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.h, r.values()[q])).collect();
            let band = (q >= 4).then_some(c.bands.ansatz_ratio_slope);
            fits.push(FitSeries::new(format!("{}:{norm}", case.label), points, band));
        }
        for r in &rep.rows {
            for (q, norm) in AnsatzRow::NAMES.iter().enumerate() {
                out.ansatz_rows.push(AnsatzResultRow {
                    surface: case.label.clone(),
                    thickness_kind: thick.clone(),
                    h: r.h,
                    n_t: r.dims.n_t,
                    n_theta: r.dims.n_theta,
                    n_z: r.dims.n_z,
                    quantity_name: if q >= 4 { "ratio" } else { "norm" }.into(),
                    value: r.values()[q],
                    residual: None,
                    witness_file: String::new(),
                    norm_name: norm.to_string(),
                    fitted_exponent: fits[q].report.slope,
                    r2: fits[q].report.r2,
                });
            }
        }
        let dims = policy.dims();
        for (&h, &d) in hs.iter().zip(&refine) {
            out.ansatz_rows.push(AnsatzResultRow {
                surface: case.label.clone(),
                thickness_kind: thick.clone(),
                h,
                n_t: dims.n_t,
                n_theta: dims.n_theta,
                n_z: dims.n_z,
                quantity_name: "refinement".into(),
                value: d,
                residual: None,
                witness_file: String::new(),
                norm_name: "max_relative_change".into(),
                fitted_exponent: f64::NAN,
                r2: f64::NAN,
            });
        }
        let worst = refine.iter().cloned().fold(0.0, f64::max);
        out.checks.push(Check::at_most(
            format!("{}: grid refinement sensitivity", case.label),
            worst,
            c.bands.ansatz_refinement,
        ));
        out.fits.extend(fits);
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct HarmonicOutcome {
    q41: f64,
    q41_degenerate: bool,
    q42: f64,
    q45: f64,
    l43_y: f64,
    l43_x: f64,
    l44: f64,
    residual: f64,
}

fn harmonic(c: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let strip = c.strip.expect("validated");
    let sg = c.strip_grid.expect("validated");
    let hs = c.h_values();
    let grids: Vec<(StripGrid, Vec<f64>)> = hs
        .par_iter()
        .map(|&h| {
            let g = StripGrid::new(&strip.domain(h)?, sg.n_xi, sg.n_y(strip.b, h))?;
            let d = strip_distances(&g);
            Ok((g, d))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..hs.len()).flat_map(|k| (0..c.seeds).map(move |s| (k, s))).collect();
    let names: Vec<String> = jobs.iter().map(|&(k, s)| format!("harmonic h={} seed={s}", hs[k])).collect();
    let results = run_jobs(&names, &mut out, |j| {
        let (k, seed) = jobs[j];
        let (grid, delta) = &grids[k];
        let data = FourierBoundary::seeded(strip.b, c.master_seed, seed as u64);
        let sample = solve_harmonic(grid, &data)?;
        let w = &sample.w;
        let q41 = lemma41_quotient(grid, w);
        let mid = grid.n_xi / 2;
        let along: Vec<f64> = (0..grid.n_y).map(|jy| w[grid.index(mid, jy)]).collect();
        let (ly, ry) = lemma43_check(&along, 0.0, strip.b, 0.5)?;
        let jm = grid.n_y / 2;
        let across: Vec<f64> = (0..grid.n_xi).map(|i| w[grid.index(i, jm)]).collect();
        let (a, b) = (grid.x[grid.index(0, jm)], grid.x[grid.index(grid.n_xi - 1, jm)]);
        let (lx, rx) = lemma43_check(&across, a, b, 0.5)?;
        let (l44, r44) = lemma44_on_sample(&sample, delta);
        let ratio = |l: f64, r: f64| if r > 0.0 { l / r } else if l > 0.0 { f64::INFINITY } else { 0.0 };
        Ok(HarmonicOutcome {
            q41: q41.value,
            q41_degenerate: q41.degenerate,
            q42: lemma42_quotient(grid, w)?,
            q45: lemma45_quotient(grid, w)?,
            l43_y: ratio(ly, ry),
            l43_x: ratio(lx, rx),
            l44: ratio(l44, r44),
            residual: sample.residual,
        })
    });
    let mut hq41_all = Vec::new();
    let mut q42_all = Vec::new();
    let mut per_h: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); hs.len()];
    let (mut l43, mut l44, mut res) = (0.0f64, 0.0f64, 0.0f64);
    for (&(k, seed), r) in jobs.iter().zip(&results) {
        let Some(o) = r else { continue };
        let h = hs[k];
        let mut push = |name: &str, value: f64| {
            out.harmonic_rows.push(HarmonicRow {
                seed,
                h,
                b: strip.b,
                quotient_name: name.into(),
                value,
            })
        };
        push("q41", o.q41);
        push("h_q41", h * o.q41);
        push("q41_degenerate", if o.q41_degenerate { 1.0 } else { 0.0 });
        push("q42", o.q42);
        push("q45", o.q45);
        push("lemma43_y_ratio", o.l43_y);
        push("lemma43_x_ratio", o.l43_x);
        push("lemma44_ratio", o.l44);
        push("laplace_residual", o.residual);
        if !o.q41_degenerate {
            hq41_all.push(h * o.q41);
            per_h[k].0.push(h * o.q41);
        }
        q42_all.push(o.q42);
        per_h[k].1.push(o.q42);
        l43 = l43.max(o.l43_y).max(o.l43_x);
        l44 = l44.max(o.l44);
        res = res.max(o.residual);
    }
    let spread = |v: &mut Vec<f64>| {
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max / median(v)
    };
    let tol = c.bands.lemma_tol;
    out.checks.push(Check::at_most("h*q41 max/median", spread(&mut hq41_all), c.bands.harmonic_spread));
    out.checks.push(Check::at_most("q42 max/median", spread(&mut q42_all), c.bands.harmonic_spread));
    out.checks.push(Check::at_most("lemma43 worst lhs/rhs", l43, 1.0 + tol));
    out.checks.push(Check::at_most("lemma44 worst lhs/rhs", l44, 1.0 + tol));
    out.checks.push(Check::at_most("laplace residual", res, RESIDUAL_GATE));
    let mut m41 = Vec::new();
    let mut m42 = Vec::new();
    for (k, (a, b)) in per_h.iter_mut().enumerate() {
        m41.push((hs[k], median(a)));
        m42.push((hs[k], median(b)));
    }
    out.fits.push(FitSeries::new("strip:median_h_q41".into(), m41, None));
    out.fits.push(FitSeries::new("strip:median_q42".into(), m42, None));
    Ok(out)
}
