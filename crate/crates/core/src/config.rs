//! Experiment configuration, read from JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzGridPolicy;
use crate::error::{KornError, Result};
use crate::fit::Band;
use crate::geometry::{make_builtin_surface, GridDims, PatchDomain, SurfaceKind, SurfacePatch, ThicknessProfile};
use crate::korn::SearchOptions;
use crate::linalg::EigenOptions;
use crate::strip::{PhiKind, StripDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Admissibility,
    Gradcheck,
    Korn2,
    Interp,
    #[serde(rename = "korn1_2d")]
    Korn1TwoD,
    Refined,
    Ansatz,
    Harmonic,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Admissibility,
        ExperimentKind::Gradcheck,
        ExperimentKind::Korn2,
        ExperimentKind::Interp,
        ExperimentKind::Korn1TwoD,
        ExperimentKind::Refined,
        ExperimentKind::Ansatz,
        ExperimentKind::Harmonic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Admissibility => "admissibility",
            ExperimentKind::Gradcheck => "gradcheck",
            ExperimentKind::Korn2 => "korn2",
            ExperimentKind::Interp => "interp",
            ExperimentKind::Korn1TwoD => "korn1_2d",
            ExperimentKind::Refined => "refined",
            ExperimentKind::Ansatz => "ansatz",
            ExperimentKind::Harmonic => "harmonic",
        }
    }

    /// Whether the run fits exponents over the h-sweep.
    pub fn fits_exponents(&self) -> bool {
        !matches!(self, ExperimentKind::Admissibility | ExperimentKind::Gradcheck)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = KornError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| KornError::config("experiment", format!("unknown experiment `{s}`")))
    }
}

/// A built-in surface on a rectangular parameter patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: String,
    #[serde(default)]
    pub param: f64,
    pub theta_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl SurfaceSpec {
    pub fn sphere_cap() -> Self {
        SurfaceSpec {
            kind: "sphere_cap".into(),
            param: 1.0,
            theta_max: 1.0,
            z_min: 1.0708,
            z_max: 2.0708,
        }
    }

    pub fn plate() -> Self {
        SurfaceSpec {
            kind: "plate".into(),
            param: 0.0,
            theta_max: 1.0,
            z_min: 0.0,
            z_max: 1.0,
        }
    }

    pub fn catenoid() -> Self {
        SurfaceSpec {
            kind: "catenoid".into(),
            param: 1.0,
            theta_max: 1.0,
            z_min: 0.05,
            z_max: 1.05,
        }
    }

    pub fn cylinder() -> Self {
        SurfaceSpec {
            kind: "cylinder".into(),
            param: 1.0,
            theta_max: 1.0,
            z_min: 0.0,
            z_max: 1.0,
        }
    }

    pub fn surface_kind(&self) -> Option<SurfaceKind> {
        SurfaceKind::from_name(&self.kind, self.param)
    }

    pub fn build(&self) -> Result<SurfacePatch> {
        let kind = self
            .surface_kind()
            .ok_or_else(|| KornError::config("surfaces.kind", format!("unknown surface `{}`", self.kind)))?;
        make_builtin_surface(kind, PatchDomain::rectangle(self.theta_max, self.z_min, self.z_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThicknessSpec {
    Constant,
    Sinusoidal { amplitude: f64 },
}

impl ThicknessSpec {
    pub fn profile(&self, h: f64) -> ThicknessProfile {
        match *self {
            ThicknessSpec::Constant => ThicknessProfile::constant(h),
            ThicknessSpec::Sinusoidal { amplitude } => ThicknessProfile::sinusoidal(h, amplitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    pub b: f64,
    pub phi_kind: PhiKind,
    #[serde(default)]
    pub amplitude: f64,
}

impl StripSpec {
    pub fn domain(&self, h: f64) -> Result<StripDomain> {
        StripDomain::new(self.b, h, self.phi_kind, self.amplitude)
    }
}

/// `h_max, h_max r, ..., h_max r^(count-1)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSweep {
    pub h_max: f64,
    #[serde(default = "HSweep::default_ratio")]
    pub ratio: f64,
    #[serde(default = "HSweep::default_count")]
    pub count: usize,
}

impl HSweep {
    fn default_ratio() -> f64 {
        0.5
    }

    fn default_count() -> usize {
        5
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.h_max * self.ratio.powi(k as i32)).collect()
    }
}

/// Strip grid: `n_xi` nodes across, `n_y = ceil(b / (dy_per_h h)) + 1`
/// along, clamped to `[n_y_min, n_y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGridSpec {
    pub n_xi: usize,
    pub dy_per_h: f64,
    pub n_y_min: usize,
    pub n_y_max: usize,
}

impl StripGridSpec {
    pub fn n_y(&self, b: f64, h: f64) -> usize {
        (((b / (self.dy_per_h * h)).ceil() as usize) + 1).clamp(self.n_y_min, self.n_y_max)
    }
}

/// Accepted ranges; defaults match the acceptance criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bands {
    pub korn2_slope: Band,
    pub korn1_2d_slope: Band,
    pub refined_positive_slope: Band,
    pub refined_negative_slope: Band,
    pub ansatz_ratio_slope: Band,
    /// Largest `max / min` of the interpolation constant over the sweep.
    pub interp_spread: f64,
    /// Largest `max / median` of the harmonic quotients.
    pub harmonic_spread: f64,
    /// Relative slack of the pointwise lemma checks.
    pub lemma_tol: f64,
    pub gradcheck_order: f64,
    /// `|e(u)| / max(1, |grad u|) <= rigid_factor delta^2` for rigid fields.
    pub rigid_factor: f64,
    /// Largest relative change of an ansatz norm under grid doubling.
    pub ansatz_refinement: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Bands {
            korn2_slope: Band::new(-1.3, -0.7),
            korn1_2d_slope: Band::new(-2.4, -1.6),
            refined_positive_slope: Band::at_least(-1.35),
            refined_negative_slope: Band::at_least(-1.75),
            ansatz_ratio_slope: Band::new(-0.15, 0.15),
            interp_spread: 3.0,
            harmonic_spread: 2.0,
            lemma_tol: 1e-3,
            gradcheck_order: 1.8,
            rigid_factor: 10.0,
            ansatz_refinement: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be left out when the experiment is named on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceSpec>,
    #[serde(default = "ExperimentConfig::default_thickness")]
    pub thickness: ThicknessSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip: Option<StripSpec>,
    pub h_sweep: HSweep,
    /// Shell grid; `gradcheck` uses it as the coarse grid and refines it.
    #[serde(default = "ExperimentConfig::default_grid")]
    pub grid: GridDims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip_grid: Option<StripGridSpec>,
    #[serde(default)]
    pub ansatz_grid: AnsatzGridPolicy,
    /// Seeds per h for `harmonic`.
    #[serde(default = "ExperimentConfig::default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Random fields per h in the interpolation audit.
    #[serde(default = "ExperimentConfig::default_audit")]
    pub audit_fields: usize,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub bands: Bands,
    /// Save eigen witnesses as field CSVs.
    #[serde(default)]
    pub save_witnesses: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    fn default_thickness() -> ThicknessSpec {
        ThicknessSpec::Sinusoidal { amplitude: 0.5 }
    }

    fn default_grid() -> GridDims {
        GridDims::new(5, 33, 33)
    }

    fn default_seeds() -> usize {
        50
    }

    fn default_audit() -> usize {
        500
    }

    /// Settings used by the acceptance runs.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: Some(kind),
            surfaces: vec![SurfaceSpec::sphere_cap(), SurfaceSpec::plate()],
            thickness: Self::default_thickness(),
            strip: None,
            h_sweep: HSweep {
                h_max: 1.0 / 16.0,
                ratio: 0.5,
                count: 5,
            },
            grid: Self::default_grid(),
            strip_grid: None,
            ansatz_grid: AnsatzGridPolicy::default(),
            seeds: Self::default_seeds(),
            master_seed: 2024,
            audit_fields: Self::default_audit(),
            eigen: EigenOptions {
                dense_max: 2000,
                ..Default::default()
            },
            search: SearchOptions::default(),
            bands: Bands::default(),
            save_witnesses: false,
            output_dir: None,
        };
        match kind {
            ExperimentKind::Admissibility => {
                c.surfaces = vec![
                    SurfaceSpec::plate(),
                    SurfaceSpec::cylinder(),
                    SurfaceSpec::sphere_cap(),
                    SurfaceSpec::catenoid(),
                ];
                c.h_sweep.count = 1;
                c.grid = GridDims::new(3, 33, 33);
            }
            ExperimentKind::Gradcheck => {
                c.surfaces = vec![SurfaceSpec::cylinder(), SurfaceSpec::sphere_cap()];
                c.h_sweep = HSweep {
                    h_max: 0.05,
                    ratio: 0.5,
                    count: 1,
                };
                c.grid = GridDims::new(9, 33, 33);
            }
            ExperimentKind::Interp => c.grid = GridDims::new(3, 17, 17),
            ExperimentKind::Refined => c.surfaces = vec![SurfaceSpec::sphere_cap(), SurfaceSpec::catenoid()],
            ExperimentKind::Ansatz => c.surfaces = vec![SurfaceSpec::sphere_cap()],
            ExperimentKind::Korn1TwoD => {
                c.surfaces.clear();
                c.strip = Some(StripSpec {
                    b: 1.0,
                    phi_kind: PhiKind::Sinusoidal,
                    amplitude: 0.5,
                });
                c.strip_grid = Some(StripGridSpec {
                    n_xi: 9,
                    dy_per_h: 1.0,
                    n_y_min: 129,
                    n_y_max: 129,
                });
            }
            ExperimentKind::Harmonic => {
                c.surfaces.clear();
                c.strip = Some(StripSpec {
                    b: 4.0,
                    phi_kind: PhiKind::Sinusoidal,
                    amplitude: 0.5,
                });
                c.strip_grid = Some(StripGridSpec {
                    n_xi: 17,
                    dy_per_h: 1.0,
                    n_y_min: 65,
                    n_y_max: 4097,
                });
            }
            ExperimentKind::Korn2 => {}
        }
        c
    }

    /// Parses JSON; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            KornError::config(if path == "." { "<root>".into() } else { path }, e.inner().to_string())
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KornError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment
            .ok_or_else(|| KornError::config("experiment", "no experiment named in the config or on the command line"))
    }

    pub fn h_values(&self) -> Vec<f64> {
        self.h_sweep.values()
    }

    /// Checks everything that can be checked without building geometry.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let hs = &self.h_sweep;
        if hs.count == 0 {
            return Err(KornError::config("h_sweep.count", "h_sweep is empty"));
        }
        if kind.fits_exponents() && hs.count < 3 {
            return Err(KornError::config(
                "h_sweep.count",
                format!("{kind} fits exponents and needs at least 3 h values, got {}", hs.count),
            ));
        }
        if !(hs.h_max > 0.0 && hs.h_max.is_finite()) {
            return Err(KornError::config("h_sweep.h_max", "must be positive"));
        }
        if hs.count > 1 && !(hs.ratio > 0.0 && hs.ratio < 1.0) {
            return Err(KornError::config("h_sweep.ratio", "must lie in (0, 1) for a decreasing sweep"));
        }
        let needs_strip = matches!(kind, ExperimentKind::Korn1TwoD | ExperimentKind::Harmonic);
        if needs_strip {
            let strip = self.strip.ok_or_else(|| KornError::config("strip", format!("{kind} needs a strip block")))?;
            if !(strip.b > 0.0) {
                return Err(KornError::config("strip.b", "must be positive"));
            }
            let sg = self
                .strip_grid
                .ok_or_else(|| KornError::config("strip_grid", format!("{kind} needs a strip_grid block")))?;
            if sg.n_xi < 9 {
                return Err(KornError::config("strip_grid.n_xi", "need at least 9 nodes across"));
            }
            if !(sg.dy_per_h > 0.0) || sg.n_y_min < 3 || sg.n_y_max < sg.n_y_min {
                return Err(KornError::config("strip_grid", "need dy_per_h > 0 and 3 <= n_y_min <= n_y_max"));
            }
        } else {
            if self.surfaces.is_empty() {
                return Err(KornError::config("surfaces", format!("{kind} needs at least one surface")));
            }
            for (i, s) in self.surfaces.iter().enumerate() {
                if s.surface_kind().is_none() {
                    return Err(KornError::config(format!("surfaces[{i}].kind"), format!("unknown surface `{}`", s.kind)));
                }
                if kind == ExperimentKind::Refined
                    && matches!(s.surface_kind(), Some(SurfaceKind::Plate | SurfaceKind::Cylinder(_)))
                {
                    return Err(KornError::config(
                        format!("surfaces[{i}].kind"),
                        format!("{} has zero Gaussian curvature; refined needs K_G of one sign", s.kind),
                    ));
                }
                if !(s.theta_max > 0.0 && s.z_max > s.z_min) {
                    return Err(KornError::config(format!("surfaces[{i}]"), "need theta_max > 0 and z_max > z_min"));
                }
            }
            let GridDims { n_t, n_theta, n_z } = self.grid;
            if n_t < 3 || n_theta < 3 || n_z < 3 {
                return Err(KornError::config("grid", "need at least 3 nodes per direction"));
            }
        }
        if kind == ExperimentKind::Harmonic && self.seeds == 0 {
            return Err(KornError::config("seeds", "need at least one seed"));
        }
        if kind == ExperimentKind::Ansatz && self.ansatz_grid.n_t < 3 {
            return Err(KornError::config("ansatz_grid.n_t", "need at least 3 nodes"));
        }
        if kind == ExperimentKind::Interp && self.search.log10_max - self.search.log10_min < 6.0 {
            return Err(KornError::config("search", "bracket must span at least 6 decades"));
        }
        Ok(())
    }
}
