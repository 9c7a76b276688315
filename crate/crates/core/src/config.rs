//! Run configuration files.
//!
//! ```toml
//! preset = "lbracket"          # lbracket | beam
//! mode = "al"                  # al | ks | unconstrained
//! output = "out/lbracket_al"
//! filter_radius = 0.05         # optional, preset default
//! seed = 7                     # optional; perturbs the initial field
//!
//! [bounds]                     # or [process], not both
//! kappa_max = 2.5
//! psi_max = 0.25
//!
//! [optimizer]                  # optional overrides of the schedule
//! max_iter = 1000
//! ```
//!
//! `[process]` takes `gap`, `overlap`, `cut_length`, `add_length` and
//! `min_turning_radius`. `[problem]` may override `nx`, `ny`, `load`,
//! `theta0_deg`, `initial_magnitude` and `thickness`; `[material]` replaces
//! the preset's `e1`, `e2`, `g12`, `nu12`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manufacturing::{bounds_from_process, representability_check, Bounds, ProcessParams};
use crate::material::OrthotropicLaw;
use crate::mesh::ProblemPreset;
use crate::optimizer::{Mode, OptimizerConfig, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Lbracket,
    Beam,
}

impl PresetName {
    pub fn preset(self) -> ProblemPreset {
        match self {
            PresetName::Lbracket => ProblemPreset::lbracket(),
            PresetName::Beam => ProblemPreset::beam(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectBounds {
    pub kappa_max: f64,
    pub psi_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessBounds {
    pub gap: f64,
    pub overlap: f64,
    pub cut_length: f64,
    pub add_length: f64,
    /// Sets `κ̄ = 1/R_min`.
    pub min_turning_radius: f64,
}

/// Resolved problem parameters; every value is filled in after loading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSettings {
    pub nx: usize,
    pub ny: usize,
    pub load: f64,
    pub theta0_deg: f64,
    pub initial_magnitude: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: PresetName,
    pub mode: Mode,
    pub output: PathBuf,
    pub filter_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Amplitude of the seeded uniform perturbation of `(s, t)`.
    pub perturbation: f64,
    /// Streamline spacing in the rendered panels (m).
    pub streamline_separation: f64,
    pub problem: ProblemSettings,
    pub material: OrthotropicLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<DirectBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessBounds>,
    pub optimizer: OptimizerConfig,
}

/// Shape of the file as written by hand: everything optional so that
/// missing keys can be reported with their path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<PresetName>,
    mode: Option<Mode>,
    output: Option<PathBuf>,
    filter_radius: Option<f64>,
    seed: Option<u64>,
    perturbation: Option<f64>,
    streamline_separation: Option<f64>,
    problem: Option<RawProblem>,
    material: Option<OrthotropicLaw>,
    bounds: Option<RawBounds>,
    process: Option<RawProcess>,
    optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    nx: Option<usize>,
    ny: Option<usize>,
    load: Option<f64>,
    theta0_deg: Option<f64>,
    initial_magnitude: Option<f64>,
    thickness: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    kappa_max: Option<f64>,
    psi_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    gap: Option<f64>,
    overlap: Option<f64>,
    cut_length: Option<f64>,
    add_length: Option<f64>,
    min_turning_radius: Option<f64>,
}

fn need<T>(v: Option<T>, path: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(path.into()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let preset = need(raw.preset, "preset")?;
        let mode = need(raw.mode, "mode")?;
        let defaults = preset.preset();
        let p = raw.problem.unwrap_or_default();
        let problem = ProblemSettings {
            nx: p.nx.unwrap_or(defaults.nx),
            ny: p.ny.unwrap_or(defaults.ny),
            load: p.load.unwrap_or(defaults.load_magnitude),
            theta0_deg: p.theta0_deg.unwrap_or(defaults.theta0_deg),
            initial_magnitude: p.initial_magnitude.unwrap_or(defaults.initial_magnitude),
            thickness: p.thickness.unwrap_or(defaults.thickness),
        };
        let bounds = match raw.bounds {
            Some(b) => Some(DirectBounds {
                kappa_max: need(b.kappa_max, "bounds.kappa_max")?,
                psi_max: need(b.psi_max, "bounds.psi_max")?,
            }),
            None => None,
        };
        let process = match raw.process {
            Some(p) => Some(ProcessBounds {
                gap: need(p.gap, "process.gap")?,
                overlap: need(p.overlap, "process.overlap")?,
                cut_length: need(p.cut_length, "process.cut_length")?,
                add_length: need(p.add_length, "process.add_length")?,
                min_turning_radius: need(p.min_turning_radius, "process.min_turning_radius")?,
            }),
            None => None,
        };
        let cfg = RunConfig {
            preset,
            mode,
            output: raw.output.unwrap_or_else(|| PathBuf::from(format!("out/{}_{}", defaults.name, mode))),
            filter_radius: raw.filter_radius.unwrap_or(defaults.filter_radius),
            seed: raw.seed,
            perturbation: raw.perturbation.unwrap_or(0.05),
            streamline_separation: raw.streamline_separation.unwrap_or({
                let (w, h) = defaults.extent();
                0.04 * w.max(h)
            }),
            problem,
            material: raw.material.unwrap_or(defaults.material),
            bounds,
            process,
            optimizer: raw.optimizer.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.bounds, self.process) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("[bounds] and [process] are mutually exclusive".into()));
            }
            (None, None) if self.mode != Mode::Unconstrained => {
                return Err(Error::MissingKey("bounds".into()));
            }
            _ => {}
        }
        let positive = [
            ("filter_radius", self.filter_radius),
            ("streamline_separation", self.streamline_separation),
            ("problem.load", self.problem.load),
            ("problem.initial_magnitude", self.problem.initial_magnitude),
            ("problem.thickness", self.problem.thickness),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
            }
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(Error::Config(format!("`perturbation` must be non-negative, got {}", self.perturbation)));
        }
        self.material.validate()?;
        self.optimizer.validate()?;
        self.bounds()?;
        Ok(())
    }

    /// Curl and divergence bounds; infinite for an unconstrained run without bounds.
    pub fn bounds(&self) -> Result<Bounds> {
        if let Some(b) = self.bounds {
            return Bounds::new(b.kappa_max, b.psi_max);
        }
        if let Some(p) = self.process {
            let limits = bounds_from_process(&ProcessParams {
                gap: p.gap,
                overlap: p.overlap,
                cut_length: p.cut_length,
                add_length: p.add_length,
            })?;
            if !(p.min_turning_radius > 0.0) {
                return Err(Error::Config(format!(
                    "`process.min_turning_radius` must be positive, got {}",
                    p.min_turning_radius
                )));
            }
            return Bounds::new(1.0 / p.min_turning_radius, limits.psi_bar);
        }
        Bounds::new(f64::INFINITY, f64::INFINITY)
    }

    pub fn problem_preset(&self) -> ProblemPreset {
        let mut preset = self.preset.preset().with_resolution(self.problem.nx, self.problem.ny);
        preset.load_magnitude = self.problem.load;
        preset.theta0_deg = self.problem.theta0_deg;
        preset.initial_magnitude = self.problem.initial_magnitude;
        preset.thickness = self.problem.thickness;
        preset.material = self.material;
        preset
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let problem = Problem::from_preset(&self.problem_preset(), self.filter_radius)?;
        let bounds = self.bounds()?;
        let rep = representability_check(&problem.grid, &bounds);
        if !rep.passes {
            log::warn!(
                "bounds exceed the mesh resolution limit {:.3} 1/m (ratio {:.3}); constraints cannot bind",
                rep.limit,
                rep.ratio
            );
        }
        Ok(problem)
    }

    /// Uniform start, perturbed when a seed is given.
    pub fn initial_design(&self, problem: &Problem) -> Vec<f64> {
        let mut x = problem.uniform_start(self.problem.theta0_deg, self.problem.initial_magnitude);
        if let Some(seed) = self.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in &mut x {
                *v = (*v + rng.gen_range(-self.perturbation..=self.perturbation)).clamp(-1.0, 1.0);
            }
        }
        x
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
