//! Experiment configuration and built-in presets.
//!
//! Configs are TOML. Every key may be written either dotted at the top
//! level (`grid.n_r = 33`) or inside a `[grid]` table; unknown keys are
//! rejected. [`ExperimentConfig::to_toml_string`] emits the canonical form.

use serde::{Deserialize, Serialize};

use crate::bayes::{PriorSpec, ProposalConfig};
use crate::geometry::{rasterize, SourceKind, SourceModel};
use crate::heat::PolarGrid;
use crate::sensors::{AngleMean, SensorPair, StrategyKind};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFamily {
    Circle,
    Star,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceFamily,
    /// Number of Fourier harmonics `M` (star only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    /// Unconstrained parameters of the true source.
    pub truth: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Source strength.
    pub b: f64,
    /// Backward-Euler steps per observation window (`dt = window / steps`).
    #[serde(default = "default_steps")]
    pub steps_per_window: usize,
}

fn default_steps() -> usize {
    50
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub beta: f64,
    #[serde(default = "yes")]
    pub auto_tune: bool,
    #[serde(default = "default_band")]
    pub target_accept: [f64; 2],
    pub n_warm: usize,
    pub n_total: usize,
    pub k0: usize,
    #[serde(default = "default_thin")]
    pub field_thin: usize,
    #[serde(default = "default_fraction")]
    pub burn_in: f64,
    #[serde(default = "default_fraction")]
    pub tune_fraction: f64,
    #[serde(default = "default_jitter")]
    pub jitter_scale: f64,
}

fn yes() -> bool {
    true
}
fn default_band() -> [f64; 2] {
    [0.30, 0.40]
}
fn default_thin() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.2
}
fn default_jitter() -> f64 {
    1e-8
}

impl SamplerSection {
    pub fn proposal(&self) -> ProposalConfig {
        ProposalConfig {
            beta: self.beta,
            n_warm: self.n_warm,
            n_total: self.n_total,
            k0: self.k0,
            target_accept: (self.target_accept[0], self.target_accept[1]),
            auto_tune: self.auto_tune,
            tune_fraction: self.tune_fraction,
            jitter_scale: self.jitter_scale,
            field_thin: self.field_thin,
        }
    }
}

/// Which observations enter each round's likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodMode {
    /// Only the current round's two data; earlier rounds enter through the restart field.
    #[default]
    PerRound,
    /// Every observation so far, predicted by a solve from `t = 0`.
    Cumulative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub times: Vec<f64>,
    pub initial_sensors: [usize; 2],
    pub strategy: StrategyKind,
    #[serde(default)]
    pub angle_mean: AngleMean,
    #[serde(default)]
    pub likelihood: LikelihoodMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub source: SourceSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub noise: NoiseSection,
    pub sampler: SamplerSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn key_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn source_kind(&self) -> Result<SourceKind> {
        match (self.source.kind, self.source.harmonics) {
            (SourceFamily::Circle, None) => Ok(SourceKind::Circle),
            (SourceFamily::Circle, Some(_)) => {
                Err(key_err("source.harmonics", "only meaningful for star sources"))
            }
            (SourceFamily::Star, Some(m)) if m >= 1 => Ok(SourceKind::Star { harmonics: m }),
            (SourceFamily::Star, _) => Err(key_err("source.harmonics", "star sources need M >= 1")),
        }
    }

    pub fn polar_grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.grid.n_r, self.grid.n_theta).map_err(|e| key_err("grid", e))
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        Ok(PriorSpec::for_source(self.source_kind()?))
    }

    pub fn initial_pair(&self) -> Result<SensorPair> {
        let [a, b] = self.schedule.initial_sensors;
        SensorPair::new(a, b, self.grid.n_theta).map_err(|e| key_err("schedule.initial_sensors", e))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.polar_grid()?;
        let kind = self.source_kind()?;
        if self.source.truth.len() != kind.dim() {
            return Err(key_err(
                "source.truth",
                format!("expected {} values, got {}", kind.dim(), self.source.truth.len()),
            ));
        }
        let truth =
            SourceModel::from_params(kind, &self.source.truth).map_err(|e| key_err("source.truth", e))?;
        rasterize(&truth, &grid).map_err(|e| key_err("source.truth", e))?;
        if !self.solver.b.is_finite() {
            return Err(key_err("solver.b", "must be finite"));
        }
        if self.solver.steps_per_window == 0 {
            return Err(key_err("solver.steps_per_window", "must be at least 1"));
        }
        if !(self.noise.sigma > 0.0 && self.noise.sigma.is_finite()) {
            return Err(key_err("noise.sigma", "must be positive"));
        }
        self.sampler
            .proposal()
            .validate()
            .map_err(|e| key_err("sampler", e))?;
        if !(0.0..1.0).contains(&self.sampler.burn_in) {
            return Err(key_err("sampler.burn_in", "must lie in [0, 1)"));
        }
        let kept = self.sampler.n_total - self.sampler.burn_in_count();
        if kept < self.sampler.field_thin.max(2) {
            return Err(key_err(
                "sampler.field_thin",
                "no end-of-window field would survive burn-in",
            ));
        }
        let t = &self.schedule.times;
        if t.is_empty() {
            return Err(key_err("schedule.times", "need at least one observation time"));
        }
        if !(t[0] > 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|v| !v.is_finite()) {
            return Err(key_err(
                "schedule.times",
                "must be finite, positive and strictly increasing",
            ));
        }
        self.initial_pair()?;
        if self.schedule.strategy == StrategyKind::PosteriorAngle && kind != SourceKind::Circle {
            return Err(key_err(
                "schedule.strategy",
                "posterior-angle needs a circle source",
            ));
        }
        Ok(())
    }
}

impl SamplerSection {
    pub fn burn_in_count(&self) -> usize {
        (self.burn_in * self.n_total as f64).floor() as usize
    }
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

fn circle(name: &str, n_total: usize, strategy: StrategyKind) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        source: SourceSection {
            kind: SourceFamily::Circle,
            harmonics: None,
            truth: vec![0.0, -1.0],
        },
        grid: GridSection { n_r: 33, n_theta: 36 },
        solver: SolverSection {
            b: 50.0,
            steps_per_window: 50,
        },
        noise: NoiseSection { sigma: 0.05 },
        sampler: SamplerSection {
            beta: 0.5,
            auto_tune: true,
            target_accept: default_band(),
            n_warm: 0,
            n_total,
            k0: 2_500,
            field_thin: 10,
            burn_in: 0.2,
            tune_fraction: 0.2,
            jitter_scale: 1e-8,
        },
        schedule: ScheduleSection {
            times: vec![0.5, 1.0, 1.5],
            initial_sensors: [22, 30],
            strategy,
            angle_mean: AngleMean::Arithmetic,
            likelihood: LikelihoodMode::PerRound,
        },
        output: OutputSection::default(),
    }
}

fn peanut(
    name: &str,
    n_warm: usize,
    n_total: usize,
    rounds: usize,
    strategy: StrategyKind,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        source: SourceSection {
            kind: SourceFamily::Star,
            harmonics: Some(2),
            truth: vec![1.0, 0.0, 0.0, 0.0, 0.3],
        },
        grid: GridSection { n_r: 33, n_theta: 36 },
        solver: SolverSection {
            b: 10.0,
            steps_per_window: 50,
        },
        noise: NoiseSection { sigma: 0.01 },
        sampler: SamplerSection {
            beta: 0.5,
            auto_tune: true,
            target_accept: default_band(),
            n_warm,
            n_total,
            k0: 2_500,
            field_thin: 10,
            burn_in: 0.2,
            tune_fraction: 0.2,
            jitter_scale: 1e-8,
        },
        schedule: ScheduleSection {
            times: (1..=rounds).map(|i| 0.5 * i as f64).collect(),
            initial_sensors: [11, 5],
            strategy,
            angle_mean: AngleMean::Arithmetic,
            likelihood: LikelihoodMode::PerRound,
        },
        output: OutputSection::default(),
    }
}

/// Built-in experiment presets. `*-paper` use the full-length reference
/// iteration counts, `*-desk` the reduced runs used by the acceptance suite.
pub fn presets() -> Vec<Preset> {
    use StrategyKind::*;
    vec![
        Preset {
            name: "circle-paper",
            description: "circle source, posterior-angle migration, N = 10^4 per round",
            config: circle("circle-paper", 10_000, PosteriorAngle),
        },
        Preset {
            name: "circle-paper-fixed",
            description: "circle source, sensors fixed at (22, 30), N = 10^4 per round",
            config: circle("circle-paper-fixed", 10_000, Fixed),
        },
        Preset {
            name: "circle-paper-random",
            description: "circle source, random relocation each round, N = 10^4 per round",
            config: circle("circle-paper-random", 10_000, RandomEachRound),
        },
        Preset {
            name: "circle-desk",
            description: "circle source, posterior-angle migration, N = 2000 per round",
            config: circle("circle-desk", 2_000, PosteriorAngle),
        },
        Preset {
            name: "circle-desk-fixed",
            description: "circle source, fixed sensors, N = 2000 per round",
            config: circle("circle-desk-fixed", 2_000, Fixed),
        },
        Preset {
            name: "peanut-paper",
            description:
                "star source (M = 2), max-flux-variance migration, N1 = 10^3, N = 1.5 x 10^4, T = 0.5..2.5",
            config: peanut("peanut-paper", 1_000, 15_000, 5, MaxFluxVariance),
        },
        Preset {
            name: "peanut-paper-fixed",
            description: "star source (M = 2), sensors fixed at (11, 5), N = 1.5 x 10^4",
            config: peanut("peanut-paper-fixed", 1_000, 15_000, 5, Fixed),
        },
        Preset {
            name: "peanut-paper-random",
            description: "star source (M = 2), random relocation each round, N = 1.5 x 10^4",
            config: peanut("peanut-paper-random", 1_000, 15_000, 5, RandomEachRound),
        },
        Preset {
            name: "peanut-desk",
            description: "star source (M = 2), max-flux-variance migration, N = 3000, up to 6 rounds",
            config: peanut("peanut-desk", 1_000, 3_000, 6, MaxFluxVariance),
        },
    ]
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.config)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
}
