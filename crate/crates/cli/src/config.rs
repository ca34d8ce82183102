//! Experiment configuration.

use std::path::PathBuf;

use percolab_core::events::DetectorPolicy;
use percolab_core::{EventSpec, ModelSpec, Phase};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Estimate,
    Curve,
    Critical,
    Arm,
    Corr,
    Russo,
    DualityCheck,
    Coverage,
    Truncation,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::Curve => "curve",
            Experiment::Critical => "critical",
            Experiment::Arm => "arm",
            Experiment::Corr => "corr",
            Experiment::Russo => "russo",
            Experiment::DualityCheck => "duality-check",
            Experiment::Coverage => "coverage",
            Experiment::Truncation => "truncation",
        }
    }
}

/// Settings of the Margulis–Russo check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RussoSettings {
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_dp")]
    pub dp: f64,
}

impl Default for RussoSettings {
    fn default() -> Self {
        RussoSettings { m: default_m(), p: default_p(), dp: default_dp() }
    }
}

fn default_m() -> u32 {
    4
}

fn default_p() -> f64 {
    0.5
}

fn default_dp() -> f64 {
    0.05
}

/// One experiment. Which optional fields are required depends on
/// `experiment`; see [`ExperimentConfig::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventSpec>,
    /// Second event of `corr`, outside `B∞(r + s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event2: Option<EventSpec>,
    /// Grid of `λ` (Boolean) or `q` (Voronoi, confetti). Empty means the
    /// model's own value; `critical` and `truncation` read `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    /// Scale grid; the classifier schedule for `critical` and `truncation`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
    pub n: u64,
    pub master_seed: u64,
    /// Worker threads. A hint only: results do not depend on it.
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub policy: DetectorPolicy,
    /// Truncation bias budget per realization.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Classifier band.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_phase")]
    pub phase: Phase,
    /// Aspect ratio of the `curve` rectangles, `cross(κr, r)`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Raster resolutions of `duality-check` as fractions of `r`.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    /// Radius caps of `truncation`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub caps: Vec<f64>,
    /// Gap `s` of `corr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    /// Centre distance cut of `coverage`; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_pad: Option<f64>,
    #[serde(default)]
    pub russo: RussoSettings,
}

fn default_threads() -> usize {
    1
}

fn default_eps() -> f64 {
    1e-3
}

fn default_theta() -> f64 {
    0.01
}

fn default_phase() -> Phase {
    Phase::Occupied
}

fn default_kappa() -> f64 {
    3.0
}

fn default_deltas() -> Vec<f64> {
    vec![1.0 / 256.0, 1.0 / 512.0]
}

fn default_rel_tol() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// The parameter grid, defaulting to the model's own parameter.
    pub fn param_grid(&self) -> Vec<f64> {
        if self.params.is_empty() {
            vec![self.model.param()]
        } else {
            self.params.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(format!("{}: {msg}", self.experiment.name())));
        self.model.validate()?;
        self.policy.validate()?;
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("eps and theta must lie in (0, 1)");
        }
        if let Some(e) = &self.event {
            e.validate()?;
        }
        let boolean = matches!(self.model, ModelSpec::Boolean(_));
        match self.experiment {
            Experiment::Estimate if self.event.is_none() => bad("needs an event"),
            Experiment::Curve | Experiment::Arm if self.radii.is_empty() => bad("needs radii"),
            Experiment::Critical | Experiment::Truncation if self.params.len() != 2 || self.radii.is_empty() => {
                bad("needs params = [lo, hi] and a radii schedule")
            }
            Experiment::Truncation if self.caps.is_empty() || !boolean => bad("needs a Boolean model and caps"),
            Experiment::Corr if self.event.is_none() || self.event2.is_none() || self.radii.len() != 1 || self.separation.is_none() => {
                bad("needs event, event2, radii = [r] and separation")
            }
            Experiment::Russo if self.event.is_none() || !boolean => bad("needs a Boolean model and an event"),
            Experiment::DualityCheck if self.radii.is_empty() || self.deltas.is_empty() || !boolean => {
                bad("needs a Boolean model, radii and deltas")
            }
            Experiment::Coverage if !boolean => bad("needs a Boolean model"),
            _ => Ok(()),
        }
    }
}
