//! Experiment configuration: a single JSON document, every section optional.

use std::path::Path;

use driftwidth_core::{
    CalibratedPageHinkley, ConceptSpec, Decay, Detector, DriftSchedule, GaussianIntervalModel,
    IntervalModel, IntervalModelTrio, PageHinkley, ThresholdDetector, Windows,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schedule")]
    pub schedule: DriftSchedule,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub windows: Windows,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            model: ModelConfig::default(),
            detector: DetectorConfig::default(),
            windows: Windows::default(),
            seeds: default_seeds(),
        }
    }
}

/// Concept A (`y = 1 + 2x`) switching abruptly to concept B (`y = 5 - 2x`)
/// at t = 500 of 1000, noise σ = 0.5, `x ~ N(0, 1)`.
pub fn default_schedule() -> DriftSchedule {
    DriftSchedule::abrupt(
        ConceptSpec::linear(1.0, 2.0, 0.5),
        ConceptSpec::linear(5.0, -2.0, 0.5),
        500,
        1000,
    )
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Trio {
        #[serde(default = "default_alpha_lo")]
        alpha_lo: f64,
        #[serde(default = "default_alpha_hi")]
        alpha_hi: f64,
        #[serde(default = "default_eta0")]
        eta0: f64,
        #[serde(default)]
        decay: Decay,
    },
    Gaussian {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_eta0")]
        eta0: f64,
        #[serde(default)]
        decay: Decay,
        #[serde(default)]
        window: Option<usize>,
    },
}

fn default_alpha_lo() -> f64 {
    0.05
}
fn default_alpha_hi() -> f64 {
    0.95
}
fn default_eta0() -> f64 {
    0.05
}
fn default_c() -> f64 {
    1.96
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Trio {
            alpha_lo: default_alpha_lo(),
            alpha_hi: default_alpha_hi(),
            eta0: default_eta0(),
            decay: Decay::Constant,
        }
    }
}

impl ModelConfig {
    pub fn build(&self, dim: usize) -> driftwidth_core::Result<Box<dyn IntervalModel + Send>> {
        Ok(match *self {
            ModelConfig::Trio {
                alpha_lo,
                alpha_hi,
                eta0,
                decay,
            } => Box::new(IntervalModelTrio::new(
                alpha_lo, alpha_hi, dim, eta0, decay,
            )?),
            ModelConfig::Gaussian {
                c,
                eta0,
                decay,
                window,
            } => Box::new(GaussianIntervalModel::new(c, dim, eta0, decay, window)?),
        })
    }
}

/// Page-Hinkley parameters. With `delta` and `lambda` both set the test is
/// used as given; otherwise they are derived from the widths observed
/// after `burn_in` (see [`CalibratedPageHinkley`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageHinkleyConfig {
    pub burn_in: usize,
    pub warmup: usize,
    pub delta_factor: f64,
    pub lambda_factor: f64,
    pub rearm: usize,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
}

impl Default for PageHinkleyConfig {
    fn default() -> Self {
        Self {
            burn_in: 50,
            warmup: 50,
            delta_factor: 0.05,
            lambda_factor: 10.0,
            rearm: 50,
            delta: None,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    PageHinkley(PageHinkleyConfig),
    Threshold {
        #[serde(default = "default_baseline_window")]
        baseline_window: usize,
        #[serde(default = "default_k")]
        k: f64,
    },
    None,
}

fn default_baseline_window() -> usize {
    100
}
fn default_k() -> f64 {
    4.0
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::PageHinkley(PageHinkleyConfig::default())
    }
}

impl DetectorConfig {
    pub fn build(&self) -> driftwidth_core::Result<Option<Box<dyn Detector + Send>>> {
        Ok(match self {
            DetectorConfig::PageHinkley(ph) => match (ph.delta, ph.lambda) {
                (Some(delta), Some(lambda)) => {
                    Some(Box::new(PageHinkley::new(delta, lambda, ph.burn_in)?))
                }
                (None, None) => Some(Box::new(CalibratedPageHinkley::new(
                    ph.burn_in,
                    ph.warmup,
                    ph.delta_factor,
                    ph.lambda_factor,
                    ph.rearm,
                )?)),
                _ => {
                    return Err(driftwidth_core::Error::Invalid {
                        field: "detector.delta/lambda".into(),
                        reason: "set both or neither".into(),
                    })
                }
            },
            DetectorConfig::Threshold { baseline_window, k } => {
                Some(Box::new(ThresholdDetector::new(*baseline_window, *k)?))
            }
            DetectorConfig::None => None,
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: Self = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every sub-config by building it once.
    pub fn validate(&self) -> Result<(), CliError> {
        let config_err = |e: driftwidth_core::Error| CliError::Config(e.to_string());
        self.schedule.validate().map_err(config_err)?;
        self.model.build(self.schedule.dim()).map_err(config_err)?;
        self.detector.build().map_err(config_err)?;
        self.windows.validate().map_err(config_err)?;
        if self.windows.max_t() >= self.schedule.total_len {
            return Err(CliError::Config(format!(
                "invalid windows: reach t={} but schedule.total_len is {}",
                self.windows.max_t(),
                self.schedule.total_len
            )));
        }
        if self.windows.burn_in >= self.schedule.total_len {
            return Err(CliError::Config(
                "invalid windows.burn_in: not below schedule.total_len".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("invalid seeds: must be non-empty".into()));
        }
        Ok(())
    }

    /// Drift time the metrics are measured against: the first segment
    /// boundary, or the end of the stream when there is none.
    pub fn drift_t(&self) -> usize {
        self.schedule
            .drift_points()
            .next()
            .unwrap_or(self.schedule.total_len)
    }

    /// Canonical JSON form with all defaults filled in.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.canonical_json()).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
