//! Incremental regressors that emit prediction intervals.
//!
//! Two interval sources are provided: a trio of online quantile regressors
//! (lower, median, upper) trained by pinball-loss subgradient steps, and a
//! squared-loss regressor whose interval is `ŷ ± c·σ̂` with `σ̂` the running
//! residual standard deviation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::dot;

/// Asymmetric absolute loss minimized by the `alpha`-quantile.
pub fn pinball_loss(alpha: f64, y: f64, yhat: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if y >= yhat {
        alpha * (y - yhat)
    } else {
        (1.0 - alpha) * (yhat - y)
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaDomain(alpha))
    }
}

fn check_eta(eta0: f64) -> Result<()> {
    if eta0 > 0.0 && eta0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "eta0",
            format!("must be finite and > 0, got {eta0}"),
        ))
    }
}

fn check_input(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_finite(x: &[f64], y: f64) -> Result<()> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("x"));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("y"));
    }
    Ok(())
}

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    #[default]
    Constant,
    /// `eta0 / sqrt(n_updates + 1)`
    InverseSqrt,
}

impl Decay {
    pub fn step(self, eta0: f64, n_updates: u64) -> f64 {
        match self {
            Decay::Constant => eta0,
            Decay::InverseSqrt => eta0 / ((n_updates + 1) as f64).sqrt(),
        }
    }
}

/// Lower bound, centre and upper bound of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lq: f64,
    pub mid: f64,
    pub uq: f64,
    pub width: f64,
}

impl PredictionInterval {
    /// Builds an interval from three bounds already in ascending order.
    fn ordered(lq: f64, mid: f64, uq: f64) -> Self {
        debug_assert!(lq <= mid && mid <= uq);
        Self {
            lq,
            mid,
            uq,
            width: uq - lq,
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lq <= y && y <= self.uq
    }
}

/// Anything the prequential loop can query and train.
pub trait IntervalModel {
    fn dim(&self) -> usize;

    /// Predicts an interval for `x`. Takes `&mut self` because some models
    /// keep diagnostics about their own predictions.
    fn predict_interval(&mut self, x: &[f64]) -> Result<PredictionInterval>;

    fn update(&mut self, x: &[f64], y: f64) -> Result<()>;

    /// Times the raw bounds came out of order and had to be sorted.
    fn crossing_count(&self) -> u64 {
        0
    }
}

/// Linear model `w·x + b` trained online on the pinball loss for one quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineQuantileRegressor {
    pub alpha: f64,
    pub w: Vec<f64>,
    pub b: f64,
    pub eta0: f64,
    pub decay: Decay,
    pub n_updates: u64,
}

impl OnlineQuantileRegressor {
    /// Zero-initialized regressor for `dim` features.
    pub fn new(alpha: f64, dim: usize, eta0: f64, decay: Decay) -> Result<Self> {
        check_alpha(alpha)?;
        check_eta(eta0)?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        Ok(Self {
            alpha,
            w: vec![0.0; dim],
            b: 0.0,
            eta0,
            decay,
            n_updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_input(self.dim(), x)?;
        Ok(dot(&self.w, x) + self.b)
    }

    /// One subgradient step on the pinball loss. Exact hits use the zero
    /// subgradient. Rejected inputs leave the model untouched.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_input(self.dim(), x)?;
        check_finite(x, y)?;
        let yhat = dot(&self.w, x) + self.b;
        let grad = if y > yhat {
            -self.alpha
        } else if y < yhat {
            1.0 - self.alpha
        } else {
            0.0
        };
        let eta = self.decay.step(self.eta0, self.n_updates);
        if grad != 0.0 {
            for (w, xi) in self.w.iter_mut().zip(x) {
                *w -= eta * grad * xi;
            }
            self.b -= eta * grad;
        }
        self.n_updates += 1;
        Ok(())
    }
}

/// Lower, median and upper quantile regressors trained side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalModelTrio {
    pub lo: OnlineQuantileRegressor,
    pub mid: OnlineQuantileRegressor,
    pub hi: OnlineQuantileRegressor,
    pub crossing_count: u64,
}

impl IntervalModelTrio {
    pub fn new(alpha_lo: f64, alpha_hi: f64, dim: usize, eta0: f64, decay: Decay) -> Result<Self> {
        check_alpha(alpha_lo)?;
        check_alpha(alpha_hi)?;
        if !(alpha_lo < 0.5 && 0.5 < alpha_hi) {
            return Err(Error::invalid(
                "alpha_lo/alpha_hi",
                format!("need alpha_lo < 0.5 < alpha_hi, got {alpha_lo} and {alpha_hi}"),
            ));
        }
        Ok(Self {
            lo: OnlineQuantileRegressor::new(alpha_lo, dim, eta0, decay)?,
            mid: OnlineQuantileRegressor::new(0.5, dim, eta0, decay)?,
            hi: OnlineQuantileRegressor::new(alpha_hi, dim, eta0, decay)?,
            crossing_count: 0,
        })
    }

    /// Raw `(lo, mid, hi)` predictions, before any reordering.
    pub fn raw_predictions(&self, x: &[f64]) -> Result<[f64; 3]> {
        Ok([
            self.lo.predict(x)?,
            self.mid.predict(x)?,
            self.hi.predict(x)?,
        ])
    }

    /// Sorts the three predictions into an interval, counting crossings.
    pub fn predict_interval(&mut self, x: &[f64]) -> Result<PredictionInterval> {
        let raw = self.raw_predictions(x)?;
        let mut sorted = raw;
        sorted.sort_by(f64::total_cmp);
        if sorted != raw {
            self.crossing_count += 1;
        }
        Ok(PredictionInterval::ordered(sorted[0], sorted[1], sorted[2]))
    }

    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_input(self.lo.dim(), x)?;
        check_finite(x, y)?;
        self.lo.update(x, y)?;
        self.mid.update(x, y)?;
        self.hi.update(x, y)
    }
}

impl IntervalModel for IntervalModelTrio {
    fn dim(&self) -> usize {
        self.lo.dim()
    }

    fn predict_interval(&mut self, x: &[f64]) -> Result<PredictionInterval> {
        IntervalModelTrio::predict_interval(self, x)
    }

    fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        IntervalModelTrio::update(self, x, y)
    }

    fn crossing_count(&self) -> u64 {
        self.crossing_count
    }
}

/// Welford running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WelfordState {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl WelfordState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("residual"));
        }
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
        Ok(())
    }

    /// Inverse of [`push`](Self::push) for a value previously pushed.
    pub fn remove(&mut self, value: f64) {
        match self.count {
            0 => {}
            1 => *self = Self::default(),
            n => {
                let new_mean = (self.mean * n as f64 - value) / (n - 1) as f64;
                self.m2 = (self.m2 - (value - self.mean) * (value - new_mean)).max(0.0);
                self.mean = new_mean;
                self.count = n - 1;
            }
        }
    }

    /// True until two values have been seen; the variance is undefined then.
    pub fn is_warming_up(&self) -> bool {
        self.count < 2
    }

    /// Sample variance, or 0 while warming up.
    pub fn variance(&self) -> f64 {
        if self.is_warming_up() {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Squared-loss linear model with a `ŷ ± c·σ̂` interval.
///
/// `σ̂` covers every residual since the start unless `window` is set, in
/// which case only the most recent `window` residuals count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianIntervalModel {
    pub c: f64,
    pub w: Vec<f64>,
    pub b: f64,
    pub eta0: f64,
    pub decay: Decay,
    pub n_updates: u64,
    #[serde(rename = "welford")]
    pub resid_stats: WelfordState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "VecDeque::is_empty")]
    pub recent: VecDeque<f64>,
}

impl GaussianIntervalModel {
    pub fn new(c: f64, dim: usize, eta0: f64, decay: Decay, window: Option<usize>) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(
                "c",
                format!("must be finite and > 0, got {c}"),
            ));
        }
        check_eta(eta0)?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if window == Some(0) || window == Some(1) {
            return Err(Error::invalid("window", "must be >= 2 when set"));
        }
        Ok(Self {
            c,
            w: vec![0.0; dim],
            b: 0.0,
            eta0,
            decay,
            n_updates: 0,
            resid_stats: WelfordState::new(),
            window,
            recent: VecDeque::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_input(self.dim(), x)?;
        Ok(dot(&self.w, x) + self.b)
    }

    pub fn predict_interval(&self, x: &[f64]) -> Result<PredictionInterval> {
        let yhat = self.predict(x)?;
        let half = self.c * self.resid_stats.std_dev();
        Ok(PredictionInterval {
            lq: yhat - half,
            mid: yhat,
            uq: yhat + half,
            width: 2.0 * half,
        })
    }

    /// Squared-loss SGD step; the pre-update residual feeds `σ̂`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_input(self.dim(), x)?;
        check_finite(x, y)?;
        let resid = y - (dot(&self.w, x) + self.b);
        if !resid.is_finite() {
            return Err(Error::NonFinite("residual"));
        }
        let eta = self.decay.step(self.eta0, self.n_updates);
        for (w, xi) in self.w.iter_mut().zip(x) {
            *w += eta * resid * xi;
        }
        self.b += eta * resid;
        self.n_updates += 1;
        self.resid_stats.push(resid)?;
        if let Some(window) = self.window {
            self.recent.push_back(resid);
            if self.recent.len() > window {
                let old = self.recent.pop_front().expect("non-empty");
                self.resid_stats.remove(old);
            }
        }
        Ok(())
    }
}

impl IntervalModel for GaussianIntervalModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict_interval(&mut self, x: &[f64]) -> Result<PredictionInterval> {
        GaussianIntervalModel::predict_interval(self, x)
    }

    fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        GaussianIntervalModel::update(self, x, y)
    }
}
