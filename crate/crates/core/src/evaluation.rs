//! Prequential (test-then-train) runner and the metrics computed from its log.

use std::io::{self, BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::detection::Detector;
use crate::error::{Error, Result};
use crate::models::IntervalModel;
use crate::streams::Sample;

/// One prequential step: the interval issued before `y` was revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: usize,
    pub y: f64,
    pub lq: f64,
    pub mid: f64,
    pub uq: f64,
    pub abs_err: f64,
    pub width: f64,
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunRow>,
    pub config_echo: serde_json::Value,
    pub seed: u64,
    /// Interval crossings the model reported by the end of the run.
    pub crossing_count: u64,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn abs_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.abs_err).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.width).collect()
    }

    pub fn event_times(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().filter(|r| r.event.is_some()).map(|r| r.t)
    }

    /// Writes the `t,y,lq,mid,uq,abs_err,width,event` table.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "t,y,lq,mid,uq,abs_err,width,event")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.t,
                r.y,
                r.lq,
                r.mid,
                r.uq,
                r.abs_err,
                r.width,
                r.event.as_deref().unwrap_or("")
            )?;
        }
        out.flush()
    }
}

/// Runs the stream through `model`, strictly predict → log → detect → train
/// per sample, so no prediction ever depends on its own target.
pub fn run_prequential(
    stream: &[Sample],
    model: &mut dyn IntervalModel,
    mut detector: Option<&mut dyn Detector>,
) -> Result<RunLog> {
    let mut rows = Vec::with_capacity(stream.len());
    for (i, sample) in stream.iter().enumerate() {
        let at = |source: Error| Error::AtStep {
            t: sample.t,
            source: Box::new(source),
        };
        if sample.t != i {
            return Err(at(Error::invalid(
                "stream",
                format!(
                    "timestep {} at position {i} breaks dense ordering",
                    sample.t
                ),
            )));
        }
        let interval = model.predict_interval(&sample.x).map_err(at)?;
        let mut row = RunRow {
            t: sample.t,
            y: sample.y,
            lq: interval.lq,
            mid: interval.mid,
            uq: interval.uq,
            abs_err: (sample.y - interval.mid).abs(),
            width: interval.width,
            event: None,
        };
        if let Some(det) = detector.as_deref_mut() {
            if let Some(ev) = det.observe(sample.t, row.width).map_err(at)? {
                row.event = Some(ev.detector);
            }
        }
        rows.push(row);
        model.update(&sample.x, sample.y).map_err(at)?;
    }
    Ok(RunLog {
        rows,
        config_echo: serde_json::Value::Null,
        seed: 0,
        crossing_count: model.crossing_count(),
    })
}

/// Trailing mean over the last `w` values; the head uses whatever is
/// available, so `out[i]` averages `series[i.saturating_sub(w - 1)..=i]`.
pub fn rolling_mean(series: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::invalid("w", "rolling window must be >= 1"));
    }
    Ok((0..series.len())
        .map(|i| {
            let win = &series[(i + 1).saturating_sub(w)..=i];
            win.iter().sum::<f64>() / win.len() as f64
        })
        .collect())
}

/// Running mean from the start of the series (prequential error curve).
pub fn cumulative_mean(series: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            total += v;
            total / (i + 1) as f64
        })
        .collect()
}

/// Sample Pearson correlation. Constant inputs are an error, never NaN.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two pairs"));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - mean_a, y - mean_b);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series"));
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    if !r.is_finite() {
        return Err(Error::UndefinedCorrelation("non-finite input"));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Fraction of rows with `t >= burn_in` whose target fell inside `[lq, uq]`.
pub fn coverage(log: &RunLog, burn_in: usize) -> Result<f64> {
    if burn_in >= log.len() {
        return Err(Error::invalid(
            "burn_in",
            format!("{burn_in} leaves no rows in a log of {}", log.len()),
        ));
    }
    let scored = &log.rows[burn_in..];
    let hits = scored.iter().filter(|r| r.lq <= r.y && r.y <= r.uq).count();
    Ok(hits as f64 / scored.len() as f64)
}

/// Detection delay relative to `true_drift_t` and the number of false alarms
/// in `[burn_in, true_drift_t)`.
pub fn detection_metrics(
    log: &RunLog,
    true_drift_t: usize,
    burn_in: usize,
) -> Result<(Option<usize>, usize)> {
    if burn_in > true_drift_t {
        return Err(Error::invalid(
            "burn_in",
            format!("{burn_in} exceeds drift time {true_drift_t}"),
        ));
    }
    let false_alarms = log
        .event_times()
        .filter(|&t| t >= burn_in && t < true_drift_t)
        .count();
    let delay = log
        .event_times()
        .find(|&t| t >= true_drift_t)
        .map(|t| t - true_drift_t);
    Ok((delay, false_alarms))
}

/// How the absolute-error series is smoothed before correlating it with width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSmoothing {
    /// Trailing mean over `smooth_w`, the same smoothing as the width.
    #[default]
    Rolling,
    /// Mean absolute error since the start of the stream.
    Prequential,
}

/// Metric windows. All ranges are inclusive `[start, end]` timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windows {
    pub smooth_w: usize,
    pub error_smoothing: ErrorSmoothing,
    pub corr_window: [usize; 2],
    pub pre_window: [usize; 2],
    pub post_window: [usize; 2],
    pub burn_in: usize,
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            smooth_w: 25,
            error_smoothing: ErrorSmoothing::Rolling,
            corr_window: [450, 650],
            pre_window: [400, 480],
            post_window: [520, 600],
            burn_in: 50,
        }
    }
}

impl Windows {
    /// Last timestep any window refers to.
    pub fn max_t(&self) -> usize {
        self.corr_window[1]
            .max(self.pre_window[1])
            .max(self.post_window[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.smooth_w == 0 {
            return Err(Error::invalid("windows.smooth_w", "must be >= 1"));
        }
        for (name, [a, b]) in [
            ("windows.corr_window", self.corr_window),
            ("windows.pre_window", self.pre_window),
            ("windows.post_window", self.post_window),
        ] {
            if a > b {
                return Err(Error::invalid(name, format!("start {a} after end {b}")));
            }
        }
        Ok(())
    }

    fn slice<'a>(&self, name: &str, series: &'a [f64], [a, b]: [usize; 2]) -> Result<&'a [f64]> {
        series.get(a..=b).ok_or_else(|| {
            Error::invalid(
                name.to_owned(),
                format!("[{a}, {b}] lies outside a log of {} rows", series.len()),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pearson_drift_window: f64,
    pub mae_pre: f64,
    pub mae_post: f64,
    pub width_pre: f64,
    pub width_post: f64,
    pub coverage: f64,
    pub detection_delay: Option<usize>,
    pub false_alarms: usize,
    pub crossing_count: u64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Reduces a run to its headline numbers around the drift at `drift_t`.
///
/// The correlation is taken between the smoothed absolute error and the
/// rolling-mean width, restricted to `corr_window`. False alarms are counted
/// from `burn_in` (capped at `drift_t`).
pub fn summarize(log: &RunLog, drift_t: usize, windows: &Windows) -> Result<RunSummary> {
    windows.validate()?;
    let errors = log.abs_errors();
    let widths = log.widths();
    let smooth_err = match windows.error_smoothing {
        ErrorSmoothing::Rolling => rolling_mean(&errors, windows.smooth_w)?,
        ErrorSmoothing::Prequential => cumulative_mean(&errors),
    };
    let smooth_width = rolling_mean(&widths, windows.smooth_w)?;
    let pearson_drift_window = pearson(
        windows.slice("windows.corr_window", &smooth_err, windows.corr_window)?,
        windows.slice("windows.corr_window", &smooth_width, windows.corr_window)?,
    )?;
    let (detection_delay, false_alarms) =
        detection_metrics(log, drift_t, windows.burn_in.min(drift_t))?;
    Ok(RunSummary {
        pearson_drift_window,
        mae_pre: mean(windows.slice("windows.pre_window", &errors, windows.pre_window)?),
        mae_post: mean(windows.slice("windows.post_window", &errors, windows.post_window)?),
        width_pre: mean(windows.slice("windows.pre_window", &widths, windows.pre_window)?),
        width_post: mean(windows.slice("windows.post_window", &widths, windows.post_window)?),
        coverage: coverage(log, windows.burn_in)?,
        detection_delay,
        false_alarms,
        crossing_count: log.crossing_count,
    })
}
