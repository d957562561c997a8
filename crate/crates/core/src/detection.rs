//! Label-free change detectors fed with the prediction-interval width.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::WelfordState;

/// A detector firing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub t: usize,
    pub detector: String,
    /// Test statistic at alarm time.
    pub statistic: f64,
}

/// Writes one JSON object per line.
pub fn write_events_jsonl<W: Write>(events: &[DriftEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub trait Detector {
    fn id(&self) -> &str;

    fn observe(&mut self, t: usize, width: f64) -> Result<Option<DriftEvent>>;
}

fn check_width(width: f64) -> Result<()> {
    if width.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("width"))
    }
}

/// Page-Hinkley test for a persistent increase in the mean.
///
/// `cum` accumulates `width - running_mean - delta`; an alarm fires when it
/// rises more than `lambda` above its running minimum. Alarms reset the
/// statistic and the running mean, and burn-in restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHinkley {
    pub delta: f64,
    pub lambda: f64,
    pub burn_in: usize,
    pub running_mean: f64,
    pub cum: f64,
    pub cum_min: f64,
    pub count: usize,
}

impl PageHinkley {
    pub const ID: &'static str = "page_hinkley";

    pub fn new(delta: f64, lambda: f64, burn_in: usize) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(
                "delta",
                format!("must be finite and >= 0, got {delta}"),
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        Ok(Self {
            delta,
            lambda,
            burn_in,
            running_mean: 0.0,
            cum: 0.0,
            cum_min: 0.0,
            count: 0,
        })
    }

    pub fn statistic(&self) -> f64 {
        self.cum - self.cum_min
    }

    fn reset(&mut self) {
        self.running_mean = 0.0;
        self.cum = 0.0;
        self.cum_min = 0.0;
        self.count = 0;
    }
}

impl Detector for PageHinkley {
    fn id(&self) -> &str {
        Self::ID
    }

    fn observe(&mut self, t: usize, width: f64) -> Result<Option<DriftEvent>> {
        check_width(width)?;
        self.count += 1;
        self.running_mean += (width - self.running_mean) / self.count as f64;
        self.cum += width - self.running_mean - self.delta;
        self.cum_min = self.cum_min.min(self.cum);
        let stat = self.statistic();
        // `count` includes the current observation, so the first
        // `burn_in` observations can never alarm.
        if self.count > self.burn_in && stat > self.lambda {
            self.reset();
            return Ok(Some(DriftEvent {
                t,
                detector: Self::ID.to_owned(),
                statistic: stat,
            }));
        }
        Ok(None)
    }
}

/// Page-Hinkley whose `delta` and `lambda` scale with the signal.
///
/// The first `burn_in` widths are ignored (the model is still far from
/// fitted). The next `warmup` widths estimate the width's mean and standard
/// deviation; then `delta = delta_factor·mean`, `lambda = lambda_factor·std`
/// and a [`PageHinkley`] with `rearm` burn-in takes over.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedPageHinkley {
    burn_in: usize,
    warmup: usize,
    delta_factor: f64,
    lambda_factor: f64,
    rearm: usize,
    seen: usize,
    stats: WelfordState,
    inner: Option<PageHinkley>,
}

impl CalibratedPageHinkley {
    pub fn new(
        burn_in: usize,
        warmup: usize,
        delta_factor: f64,
        lambda_factor: f64,
        rearm: usize,
    ) -> Result<Self> {
        if warmup < 2 {
            return Err(Error::invalid("warmup", "must be >= 2"));
        }
        if !(delta_factor >= 0.0 && delta_factor.is_finite()) {
            return Err(Error::invalid("delta_factor", "must be finite and >= 0"));
        }
        if !(lambda_factor > 0.0 && lambda_factor.is_finite()) {
            return Err(Error::invalid("lambda_factor", "must be finite and > 0"));
        }
        Ok(Self {
            burn_in,
            warmup,
            delta_factor,
            lambda_factor,
            rearm,
            seen: 0,
            stats: WelfordState::new(),
            inner: None,
        })
    }

    /// The calibrated test, once warm-up is over.
    pub fn calibrated(&self) -> Option<&PageHinkley> {
        self.inner.as_ref()
    }
}

impl Detector for CalibratedPageHinkley {
    fn id(&self) -> &str {
        PageHinkley::ID
    }

    fn observe(&mut self, t: usize, width: f64) -> Result<Option<DriftEvent>> {
        check_width(width)?;
        if let Some(ph) = self.inner.as_mut() {
            return ph.observe(t, width);
        }
        self.seen += 1;
        if self.seen <= self.burn_in {
            return Ok(None);
        }
        self.stats.push(width)?;
        if self.stats.count as usize == self.warmup {
            let delta = self.delta_factor * self.stats.mean.abs();
            // A perfectly flat warm-up would give lambda = 0; keep it positive.
            let lambda = (self.lambda_factor * self.stats.std_dev()).max(f64::MIN_POSITIVE);
            self.inner = Some(PageHinkley::new(delta, lambda, self.rearm)?);
        }
        Ok(None)
    }
}

/// Alarms when the width exceeds `mean + k·std` of a frozen baseline window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDetector {
    pub baseline_window: usize,
    pub k: f64,
    pub buffer: Vec<f64>,
    pub frozen_mean: f64,
    pub frozen_std: f64,
    pub armed: bool,
}

impl ThresholdDetector {
    pub const ID: &'static str = "threshold";

    pub fn new(baseline_window: usize, k: f64) -> Result<Self> {
        if baseline_window < 2 {
            return Err(Error::invalid("baseline_window", "must be > 1"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(
                "k",
                format!("must be finite and > 0, got {k}"),
            ));
        }
        Ok(Self {
            baseline_window,
            k,
            buffer: Vec::with_capacity(baseline_window),
            frozen_mean: 0.0,
            frozen_std: 0.0,
            armed: false,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.frozen_mean + self.k * self.frozen_std
    }

    fn freeze(&mut self) {
        let n = self.buffer.len() as f64;
        let mean = self.buffer.iter().sum::<f64>() / n;
        let var = self.buffer.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        self.frozen_mean = mean;
        self.frozen_std = var.sqrt();
        self.armed = true;
    }
}

impl Detector for ThresholdDetector {
    fn id(&self) -> &str {
        Self::ID
    }

    fn observe(&mut self, t: usize, width: f64) -> Result<Option<DriftEvent>> {
        check_width(width)?;
        if !self.armed {
            self.buffer.push(width);
            if self.buffer.len() == self.baseline_window {
                self.freeze();
            }
            return Ok(None);
        }
        if width > self.threshold() {
            let excess = width - self.frozen_mean;
            let statistic = if self.frozen_std > 0.0 {
                excess / self.frozen_std
            } else {
                excess
            };
            self.buffer.clear();
            self.armed = false;
            return Ok(Some(DriftEvent {
                t,
                detector: Self::ID.to_owned(),
                statistic,
            }));
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feed<D: Detector>(det: &mut D, signal: &[f64]) -> Vec<DriftEvent> {
        signal
            .iter()
            .enumerate()
            .filter_map(|(t, &w)| det.observe(t, w).unwrap())
            .collect()
    }

    /// Straight transcription of the recurrence, used as the oracle for the
    /// step-signal examples.
    fn ph_reference(signal: &[f64], delta: f64, lambda: f64, burn_in: usize) -> Vec<usize> {
        let (mut mean, mut cum, mut min, mut n) = (0.0, 0.0, 0.0f64, 0usize);
        let mut alarms = vec![];
        for (t, &x) in signal.iter().enumerate() {
            n += 1;
            mean = mean + (x - mean) / n as f64;
            cum += x - mean - delta;
            min = min.min(cum);
            if n > burn_in && cum - min > lambda {
                alarms.push(t);
                mean = 0.0;
                cum = 0.0;
                min = 0.0;
                n = 0;
            }
        }
        alarms
    }

    #[test]
    fn ph_constant_signal_never_alarms() {
        for delta in [0.0, 0.05, 1.0] {
            let mut ph = PageHinkley::new(delta, 0.5, 10).unwrap();
            assert!(feed(&mut ph, &[3.7; 2000]).is_empty());
            assert!(ph.cum >= ph.cum_min);
        }
    }

    #[test]
    fn ph_step_detected_quickly() {
        let mut signal = vec![1.0; 200];
        signal.extend(vec![10.0; 100]);
        let expected = ph_reference(&signal, 0.05, 5.0, 50);
        assert_eq!(expected, vec![200]);
        let mut ph = PageHinkley::new(0.05, 5.0, 50).unwrap();
        let events = feed(&mut ph, &signal);
        assert_eq!(events.iter().map(|e| e.t).collect::<Vec<_>>(), expected);
        assert!(events[0].t - 200 <= 10);
        assert_eq!(events[0].detector, "page_hinkley");
        assert!(events[0].statistic > 5.0);
    }

    #[test]
    fn ph_resets_and_fires_again() {
        let mut signal = vec![1.0; 200];
        signal.extend(vec![10.0; 200]);
        signal.extend(vec![100.0; 100]);
        let expected = ph_reference(&signal, 0.05, 5.0, 50);
        assert_eq!(expected, vec![200, 400]);
        let mut ph = PageHinkley::new(0.05, 5.0, 50).unwrap();
        let got: Vec<usize> = feed(&mut ph, &signal).iter().map(|e| e.t).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn ph_burn_in_suppresses_early_alarms() {
        let mut signal = vec![0.0; 5];
        signal.extend(vec![50.0; 30]);
        let mut ph = PageHinkley::new(0.0, 1.0, 30).unwrap();
        let events = feed(&mut ph, &signal);
        assert!(events.iter().all(|e| e.t >= 30));
    }

    #[test]
    fn ph_rejects_non_finite_and_bad_params() {
        let mut ph = PageHinkley::new(0.1, 1.0, 0).unwrap();
        assert!(ph.observe(0, f64::NAN).is_err());
        assert_eq!(ph.count, 0);
        assert!(PageHinkley::new(-0.1, 1.0, 0).is_err());
        assert!(PageHinkley::new(0.1, 0.0, 0).is_err());
    }

    #[test]
    fn ph_delay_non_increasing_as_lambda_shrinks() {
        let mut signal: Vec<f64> = (0..300)
            .map(|i| 1.0 + 0.1 * ((i * 7 % 11) as f64 / 11.0))
            .collect();
        signal.extend((0..300).map(|i| 1.6 + 0.1 * ((i * 5 % 13) as f64 / 13.0)));
        let mut last_delay = usize::MAX;
        for lambda in [40.0, 20.0, 10.0, 5.0, 2.0, 1.0, 0.5] {
            let mut ph = PageHinkley::new(0.01, lambda, 50).unwrap();
            let first = feed(&mut ph, &signal).into_iter().find(|e| e.t >= 300);
            let delay = first.map_or(usize::MAX, |e| e.t - 300);
            assert!(
                delay <= last_delay,
                "lambda {lambda}: {delay} > {last_delay}"
            );
            last_delay = delay;
        }
        assert!(last_delay < 10);
    }

    #[test]
    fn calibrated_ph_skips_burn_in_then_calibrates() {
        let mut det = CalibratedPageHinkley::new(2, 4, 0.05, 10.0, 3).unwrap();
        // burn-in values are far off and must not enter the estimate
        for (t, w) in [100.0, -100.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
            assert!(det.observe(t, w).unwrap().is_none());
            assert!(det.calibrated().is_none());
        }
        det.observe(5, 4.0).unwrap();
        let ph = det.calibrated().unwrap();
        assert!((ph.delta - 0.125).abs() < 1e-12);
        let std = (5.0f64 / 3.0).sqrt();
        assert!((ph.lambda - 10.0 * std).abs() < 1e-12);
        assert_eq!(ph.burn_in, 3);
        assert_eq!(ph.count, 0);
    }

    #[test]
    fn calibrated_ph_first_alarm_after_rearm() {
        let mut det = CalibratedPageHinkley::new(50, 50, 0.05, 10.0, 50).unwrap();
        let mut signal: Vec<f64> = (0..300)
            .map(|i| 1.0 + 0.05 * ((i % 7) as f64 - 3.0))
            .collect();
        signal.extend(vec![3.0; 50]);
        let events = feed(&mut det, &signal);
        assert_eq!(events.len(), 1, "{events:?}");
        assert!(events[0].t >= 300 && events[0].t < 310);
        let mut early = CalibratedPageHinkley::new(50, 50, 0.05, 10.0, 50).unwrap();
        let mut jump = vec![1.0; 100];
        jump.extend(vec![50.0; 100]);
        assert!(feed(&mut early, &jump).iter().all(|e| e.t >= 150));
    }

    #[test]
    fn threshold_degenerate_std() {
        let mut det = ThresholdDetector::new(10, 3.0).unwrap();
        assert!(feed(&mut det, &[2.0; 10]).is_empty());
        assert_eq!(det.frozen_std, 0.0);
        assert!(det.observe(10, 2.0).unwrap().is_none());
        let ev = det.observe(11, 2.0 + 1e-9).unwrap().unwrap();
        assert_eq!(ev.t, 11);
        assert!(!det.armed);
    }

    #[test]
    fn threshold_alarms_on_first_step_after_baseline() {
        let mut det = ThresholdDetector::new(100, 4.0).unwrap();
        let mut signal = vec![1.0; 100];
        signal.push(2.0);
        let events = feed(&mut det, &signal);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].t, 100);
        assert_eq!(events[0].detector, "threshold");
    }

    #[test]
    fn threshold_boundary_is_strict() {
        let mut det = ThresholdDetector::new(2, 1.0).unwrap();
        det.observe(0, 1.0).unwrap();
        det.observe(1, 3.0).unwrap();
        assert!(det.armed);
        let at = det.threshold();
        assert!(det.observe(2, at).unwrap().is_none());
        assert!(det.observe(3, f64::INFINITY).is_err());
    }

    #[test]
    fn threshold_rearms_after_alarm() {
        let mut det = ThresholdDetector::new(5, 2.0).unwrap();
        let mut signal = vec![1.0, 1.1, 0.9, 1.0, 1.05];
        signal.push(5.0);
        signal.extend([5.0, 5.1, 4.9, 5.0, 5.05]);
        signal.push(5.0);
        signal.push(20.0);
        let t: Vec<usize> = feed(&mut det, &signal).iter().map(|e| e.t).collect();
        assert_eq!(t, vec![5, 12]);
    }

    #[test]
    fn events_as_json_lines() {
        let events = vec![
            DriftEvent {
                t: 510,
                detector: "page_hinkley".into(),
                statistic: 7.5,
            },
            DriftEvent {
                t: 700,
                detector: "threshold".into(),
                statistic: 4.25,
            },
        ];
        let mut buf = Vec::new();
        write_events_jsonl(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"t\":510,\"detector\":\"page_hinkley\",\"statistic\":7.5}\n\
             {\"t\":700,\"detector\":\"threshold\",\"statistic\":4.25}\n"
        );
    }

    proptest! {
        #[test]
        fn detectors_deterministic_and_respect_burn_in(signal in proptest::collection::vec(0f64..10.0, 0..300)) {
            let mut a = PageHinkley::new(0.1, 3.0, 40).unwrap();
            let mut b = a.clone();
            let ea = feed(&mut a, &signal);
            prop_assert_eq!(&ea, &feed(&mut b, &signal));
            prop_assert!(ea.iter().all(|e| e.t >= 40));
            prop_assert!(a.cum >= a.cum_min);

            let mut th = ThresholdDetector::new(30, 2.0).unwrap();
            prop_assert!(feed(&mut th, &signal).iter().all(|e| e.t >= 30));
        }
    }
}
