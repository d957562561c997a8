//! Statistical and brute-force oracle checks across modules.

use driftwidth_core::*;

const Z95: f64 = 1.6448536269514722;

fn concept_a() -> ConceptSpec {
    ConceptSpec::linear(1.0, 2.0, 0.5)
}

fn default_schedule() -> DriftSchedule {
    DriftSchedule::abrupt(concept_a(), ConceptSpec::linear(5.0, -2.0, 0.5), 500, 1000)
}

fn stationary(n: usize, seed: u64) -> Vec<Sample> {
    generate(&DriftSchedule::stationary(concept_a(), n), seed).unwrap()
}

fn two_pass_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

#[test]
fn upper_quantile_regressor_hits_its_level() {
    let stream = stationary(5000, 11);
    let mut model = OnlineQuantileRegressor::new(0.95, 1, 0.05, Decay::Constant).unwrap();
    let mut below = 0;
    for s in &stream {
        let yhat = model.predict(&s.x).unwrap();
        if s.t >= 4000 && s.y < yhat {
            below += 1;
        }
        model.update(&s.x, s.y).unwrap();
    }
    let frac = below as f64 / 1000.0;
    assert!((frac - 0.95).abs() <= 0.03, "fraction below {frac}");
}

#[test]
fn decayed_regressors_converge_to_analytic_quantiles() {
    // Analytic conditional quantile β₀ + β₁x + σ·z_α at probe points.
    let stream = stationary(5000, 0);
    for (alpha, z) in [(0.05, -Z95), (0.5, 0.0), (0.95, Z95)] {
        let mut model = OnlineQuantileRegressor::new(alpha, 1, 0.5, Decay::InverseSqrt).unwrap();
        for s in &stream {
            model.update(&s.x, s.y).unwrap();
        }
        for x in [-1.0, 0.0, 1.0] {
            let truth = 1.0 + 2.0 * x + 0.5 * z;
            let got = model.predict(&[x]).unwrap();
            assert!(
                (got - truth).abs() < 0.1,
                "alpha {alpha}, x={x}: {got} vs {truth}"
            );
        }
    }
}

#[test]
fn trio_orders_at_the_feature_mean() {
    let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
    for s in stationary(5000, 12) {
        trio.update(&s.x, s.y).unwrap();
    }
    let [lo, mid, hi] = trio.raw_predictions(&[0.0]).unwrap();
    assert!(lo < mid && mid < hi, "{lo} {mid} {hi}");
}

#[test]
fn gaussian_interval_covers_95_percent() {
    let stream = stationary(5000, 13);
    let mut model = GaussianIntervalModel::new(1.96, 1, 0.05, Decay::Constant, None).unwrap();
    let log = run_prequential(&stream, &mut model, None).unwrap();
    let cov = coverage(&log, 4000).unwrap();
    assert!((cov - 0.95).abs() <= 0.03, "coverage {cov}");
}

#[test]
fn trio_coverage_on_stationary_stream() {
    let stream = stationary(5000, 14);
    let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
    let log = run_prequential(&stream, &mut trio, None).unwrap();
    let cov = coverage(&log, 500).unwrap();
    assert!((cov - 0.90).abs() <= 0.03, "coverage {cov}");
}

#[test]
fn welford_matches_two_pass_on_ten_thousand_values() {
    let mut rng = RngState::new(99);
    let values: Vec<f64> = (0..10_000)
        .map(|_| 3.0 + 7.0 * rng.next_gaussian())
        .collect();
    let mut w = WelfordState::new();
    for &v in &values {
        w.push(v).unwrap();
    }
    let oracle = two_pass_variance(&values);
    assert!(((w.variance() - oracle) / oracle).abs() < 1e-9);
}

#[test]
fn predictions_never_see_their_own_target() {
    let stream = generate(&default_schedule(), 21).unwrap();
    let base = {
        let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
        run_prequential(&stream, &mut trio, None).unwrap()
    };
    for cut in [0usize, 1, 250, 499, 500, 998] {
        let mut perturbed = stream.clone();
        for s in &mut perturbed[cut..] {
            s.y += 1000.0;
        }
        let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
        let log = run_prequential(&perturbed, &mut trio, None).unwrap();
        for t in 0..=cut {
            let (a, b) = (&base.rows[t], &log.rows[t]);
            assert_eq!((a.lq, a.mid, a.uq), (b.lq, b.mid, b.uq), "cut {cut}, t {t}");
        }
    }
}

#[test]
fn real_drift_raises_error_and_width() {
    let mut both_up = 0;
    for seed in 0..20 {
        let stream = generate(&default_schedule(), seed).unwrap();
        let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
        let log = run_prequential(&stream, &mut trio, None).unwrap();
        let s = summarize(&log, 500, &Windows::default()).unwrap();
        if s.mae_post > s.mae_pre && s.width_post > s.width_pre {
            both_up += 1;
        }
    }
    assert!(both_up >= 19, "{both_up}/20");
}

#[test]
fn page_hinkley_quiet_on_stationary_widths() {
    let mut alarms = 0;
    for seed in 0..20 {
        let stream = stationary(1000, seed);
        let mut trio = IntervalModelTrio::new(0.05, 0.95, 1, 0.05, Decay::Constant).unwrap();
        let mut det = CalibratedPageHinkley::new(50, 50, 0.05, 10.0, 50).unwrap();
        let log = run_prequential(&stream, &mut trio, Some(&mut det)).unwrap();
        alarms += log.event_times().count();
    }
    assert!(alarms <= 1, "{alarms} false alarms");
}

#[test]
fn csv_round_trip_is_exact() {
    let stream = generate(&default_schedule(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.csv");
    save_csv(&stream, &path).unwrap();
    assert_eq!(load_csv(&path).unwrap(), stream);
}
