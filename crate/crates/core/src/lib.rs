//! Streaming concept-drift toolkit built on prediction-interval width.
//!
//! * [`streams`]: synthetic drifting regression streams and CSV ingestion.
//! * [`models`]: online quantile-regression trio and Gaussian interval model.
//! * [`detection`]: Page-Hinkley and threshold detectors on the width signal.
//! * [`evaluation`]: prequential runner and run metrics.

pub mod detection;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod rng;
pub mod streams;

pub use detection::{CalibratedPageHinkley, Detector, DriftEvent, PageHinkley, ThresholdDetector};
pub use error::{Error, Result};
pub use evaluation::{
    coverage, cumulative_mean, detection_metrics, pearson, rolling_mean, run_prequential,
    summarize, ErrorSmoothing, RunLog, RunRow, RunSummary, Windows,
};
pub use models::{
    pinball_loss, Decay, GaussianIntervalModel, IntervalModel, IntervalModelTrio,
    OnlineQuantileRegressor, PredictionInterval, WelfordState,
};
pub use rng::RngState;
pub use streams::{
    generate, load_csv, save_csv, write_csv, ConceptSpec, DriftSchedule, Sample, Segment,
    StreamGenerator, Transition,
};
