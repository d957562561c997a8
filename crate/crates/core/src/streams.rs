//! Synthetic drifting regression streams and CSV stream ingestion.
//!
//! A [`DriftSchedule`] is a list of concept segments. Changing only
//! `x_mean`/`x_sigma` between segments moves `P(X)` (feature drift);
//! changing `beta0`, `betas` or `noise_sigma` moves `P(y|X)` (real drift).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Parameters of one concept: `x[i] ~ N(x_mean[i], x_sigma[i])`,
/// `y = beta0 + betas·x + N(0, noise_sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub beta0: f64,
    pub betas: Vec<f64>,
    pub noise_sigma: f64,
    pub x_mean: Vec<f64>,
    pub x_sigma: Vec<f64>,
}

impl ConceptSpec {
    /// One-feature concept with standard-normal inputs.
    pub fn linear(beta0: f64, beta1: f64, noise_sigma: f64) -> Self {
        Self {
            beta0,
            betas: vec![beta1],
            noise_sigma,
            x_mean: vec![0.0],
            x_sigma: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.betas.len()
    }

    /// Noise-free regression value `beta0 + betas·x`.
    pub fn mean_response(&self, x: &[f64]) -> f64 {
        self.beta0 + dot(&self.betas, x)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.betas.len();
        if d == 0 {
            return Err(Error::invalid("betas", "must have length d >= 1"));
        }
        if self.x_mean.len() != d {
            return Err(Error::invalid(
                "x_mean",
                format!("length {} differs from betas length {d}", self.x_mean.len()),
            ));
        }
        if self.x_sigma.len() != d {
            return Err(Error::invalid(
                "x_sigma",
                format!(
                    "length {} differs from betas length {d}",
                    self.x_sigma.len()
                ),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(
                "noise_sigma",
                format!("must be finite and >= 0, got {}", self.noise_sigma),
            ));
        }
        if let Some(s) = self.x_sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid(
                "x_sigma",
                format!("entries must be finite and >= 0, got {s}"),
            ));
        }
        let all_finite = self.beta0.is_finite()
            && self.betas.iter().all(|v| v.is_finite())
            && self.x_mean.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("beta0/betas/x_mean", "must be finite"));
        }
        Ok(())
    }

    fn lerp(&self, to: &ConceptSpec, frac: f64) -> ConceptSpec {
        let mix = |a: f64, b: f64| a + (b - a) * frac;
        let mix_vec = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&a, &b)| mix(a, b)).collect();
        ConceptSpec {
            beta0: mix(self.beta0, to.beta0),
            betas: mix_vec(&self.betas, &to.betas),
            noise_sigma: mix(self.noise_sigma, to.noise_sigma),
            x_mean: mix_vec(&self.x_mean, &to.x_mean),
            x_sigma: mix_vec(&self.x_sigma, &to.x_sigma),
        }
    }
}

/// How the stream moves from one segment's concept to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    #[default]
    Abrupt,
    /// Parameters are interpolated linearly over `width` steps starting at
    /// the boundary; the step `start_t + width - 1` is fully in the new concept.
    LinearBlend { width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_t: usize,
    pub concept: ConceptSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub transition: Transition,
    pub total_len: usize,
}

impl DriftSchedule {
    /// A single concept for the whole stream.
    pub fn stationary(concept: ConceptSpec, total_len: usize) -> Self {
        Self {
            segments: vec![Segment {
                start_t: 0,
                concept,
            }],
            transition: Transition::Abrupt,
            total_len,
        }
    }

    /// Two concepts with an abrupt switch at `drift_t`.
    pub fn abrupt(
        before: ConceptSpec,
        after: ConceptSpec,
        drift_t: usize,
        total_len: usize,
    ) -> Self {
        Self {
            segments: vec![
                Segment {
                    start_t: 0,
                    concept: before,
                },
                Segment {
                    start_t: drift_t,
                    concept: after,
                },
            ],
            transition: Transition::Abrupt,
            total_len,
        }
    }

    pub fn dim(&self) -> usize {
        self.segments.first().map_or(0, |s| s.concept.dim())
    }

    /// Start times of every segment after the first.
    pub fn drift_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().skip(1).map(|s| s.start_t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_len == 0 {
            return Err(Error::invalid("total_len", "must be > 0"));
        }
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::invalid("segments", "must be non-empty"))?;
        if first.start_t != 0 {
            return Err(Error::invalid(
                "segments",
                format!("first start_t must be 0, got {}", first.start_t),
            ));
        }
        let d = first.concept.dim();
        for (k, seg) in self.segments.iter().enumerate() {
            seg.concept.validate()?;
            if seg.concept.dim() != d {
                return Err(Error::invalid(
                    "segments",
                    format!(
                        "segment {k} has dimension {}, expected {d}",
                        seg.concept.dim()
                    ),
                ));
            }
            if seg.start_t >= self.total_len {
                return Err(Error::invalid(
                    "segments",
                    format!(
                        "segment {k} start_t {} is not below total_len {}",
                        seg.start_t, self.total_len
                    ),
                ));
            }
        }
        if let Some(w) = self
            .segments
            .windows(2)
            .find(|w| w[1].start_t <= w[0].start_t)
        {
            return Err(Error::invalid(
                "segments",
                format!(
                    "start_t must be strictly increasing ({} then {})",
                    w[0].start_t, w[1].start_t
                ),
            ));
        }
        if let Transition::LinearBlend { width: 0 } = self.transition {
            return Err(Error::invalid("transition", "blend width must be > 0"));
        }
        Ok(())
    }

    /// Concept in force at `t`, interpolated when inside a blend.
    pub fn concept_at(&self, t: usize) -> ConceptSpec {
        let k = self
            .segments
            .partition_point(|s| s.start_t <= t)
            .saturating_sub(1);
        let seg = &self.segments[k];
        match self.transition {
            Transition::LinearBlend { width } if k > 0 && t - seg.start_t + 1 < width => {
                let frac = (t - seg.start_t + 1) as f64 / width as f64;
                self.segments[k - 1].concept.lerp(&seg.concept, frac)
            }
            _ => seg.concept.clone(),
        }
    }
}

/// One timestep of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Incremental generator. Yields exactly the samples [`generate`] returns.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    schedule: DriftSchedule,
    rng: RngState,
    t: usize,
}

impl StreamGenerator {
    pub fn new(schedule: DriftSchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            schedule,
            rng: RngState::new(seed),
            t: 0,
        })
    }

    pub fn schedule(&self) -> &DriftSchedule {
        &self.schedule
    }
}

impl Iterator for StreamGenerator {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.t >= self.schedule.total_len {
            return None;
        }
        let concept = self.schedule.concept_at(self.t);
        // Draw order per step: x[0..d], then the noise term.
        let x: Vec<f64> = concept
            .x_mean
            .iter()
            .zip(&concept.x_sigma)
            .map(|(m, s)| m + s * self.rng.next_gaussian())
            .collect();
        let eps = concept.noise_sigma * self.rng.next_gaussian();
        let sample = Sample {
            t: self.t,
            y: concept.mean_response(&x) + eps,
            x,
        };
        self.t += 1;
        Some(sample)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.schedule.total_len - self.t;
        (left, Some(left))
    }
}

/// Materialize the whole stream for `schedule`.
pub fn generate(schedule: &DriftSchedule, seed: u64) -> Result<Vec<Sample>> {
    Ok(StreamGenerator::new(schedule.clone(), seed)?.collect())
}

/// Write samples as `t,x0,...,x{d-1},y`. Reals use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(samples: &[Sample], out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    let d = samples.first().map_or(1, |s| s.x.len());
    write!(out, "t")?;
    for i in 0..d {
        write!(out, ",x{i}")?;
    }
    writeln!(out, ",y")?;
    for s in samples {
        write!(out, "{}", s.t)?;
        for v in &s.x {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", s.y)?;
    }
    out.flush()
}

pub fn save_csv(samples: &[Sample], path: &Path) -> io::Result<()> {
    write_csv(samples, File::create(path)?)
}

/// Load a stream written in the `t,x0,...,x{d-1},y` format.
pub fn load_csv(path: &Path) -> Result<Vec<Sample>> {
    let file = File::open(path).map_err(|e| Error::Csv {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();

    let header = match records.next() {
        None => {
            return Err(Error::Csv {
                path: path.to_owned(),
                reason: "no header".into(),
            })
        }
        Some(rec) => rec.map_err(|e| Error::Csv {
            path: path.to_owned(),
            reason: e.to_string(),
        })?,
    };
    let d = parse_header(&header).map_err(|reason| Error::CsvRow {
        path: path.to_owned(),
        line: 1,
        reason,
    })?;

    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |reason: String| Error::CsvRow {
            path: path.to_owned(),
            line,
            reason,
        };
        if rec.len() != d + 2 {
            return Err(row_err(format!(
                "expected {} fields, found {}",
                d + 2,
                rec.len()
            )));
        }
        let t: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad timestep {:?}", &rec[0])))?;
        if t != samples.len() {
            return Err(row_err(format!(
                "timestep {t} breaks dense ordering (expected {})",
                samples.len()
            )));
        }
        let mut values = Vec::with_capacity(d + 1);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| row_err(format!("bad number {field:?}")))?;
            values.push(v);
        }
        let y = values.pop().expect("d + 1 values");
        samples.push(Sample { t, x: values, y });
    }
    Ok(samples)
}

fn parse_header(header: &csv::StringRecord) -> std::result::Result<usize, String> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "y" {
        return Err(format!(
            "header must be t,x0,...,y; got {:?}",
            cols.join(",")
        ));
    }
    let d = cols.len() - 2;
    for (i, c) in cols[1..=d].iter().enumerate() {
        if *c != format!("x{i}") {
            return Err(format!("expected column x{i}, found {c:?}"));
        }
    }
    Ok(d)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}
