//! Demand series: a seeded synthetic generator and a CSV loader/writer.
//!
//! CSV layout is a `timestamp,demand_mwh` header followed by one row per
//! step with ISO-8601 timestamps.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeDelta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 2] = ["timestamp", "demand_mwh"];
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: step of {actual}s differs from the first step of {expected}s")]
    NonUniformStep { line: u64, expected: i64, actual: i64 },
    #[error("invalid demand series: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemandSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub demand: Vec<f64>,
    pub steps_per_day: usize,
}

impl DemandSeries {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn days(&self) -> f64 {
        self.len() as f64 / self.steps_per_day as f64
    }

    pub fn time_of_day(&self, step: usize) -> usize {
        step % self.steps_per_day
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.is_empty() {
            return Err(DataError::Invalid("series is empty".into()));
        }
        if self.steps_per_day == 0 {
            return Err(DataError::Invalid("steps_per_day must be positive".into()));
        }
        if self.timestamps.len() != self.demand.len() {
            return Err(DataError::Invalid("timestamp and demand lengths differ".into()));
        }
        if let Some(i) = self.demand.iter().position(|d| !d.is_finite() || *d < 0.0) {
            return Err(DataError::Invalid(format!("demand at step {i} is negative or not finite")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let map = |e: csv::Error| DataError::Io(io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(map)?;
        for (ts, d) in self.timestamps.iter().zip(&self.demand) {
            w.write_record([ts.format(TIMESTAMP_FORMAT).to_string(), d.to_string()])
                .map_err(map)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        self.write_csv(File::create(path)?)
    }
}

/// Parameters of the synthetic daily demand profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDemand {
    pub days: usize,
    pub steps_per_day: usize,
    pub base: f64,
    pub daily_amplitude: f64,
    pub noise_std: f64,
    /// Phase offset of the daily sinusoid, radians. `pi` puts the peak at 18:00.
    #[serde(default = "default_phase")]
    pub phase: f64,
}

fn default_phase() -> f64 {
    PI
}

impl Default for SyntheticDemand {
    fn default() -> Self {
        Self {
            days: 153,
            steps_per_day: 48,
            base: 2500.0,
            daily_amplitude: 1000.0,
            noise_std: 100.0,
            phase: PI,
        }
    }
}

/// Simulation start used for synthetic timestamps (1 June 2018, 00:00).
pub fn synthetic_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 6, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// `base + amplitude * sin(2 pi t_day / steps_per_day - phase)` plus seeded
/// Gaussian noise, floored at zero.
pub fn synth_demand(spec: &SyntheticDemand, seed: u64) -> DemandSeries {
    let n = spec.days * spec.steps_per_day;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("finite std"));
    let step = TimeDelta::seconds(SECONDS_PER_DAY / spec.steps_per_day.max(1) as i64);
    let start = synthetic_start();

    let mut timestamps = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    for t in 0..n {
        let t_day = (t % spec.steps_per_day) as f64 / spec.steps_per_day as f64;
        let mut d = spec.base + spec.daily_amplitude * (2.0 * PI * t_day - spec.phase).sin();
        if let Some(noise) = &noise {
            d += noise.sample(&mut rng);
        }
        timestamps.push(start + step * t as i32);
        demand.push(d.max(0.0));
    }
    DemandSeries {
        timestamps,
        demand,
        steps_per_day: spec.steps_per_day,
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads a demand CSV, checking that timestamps increase by a constant step
/// that divides a day evenly.
pub fn read_demand_csv<R: Read>(reader: R) -> Result<DemandSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header_err = |message: String| DataError::Parse { line: 1, message };
    let headers = rdr.headers().map_err(|e| header_err(e.to_string()))?.clone();
    if headers.len() != 2 || headers[0] != *CSV_HEADER[0] || headers[1] != *CSV_HEADER[1] {
        return Err(header_err(format!(
            "expected header `{},{}`, found `{}`",
            CSV_HEADER[0],
            CSV_HEADER[1],
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    let mut demand = Vec::new();
    let mut step: Option<i64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |message: String| DataError::Parse { line, message };
        if record.len() != 2 {
            return Err(parse(format!("expected 2 fields, found {}", record.len())));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse(format!("invalid timestamp `{}`", &record[0])))?;
        let d: f64 = record[1]
            .parse()
            .map_err(|_| parse(format!("invalid demand `{}`", &record[1])))?;
        if !d.is_finite() || d < 0.0 {
            return Err(parse(format!("demand must be finite and non-negative, got {d}")));
        }
        if let Some(prev) = timestamps.last() {
            let gap = (ts - *prev).num_seconds();
            if gap <= 0 {
                return Err(parse("timestamps must be strictly increasing".into()));
            }
            match step {
                None => step = Some(gap),
                Some(s) if s != gap => {
                    return Err(DataError::NonUniformStep {
                        line,
                        expected: s,
                        actual: gap,
                    })
                }
                Some(_) => {}
            }
        }
        timestamps.push(ts);
        demand.push(d);
    }
    if demand.is_empty() {
        return Err(DataError::Invalid("no data rows".into()));
    }
    let step = step.unwrap_or(SECONDS_PER_DAY / 48);
    if SECONDS_PER_DAY % step != 0 {
        return Err(DataError::Invalid(format!("step of {step}s does not divide a day")));
    }
    Ok(DemandSeries {
        timestamps,
        demand,
        steps_per_day: (SECONDS_PER_DAY / step) as usize,
    })
}

pub fn load_demand_csv(path: &Path) -> Result<DemandSeries, DataError> {
    read_demand_csv(File::open(path)?)
}
