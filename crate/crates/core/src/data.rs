//! RSSI trace ingestion and preprocessing.
//!
//! The pipeline here mirrors how the measurement campaigns are reduced to
//! training data: multiple repeated readings are averaged per time step,
//! per-location captures are collapsed to one representative value each,
//! and the resulting series is cut into (window, next value) pairs with
//! stride 1. Splits are strictly temporal; normalization statistics are
//! fitted on the training partition only.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Default CSV column carrying RSSI values.
pub const DEFAULT_RSSI_COLUMN: &str = "rssi_dbm";
/// CSV column carrying location labels in sweep files.
pub const LOCATION_COLUMN: &str = "location_label";

/// Measurement scenario a trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Fixed transmitter/receiver geometry sampled over time.
    Stationary,
    /// One value per receiver location, in sweep order.
    LocationSweep,
}

/// Propagation condition between transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Los,
    Nlos,
}

/// Provenance attached to a trace. Descriptive only; nothing numeric reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: Scenario,
    pub condition: Condition,
    pub source: String,
}

impl TraceMeta {
    pub fn new(scenario: Scenario, condition: Condition, source: impl Into<String>) -> Self {
        Self {
            scenario,
            condition,
            source: source.into(),
        }
    }
}

impl Default for TraceMeta {
    fn default() -> Self {
        Self {
            scenario: Scenario::Stationary,
            condition: Condition::Los,
            source: String::new(),
        }
    }
}

/// A time-ordered sequence of RSSI samples in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiTrace {
    samples: Vec<f64>,
    pub meta: TraceMeta,
}

impl RssiTrace {
    /// Validates that the trace is non-empty and every sample is finite.
    pub fn new(samples: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("trace has no samples".into()));
        }
        if let Some(idx) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!(
                "trace sample {idx} is not finite ({})",
                samples[idx]
            )));
        }
        Ok(Self { samples, meta })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same samples with replaced provenance.
    pub fn with_meta(mut self, meta: TraceMeta) -> Self {
        self.meta = meta;
        self
    }
}

/// Raw per-location captures, in physical measurement order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSet {
    locations: Vec<Location>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub label: String,
    pub samples: Vec<f64>,
}

impl LocationSet {
    pub fn new(locations: Vec<Location>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Data("location set has no locations".into()));
        }
        Ok(Self { locations })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// (input window, next value) supervised pairs with stride 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    pub input: Vector,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    window: usize,
    pairs: Vec<WindowPair>,
}

impl WindowedDataset {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn pairs(&self) -> &[WindowPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Z-score transform fitted on training data. `std` is the population
/// standard deviation, clamped to 1 when the pool is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_vector(&self, v: &Vector) -> Vector {
        Vector::new(v.as_slice().iter().map(|&x| self.apply(x)).collect())
    }
}

/// Temporally ordered train/test partitions plus optional normalization
/// statistics fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    pub normalizer: Option<Normalizer>,
}

impl SplitDataset {
    /// Fits a z-score normalizer on the training partition and attaches it.
    pub fn with_normalizer(mut self) -> Result<Self> {
        self.normalizer = Some(fit_normalizer(&self.train)?);
        Ok(self)
    }
}

/// Loads a single-trace CSV. The file must have a header row naming
/// `rssi_column`; other columns (e.g. a timestamp) are ignored and file
/// order is authoritative. Malformed cells are rejected with their line
/// number.
pub fn load_csv_trace(path: &Path, rssi_column: &str, meta: TraceMeta) -> Result<RssiTrace> {
    let mut reader = csv_reader(path)?;
    let col = column_index(&mut reader, rssi_column, path)?;

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        let cell = record.get(col).ok_or_else(|| {
            Error::Parse(format!(
                "{}: line {line}: row has no column {rssi_column}",
                path.display()
            ))
        })?;
        samples.push(parse_dbm(cell, path, line)?);
    }
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "{}: no data rows after the header",
            path.display()
        )));
    }
    RssiTrace::new(samples, meta)
}

/// Loads a location-sweep CSV with `location_label` and RSSI columns. Rows
/// are grouped by label, ordered by each label's first appearance.
pub fn load_csv_locations(path: &Path, rssi_column: &str) -> Result<LocationSet> {
    let mut reader = csv_reader(path)?;
    let label_col = column_index(&mut reader, LOCATION_COLUMN, path)?;
    let rssi_col = column_index(&mut reader, rssi_column, path)?;

    let mut locations: Vec<Location> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        let label = record
            .get(label_col)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "{}: line {line}: row has no column {LOCATION_COLUMN}",
                    path.display()
                ))
            })?
            .to_string();
        let cell = record.get(rssi_col).ok_or_else(|| {
            Error::Parse(format!(
                "{}: line {line}: row has no column {rssi_column}",
                path.display()
            ))
        })?;
        let value = parse_dbm(cell, path, line)?;

        match locations.iter_mut().find(|l| l.label == label) {
            Some(loc) => loc.samples.push(value),
            None => locations.push(Location {
                label,
                samples: vec![value],
            }),
        }
    }
    if locations.is_empty() {
        return Err(Error::Data(format!(
            "{}: no data rows after the header",
            path.display()
        )));
    }
    LocationSet::new(locations)
}

/// Writes a trace in the format [`load_csv_trace`] ingests. Values use the
/// shortest representation that parses back to the identical f64.
pub fn write_csv_trace(path: &Path, trace: &RssiTrace) -> Result<()> {
    let mut out = String::from("t,rssi_dbm\n");
    for (t, sample) in trace.samples().iter().enumerate() {
        out.push_str(&format!("{t},{sample}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a location sweep in the format [`load_csv_locations`] ingests.
pub fn write_csv_locations(path: &Path, set: &LocationSet) -> Result<()> {
    let mut out = format!("{LOCATION_COLUMN},rssi_dbm\n");
    for location in set.locations() {
        for sample in &location.samples {
            out.push_str(&format!("{},{sample}\n", location.label));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(format!("{}: {e}", path.display())),
            _ => Error::Parse(format!("{}: {e}", path.display())),
        })
}

fn column_index(
    reader: &mut csv::Reader<std::fs::File>,
    column: &str,
    path: &Path,
) -> Result<usize> {
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    headers.iter().position(|h| h == column).ok_or_else(|| {
        Error::Parse(format!(
            "{}: header has no column named {column} (found: {})",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        ))
    })
}

fn parse_dbm(cell: &str, path: &Path, line: u64) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| {
        Error::Parse(format!(
            "{}: line {line}: cell {cell:?} is not numeric",
            path.display()
        ))
    })?;
    if !value.is_finite() {
        return Err(Error::Parse(format!(
            "{}: line {line}: cell {cell:?} is not finite",
            path.display()
        )));
    }
    Ok(value)
}

/// Averages several aligned readings of the same capture: `output[t]` is the
/// mean over readings of `reading[r][t]`. All readings must have equal length.
pub fn average_readings(readings: &[RssiTrace]) -> Result<RssiTrace> {
    let first = readings
        .first()
        .ok_or_else(|| Error::Data("no readings to average".into()))?;
    let len = first.len();
    for (i, reading) in readings.iter().enumerate() {
        if reading.len() != len {
            return Err(Error::Shape(format!(
                "reading 0 has {len} samples but reading {i} has {}",
                reading.len()
            )));
        }
    }
    let n = readings.len() as f64;
    let samples = (0..len)
        .map(|t| readings.iter().map(|r| r.samples()[t]).sum::<f64>() / n)
        .collect();
    let meta = TraceMeta {
        source: format!("mean of {} readings", readings.len()),
        ..first.meta.clone()
    };
    RssiTrace::new(samples, meta)
}

/// Collapses each location to the mean of its samples, preserving location
/// order, so an 11-location sweep becomes an 11-value trace.
pub fn average_locations(set: &LocationSet) -> Result<RssiTrace> {
    let mut samples = Vec::with_capacity(set.len());
    for location in set.locations() {
        if location.samples.is_empty() {
            return Err(Error::Data(format!(
                "location {} has no samples",
                location.label
            )));
        }
        samples.push(location.samples.iter().sum::<f64>() / location.samples.len() as f64);
    }
    let meta = TraceMeta::new(
        Scenario::LocationSweep,
        Condition::Los,
        format!("per-location means over {} locations", set.len()),
    );
    RssiTrace::new(samples, meta)
}

/// Cuts a series into supervised pairs: pair `i` is
/// (`samples[i..i+window]`, `samples[i+window]`), stride 1. A series no
/// longer than the window yields an empty dataset.
pub fn make_windows(trace: &RssiTrace, window: usize) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let samples = trace.samples();
    let n_pairs = samples.len().saturating_sub(window);
    let pairs = (0..n_pairs)
        .map(|i| WindowPair {
            input: Vector::from_slice(&samples[i..i + window]),
            target: samples[i + window],
        })
        .collect();
    Ok(WindowedDataset { window, pairs })
}

/// Splits pairs temporally: the first `floor(train_fraction * count)` pairs
/// train, the remainder test, order preserved. No normalizer is attached.
pub fn temporal_split(ds: &WindowedDataset, train_fraction: f64) -> Result<SplitDataset> {
    if train_fraction.is_nan() || train_fraction <= 0.0 || train_fraction > 1.0 {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let n_train = ((train_fraction * ds.len() as f64).floor() as usize).min(ds.len());
    temporal_split_at(ds, n_train, None)
}

/// Splits at an explicit pair-count boundary: the first `n_train` pairs
/// train, the next `n_test` pairs test (remainder when `None`), and any
/// pairs past `n_train + n_test` are held out entirely.
pub fn temporal_split_at(
    ds: &WindowedDataset,
    n_train: usize,
    n_test: Option<usize>,
) -> Result<SplitDataset> {
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    if n_train == 0 || n_train > ds.len() {
        return Err(Error::Data(format!(
            "train boundary {n_train} is outside the {} available pairs",
            ds.len()
        )));
    }
    let n_test = n_test.unwrap_or(ds.len() - n_train);
    if n_train + n_test > ds.len() {
        return Err(Error::Data(format!(
            "{n_train} train + {n_test} test pairs exceed the {} available",
            ds.len()
        )));
    }
    Ok(SplitDataset {
        train: WindowedDataset {
            window: ds.window,
            pairs: ds.pairs[..n_train].to_vec(),
        },
        test: WindowedDataset {
            window: ds.window,
            pairs: ds.pairs[n_train..n_train + n_test].to_vec(),
        },
        normalizer: None,
    })
}

/// Fits a z-score normalizer over all training inputs and targets pooled,
/// using the population standard deviation. A constant pool degenerates to
/// `std = 1`, making the transform a pure shift.
pub fn fit_normalizer(train: &WindowedDataset) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::Data(
            "cannot fit a normalizer on an empty training set".into(),
        ));
    }
    let mut count = 0usize;
    let mut sum = 0.0;
    for pair in train.pairs() {
        for &x in pair.input.as_slice() {
            sum += x;
            count += 1;
        }
        sum += pair.target;
        count += 1;
    }
    let mean = sum / count as f64;

    let mut sq_sum = 0.0;
    for pair in train.pairs() {
        for &x in pair.input.as_slice() {
            sq_sum += (x - mean) * (x - mean);
        }
        sq_sum += (pair.target - mean) * (pair.target - mean);
    }
    let variance = sq_sum / count as f64;
    let std = variance.sqrt();
    Ok(Normalizer {
        mean,
        std: if std == 0.0 { 1.0 } else { std },
    })
}
