//! Learning-performance regression on per-student records.
//!
//! A record carries nine features and a test-score label. Features x4..x9
//! and the label are min-max scaled; school code, grade and gender pass
//! through. A small feed-forward network is trained on the scaled records
//! with full-batch gradient descent on mean squared error.

mod mlp;
mod sweep;
pub mod synthetic;

pub use mlp::{
    evaluate, gradient_check, train, Activation, Layer, ModelConfig, RegressionModel, SplitSizes,
    TrainReport,
};
pub use sweep::{epoch_sweep, epoch_sweep_with, SweepReport, SweepRow, PAPER_EPOCHS, TRAIN_FRACTION};

use std::io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEATURES: usize = 9;

/// Columns touched by scaling: x4..x9, then y.
pub const SCALED_COLUMNS: [&str; 7] = ["x4", "x5", "x6", "x7", "x8", "x9", "y"];

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("column {0} is constant; cannot scale")]
    DegenerateColumn(&'static str),
    #[error("{0} partition would be empty")]
    EmptySplit(&'static str),
    #[error("invalid split fractions: {0}")]
    InvalidFraction(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset must be scaled first")]
    NotScaled,
    #[error("at least one epoch is required")]
    NoEpochs,
    #[error("epoch list is empty")]
    EmptyEpochList,
    #[error("loss is not finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("record {row}: {detail}")]
    InvalidRecord { row: usize, detail: String },
    #[error("records csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One student. Field names double as the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    /// School code.
    pub x1: f64,
    /// Grade, 5 or 6.
    pub x2: f64,
    /// Gender, 0 or 1.
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub x6: f64,
    /// Speaking practice count.
    pub x7: f64,
    /// Correctly recognized ratio.
    pub x8: f64,
    /// Combined correctly and partially recognized score.
    pub x9: f64,
    /// Monthly test score.
    pub y: f64,
}

impl StudentRecord {
    pub fn features(&self) -> [f64; FEATURES] {
        [
            self.x1, self.x2, self.x3, self.x4, self.x5, self.x6, self.x7, self.x8, self.x9,
        ]
    }

    fn scaled(&self) -> [f64; 7] {
        [self.x4, self.x5, self.x6, self.x7, self.x8, self.x9, self.y]
    }

    fn scaled_mut(&mut self) -> [&mut f64; 7] {
        [
            &mut self.x4,
            &mut self.x5,
            &mut self.x6,
            &mut self.x7,
            &mut self.x8,
            &mut self.x9,
            &mut self.y,
        ]
    }

    /// Checks the shape of a scaled record: x1 a positive integer, x2 in
    /// {5, 6}, x3 in {0, 1}, everything else in `[0, 1]`.
    pub fn check_scaled(&self) -> Result<(), String> {
        self.check_categorical()?;
        for (name, v) in SCALED_COLUMNS.iter().zip(self.scaled()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn check_categorical(&self) -> Result<(), String> {
        if !(self.x1 >= 1.0 && self.x1.fract() == 0.0) {
            return Err(format!("x1 = {} is not a school code", self.x1));
        }
        if self.x2 != 5.0 && self.x2 != 6.0 {
            return Err(format!("x2 = {} is not grade 5 or 6", self.x2));
        }
        if self.x3 != 0.0 && self.x3 != 1.0 {
            return Err(format!("x3 = {} is not 0 or 1", self.x3));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    Scaled,
}

/// Per-column `(min, max)` for [`SCALED_COLUMNS`], captured at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub ranges: [(f64, f64); 7],
}

impl ScalingSpec {
    pub fn fit(records: &[StudentRecord]) -> Result<Self, AnalyticsError> {
        if records.is_empty() {
            return Err(AnalyticsError::EmptyDataset);
        }
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 7];
        for r in records {
            for (range, v) in ranges.iter_mut().zip(r.scaled()) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        for (name, (lo, hi)) in SCALED_COLUMNS.iter().zip(ranges) {
            if !(lo < hi) {
                return Err(AnalyticsError::DegenerateColumn(name));
            }
        }
        Ok(Self { ranges })
    }

    pub fn transform(&self, r: &StudentRecord) -> StudentRecord {
        let mut out = *r;
        for (v, (lo, hi)) in out.scaled_mut().into_iter().zip(self.ranges) {
            *v = (*v - lo) / (hi - lo);
        }
        out
    }

    pub fn inverse(&self, r: &StudentRecord) -> StudentRecord {
        let mut out = *r;
        for (v, (lo, hi)) in out.scaled_mut().into_iter().zip(self.ranges) {
            *v = *v * (hi - lo) + lo;
        }
        out
    }

    /// Maps a scaled label back to the raw scale.
    pub fn inverse_label(&self, y: f64) -> f64 {
        let (lo, hi) = self.ranges[6];
        y * (hi - lo) + lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<StudentRecord>,
    pub provenance: Provenance,
    pub scaling: Option<ScalingSpec>,
}

impl Dataset {
    pub fn raw(name: impl Into<String>, records: Vec<StudentRecord>) -> Self {
        Self {
            name: name.into(),
            records,
            provenance: Provenance::Raw,
            scaling: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn with_records(&self, records: Vec<StudentRecord>) -> Self {
        Self {
            name: self.name.clone(),
            records,
            provenance: self.provenance,
            scaling: self.scaling,
        }
    }

    pub fn from_csv<R: io::Read>(name: impl Into<String>, reader: R) -> Result<Self, AnalyticsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let expected = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "y"];
        let headers = rdr.headers()?.clone();
        for i in 0..expected.len().max(headers.len()) {
            let detail = match (expected.get(i), headers.get(i)) {
                (Some(e), Some(g)) if *e == g => continue,
                (Some(e), Some(g)) => format!("header column {} is '{g}', expected '{e}'", i + 1),
                (Some(e), None) => format!("header is missing column '{e}'"),
                (None, Some(g)) => format!("unexpected header column '{g}'"),
                (None, None) => unreachable!(),
            };
            return Err(AnalyticsError::InvalidRecord { row: 0, detail });
        }
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize().enumerate() {
            let r: StudentRecord = row?;
            if r.features().iter().chain([&r.y]).any(|v| !v.is_finite()) {
                return Err(AnalyticsError::InvalidRecord {
                    row: i + 1,
                    detail: "non-finite value".into(),
                });
            }
            records.push(r);
        }
        Ok(Self::raw(name, records))
    }

    pub fn to_csv<W: io::Write>(&self, writer: W) -> Result<(), AnalyticsError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "y"])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fits min-max scaling on this dataset and applies it.
    pub fn scale_fit_transform(&self) -> Result<(Dataset, ScalingSpec), AnalyticsError> {
        let spec = ScalingSpec::fit(&self.records)?;
        Ok((self.scale_with(&spec), spec))
    }

    pub fn scale_with(&self, spec: &ScalingSpec) -> Dataset {
        Dataset {
            name: self.name.clone(),
            records: self.records.iter().map(|r| spec.transform(r)).collect(),
            provenance: Provenance::Scaled,
            scaling: Some(*spec),
        }
    }

    /// Checks every record against the scaled-record shape.
    pub fn check_scaled(&self) -> Result<(), AnalyticsError> {
        if self.provenance != Provenance::Scaled {
            return Err(AnalyticsError::NotScaled);
        }
        for (i, r) in self.records.iter().enumerate() {
            r.check_scaled()
                .map_err(|detail| AnalyticsError::InvalidRecord { row: i + 1, detail })?;
        }
        Ok(())
    }

    pub fn inputs(&self) -> Vec<[f64; FEATURES]> {
        self.records.iter().map(StudentRecord::features).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }
}

/// Shuffles with `seed`, then cuts consecutive runs of the given sizes.
fn partition(ds: &Dataset, sizes: &[usize], seed: u64) -> Vec<Dataset> {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &n in sizes {
        let records = idx[start..start + n].iter().map(|&i| ds.records[i]).collect();
        out.push(ds.with_records(records));
        start += n;
    }
    out
}

/// Three-way split. Train and validation get `floor(n * fraction)` records
/// each; the remainder is the test set.
pub fn split(
    ds: &Dataset,
    train_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), AnalyticsError> {
    if !(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0) {
        return Err(AnalyticsError::InvalidFraction(format!(
            "train {train_fraction}, validation {val_fraction}"
        )));
    }
    let n = ds.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let n_val = (n as f64 * val_fraction).floor() as usize;
    let n_test = n - n_train - n_val;
    for (size, which) in [(n_train, "train"), (n_val, "validation"), (n_test, "test")] {
        if size == 0 {
            return Err(AnalyticsError::EmptySplit(which));
        }
    }
    let mut parts = partition(ds, &[n_train, n_val, n_test], seed).into_iter();
    let (a, b, c) = (parts.next(), parts.next(), parts.next());
    Ok((a.unwrap(), b.unwrap(), c.unwrap()))
}

/// Two-way split: `floor(n * train_fraction)` records for training, the
/// rest for testing.
pub fn holdout(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), AnalyticsError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(AnalyticsError::InvalidFraction(format!("train {train_fraction}")));
    }
    let n = ds.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 {
        return Err(AnalyticsError::EmptySplit("train"));
    }
    if n_train == n {
        return Err(AnalyticsError::EmptySplit("test"));
    }
    let mut parts = partition(ds, &[n_train, n - n_train], seed).into_iter();
    Ok((parts.next().unwrap(), parts.next().unwrap()))
}

/// Share of the training set held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Holds out `train_fraction` for training, then carves
/// [`VALIDATION_FRACTION`] of the training records off for validation.
pub fn train_val_test(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), AnalyticsError> {
    let (train, test) = holdout(ds, train_fraction, seed)?;
    let (val, train) = holdout(&train, VALIDATION_FRACTION, seed.wrapping_add(1))
        .map_err(|e| match e {
            AnalyticsError::EmptySplit("train") => AnalyticsError::EmptySplit("validation"),
            AnalyticsError::EmptySplit(_) => AnalyticsError::EmptySplit("train"),
            other => other,
        })?;
    Ok((train, val, test))
}
