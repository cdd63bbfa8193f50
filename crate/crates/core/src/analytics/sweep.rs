use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, train_val_test, AnalyticsError, Dataset, ModelConfig, Provenance};

/// The epoch settings of the original experiments.
pub const PAPER_EPOCHS: [usize; 5] = [100, 200, 300, 400, 500];

/// Share of the records used for training (validation is carved from it).
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epochs: usize,
    pub mse_train: f64,
    pub mse_val: f64,
    pub mse_test: f64,
    /// Lowest training MSE in the table.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub rows: Vec<SweepRow>,
    pub seed: u64,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.best)
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset\t{}\tseed\t{}", self.dataset, self.seed)?;
        writeln!(f, "epochs\ttrain\tval\ttest")?;
        for r in &self.rows {
            writeln!(
                f,
                "{}\t{:.3}\t{:.3}\t{:.3}{}",
                r.epochs,
                r.mse_train,
                r.mse_val,
                r.mse_test,
                if r.best { "\t*" } else { "" }
            )?;
        }
        Ok(())
    }
}

/// Trains one fresh model per epoch setting on the same split and reports
/// train, validation and test MSE. Raw datasets are min-max scaled first.
pub fn epoch_sweep(ds: &Dataset, epochs: &[usize], seed: u64) -> Result<SweepReport, AnalyticsError> {
    epoch_sweep_with(&ModelConfig::default(), ds, epochs, seed)
}

pub fn epoch_sweep_with(
    config: &ModelConfig,
    ds: &Dataset,
    epochs: &[usize],
    seed: u64,
) -> Result<SweepReport, AnalyticsError> {
    if epochs.is_empty() {
        return Err(AnalyticsError::EmptyEpochList);
    }
    let scaled = match ds.provenance {
        Provenance::Scaled => ds.clone(),
        Provenance::Raw => ds.scale_fit_transform()?.0,
    };
    let (tr, va, te) = train_val_test(&scaled, TRAIN_FRACTION, seed)?;
    let mut rows = epochs
        .par_iter()
        .map(|&n| {
            let (model, report) = train(config, &tr, &va, n, seed)?;
            Ok(SweepRow {
                epochs: n,
                mse_train: report.mse_train,
                mse_val: report.mse_val,
                mse_test: evaluate(&model, &te),
                best: false,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    let best = rows
        .iter()
        .enumerate()
        .reduce(|a, b| if b.1.mse_train < a.1.mse_train { b } else { a })
        .map(|(i, _)| i)
        .expect("rows are nonempty");
    rows[best].best = true;
    Ok(SweepReport {
        dataset: ds.name.clone(),
        rows,
        seed,
    })
}
