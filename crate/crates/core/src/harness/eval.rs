use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confidence_interval, Example};
use crate::bcresnet::{features_to_tensor, BcResNet};
use crate::error::{Error, Result};
use crate::grad::Module;
use crate::scene::NoiseType;

/// Items per inference batch during evaluation.
const EVAL_BATCH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseGroup {
    Seen,
    Unseen,
}

impl NoiseGroup {
    pub const ALL: [NoiseGroup; 2] = [NoiseGroup::Seen, NoiseGroup::Unseen];

    /// Items without a noise type count as seen.
    pub fn of(noise: Option<NoiseType>) -> Self {
        match noise {
            Some(n) if !n.is_seen() => NoiseGroup::Unseen,
            _ => NoiseGroup::Seen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub snr_db: f64,
    pub group: NoiseGroup,
    pub correct: usize,
    pub total: usize,
}

impl AccuracyCell {
    /// Percent correct; `None` for an empty cell.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}

/// Top-1 accuracy per (SNR, noise group) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub snrs: Vec<f64>,
    /// Row-major over `snrs` x [`NoiseGroup::ALL`].
    pub cells: Vec<AccuracyCell>,
    /// Items whose SNR is not in the grid.
    pub off_grid: usize,
}

impl AccuracyTable {
    pub fn new(snrs: &[f64]) -> Self {
        let cells = snrs
            .iter()
            .flat_map(|&snr_db| {
                NoiseGroup::ALL.map(|group| AccuracyCell {
                    snr_db,
                    group,
                    correct: 0,
                    total: 0,
                })
            })
            .collect();
        Self {
            snrs: snrs.to_vec(),
            cells,
            off_grid: 0,
        }
    }

    pub fn record(&mut self, snr_db: f64, noise: Option<NoiseType>, correct: bool) {
        let Some(row) = self.snrs.iter().position(|&s| s == snr_db) else {
            self.off_grid += 1;
            return;
        };
        let group = NoiseGroup::of(noise) as usize;
        let cell = &mut self.cells[row * NoiseGroup::ALL.len() + group];
        cell.total += 1;
        cell.correct += usize::from(correct);
    }

    pub fn cell(&self, snr_db: f64, group: NoiseGroup) -> Option<&AccuracyCell> {
        self.cells.iter().find(|c| c.snr_db == snr_db && c.group == group)
    }

    pub fn accuracy(&self, snr_db: f64, group: NoiseGroup) -> Option<f64> {
        self.cell(snr_db, group).and_then(AccuracyCell::accuracy)
    }

    /// Both groups pooled at one SNR.
    pub fn snr_accuracy(&self, snr_db: f64) -> Option<f64> {
        let (c, t) = self
            .cells
            .iter()
            .filter(|c| c.snr_db == snr_db)
            .fold((0, 0), |(c, t), cell| (c + cell.correct, t + cell.total));
        (t > 0).then(|| 100.0 * c as f64 / t as f64)
    }

    /// All on-grid items pooled.
    pub fn overall(&self) -> Option<f64> {
        let (c, t) = self
            .cells
            .iter()
            .fold((0, 0), |(c, t), cell| (c + cell.correct, t + cell.total));
        (t > 0).then(|| 100.0 * c as f64 / t as f64)
    }
}

/// Arg-max class of every example, in input order.
pub fn predict_all(model: &BcResNet<f32>, examples: &[Example]) -> Result<Vec<usize>> {
    let chunks: Vec<Vec<usize>> = examples
        .par_chunks(EVAL_BATCH)
        .map(|chunk| {
            let maps: Vec<_> = chunk.iter().map(|e| &e.features).collect();
            let logits = model.infer(&features_to_tensor::<f32>(&maps)?)?;
            let k = logits.shape()[1];
            Ok(logits
                .data()
                .chunks(k)
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                        .0
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Tabulates predictions; the counts do not depend on item order.
pub fn tabulate(
    items: impl IntoIterator<Item = (f64, Option<NoiseType>, usize, usize)>,
    snrs: &[f64],
) -> AccuracyTable {
    let mut table = AccuracyTable::new(snrs);
    for (snr, noise, predicted, label) in items {
        table.record(snr, noise, predicted == label);
    }
    table
}

pub fn evaluate(model: &BcResNet<f32>, examples: &[Example], snrs: &[f64]) -> Result<AccuracyTable> {
    let preds = predict_all(model, examples)?;
    Ok(tabulate(
        examples
            .iter()
            .zip(preds)
            .map(|(e, p)| (e.snr_db, e.noise_type, p, e.label)),
        snrs,
    ))
}

/// Mean and 95% halfwidth of one cell across seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mean: Option<f64>,
    /// `None` with fewer than two seeds or an absent cell.
    pub ci_halfwidth: Option<f64>,
}

fn summarize(values: &[f64]) -> CellSummary {
    if values.is_empty() {
        return CellSummary {
            mean: None,
            ci_halfwidth: None,
        };
    }
    match confidence_interval(values) {
        Ok((m, h)) => CellSummary {
            mean: Some(m),
            ci_halfwidth: Some(h),
        },
        Err(_) => CellSummary {
            mean: Some(values.iter().sum::<f64>() / values.len() as f64),
            ci_halfwidth: None,
        },
    }
}

/// Multi-seed evaluation laid out by SNR and seen/unseen noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub snrs: Vec<f64>,
    pub per_seed: Vec<AccuracyTable>,
    /// Row-major over `snrs` x [`NoiseGroup::ALL`].
    pub cells: Vec<CellSummary>,
    pub seed_accuracies: Vec<f64>,
    pub overall: CellSummary,
    pub rtf: Option<f64>,
}

impl EvalReport {
    pub fn from_tables(label: &str, tables: Vec<AccuracyTable>, rtf: Option<f64>) -> Result<Self> {
        let first = tables.first().ok_or(Error::EmptyOperand)?;
        let snrs = first.snrs.clone();
        if tables.iter().any(|t| t.snrs != snrs) {
            return Err(Error::ShapeMismatch("seed tables use different SNR grids".into()));
        }
        let cells = snrs
            .iter()
            .flat_map(|&s| NoiseGroup::ALL.map(|g| (s, g)))
            .map(|(s, g)| {
                let vals: Vec<f64> = tables.iter().filter_map(|t| t.accuracy(s, g)).collect();
                summarize(&vals)
            })
            .collect();
        let seed_accuracies: Vec<f64> = tables.iter().filter_map(AccuracyTable::overall).collect();
        let overall = summarize(&seed_accuracies);
        Ok(Self {
            label: label.to_string(),
            snrs,
            per_seed: tables,
            cells,
            seed_accuracies,
            overall,
            rtf,
        })
    }

    pub fn cell(&self, snr_db: f64, group: NoiseGroup) -> Option<&CellSummary> {
        let row = self.snrs.iter().position(|&s| s == snr_db)?;
        self.cells.get(row * NoiseGroup::ALL.len() + group as usize)
    }

    /// Text table: one row per SNR, seen and unseen columns as `mean ± ci`.
    pub fn to_text(&self) -> String {
        let fmt = |c: &CellSummary| match (c.mean, c.ci_halfwidth) {
            (Some(m), Some(h)) => format!("{m:6.2} ± {h:5.2}"),
            (Some(m), None) => format!("{m:6.2}        "),
            _ => "     -         ".to_string(),
        };
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} seeds)", self.label, self.per_seed.len());
        let _ = writeln!(s, "{:>8}  {:<15}  {:<15}", "SNR dB", "seen", "unseen");
        for (row, snr) in self.snrs.iter().enumerate() {
            let _ = writeln!(
                s,
                "{snr:>8}  {:<15}  {:<15}",
                fmt(&self.cells[2 * row]),
                fmt(&self.cells[2 * row + 1])
            );
        }
        let _ = writeln!(s, "{:>8}  {}", "overall", fmt(&self.overall));
        if let Some(rtf) = self.rtf {
            let _ = writeln!(s, "{:>8}  {rtf:.4}", "RTF");
        }
        s
    }
}
