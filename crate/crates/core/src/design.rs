//! Design matrices with per-column scaling metadata, and the labeled
//! regression dataset used by the causal and fairness pipelines.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// How a raw column should be treated when the matrix is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Constant 1 column; exactly one per matrix at most.
    Intercept,
    /// Indicator column restricted to {0, 1}; kept as-is.
    Binary,
    /// Continuous or ordinal column; standardized to mean 0, sd 1.
    Numeric,
}

/// The fitted transform of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnScale {
    Intercept,
    Binary,
    Standardized { mean: f64, sd: f64 },
}

impl ColumnScale {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnScale::Intercept => ColumnKind::Intercept,
            ColumnScale::Binary => ColumnKind::Binary,
            ColumnScale::Standardized { .. } => ColumnKind::Numeric,
        }
    }
}

/// Tolerance for the standardization invariant checks.
const SCALE_TOL: f64 = 1e-9;

/// A ready-to-fit design matrix. Numeric columns are standardized with the
/// (mean, sd) recorded per column so the transform can be replayed on new
/// rows or inverted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
    scales: Vec<ColumnScale>,
}

impl DesignMatrix {
    /// Build from raw column values, fitting standardization for numeric
    /// columns on these rows. Sample (n - 1) standard deviations are used,
    /// so numeric columns need at least two rows and nonzero variance.
    pub fn from_raw(raw: DMatrix<f64>, names: Vec<String>, kinds: &[ColumnKind]) -> Result<DesignMatrix> {
        if raw.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        check_headers(&raw, &names, kinds.len())?;
        let mut scales = Vec::with_capacity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            let col: Vec<f64> = raw.column(j).iter().copied().collect();
            let scale = match kind {
                ColumnKind::Intercept | ColumnKind::Binary => {
                    if *kind == ColumnKind::Intercept {
                        ColumnScale::Intercept
                    } else {
                        ColumnScale::Binary
                    }
                }
                ColumnKind::Numeric => {
                    let mean = stats::mean(&col)?;
                    if col.len() < 2 {
                        return Err(Error::ConstantColumn(names[j].clone()));
                    }
                    let sd = stats::sample_sd(&col)?;
                    if !(sd.is_finite() && sd > 0.0) {
                        return Err(Error::ConstantColumn(names[j].clone()));
                    }
                    ColumnScale::Standardized { mean, sd }
                }
            };
            scales.push(scale);
        }
        DesignMatrix::transform(raw, names, scales)
    }

    /// Build by replaying previously fitted scales (e.g. train-set scales
    /// applied to test rows).
    pub fn with_scales(raw: DMatrix<f64>, names: Vec<String>, scales: Vec<ColumnScale>) -> Result<DesignMatrix> {
        if raw.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        check_headers(&raw, &names, scales.len())?;
        DesignMatrix::transform(raw, names, scales)
    }

    fn transform(mut raw: DMatrix<f64>, names: Vec<String>, scales: Vec<ColumnScale>) -> Result<DesignMatrix> {
        for (j, scale) in scales.iter().enumerate() {
            match scale {
                ColumnScale::Intercept => {
                    for v in raw.column(j).iter() {
                        if *v != 1.0 {
                            return Err(Error::InvalidSpec(format!(
                                "intercept column '{}' contains {v}",
                                names[j]
                            )));
                        }
                    }
                }
                ColumnScale::Binary => {
                    for v in raw.column(j).iter() {
                        if *v != 0.0 && *v != 1.0 {
                            return Err(Error::InvalidSpec(format!(
                                "binary column '{}' contains {v}",
                                names[j]
                            )));
                        }
                    }
                }
                ColumnScale::Standardized { mean, sd } => {
                    let (mean, sd) = (*mean, *sd);
                    for v in raw.column_mut(j).iter_mut() {
                        if !v.is_finite() {
                            return Err(Error::InvalidSpec(format!(
                                "column '{}' contains a non-finite value",
                                names[j]
                            )));
                        }
                        *v = (*v - mean) / sd;
                    }
                }
            }
        }
        Ok(DesignMatrix { values: raw, names, scales })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scales(&self) -> &[ColumnScale] {
        &self.scales
    }

    pub fn kinds(&self) -> Vec<ColumnKind> {
        self.scales.iter().map(ColumnScale::kind).collect()
    }

    /// Index of the intercept column, if present.
    pub fn intercept_index(&self) -> Option<usize> {
        self.scales.iter().position(|s| *s == ColumnScale::Intercept)
    }

    /// Undo standardization, returning the original raw values.
    pub fn raw(&self) -> DMatrix<f64> {
        let mut raw = self.values.clone();
        for (j, scale) in self.scales.iter().enumerate() {
            if let ColumnScale::Standardized { mean, sd } = scale {
                for v in raw.column_mut(j).iter_mut() {
                    *v = *v * sd + mean;
                }
            }
        }
        raw
    }

    /// Copy the given rows, keeping the fitted scales. The standardization
    /// invariant is only guaranteed on the rows the scales were fitted to.
    pub fn subset_rows(&self, idx: &[usize]) -> Result<DesignMatrix> {
        if idx.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = idx.iter().find(|i| **i >= self.n()) {
            return Err(Error::InvalidSpec(format!("row index {bad} out of bounds")));
        }
        let values = self.values.select_rows(idx.iter());
        Ok(DesignMatrix {
            values,
            names: self.names.clone(),
            scales: self.scales.clone(),
        })
    }

    /// Check the standardization invariant on the rows the scales were
    /// fitted to: standardized columns have mean 0 and sd 1 within 1e-9,
    /// binary columns contain only {0, 1}, the intercept is all ones.
    pub fn validate_scaling(&self) -> Result<()> {
        for (j, scale) in self.scales.iter().enumerate() {
            let col: Vec<f64> = self.values.column(j).iter().copied().collect();
            match scale {
                ColumnScale::Standardized { .. } => {
                    let m = stats::mean(&col)?;
                    let sd = stats::sample_sd(&col)?;
                    if m.abs() > SCALE_TOL || (sd - 1.0).abs() > SCALE_TOL {
                        return Err(Error::InvalidSpec(format!(
                            "column '{}' not standardized: mean {m:e}, sd {sd}",
                            self.names[j]
                        )));
                    }
                }
                ColumnScale::Binary => {
                    if col.iter().any(|v| *v != 0.0 && *v != 1.0) {
                        return Err(Error::InvalidSpec(format!(
                            "binary column '{}' has non-indicator values",
                            self.names[j]
                        )));
                    }
                }
                ColumnScale::Intercept => {
                    if col.iter().any(|v| *v != 1.0) {
                        return Err(Error::InvalidSpec(format!(
                            "intercept column '{}' has non-unit values",
                            self.names[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_headers(raw: &DMatrix<f64>, names: &[String], meta_len: usize) -> Result<()> {
    if names.len() != raw.ncols() {
        return Err(Error::DimensionMismatch {
            context: "design matrix column names",
            expected: raw.ncols(),
            got: names.len(),
        });
    }
    if meta_len != raw.ncols() {
        return Err(Error::DimensionMismatch {
            context: "design matrix column metadata",
            expected: raw.ncols(),
            got: meta_len,
        });
    }
    Ok(())
}

/// Features, outcome, and binary treatment indicator for one study.
///
/// `x` holds all covariates used by the outcome and propensity models; the
/// treatment indicator is kept separate in `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDataset {
    pub x: DesignMatrix,
    pub y: DVector<f64>,
    pub w: Vec<u8>,
}

impl SectorDataset {
    pub fn new(x: DesignMatrix, y: DVector<f64>, w: Vec<u8>) -> Result<SectorDataset> {
        let d = SectorDataset { x, y, w };
        d.validate()?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.x.n() {
            return Err(Error::LengthMismatch {
                context: "outcome vs design rows",
                left: self.y.len(),
                right: self.x.n(),
            });
        }
        if self.w.len() != self.x.n() {
            return Err(Error::LengthMismatch {
                context: "treatment vs design rows",
                left: self.w.len(),
                right: self.x.n(),
            });
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("outcome contains a non-finite value".into()));
        }
        if self.w.iter().any(|v| *v > 1) {
            return Err(Error::InvalidSpec("treatment indicator must be 0 or 1".into()));
        }
        if !self.w.contains(&1) {
            return Err(Error::EmptyTreatmentGroup);
        }
        if !self.w.contains(&0) {
            return Err(Error::EmptyControlGroup);
        }
        Ok(())
    }

    pub fn treated_indices(&self) -> Vec<usize> {
        self.w.iter().enumerate().filter(|(_, w)| **w == 1).map(|(i, _)| i).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.w.iter().enumerate().filter(|(_, w)| **w == 0).map(|(i, _)| i).collect()
    }

    /// Row subset; keeps the design scales fitted on the full data. The
    /// result may be single-group, so it is not revalidated here.
    pub fn subset(&self, idx: &[usize]) -> Result<SectorDataset> {
        let x = self.x.subset_rows(idx)?;
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|i| self.y[*i]));
        let w = idx.iter().map(|i| self.w[*i]).collect();
        Ok(SectorDataset { x, y, w })
    }
}

/// Structural checks for a study dataset: shapes agree, the treatment vector
/// is binary, and both groups are non-empty.
pub fn validate_sector_dataset(d: &SectorDataset) -> Result<()> {
    d.validate()
}

/// Random train/test split with standardization refit on the training rows
/// and replayed onto the test rows, so test features never leak into the
/// scale estimates. Both sides must end up with treated and control rows.
pub fn split_dataset(
    d: &SectorDataset,
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(SectorDataset, SectorDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) || !train_fraction.is_finite() {
        return Err(Error::DegenerateSplit(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = d.n();
    if n < 2 {
        return Err(Error::DegenerateSplit(format!("{n} rows cannot be split")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((n as f64) * train_fraction).round().clamp(1.0, (n - 1) as f64) as usize;
    let (mut train_idx, mut test_idx) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
    // Original row order within each side keeps downstream sums independent
    // of shuffle internals.
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let raw = d.x.raw();
    let kinds = d.x.kinds();
    let names = d.x.names().to_vec();
    let train_x = DesignMatrix::from_raw(raw.select_rows(train_idx.iter()), names.clone(), &kinds)?;
    let test_x =
        DesignMatrix::with_scales(raw.select_rows(test_idx.iter()), names, train_x.scales().to_vec())?;

    let pick = |idx: &[usize]| {
        (
            DVector::from_iterator(idx.len(), idx.iter().map(|i| d.y[*i])),
            idx.iter().map(|i| d.w[*i]).collect::<Vec<u8>>(),
        )
    };
    let (train_y, train_w) = pick(&train_idx);
    let (test_y, test_w) = pick(&test_idx);
    let train = SectorDataset { x: train_x, y: train_y, w: train_w };
    let test = SectorDataset { x: test_x, y: test_y, w: test_w };
    for (side, part) in [("train", &train), ("test", &test)] {
        part.validate().map_err(|e| match e {
            Error::EmptyTreatmentGroup | Error::EmptyControlGroup => {
                Error::DegenerateSplit(format!("{side} side of the split lacks a group: {e}"))
            }
            other => other,
        })?;
    }
    Ok((train, test))
}
