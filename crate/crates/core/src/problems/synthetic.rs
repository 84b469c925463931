//! Desk-scale sparse logistic-regression instances.
//!
//! Rows mimic bag-of-words data: each row activates `row_nnz` distinct
//! features drawn from a Zipf law over the columns, with unit-norm rows.
//! Labels come from a dense random separator plus label flips.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::libsvm::Dataset;
use super::sparse::CsrMatrix;
use super::LogisticRegression;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLogistic {
    pub samples: usize,
    pub dim: usize,
    pub row_nnz: usize,
    pub zipf_exponent: f64,
    pub label_flip: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for SyntheticLogistic {
    fn default() -> Self {
        SyntheticLogistic {
            samples: 1000,
            dim: 256,
            row_nnz: 8,
            zipf_exponent: 1.1,
            label_flip: 0.05,
            reg: 1e-3,
            seed: 1,
        }
    }
}

impl SyntheticLogistic {
    pub fn dataset(&self) -> Result<Dataset> {
        if self.samples == 0 || self.dim == 0 || self.row_nnz == 0 || self.row_nnz > self.dim {
            return Err(Error::Config(format!("invalid synthetic spec {self:?}")));
        }
        let mut r = rng::stream(self.seed, u64::MAX >> 16, 0xffff);
        let mut cdf = Vec::with_capacity(self.dim);
        let mut acc = 0.0;
        for j in 0..self.dim {
            acc += 1.0 / ((j + 1) as f64).powf(self.zipf_exponent);
            cdf.push(acc);
        }
        let separator: Vec<f64> = (0..self.dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();

        let mut rows = Vec::with_capacity(self.samples);
        let mut labels = Vec::with_capacity(self.samples);
        for _ in 0..self.samples {
            let mut cols: Vec<usize> = Vec::with_capacity(self.row_nnz);
            while cols.len() < self.row_nnz {
                let u = r.random::<f64>() * acc;
                let c = cdf.partition_point(|&v| v < u).min(self.dim - 1);
                if !cols.contains(&c) {
                    cols.push(c);
                }
            }
            cols.sort_unstable();
            let weights: Vec<f64> = cols.iter().map(|_| 0.5 + r.random::<f64>()).collect();
            let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            let row: Vec<(usize, f64)> = cols.iter().zip(&weights).map(|(&c, &w)| (c, w / norm)).collect();
            let score: f64 = row.iter().map(|&(c, v)| v * separator[c]).sum();
            let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
            if r.random::<f64>() < self.label_flip {
                label = -label;
            }
            rows.push(row);
            labels.push(label);
        }
        Ok(Dataset {
            features: CsrMatrix::from_rows(rows, self.dim)?,
            labels,
        })
    }

    pub fn build(&self) -> Result<LogisticRegression> {
        LogisticRegression::new(self.dataset()?, self.reg)
    }
}
