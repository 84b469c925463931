use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of a run. Row 0 is the starting point; row `i ≥ 1` describes
/// the step that produced `x^i` and the objective at `x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Entries transmitted this iteration, summed over workers.
    pub t: usize,
    /// Per-worker entry counts (single-node runs have one element).
    pub worker_t: Vec<usize>,
    /// Improvement measure at the chosen budget (α, β or ω).
    pub measure: f64,
    pub step_size: f64,
    pub cum_cost: f64,
    pub cum_bits: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    TargetReached,
    MaxIters,
    /// The gradient vanished exactly.
    Converged,
    /// The objective rose for too many consecutive iterations under a
    /// step size that guarantees descent.
    Diverged { iter: usize, diagnostic: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub iterations: usize,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub total_cost: f64,
    pub total_bits: u64,
}

pub const CSV_HEADER: &str = "iter,T,measure,step_size,cum_cost,cum_bits,loss,grad_norm_sq";

impl RunTrace {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace always holds the starting point")
    }

    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.last();
        RunSummary {
            status: self.status.clone(),
            iterations: self.iterations(),
            final_loss: last.loss,
            final_grad_norm_sq: last.grad_norm_sq,
            total_cost: last.cum_cost,
            total_bits: last.cum_bits,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iter, r.t, r.measure, r.step_size, r.cum_cost, r.cum_bits, r.loss, r.grad_norm_sq
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}
