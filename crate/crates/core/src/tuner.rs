//! Improvement curves and communication-aware budget selection.
//!
//! For a gradient `g` sorted by decreasing magnitude `|g|₍₁₎ ≥ |g|₍₂₎ ≥ …`:
//!
//! * `α(T) = Σ_{i≤T} g₍ᵢ₎² / ‖g‖²`: guaranteed fraction of the full-gradient
//!   descent for top-T sparsification with step `1/L`;
//! * `β(T) = (Σ_{i≤T} |g₍ᵢ₎|)² / (T‖g‖²)`: same for sparsification plus sign
//!   quantization with step `√β/(√T·L)`;
//! * `ω(T) = ‖g‖² / E‖Q_{T,p*}(g)‖²`: same (in expectation) for stochastic
//!   sparsification with variance-optimal probabilities and step `ω/L`.
//!
//! One sort plus two prefix sums make every measure cheap per `T`. The
//! selection rule picks `argmax_T measure(T)/C(T)`, ties to the smaller `T`.

use serde::{Deserialize, Serialize};

use crate::compressors::{self, expected_sq_norm, magnitude_order, optimal_probabilities, ProbabilityVector};
use crate::costmodel::{CostModel, PayloadScheme, Regime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    Alpha,
    Beta,
    Omega,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Alpha => "alpha",
            Measure::Beta => "beta",
            Measure::Omega => "omega",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImprovementCurve {
    gradient: Vec<f64>,
    sorted_magnitudes: Vec<f64>,
    /// `prefix_sq[t] = Σ_{i<t} sorted[i]²`, length `d + 1`.
    prefix_sq: Vec<f64>,
    prefix_abs: Vec<f64>,
    norm_sq: f64,
    nnz: usize,
}

impl ImprovementCurve {
    pub fn new(g: &[f64]) -> Result<Self> {
        let sorted_magnitudes: Vec<f64> = magnitude_order(g).into_iter().map(|i| g[i].abs()).collect();
        let nnz = sorted_magnitudes.iter().take_while(|v| **v != 0.0).count();
        if nnz == 0 {
            return Err(Error::ZeroGradient);
        }
        let mut prefix_sq = Vec::with_capacity(g.len() + 1);
        let mut prefix_abs = Vec::with_capacity(g.len() + 1);
        let (mut sq, mut abs) = (0.0, 0.0);
        prefix_sq.push(0.0);
        prefix_abs.push(0.0);
        for &m in &sorted_magnitudes {
            sq += m * m;
            abs += m;
            prefix_sq.push(sq);
            prefix_abs.push(abs);
        }
        Ok(ImprovementCurve {
            gradient: g.to_vec(),
            sorted_magnitudes,
            norm_sq: sq,
            prefix_sq,
            prefix_abs,
            nnz,
        })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn sorted_magnitudes(&self) -> &[f64] {
        &self.sorted_magnitudes
    }

    pub fn prefix_sq(&self) -> &[f64] {
        &self.prefix_sq
    }

    pub fn prefix_abs(&self) -> &[f64] {
        &self.prefix_abs
    }

    fn check(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.dim() {
            return Err(Error::InvalidBudget {
                budget: t as f64,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.alpha_at(t))
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.beta_at(t))
    }

    /// `ω_{p*}(T)` from the sorted prefix sums. Budgets above the number of
    /// nonzeros are capped there, where `ω = 1`.
    pub fn omega(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0 && t <= self.dim() as f64) {
            return Err(Error::InvalidBudget {
                budget: t,
                dim: self.dim(),
            });
        }
        Ok(self.omega_at(t))
    }

    pub fn measure(&self, measure: Measure, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.measure_at(measure, t))
    }

    fn alpha_at(&self, t: usize) -> f64 {
        self.prefix_sq[t] / self.norm_sq
    }

    fn beta_at(&self, t: usize) -> f64 {
        let s = self.prefix_abs[t];
        s * s / (t as f64 * self.norm_sq)
    }

    fn omega_at(&self, t: f64) -> f64 {
        let nnz = self.nnz;
        if t >= nnz as f64 {
            return 1.0;
        }
        let total = self.prefix_abs[nnz];
        let kept = compressors::saturated_count_with(&self.sorted_magnitudes[..nnz], t, |n| {
            total - self.prefix_abs[n]
        });
        let tail = total - self.prefix_abs[kept];
        let second = self.prefix_sq[kept] + tail * tail / (t - kept as f64);
        self.norm_sq / second
    }

    fn measure_at(&self, measure: Measure, t: usize) -> f64 {
        match measure {
            Measure::Alpha => self.alpha_at(t),
            Measure::Beta => self.beta_at(t),
            Measure::Omega => self.omega_at(t as f64),
        }
    }

    /// Smallest `T` whose top-T absolute mass reaches `‖g‖₂`.
    pub fn alistarh_t(&self) -> usize {
        let norm = self.norm_sq.sqrt();
        (1..=self.nnz).find(|&t| self.prefix_abs[t] >= norm).unwrap_or(self.nnz)
    }
}

/// `ω_{p*}(T)` together with the optimal probabilities.
pub fn omega(g: &[f64], t: f64) -> Result<(f64, ProbabilityVector)> {
    let p = optimal_probabilities(g, t)?;
    let w = compressors::norm_sq(g) / expected_sq_norm(g, &p);
    Ok((w, p))
}

/// `ω_p(T)` for arbitrary keep-probabilities.
pub fn omega_for(g: &[f64], p: &ProbabilityVector) -> Result<f64> {
    let n = compressors::norm_sq(g);
    if n == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(n / expected_sq_norm(g, p))
}

pub fn alistarh_t(g: &[f64]) -> Result<usize> {
    Ok(ImprovementCurve::new(g)?.alistarh_t())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerResult {
    pub t_star: usize,
    pub improvement: f64,
    pub cost: f64,
    pub efficiency: f64,
    pub p_star: Option<ProbabilityVector>,
}

fn finish(curve: &ImprovementCurve, measure: Measure, model: &CostModel, t_star: usize) -> Result<TunerResult> {
    let (improvement, p_star) = match measure {
        Measure::Omega => {
            let (w, p) = omega(curve.gradient(), t_star as f64)?;
            (w, Some(p))
        }
        m => (curve.measure_at(m, t_star), None),
    };
    let cost = model.cost(t_star);
    Ok(TunerResult {
        t_star,
        improvement,
        cost,
        efficiency: improvement / cost,
        p_star,
    })
}

fn check_model(curve: &ImprovementCurve, model: &CostModel) -> Result<()> {
    if model.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            actual: model.dim(),
        });
    }
    Ok(())
}

/// Relative gap below which two efficiencies count as tied. Keeps exact
/// ties (rank-one gradients under payload costs) from being decided by
/// rounding in the prefix sums.
const TIE_RTOL: f64 = 1e-9;

fn beats(e: f64, best: f64) -> bool {
    best == f64::NEG_INFINITY || e > best + TIE_RTOL * best.abs()
}

/// Argmax of `measure(T)/C(T)` over the candidates, ties to the earliest.
fn argmax(curve: &ImprovementCurve, measure: Measure, model: &CostModel, candidates: impl Iterator<Item = usize>) -> usize {
    let mut best = (0usize, f64::NEG_INFINITY);
    for t in candidates {
        let e = curve.measure_at(measure, t) / model.cost(t);
        if beats(e, best.1) {
            best = (t, e);
        }
    }
    best.0
}

/// Communication-aware budget: `argmax_T measure(T)/C(T)`.
///
/// * `Alpha` under payload or affine costs: ascending scan that stops at the
///   first efficiency decrease (the ratio is quasi-concave).
/// * `Alpha` under sparse packet costs: only `T ∈ {k·τ_max} ∪ {d}`, since the
///   cost is flat on each block and `α` increases inside it.
/// * everything else: exhaustive scan of `[1, d]` (`[1, nnz]` for `Omega`).
pub fn select_t(curve: &ImprovementCurve, measure: Measure, model: &CostModel) -> Result<TunerResult> {
    check_model(curve, model)?;
    let d = curve.dim();
    let t_star = match (measure, model.regime()) {
        (Measure::Alpha, Regime::Payload | Regime::Affine { .. }) => {
            let mut best = (1usize, curve.alpha_at(1) / model.cost(1));
            let mut prev = best.1;
            for t in 2..=d {
                let e = curve.alpha_at(t) / model.cost(t);
                if beats(e, best.1) {
                    best = (t, e);
                } else if e < prev - TIE_RTOL * prev.abs() {
                    break;
                }
                prev = e;
            }
            best.0
        }
        (Measure::Alpha, Regime::Packet { .. }) if model.scheme() == PayloadScheme::Sparse => {
            let tau = model.tau_max()?;
            let blocks = d.div_ceil(tau);
            argmax(curve, measure, model, (1..=blocks).map(|k| (k * tau).min(d)))
        }
        (Measure::Omega, _) => argmax(curve, measure, model, 1..=curve.nnz()),
        _ => argmax(curve, measure, model, 1..=d),
    };
    finish(curve, measure, model, t_star)
}

/// Exhaustive reference for [`select_t`]: evaluates every `T ∈ [1, d]`.
pub fn select_t_bruteforce(g: &[f64], measure: Measure, model: &CostModel) -> Result<TunerResult> {
    let curve = ImprovementCurve::new(g)?;
    check_model(&curve, model)?;
    let t_star = argmax(&curve, measure, model, 1..=curve.dim());
    finish(&curve, measure, model, t_star)
}
