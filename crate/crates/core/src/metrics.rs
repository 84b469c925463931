//! Run analysis: empirical improvement profiles, iteration-complexity
//! bounds, and communication-to-accuracy accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compressors::norm_sq;
use crate::error::{Error, Result};
use crate::optimizers::{GradientOracle, RunTrace, Target};
use crate::problems::Objective;
use crate::rng;
use crate::tuner::{ImprovementCurve, Measure};

/// Running minimum over a run of a measure at every budget `T ∈ [1, d]`
/// (`ᾱ_T`, `β̄_T` or `ω̄_T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub measure: Measure,
    pub dim: usize,
    /// `minima[T-1]`; `+∞` until the first observation.
    pub minima: Vec<f64>,
}

impl AlphaProfile {
    pub fn new(measure: Measure, dim: usize) -> Self {
        AlphaProfile {
            measure,
            dim,
            minima: vec![f64::INFINITY; dim],
        }
    }

    pub fn observe(&mut self, curve: &ImprovementCurve) -> Result<()> {
        if curve.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: curve.dim(),
            });
        }
        for (t, m) in (1..=self.dim).zip(self.minima.iter_mut()) {
            *m = m.min(curve.measure(self.measure, t)?);
        }
        Ok(())
    }

    /// Observes the gradient at every iterate. Zero gradients are skipped.
    pub fn observe_gradient(&mut self, g: &[f64]) -> Result<()> {
        match ImprovementCurve::new(g) {
            Ok(c) => self.observe(&c),
            Err(Error::ZeroGradient) => Ok(()),
            Err(e) => Err(e),
        }
    }

    pub fn min_at(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.minima[t - 1])
    }

    /// `SpeedUp(T) = ᾱ_T·d/T`.
    pub fn speedup(&self, t: usize) -> Result<f64> {
        Ok(self.min_at(t)? * self.dim as f64 / t as f64)
    }

    pub fn speedup_curve(&self) -> Vec<f64> {
        (1..=self.dim).map(|t| self.minima[t - 1] * self.dim as f64 / t as f64).collect()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.dim {
            return Err(Error::InvalidBudget {
                budget: t as f64,
                dim: self.dim,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemClass {
    StronglyConvex,
    Convex,
    Nonconvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Gradient descent with deterministic sparsification.
    Deterministic,
    /// Multi-node SGD with stochastic sparsification.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    NoCompression,
    /// Divides by the measured lower bound `ᾱ_T` (or `ω̄_T`).
    DataDependent(f64),
    /// Multiplies by `d/T`.
    WorstCase { t: usize, d: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub l: f64,
    /// Required for strongly convex bounds; `κ = L/μ`.
    pub mu: Option<f64>,
    /// `F(x⁰) − F*`.
    pub eps0: f64,
    pub eps: f64,
    /// Bound on `‖xⁱ − x*‖`, required for convex bounds.
    pub r: Option<f64>,
    pub sigma_sq: f64,
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

/// Iteration bound for reaching `ε`-accuracy. Logarithms are natural.
///
/// ```text
/// A_SC = κ ln(ε₀/ε)     B_SC = 2(1 + 2σ²/(μεL))(A_SC + κ ln 2)
/// A_C  = 2LR²/ε         B_C  = 2(1 + 2σ²/(εL)) A_C
/// A_NC = 2Lε₀/ε         B_NC = 2(1 + 2σ²/ε) A_NC
/// ```
///
/// Returns `0` when `ε ≥ ε₀`.
pub fn theory_iters(class: ProblemClass, setting: Setting, params: &TheoryParams, bound: Bound) -> Result<f64> {
    let l = positive(params.l, "L")?;
    let eps = positive(params.eps, "ε")?;
    if !(params.eps0.is_finite() && params.eps0 >= 0.0) || params.sigma_sq < 0.0 {
        return Err(Error::Config("ε₀ and σ² must be nonnegative".into()));
    }
    if eps >= params.eps0 {
        return Ok(0.0);
    }
    let s2 = params.sigma_sq;
    let base = match class {
        ProblemClass::StronglyConvex => {
            let mu = positive(params.mu.ok_or_else(|| Error::Config("μ is required".into()))?, "μ")?;
            let kappa = l / mu;
            let a = kappa * (params.eps0 / eps).ln();
            match setting {
                Setting::Deterministic => a,
                Setting::Stochastic => 2.0 * (1.0 + 2.0 * s2 / (mu * eps * l)) * (a + kappa * 2f64.ln()),
            }
        }
        ProblemClass::Convex => {
            let r = params.r.ok_or_else(|| Error::Config("R is required".into()))?;
            let a = 2.0 * l * r * r / eps;
            match setting {
                Setting::Deterministic => a,
                Setting::Stochastic => 2.0 * (1.0 + 2.0 * s2 / (eps * l)) * a,
            }
        }
        ProblemClass::Nonconvex => {
            let a = 2.0 * l * params.eps0 / eps;
            match setting {
                Setting::Deterministic => a,
                Setting::Stochastic => 2.0 * (1.0 + 2.0 * s2 / eps) * a,
            }
        }
    };
    Ok(match bound {
        Bound::NoCompression => base,
        Bound::DataDependent(m) => base / positive(m, "measure lower bound")?,
        Bound::WorstCase { t, d } => {
            if t == 0 || t > d {
                return Err(Error::InvalidBudget { budget: t as f64, dim: d });
            }
            base * (d as f64 / t as f64)
        }
    })
}

/// Fixed step size that makes the stochastic bound hold for target `ε`:
///
/// ```text
/// nonconvex        γ = ω̄/(2L) · 1/(2σ²/ε + 1)
/// convex           γ = ω̄/2 · 1/(2σ²/ε + L)
/// strongly convex  γ = ω̄/2 · 1/(2σ²/(με) + L)
/// ```
pub fn stochastic_step_size(class: ProblemClass, omega_bar: f64, l: f64, mu: Option<f64>, sigma_sq: f64, eps: f64) -> Result<f64> {
    let w = positive(omega_bar, "ω̄")?;
    let l = positive(l, "L")?;
    let eps = positive(eps, "ε")?;
    Ok(match class {
        ProblemClass::Nonconvex => w / (2.0 * l) / (2.0 * sigma_sq / eps + 1.0),
        ProblemClass::Convex => w / 2.0 / (2.0 * sigma_sq / eps + l),
        ProblemClass::StronglyConvex => {
            let mu = positive(mu.ok_or_else(|| Error::Config("μ is required".into()))?, "μ")?;
            w / 2.0 / (2.0 * sigma_sq / (mu * eps) + l)
        }
    })
}

/// First iteration whose record meets the target.
pub fn iterations_to_accuracy(trace: &RunTrace, target: &Target) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| target.is_met(r.loss, r.grad_norm_sq))
        .map(|r| r.iter)
}

/// Cumulative cost at the first iteration meeting the target; `None` if it
/// was never met.
pub fn bits_to_accuracy(trace: &RunTrace, target: &Target) -> Option<f64> {
    let i = iterations_to_accuracy(trace, target)?;
    Some(trace.records[i].cum_cost)
}

/// `max ‖g_j(x) − ∇F(x)‖²` over `probes` draws per worker.
pub fn estimate_sigma_sq<W: GradientOracle, P: Objective + ?Sized>(
    workers: &[W],
    objective: &P,
    x: &[f64],
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let full = objective.gradient(x)?;
    let mut worst = 0.0f64;
    for k in 0..probes {
        for (j, w) in workers.iter().enumerate() {
            let mut r = rng::sampling_stream(seed, k as u64, j as u16);
            let g = w.stochastic_gradient(x, &mut r)?;
            let diff: Vec<f64> = g.iter().zip(full.iter()).map(|(a, b)| a - b).collect();
            worst = worst.max(norm_sq(&diff));
        }
    }
    Ok(worst)
}

/// JSON report written next to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub speedup_curve: Vec<f64>,
    pub alpha_profile: Vec<f64>,
    pub bits_to_eps: BTreeMap<String, Option<f64>>,
}

impl MetricsReport {
    pub fn new(profile: &AlphaProfile) -> Self {
        MetricsReport {
            speedup_curve: profile.speedup_curve(),
            alpha_profile: profile.minima.clone(),
            bits_to_eps: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
