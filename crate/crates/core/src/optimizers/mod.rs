//! Iteration drivers.
//!
//! Single-node steps (all use the exact gradient `g = ∇F(x)`):
//!
//! | scheme        | budget                         | step size        | update              |
//! |---------------|--------------------------------|------------------|---------------------|
//! | full GD       | `d`                            | `1/L`            | `x − γ g`           |
//! | fixed T       | `T`                            | `1/L`            | `x − γ Q_T(g)`      |
//! | CAT sparse    | `argmax α(T)/C(T)`             | `1/L`            | `x − γ Q_T(g)`      |
//! | CAT S+Q       | `argmax β(T)/C(T)`             | `√β(T)/(√T·L)`   | `x − γ Q^SQ_T(g)`   |
//! | Alistarh S+Q  | smallest `T` with `Σ|g| ≥ ‖g‖` | `√β(T)/(√T·L)`   | `x − γ Q^SQ_T(g)`   |
//! | CAT stochastic| `argmax ω(T)/C(T)`, `p*`       | `ω(T)/L`         | `x − γ Q_{T,p*}(g)` |
//! | hybrid `S`    | CAT S+Q every `S` iterations   | `√β(T)/(√T·L)`   | `x − γ Q^SQ_T(g)`   |
//!
//! The multi-node loop lives in [`multinode`].

pub mod multinode;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compressors::{sparsify_quantize, stochastic_sparsify, top_t_sparsify, DenseVector};
use crate::costmodel::{CostModel, PayloadScheme};
use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::rng::{self, StreamRng};
use crate::tuner::{select_t, ImprovementCurve, Measure};

pub use multinode::{aggregate_omega, multinode_step, run_multinode, run_multinode_observed, GradientOracle, MultinodeStep, ShardWorker, WorkerRngs};
pub use trace::{IterRecord, RunStatus, RunSummary, RunTrace, CSV_HEADER};

/// Consecutive objective increases tolerated under lemma-exact steps.
pub const DIVERGENCE_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    FullGd,
    FixedT(usize),
    CatSparse,
    CatSq,
    CatStochastic,
    AlistarhSq,
    /// CAT S+Q that re-tunes `T` only every `period` iterations.
    Hybrid { period: usize },
}

impl Scheme {
    pub fn payload_scheme(self) -> PayloadScheme {
        match self {
            Scheme::CatSq | Scheme::AlistarhSq | Scheme::Hybrid { .. } => PayloadScheme::SparseQuantized,
            _ => PayloadScheme::Sparse,
        }
    }

    pub fn measure(self) -> Measure {
        match self {
            Scheme::CatSq | Scheme::AlistarhSq | Scheme::Hybrid { .. } => Measure::Beta,
            Scheme::CatStochastic => Measure::Omega,
            _ => Measure::Alpha,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::FullGd => write!(f, "full-gd"),
            Scheme::FixedT(t) => write!(f, "fixed-t:T={t}"),
            Scheme::CatSparse => write!(f, "cat-sparse"),
            Scheme::CatSq => write!(f, "cat-sq"),
            Scheme::CatStochastic => write!(f, "cat-stochastic"),
            Scheme::AlistarhSq => write!(f, "alistarh-sq"),
            Scheme::Hybrid { period } => write!(f, "hybrid:S={period}"),
        }
    }
}

fn keyed_usize(rest: &str, key: &str, what: &str) -> Result<usize> {
    let v = rest
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .unwrap_or(rest);
    v.trim()
        .parse::<usize>()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::Config(format!("{what}: expected {key}=<positive integer>, got {rest:?}")))
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        Ok(match head {
            "full-gd" | "gd" => Scheme::FullGd,
            "fixed-t" => Scheme::FixedT(keyed_usize(rest, "T", "fixed-t")?),
            "cat-sparse" => Scheme::CatSparse,
            "cat-sq" => Scheme::CatSq,
            "cat-stochastic" | "cat-ss" => Scheme::CatStochastic,
            "alistarh-sq" => Scheme::AlistarhSq,
            "hybrid" => Scheme::Hybrid {
                period: keyed_usize(rest, "S", "hybrid")?,
            },
            other => return Err(Error::Config(format!("unknown scheme {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    /// The value that makes the scheme's descent lemma hold.
    LemmaExact,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    GradNormSq(f64),
    LossGap { eps: f64, f_star: f64 },
}

impl Target {
    pub fn is_met(&self, loss: f64, grad_norm_sq: f64) -> bool {
        match *self {
            Target::GradNormSq(eps) => grad_norm_sq <= eps,
            Target::LossGap { eps, f_star } => loss - f_star <= eps,
        }
    }

    pub fn eps(&self) -> f64 {
        match *self {
            Target::GradNormSq(eps) | Target::LossGap { eps, .. } => eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub scheme: Scheme,
    /// Regime and precision; the payload formula is taken from the scheme.
    pub cost_model: CostModel,
    pub max_iters: usize,
    pub target: Target,
    pub seed: u64,
    pub step_size: StepSize,
    pub n_workers: usize,
    /// Mini-batch size per worker; `0` means the whole shard.
    pub batch_size: usize,
    pub sigma_sq_bound: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl OptimizerConfig {
    pub fn new(scheme: Scheme, cost_model: CostModel, target: Target, max_iters: usize) -> Self {
        OptimizerConfig {
            scheme,
            cost_model,
            max_iters,
            target,
            seed: 0,
            step_size: StepSize::LemmaExact,
            n_workers: 1,
            batch_size: 0,
            sigma_sq_bound: None,
            x0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.eps().is_nan() || self.target.eps() <= 0.0 {
            return Err(Error::Config("target ε must be positive".into()));
        }
        if self.n_workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if let StepSize::Manual(g) = self.step_size {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(format!("manual step size must be positive, got {g}")));
            }
        }
        match self.scheme {
            Scheme::FixedT(t) if t > self.cost_model.dim() => Err(Error::InvalidBudget {
                budget: t as f64,
                dim: self.cost_model.dim(),
            }),
            Scheme::Hybrid { period: 0 } | Scheme::FixedT(0) => Err(Error::Config("budget and period must be ≥ 1".into())),
            _ => Ok(()),
        }
    }
}

/// What a single step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Entries actually transmitted.
    pub t: usize,
    pub measure: f64,
    pub step_size: f64,
    pub bits: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub x: Vec<f64>,
    pub record: StepRecord,
}

fn axpy(x: &[f64], gamma: f64, direction: &[f64]) -> Vec<f64> {
    x.iter().zip(direction).map(|(xi, di)| xi - gamma * di).collect()
}

fn sparse_axpy(x: &[f64], gamma: f64, entries: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
    let mut out = x.to_vec();
    for (i, v) in entries {
        out[i] -= gamma * v;
    }
    out
}

fn gamma_or(mode: StepSize, exact: f64) -> f64 {
    match mode {
        StepSize::LemmaExact => exact,
        StepSize::Manual(g) => g,
    }
}

fn record(model: &CostModel, t: usize, measure: f64, step_size: f64) -> StepRecord {
    StepRecord {
        t,
        measure,
        step_size,
        bits: model.payload_bits(t),
        cost: model.cost(t),
    }
}

/// Top-T step with `γ = 1/L`. `budget = None` lets the tuner choose.
pub fn sparse_update(x: &[f64], g: &[f64], l: f64, model: &CostModel, budget: Option<usize>, mode: StepSize) -> Result<Step> {
    let curve = ImprovementCurve::new(g)?;
    let t = match budget {
        Some(t) => t,
        None => select_t(&curve, Measure::Alpha, model)?.t_star,
    };
    let q = top_t_sparsify(g, t)?;
    let gamma = gamma_or(mode, 1.0 / l);
    Ok(Step {
        x: sparse_axpy(x, gamma, q.entries().iter().copied()),
        record: record(model, q.len(), curve.alpha(t)?, gamma),
    })
}

/// Sparsify-and-quantize step with `γ = √β(T)/(√T·L)`.
pub fn sq_update(x: &[f64], g: &[f64], l: f64, model: &CostModel, budget: SqBudget, mode: StepSize) -> Result<(Step, usize)> {
    let curve = ImprovementCurve::new(g)?;
    let t = match budget {
        SqBudget::Cat => select_t(&curve, Measure::Beta, model)?.t_star,
        SqBudget::Alistarh => curve.alistarh_t(),
        SqBudget::Fixed(t) => t,
    };
    let beta = curve.beta(t)?;
    let q = sparsify_quantize(g, t)?;
    let gamma = gamma_or(mode, beta.sqrt() / ((t as f64).sqrt() * l));
    let m = q.magnitude();
    let step = Step {
        x: sparse_axpy(x, gamma, q.entries().iter().map(|&(i, s)| (i, s.apply(m)))),
        record: record(model, q.len(), beta, gamma),
    };
    Ok((step, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqBudget {
    Cat,
    Alistarh,
    Fixed(usize),
}

/// Stochastic-sparsification step with variance-optimal `p*` and `γ = ω/L`.
pub fn ss_update(x: &[f64], g: &[f64], l: f64, model: &CostModel, rng: &mut StreamRng, mode: StepSize) -> Result<Step> {
    let curve = ImprovementCurve::new(g)?;
    let tuned = select_t(&curve, Measure::Omega, model)?;
    let p = tuned.p_star.expect("omega selection carries probabilities");
    let q = stochastic_sparsify(g, &p, rng)?;
    let gamma = gamma_or(mode, tuned.improvement / l);
    Ok(Step {
        x: sparse_axpy(x, gamma, q.entries().iter().copied()),
        record: record(model, q.len(), tuned.improvement, gamma),
    })
}

pub fn full_gd_update(x: &[f64], g: &[f64], l: f64, model: &CostModel, mode: StepSize) -> Step {
    let gamma = gamma_or(mode, 1.0 / l);
    Step {
        x: axpy(x, gamma, g),
        record: StepRecord {
            t: g.len(),
            measure: 1.0,
            step_size: gamma,
            bits: model.dense_bits(),
            cost: model.dense_cost(),
        },
    }
}

/// `x⁺ = x − (1/L)·Q_{T*}(∇F(x))` with `T*` maximizing `α(T)/C(T)`.
/// A zero gradient yields [`Error::ZeroGradient`].
pub fn cat_sparse_step<P: Objective + ?Sized>(x: &[f64], problem: &P, model: &CostModel) -> Result<Step> {
    let g = problem.gradient(x)?;
    sparse_update(x, &g, problem.smoothness(), model, None, StepSize::LemmaExact)
}

pub fn cat_sq_step<P: Objective + ?Sized>(x: &[f64], problem: &P, model: &CostModel) -> Result<Step> {
    let g = problem.gradient(x)?;
    Ok(sq_update(x, &g, problem.smoothness(), model, SqBudget::Cat, StepSize::LemmaExact)?.0)
}

pub fn alistarh_sq_step<P: Objective + ?Sized>(x: &[f64], problem: &P, model: &CostModel) -> Result<Step> {
    let g = problem.gradient(x)?;
    Ok(sq_update(x, &g, problem.smoothness(), model, SqBudget::Alistarh, StepSize::LemmaExact)?.0)
}

pub fn cat_ss_step<P: Objective + ?Sized>(x: &[f64], problem: &P, model: &CostModel, rng: &mut StreamRng) -> Result<Step> {
    let g = problem.gradient(x)?;
    ss_update(x, &g, problem.smoothness(), model, rng, StepSize::LemmaExact)
}

pub(crate) struct Loop {
    pub records: Vec<IterRecord>,
    increases: usize,
}

impl Loop {
    pub fn start(loss: f64, grad_norm_sq: f64, workers: usize) -> Self {
        Loop {
            records: vec![IterRecord {
                iter: 0,
                t: 0,
                worker_t: vec![0; workers],
                measure: 0.0,
                step_size: 0.0,
                cum_cost: 0.0,
                cum_bits: 0,
                loss,
                grad_norm_sq,
            }],
            increases: 0,
        }
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("nonempty")
    }

    /// Appends a row; returns a divergence status when the guard trips.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        worker_t: Vec<usize>,
        measure: f64,
        step_size: f64,
        cost: f64,
        bits: u64,
        loss: f64,
        grad_norm_sq: f64,
        guard: bool,
    ) -> Option<RunStatus> {
        let prev = self.last().clone();
        self.increases = if loss > prev.loss { self.increases + 1 } else { 0 };
        let iter = prev.iter + 1;
        self.records.push(IterRecord {
            iter,
            t: worker_t.iter().sum(),
            worker_t,
            measure,
            step_size,
            cum_cost: prev.cum_cost + cost,
            cum_bits: prev.cum_bits + bits,
            loss,
            grad_norm_sq,
        });
        (guard && self.increases >= DIVERGENCE_WINDOW).then(|| RunStatus::Diverged {
            iter,
            diagnostic: format!(
                "objective increased for {DIVERGENCE_WINDOW} consecutive iterations under lemma-exact steps; \
                 the smoothness constant is probably underestimated"
            ),
        })
    }
}

/// Runs a single-node scheme until the target or `max_iters` steps.
pub fn run<P: Objective + ?Sized>(config: &OptimizerConfig, problem: &P) -> Result<RunTrace> {
    run_observed(config, problem, |_, _| Ok(()))
}

/// [`run`], calling `observe(x, ∇F(x))` at every iterate including the start.
pub fn run_observed<P, O>(config: &OptimizerConfig, problem: &P, mut observe: O) -> Result<RunTrace>
where
    P: Objective + ?Sized,
    O: FnMut(&[f64], &[f64]) -> Result<()>,
{
    config.validate()?;
    let d = problem.dim();
    let model = config.cost_model.with_scheme(config.scheme.payload_scheme())?;
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: model.dim(),
        });
    }
    let l = problem.smoothness();
    let mut x = match &config.x0 {
        Some(x0) => DenseVector::new(x0.clone())?.into_inner(),
        None => vec![0.0; d],
    };
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x.len() });
    }
    let mut g = problem.gradient(&x)?;
    observe(&x, &g)?;
    let mut lp = Loop::start(problem.loss(&x)?, g.norm_sq(), 1);
    let guard = config.step_size == StepSize::LemmaExact;
    let mut hybrid_t = None;

    for i in 0..config.max_iters {
        let last = lp.last();
        if last.grad_norm_sq == 0.0 {
            return Ok(RunTrace { records: lp.records, status: RunStatus::Converged });
        }
        if config.target.is_met(last.loss, last.grad_norm_sq) {
            return Ok(RunTrace { records: lp.records, status: RunStatus::TargetReached });
        }
        let mode = config.step_size;
        let step = match config.scheme {
            Scheme::FullGd => full_gd_update(&x, &g, l, &model, mode),
            Scheme::FixedT(t) => sparse_update(&x, &g, l, &model, Some(t), mode)?,
            Scheme::CatSparse => sparse_update(&x, &g, l, &model, None, mode)?,
            Scheme::CatSq => sq_update(&x, &g, l, &model, SqBudget::Cat, mode)?.0,
            Scheme::AlistarhSq => sq_update(&x, &g, l, &model, SqBudget::Alistarh, mode)?.0,
            Scheme::Hybrid { period } => {
                let budget = match hybrid_t {
                    Some(t) if i % period != 0 => SqBudget::Fixed(t),
                    _ => SqBudget::Cat,
                };
                let (step, t) = sq_update(&x, &g, l, &model, budget, mode)?;
                hybrid_t = Some(t);
                step
            }
            Scheme::CatStochastic => {
                let mut r = rng::stream(config.seed, i as u64, 0);
                ss_update(&x, &g, l, &model, &mut r, mode)?
            }
        };
        x = step.x;
        g = problem.gradient(&x)?;
        observe(&x, &g)?;
        let rec = step.record;
        let loss = problem.loss(&x)?;
        if let Some(status) = lp.push(vec![rec.t], rec.measure, rec.step_size, rec.cost, rec.bits, loss, g.norm_sq(), guard) {
            return Ok(RunTrace { records: lp.records, status });
        }
    }
    let last = lp.last();
    let status = if config.target.is_met(last.loss, last.grad_norm_sq) {
        RunStatus::TargetReached
    } else {
        RunStatus::MaxIters
    };
    Ok(RunTrace { records: lp.records, status })
}

/// Long full-gradient run used as the reference optimum for loss-gap
/// targets. Stops once `‖∇F‖² ≤ tol` or after `max_iters`.
pub fn reference_optimum<P: Objective + ?Sized>(problem: &P, tol: f64, max_iters: usize) -> Result<(Vec<f64>, f64)> {
    if let Some(f) = problem.known_minimum() {
        return Ok((vec![0.0; problem.dim()], f));
    }
    let l = problem.smoothness();
    let mut x = vec![0.0; problem.dim()];
    for _ in 0..max_iters {
        let g = problem.gradient(&x)?;
        if g.norm_sq() <= tol {
            break;
        }
        x = axpy(&x, 1.0 / l, &g);
    }
    let f = problem.loss(&x)?;
    Ok((x, f))
}

/// Descent guaranteed by a scheme's lemma: `measure/(2L)·‖∇F‖²`.
pub fn guaranteed_descent(measure: f64, l: f64, grad_norm_sq: f64) -> f64 {
    measure / (2.0 * l) * grad_norm_sq
}
