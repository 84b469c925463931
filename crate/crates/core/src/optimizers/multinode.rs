//! Compressed SGD over `n` workers and one master.
//!
//! Each worker draws a stochastic gradient of its own objective `f_j`,
//! CAT-selects `(T_j, p_j)` under the `ω` measure, and sends
//! `Q_{T_j,p_j}(g_j)`. The master averages the messages in worker-id order
//! and steps with `γ = ω/(2L)`, where `ω = (Σ_j 1/(n·ω_j))⁻¹` over workers
//! that sent a message.

use crate::compressors::{stochastic_sparsify, Compressed, DenseVector, SparseGradient, SparseKind};
use crate::costmodel::CostModel;
use crate::error::{Error, Result};
use crate::problems::{LogisticRegression, Objective, Problem};
use crate::rng::{self, StreamRng};
use crate::transport::{self, frame_encode, Frame, SimulatedMaster};
use crate::tuner::{select_t, ImprovementCurve, Measure};

use super::{Loop, OptimizerConfig, RunStatus, RunTrace, Scheme, StepSize};

/// A worker's source of (possibly stochastic) gradients.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    /// Smoothness of the worker's objective `f_j`.
    fn smoothness(&self) -> f64;
    fn stochastic_gradient(&self, x: &[f64], rng: &mut StreamRng) -> Result<DenseVector>;
}

/// A logistic shard sampled in mini-batches without replacement.
#[derive(Debug, Clone)]
pub struct ShardWorker {
    pub problem: LogisticRegression,
    /// `0` means the whole shard (deterministic gradient).
    pub batch: usize,
}

impl ShardWorker {
    pub fn split(problem: &LogisticRegression, workers: usize, batch: usize) -> Result<Vec<ShardWorker>> {
        Ok(problem
            .split(workers)?
            .into_iter()
            .map(|problem| ShardWorker { problem, batch })
            .collect())
    }
}

impl GradientOracle for ShardWorker {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn smoothness(&self) -> f64 {
        self.problem.smoothness()
    }

    fn stochastic_gradient(&self, x: &[f64], rng: &mut StreamRng) -> Result<DenseVector> {
        self.problem.minibatch_gradient(x, self.batch, rng)
    }
}

impl GradientOracle for Problem {
    fn dim(&self) -> usize {
        Objective::dim(self)
    }

    fn smoothness(&self) -> f64 {
        Objective::smoothness(self)
    }

    fn stochastic_gradient(&self, x: &[f64], _rng: &mut StreamRng) -> Result<DenseVector> {
        self.gradient(x)
    }
}

/// Per-worker random streams for one iteration.
pub struct WorkerRngs {
    pub sampling: StreamRng,
    pub compression: StreamRng,
}

impl WorkerRngs {
    pub fn new(seed: u64, iter: u64, worker: u16) -> Self {
        WorkerRngs {
            sampling: rng::sampling_stream(seed, iter, worker),
            compression: rng::stream(seed, iter, worker),
        }
    }
}

/// One worker's contribution to a round.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerMessage {
    pub message: Compressed,
    /// `ω_j(T_j)`, or `None` when the gradient was zero.
    pub omega: Option<f64>,
}

/// Outcome of a multi-node iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinodeStep {
    pub x: Vec<f64>,
    pub worker_t: Vec<usize>,
    /// Aggregate `ω`, `0` when every worker was silent.
    pub omega: f64,
    pub step_size: f64,
    pub cost: f64,
    pub bits: u64,
}

/// `(Σ_j 1/(n·ω_j))⁻¹` over the workers that sent a message.
pub fn aggregate_omega(omegas: &[Option<f64>]) -> f64 {
    let n = omegas.len() as f64;
    let inv: f64 = omegas.iter().flatten().map(|w| 1.0 / (n * w)).sum();
    if inv == 0.0 {
        0.0
    } else {
        1.0 / inv
    }
}

/// Worker side: sample, tune, compress, round to the wire precision.
pub fn worker_message<W: GradientOracle + ?Sized>(
    worker: &W,
    x: &[f64],
    model: &CostModel,
    rngs: &mut WorkerRngs,
) -> Result<WorkerMessage> {
    let g = worker.stochastic_gradient(x, &mut rngs.sampling)?;
    let curve = match ImprovementCurve::new(&g) {
        Ok(c) => c,
        Err(Error::ZeroGradient) => {
            return Ok(WorkerMessage {
                message: Compressed::Sparse(SparseGradient::empty(g.len(), SparseKind::Stochastic)),
                omega: None,
            })
        }
        Err(e) => return Err(e),
    };
    let tuned = select_t(&curve, Measure::Omega, model)?;
    let p = tuned.p_star.expect("omega selection carries probabilities");
    let q = stochastic_sparsify(&g, &p, &mut rngs.compression)?.rounded(model.fpp());
    Ok(WorkerMessage {
        message: Compressed::Sparse(q),
        omega: Some(tuned.improvement),
    })
}

/// One round: every worker compresses, the master averages in worker-id
/// order and steps. With `via_transport` the messages travel as encoded
/// frames through [`transport::simulate_round`]; the result is identical.
#[allow(clippy::too_many_arguments)]
pub fn multinode_step<W: GradientOracle>(
    x: &[f64],
    workers: &[W],
    step_size: StepSize,
    model: &CostModel,
    seed: u64,
    iter: u32,
    via_transport: bool,
) -> Result<MultinodeStep> {
    let n = workers.len();
    let worker_count = u16::try_from(n).map_err(|_| Error::Config(format!("{n} workers exceed the frame id range")))?;
    if n == 0 {
        return Err(Error::Config("need at least one worker".into()));
    }
    let l = workers.iter().map(GradientOracle::smoothness).fold(0.0, f64::max);
    let mut messages = Vec::with_capacity(n);
    for (j, w) in workers.iter().enumerate() {
        let mut rngs = WorkerRngs::new(seed, u64::from(iter), j as u16);
        messages.push(worker_message(w, x, model, &mut rngs)?);
    }
    let omegas: Vec<Option<f64>> = messages.iter().map(|m| m.omega).collect();
    let omega = aggregate_omega(&omegas);

    let (aggregate, worker_t, cost, bits) = if via_transport {
        let frames = messages
            .iter()
            .enumerate()
            .map(|(j, m)| {
                frame_encode(&Frame {
                    iter,
                    worker_id: j as u16,
                    fpp: model.fpp(),
                    message: m.message.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let master = SimulatedMaster {
            iter,
            workers: worker_count,
            dim: x.len(),
        };
        let round = transport::simulate_round(&master, &frames, model)?;
        (round.aggregate, round.worker_t, round.cost, round.bits)
    } else {
        let worker_t: Vec<usize> = messages.iter().map(|m| m.message.len()).collect();
        let cost = worker_t.iter().map(|&t| model.cost(t)).sum();
        let bits = worker_t.iter().map(|&t| model.payload_bits(t)).sum();
        let agg = transport::aggregate(x.len(), n, messages.iter().map(|m| &m.message));
        (agg, worker_t, cost, bits)
    };

    let gamma = match step_size {
        StepSize::LemmaExact => omega / (2.0 * l),
        StepSize::Manual(g) => g,
    };
    let x_next = x.iter().zip(&aggregate).map(|(xi, ai)| xi - gamma * ai).collect();
    Ok(MultinodeStep {
        x: x_next,
        worker_t,
        omega,
        step_size: gamma,
        cost,
        bits,
    })
}

/// Multi-node CAT stochastic sparsification. `objective` is the average of
/// the workers' objectives and is used only for the trace and the target.
pub fn run_multinode<W: GradientOracle, P: Objective + ?Sized>(
    config: &OptimizerConfig,
    workers: &[W],
    objective: &P,
    via_transport: bool,
) -> Result<RunTrace> {
    run_multinode_observed(config, workers, objective, via_transport, |_, _| Ok(()))
}

/// [`run_multinode`], calling `observe(x, ∇F(x))` at every iterate.
pub fn run_multinode_observed<W, P, O>(
    config: &OptimizerConfig,
    workers: &[W],
    objective: &P,
    via_transport: bool,
    mut observe: O,
) -> Result<RunTrace>
where
    W: GradientOracle,
    P: Objective + ?Sized,
    O: FnMut(&[f64], &[f64]) -> Result<()>,
{
    config.validate()?;
    if config.scheme != Scheme::CatStochastic {
        return Err(Error::NotApplicable("multi-node runs use cat-stochastic"));
    }
    if workers.len() != config.n_workers {
        return Err(Error::Config(format!(
            "config expects {} workers, got {}",
            config.n_workers,
            workers.len()
        )));
    }
    let d = objective.dim();
    if let Some(w) = workers.iter().find(|w| w.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: w.dim() });
    }
    let model = config.cost_model.with_scheme(Scheme::CatStochastic.payload_scheme())?;
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: model.dim(),
        });
    }
    let mut x = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x.len() });
    }
    let g0 = objective.gradient(&x)?;
    observe(&x, &g0)?;
    let mut lp = Loop::start(objective.loss(&x)?, g0.norm_sq(), workers.len());
    let guard = config.step_size == StepSize::LemmaExact;

    for i in 0..config.max_iters {
        let last = lp.last();
        if last.grad_norm_sq == 0.0 {
            return Ok(RunTrace { records: lp.records, status: RunStatus::Converged });
        }
        if config.target.is_met(last.loss, last.grad_norm_sq) {
            return Ok(RunTrace { records: lp.records, status: RunStatus::TargetReached });
        }
        let iter = u32::try_from(i).map_err(|_| Error::Config("iteration count exceeds the frame range".into()))?;
        let step = multinode_step(&x, workers, config.step_size, &model, config.seed, iter, via_transport)?;
        x = step.x;
        let loss = objective.loss(&x)?;
        let g = objective.gradient(&x)?;
        observe(&x, &g)?;
        let gn = g.norm_sq();
        if let Some(status) = lp.push(step.worker_t, step.omega, step.step_size, step.cost, step.bits, loss, gn, guard) {
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
