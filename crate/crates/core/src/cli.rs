//! `catgrad` command-line runner.
//!
//! ```text
//! catgrad run --problem quad-rank1:L=1,d=64 --scheme cat-sparse \
//!             --cost payload-sparse --fpp 32 --eps 1e-6 --seed 7 --out-dir out
//! ```
//!
//! Writes `trace.csv` (or `trace_T<k>.csv` per sweep entry), `summary.json`
//! and `metrics.json`. Exit status: 0 when every run reached its target,
//! 2 when some run hit the iteration limit, 1 on error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::compressors::Fpp;
use crate::costmodel::CostSpec;
use crate::error::{Error, Result};
use crate::metrics::{bits_to_accuracy, AlphaProfile, MetricsReport};
use crate::optimizers::{
    reference_optimum, run_multinode_observed, run_observed, OptimizerConfig, RunStatus, RunSummary, RunTrace, Scheme,
    ShardWorker, StepSize, Target,
};
use crate::problems::{load_libsvm, LogisticRegression, Objective, Problem, ShardedLogistic, SyntheticLogistic};

/// Objective selection, parsed from `kind:key=value,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemSpec {
    /// `quad-iso:L=2,d=16`
    IsotropicQuadratic { l: f64, dim: usize },
    /// `quad-rank1:L=1,d=64`
    RankOneQuadratic { l: f64, dim: usize },
    /// `quad-diag:d=32,L=1,cond=100`: curvatures spaced geometrically from
    /// `L/cond` to `L`.
    DiagonalQuadratic { l: f64, dim: usize, cond: f64 },
    /// `libsvm:path=data.txt,reg=1e-3[,d=47236]`
    Libsvm { path: PathBuf, reg: f64, dim: Option<usize> },
    /// `synthetic:n=1000,d=256,nnz=8,zipf=1.1,flip=0.05,reg=1e-3,seed=1`
    Synthetic(SyntheticLogistic),
}

fn kv_pairs(rest: &str) -> Result<BTreeMap<String, String>> {
    rest.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("problem: expected key=value, got {kv}")))
        })
        .collect()
}

fn take<T: FromStr>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    kv.remove(key)
        .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("problem: cannot parse {key}={v}"))))
        .transpose()
}

fn required<T: FromStr>(kv: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
    take(kv, key)?.ok_or_else(|| Error::Config(format!("problem: missing {key}")))
}

impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut kv = kv_pairs(rest)?;
        let spec = match head {
            "quad-iso" => ProblemSpec::IsotropicQuadratic {
                l: take(&mut kv, "L")?.unwrap_or(1.0),
                dim: required(&mut kv, "d")?,
            },
            "quad-rank1" => ProblemSpec::RankOneQuadratic {
                l: take(&mut kv, "L")?.unwrap_or(1.0),
                dim: required(&mut kv, "d")?,
            },
            "quad-diag" => ProblemSpec::DiagonalQuadratic {
                l: take(&mut kv, "L")?.unwrap_or(1.0),
                dim: required(&mut kv, "d")?,
                cond: take(&mut kv, "cond")?.unwrap_or(10.0),
            },
            "libsvm" => ProblemSpec::Libsvm {
                path: required::<String>(&mut kv, "path")?.into(),
                reg: take(&mut kv, "reg")?.unwrap_or(0.0),
                dim: take(&mut kv, "d")?,
            },
            "synthetic" => {
                let def = SyntheticLogistic::default();
                ProblemSpec::Synthetic(SyntheticLogistic {
                    samples: take(&mut kv, "n")?.unwrap_or(def.samples),
                    dim: take(&mut kv, "d")?.unwrap_or(def.dim),
                    row_nnz: take(&mut kv, "nnz")?.unwrap_or(def.row_nnz),
                    zipf_exponent: take(&mut kv, "zipf")?.unwrap_or(def.zipf_exponent),
                    label_flip: take(&mut kv, "flip")?.unwrap_or(def.label_flip),
                    reg: take(&mut kv, "reg")?.unwrap_or(def.reg),
                    seed: take(&mut kv, "seed")?.unwrap_or(def.seed),
                })
            }
            other => return Err(Error::Config(format!("unknown problem kind {other}"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("problem {head}: unknown key {k}")));
        }
        Ok(spec)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::IsotropicQuadratic { l, dim } => write!(f, "quad-iso:L={l},d={dim}"),
            ProblemSpec::RankOneQuadratic { l, dim } => write!(f, "quad-rank1:L={l},d={dim}"),
            ProblemSpec::DiagonalQuadratic { l, dim, cond } => write!(f, "quad-diag:d={dim},L={l},cond={cond}"),
            ProblemSpec::Libsvm { path, reg, dim } => {
                write!(f, "libsvm:path={},reg={reg}", path.display())?;
                match dim {
                    Some(d) => write!(f, ",d={d}"),
                    None => Ok(()),
                }
            }
            ProblemSpec::Synthetic(s) => write!(
                f,
                "synthetic:n={},d={},nnz={},zipf={},flip={},reg={},seed={}",
                s.samples, s.dim, s.row_nnz, s.zipf_exponent, s.label_flip, s.reg, s.seed
            ),
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        Ok(match self {
            ProblemSpec::IsotropicQuadratic { l, dim } => Problem::isotropic(*l, *dim)?,
            ProblemSpec::RankOneQuadratic { l, dim } => Problem::rank_one(*l, *dim)?,
            ProblemSpec::DiagonalQuadratic { l, dim, cond } => {
                if cond.is_nan() || *cond < 1.0 || *dim == 0 {
                    return Err(Error::Config("quad-diag needs d ≥ 1 and cond ≥ 1".into()));
                }
                let span = (*dim as f64 - 1.0).max(1.0);
                Problem::diagonal((0..*dim).map(|i| l * cond.powf(-(i as f64) / span)).collect())?
            }
            ProblemSpec::Libsvm { path, reg, dim } => {
                if !path.exists() {
                    return Err(Error::Config(format!("dataset {} does not exist", path.display())));
                }
                Problem::Logistic(LogisticRegression::new(load_libsvm(path, *dim)?, *reg)?)
            }
            ProblemSpec::Synthetic(s) => Problem::Logistic(s.build()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// `‖∇F(x)‖² ≤ ε`
    Grad,
    /// `F(x) − F* ≤ ε`, with `F*` from a long full-gradient run.
    Gap,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" | "grad-norm" => Ok(TargetKind::Grad),
            "gap" | "loss-gap" => Ok(TargetKind::Gap),
            other => Err(Error::Config(format!("unknown target kind {other}"))),
        }
    }
}

/// Everything a run needs; loadable from JSON, overridable by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub scheme: String,
    pub cost: String,
    pub fpp: u32,
    pub max_iters: usize,
    pub eps: f64,
    pub target: TargetKind,
    pub seed: u64,
    pub workers: usize,
    pub batch: usize,
    pub step_size: Option<f64>,
    pub out_dir: PathBuf,
    pub sweep_t: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "quad-iso:L=1,d=16".into(),
            scheme: "cat-sparse".into(),
            cost: "payload".into(),
            fpp: 32,
            max_iters: 10_000,
            eps: 1e-6,
            target: TargetKind::Grad,
            seed: 0,
            workers: 1,
            batch: 0,
            step_size: None,
            out_dir: PathBuf::from("out"),
            sweep_t: None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "catgrad", version, about = "Communication-aware gradient sparsification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment (or a fixed-T sweep) and write its traces.
    Run(RunArgs),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// quad-iso:L=,d= | quad-rank1:L=,d= | quad-diag:d=,L=,cond= | libsvm:path=,reg= | synthetic:n=,d=,...
    #[arg(long)]
    pub problem: Option<String>,
    /// full-gd | fixed-t:T=k | cat-sparse | cat-sq | cat-stochastic | alistarh-sq | hybrid:S=k
    #[arg(long)]
    pub scheme: Option<String>,
    /// payload | payload-sparse | payload-sq | affine:c1=,c0= | packet:c1=,c0=,pmax=[,fpp=]
    #[arg(long)]
    pub cost: Option<String>,
    /// Bits per transmitted value (32 or 64).
    #[arg(long)]
    pub fpp: Option<u32>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// grad (‖∇F‖² ≤ ε) or gap (F − F* ≤ ε).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Mini-batch size per worker; 0 uses the whole shard.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Fixed step size instead of the lemma-exact one.
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated budgets; runs fixed-t once per entry.
    #[arg(long, value_delimiter = ',')]
    pub sweep_t: Option<Vec<usize>>,
}

impl RunArgs {
    /// File config (if any) overlaid with the flags that were given.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        overlay!(problem, scheme, cost, fpp, max_iters, eps, seed, workers, batch, out_dir);
        if let Some(t) = &self.target {
            c.target = t.parse()?;
        }
        if self.step_size.is_some() {
            c.step_size = self.step_size;
        }
        if self.sweep_t.is_some() {
            c.sweep_t = self.sweep_t.clone();
        }
        Ok(c)
    }
}

/// Summary file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub config: ExperimentConfig,
    pub f_star: Option<f64>,
    pub runs: BTreeMap<String, RunSummary>,
}

struct Prepared {
    problem: Problem,
    target: Target,
    f_star: Option<f64>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let problem: Problem = cfg.problem.parse::<ProblemSpec>()?.build()?;
    let (target, f_star) = match cfg.target {
        TargetKind::Grad => (Target::GradNormSq(cfg.eps), None),
        TargetKind::Gap => {
            let (_, f) = reference_optimum(&problem, 1e-20, 200_000)?;
            (Target::LossGap { eps: cfg.eps, f_star: f }, Some(f))
        }
    };
    Ok(Prepared { problem, target, f_star })
}

/// One optimizer run with its metrics profile.
pub fn execute(cfg: &ExperimentConfig, scheme: Scheme, problem: &Problem, target: Target) -> Result<(RunTrace, AlphaProfile)> {
    let fpp = Fpp::from_bits(cfg.fpp)?;
    let spec: CostSpec = cfg.cost.parse()?;
    let model = spec.build(problem.dim(), scheme.payload_scheme(), fpp)?;
    let mut oc = OptimizerConfig::new(scheme, model, target, cfg.max_iters);
    oc.seed = cfg.seed;
    oc.n_workers = cfg.workers;
    oc.batch_size = cfg.batch;
    oc.x0 = Some(problem.default_start());
    if let Some(g) = cfg.step_size {
        oc.step_size = StepSize::Manual(g);
    }
    let mut profile = AlphaProfile::new(scheme.measure(), problem.dim());
    let observe = |_: &[f64], g: &[f64]| profile.observe_gradient(g);
    let trace = if cfg.workers > 1 {
        let Problem::Logistic(lr) = problem else {
            return Err(Error::Config("multi-node runs need a logistic problem".into()));
        };
        let workers = ShardWorker::split(lr, cfg.workers, cfg.batch)?;
        let objective = ShardedLogistic::from_shards(workers.iter().map(|w| w.problem.clone()).collect())?;
        run_multinode_observed(&oc, &workers, &objective, true, observe)?
    } else {
        run_observed(&oc, problem, observe)?
    };
    Ok((trace, profile))
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(path)?))
}

/// Runs the experiment and writes its outputs. Returns the exit status.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<i32> {
    let prep = prepare(cfg)?;
    let base: Scheme = cfg.scheme.parse()?;
    let jobs: Vec<(String, Scheme)> = match &cfg.sweep_t {
        Some(ts) if !ts.is_empty() => ts.iter().map(|&t| (format!("trace_T{t}"), Scheme::FixedT(t))).collect(),
        _ => vec![("trace".to_string(), base)],
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let mut runs = BTreeMap::new();
    let mut report: Option<MetricsReport> = None;
    let mut bits = BTreeMap::new();
    let mut code = 0;
    for (name, scheme) in jobs {
        let (trace, profile) = execute(cfg, scheme, &prep.problem, prep.target)?;
        write_trace(&cfg.out_dir.join(format!("{name}.csv")), &trace)?;
        match trace.status {
            RunStatus::TargetReached | RunStatus::Converged => {}
            RunStatus::MaxIters => code = code.max(2),
            RunStatus::Diverged { ref diagnostic, .. } => {
                eprintln!("{name}: {diagnostic}");
                code = 1;
            }
        }
        bits.insert(scheme.to_string(), bits_to_accuracy(&trace, &prep.target));
        runs.insert(name, trace.summary());
        report.get_or_insert_with(|| MetricsReport::new(&profile));
    }
    let mut report = report.expect("at least one run");
    report.bits_to_eps = bits;
    fs::write(cfg.out_dir.join("metrics.json"), report.to_json()?)?;
    let summary = SummaryFile {
        config: cfg.clone(),
        f_star: prep.f_star,
        runs,
    };
    fs::write(cfg.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(code)
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => a.resolve().and_then(|c| run_experiment(&c)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_specs_round_trip() {
        for s in [
            "quad-iso:L=2,d=16",
            "quad-rank1:L=1,d=64",
            "quad-diag:d=8,L=1,cond=100",
            "libsvm:path=a.txt,reg=0.001,d=10",
            "synthetic:n=500,d=64,nnz=4,zipf=1.2,flip=0.1,reg=0.01,seed=3",
        ] {
            let p: ProblemSpec = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("quad-iso:L=1".parse::<ProblemSpec>().is_err());
        assert!("quad-iso:d=3,q=1".parse::<ProblemSpec>().is_err());
        assert!("nope".parse::<ProblemSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"scheme": "cat-sq", "eps": 0.5, "seed": 3}"#).unwrap();
        let args = RunArgs {
            config: Some(path),
            eps: Some(0.25),
            ..RunArgs::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.scheme, "cat-sq");
        assert_eq!(c.eps, 0.25);
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn diagonal_spacing() {
        let Problem::DiagonalQuadratic { curvatures } = "quad-diag:d=3,L=2,cond=4".parse::<ProblemSpec>().unwrap().build().unwrap() else {
            panic!()
        };
        assert_eq!(curvatures, vec![2.0, 1.0, 0.5]);
    }
}
