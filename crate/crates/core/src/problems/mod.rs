//! Objectives with exact gradients and known smoothness constants.

pub mod libsvm;
pub mod sparse;
pub mod synthetic;

use rand::seq::index;
use rand::Rng;

use crate::compressors::DenseVector;
use crate::error::{Error, Result};
use crate::rng;

pub use libsvm::{load_libsvm, Dataset};
pub use sparse::CsrMatrix;
pub use synthetic::SyntheticLogistic;

/// A smooth objective `F: ℝᵈ → ℝ`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn loss(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<DenseVector>;
    /// An upper bound on the gradient's Lipschitz constant.
    fn smoothness(&self) -> f64;
    fn strong_convexity(&self) -> Option<f64> {
        None
    }
    /// `min F`, when known in closed form.
    fn known_minimum(&self) -> Option<f64> {
        None
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `F(x) = (1/N) Σ log(1 + exp(−yᵢ aᵢᵀx)) + (reg/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: Dataset,
    reg: f64,
    smoothness: f64,
}

impl LogisticRegression {
    /// Estimates `L = λ_max(XᵀX)/(4N) + reg` by power iteration.
    pub fn new(data: Dataset, reg: f64) -> Result<Self> {
        if data.samples() == 0 {
            return Err(Error::Config("logistic regression needs at least one sample".into()));
        }
        if data.labels.len() != data.features.rows() {
            return Err(Error::DimensionMismatch {
                expected: data.features.rows(),
                actual: data.labels.len(),
            });
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::Config(format!("regularization must be nonnegative, got {reg}")));
        }
        let lambda = power_iteration(&data.features, 1e-6, 10_000)?;
        let smoothness = lambda / (4.0 * data.samples() as f64) + reg;
        if smoothness <= 0.0 {
            return Err(Error::Config("all-zero design without regularization has no curvature".into()));
        }
        Ok(LogisticRegression {
            data,
            reg,
            smoothness,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn samples(&self) -> usize {
        self.data.samples()
    }

    fn sample_loss(&self, r: usize, x: &[f64]) -> f64 {
        softplus(-self.data.labels[r] * self.data.features.row_dot(r, x))
    }

    fn add_sample_gradient(&self, r: usize, x: &[f64], scale: f64, acc: &mut [f64]) {
        let y = self.data.labels[r];
        let margin = y * self.data.features.row_dot(r, x);
        self.data.features.add_row_scaled(r, -scale * y * sigmoid(-margin), acc);
    }

    /// Gradient of the loss restricted to `rows` (plus the full regularizer).
    pub fn subset_gradient(&self, x: &[f64], rows: &[usize]) -> Result<DenseVector> {
        check_dim(self.dim(), x)?;
        let mut g: Vec<f64> = x.iter().map(|v| self.reg * v).collect();
        let scale = 1.0 / rows.len() as f64;
        for &r in rows {
            self.add_sample_gradient(r, x, scale, &mut g);
        }
        DenseVector::new(g)
    }

    /// Mini-batch gradient over `batch` rows drawn without replacement.
    /// `batch ≥ N` gives the exact gradient.
    pub fn minibatch_gradient<R: Rng + ?Sized>(&self, x: &[f64], batch: usize, rng: &mut R) -> Result<DenseVector> {
        let n = self.samples();
        if batch == 0 || batch >= n {
            return self.gradient(x);
        }
        let mut rows = index::sample(rng, n, batch).into_vec();
        rows.sort_unstable();
        self.subset_gradient(x, &rows)
    }

    /// Splits the rows into `parts` contiguous shards of near-equal size.
    pub fn split(&self, parts: usize) -> Result<Vec<LogisticRegression>> {
        let n = self.samples();
        if parts == 0 || parts > n {
            return Err(Error::Config(format!("cannot split {n} samples into {parts} shards")));
        }
        (0..parts)
            .map(|j| {
                let range = (j * n / parts)..((j + 1) * n / parts);
                let data = Dataset {
                    features: self.data.features.slice_rows(range.clone()),
                    labels: self.data.labels[range].to_vec(),
                };
                LogisticRegression::new(data, self.reg)
            })
            .collect()
    }
}

impl Objective for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let n = self.samples();
        let data: f64 = (0..n).map(|r| self.sample_loss(r, x)).sum::<f64>() / n as f64;
        Ok(data + 0.5 * self.reg * crate::compressors::norm_sq(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim(self.dim(), x)?;
        let mut g: Vec<f64> = x.iter().map(|v| self.reg * v).collect();
        let scale = 1.0 / self.samples() as f64;
        for r in 0..self.samples() {
            self.add_sample_gradient(r, x, scale, &mut g);
        }
        DenseVector::new(g)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn strong_convexity(&self) -> Option<f64> {
        (self.reg > 0.0).then_some(self.reg)
    }
}

/// Largest eigenvalue of `XᵀX` by power iteration, stopping when the
/// Rayleigh quotient changes by at most `tol` relative.
pub fn power_iteration(x: &CsrMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let d = x.cols();
    let mut start = rng::stream(0x5eed, 0, 0);
    let mut v: Vec<f64> = (0..d).map(|_| start.random::<f64>() * 2.0 - 1.0).collect();
    let mut norm = crate::compressors::norm_sq(&v).sqrt();
    if norm == 0.0 {
        v = vec![1.0; d];
        norm = (d as f64).sqrt();
    }
    v.iter_mut().for_each(|e| *e /= norm);

    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let xv = x.mul_vec(&v);
        let rayleigh = crate::compressors::norm_sq(&xv);
        let w = x.transpose_mul_vec(&xv);
        let wn = crate::compressors::norm_sq(&w).sqrt();
        if wn == 0.0 {
            return Ok(0.0);
        }
        let converged = (rayleigh - lambda).abs() <= tol * rayleigh;
        lambda = rayleigh;
        if converged {
            return Ok(lambda);
        }
        v = w.into_iter().map(|e| e / wn).collect();
    }
    Err(Error::Estimation {
        iterations: max_iter,
        last_estimate: lambda,
    })
}

/// Synthetic and data-driven objectives.
#[derive(Debug, Clone)]
pub enum Problem {
    Logistic(LogisticRegression),
    /// `F(x) = (L/2)‖x‖²`; the descent inequality for top-T steps is tight.
    IsotropicQuadratic { l: f64, dim: usize },
    /// `F(x) = (1/2) xᵀ (L/d) 11ᵀ x`; every gradient has equal entries.
    RankOneQuadratic { l: f64, dim: usize },
    /// `F(x) = (1/2) Σ hᵢ xᵢ²`, `L = max hᵢ`.
    DiagonalQuadratic { curvatures: Vec<f64> },
}

impl Problem {
    pub fn isotropic(l: f64, dim: usize) -> Result<Self> {
        check_quadratic(l, dim)?;
        Ok(Problem::IsotropicQuadratic { l, dim })
    }

    pub fn rank_one(l: f64, dim: usize) -> Result<Self> {
        check_quadratic(l, dim)?;
        Ok(Problem::RankOneQuadratic { l, dim })
    }

    pub fn diagonal(curvatures: Vec<f64>) -> Result<Self> {
        if curvatures.is_empty() || curvatures.iter().any(|h| !(h.is_finite() && *h >= 0.0)) || curvatures.iter().all(|h| *h == 0.0) {
            return Err(Error::Config("curvatures must be nonnegative, finite and not all zero".into()));
        }
        Ok(Problem::DiagonalQuadratic { curvatures })
    }

    /// Default starting point: the origin for logistic regression, the
    /// all-ones vector for the quadratics (whose minimizer is the origin).
    pub fn default_start(&self) -> Vec<f64> {
        match self {
            Problem::Logistic(_) => vec![0.0; self.dim()],
            _ => vec![1.0; self.dim()],
        }
    }
}

fn check_quadratic(l: f64, dim: usize) -> Result<()> {
    if !(l.is_finite() && l > 0.0) || dim == 0 {
        return Err(Error::Config(format!("quadratic needs L > 0 and d ≥ 1 (got L = {l}, d = {dim})")));
    }
    Ok(())
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        match self {
            Problem::Logistic(p) => p.dim(),
            Problem::IsotropicQuadratic { dim, .. } | Problem::RankOneQuadratic { dim, .. } => *dim,
            Problem::DiagonalQuadratic { curvatures } => curvatures.len(),
        }
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(match self {
            Problem::Logistic(p) => return p.loss(x),
            Problem::IsotropicQuadratic { l, .. } => 0.5 * l * crate::compressors::norm_sq(x),
            Problem::RankOneQuadratic { l, dim } => {
                let s: f64 = x.iter().sum();
                0.5 * l / *dim as f64 * s * s
            }
            Problem::DiagonalQuadratic { curvatures } => {
                0.5 * curvatures.iter().zip(x).map(|(h, v)| h * v * v).sum::<f64>()
            }
        })
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim(self.dim(), x)?;
        let g = match self {
            Problem::Logistic(p) => return p.gradient(x),
            Problem::IsotropicQuadratic { l, .. } => x.iter().map(|v| l * v).collect(),
            Problem::RankOneQuadratic { l, dim } => {
                let mean = x.iter().sum::<f64>() / *dim as f64;
                vec![l * mean; *dim]
            }
            Problem::DiagonalQuadratic { curvatures } => curvatures.iter().zip(x).map(|(h, v)| h * v).collect(),
        };
        DenseVector::new(g)
    }

    fn smoothness(&self) -> f64 {
        match self {
            Problem::Logistic(p) => p.smoothness(),
            Problem::IsotropicQuadratic { l, .. } | Problem::RankOneQuadratic { l, .. } => *l,
            Problem::DiagonalQuadratic { curvatures } => curvatures.iter().copied().fold(0.0, f64::max),
        }
    }

    fn strong_convexity(&self) -> Option<f64> {
        match self {
            Problem::Logistic(p) => p.strong_convexity(),
            Problem::IsotropicQuadratic { l, .. } => Some(*l),
            Problem::RankOneQuadratic { l, dim } if *dim == 1 => Some(*l),
            Problem::RankOneQuadratic { .. } => None,
            Problem::DiagonalQuadratic { curvatures } => {
                let m = curvatures.iter().copied().fold(f64::INFINITY, f64::min);
                (m > 0.0).then_some(m)
            }
        }
    }

    fn known_minimum(&self) -> Option<f64> {
        match self {
            Problem::Logistic(_) => None,
            _ => Some(0.0),
        }
    }
}

/// `F = (1/n) Σ f_j` over logistic shards; the multi-node objective.
#[derive(Debug, Clone)]
pub struct ShardedLogistic {
    shards: Vec<LogisticRegression>,
}

impl ShardedLogistic {
    pub fn new(problem: &LogisticRegression, workers: usize) -> Result<Self> {
        Ok(ShardedLogistic {
            shards: problem.split(workers)?,
        })
    }

    pub fn from_shards(shards: Vec<LogisticRegression>) -> Result<Self> {
        let Some(first) = shards.first() else {
            return Err(Error::Config("need at least one shard".into()));
        };
        let d = first.dim();
        if let Some(bad) = shards.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(ShardedLogistic { shards })
    }

    pub fn shards(&self) -> &[LogisticRegression] {
        &self.shards
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }
}

impl Objective for ShardedLogistic {
    fn dim(&self) -> usize {
        self.shards[0].dim()
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.shards {
            total += s.loss(x)?;
        }
        Ok(total / self.shards.len() as f64)
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        let mut acc = vec![0.0; self.dim()];
        for s in &self.shards {
            for (a, g) in acc.iter_mut().zip(s.gradient(x)?.iter()) {
                *a += g;
            }
        }
        let n = self.shards.len() as f64;
        DenseVector::new(acc.into_iter().map(|a| a / n).collect())
    }

    /// Every shard is `L_j`-smooth; the average is `max_j L_j`-smooth.
    fn smoothness(&self) -> f64 {
        self.shards.iter().map(Objective::smoothness).fold(0.0, f64::max)
    }

    fn strong_convexity(&self) -> Option<f64> {
        self.shards[0].strong_convexity()
    }
}
