//! Gradient compression operators.
//!
//! Three compressors are provided:
//!
//! * [`top_t_sparsify`] keeps the `T` largest-magnitude coordinates.
//! * [`sparsify_quantize`] keeps only the indices and signs of the top `T`
//!   coordinates plus a single magnitude `‖g‖₂`.
//! * [`stochastic_sparsify`] keeps coordinate `j` with probability `p_j` and
//!   rescales it by `1/p_j`, which makes the output unbiased.
//!
//! [`optimal_probabilities`] computes the keep-probabilities that minimize
//! the second moment of the stochastic compressor for a given expected
//! budget. The wire format lives in [`codec`].

pub mod bits;
pub mod codec;

use std::cmp::Ordering;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use codec::{decode, encode, BitPayload, Scheme};

/// Floating-point precision of transmitted values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fpp {
    F32,
    F64,
}

impl Fpp {
    pub fn bits(self) -> u32 {
        match self {
            Fpp::F32 => 32,
            Fpp::F64 => 64,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            32 => Ok(Fpp::F32),
            64 => Ok(Fpp::F64),
            other => Err(Error::Config(format!("fpp must be 32 or 64, got {other}"))),
        }
    }

    /// Rounds `value` to the nearest value representable at this precision.
    pub fn round(self, value: f64) -> f64 {
        match self {
            Fpp::F32 => f64::from(value as f32),
            Fpp::F64 => value,
        }
    }
}

/// A finite vector in `ℝᵈ` with `d ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("dimension must be at least 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!("entry {i} is not finite")));
        }
        Ok(DenseVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        DenseVector(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which operator produced a [`SparseGradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SparseKind {
    TopT,
    Stochastic,
}

/// Sparse `(index, value)` representation with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    dim: usize,
    entries: Vec<(usize, f64)>,
    kind: SparseKind,
}

impl SparseGradient {
    pub fn new(dim: usize, entries: Vec<(usize, f64)>, kind: SparseKind) -> Result<Self> {
        check_indices(dim, entries.iter().map(|e| e.0))?;
        if let Some(&(i, _)) = entries.iter().find(|e| e.1 == 0.0 || !e.1.is_finite()) {
            return Err(Error::InvalidVector(format!(
                "sparse entry at index {i} must be finite and nonzero"
            )));
        }
        Ok(SparseGradient { dim, entries, kind })
    }

    pub fn empty(dim: usize, kind: SparseKind) -> Self {
        SparseGradient {
            dim,
            entries: Vec::new(),
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn kind(&self) -> SparseKind {
        self.kind
    }

    /// Number of transmitted entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn add_to(&self, acc: &mut [f64]) {
        for &(i, v) in &self.entries {
            acc[i] += v;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_to(&mut out);
        out
    }

    /// Rounds every value to the wire precision. Entries that underflow to
    /// zero are dropped.
    pub fn rounded(&self, fpp: Fpp) -> Self {
        SparseGradient {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(i, v)| (i, fpp.round(v)))
                .filter(|e| e.1 != 0.0)
                .collect(),
            kind: self.kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(value: f64) -> Self {
        if value.is_sign_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn apply(self, magnitude: f64) -> f64 {
        match self {
            Sign::Plus => magnitude,
            Sign::Minus => -magnitude,
        }
    }
}

/// Sparsified-and-quantized gradient: one shared magnitude and a sign per
/// kept index.
#[derive(Debug, Clone, PartialEq)]
pub struct SqGradient {
    dim: usize,
    magnitude: f64,
    entries: Vec<(usize, Sign)>,
}

impl SqGradient {
    pub fn new(dim: usize, magnitude: f64, entries: Vec<(usize, Sign)>) -> Result<Self> {
        check_indices(dim, entries.iter().map(|e| e.0))?;
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::InvalidVector(format!("magnitude {magnitude} is not a nonnegative finite value")));
        }
        if magnitude == 0.0 && !entries.is_empty() {
            return Err(Error::InvalidVector("zero magnitude with nonempty index set".into()));
        }
        Ok(SqGradient {
            dim,
            magnitude,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn entries(&self) -> &[(usize, Sign)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.len() as f64 * self.magnitude * self.magnitude
    }

    pub fn add_to(&self, acc: &mut [f64]) {
        for &(i, s) in &self.entries {
            acc[i] += s.apply(self.magnitude);
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_to(&mut out);
        out
    }

    pub fn rounded(&self, fpp: Fpp) -> Self {
        let magnitude = fpp.round(self.magnitude);
        SqGradient {
            dim: self.dim,
            magnitude,
            entries: if magnitude == 0.0 { Vec::new() } else { self.entries.clone() },
        }
    }
}

/// Any compressed gradient the codec can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Compressed {
    Sparse(SparseGradient),
    Quantized(SqGradient),
}

impl Compressed {
    pub fn dim(&self) -> usize {
        match self {
            Compressed::Sparse(s) => s.dim(),
            Compressed::Quantized(q) => q.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Compressed::Sparse(s) => s.len(),
            Compressed::Quantized(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Compressed::Sparse(s) => match s.kind() {
                SparseKind::TopT => Scheme::TopT,
                SparseKind::Stochastic => Scheme::Stochastic,
            },
            Compressed::Quantized(_) => Scheme::SparseQuantized,
        }
    }

    pub fn add_to(&self, acc: &mut [f64]) {
        match self {
            Compressed::Sparse(s) => s.add_to(acc),
            Compressed::Quantized(q) => q.add_to(acc),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Compressed::Sparse(s) => s.to_dense(),
            Compressed::Quantized(q) => q.to_dense(),
        }
    }

    pub fn rounded(&self, fpp: Fpp) -> Self {
        match self {
            Compressed::Sparse(s) => Compressed::Sparse(s.rounded(fpp)),
            Compressed::Quantized(q) => Compressed::Quantized(q.rounded(fpp)),
        }
    }
}

fn check_indices(dim: usize, indices: impl Iterator<Item = usize>) -> Result<()> {
    let mut prev: Option<usize> = None;
    for i in indices {
        if i >= dim {
            return Err(Error::InvalidVector(format!("index {i} out of range for dimension {dim}")));
        }
        if prev.is_some_and(|p| p >= i) {
            return Err(Error::InvalidVector("indices must be strictly increasing".into()));
        }
        prev = Some(i);
    }
    Ok(())
}

/// Orders coordinates by decreasing magnitude, smaller index first on ties.
pub(crate) fn magnitude_order(g: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| by_magnitude_desc(g, a, b));
    order
}

fn by_magnitude_desc(g: &[f64], a: usize, b: usize) -> Ordering {
    g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b))
}

fn check_integer_budget(t: usize, dim: usize) -> Result<()> {
    if t < 1 || t > dim {
        return Err(Error::InvalidBudget {
            budget: t as f64,
            dim,
        });
    }
    Ok(())
}

/// Indices of the (at most) `t` largest nonzero magnitudes, in increasing
/// index order.
fn top_indices(g: &[f64], t: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = magnitude_order(g)
        .into_iter()
        .take(t)
        .take_while(|&i| g[i] != 0.0)
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Keeps the `t` entries of largest magnitude (fewer if `g` has fewer
/// nonzeros). Ties go to the smaller index.
pub fn top_t_sparsify(g: &[f64], t: usize) -> Result<SparseGradient> {
    check_integer_budget(t, g.len())?;
    let entries = top_indices(g, t).into_iter().map(|i| (i, g[i])).collect();
    Ok(SparseGradient {
        dim: g.len(),
        entries,
        kind: SparseKind::TopT,
    })
}

/// Keeps the signs of the top-`t` coordinates and the single magnitude
/// `‖g‖₂`.
pub fn sparsify_quantize(g: &[f64], t: usize) -> Result<SqGradient> {
    check_integer_budget(t, g.len())?;
    let magnitude = norm_sq(g).sqrt();
    if magnitude == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let entries = top_indices(g, t).into_iter().map(|i| (i, Sign::of(g[i]))).collect();
    Ok(SqGradient {
        dim: g.len(),
        magnitude,
        entries,
    })
}

/// Keep-probabilities for stochastic sparsification. `budget` is the
/// expected number of kept coordinates, `Σ p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    p: Vec<f64>,
    budget: f64,
}

impl ProbabilityVector {
    /// Validates `0 ≤ p_j ≤ 1`. A zero probability marks a coordinate that is
    /// never sampled.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilities("empty".into()));
        }
        if let Some(j) = p.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidProbabilities(format!("p[{j}] = {} outside [0, 1]", p[j])));
        }
        let budget = p.iter().sum();
        Ok(ProbabilityVector { p, budget })
    }

    /// `p_j = T/d` for every coordinate.
    pub fn uniform(dim: usize, budget: f64) -> Result<Self> {
        if dim == 0 || !(budget > 0.0 && budget <= dim as f64) {
            return Err(Error::InvalidBudget { budget, dim });
        }
        Ok(ProbabilityVector {
            p: vec![budget / dim as f64; dim],
            budget,
        })
    }

    pub fn all_ones(dim: usize) -> Self {
        ProbabilityVector {
            p: vec![1.0; dim],
            budget: dim as f64,
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// `E‖Q_{T,p}(g)‖² = Σ g_j²/p_j`. Infinite if a nonzero coordinate has
/// `p_j = 0`.
pub fn expected_sq_norm(g: &[f64], p: &ProbabilityVector) -> f64 {
    g.iter()
        .zip(p.as_slice())
        .filter(|(gj, _)| **gj != 0.0)
        .map(|(gj, pj)| if *pj > 0.0 { gj * gj / pj } else { f64::INFINITY })
        .sum()
}

/// Keeps coordinate `j` with probability `p_j` and scales it by `1/p_j`.
pub fn stochastic_sparsify<R: Rng + ?Sized>(
    g: &[f64],
    p: &ProbabilityVector,
    rng: &mut R,
) -> Result<SparseGradient> {
    if p.dim() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            actual: p.dim(),
        });
    }
    let mut entries = Vec::new();
    for (j, (&gj, &pj)) in g.iter().zip(p.as_slice()).enumerate() {
        if pj <= 0.0 {
            continue;
        }
        let keep = pj >= 1.0 || rng.random::<f64>() < pj;
        if keep && gj != 0.0 {
            entries.push((j, gj / pj));
        }
    }
    Ok(SparseGradient {
        dim: g.len(),
        entries,
        kind: SparseKind::Stochastic,
    })
}

/// Variance-optimal keep-probabilities for expected budget `t`.
///
/// After ordering by magnitude, the `n_s` largest coordinates are always
/// kept and the rest get `p_i = |g_i|(t − n_s)/Σ_{j>n_s}|g_j|`, with `n_s`
/// the smallest count that keeps every remaining `p_i ≤ 1`. Zero
/// coordinates get `p = 0`, so the effective budget is capped at the number
/// of nonzeros.
pub fn optimal_probabilities(g: &[f64], t: f64) -> Result<ProbabilityVector> {
    let dim = g.len();
    if !(t >= 1.0 && t <= dim as f64) {
        return Err(Error::InvalidBudget { budget: t, dim });
    }
    let order = magnitude_order(g);
    let nnz = order.iter().take_while(|&&i| g[i] != 0.0).count();
    if nnz == 0 {
        return Err(Error::ZeroGradient);
    }
    let sorted: Vec<f64> = order[..nnz].iter().map(|&i| g[i].abs()).collect();
    let budget = t.min(nnz as f64);
    let kept = saturated_count(&sorted, budget);
    let tail: f64 = sorted[kept..].iter().sum();
    let scale = (budget - kept as f64) / tail;

    let mut p = vec![0.0; dim];
    for (rank, &i) in order[..nnz].iter().enumerate() {
        p[i] = if rank < kept { 1.0 } else { (g[i].abs() * scale).min(1.0) };
    }
    Ok(ProbabilityVector { p, budget })
}

/// Smallest `n` such that `a_n (budget − n) ≤ Σ_{j ≥ n} a_j`, for
/// magnitudes `a` sorted in decreasing order. The predicate is monotone in
/// `n`, so a binary search over `[0, ⌈budget⌉ − 1]` suffices.
pub(crate) fn saturated_count(sorted_desc: &[f64], budget: f64) -> usize {
    let suffix = |n: usize| -> f64 { sorted_desc[n..].iter().sum() };
    saturated_count_with(sorted_desc, budget, suffix)
}

pub(crate) fn saturated_count_with(
    sorted_desc: &[f64],
    budget: f64,
    suffix_abs: impl Fn(usize) -> f64,
) -> usize {
    let upper = (budget.ceil() as usize).clamp(1, sorted_desc.len()) - 1;
    let fits = |n: usize| sorted_desc[n] * (budget - n as f64) <= suffix_abs(n);
    let (mut lo, mut hi) = (0usize, upper);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
