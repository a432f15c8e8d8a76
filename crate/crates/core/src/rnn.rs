//! Single-hidden-layer randomized neural network with deterministic hidden
//! weights and closed-form ridge output weights.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Linear congruential sequence used to fill the hidden weight matrix.
///
/// For a sequence of length `E = Q (p + 1)` the generator is
/// `V(n+1) = (a V(n) + b) mod c` with `a = E + 2`, `b = E + 3`, `c = E²`
/// and `V(1) = E + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcgSequence {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub values: Vec<u64>,
}

impl LcgSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn lcg_generate(q: usize, p: usize) -> Result<LcgSequence> {
    if q == 0 || p == 0 {
        return Err(Error::Parameter(format!(
            "hidden size and attribute count must be positive, got Q={q}, p={p}"
        )));
    }
    let len = q
        .checked_mul(p + 1)
        .filter(|&e| (e as u128).pow(3) < u128::from(u64::MAX))
        .ok_or_else(|| Error::Parameter(format!("sequence too long for Q={q}, p={p}")))?;
    let e = len as u64;
    let (a, b, c) = (e + 2, e + 3, e * e);

    let mut values = Vec::with_capacity(len);
    let mut v = e + 1;
    values.push(v);
    for _ in 1..len {
        v = (a * v + b) % c;
        values.push(v);
    }
    Ok(LcgSequence { a, b, c, values })
}

/// Hidden-layer weights `W` (`Q x (p+1)`), each row standardized.
/// Column 0 multiplies the bias input.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenWeights {
    q: usize,
    p: usize,
    w: DMatrix<f64>,
}

impl HiddenWeights {
    /// Splits the LCG sequence for `(q, p)` into `q` rows of `p + 1` values
    /// and standardizes every row.
    pub fn new(q: usize, p: usize) -> Result<Self> {
        let seq = lcg_generate(q, p)?;
        let cols = p + 1;
        let mut w = DMatrix::zeros(q, cols);
        for (row, chunk) in seq.values.chunks_exact(cols).enumerate() {
            let raw: Vec<f64> = chunk.iter().map(|&v| v as f64).collect();
            let standardized =
                standardize(&raw).ok_or(Error::DegenerateWeights { q, p, row })?;
            for (col, value) in standardized.into_iter().enumerate() {
                w[(row, col)] = value;
            }
        }
        Ok(HiddenWeights { q, p, w })
    }

    pub fn hidden_size(&self) -> usize {
        self.q
    }

    pub fn attributes(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }
}

/// Zero-mean, unit population-variance copy of `values`; `None` when all
/// values are equal.
fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Some(values.iter().map(|v| (v - mean) / std).collect())
}

/// Network inputs: bias row of ones followed by `p` standardized attribute
/// rows, one column per sample, and one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: DMatrix<f64>,
    d: RowDVector<f64>,
}

impl TrainingSet {
    /// Builds a training set from raw attributes (`p x N`) and labels.
    ///
    /// Each attribute row is standardized with its population statistics;
    /// a constant row becomes all zeros. The bias row is added afterwards.
    pub fn from_raw(attributes: &DMatrix<f64>, labels: &[f64]) -> Result<Self> {
        let (p, n) = attributes.shape();
        if p == 0 || n == 0 {
            return Err(Error::Parameter(format!(
                "training set needs at least one attribute and one sample, got {p}x{n}"
            )));
        }
        if labels.len() != n {
            return Err(Error::Parameter(format!(
                "{} labels for {n} samples",
                labels.len()
            )));
        }
        if !attributes.iter().all(|v| v.is_finite()) || !labels.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite value in training data".into()));
        }

        let mut x = DMatrix::zeros(p + 1, n);
        x.row_mut(0).fill(1.0);
        for i in 0..p {
            let row: Vec<f64> = attributes.row(i).iter().copied().collect();
            if let Some(std_row) = standardize(&row) {
                for (j, v) in std_row.into_iter().enumerate() {
                    x[(i + 1, j)] = v;
                }
            }
        }
        Ok(TrainingSet {
            x,
            d: RowDVector::from_row_slice(labels),
        })
    }

    pub fn attributes(&self) -> usize {
        self.x.nrows() - 1
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    /// `(p+1) x N` input matrix with the bias in row 0.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &RowDVector<f64> {
        &self.d
    }
}

/// Trained output weights, `Q + 1` values (the last one multiplies the
/// hidden-layer bias).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputWeights {
    pub f: DVector<f64>,
    pub lambda: f64,
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Hidden-layer outputs `Z` (`(Q+1) x N`): sigmoid of `W X` with a row of
/// ones appended.
pub fn hidden_outputs(ts: &TrainingSet, hw: &HiddenWeights) -> Result<DMatrix<f64>> {
    if ts.attributes() != hw.attributes() {
        return Err(Error::Parameter(format!(
            "training set has {} attributes but hidden weights expect {}",
            ts.attributes(),
            hw.attributes()
        )));
    }
    let q = hw.hidden_size();
    let projected = hw.matrix() * ts.inputs();
    let mut z = DMatrix::zeros(q + 1, ts.samples());
    z.rows_mut(0, q).zip_apply(&projected, |out, u| *out = sigmoid(u));
    z.row_mut(q).fill(1.0);
    Ok(z)
}

/// Solves `(Z Zᵀ + λI) fᵀ = Z Dᵀ` by Cholesky factorization.
pub fn solve_output_weights(
    ts: &TrainingSet,
    hw: &HiddenWeights,
    lambda: f64,
) -> Result<OutputWeights> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let z = hidden_outputs(ts, hw)?;
    let mut gram = &z * z.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = &z * ts.labels().transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularized Gram matrix is not positive definite".into()))?;
    let f = chol.solve(&rhs);
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("output weights are not finite".into()));
    }
    Ok(OutputWeights { f, lambda })
}
