//! Linear discriminant analysis, leave-one-out validation and parameter
//! sweeps over radii and hidden sizes.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{load_gray, LabeledDataset};
use crate::signature::{feature_count, SignatureExtractor, TrainingOptions};

pub const DEFAULT_GAMMA: f64 = 1e-4;

/// Samples (rows) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl FeatureTable {
    /// Validates that there are at least two classes, each with at least
    /// two samples, and that all values are finite.
    pub fn new(rows: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if rows.nrows() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.nrows()
            )));
        }
        if rows.ncols() == 0 {
            return Err(Error::Parameter("feature dimension must be positive".into()));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let counts = class_counts(&labels, num_classes);
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::Parameter("at least two classes are required".into()));
        }
        if let Some(class) = counts.iter().position(|&c| c == 1) {
            return Err(Error::Parameter(format!(
                "class {class} has a single sample; leave-one-out needs at least two"
            )));
        }
        Ok(FeatureTable {
            rows,
            labels,
            num_classes,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let f = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::Parameter("rows have different lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        FeatureTable::new(DMatrix::from_row_slice(rows.len(), f, &flat), labels)
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Classes are `0..num_classes`; ids without samples are allowed.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Table with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> FeatureTable {
        let rows = DMatrix::from_fn(order.len(), self.num_features(), |i, j| {
            self.rows[(order[i], j)]
        });
        FeatureTable {
            rows,
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

fn class_counts(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Fitted linear discriminant.
///
/// Scores are `δ_c(x) = w_cᵀ (x - m) + b_c` with `w_c = Σ⁻¹ (μ_c - m)`,
/// `b_c = -½ (μ_c - m)ᵀ Σ⁻¹ (μ_c - m) + ln π_c`, where `m` is the training
/// mean and `Σ` the pooled within-class covariance with a trace-scaled ridge.
/// Classes absent from training score `-∞`.
#[derive(Debug, Clone)]
pub struct Lda {
    center: DVector<f64>,
    weights: DMatrix<f64>,
    offsets: Vec<f64>,
}

impl Lda {
    /// Fits on `rows` (samples x features). `gamma` scales the ridge
    /// `gamma · mean(diag(S_w)) · I` added to the within-class scatter.
    pub fn fit(rows: &DMatrix<f64>, labels: &[usize], num_classes: usize, gamma: f64) -> Result<Lda> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {gamma}")));
        }
        let (n, f) = rows.shape();
        if labels.len() != n || f == 0 {
            return Err(Error::Parameter("malformed training table".into()));
        }
        let counts = class_counts(labels, num_classes);
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::Parameter("LDA needs at least two classes".into()));
        }

        let center = rows.row_mean().transpose();
        let mut means = DMatrix::zeros(num_classes, f);
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..f {
                means[(l, j)] += rows[(i, j)] - center[j];
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                means.row_mut(c).unscale_mut(count as f64);
            }
        }

        let mut deviations = DMatrix::zeros(n, f);
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..f {
                deviations[(i, j)] = rows[(i, j)] - center[j] - means[(l, j)];
            }
        }
        let mut scatter = deviations.transpose() * &deviations;
        let ridge = ridge_for(&scatter, gamma);
        for j in 0..f {
            scatter[(j, j)] += ridge;
        }
        let dof = n.saturating_sub(present).max(1) as f64;
        let cov = scatter / dof;

        let chol = cov.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let l = chol.l();
        let max_diag = cov.diagonal().max();
        let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
        if !(max_diag > 0.0) || min_pivot <= 1e-12 * max_diag {
            return Err(Error::SingularCovariance);
        }

        let weights = chol.solve(&means.transpose());
        let mut offsets = vec![f64::NEG_INFINITY; num_classes];
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let quad = means.row(c).transpose().dot(&weights.column(c));
                offsets[c] = -0.5 * quad + (count as f64 / n as f64).ln();
            }
        }
        Ok(Lda {
            center,
            weights,
            offsets,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.offsets.len()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let centered = DVector::from_iterator(x.len(), x.iter().zip(self.center.iter()).map(|(a, b)| a - b));
        (0..self.num_classes())
            .map(|c| {
                if self.offsets[c] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    self.weights.column(c).dot(&centered) + self.offsets[c]
                }
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

/// Ridge added to the scatter diagonal. Falls back to `gamma` itself when
/// every feature is constant within classes.
fn ridge_for(scatter: &DMatrix<f64>, gamma: f64) -> f64 {
    let mean_diag = scatter.diagonal().mean();
    if mean_diag > 0.0 {
        gamma * mean_diag
    } else {
        gamma
    }
}

/// Index of the largest score; ties go to the lowest class id.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn lda_fit(train: &FeatureTable, gamma: f64) -> Result<Lda> {
    Lda::fit(train.rows(), train.labels(), train.num_classes(), gamma)
}

/// Leave-one-out outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: Vec<f64>,
    pub folds: usize,
}

impl EvalResult {
    fn from_predictions(labels: &[usize], predictions: &[usize], num_classes: usize) -> Self {
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        for (&t, &p) in labels.iter().zip(predictions) {
            confusion[t][p] += 1;
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[c] as f64 / total as f64
                }
            })
            .collect();
        EvalResult {
            accuracy: correct as f64 / labels.len() as f64,
            confusion,
            per_class_accuracy,
            folds: labels.len(),
        }
    }

    /// Accuracy as a percentage with two decimals, e.g. `99.88`.
    pub fn accuracy_percent(&self) -> String {
        format!("{:.2}", self.accuracy * 100.0)
    }
}

/// How each leave-one-out fold is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LooStrategy {
    /// Refit the discriminant from scratch on every fold.
    Direct,
    /// Remove the held-out sample from a single full-data decomposition
    /// with a rank-one update. Produces the same scores as `Direct`.
    #[default]
    Downdate,
}

/// Leave-one-out validation of an LDA classifier.
pub fn leave_one_out(table: &FeatureTable, gamma: f64) -> Result<EvalResult> {
    leave_one_out_with(table, gamma, LooStrategy::default())
}

pub fn leave_one_out_with(table: &FeatureTable, gamma: f64, strategy: LooStrategy) -> Result<EvalResult> {
    let scores = fold_scores(table, gamma, strategy)?;
    let predictions: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    Ok(EvalResult::from_predictions(table.labels(), &predictions, table.num_classes()))
}

/// Discriminant scores of every held-out sample, one vector per fold.
pub fn fold_scores(table: &FeatureTable, gamma: f64, strategy: LooStrategy) -> Result<Vec<Vec<f64>>> {
    match strategy {
        LooStrategy::Direct => direct_fold_scores(table, gamma),
        LooStrategy::Downdate => DowndateLoo::new(table, gamma)?.scores(),
    }
}

fn direct_fold_scores(table: &FeatureTable, gamma: f64) -> Result<Vec<Vec<f64>>> {
    let n = table.num_samples();
    (0..n)
        .into_par_iter()
        .map(|held| {
            let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
            let rows = table.rows().select_rows(&keep);
            let labels: Vec<usize> = keep.iter().map(|&i| table.labels()[i]).collect();
            let model = Lda::fit(&rows, &labels, table.num_classes(), gamma)?;
            let x: Vec<f64> = table.rows().row(held).iter().copied().collect();
            Ok(model.scores(&x))
        })
        .collect()
}

/// Leave-one-out via one eigendecomposition of the full within-class
/// scatter and a Sherman-Morrison correction per fold.
///
/// Removing sample `x` of class `c` (count `n_c`) changes the scatter by
/// `-s v vᵀ` with `v = x - μ_c`, `s = n_c / (n_c - 1)`, and moves `μ_c` by
/// `-v / (n_c - 1)`. With `S = U Λ Uᵀ` every quadratic form reduces to
/// diagonal sums in the eigenbasis.
struct DowndateLoo<'a> {
    table: &'a FeatureTable,
    gamma: f64,
    counts: Vec<usize>,
    present: usize,
    eigenvalues: DVector<f64>,
    /// Samples projected onto the eigenbasis, centered at the global mean
    /// (n x f).
    projected: DMatrix<f64>,
    /// Class means in the eigenbasis (classes x f).
    means: DMatrix<f64>,
    scatter_trace: f64,
}

impl<'a> DowndateLoo<'a> {
    fn new(table: &'a FeatureTable, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {gamma}")));
        }
        let (_, f) = table.rows().shape();
        let k = table.num_classes();
        let counts = class_counts(table.labels(), k);
        let present = counts.iter().filter(|&&c| c > 0).count();

        let center = table.rows().row_mean();
        let mut centered = table.rows().clone();
        for mut row in centered.row_iter_mut() {
            row -= &center;
        }
        let mut means = DMatrix::zeros(k, f);
        for (i, &l) in table.labels().iter().enumerate() {
            let mut m = means.row_mut(l);
            m += centered.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                means.row_mut(c).unscale_mut(count as f64);
            }
        }
        let mut deviations = centered.clone();
        for (i, &l) in table.labels().iter().enumerate() {
            let mut d = deviations.row_mut(i);
            d -= means.row(l);
        }
        let scatter = deviations.transpose() * &deviations;
        let scatter_trace = scatter.trace();
        let eigen = SymmetricEigen::new(scatter);
        let basis = eigen.eigenvectors;
        Ok(DowndateLoo {
            table,
            gamma,
            counts,
            present,
            eigenvalues: eigen.eigenvalues,
            projected: &centered * &basis,
            means: &means * &basis,
            scatter_trace,
        })
    }

    fn scores(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.table.num_samples())
            .into_par_iter()
            .map(|held| self.fold(held))
            .collect()
    }

    fn fold(&self, held: usize) -> Result<Vec<f64>> {
        let f = self.table.num_features();
        let n = self.table.num_samples();
        let class = self.table.labels()[held];
        let n_c = self.counts[class];
        if n_c < 2 {
            return Err(Error::Parameter(format!(
                "class {class} needs at least two samples for leave-one-out"
            )));
        }
        let x = self.projected.row(held);
        let v: Vec<f64> = (0..f).map(|j| x[j] - self.means[(class, j)]).collect();
        let s = n_c as f64 / (n_c as f64 - 1.0);
        let v_norm2: f64 = v.iter().map(|a| a * a).sum();

        // Scatter after removal and its ridge.
        let trace = self.scatter_trace - s * v_norm2;
        let mean_diag = trace / f as f64;
        let ridge = if mean_diag > 0.0 {
            self.gamma * mean_diag
        } else {
            self.gamma
        };
        let diag: Vec<f64> = self.eigenvalues.iter().map(|&l| l + ridge).collect();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::SingularCovariance);
        }

        // Training mean after removal; scores are centered on it.
        let shift: Vec<f64> = (0..f).map(|j| -x[j] / (n as f64 - 1.0)).collect();
        let x_c: Vec<f64> = (0..f).map(|j| x[j] - shift[j]).collect();

        // B = (A - s v vᵀ)⁻¹ with A = diag(diag) in the eigenbasis.
        let inv_a = |u: &[f64], w: &[f64]| -> f64 { (0..f).map(|j| u[j] * w[j] / diag[j]).sum() };
        let va_v = inv_a(&v, &v);
        let denom = 1.0 - s * va_v;
        if !(denom > 0.0) {
            return Err(Error::SingularCovariance);
        }
        let form = |u: &[f64], w: &[f64]| -> f64 {
            inv_a(u, w) + s * inv_a(u, &v) * inv_a(&v, w) / denom
        };

        let dof = (n - 1).saturating_sub(self.present).max(1) as f64;
        let total = (n - 1) as f64;
        let k = self.table.num_classes();
        let mut scores = vec![f64::NEG_INFINITY; k];
        for (c, score) in scores.iter_mut().enumerate() {
            let count = if c == class { n_c - 1 } else { self.counts[c] };
            if count == 0 {
                continue;
            }
            let mu: Vec<f64> = (0..f)
                .map(|j| {
                    let m = if c == class {
                        self.means[(c, j)] - v[j] / (n_c as f64 - 1.0)
                    } else {
                        self.means[(c, j)]
                    };
                    m - shift[j]
                })
                .collect();
            let lin = dof * form(&mu, &x_c);
            let quad = dof * form(&mu, &mu);
            *score = lin - 0.5 * quad + (count as f64 / total).ln();
        }
        Ok(scores)
    }
}

/// Which signature combinations a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// For each hidden size: every single radius and every unordered pair
    /// of radii.
    ThetaPairs,
    /// Every 3-subset of hidden sizes, using all radii together.
    PsiTriples,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta-pairs" | "theta_pairs" => Ok(SweepMode::ThetaPairs),
            "psi-triples" | "psi_triples" => Ok(SweepMode::PsiTriples),
            other => Err(Error::Parameter(format!(
                "unknown sweep mode '{other}', expected theta-pairs or psi-triples"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub radii: Vec<u32>,
    pub qs: Vec<usize>,
    pub features: usize,
    pub accuracy: f64,
}

/// Parameter combinations visited by a sweep, in output order.
pub fn sweep_combinations(radii: &[u32], qs: &[usize], mode: SweepMode) -> Result<Vec<(Vec<u32>, Vec<usize>)>> {
    if radii.is_empty() || qs.is_empty() {
        return Err(Error::Parameter("sweep grids must not be empty".into()));
    }
    let mut r_sorted = radii.to_vec();
    r_sorted.sort_unstable();
    r_sorted.dedup();
    let mut q_sorted = qs.to_vec();
    q_sorted.sort_unstable();
    q_sorted.dedup();
    if r_sorted.len() != radii.len() || q_sorted.len() != qs.len() {
        return Err(Error::Parameter("sweep grids must not contain duplicates".into()));
    }

    let mut combos = Vec::new();
    match mode {
        SweepMode::ThetaPairs => {
            for &q in &q_sorted {
                for (i, &a) in r_sorted.iter().enumerate() {
                    combos.push((vec![a], vec![q]));
                    for &b in &r_sorted[i + 1..] {
                        combos.push((vec![a, b], vec![q]));
                    }
                }
            }
        }
        SweepMode::PsiTriples => {
            if q_sorted.len() < 3 {
                return Err(Error::Parameter("psi-triples needs at least three hidden sizes".into()));
            }
            for i in 0..q_sorted.len() {
                for j in i + 1..q_sorted.len() {
                    for k in j + 1..q_sorted.len() {
                        combos.push((r_sorted.clone(), vec![q_sorted[i], q_sorted[j], q_sorted[k]]));
                    }
                }
            }
        }
    }
    Ok(combos)
}

/// Evaluates every combination of a sweep by leave-one-out LDA.
///
/// Each `(image, radius, Q)` block is computed once and reused by all the
/// combinations that include it. `progress` is called after every image.
pub fn sweep(
    dataset: &LabeledDataset,
    radii: &[u32],
    qs: &[usize],
    mode: SweepMode,
    opts: TrainingOptions,
    gamma: f64,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<SweepRow>> {
    let combos = sweep_combinations(radii, qs, mode)?;
    let mut r_sorted = radii.to_vec();
    r_sorted.sort_unstable();
    let mut q_sorted = qs.to_vec();
    q_sorted.sort_unstable();
    let extractor = SignatureExtractor::new(&r_sorted, &q_sorted, opts)?;

    let done = std::sync::atomic::AtomicUsize::new(0);
    let blocks: Vec<BTreeMap<(u32, usize), Vec<f64>>> = dataset
        .samples
        .par_iter()
        .map(|sample| {
            let img = load_gray(&sample.path)?;
            let b = extractor.upsilon_blocks(&img)?;
            let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(finished, dataset.len());
            Ok(b)
        })
        .collect::<Result<_>>()?;

    let labels = dataset.labels();
    combos
        .into_iter()
        .map(|(rs, q_set)| {
            let rows: Vec<Vec<f64>> = blocks
                .iter()
                .map(|b| {
                    let mut row = Vec::new();
                    for &q in &q_set {
                        for &r in &rs {
                            row.extend(&b[&(r, q)]);
                        }
                    }
                    row
                })
                .collect();
            let table = FeatureTable::from_rows(&rows, labels.clone())?;
            let result = leave_one_out(&table, gamma)?;
            Ok(SweepRow {
                features: feature_count(&rs, &q_set),
                radii: rs,
                qs: q_set,
                accuracy: result.accuracy,
            })
        })
        .collect()
}
