//! Texture signatures from networks trained on 3x3 measure windows.
//!
//! For every interior vertex, the measure values of its eight neighbors form
//! one input column and the vertex out-degree is the target. One network is
//! trained per measure (k, ks, ke) and their output weights are
//! concatenated; signatures over several radii and hidden sizes are
//! concatenations of those blocks, radius-major within each hidden size.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GrayImage;
use crate::network::{compute_measures, Measure, MeasureMaps};
use crate::rnn::{solve_output_weights, HiddenWeights, TrainingSet};

/// Neighbors per window (3x3 without the center).
pub const WINDOW_ATTRIBUTES: usize = 8;

pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Neighbor offsets `(dy, dx)` in raster order: NW, N, NE, W, E, SW, S, SE.
const WINDOW: [(isize, isize); WINDOW_ATTRIBUTES] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Window samples of one measure: neighbor values (`8 x N`) and the raw
/// center out-degree of each window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSamples {
    pub measure: Measure,
    pub inputs: DMatrix<f64>,
    pub labels: Vec<f64>,
}

/// Slides a 3x3 window over every interior pixel, once per measure.
pub fn extract_windows(maps: &MeasureMaps) -> Result<[WindowSamples; 3]> {
    let (w, h) = (maps.width, maps.height);
    if w < 3 || h < 3 {
        return Err(Error::Dimension {
            width: w,
            height: h,
            min: 3,
        });
    }
    let n = (w - 2) * (h - 2);
    let mut labels = Vec::with_capacity(n);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            labels.push(maps.k[y * w + x]);
        }
    }

    let samples = Measure::ALL.map(|measure| {
        let values = maps.get(measure);
        let mut inputs = DMatrix::zeros(WINDOW_ATTRIBUTES, n);
        let mut col = 0;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                for (row, &(dy, dx)) in WINDOW.iter().enumerate() {
                    let ny = (y as isize + dy) as usize;
                    let nx = (x as isize + dx) as usize;
                    inputs[(row, col)] = values[ny * w + nx];
                }
                col += 1;
            }
        }
        WindowSamples {
            measure,
            inputs,
            labels: labels.clone(),
        }
    });
    Ok(samples)
}

/// How window labels are scaled before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScaling {
    /// Out-degree divided by the maximum possible degree, in `[0, 1]`.
    MaxDegree,
    /// Out-degree as an integer count.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    pub lambda: f64,
    pub label_scaling: LabelScaling,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions {
            lambda: DEFAULT_LAMBDA,
            label_scaling: LabelScaling::MaxDegree,
        }
    }
}

impl TrainingOptions {
    fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )))
        }
    }
}

/// Training sets for the three measures of one radius.
fn training_sets(maps: &MeasureMaps, scaling: LabelScaling) -> Result<[TrainingSet; 3]> {
    let [k, ks, ke] = extract_windows(maps)?;
    let build = |s: WindowSamples| {
        let labels: Vec<f64> = match scaling {
            LabelScaling::MaxDegree => {
                let max = maps.max_degree as f64;
                s.labels.iter().map(|v| v / max).collect()
            }
            LabelScaling::Raw => s.labels,
        };
        TrainingSet::from_raw(&s.inputs, &labels)
    };
    Ok([build(k)?, build(ks)?, build(ke)?])
}

fn upsilon_from_sets(sets: &[TrainingSet; 3], hw: &HiddenWeights, lambda: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * (hw.hidden_size() + 1));
    for ts in sets {
        let weights = solve_output_weights(ts, hw, lambda)?;
        out.extend(weights.f.iter());
    }
    Ok(out)
}

/// Output weights of the k, ks and ke networks for one radius and hidden
/// size, `3 (Q + 1)` values.
pub fn signature_upsilon(
    img: &GrayImage,
    radius: u32,
    q: usize,
    opts: &TrainingOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    let hw = HiddenWeights::new(q, WINDOW_ATTRIBUTES)?;
    let maps = compute_measures(img, radius)?;
    upsilon_from_sets(&training_sets(&maps, opts.label_scaling)?, &hw, opts.lambda)
}

fn check_increasing<T: PartialOrd + std::fmt::Debug>(what: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Parameter(format!("{what} must not be empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "{what} must be strictly increasing without duplicates, got {values:?}"
        )));
    }
    Ok(())
}

/// Concatenation of [`signature_upsilon`] over `radii`, in the given order.
///
/// Radii must be distinct; any order is accepted and preserved.
pub fn signature_theta(
    img: &GrayImage,
    radii: &[u32],
    q: usize,
    opts: &TrainingOptions,
) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(Error::Parameter("radii must not be empty".into()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parameter(format!("duplicate radius in {radii:?}")));
    }
    let mut out = Vec::with_capacity(radii.len() * 3 * (q + 1));
    for &r in radii {
        out.extend(signature_upsilon(img, r, q, opts)?);
    }
    Ok(out)
}

/// Provenance of a signature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMeta {
    pub radii: Vec<u32>,
    pub qs: Vec<usize>,
    pub measure_order: Vec<Measure>,
    pub lambda: f64,
    pub label_scaling: LabelScaling,
}

impl SignatureMeta {
    pub fn feature_count(&self) -> usize {
        feature_count(&self.radii, &self.qs)
    }

    /// Column names in signature order, e.g. `q4_r2_ks_3`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_count());
        for &q in &self.qs {
            for &r in &self.radii {
                for m in &self.measure_order {
                    for j in 0..=q {
                        names.push(format!("q{q}_r{r}_{m}_{j}"));
                    }
                }
            }
        }
        names
    }
}

/// `Σ_Q |radii| · 3 · (Q + 1)`.
pub fn feature_count(radii: &[u32], qs: &[usize]) -> usize {
    qs.iter().map(|q| radii.len() * 3 * (q + 1)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub values: Vec<f64>,
    pub meta: SignatureMeta,
}

/// Computes signatures for a fixed set of radii and hidden sizes, sharing
/// one hidden weight matrix per hidden size and one measure computation
/// per radius.
#[derive(Debug, Clone)]
pub struct SignatureExtractor {
    meta: SignatureMeta,
    weights: Vec<HiddenWeights>,
}

impl SignatureExtractor {
    pub fn new(radii: &[u32], qs: &[usize], opts: TrainingOptions) -> Result<Self> {
        check_increasing("radii", radii)?;
        check_increasing("hidden sizes", qs)?;
        if radii[0] < 1 {
            return Err(Error::Parameter("radii must be >= 1".into()));
        }
        opts.validate()?;
        let weights = qs
            .iter()
            .map(|&q| HiddenWeights::new(q, WINDOW_ATTRIBUTES))
            .collect::<Result<Vec<_>>>()?;
        Ok(SignatureExtractor {
            meta: SignatureMeta {
                radii: radii.to_vec(),
                qs: qs.to_vec(),
                measure_order: Measure::ALL.to_vec(),
                lambda: opts.lambda,
                label_scaling: opts.label_scaling,
            },
            weights,
        })
    }

    pub fn meta(&self) -> &SignatureMeta {
        &self.meta
    }

    pub fn feature_count(&self) -> usize {
        self.meta.feature_count()
    }

    /// Per-(radius, Q) blocks, keyed by `(radius, Q)`.
    pub fn upsilon_blocks(&self, img: &GrayImage) -> Result<BTreeMap<(u32, usize), Vec<f64>>> {
        let mut blocks = BTreeMap::new();
        for &r in &self.meta.radii {
            let maps = compute_measures(img, r)?;
            let sets = training_sets(&maps, self.meta.label_scaling)?;
            for hw in &self.weights {
                let block = upsilon_from_sets(&sets, hw, self.meta.lambda)?;
                blocks.insert((r, hw.hidden_size()), block);
            }
        }
        Ok(blocks)
    }

    /// The full multi-radius, multi-Q signature.
    pub fn extract(&self, img: &GrayImage) -> Result<Signature> {
        let blocks = self.upsilon_blocks(img)?;
        let mut values = Vec::with_capacity(self.feature_count());
        for &q in &self.meta.qs {
            for &r in &self.meta.radii {
                values.extend(&blocks[&(r, q)]);
            }
        }
        Ok(Signature {
            values,
            meta: self.meta.clone(),
        })
    }
}

/// Concatenation of [`signature_theta`] over strictly increasing hidden
/// sizes `qs`, with strictly increasing `radii`.
pub fn signature_psi(
    img: &GrayImage,
    radii: &[u32],
    qs: &[usize],
    opts: &TrainingOptions,
) -> Result<Signature> {
    SignatureExtractor::new(radii, qs, *opts)?.extract(img)
}
