use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_GAMMA;
use crate::signature::{LabelScaling, TrainingOptions, DEFAULT_LAMBDA};

/// Extraction and evaluation parameters shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub radii: Vec<u32>,
    pub qs: Vec<usize>,
    pub lambda: f64,
    pub label_normalization: bool,
    pub lda_gamma: f64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            radii: vec![2, 9],
            qs: vec![4, 19, 29],
            lambda: DEFAULT_LAMBDA,
            label_normalization: true,
            lda_gamma: DEFAULT_GAMMA,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[u64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.radii.iter().map(|&r| u64::from(r)).collect::<Vec<_>>()) || self.radii[0] == 0 {
            return Err(Error::Parameter(format!(
                "radii must be positive and strictly increasing, got {:?}",
                self.radii
            )));
        }
        if !increasing(&self.qs.iter().map(|&q| q as u64).collect::<Vec<_>>()) || self.qs[0] == 0 {
            return Err(Error::Parameter(format!(
                "hidden sizes must be positive and strictly increasing, got {:?}",
                self.qs
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.lda_gamma >= 0.0 && self.lda_gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {}", self.lda_gamma)));
        }
        if self.threads == 0 {
            return Err(Error::Parameter("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn training_options(&self) -> TrainingOptions {
        TrainingOptions {
            lambda: self.lambda,
            label_scaling: if self.label_normalization {
                LabelScaling::MaxDegree
            } else {
                LabelScaling::Raw
            },
        }
    }

    /// Runs `f` on a rayon pool capped at `self.threads` workers.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}
