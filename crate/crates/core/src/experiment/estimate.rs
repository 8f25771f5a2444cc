use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::counts::{poisson, CountRecord};
use crate::chained::chain_weights;
use crate::error::{Error, Result};

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMethod {
    /// Parametric bootstrap: every cell redrawn as Poisson with its observed count as mean.
    Bootstrap,
    /// First-order propagation of independent Poisson variances.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub method: ErrorMethod,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            method: ErrorMethod::Bootstrap,
            resamples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub method: ErrorMethod,
}

/// The slices of `I_N` with their weights and observed counts.
struct Chain<'a> {
    parts: Vec<(Vec<f64>, &'a [u64])>,
}

impl<'a> Chain<'a> {
    fn new(counts: &'a CountRecord) -> Result<Self> {
        let parts = chain_weights(counts.dim(), counts.n_settings())
            .into_iter()
            .map(|((a, b), w)| {
                let c = counts.slice(a, b).ok_or(Error::MissingSlice { a, b })?;
                if c.iter().all(|&v| v == 0) {
                    return Err(Error::EmptySlice { a, b });
                }
                Ok((w, c))
            })
            .collect::<Result<_>>()?;
        Ok(Chain { parts })
    }

    fn slice_value(w: &[f64], c: impl Iterator<Item = f64> + Clone) -> Option<f64> {
        let total: f64 = c.clone().sum();
        (total > 0.0).then(|| w.iter().zip(c).map(|(w, n)| w * n).sum::<f64>() / total)
    }

    fn value(&self) -> f64 {
        self.parts
            .iter()
            .map(|(w, c)| Self::slice_value(w, c.iter().map(|&v| v as f64)).unwrap_or(0.0))
            .sum()
    }

    /// `Var = sum_cells (w_c - I_slice)^2 n_c / T^2`, summed over slices.
    fn gaussian_variance(&self) -> f64 {
        self.parts
            .iter()
            .map(|(w, c)| {
                let total: f64 = c.iter().map(|&v| v as f64).sum();
                let mean = Self::slice_value(w, c.iter().map(|&v| v as f64)).unwrap_or(0.0);
                w.iter()
                    .zip(c.iter())
                    .map(|(w, &n)| (w - mean).powi(2) * n as f64)
                    .sum::<f64>()
                    / (total * total)
            })
            .sum()
    }

    fn resampled_value(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut acc = 0.0;
        for (w, c) in &self.parts {
            let draw = c
                .iter()
                .map(|&n| poisson(rng, n as f64).map(|v| v as f64))
                .collect::<Result<Vec<_>>>()?;
            // An empty redraw keeps the observed frequencies for that slice.
            acc += Self::slice_value(w, draw.iter().copied())
                .or_else(|| Self::slice_value(w, c.iter().map(|&v| v as f64)))
                .unwrap_or(0.0);
        }
        Ok(acc)
    }
}

/// `I_N` from empirical frequencies with a standard error.
pub fn estimate_in(counts: &CountRecord, opts: &EstimateOptions) -> Result<Estimate> {
    let chain = Chain::new(counts)?;
    let value = chain.value();
    let stderr = match opts.method {
        ErrorMethod::Gaussian => chain.gaussian_variance().sqrt(),
        ErrorMethod::Bootstrap => {
            if opts.resamples < MIN_RESAMPLES {
                return Err(Error::param(format!(
                    "bootstrap needs at least {MIN_RESAMPLES} resamples, got {}",
                    opts.resamples
                )));
            }
            let draws = (0..opts.resamples)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(r as u64);
                    chain.resampled_value(&mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            var.sqrt()
        }
    };
    Ok(Estimate {
        value,
        stderr,
        method: opts.method,
    })
}
