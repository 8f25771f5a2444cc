use serde::{Deserialize, Serialize};

use super::spectrum::SubspaceSelection;
use crate::error::{Error, Result};
use crate::qudit::JointTable;

/// Leakage between neighbouring outcomes for unit mode spacing; spacing `s`
/// gives `CROSSTALK_BASE / s^2`.
pub const CROSSTALK_BASE: f64 = 0.002;

/// Detector and source imperfections applied to an ideal table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Weight of the ideal table against white noise.
    pub visibility: f64,
    /// Row-stochastic `d x d` table: `crosstalk[true][detected]`.
    pub crosstalk: Vec<Vec<f64>>,
    /// Expected coincidences per setting pair at unit filter efficiency.
    pub rate_scale: f64,
    /// Accidental coincidences per setting pair, spread evenly over cells.
    pub dark_rate: f64,
}

impl NoiseModel {
    pub fn ideal(d: usize, rate_scale: f64) -> Self {
        NoiseModel {
            visibility: 1.0,
            crosstalk: identity(d),
            rate_scale,
            dark_rate: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.crosstalk.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::param(format!("visibility {} outside [0, 1]", self.visibility)));
        }
        for (name, r) in [("rate_scale", self.rate_scale), ("dark_rate", self.dark_rate)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and nonnegative, got {r}")));
            }
        }
        let d = self.crosstalk.len();
        for (i, row) in self.crosstalk.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if let Some(&v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::NegativeProbability {
                    what: format!("crosstalk row {i}"),
                    value: v,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized {
                    what: format!("crosstalk row {i}"),
                    sum,
                });
            }
        }
        Ok(())
    }
}

pub fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Leaks `eps` from each outcome to each of its two cyclic neighbours.
pub fn neighbour_crosstalk(d: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::param(format!("crosstalk leakage {eps} outside [0, 0.5]")));
    }
    let mut m = identity(d);
    for (x, row) in m.iter_mut().enumerate() {
        row[x] -= 2.0 * eps;
        row[(x + 1) % d] += eps;
        row[(x + d - 1) % d] += eps;
    }
    Ok(m)
}

/// Crosstalk for a mode selection: wider spacing leaks less.
pub fn crosstalk_for(subspace: &SubspaceSelection, base: f64) -> Result<Vec<Vec<f64>>> {
    let s = subspace.min_spacing().max(1) as f64;
    neighbour_crosstalk(subspace.dim(), base / (s * s))
}

/// `P' = V P + (1 - V) / d^2`, then each party's outcome is passed
/// through the crosstalk table independently.
pub fn apply_noise(joint: &JointTable, noise: &NoiseModel) -> Result<JointTable> {
    noise.validate()?;
    let d = joint.dim();
    if noise.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: noise.dim(),
        });
    }
    let v = noise.visibility;
    let white = (1.0 - v) / (d * d) as f64;
    let m = &noise.crosstalk;
    joint.map_slices(|t| {
        let mixed: Vec<f64> = t.iter().map(|p| v * p + white).collect();
        // First Alice's outcome, then Bob's.
        let mut half = vec![0.0; d * d];
        for x in 0..d {
            for y in 0..d {
                let p = mixed[x * d + y];
                if p != 0.0 {
                    for (xd, c) in m[x].iter().enumerate() {
                        half[xd * d + y] += c * p;
                    }
                }
            }
        }
        let mut out = vec![0.0; d * d];
        for x in 0..d {
            for y in 0..d {
                let p = half[x * d + y];
                if p != 0.0 {
                    for (yd, c) in m[y].iter().enumerate() {
                        out[x * d + yd] += c * p;
                    }
                }
            }
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= sum);
        out
    })
}
