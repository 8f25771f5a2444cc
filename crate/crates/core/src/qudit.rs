//! Bipartite qudit states, the phase-measurement bases of the chained
//! Bell test, and exact Born-rule outcome tables.
//!
//! Settings are numbered `1..=N` and outcomes `0..d`. Alice's setting `A`
//! projects onto
//!
//! ```text
//! |X_A> = 1/sqrt(d) sum_j exp[+2 pi i j (X - alpha_A) / d] |j>,   alpha_A = (A - 1/2) / N
//! ```
//!
//! and Bob's setting `B` onto
//!
//! ```text
//! |Y_B> = 1/sqrt(d) sum_j exp[-2 pi i j (Y - beta_B) / d] |j>,    beta_B = B / N
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of states and measurement vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on the total probability of a table slice.
pub const SUM_TOL: f64 = 1e-9;
/// Largest negative roundoff that is silently clamped to zero.
pub const CLAMP_TOL: f64 = 1e-9;

/// A pure state `sum_j lambda_j |j>|j>` with real nonnegative Schmidt amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtState {
    amps: Vec<f64>,
}

impl SchmidtState {
    pub fn new(amps: Vec<f64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::InvalidDimension(amps.len()));
        }
        if let Some(&bad) = amps.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::param(format!(
                "Schmidt amplitudes must be finite and nonnegative, got {bad}"
            )));
        }
        let norm2: f64 = amps.iter().map(|a| a * a).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                what: "Schmidt amplitudes (squared)".into(),
                sum: norm2,
            });
        }
        Ok(SchmidtState { amps })
    }

    /// Rescales arbitrary nonnegative weights to a unit-norm state.
    pub fn normalized(amps: Vec<f64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("amplitudes have zero norm"));
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let target = 1.0 / (self.dim() as f64).sqrt();
        self.amps.iter().all(|a| (a - target).abs() <= tol)
    }
}

/// The maximally entangled state `|psi_d>`.
pub fn make_maximally_entangled(d: usize) -> Result<SchmidtState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let a = 1.0 / (d as f64).sqrt();
    SchmidtState::new(vec![a; d])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// The `(d, N)` family of measurement settings with offsets `alpha_A`, `beta_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsFamily {
    dim: usize,
    n_settings: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl SettingsFamily {
    pub fn new(dim: usize, n_settings: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if n_settings == 0 {
            return Err(Error::OutOfRange {
                what: "N",
                value: 0,
                lo: 1,
                hi: usize::MAX,
            });
        }
        let n = n_settings as f64;
        let alpha = (1..=n_settings).map(|a| (a as f64 - 0.5) / n).collect();
        let beta = (1..=n_settings).map(|b| b as f64 / n).collect();
        Ok(SettingsFamily {
            dim,
            n_settings,
            alpha,
            beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    /// Offset of Alice's setting `a` (1-based).
    pub fn alpha(&self, a: usize) -> f64 {
        self.alpha[a - 1]
    }

    /// Offset of Bob's setting `b` (1-based).
    pub fn beta(&self, b: usize) -> f64 {
        self.beta[b - 1]
    }

    fn check_setting(&self, setting: usize) -> Result<()> {
        if setting == 0 || setting > self.n_settings {
            return Err(Error::OutOfRange {
                what: "setting",
                value: setting,
                lo: 1,
                hi: self.n_settings,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub entries: Vec<Complex64>,
}

impl MeasurementVector {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &MeasurementVector) -> Complex64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn projector_vector(
    party: Party,
    family: &SettingsFamily,
    setting: usize,
    outcome: usize,
) -> Result<MeasurementVector> {
    family.check_setting(setting)?;
    let d = family.dim();
    if outcome >= d {
        return Err(Error::OutOfRange {
            what: "outcome",
            value: outcome,
            lo: 0,
            hi: d - 1,
        });
    }
    let (sign, offset) = match party {
        Party::Alice => (1.0, family.alpha(setting)),
        Party::Bob => (-1.0, family.beta(setting)),
    };
    let scale = 1.0 / (d as f64).sqrt();
    let entries = (0..d)
        .map(|j| {
            let phase = sign * 2.0 * PI / d as f64 * j as f64 * (outcome as f64 - offset);
            Complex64::from_polar(scale, phase)
        })
        .collect();
    Ok(MeasurementVector { entries })
}

/// Conditional outcome distributions `P(x, y | A, B)`, one `d x d` slice per
/// setting pair. Slices are stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dim: usize,
    n_settings: usize,
    slices: BTreeMap<(usize, usize), Vec<f64>>,
}

impl JointTable {
    /// Validates and normalizes each slice. Roundoff negatives down to
    /// `-CLAMP_TOL` are clamped to zero.
    pub fn new(
        dim: usize,
        n_settings: usize,
        slices: BTreeMap<(usize, usize), Vec<f64>>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut out = BTreeMap::new();
        for ((a, b), mut table) in slices {
            for (what, v) in [("A", a), ("B", b)] {
                if v == 0 || v > n_settings {
                    return Err(Error::OutOfRange {
                        what,
                        value: v,
                        lo: 1,
                        hi: n_settings,
                    });
                }
            }
            if table.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: table.len(),
                });
            }
            for p in table.iter_mut() {
                if !p.is_finite() || *p < -CLAMP_TOL {
                    return Err(Error::NegativeProbability {
                        what: format!("slice (A={a}, B={b})"),
                        value: *p,
                    });
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            let sum: f64 = table.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::NotNormalized {
                    what: format!("slice (A={a}, B={b})"),
                    sum,
                });
            }
            table.iter_mut().for_each(|p| *p /= sum);
            out.insert((a, b), table);
        }
        Ok(JointTable {
            dim,
            n_settings,
            slices: out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn slice(&self, a: usize, b: usize) -> Option<&[f64]> {
        self.slices.get(&(a, b)).map(Vec::as_slice)
    }

    pub fn slices(&self) -> impl Iterator<Item = ((usize, usize), &[f64])> {
        self.slices.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> Option<f64> {
        self.slice(a, b).map(|t| t[x * self.dim + y])
    }

    /// `sum_y P(x, y | a, b)` for each `x`.
    pub fn alice_marginal(&self, a: usize, b: usize) -> Option<Vec<f64>> {
        let d = self.dim;
        self.slice(a, b)
            .map(|t| (0..d).map(|x| t[x * d..(x + 1) * d].iter().sum()).collect())
    }

    /// `sum_x P(x, y | a, b)` for each `y`.
    pub fn bob_marginal(&self, a: usize, b: usize) -> Option<Vec<f64>> {
        let d = self.dim;
        self.slice(a, b)
            .map(|t| (0..d).map(|y| (0..d).map(|x| t[x * d + y]).sum()).collect())
    }

    /// Applies `f` to every slice and re-validates.
    pub fn map_slices<F>(&self, mut f: F) -> Result<JointTable>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let slices = self.slices.iter().map(|(k, t)| (*k, f(t))).collect();
        JointTable::new(self.dim, self.n_settings, slices)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let tables: Vec<_> = self
            .slices
            .iter()
            .map(|((a, b), t)| {
                let rows: Vec<Vec<f64>> = t.chunks(self.dim).map(<[f64]>::to_vec).collect();
                serde_json::json!({ "a": a, "b": b, "table": rows })
            })
            .collect();
        serde_json::json!({
            "dim": self.dim,
            "n_settings": self.n_settings,
            "tables": tables,
        })
    }
}

/// Exact `P(x, y | A, B)` for every setting pair of `family`.
pub fn born_joint_table(state: &SchmidtState, family: &SettingsFamily) -> Result<JointTable> {
    let d = family.dim();
    if state.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: state.dim(),
        });
    }
    let n = family.n_settings();
    let basis = |party| -> Result<Vec<Vec<MeasurementVector>>> {
        (1..=n)
            .map(|s| (0..d).map(|o| projector_vector(party, family, s, o)).collect())
            .collect()
    };
    let alice = basis(Party::Alice)?;
    let bob = basis(Party::Bob)?;

    let mut slices = BTreeMap::new();
    for a in 1..=n {
        for b in 1..=n {
            let mut table = Vec::with_capacity(d * d);
            for xv in &alice[a - 1] {
                for yv in &bob[b - 1] {
                    let amp: Complex64 = (0..d)
                        .map(|j| state.amps()[j] * (xv.entries[j] * yv.entries[j]).conj())
                        .sum();
                    table.push(amp.norm_sqr());
                }
            }
            slices.insert((a, b), table);
        }
    }
    JointTable::new(d, n, slices)
}
