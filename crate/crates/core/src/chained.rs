//! The chained Bell quantity
//!
//! ```text
//! I_N = sum_{i=1..N} <[X_i - Y_i]> + <[Y_i - X_{i+1}]>,   X_{N+1} := X_1 + 1 (mod d)
//! ```
//!
//! where `[.]` is reduction mod `d` and `<.>` the mean of the reduced value.
//! The wraparound term is evaluated on the `(A=1, B=N)` table with Alice's
//! outcome relabeled `x -> x + 1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::{born_joint_table, make_maximally_entangled, JointTable, SettingsFamily, SUM_TOL};

/// Which modular difference a chain term averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `[x - y]`
    XMinusY,
    /// `[y - x]`
    YMinusXNext,
    /// `[y - (x + 1)]`, the wraparound term.
    YMinusXNextShifted,
}

impl Pairing {
    /// The reduced difference for outcomes `(x, y)`.
    pub fn weight(self, d: usize, x: usize, y: usize) -> usize {
        match self {
            Pairing::XMinusY => (x + d - y) % d,
            Pairing::YMinusXNext => (y + d - x) % d,
            Pairing::YMinusXNextShifted => (y + 2 * d - x - 1) % d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainTerm {
    pub a: usize,
    pub b: usize,
    pub pairing: Pairing,
}

/// The `2N` terms of `I_N` in order: `(i, i)` then `(i + 1, i)`, with the
/// last one wrapping to `(1, N)`.
pub fn chain_terms(n: usize) -> Vec<ChainTerm> {
    let mut terms = Vec::with_capacity(2 * n);
    for i in 1..=n {
        terms.push(ChainTerm {
            a: i,
            b: i,
            pairing: Pairing::XMinusY,
        });
        let (a, pairing) = if i < n {
            (i + 1, Pairing::YMinusXNext)
        } else {
            (1, Pairing::YMinusXNextShifted)
        };
        terms.push(ChainTerm { a, b: i, pairing });
    }
    terms
}

/// Combined `d x d` coefficient matrix per setting pair, so that
/// `I_N = sum_{(a,b)} sum_{x,y} w_ab(x,y) P(x,y|a,b)`. For `N = 1` both
/// terms land on the same slice.
pub fn chain_weights(d: usize, n: usize) -> BTreeMap<(usize, usize), Vec<f64>> {
    let mut out: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for t in chain_terms(n) {
        let w = out.entry((t.a, t.b)).or_insert_with(|| vec![0.0; d * d]);
        for x in 0..d {
            for y in 0..d {
                w[x * d + y] += t.pairing.weight(d, x, y) as f64;
            }
        }
    }
    out
}

/// `sum_k k P([.] = k)` for one `d x d` table (row-major in `x`).
pub fn modular_expectation(table: &[f64], d: usize, pairing: Pairing) -> Result<f64> {
    if table.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: table.len(),
        });
    }
    let sum: f64 = table.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::NotNormalized {
            what: "table".into(),
            sum,
        });
    }
    let mut acc = 0.0;
    for x in 0..d {
        for y in 0..d {
            acc += pairing.weight(d, x, y) as f64 * table[x * d + y];
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedBellValue {
    pub dim: usize,
    pub n_settings: usize,
    pub value: f64,
    /// `<[X_i - Y_i]>` and `<[Y_i - X_{i+1}]>`, interleaved as in [`chain_terms`].
    pub per_term: Vec<f64>,
}

pub fn evaluate_in(joint: &JointTable) -> Result<ChainedBellValue> {
    let d = joint.dim();
    let n = joint.n_settings();
    let per_term = chain_terms(n)
        .into_iter()
        .map(|t| {
            let slice = joint
                .slice(t.a, t.b)
                .ok_or(Error::MissingSlice { a: t.a, b: t.b })?;
            modular_expectation(slice, d, t.pairing)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainedBellValue {
        dim: d,
        n_settings: n,
        value: per_term.iter().sum(),
        per_term,
    })
}

/// `pi^2 / (4 d^2) * sum_{j=1}^{d-1} j / sin^2(pi j / d)`
pub fn gamma_constant(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    let sum: f64 = (1..d)
        .map(|j| {
            let s = (PI * j as f64 / df).sin();
            j as f64 / (s * s)
        })
        .sum();
    Ok(PI * PI / (4.0 * df * df) * sum)
}

/// Leading-order quantum prediction `2 gamma / N`.
pub fn asymptotic_in(d: usize, n: usize) -> Result<f64> {
    Ok(2.0 * gamma_constant(d)? / n as f64)
}

/// Exact `I_N` for `|psi_d>` with the standard settings.
pub fn quantum_in(d: usize, n: usize) -> Result<ChainedBellValue> {
    let psi = make_maximally_entangled(d)?;
    let family = SettingsFamily::new(d, n)?;
    evaluate_in(&born_joint_table(&psi, &family)?)
}

/// Exact quantum values over a range of `N`, evaluated in parallel.
pub fn quantum_scan(d: usize, ns: &[usize]) -> Result<BTreeMap<usize, f64>> {
    ns.par_iter()
        .map(|&n| quantum_in(d, n).map(|v| (n, v.value)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumScan {
    pub dim: usize,
    /// `N -> (I_N, standard error)`; the error is 0 for exact values.
    pub scanned: BTreeMap<usize, (f64, f64)>,
    pub argmin_n: usize,
    pub i_star: f64,
}

impl MinimumScan {
    pub fn stderr_at_min(&self) -> f64 {
        self.scanned[&self.argmin_n].1
    }
}

/// Picks the smallest value; ties go to the smaller `N`.
pub fn scan_minimum(dim: usize, values: BTreeMap<usize, (f64, f64)>) -> Result<MinimumScan> {
    // BTreeMap iterates in increasing N, so a strict `<` keeps the first of equals.
    let (argmin_n, i_star) = values
        .iter()
        .fold(None, |best: Option<(usize, f64)>, (&n, &(v, _))| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((n, v)),
        })
        .ok_or_else(|| Error::param("scan_minimum needs at least one entry"))?;
    Ok(MinimumScan {
        dim,
        scanned: values,
        argmin_n,
        i_star,
    })
}
