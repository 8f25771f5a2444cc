//! How large can `Delta(P_{XZ|AC}, uniform_X x P_{Z|C})` get over the whole
//! nonsignaling polytope once `I_N` is capped?
//!
//! `Delta` is a sum of absolute values, so it is maximized one sign pattern
//! at a time. A pattern assigns a sign to every `(x, zo)` cell. Patterns that
//! differ by a relabeling of Charlie's outputs give the same optimum, and a
//! constant sign within one `zo` contributes nothing, so each `zo` column
//! picks one of `2^d - 1` options and only multisets of options are solved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nsbox::{BoxShape, NsBox};
use crate::chained::chain_weights;
use crate::error::{Error, Result};
use crate::simplex::{LinearProgram, Relation, Solution};

/// Largest number of LP variables (`d^2 z N^2 C`) accepted.
pub const LP_VARIABLE_GUARD: usize = 4096;

/// Largest number of sign patterns the driver will solve.
pub const LP_PATTERN_GUARD: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub shape: BoxShape,
    pub i_cap: f64,
    /// Alice's setting `A0` (1-based).
    pub a0: usize,
    /// Charlie's setting `C0` (1-based).
    pub c0: usize,
}

impl LpProblem {
    pub fn new(d: usize, n: usize, z: usize, i_cap: f64) -> Result<Self> {
        let p = LpProblem {
            shape: BoxShape::new(d, z, n, 1)?,
            i_cap,
            a0: 1,
            c0: 1,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.i_cap.is_finite() && self.i_cap >= 0.0) {
            return Err(Error::param(format!("i_cap must be finite and nonnegative, got {}", self.i_cap)));
        }
        let vars = self.shape.len();
        if vars > LP_VARIABLE_GUARD {
            return Err(Error::TooLarge {
                what: "LP variables",
                count: vars as u128,
                guard: LP_VARIABLE_GUARD as u128,
            });
        }
        if !(1..=self.shape.n).contains(&self.a0) {
            return Err(Error::OutOfRange {
                what: "A0",
                value: self.a0,
                lo: 1,
                hi: self.shape.n,
            });
        }
        if !(1..=self.shape.c).contains(&self.c0) {
            return Err(Error::OutOfRange {
                what: "C0",
                value: self.c0,
                lo: 1,
                hi: self.shape.c,
            });
        }
        Ok(())
    }
}

/// Sign of cell `(x, zo)` at `pattern[x * z + zo]`.
pub type SignPattern = Vec<i8>;

#[derive(Debug, Clone)]
pub struct PatternOptimum {
    pub pattern: SignPattern,
    pub value: f64,
    pub optimizer: NsBox,
    pub duality_gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LpReport {
    pub problem: LpProblem,
    pub max_delta: f64,
    /// `(d / 4) i_cap`.
    pub bound: f64,
    /// `None` when every pattern gives zero (the maximizer is any feasible box).
    pub best: Option<PatternOptimum>,
    pub patterns_solved: usize,
    pub max_duality_gap: f64,
}

fn build_constraints(p: &LpProblem) -> LinearProgram {
    let BoxShape { d, z, n, c } = p.shape;
    let nv = p.shape.len();
    let idx = |a, b, ch, x, y, zo| p.shape.index(a, b, ch, x, y, zo);
    let mut lp = LinearProgram::maximize(vec![0.0; nv]);

    for a in 1..=n {
        for b in 1..=n {
            for ch in 1..=c {
                let mut row = vec![0.0; nv];
                let start = idx(a, b, ch, 0, 0, 0);
                row[start..start + p.shape.slice_len()].fill(1.0);
                lp.add(row, Relation::Eq, 1.0);
            }
        }
    }
    // P(x, y | a, b, ch) = P(x, y | a, b, 1).
    for a in 1..=n {
        for b in 1..=n {
            for ch in 2..=c {
                for x in 0..d {
                    for y in 0..d {
                        let mut row = vec![0.0; nv];
                        for zo in 0..z {
                            row[idx(a, b, ch, x, y, zo)] += 1.0;
                            row[idx(a, b, 1, x, y, zo)] -= 1.0;
                        }
                        lp.add(row, Relation::Eq, 0.0);
                    }
                }
            }
        }
    }
    // P(x, zo | a, b, ch) = P(x, zo | a, 1, ch).
    for a in 1..=n {
        for ch in 1..=c {
            for b in 2..=n {
                for x in 0..d {
                    for zo in 0..z {
                        let mut row = vec![0.0; nv];
                        for y in 0..d {
                            row[idx(a, b, ch, x, y, zo)] += 1.0;
                            row[idx(a, 1, ch, x, y, zo)] -= 1.0;
                        }
                        lp.add(row, Relation::Eq, 0.0);
                    }
                }
            }
        }
    }
    // P(y, zo | a, b, ch) = P(y, zo | 1, b, ch).
    for b in 1..=n {
        for ch in 1..=c {
            for a in 2..=n {
                for y in 0..d {
                    for zo in 0..z {
                        let mut row = vec![0.0; nv];
                        for x in 0..d {
                            row[idx(a, b, ch, x, y, zo)] += 1.0;
                            row[idx(1, b, ch, x, y, zo)] -= 1.0;
                        }
                        lp.add(row, Relation::Eq, 0.0);
                    }
                }
            }
        }
    }
    let mut row = vec![0.0; nv];
    for ((a, b), w) in chain_weights(d, n) {
        for x in 0..d {
            for y in 0..d {
                for zo in 0..z {
                    row[idx(a, b, 1, x, y, zo)] += w[x * d + y];
                }
            }
        }
    }
    lp.add(row, Relation::Le, p.i_cap);
    lp
}

/// Objective `sum_{x,zo} sigma(x,zo) (P(x,zo|A0,C0) - P(zo|C0)/d) / d`,
/// read from the `B = 1` slice.
fn objective(p: &LpProblem, pattern: &[i8]) -> Vec<f64> {
    let BoxShape { d, z, .. } = p.shape;
    let df = d as f64;
    let mut obj = vec![0.0; p.shape.len()];
    for zo in 0..z {
        let mean: f64 = (0..d).map(|x| pattern[x * z + zo] as f64).sum::<f64>() / df;
        for x in 0..d {
            let coef = (pattern[x * z + zo] as f64 - mean) / df;
            for y in 0..d {
                obj[p.shape.index(p.a0, 1, p.c0, x, y, zo)] = coef;
            }
        }
    }
    obj
}

fn with_objective(base: &LinearProgram, obj: Vec<f64>) -> LinearProgram {
    let mut lp = LinearProgram::maximize(obj);
    for c in base.constraints() {
        lp.add(c.coeffs.clone(), c.relation, c.rhs);
    }
    lp
}

fn optimum(p: &LpProblem, pattern: SignPattern, sol: Solution) -> Result<PatternOptimum> {
    let optimizer = NsBox::new(p.shape, sol.x.iter().map(|v| v.max(0.0)).collect())?;
    Ok(PatternOptimum {
        pattern,
        value: sol.objective,
        optimizer,
        duality_gap: sol.certificate.duality_gap,
        iterations: sol.iterations,
    })
}

fn solve_checked(lp: &LinearProgram) -> Result<Solution> {
    lp.solve().map_err(|e| match e {
        Error::Unbounded => Error::Internal("nonsignaling LP reported unbounded".into()),
        other => other,
    })
}

/// The LP optimum for one sign pattern.
pub fn lp_delta_for_pattern(p: &LpProblem, pattern: &[i8]) -> Result<PatternOptimum> {
    p.validate()?;
    let BoxShape { d, z, .. } = p.shape;
    if pattern.len() != d * z {
        return Err(Error::DimensionMismatch {
            expected: d * z,
            got: pattern.len(),
        });
    }
    if pattern.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::param("sign pattern entries must be +1 or -1"));
    }
    let lp = with_objective(&build_constraints(p), objective(p, pattern));
    optimum(p, pattern.to_vec(), solve_checked(&lp)?)
}

/// Nondecreasing option sequences of length `z` over `0..k`, each a multiset.
fn multisets(k: usize, z: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; z];
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..z).rev().find(|&i| cur[i] + 1 < k) else {
            return out;
        };
        let v = cur[pos] + 1;
        cur[pos..].fill(v);
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc.saturating_mul(n as u128 - i) / (i + 1))
}

/// Sign patterns solved by [`lp_max_delta`]. Option `0` is a constant
/// column; option `m >= 1` sets `sigma(x) = +1` exactly for the bits of `m`.
pub fn reduced_patterns(d: usize, z: usize) -> Result<Vec<SignPattern>> {
    let options = (1usize << d) - 1;
    let count = binomial(options + z - 1, z);
    if count > LP_PATTERN_GUARD as u128 {
        return Err(Error::TooLarge {
            what: "sign patterns",
            count,
            guard: LP_PATTERN_GUARD as u128,
        });
    }
    Ok(multisets(options, z)
        .into_iter()
        .filter(|m| m.iter().any(|&o| o != 0))
        .map(|m| {
            let mut pat = vec![0i8; d * z];
            for (zo, &opt) in m.iter().enumerate() {
                for x in 0..d {
                    pat[x * z + zo] = if opt == 0 || opt & (1 << x) != 0 { 1 } else { -1 };
                }
            }
            pat
        })
        .collect())
}

/// Maximum of `Delta` over the capped nonsignaling polytope.
pub fn lp_max_delta(p: &LpProblem) -> Result<LpReport> {
    p.validate()?;
    let BoxShape { d, z, .. } = p.shape;
    let patterns = reduced_patterns(d, z)?;
    let base = build_constraints(p);
    let results: Vec<PatternOptimum> = patterns
        .into_par_iter()
        .map(|pat| {
            let lp = with_objective(&base, objective(p, &pat));
            optimum(p, pat, solve_checked(&lp)?)
        })
        .collect::<Result<_>>()?;

    let max_duality_gap = results.iter().map(|r| r.duality_gap).fold(0.0, f64::max);
    let patterns_solved = results.len();
    let mut best: Option<PatternOptimum> = None;
    for r in results {
        if r.value > best.as_ref().map_or(0.0, |b| b.value) {
            best = Some(r);
        }
    }
    Ok(LpReport {
        problem: *p,
        max_delta: best.as_ref().map_or(0.0, |b| b.value),
        bound: d as f64 / 4.0 * p.i_cap,
        best,
        patterns_solved,
        max_duality_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub i_cap: f64,
    pub max_delta: f64,
    pub bound: f64,
}

/// `lp_max_delta` at each cap, in input order.
pub fn lp_curve(d: usize, n: usize, z: usize, caps: &[f64]) -> Result<Vec<CurvePoint>> {
    caps.iter()
        .map(|&i_cap| {
            let r = lp_max_delta(&LpProblem::new(d, n, z, i_cap)?)?;
            Ok(CurvePoint {
                i_cap,
                max_delta: r.max_delta,
                bound: r.bound,
            })
        })
        .collect()
}
