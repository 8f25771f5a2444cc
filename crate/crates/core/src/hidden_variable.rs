//! Lower bounds on `I_N` imposed by hidden-variable models, with brute-force
//! and Monte Carlo cross-checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chained::{chain_terms, evaluate_in};
use crate::error::{Error, Result};
use crate::qudit::JointTable;

/// Largest number of strategies `bell_bound_bruteforce` will enumerate.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

/// Outcomes fixed by the settings alone: `X = f(A)`, `Y = g(B)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    dim: usize,
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(dim: usize, alice: Vec<usize>, bob: Vec<usize>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if alice.is_empty() || alice.len() != bob.len() {
            return Err(Error::param("alice and bob maps need the same nonzero length"));
        }
        if let Some(&o) = alice.iter().chain(&bob).find(|&&o| o >= dim) {
            return Err(Error::OutOfRange {
                what: "outcome",
                value: o,
                lo: 0,
                hi: dim - 1,
            });
        }
        Ok(DeterministicStrategy { dim, alice, bob })
    }

    /// Strategy number `index` in lexicographic order over
    /// `(f(1), .., f(N), g(1), .., g(N))`, most significant digit first.
    pub fn from_index(dim: usize, n: usize, mut index: u128) -> Self {
        let mut digits = vec![0usize; 2 * n];
        for slot in digits.iter_mut().rev() {
            *slot = (index % dim as u128) as usize;
            index /= dim as u128;
        }
        let bob = digits.split_off(n);
        DeterministicStrategy {
            dim,
            alice: digits,
            bob,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.alice.len()
    }

    /// `f(a)` for 1-based `a`.
    pub fn alice(&self, a: usize) -> usize {
        self.alice[a - 1]
    }

    pub fn bob(&self, b: usize) -> usize {
        self.bob[b - 1]
    }

    /// `I_N` of this strategy in exact integer arithmetic.
    pub fn chained_value(&self) -> usize {
        let d = self.dim;
        let n = self.n_settings();
        (1..=n)
            .map(|i| {
                let x = self.alice(i);
                let y = self.bob(i);
                let (x_next, shift) = if i < n { (self.alice(i + 1), 0) } else { (self.alice(1), 1) };
                (x + d - y) % d + (y + 2 * d - x_next - shift) % d
            })
            .sum()
    }

    /// The 0/1 outcome table this strategy produces.
    pub fn joint_table(&self) -> JointTable {
        let d = self.dim;
        let n = self.n_settings();
        let mut slices = BTreeMap::new();
        for a in 1..=n {
            for b in 1..=n {
                let mut t = vec![0.0; d * d];
                t[self.alice(a) * d + self.bob(b)] = 1.0;
                slices.insert((a, b), t);
            }
        }
        JointTable::new(d, n, slices).expect("deterministic tables are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Bell,
    Leggett,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Analytic,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub model: Model,
    pub dim: usize,
    /// `None` when the bound does not depend on `N`.
    pub n_settings: Option<usize>,
    pub bound: f64,
    pub kind: BoundKind,
}

/// `8 (d - 1) / d^3`, the Bell-model bound obtained through the predictive-power inequality.
pub fn bell_bound_analytic(d: usize) -> Result<BoundReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    Ok(BoundReport {
        model: Model::Bell,
        dim: d,
        n_settings: None,
        bound: 8.0 * (df - 1.0) / (df * df * df),
        kind: BoundKind::Analytic,
    })
}

pub fn strategy_count(d: usize, n: usize) -> Option<u128> {
    (d as u128).checked_pow(2 * n as u32)
}

/// Minimum of `I_N` over every deterministic local strategy.
pub fn bell_bound_bruteforce(d: usize, n: usize) -> Result<BoundReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let count = strategy_count(d, n).unwrap_or(u128::MAX);
    if count > ENUMERATION_GUARD {
        return Err(Error::TooLarge {
            what: "deterministic strategies",
            count,
            guard: ENUMERATION_GUARD,
        });
    }
    const CHUNK: u128 = 1 << 14;
    let chunks = count.div_ceil(CHUNK);
    let min = (0..chunks)
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(count))
                .map(|i| DeterministicStrategy::from_index(d, n, i).chained_value())
                .min()
                .unwrap_or(usize::MAX)
        })
        .min()
        .unwrap_or(usize::MAX);
    Ok(BoundReport {
        model: Model::Bell,
        dim: d,
        n_settings: Some(n),
        bound: min as f64,
        kind: BoundKind::BruteForce,
    })
}

/// `I_N` of a convex mixture of deterministic strategies, evaluated on the
/// mixed table and checked against the weighted sum of per-strategy values.
pub fn mixture_in(strategies: &[(DeterministicStrategy, f64)]) -> Result<f64> {
    let (first, _) = strategies
        .first()
        .ok_or_else(|| Error::param("empty mixture"))?;
    let (d, n) = (first.dim(), first.n_settings());
    if strategies.iter().any(|(s, _)| s.dim() != d || s.n_settings() != n) {
        return Err(Error::param("mixture components differ in (d, N)"));
    }
    if strategies.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::param("mixture weights must be nonnegative"));
    }
    let total: f64 = strategies.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized {
            what: "mixture weights".into(),
            sum: total,
        });
    }

    let mut slices: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for t in chain_terms(n) {
        slices.entry((t.a, t.b)).or_insert_with(|| vec![0.0; d * d]);
    }
    for (s, w) in strategies {
        for (&(a, b), t) in slices.iter_mut() {
            t[s.alice(a) * d + s.bob(b)] += w;
        }
    }
    let via_table = evaluate_in(&JointTable::new(d, n, slices)?)?.value;
    let via_sum: f64 = strategies
        .iter()
        .map(|(s, w)| w * s.chained_value() as f64)
        .sum();
    if (via_table - via_sum).abs() > 1e-12 {
        return Err(Error::Internal(format!(
            "mixture I_N {via_table} disagrees with weighted sum {via_sum}"
        )));
    }
    Ok(via_table)
}

/// How Leggett's local hidden vector `u` is distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeggettModel {
    /// `u` fixed in the measurement plane, midway between two settings.
    FixedInPlane,
    /// A second, orthogonal measurement plane.
    TwoOrthogonalPlanes,
    UniformSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeggettConfig {
    pub n_settings: usize,
    pub model: LeggettModel,
}

/// Qubit-only bounds: `cos(pi/2N)`, `cos(pi/2N)/sqrt 2`, or `1/2`.
pub fn leggett_bound(cfg: LeggettConfig) -> Result<BoundReport> {
    if cfg.n_settings == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    let c = (PI / (2.0 * cfg.n_settings as f64)).cos();
    let (bound, n_settings) = match cfg.model {
        LeggettModel::FixedInPlane => (c, Some(cfg.n_settings)),
        LeggettModel::TwoOrthogonalPlanes => (c / 2f64.sqrt(), Some(cfg.n_settings)),
        LeggettModel::UniformSphere => (0.5, None),
    };
    Ok(BoundReport {
        model: Model::Leggett,
        dim: 2,
        n_settings,
        bound,
        kind: BoundKind::Analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HiddenVector {
    UniformSphere,
    Fixed([f64; 3]),
}

/// Monte Carlo estimate of `<|a . u|>` over `u`.
pub fn mean_abs_projection(a: [f64; 3], u: HiddenVector, samples: usize, seed: u64) -> Result<f64> {
    let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::param("measurement direction must be nonzero"));
    }
    let a = a.map(|c| c / norm);
    let dot = |u: [f64; 3]| (a[0] * u[0] + a[1] * u[1] + a[2] * u[2]).abs();
    match u {
        HiddenVector::Fixed(u) => {
            let un = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            Ok(dot(u.map(|c| c / un)))
        }
        HiddenVector::UniformSphere => {
            if samples == 0 {
                return Err(Error::param("need at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = 0.0;
            for _ in 0..samples {
                let phi = rng.random_range(0.0..2.0 * PI);
                let cos_t: f64 = rng.random_range(-1.0..=1.0);
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                acc += dot([sin_t * phi.cos(), sin_t * phi.sin(), cos_t]);
            }
            Ok(acc / samples as f64)
        }
    }
}

/// `<|a . u|>` for `u` uniform on the sphere and `a` along `z`; converges to 1/2.
pub fn leggett_delta_oracle(samples: usize, seed: u64) -> Result<f64> {
    if samples < 10_000 {
        return Err(Error::param(format!("need at least 10^4 samples, got {samples}")));
    }
    mean_abs_projection([0.0, 0.0, 1.0], HiddenVector::UniformSphere, samples, seed)
}

/// `(bound - i_star) / stderr`; negative when the bound is not violated.
pub fn violation_margin(i_star: f64, stderr: f64, bound: &BoundReport) -> Result<f64> {
    if !(stderr > 0.0) {
        return Err(Error::param(format!("stderr must be positive, got {stderr}")));
    }
    Ok((bound.bound - i_star) / stderr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn analytic_bell_bounds() {
        assert_eq!(bell_bound_analytic(2).unwrap().bound, 1.0);
        assert!((bell_bound_analytic(3).unwrap().bound - 16.0 / 27.0).abs() < 1e-15);
        assert_eq!(bell_bound_analytic(4).unwrap().bound, 0.375);
        assert!(bell_bound_analytic(1).is_err());
    }

    #[test]
    fn bruteforce_local_bounds() {
        for n in 1..=6 {
            assert_eq!(bell_bound_bruteforce(2, n).unwrap().bound, 1.0, "N={n}");
        }
        assert_eq!(bell_bound_bruteforce(3, 2).unwrap().bound, 2.0);
        assert_eq!(bell_bound_bruteforce(3, 3).unwrap().bound, 2.0);
        for d in 2..=4 {
            let analytic = bell_bound_analytic(d).unwrap().bound;
            let brute = bell_bound_bruteforce(d, 2).unwrap().bound;
            assert!(brute >= analytic);
            if d >= 3 {
                assert!(brute > analytic);
            }
        }
    }

    #[test]
    fn bruteforce_guard() {
        assert!(matches!(
            bell_bound_bruteforce(5, 6),
            Err(Error::TooLarge { .. })
        ));
        assert!(bell_bound_bruteforce(2, 0).is_err());
    }

    #[test]
    fn quantum_beats_local() {
        for (d, n) in [(2, 6), (2, 4), (3, 3), (3, 2)] {
            let q = crate::chained::quantum_in(d, n).unwrap().value;
            assert!(q < bell_bound_bruteforce(d, n).unwrap().bound);
        }
    }

    #[test]
    fn strategy_value_matches_table_evaluation() {
        for d in 2..=3 {
            for n in 1..=3 {
                let count = strategy_count(d, n).unwrap();
                for i in 0..count {
                    let s = DeterministicStrategy::from_index(d, n, i);
                    let via_table = evaluate_in(&s.joint_table()).unwrap().value;
                    assert_eq!(via_table, s.chained_value() as f64);
                }
            }
        }
    }

    #[test]
    fn lexicographic_order() {
        let s = DeterministicStrategy::from_index(2, 2, 0b0110);
        assert_eq!(s, DeterministicStrategy::new(2, vec![0, 1], vec![1, 0]).unwrap());
        assert!(DeterministicStrategy::new(2, vec![2], vec![0]).is_err());
    }

    #[test]
    fn mixture_examples() {
        let s = DeterministicStrategy::from_index(2, 2, 5);
        assert_eq!(mixture_in(&[(s.clone(), 1.0)]).unwrap(), s.chained_value() as f64);

        let all: Vec<_> = (0..16)
            .map(|i| (DeterministicStrategy::from_index(2, 2, i), 1.0 / 16.0))
            .collect();
        let avg = all.iter().map(|(s, _)| s.chained_value() as f64).sum::<f64>() / 16.0;
        assert!((mixture_in(&all).unwrap() - avg).abs() < 1e-12);

        let a = DeterministicStrategy::from_index(3, 2, 3);
        let b = DeterministicStrategy::from_index(3, 2, 40);
        let m = mixture_in(&[(a.clone(), 0.3), (b.clone(), 0.7)]).unwrap();
        assert!(m >= a.chained_value().min(b.chained_value()) as f64 - 1e-12);

        assert!(mixture_in(&[(a.clone(), 0.5), (b.clone(), 0.6)]).is_err());
        assert!(mixture_in(&[(a, -0.5), (b, 1.5)]).is_err());
        assert!(mixture_in(&[]).is_err());
    }

    #[test]
    fn leggett_bounds() {
        for n in [1, 3, 6, 12] {
            let r = leggett_bound(LeggettConfig { n_settings: n, model: LeggettModel::UniformSphere }).unwrap();
            assert_eq!(r.bound, 0.5);
        }
        let fixed = leggett_bound(LeggettConfig { n_settings: 6, model: LeggettModel::FixedInPlane }).unwrap();
        assert!((fixed.bound - 0.965926).abs() < 1e-6);
        let ortho = leggett_bound(LeggettConfig { n_settings: 6, model: LeggettModel::TwoOrthogonalPlanes }).unwrap();
        assert!((ortho.bound - 0.683013).abs() < 1e-6);
    }

    #[test]
    fn leggett_oracle_converges() {
        let samples = 1_000_000;
        let est = leggett_delta_oracle(samples, 42).unwrap();
        assert!((est - 0.5).abs() < 0.002);
        assert!((est - 0.5).abs() < 3.0 / (samples as f64).sqrt());
        assert!(leggett_delta_oracle(100, 0).is_err());

        let a = [0.3, -0.2, 0.9];
        assert!((mean_abs_projection(a, HiddenVector::Fixed(a), 0, 0).unwrap() - 1.0).abs() < 1e-15);
        let perp = [0.2, 0.3, 0.0];
        assert!(mean_abs_projection([0.0, 0.0, 1.0], HiddenVector::Fixed(perp), 0, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn margins_from_measured_minima() {
        let bm = bell_bound_analytic(2).unwrap();
        let m = violation_margin(0.245, 0.007, &bm).unwrap();
        assert!((107.0..=108.0).contains(&m), "{m}");
        let lm = leggett_bound(LeggettConfig { n_settings: 6, model: LeggettModel::UniformSphere }).unwrap();
        let m = violation_margin(0.245, 0.007, &lm).unwrap();
        assert!((36.0..=37.0).contains(&m), "{m}");
        let bm3 = bell_bound_analytic(3).unwrap();
        let m = violation_margin(0.524, 0.006, &bm3).unwrap();
        assert!((11.0..=12.0).contains(&m), "{m}");
        assert!(violation_margin(0.2, 0.0, &bm).is_err());
        assert!(violation_margin(1.2, 0.1, &bm).unwrap() < 0.0);
    }

    proptest! {
        #[test]
        fn mixture_is_linear(d in 2usize..4, n in 1usize..4, picks in proptest::collection::vec((any::<u64>(), 0.01f64..1.0), 1..6)) {
            let count = strategy_count(d, n).unwrap() as u64;
            let total: f64 = picks.iter().map(|(_, w)| w).sum();
            let mix: Vec<_> = picks
                .iter()
                .map(|(i, w)| (DeterministicStrategy::from_index(d, n, (*i % count) as u128), w / total))
                .collect();
            let renorm: f64 = mix.iter().map(|(_, w)| w).sum();
            let mix: Vec<_> = mix.into_iter().map(|(s, w)| (s, w / renorm)).collect();
            let direct: f64 = mix.iter().map(|(s, w)| w * s.chained_value() as f64).sum();
            let m = mixture_in(&mix).unwrap();
            prop_assert!((m - direct).abs() <= 1e-12);
            prop_assert!(m >= (d - 1) as f64 - 1e-12);
        }
    }
}
