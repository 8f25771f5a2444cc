use serde::{Deserialize, Serialize};

use super::nsbox::{certify, BoxShape, NsBox};
use crate::chained::evaluate_in;
use crate::error::{Error, Result};

/// Slack below which the predictive-power bound counts as violated.
pub const SLACK_TOL: f64 = 1e-8;

/// `sum |p - q| / d`, where `d` is the size of the X alphabet even when `p`
/// and `q` range over `(x, z)` pairs.
pub fn statistical_distance(p: &[f64], q: &[f64], d: usize) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub a: usize,
    pub c: usize,
    /// `Delta(P_{XZ|A=a,C=c}, uniform_X x P_{Z|C=c})`.
    pub delta: f64,
    /// `(d / 4) I_N`.
    pub bound: f64,
    pub slack: f64,
}

/// `Delta` against `(d/4) I_N` for every `(A, C)`, with `I_N` taken from the
/// box's own Alice-Bob marginal.
pub fn theorem1_check(bx: &NsBox) -> Result<Vec<DistanceResult>> {
    certify(bx)?;
    let i_n = evaluate_in(&bx.joint_xy()?)?.value;
    distances(bx, i_n)
}

/// As [`theorem1_check`], with `I_N` supplied by the caller.
pub fn theorem1_check_with(bx: &NsBox, i_n: f64) -> Result<Vec<DistanceResult>> {
    certify(bx)?;
    if !(i_n.is_finite() && i_n >= 0.0) {
        return Err(Error::param(format!("I_N must be finite and nonnegative, got {i_n}")));
    }
    distances(bx, i_n)
}

fn distances(bx: &NsBox, i_n: f64) -> Result<Vec<DistanceResult>> {
    let BoxShape { d, z, n, c } = bx.shape();
    let bound = d as f64 / 4.0 * i_n;
    let mut out = Vec::with_capacity(n * c);
    for ch in 1..=c {
        let pz = bx.p_z_given_c(ch);
        let product: Vec<f64> = (0..d)
            .flat_map(|_| pz.iter().map(|p| p / d as f64))
            .collect();
        for a in 1..=n {
            let delta = statistical_distance(&bx.p_xz_given_ac(a, ch), &product, d)?;
            let slack = bound - delta;
            if slack < -SLACK_TOL {
                return Err(Error::Internal(format!(
                    "predictive-power bound violated at (A={a}, C={ch}): delta {delta} > bound {bound}"
                )));
            }
            debug_assert_eq!(product.len(), d * z);
            out.push(DistanceResult {
                a,
                c: ch,
                delta,
                bound,
                slack,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// `P(X_A = Y_B) <= 1 - |P(X_A = x) - P(Y_B = x)|`.
    AgreementBound,
    /// `I_N >= 2N - sum of agreement probabilities along the chain`.
    ChainAgreement,
    /// Agreement deficit `>=` sum of marginal differences along the chain.
    ChainMarginals,
    /// Marginal differences along the chain `>=` those of Alice alone.
    ChainAlice,
    /// Alice's differences `>= |P(X_i = x) - P(X_i = x + 1)|`.
    AdjacentOutcomes,
    /// `|P(X_A = x) - 1/d| <= (d / 4) I_N`.
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityFailure {
    pub inequality: Inequality,
    pub setting: usize,
    pub outcome: usize,
    /// `lhs - rhs` for an inequality of the form `lhs <= rhs`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub i_n: f64,
    pub checked: usize,
    /// Largest `|P(x|A) - 1/d|` over all settings and outcomes.
    pub max_deviation: f64,
    pub bound: f64,
    pub failures: Vec<InequalityFailure>,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Walks the chain of inequalities that leads from `I_N` to the bound on
/// each of Alice's marginals, recording any step that fails by more than
/// `SLACK_TOL`.
pub fn appendix_a_check(bx: &NsBox) -> Result<AppendixReport> {
    certify(bx)?;
    let BoxShape { d, n, .. } = bx.shape();
    let i_n = evaluate_in(&bx.joint_xy()?)?.value;
    let bound = d as f64 / 4.0 * i_n;
    let df = d as f64;

    let px: Vec<Vec<f64>> = (1..=n).map(|a| bx.p_x_given_a(a)).collect();
    let py: Vec<Vec<f64>> = (1..=n).map(|b| bx.p_y_given_b(b)).collect();
    // P(X_{N+1} = x) = P(X_1 = x - 1).
    let px_next = |i: usize, x: usize| -> f64 {
        if i < n {
            px[i][x]
        } else {
            px[0][(x + d - 1) % d]
        }
    };
    let agree = |a: usize, b: usize, shift: usize| -> f64 {
        let t = bx.marginal_xy(a, b, 1);
        (0..d).map(|x| t[x * d + (x + shift) % d]).sum()
    };
    // Agreement of X_i with Y_i, and of X_{i+1} with Y_i.
    let same: Vec<f64> = (1..=n).map(|i| agree(i, i, 0)).collect();
    let next: Vec<f64> = (1..=n)
        .map(|i| if i < n { agree(i + 1, i, 0) } else { agree(1, n, 1) })
        .collect();

    let mut failures = Vec::new();
    let mut checked = 0;
    let mut check = |inequality, setting, outcome, lhs: f64, rhs: f64| {
        checked += 1;
        if lhs - rhs > SLACK_TOL {
            failures.push(InequalityFailure {
                inequality,
                setting,
                outcome,
                excess: lhs - rhs,
            });
        }
    };

    for a in 1..=n {
        for b in 1..=n {
            let p_eq = agree(a, b, 0);
            for x in 0..d {
                check(Inequality::AgreementBound, a, x, p_eq, 1.0 - (px[a - 1][x] - py[b - 1][x]).abs());
            }
        }
    }

    let deficit: f64 = 2.0 * n as f64 - same.iter().sum::<f64>() - next.iter().sum::<f64>();
    check(Inequality::ChainAgreement, 0, 0, deficit, i_n);
    for x in 0..d {
        let marg: f64 = (0..n)
            .map(|i| (px[i][x] - py[i][x]).abs() + (px_next(i + 1, x) - py[i][x]).abs())
            .sum();
        check(Inequality::ChainMarginals, 0, x, marg, deficit);
        let alice: f64 = (0..n).map(|i| (px[i][x] - px_next(i + 1, x)).abs()).sum();
        check(Inequality::ChainAlice, 0, x, alice, marg);
        check(
            Inequality::AdjacentOutcomes,
            1,
            x,
            (px[0][x] - px[0][(x + d - 1) % d]).abs(),
            alice,
        );
    }
    // Re-indexing the chain to start at any setting gives the same I_N.
    for i in 0..n {
        for x in 0..d {
            check(Inequality::AdjacentOutcomes, i + 1, x, (px[i][x] - px[i][(x + 1) % d]).abs(), i_n);
        }
    }

    let mut max_deviation: f64 = 0.0;
    for (a, p) in px.iter().enumerate() {
        for (x, &v) in p.iter().enumerate() {
            let dev = (v - 1.0 / df).abs();
            max_deviation = max_deviation.max(dev);
            check(Inequality::Pointwise, a + 1, x, dev, bound);
        }
    }

    Ok(AppendixReport {
        i_n,
        checked,
        max_deviation,
        bound,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chained::quantum_in;
    use crate::hidden_variable::DeterministicStrategy;
    use crate::qudit::{born_joint_table, make_maximally_entangled, SchmidtState, SettingsFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_examples() {
        assert_eq!(statistical_distance(&[0.2, 0.8], &[0.2, 0.8], 2).unwrap(), 0.0);
        assert_eq!(statistical_distance(&[1.0, 0.0], &[0.0, 1.0], 2).unwrap(), 1.0);
        assert_eq!(statistical_distance(&[0.75, 0.25], &[0.5, 0.5], 2).unwrap(), 0.25);
        assert!(matches!(
            statistical_distance(&[1.0], &[0.5, 0.5], 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ideal_qubit_box_has_zero_delta() {
        let t = born_joint_table(&make_maximally_entangled(2).unwrap(), &SettingsFamily::new(2, 6).unwrap()).unwrap();
        let bx = NsBox::from_joint(&t).unwrap();
        let res = theorem1_check(&bx).unwrap();
        assert_eq!(res.len(), 6);
        let expect_bound = 0.5 * quantum_in(2, 6).unwrap().value;
        for r in res {
            assert!(r.delta < 1e-12);
            assert!((r.bound - expect_bound).abs() < 1e-12);
            assert!(r.slack > 0.1);
        }
    }

    fn deterministic_box(s: &DeterministicStrategy) -> NsBox {
        NsBox::from_joint(&s.joint_table()).unwrap()
    }

    #[test]
    fn deterministic_box_delta_is_exact() {
        for d in 2..=4 {
            for n in 1..=3 {
                let mut rng = ChaCha8Rng::seed_from_u64((d * 10 + n) as u64);
                let alice = (0..n).map(|_| rng.random_range(0..d)).collect();
                let bob = (0..n).map(|_| rng.random_range(0..d)).collect();
                let s = DeterministicStrategy::new(d, alice, bob).unwrap();
                let res = theorem1_check(&deterministic_box(&s)).unwrap();
                let df = d as f64;
                let expect_delta = 2.0 * (df - 1.0) / (df * df);
                let expect_bound = df / 4.0 * s.chained_value() as f64;
                for r in res {
                    assert!((r.delta - expect_delta).abs() < 1e-12);
                    assert!((r.bound - expect_bound).abs() < 1e-12);
                    assert!(r.slack >= 0.0);
                }
            }
        }
    }

    #[test]
    fn signaling_boxes_are_refused() {
        let shape = BoxShape::new(2, 1, 2, 1).unwrap();
        let bx = NsBox::from_fn(shape, |a, b, _, x, _, _| {
            let px = if a == 1 && b == 2 { [0.6, 0.4][x] } else { 0.5 };
            px * 0.5
        })
        .unwrap();
        assert!(matches!(theorem1_check(&bx), Err(Error::Signaling(_))));
        assert!(matches!(appendix_a_check(&bx), Err(Error::Signaling(_))));
    }

    #[test]
    fn supplied_i_n_is_used() {
        let bx = NsBox::uniform(BoxShape::new(3, 2, 2, 1).unwrap());
        let res = theorem1_check_with(&bx, 0.4).unwrap();
        assert!(res.iter().all(|r| (r.bound - 0.3).abs() < 1e-15 && r.delta < 1e-15));
        assert!(theorem1_check_with(&bx, -1.0).is_err());
    }

    #[test]
    fn pointwise_inequality_examples() {
        let t = born_joint_table(&make_maximally_entangled(3).unwrap(), &SettingsFamily::new(3, 4).unwrap()).unwrap();
        let r = appendix_a_check(&NsBox::from_joint(&t).unwrap()).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.max_deviation < 1e-12);

        let s = DeterministicStrategy::new(2, vec![0], vec![0]).unwrap();
        let r = appendix_a_check(&deterministic_box(&s)).unwrap();
        assert_eq!(r.i_n, 1.0);
        assert_eq!(r.max_deviation, 0.5);
        assert_eq!(r.bound, 0.5);
        assert!(r.passed());

        let r = appendix_a_check(&NsBox::uniform(BoxShape::new(2, 1, 3, 1).unwrap())).unwrap();
        assert!(r.max_deviation < 1e-15);
        assert!(r.passed());
    }

    #[test]
    fn inequality_chain_on_skewed_quantum_boxes() {
        for d in 2..=5 {
            for n in 1..=5 {
                let amps: Vec<f64> = (0..d).map(|k| 1.0 + k as f64).collect();
                let st = SchmidtState::normalized(amps).unwrap();
                let t = born_joint_table(&st, &SettingsFamily::new(d, n).unwrap()).unwrap();
                let r = appendix_a_check(&NsBox::from_joint(&t).unwrap()).unwrap();
                assert!(r.passed(), "d={d} n={n}: {:?}", r.failures);
                assert!(r.max_deviation <= r.bound + SLACK_TOL);
            }
        }
    }

    fn dist(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|p| p / s).collect()
    }

    proptest! {
        #[test]
        fn marginal_distance_never_exceeds_joint(d in 2usize..6, z in 1usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = dist(&mut rng, d * z);
            let q = dist(&mut rng, d * z);
            let mx = |v: &[f64]| -> Vec<f64> { v.chunks(z).map(|c| c.iter().sum()).collect() };
            let joint = statistical_distance(&p, &q, d).unwrap();
            let marginal = statistical_distance(&mx(&p), &mx(&q), d).unwrap();
            prop_assert!(marginal <= joint + 1e-15);
        }
    }
}
