use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nsbox::{certify, BoxShape, NsBox};
use crate::error::{Error, Result};
use crate::hidden_variable::DeterministicStrategy;
use crate::qudit::{born_joint_table, SchmidtState, SettingsFamily};

/// Largest table `sample_nonsignaling` will build.
pub const SAMPLER_GUARD: usize = 100_000;

/// Mixing weights of the three ingredient families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerWeights {
    pub quantum: f64,
    pub local: f64,
    pub uniform: f64,
}

/// A certified nonsignaling box with random mixing weights.
pub fn sample_nonsignaling(shape: BoxShape, seed: u64) -> Result<NsBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    let w = SamplerWeights {
        quantum: e[0] / s,
        local: e[1] / s,
        uniform: e[2] / s,
    };
    build(shape, w, &mut rng)
}

/// As [`sample_nonsignaling`] with fixed weights (normalized internally).
pub fn sample_nonsignaling_weighted(shape: BoxShape, weights: SamplerWeights, seed: u64) -> Result<NsBox> {
    let w = [weights.quantum, weights.local, weights.uniform];
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("sampler weights must be nonnegative"));
    }
    let s: f64 = w.iter().sum();
    if s <= 0.0 {
        return Err(Error::param("sampler weights are all zero"));
    }
    let normalized = SamplerWeights {
        quantum: w[0] / s,
        local: w[1] / s,
        uniform: w[2] / s,
    };
    build(shape, normalized, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random convex weights over `k` hidden labels.
fn label_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|p| p / s).collect()
}

/// `h[ch - 1][label]`: Charlie's output for each setting. `C = 1` reveals the label.
fn charlie_maps(rng: &mut ChaCha8Rng, z: usize, c: usize) -> Vec<Vec<usize>> {
    (0..c)
        .map(|ch| {
            (0..z)
                .map(|k| if ch == 0 { k } else { rng.random_range(0..z) })
                .collect()
        })
        .collect()
}

fn build(shape: BoxShape, w: SamplerWeights, rng: &mut ChaCha8Rng) -> Result<NsBox> {
    if shape.len() > SAMPLER_GUARD {
        return Err(Error::TooLarge {
            what: "nonsignaling box entries",
            count: shape.len() as u128,
            guard: SAMPLER_GUARD as u128,
        });
    }
    let BoxShape { d, z, n, c } = shape;
    let family = SettingsFamily::new(d, n)?;

    let q_weights = label_weights(rng, z);
    let q_tables = (0..z)
        .map(|_| {
            let amps = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
            born_joint_table(&SchmidtState::normalized(amps)?, &family)
        })
        .collect::<Result<Vec<_>>>()?;
    let q_maps = charlie_maps(rng, z, c);

    let l_weights = label_weights(rng, z);
    let strategies: Vec<DeterministicStrategy> = (0..z)
        .map(|_| {
            let alice = (0..n).map(|_| rng.random_range(0..d)).collect();
            let bob = (0..n).map(|_| rng.random_range(0..d)).collect();
            DeterministicStrategy::new(d, alice, bob)
        })
        .collect::<Result<_>>()?;
    let l_maps = charlie_maps(rng, z, c);

    let mut table = vec![w.uniform / shape.slice_len() as f64; shape.len()];
    for a in 1..=n {
        for b in 1..=n {
            for ch in 1..=c {
                for k in 0..z {
                    let t = q_tables[k].slice(a, b).ok_or(Error::MissingSlice { a, b })?;
                    let zo = q_maps[ch - 1][k];
                    for x in 0..d {
                        for y in 0..d {
                            table[shape.index(a, b, ch, x, y, zo)] += w.quantum * q_weights[k] * t[x * d + y];
                        }
                    }
                    let s = &strategies[k];
                    let zo = l_maps[ch - 1][k];
                    table[shape.index(a, b, ch, s.alice(a), s.bob(b), zo)] += w.local * l_weights[k];
                }
            }
        }
    }
    let bx = NsBox::new(shape, table)?;
    certify(&bx).map_err(|e| Error::Internal(format!("sampled box failed certification: {e}")))?;
    Ok(bx)
}
