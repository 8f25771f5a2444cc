use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::counts::{simulate_counts, CountRecord};
use super::estimate::{estimate_in, Estimate, EstimateOptions};
use super::noise::{apply_noise, crosstalk_for, NoiseModel, CROSSTALK_BASE};
use super::spectrum::{procrustean_concentrate, SpiralSpectrum, SubspaceSelection};
use crate::chained::{evaluate_in, scan_minimum, MinimumScan};
use crate::error::{Error, Result};
use crate::qudit::{born_joint_table, make_maximally_entangled, JointTable, SchmidtState, SettingsFamily};

/// One measured minimum `I*_N` with its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedMinimum {
    pub d: usize,
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
}

/// Experimental minima for the maximally entangled OAM states, `d = 2..=6`.
pub const REPORTED_MINIMA: [ReportedMinimum; 5] = [
    ReportedMinimum { d: 2, n: 6, value: 0.245, stderr: 0.007 },
    ReportedMinimum { d: 3, n: 5, value: 0.524, stderr: 0.006 },
    ReportedMinimum { d: 4, n: 5, value: 0.835, stderr: 0.013 },
    ReportedMinimum { d: 5, n: 4, value: 1.499, stderr: 0.020 },
    ReportedMinimum { d: 6, n: 3, value: 2.429, stderr: 0.042 },
];

pub fn reported_minimum(d: usize) -> Option<ReportedMinimum> {
    REPORTED_MINIMA.iter().copied().find(|r| r.d == d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub d: usize,
    pub spectrum: SpiralSpectrum,
    pub subspace: SubspaceSelection,
    /// `rate_scale` is multiplied by the concentration efficiency.
    pub noise: NoiseModel,
    pub n_range: Vec<usize>,
    pub estimate: EstimateOptions,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Default spectrum and mode set, crosstalk from mode spacing, given visibility and rate.
    pub fn standard(d: usize, visibility: f64, rate_scale: f64, n_range: Vec<usize>, seed: u64) -> Result<Self> {
        let subspace = SubspaceSelection::default_for(d)?;
        let crosstalk = crosstalk_for(&subspace, CROSSTALK_BASE)?;
        Ok(ProtocolConfig {
            d,
            spectrum: SpiralSpectrum::default(),
            subspace,
            noise: NoiseModel {
                visibility,
                crosstalk,
                rate_scale,
                dark_rate: 0.0,
            },
            n_range,
            estimate: EstimateOptions {
                seed,
                ..EstimateOptions::default()
            },
            seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub scan: MinimumScan,
    pub efficiency: f64,
    pub state: SchmidtState,
    pub records: BTreeMap<usize, CountRecord>,
    pub estimates: BTreeMap<usize, Estimate>,
}

/// Seed for the run at `N`, drawn from stream `N` of the master seed.
pub fn derive_seed(master: u64, n: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(n as u64);
    rng.next_u64()
}

/// Bootstrap seed for the estimate at `N`; shared by simulation and
/// re-analysis so both report identical error bars.
pub fn estimate_seed(master: u64, n: usize) -> u64 {
    derive_seed(master ^ 0x5eed_b007, n)
}

/// Spectrum, mode selection, concentration, noise, counts and estimates
/// for every `N`, then the minimum over `N`.
pub fn run_table1_protocol(cfg: &ProtocolConfig) -> Result<ProtocolRun> {
    if cfg.subspace.dim() != cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            got: cfg.subspace.dim(),
        });
    }
    if cfg.n_range.is_empty() || cfg.n_range.contains(&0) {
        return Err(Error::param("N range must be nonempty and start at 1 or more"));
    }
    let raw = cfg.subspace.project(&cfg.spectrum)?;
    let (state, efficiency) = procrustean_concentrate(&raw)?;
    let mut noise = cfg.noise.clone();
    noise.rate_scale *= efficiency;
    noise.validate()?;

    let runs = cfg
        .n_range
        .par_iter()
        .map(|&n| {
            let joint = born_joint_table(&state, &SettingsFamily::new(cfg.d, n)?)?;
            let seed = derive_seed(cfg.seed, n);
            let record = simulate_counts(&joint, &noise, seed)?;
            let opts = EstimateOptions {
                seed: estimate_seed(cfg.estimate.seed, n),
                ..cfg.estimate
            };
            let est = estimate_in(&record, &opts)?;
            Ok((n, record, est))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = BTreeMap::new();
    let mut estimates = BTreeMap::new();
    for (n, r, e) in runs {
        records.insert(n, r);
        estimates.insert(n, e);
    }
    let scan = scan_minimum(cfg.d, estimates.iter().map(|(&n, e)| (n, (e.value, e.stderr))).collect())?;
    Ok(ProtocolRun {
        scan,
        efficiency,
        state,
        records,
        estimates,
    })
}

/// Exact `I_N` of the ideal table under `noise`, for each `N`.
pub fn noisy_scan(d: usize, noise: &NoiseModel, ns: &[usize]) -> Result<BTreeMap<usize, f64>> {
    let psi = make_maximally_entangled(d)?;
    ns.par_iter()
        .map(|&n| {
            let t = born_joint_table(&psi, &SettingsFamily::new(d, n)?)?;
            Ok((n, evaluate_in(&apply_noise(&t, noise)?)?.value))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub visibility: f64,
    pub argmin_n: usize,
    /// `min_N I_N` of the exact noisy tables at the fitted visibility.
    pub min_value: f64,
    pub exact: BTreeMap<usize, f64>,
}

fn uniform_table(d: usize, n: usize) -> Result<JointTable> {
    let p = 1.0 / (d * d) as f64;
    let slices = (1..=n)
        .flat_map(|a| (1..=n).map(move |b| ((a, b), vec![p; d * d])))
        .collect();
    JointTable::new(d, n, slices)
}

/// The visibility at which `min_N I_N` over `ns` equals `target`, with the
/// crosstalk of `noise` held fixed.
///
/// Noisy tables are linear in `V`, so each `I_N(V) = V a_N + (1 - V) b_N`
/// and the fit is solved in closed form.
pub fn calibrate_visibility(d: usize, noise: &NoiseModel, ns: &[usize], target: f64) -> Result<Calibration> {
    if ns.is_empty() {
        return Err(Error::param("calibration needs at least one N"));
    }
    let psi = make_maximally_entangled(d)?;
    let mut clean = noise.clone();
    clean.visibility = 1.0;
    let lines = ns
        .par_iter()
        .map(|&n| {
            let ideal = born_joint_table(&psi, &SettingsFamily::new(d, n)?)?;
            let a = evaluate_in(&apply_noise(&ideal, &clean)?)?.value;
            let b = evaluate_in(&apply_noise(&uniform_table(d, n)?, &clean)?)?.value;
            Ok((n, a, b))
        })
        .collect::<Result<Vec<_>>>()?;

    let floor = lines.iter().map(|&(_, a, _)| a).fold(f64::INFINITY, f64::min);
    if target < floor {
        return Err(Error::param(format!(
            "target {target} lies below the noiseless minimum {floor} for d={d}"
        )));
    }
    // min_N I_N(V) <= target iff V >= V_N for some N.
    let visibility = lines
        .iter()
        .filter(|&&(_, a, b)| b > a)
        .map(|&(_, a, b)| ((b - target) / (b - a)).clamp(0.0, 1.0))
        .fold(f64::INFINITY, f64::min)
        .min(1.0);

    let mut fitted = noise.clone();
    fitted.visibility = visibility;
    let exact = noisy_scan(d, &fitted, ns)?;
    let scan = scan_minimum(d, exact.iter().map(|(&n, &v)| (n, (v, 0.0))).collect())?;
    Ok(Calibration {
        visibility,
        argmin_n: scan.argmin_n,
        min_value: scan.i_star,
        exact,
    })
}
