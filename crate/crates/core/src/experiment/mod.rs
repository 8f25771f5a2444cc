//! Simulated OAM coincidence experiments and the estimator that turns
//! recorded counts into `I_N` with error bars.

mod counts;
mod estimate;
mod noise;
mod protocol;
mod spectrum;

pub use counts::{
    from_json_value, load_counts, read_counts, simulate_counts, CountFormat, CountRecord, DEFAULT_INTEGRATION_S,
};
pub use estimate::{estimate_in, ErrorMethod, Estimate, EstimateOptions, MIN_RESAMPLES};
pub use noise::{apply_noise, crosstalk_for, identity, neighbour_crosstalk, NoiseModel, CROSSTALK_BASE};
pub use protocol::{
    calibrate_visibility, derive_seed, estimate_seed, noisy_scan, reported_minimum, run_table1_protocol, Calibration,
    ProtocolConfig, ProtocolRun, ReportedMinimum, REPORTED_MINIMA,
};
pub use spectrum::{procrustean_concentrate, spectrum_amplitudes, SpectrumShape, SpiralSpectrum, SubspaceSelection};
