use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::SchmidtState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumShape {
    /// `c_l ∝ exp(-|l| / decay)`.
    Exponential,
    /// `c_l ∝ 1 / (1 + (l / decay)^2)`.
    Lorentzian,
}

/// Symmetric OAM spectrum over `l in [-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralSpectrum {
    pub half_width: u32,
    pub shape: SpectrumShape,
    /// Positive; `f64::INFINITY` gives a flat spectrum.
    pub decay: f64,
}

impl Default for SpiralSpectrum {
    fn default() -> Self {
        SpiralSpectrum {
            half_width: 6,
            shape: SpectrumShape::Exponential,
            decay: 3.0,
        }
    }
}

impl SpiralSpectrum {
    pub fn modes(&self) -> impl Iterator<Item = i32> {
        let l = self.half_width as i32;
        -l..=l
    }

    /// Normalized amplitude of mode `l`, or 0 outside the spectrum.
    pub fn amplitude(&self, l: i32) -> Result<f64> {
        let amps = spectrum_amplitudes(self)?;
        let w = self.half_width as i32;
        Ok(if l.abs() <= w { amps[(l + w) as usize] } else { 0.0 })
    }
}

/// Amplitudes `c_l` for `l = -L..=L`, normalized so `sum c_l^2 = 1`.
pub fn spectrum_amplitudes(spec: &SpiralSpectrum) -> Result<Vec<f64>> {
    if spec.decay.is_nan() || spec.decay <= 0.0 {
        return Err(Error::param(format!("spectrum decay must be positive, got {}", spec.decay)));
    }
    let raw: Vec<f64> = spec
        .modes()
        .map(|l| {
            let l = l.abs() as f64;
            match spec.shape {
                SpectrumShape::Exponential => (-l / spec.decay).exp(),
                SpectrumShape::Lorentzian => 1.0 / (1.0 + (l / spec.decay).powi(2)),
            }
        })
        .collect();
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(raw.into_iter().map(|c| c / norm).collect())
}

/// The `d` OAM modes used as computational basis states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSelection {
    modes: Vec<i32>,
}

impl SubspaceSelection {
    pub fn new(modes: Vec<i32>) -> Result<Self> {
        if modes.len() < 2 {
            return Err(Error::InvalidDimension(modes.len()));
        }
        let mut sorted = modes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param(format!("OAM modes must be distinct: {modes:?}")));
        }
        Ok(SubspaceSelection { modes })
    }

    /// The mode sets used in the experiment for `d = 2..=6`; wider `d` take
    /// the `d` modes closest to zero, skipping `l = 0` for even `d`.
    pub fn default_for(d: usize) -> Result<Self> {
        let modes = match d {
            0 | 1 => return Err(Error::InvalidDimension(d)),
            2 => vec![-2, 2],
            3 => vec![-3, 0, 3],
            4 => vec![-4, -1, 1, 4],
            5 => vec![-2, -1, 0, 1, 2],
            6 => vec![-3, -2, -1, 1, 2, 3],
            _ => {
                let h = (d / 2) as i32;
                if d % 2 == 1 {
                    (-h..=h).collect()
                } else {
                    (-h..=h).filter(|&l| l != 0).collect()
                }
            }
        };
        SubspaceSelection::new(modes)
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[i32] {
        &self.modes
    }

    /// Smallest gap between two selected modes.
    pub fn min_spacing(&self) -> u32 {
        let mut sorted = self.modes.clone();
        sorted.sort_unstable();
        sorted.windows(2).map(|w| (w[1] - w[0]) as u32).min().unwrap_or(0)
    }

    /// The spectrum restricted to the selected modes, renormalized.
    pub fn project(&self, spec: &SpiralSpectrum) -> Result<SchmidtState> {
        let amps = spectrum_amplitudes(spec)?;
        let w = spec.half_width as i32;
        let picked: Vec<f64> = self
            .modes
            .iter()
            .map(|&l| if l.abs() <= w { amps[(l + w) as usize] } else { 0.0 })
            .collect();
        if let Some(index) = picked.iter().position(|&c| c == 0.0) {
            return Err(Error::ZeroAmplitude { index });
        }
        SchmidtState::normalized(picked)
    }
}

/// Local filtering that attenuates every mode to the weakest one. Returns
/// the maximally entangled state and the probability that a pair passes.
pub fn procrustean_concentrate(state: &SchmidtState) -> Result<(SchmidtState, f64)> {
    let amps = state.amps();
    if let Some(index) = amps.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroAmplitude { index });
    }
    let d = amps.len() as f64;
    let squares: Vec<f64> = amps.iter().map(|c| c * c).collect();
    let min = squares.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = squares.iter().sum();
    let efficiency = d * min / total;
    let uniform = vec![1.0 / d.sqrt(); amps.len()];
    Ok((SchmidtState::new(uniform)?, efficiency))
}
