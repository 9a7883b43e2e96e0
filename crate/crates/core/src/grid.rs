//! The frequency-mode lattice of the microring comb.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice of comb modes around the pump.
///
/// Index `n` addresses the symmetric resonance pair: the signal photon sits at
/// `pump + n * FSR` and the idler at `pump - n * FSR`. The lattice is rigid --
/// the measured mode-to-mode FSR spread is not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// Pump frequency in THz.
    pub pump_thz: f64,
    /// Free spectral range (mode spacing) in GHz.
    pub fsr_ghz: f64,
    /// Smallest usable resonance index.
    pub n_min: u32,
    /// Largest usable resonance index.
    pub n_max: u32,
}

impl FrequencyGrid {
    pub fn new(pump_thz: f64, fsr_ghz: f64, n_min: u32, n_max: u32) -> Result<Self> {
        let grid = Self {
            pump_thz,
            fsr_ghz,
            n_min,
            n_max,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_thz.is_finite() && self.pump_thz > 0.0) {
            return Err(Error::Validation(format!(
                "pump frequency must be positive, got {} THz",
                self.pump_thz
            )));
        }
        if !(self.fsr_ghz.is_finite() && self.fsr_ghz > 0.0) {
            return Err(Error::Validation(format!(
                "FSR must be positive, got {} GHz",
                self.fsr_ghz
            )));
        }
        if self.n_min < 1 {
            return Err(Error::Validation("n_min must be >= 1".into()));
        }
        if self.n_max < self.n_min {
            return Err(Error::Validation(format!(
                "n_max ({}) must be >= n_min ({})",
                self.n_max, self.n_min
            )));
        }
        Ok(())
    }

    /// FSR expressed in THz.
    pub fn fsr_thz(&self) -> f64 {
        self.fsr_ghz * 1e-3
    }

    /// Number of usable resonance indices.
    pub fn n_modes(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> {
        self.n_min..=self.n_max
    }

    fn check_index(&self, n: u32) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "resonance index",
                value: n as i64,
                min: self.n_min as i64,
                max: self.n_max as i64,
            })
        }
    }

    /// Idler and signal frequencies (THz) of resonance pair `n`:
    /// `(pump - n*FSR, pump + n*FSR)`.
    pub fn mode_frequencies(&self, n: u32) -> Result<(f64, f64)> {
        self.check_index(n)?;
        let detuning = n as f64 * self.fsr_thz();
        Ok((self.pump_thz - detuning, self.pump_thz + detuning))
    }
}
