//! Resonator spectral model and the biphoton comb state it generates.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

const NORM_TOL: f64 = 1e-12;

/// Spectral model of the pair source: comb grid, linewidth, per-pair
/// transmission envelope, and internal generation rate.
///
/// `transmission[n]` is the joint (both-arm) intensity transmission for pair
/// `n` -- grating-coupler roll-off and spectral dips live here. Flat per-arm
/// device losses (filters, modulators) belong to the detection model instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonatorModel {
    pub grid: FrequencyGrid,
    /// Resonance full width at half maximum, GHz.
    pub linewidth_fwhm_ghz: f64,
    pub quality_factor: f64,
    transmission: BTreeMap<u32, f64>,
    /// Internally generated pairs per second at the reference pump power.
    pub internal_pair_rate: f64,
    /// Pump power at which `internal_pair_rate` holds, mW.
    pub reference_pump_mw: f64,
}

impl ResonatorModel {
    pub fn new(
        grid: FrequencyGrid,
        linewidth_fwhm_ghz: f64,
        quality_factor: f64,
        transmission: BTreeMap<u32, f64>,
        internal_pair_rate: f64,
        reference_pump_mw: f64,
    ) -> Result<Self> {
        grid.validate()?;
        if !(linewidth_fwhm_ghz.is_finite() && linewidth_fwhm_ghz > 0.0) {
            return Err(Error::Validation(format!(
                "linewidth must be positive, got {linewidth_fwhm_ghz} GHz"
            )));
        }
        if !(internal_pair_rate.is_finite() && internal_pair_rate >= 0.0) {
            return Err(Error::Validation("internal pair rate must be >= 0".into()));
        }
        if !(reference_pump_mw.is_finite() && reference_pump_mw > 0.0) {
            return Err(Error::Validation("reference pump power must be > 0".into()));
        }
        for n in grid.indices() {
            match transmission.get(&n) {
                Some(&t) if (0.0..=1.0).contains(&t) => {}
                Some(&t) => {
                    return Err(Error::Validation(format!(
                        "transmission at n={n} must be in [0,1], got {t}"
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "transmission table missing index n={n}"
                    )))
                }
            }
        }
        Ok(Self {
            grid,
            linewidth_fwhm_ghz,
            quality_factor,
            transmission,
            internal_pair_rate,
            reference_pump_mw,
        })
    }

    /// Build with a transmission function evaluated over the grid.
    pub fn with_envelope(
        grid: FrequencyGrid,
        linewidth_fwhm_ghz: f64,
        quality_factor: f64,
        envelope: impl Fn(u32) -> f64,
        internal_pair_rate: f64,
        reference_pump_mw: f64,
    ) -> Result<Self> {
        let table = grid.indices().map(|n| (n, envelope(n))).collect();
        Self::new(
            grid,
            linewidth_fwhm_ghz,
            quality_factor,
            table,
            internal_pair_rate,
            reference_pump_mw,
        )
    }

    /// Joint transmission for pair `n`. The table covers the whole grid by
    /// construction.
    pub fn transmission_at(&self, n: u32) -> Result<f64> {
        self.transmission.get(&n).copied().ok_or(Error::OutOfRange {
            what: "resonance index",
            value: n as i64,
            min: self.grid.n_min as i64,
            max: self.grid.n_max as i64,
        })
    }

    /// Per-arm amplitude transmission for one photon of pair `n`, assuming
    /// symmetric arms: `sqrt(t_pair)` per arm.
    pub fn arm_transmission_at(&self, n: u32) -> Result<f64> {
        Ok(self.transmission_at(n)?.sqrt())
    }

    /// Whether the quoted quality factor agrees with `f_res / FWHM` within
    /// 10%. Checked, not enforced.
    pub fn quality_factor_consistent(&self) -> bool {
        let implied = self.grid.pump_thz * 1e12 / (self.linewidth_fwhm_ghz * 1e9);
        (implied / self.quality_factor - 1.0).abs() <= 0.10
    }
}

/// Biphoton comb state: one complex amplitude per resonance pair index, with
/// the residual spectral phase tracked explicitly.
#[derive(Debug, Clone)]
pub struct BiphotonState {
    grid: FrequencyGrid,
    amplitudes: Vec<Complex64>,
    residual_phases: Vec<f64>,
}

impl BiphotonState {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    fn offset(&self, n: u32) -> Result<usize> {
        if self.grid.contains(n) {
            Ok((n - self.grid.n_min) as usize)
        } else {
            Err(Error::OutOfRange {
                what: "resonance index",
                value: n as i64,
                min: self.grid.n_min as i64,
                max: self.grid.n_max as i64,
            })
        }
    }

    pub fn amplitude(&self, n: u32) -> Result<Complex64> {
        Ok(self.amplitudes[self.offset(n)?])
    }

    pub fn residual_phase(&self, n: u32) -> Result<f64> {
        Ok(self.residual_phases[self.offset(n)?])
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if (self.norm_squared() - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "biphoton state norm deviates from 1 by {:.3e}",
                (self.norm_squared() - 1.0).abs()
            )));
        }
        Ok(())
    }
}

/// Generate the comb state: amplitude magnitudes proportional to
/// `sqrt(transmission)`, phases from the supplied residual-phase profile,
/// normalized to unit norm.
pub fn biphoton_state(
    model: &ResonatorModel,
    phase_profile: impl Fn(u32) -> f64,
) -> Result<BiphotonState> {
    let mut mags = Vec::with_capacity(model.grid.n_modes());
    let mut phases = Vec::with_capacity(model.grid.n_modes());
    for n in model.grid.indices() {
        mags.push(model.transmission_at(n)?.sqrt());
        phases.push(phase_profile(n));
    }
    let norm_sq: f64 = mags.iter().map(|m| m * m).sum();
    if norm_sq <= 0.0 {
        return Err(Error::DegenerateState(
            "all transmission factors are zero".into(),
        ));
    }
    let norm = norm_sq.sqrt();
    let amplitudes = mags
        .iter()
        .zip(&phases)
        .map(|(m, p)| Complex64::from_polar(m / norm, *p))
        .collect();
    Ok(BiphotonState {
        grid: model.grid,
        amplitudes,
        residual_phases: phases,
    })
}

/// Expected generated-pair rate per resonance index at the given pump power.
///
/// Internal generation is uniform across the comb and quadratic in pump
/// power; the per-pair transmission shapes what leaves the chip.
pub fn jsi_diagonal(model: &ResonatorModel, pump_power_mw: f64) -> Result<Vec<(u32, f64)>> {
    if !(pump_power_mw.is_finite() && pump_power_mw > 0.0) {
        return Err(Error::invalid_input(format!(
            "pump power must be positive, got {pump_power_mw} mW"
        )));
    }
    let scale = (pump_power_mw / model.reference_pump_mw).powi(2);
    let per_mode = model.internal_pair_rate / model.grid.n_modes() as f64;
    model
        .grid
        .indices()
        .map(|n| Ok((n, per_mode * scale * model.transmission_at(n)?)))
        .collect()
}

/// Logical qubit assignment for one adjacent pair of resonances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitPairSelection {
    /// `|0>` maps to mode `base_index`, `|1>` to `base_index + 1`, for both
    /// the signal and the idler photon.
    pub base_index: u32,
    /// Phase applied to cancel the residual-phase difference between the two
    /// comb lines.
    pub compensation_phase: f64,
}

/// Pure two-qubit state over (idler, signal) logical modes.
///
/// Amplitude order: `|00>, |01>, |10>, |11>` with the idler bit first.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    amps: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [Complex64; 4]) -> Self {
        Self { amps }
    }

    /// The maximally entangled target state `(|00> + |11>)/sqrt(2)`.
    pub fn phi_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amps: [h, Complex64::ZERO, Complex64::ZERO, h],
        }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn amplitude(&self, idler_bit: u8, signal_bit: u8) -> Complex64 {
        self.amps[(2 * idler_bit + signal_bit) as usize]
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn validate_normalized(&self) -> Result<()> {
        if (self.norm_squared() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "two-qubit state norm^2 = {}, expected 1",
                self.norm_squared()
            )));
        }
        Ok(())
    }
}

/// Restrict the comb state to the adjacent pair `(n, n+1)`, producing the
/// normalized two-qubit state `a|00> + b e^{i phi}|11>` with
/// `phi = alpha_{n+1} - alpha_n - compensation_phase`.
pub fn select_qubit_pair(
    state: &BiphotonState,
    n: u32,
    compensation_phase: f64,
) -> Result<(TwoQubitState, QubitPairSelection)> {
    let a0 = state.amplitude(n)?;
    let a1 = state.amplitude(n + 1)?;
    let (m0, m1) = (a0.norm(), a1.norm());
    let norm_sq = m0 * m0 + m1 * m1;
    if norm_sq <= 0.0 {
        return Err(Error::DegenerateState(format!(
            "both comb amplitudes vanish at pair ({n}, {})",
            n + 1
        )));
    }
    let norm = norm_sq.sqrt();
    let rel = state.residual_phase(n + 1)? - state.residual_phase(n)? - compensation_phase;
    let amps = [
        Complex64::new(m0 / norm, 0.0),
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::from_polar(m1 / norm, rel),
    ];
    Ok((
        TwoQubitState::new(amps),
        QubitPairSelection {
            base_index: n,
            compensation_phase,
        },
    ))
}

/// As [`select_qubit_pair`], with the compensation phase chosen to cancel the
/// residual-phase difference exactly.
pub fn select_qubit_pair_compensated(
    state: &BiphotonState,
    n: u32,
) -> Result<(TwoQubitState, QubitPairSelection)> {
    let comp = state.residual_phase(n + 1)? - state.residual_phase(n)?;
    select_qubit_pair(state, n, comp)
}
