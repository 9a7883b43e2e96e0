//! JSON run configuration: one document with a section per subsystem.
//! Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{EomSettings, GateConfig, PfMask};
use crate::grid::FrequencyGrid;
use crate::measurement::DetectorModel;
use crate::qkd::SiftingParams;
use crate::resonator::ResonatorModel;

/// Default pair-level transmission envelope: a Gaussian coupler roll-off
/// with narrow dips near resonances 50 and 70, calibrated so the best pair
/// yields reference-scale coincidences (~1550 peak in 125 s) and three pairs fall below 0.8 fidelity.
pub fn default_pair_transmission(n: u32) -> f64 {
    const T0: f64 = 0.178;
    const SIGMA: f64 = 39.0;
    const NOTCHES: [(f64, f64, f64); 5] = [
        (50.0, 0.982, 1.0),
        (54.0, 0.86, 0.9),
        (67.0, 0.84, 0.9),
        (70.0, 0.9913, 0.6),
        (75.0, 0.995, 0.8),
    ];
    let x = n as f64;
    let mut t = T0 * (-(x / SIGMA).powi(2)).exp();
    for (center, depth, width) in NOTCHES {
        t *= 1.0 - depth * (-((x - center) / width).powi(2)).exp();
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionEntry {
    pub n: u32,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct PhaseSection {
    pub model: PhaseModel,
    #[serde(default)]
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    Zero,
    Quadratic,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self {
            model: PhaseModel::Zero,
            coeff: 0.0,
        }
    }
}

impl PhaseSection {
    pub fn profile(&self) -> impl Fn(u32) -> f64 + '_ {
        let coeff = self.coeff;
        let model = self.model;
        move |n: u32| match model {
            PhaseModel::Zero => 0.0,
            PhaseModel::Quadratic => coeff * (n as f64).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorSection {
    pub pump_thz: f64,
    pub fsr_ghz: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub linewidth_mhz: f64,
    pub q_factor: f64,
    pub brightness_pairs_per_s: f64,
    pub pump_mw: f64,
    /// Pair-level transmission table; the calibrated default envelope when
    /// omitted.
    pub transmission: Option<Vec<TransmissionEntry>>,
    pub phase: PhaseSection,
}

impl Default for ResonatorSection {
    fn default() -> Self {
        Self {
            pump_thz: 194.67,
            fsr_ghz: 21.18,
            n_min: 3,
            n_max: 83,
            linewidth_mhz: 600.0,
            q_factor: 3.0e5,
            brightness_pairs_per_s: 15.87e6,
            pump_mw: 0.75,
            transmission: None,
            phase: PhaseSection::default(),
        }
    }
}

impl ResonatorSection {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.pump_thz, self.fsr_ghz, self.n_min, self.n_max)
    }

    pub fn model(&self) -> Result<ResonatorModel> {
        let grid = self.grid()?;
        let table: BTreeMap<u32, f64> = match &self.transmission {
            Some(entries) => entries.iter().map(|e| (e.n, e.t)).collect(),
            None => grid
                .indices()
                .map(|n| (n, default_pair_transmission(n)))
                .collect(),
        };
        ResonatorModel::new(
            grid,
            self.linewidth_mhz * 1e-3,
            self.q_factor,
            table,
            self.brightness_pairs_per_s,
            self.pump_mw,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    pub mu1: f64,
    pub theta1: f64,
    pub mu2: f64,
    pub theta2: f64,
    pub rf_ghz: f64,
    /// Step height of the mask between the qubit modes.
    pub alpha: f64,
    pub guard_modes: u32,
    pub truncation_margin: u32,
    pub dispersion_ps_nm: f64,
}

impl Default for GateSection {
    fn default() -> Self {
        // theta1 = pi/2 with theta2 - theta1 = pi realizes the real Hadamard
        // at alpha = pi.
        Self {
            mu1: 0.81,
            theta1: FRAC_PI_2,
            mu2: 0.81,
            theta2: FRAC_PI_2 + PI,
            rf_ghz: 21.18,
            alpha: PI,
            guard_modes: 2,
            truncation_margin: 16,
            dispersion_ps_nm: 0.0,
        }
    }
}

impl GateSection {
    /// Gate with the mask step `alpha` between modes `base` and `base + 1`.
    pub fn gate_config(&self, alpha: f64, base: i32, resonator: &ResonatorSection) -> GateConfig {
        let mut mask = if alpha == 0.0 {
            PfMask::identity()
        } else {
            PfMask::with_step(alpha, base + 1)
        };
        mask.dispersion_ps_per_nm = self.dispersion_ps_nm;
        mask.mode_spacing_ghz = resonator.fsr_ghz;
        mask.ref_frequency_thz = resonator.pump_thz;
        GateConfig {
            eom1: EomSettings {
                modulation_index: self.mu1,
                rf_frequency_ghz: self.rf_ghz,
                rf_phase: self.theta1,
            },
            mask,
            eom2: EomSettings {
                modulation_index: self.mu2,
                rf_frequency_ghz: self.rf_ghz,
                rf_phase: self.theta2,
            },
            truncation_margin: self.truncation_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency_idler: f64,
    pub efficiency_signal: f64,
    pub coincidence_window_ns: f64,
    pub dead_time_ns: f64,
    pub dark_count_rate_hz: f64,
    /// Flat per-arm device transmission (filters + modulators); defaults to
    /// 14 dB per arm.
    pub path_transmission_idler: f64,
    pub path_transmission_signal: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let devices_14_db = 10f64.powf(-1.4);
        Self {
            efficiency_idler: 0.7,
            efficiency_signal: 0.7,
            coincidence_window_ns: 1.0,
            dead_time_ns: 20.0,
            dark_count_rate_hz: 100.0,
            path_transmission_idler: devices_14_db,
            path_transmission_signal: devices_14_db,
        }
    }
}

impl DetectorSection {
    pub fn model(&self) -> Result<DetectorModel> {
        let det = DetectorModel {
            efficiency_idler: self.efficiency_idler,
            efficiency_signal: self.efficiency_signal,
            coincidence_window_ns: self.coincidence_window_ns,
            dead_time_ns: self.dead_time_ns,
            dark_count_rate_hz: self.dark_count_rate_hz,
            path_transmission_idler: self.path_transmission_idler,
            path_transmission_signal: self.path_transmission_signal,
        };
        det.validate()?;
        Ok(det)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QkdSection {
    pub sifting_factor: f64,
    pub ec_efficiency: f64,
    pub qber_threshold: f64,
    /// Integration time per projection, seconds.
    pub tau_s: f64,
    /// First qubit block base for multi-pair runs.
    pub first_base: u32,
    pub n_pairs: u32,
}

impl Default for QkdSection {
    fn default() -> Self {
        Self {
            sifting_factor: 0.5,
            ec_efficiency: 1.1,
            qber_threshold: 0.11,
            tau_s: 125.0,
            first_base: 10,
            n_pairs: 17,
        }
    }
}

impl QkdSection {
    pub fn sifting_params(&self) -> SiftingParams {
        SiftingParams {
            sifting_factor: self.sifting_factor,
            ec_efficiency: self.ec_efficiency,
        }
    }

    /// Qubit block bases for the multi-pair layout: blocks of two modes
    /// separated by `guard_modes` unused modes.
    pub fn pair_bases(&self, guard_modes: u32) -> Vec<u32> {
        let stride = 2 + guard_modes;
        (0..self.n_pairs)
            .map(|i| self.first_base + i * stride)
            .collect()
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub resonator: ResonatorSection,
    pub gate: GateSection,
    pub detector: DetectorSection,
    pub qkd: QkdSection,
    pub seed: u64,
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.resonator.model()?;
        self.detector.model()?;
        let gate = self.gate.gate_config(self.gate.alpha, 0, &self.resonator);
        gate.validate()?;
        if !(0.0..=1.0).contains(&self.qkd.sifting_factor) {
            return Err(Error::Config("sifting factor must be in [0,1]".into()));
        }
        if self.qkd.ec_efficiency < 1.0 {
            return Err(Error::Config(
                "error-correction inefficiency must be >= 1".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.qkd.qber_threshold) {
            return Err(Error::Config("QBER threshold must be in [0, 0.5)".into()));
        }
        if !(self.qkd.tau_s > 0.0) {
            return Err(Error::Config("integration time must be > 0".into()));
        }
        let bases = self.qkd.pair_bases(self.gate.guard_modes);
        let grid = self.resonator.grid()?;
        for &b in &bases {
            if !grid.contains(b) || !grid.contains(b + 1) {
                return Err(Error::Config(format!(
                    "qubit block ({b}, {}) falls outside the comb grid",
                    b + 1
                )));
            }
        }
        Ok(())
    }
}
