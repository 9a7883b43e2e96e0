//! Projection probabilities, the detection chain, and simulated coincidence
//! records.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::ModeUnitary;
use crate::resonator::TwoQubitState;

/// Single-photon analysis outcome label in one of the three bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProjectorLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl ProjectorLabel {
    /// The 16 labels recorded by the tomography protocol, row-major
    /// (idler outer, signal inner): {0, 1, +, +i} x {0, 1, +, +i}.
    pub const TOMOGRAPHY: [ProjectorLabel; 4] = [
        ProjectorLabel::Zero,
        ProjectorLabel::One,
        ProjectorLabel::Plus,
        ProjectorLabel::PlusI,
    ];

    /// Unit vector of the projection state.
    pub fn ket(&self) -> Vector2<Complex64> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let ih = Complex64::new(0.0, FRAC_1_SQRT_2);
        match self {
            ProjectorLabel::Zero => Vector2::new(Complex64::new(1.0, 0.0), Complex64::ZERO),
            ProjectorLabel::One => Vector2::new(Complex64::ZERO, Complex64::new(1.0, 0.0)),
            ProjectorLabel::Plus => Vector2::new(h, h),
            ProjectorLabel::Minus => Vector2::new(h, -h),
            ProjectorLabel::PlusI => Vector2::new(h, ih),
            ProjectorLabel::MinusI => Vector2::new(h, -ih),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectorLabel::Zero => "0",
            ProjectorLabel::One => "1",
            ProjectorLabel::Plus => "+",
            ProjectorLabel::Minus => "-",
            ProjectorLabel::PlusI => "+i",
            ProjectorLabel::MinusI => "-i",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(ProjectorLabel::Zero),
            "1" => Ok(ProjectorLabel::One),
            "+" => Ok(ProjectorLabel::Plus),
            "-" => Ok(ProjectorLabel::Minus),
            "+i" => Ok(ProjectorLabel::PlusI),
            "-i" => Ok(ProjectorLabel::MinusI),
            other => Err(Error::invalid_input(format!(
                "unknown projector label {other:?}"
            ))),
        }
    }

    /// How the [EOM-PF-EOM] analyzer realizes this projection: a phase
    /// applied to the qubit's `|1>` mode before the gate, the step height of
    /// the gate mask, and which block mode is routed to the detector.
    pub fn analysis_setting(&self) -> ArmSetting {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            ProjectorLabel::Zero => ArmSetting::new(0.0, 0.0, 0),
            ProjectorLabel::One => ArmSetting::new(0.0, 0.0, 1),
            ProjectorLabel::Plus => ArmSetting::new(0.0, PI, 0),
            ProjectorLabel::Minus => ArmSetting::new(0.0, PI, 1),
            ProjectorLabel::PlusI => ArmSetting::new(-FRAC_PI_2, PI, 0),
            ProjectorLabel::MinusI => ArmSetting::new(-FRAC_PI_2, PI, 1),
        }
    }
}

impl std::fmt::Display for ProjectorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Analyzer settings for one photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSetting {
    /// Phase applied to the `|1>` mode ahead of the gate (basis pre-rotation).
    pub pre_phase: f64,
    /// Step height of the gate mask (0 = identity, pi = Hadamard).
    pub alpha: f64,
    /// Output mode offset within the block selected by the demultiplexer.
    pub output_offset: u8,
}

impl ArmSetting {
    fn new(pre_phase: f64, alpha: f64, output_offset: u8) -> Self {
        Self {
            pre_phase,
            alpha,
            output_offset,
        }
    }
}

/// Detection chain: detector efficiencies, timing, and the flat per-arm
/// device transmissions (filters and modulators lumped together).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency_idler: f64,
    pub efficiency_signal: f64,
    pub coincidence_window_ns: f64,
    pub dead_time_ns: f64,
    pub dark_count_rate_hz: f64,
    pub path_transmission_idler: f64,
    pub path_transmission_signal: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("efficiency_idler", self.efficiency_idler),
            ("efficiency_signal", self.efficiency_signal),
            ("path_transmission_idler", self.path_transmission_idler),
            ("path_transmission_signal", self.path_transmission_signal),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} must be in [0,1], got {v}")));
            }
        }
        if !(self.coincidence_window_ns > 0.0) {
            return Err(Error::Validation("coincidence window must be > 0".into()));
        }
        if self.dead_time_ns < 0.0 || self.dark_count_rate_hz < 0.0 {
            return Err(Error::Validation(
                "dead time and dark rate must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Rate reduction from detector dead time, as a multiplicative factor
/// `1 / (1 + rate * dead_time)`. Within 2% of unity up to 40 kHz singles at
/// 20 ns dead time, and monotone in the rate.
pub fn dead_time_factor(rate_hz: f64, dead_time_s: f64) -> f64 {
    1.0 / (1.0 + rate_hz * dead_time_s)
}

/// Coincidence counts per projection pair for one integration run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub pairs: Vec<ProjectionCount>,
    pub tau_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCount {
    pub i_label: ProjectorLabel,
    pub s_label: ProjectorLabel,
    pub counts: u64,
}

impl CoincidenceRecord {
    pub fn counts(&self, i_label: ProjectorLabel, s_label: ProjectorLabel) -> Option<u64> {
        self.pairs
            .iter()
            .find(|p| p.i_label == i_label && p.s_label == s_label)
            .map(|p| p.counts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) {
            return Err(Error::Validation(
                "integration time must be positive".into(),
            ));
        }
        Ok(())
    }

    /// CSV export with columns `i_label,s_label,counts`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i_label,s_label,counts\n");
        for p in &self.pairs {
            out.push_str(&format!("{},{},{}\n", p.i_label, p.s_label, p.counts));
        }
        out
    }
}

/// `|<a,b|psi>|^2` for the unit vectors of the labels (lossless analytic
/// projection).
pub fn projection_probability(
    state: &TwoQubitState,
    labels: (ProjectorLabel, ProjectorLabel),
) -> Result<f64> {
    state.validate_normalized()?;
    let vi = labels.0.ket();
    let vs = labels.1.ket();
    let mut amp = Complex64::ZERO;
    for i_bit in 0..2u8 {
        for s_bit in 0..2u8 {
            amp += vi[i_bit as usize].conj()
                * vs[s_bit as usize].conj()
                * state.amplitude(i_bit, s_bit);
        }
    }
    Ok(amp.norm_sqr())
}

/// Joint intensity at output modes `(out_idler, out_signal)` after pushing
/// each photon's half of the state through its full mode unitary.
///
/// The two-qubit state is embedded on the lattice at blocks
/// `(base_idler, base_idler+1)` and `(base_signal, base_signal+1)`. Unlike
/// [`projection_probability`] this includes the gates' success-probability
/// loss.
pub fn gate_projection_probability(
    state: &TwoQubitState,
    u_idler: &ModeUnitary,
    u_signal: &ModeUnitary,
    base_idler: i32,
    base_signal: i32,
    output_modes: (i32, i32),
) -> Result<f64> {
    state.validate_normalized()?;
    let mut amp = Complex64::ZERO;
    for i_bit in 0..2u8 {
        for s_bit in 0..2u8 {
            let c = state.amplitude(i_bit, s_bit);
            if c == Complex64::ZERO {
                continue;
            }
            let ui = u_idler.element(output_modes.0, base_idler + i_bit as i32)?;
            let us = u_signal.element(output_modes.1, base_signal + s_bit as i32)?;
            amp += ui * us * c;
        }
    }
    Ok(amp.norm_sqr())
}

/// Expected coincidences for one projection over integration time `tau_s`:
/// true pairs `prob * pair_rate * eta_i eta_s T_i T_s * tau` (with dead-time
/// factors) plus accidentals `singles_i * singles_s * window * tau`.
///
/// Singles per arm are `pair_rate * eta * T + dark`, dead-time corrected.
pub fn expected_coincidences(
    prob: f64,
    pair_rate: f64,
    det: &DetectorModel,
    tau_s: f64,
) -> f64 {
    debug_assert!(tau_s > 0.0, "integration time must be positive");
    let dead_s = det.dead_time_ns * 1e-9;
    let raw_i = pair_rate * det.efficiency_idler * det.path_transmission_idler
        + det.dark_count_rate_hz;
    let raw_s = pair_rate * det.efficiency_signal * det.path_transmission_signal
        + det.dark_count_rate_hz;
    let d_i = dead_time_factor(raw_i, dead_s);
    let d_s = dead_time_factor(raw_s, dead_s);
    let true_rate = prob
        * pair_rate
        * det.efficiency_idler
        * det.efficiency_signal
        * det.path_transmission_idler
        * det.path_transmission_signal
        * d_i
        * d_s;
    let accidental_rate = (raw_i * d_i) * (raw_s * d_s) * det.coincidence_window_ns * 1e-9;
    (true_rate + accidental_rate) * tau_s
}

/// Draw independent Poisson counts for every expectation; deterministic for a
/// fixed seed.
pub fn sample_coincidences(
    expectations: &BTreeMap<(ProjectorLabel, ProjectorLabel), f64>,
    tau_s: f64,
    seed: u64,
) -> Result<CoincidenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(expectations.len());
    for (&(i_label, s_label), &mean) in expectations {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::Validation(format!(
                "expectation for ({i_label}, {s_label}) must be finite and >= 0, got {mean}"
            )));
        }
        let counts = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Validation(format!("poisson parameter: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        pairs.push(ProjectionCount {
            i_label,
            s_label,
            counts,
        });
    }
    Ok(CoincidenceRecord {
        pairs,
        tau_s,
        seed,
    })
}
