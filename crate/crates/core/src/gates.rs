//! Electro-optic frequency-domain gates: sideband unitaries for the phase
//! modulators, diagonal masks for the programmable filter, and their
//! [EOM-PF-EOM] composition on a truncated mode lattice.
//!
//! Sideband convention (from the Jacobi-Anger expansion of
//! `exp(i mu cos(Omega t + theta))`): the element coupling input mode `n` to
//! output mode `n + k` is `i^k J_k(mu) e^{i k theta}`. With this convention
//! the step mask of height pi turns the composite into the real Hadamard when
//! `theta1 = pi/2` and `theta2 - theta1 = pi`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{bessel_j_table, sideband_tail_weight};

/// Total sideband weight allowed to fall outside a modulator window.
pub const TRUNCATION_TAIL_LIMIT: f64 = 1e-12;

/// Default mode spacing used by masks when no grid is wired in, GHz.
pub const DEFAULT_MODE_SPACING_GHZ: f64 = 21.18;
/// Default absolute frequency of lattice mode 0, THz.
pub const DEFAULT_REF_FREQUENCY_THZ: f64 = 194.67;

const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// One sinusoidally driven phase modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EomSettings {
    /// Modulation index `mu = pi * V / V_pi`, radians.
    pub modulation_index: f64,
    /// RF drive frequency, GHz. Equal to the comb FSR for qubit gates.
    pub rf_frequency_ghz: f64,
    /// RF phase, radians.
    pub rf_phase: f64,
}

impl EomSettings {
    pub fn new(modulation_index: f64, rf_frequency_ghz: f64, rf_phase: f64) -> Result<Self> {
        let s = Self {
            modulation_index,
            rf_frequency_ghz,
            rf_phase,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_index.is_finite() && self.modulation_index >= 0.0) {
            return Err(Error::Validation(format!(
                "modulation index must be >= 0, got {}",
                self.modulation_index
            )));
        }
        if !(self.rf_frequency_ghz.is_finite() && self.rf_frequency_ghz > 0.0) {
            return Err(Error::Validation(format!(
                "RF frequency must be positive, got {} GHz",
                self.rf_frequency_ghz
            )));
        }
        Ok(())
    }
}

/// A phase step: adds `height` radians to every mode at or above `split`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub split: i32,
    pub height: f64,
}

/// Programmable-filter mask: diagonal in the frequency basis.
///
/// The phase at mode `m` is the cumulative height of all steps at or below
/// `m`, plus any explicit per-mode override, plus the quadratic dispersion
/// phase. Amplitudes default to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfMask {
    steps: Vec<PhaseStep>,
    phase_overrides: BTreeMap<i32, f64>,
    amplitudes: BTreeMap<i32, f64>,
    /// Applied as a quadratic spectral phase referenced to the window center.
    pub dispersion_ps_per_nm: f64,
    /// Minimum addressable spectral step of the filter, GHz.
    pub resolution_ghz: f64,
    /// Mode lattice spacing, GHz.
    pub mode_spacing_ghz: f64,
    /// Absolute optical frequency of lattice mode 0, THz.
    pub ref_frequency_thz: f64,
}

impl Default for PfMask {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            phase_overrides: BTreeMap::new(),
            amplitudes: BTreeMap::new(),
            dispersion_ps_per_nm: 0.0,
            resolution_ghz: 10.0,
            mode_spacing_ghz: DEFAULT_MODE_SPACING_GHZ,
            ref_frequency_thz: DEFAULT_REF_FREQUENCY_THZ,
        }
    }
}

impl PfMask {
    /// Flat mask (identity filter).
    pub fn identity() -> Self {
        Self::default()
    }

    /// Single step of height `alpha` applied to every mode >= `split`. For a
    /// qubit block `(b, b+1)` the step between the modes has `split = b + 1`.
    pub fn with_step(alpha: f64, split: i32) -> Self {
        let mut mask = Self::default();
        mask.steps.push(PhaseStep {
            split,
            height: alpha,
        });
        mask
    }

    pub fn add_step(&mut self, alpha: f64, split: i32) {
        self.steps.push(PhaseStep {
            split,
            height: alpha,
        });
    }

    pub fn set_phase_override(&mut self, mode: i32, phase: f64) {
        self.phase_overrides.insert(mode, phase);
    }

    pub fn set_amplitude(&mut self, mode: i32, amplitude: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::Validation(format!(
                "mask amplitude must be in [0,1], got {amplitude}"
            )));
        }
        self.amplitudes.insert(mode, amplitude);
        Ok(())
    }

    pub fn steps(&self) -> &[PhaseStep] {
        &self.steps
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.values().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Validation("mask amplitudes must be in [0,1]".into()));
        }
        // Steps must be addressable: the lattice pitch cannot be finer than
        // the filter resolution.
        if self.mode_spacing_ghz < self.resolution_ghz {
            return Err(Error::Validation(format!(
                "mode spacing {} GHz is below the filter resolution {} GHz",
                self.mode_spacing_ghz, self.resolution_ghz
            )));
        }
        Ok(())
    }

    /// Programmed phase at mode `m` (steps + overrides, no dispersion).
    pub fn phase_at(&self, m: i32) -> f64 {
        let steps: f64 = self
            .steps
            .iter()
            .filter(|s| m >= s.split)
            .map(|s| s.height)
            .sum();
        steps + self.phase_overrides.get(&m).copied().unwrap_or(0.0)
    }

    pub fn amplitude_at(&self, m: i32) -> f64 {
        self.amplitudes.get(&m).copied().unwrap_or(1.0)
    }

    /// Quadratic dispersion phase at mode `m`, referenced to `center` (in
    /// mode units): `phi(f) = -pi c D ((f - f_ref)/f_ref)^2` with
    /// `f_ref` the absolute frequency at the window center.
    pub fn dispersion_phase_at(&self, m: i32, center: f64) -> f64 {
        if self.dispersion_ps_per_nm == 0.0 {
            return 0.0;
        }
        let d_s_per_m = self.dispersion_ps_per_nm * 1e-3;
        let f_ref_thz = self.ref_frequency_thz + center * self.mode_spacing_ghz * 1e-3;
        let df_thz = (m as f64 - center) * self.mode_spacing_ghz * 1e-3;
        -PI * d_s_per_m * SPEED_OF_LIGHT_M_S * (df_thz / f_ref_thz).powi(2)
    }
}

/// Contiguous inclusive range of mode indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeWindow {
    pub lo: i32,
    pub hi: i32,
}

impl ModeWindow {
    pub fn new(lo: i32, hi: i32) -> Result<Self> {
        if hi < lo {
            return Err(Error::Validation(format!(
                "window upper bound {hi} below lower bound {lo}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Window spanning the qubit block `(base, base+1)` plus `margin` modes
    /// on each side.
    pub fn around_block(base: i32, margin: u32) -> Self {
        Self {
            lo: base - margin as i32,
            hi: base + 1 + margin as i32,
        }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, mode: i32) -> bool {
        (self.lo..=self.hi).contains(&mode)
    }

    pub fn pad(&self, margin: u32) -> Self {
        Self {
            lo: self.lo - margin as i32,
            hi: self.hi + margin as i32,
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }

    pub fn index_of(&self, mode: i32) -> Result<usize> {
        if self.contains(mode) {
            Ok((mode - self.lo) as usize)
        } else {
            Err(Error::OutOfRange {
                what: "mode index",
                value: mode as i64,
                min: self.lo as i64,
                max: self.hi as i64,
            })
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi) as f64
    }
}

/// Dense complex operator over a contiguous window of mode indices.
/// `matrix[(r, c)]` couples input mode `lo + c` to output mode `lo + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    window: ModeWindow,
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn from_matrix(window: ModeWindow, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != window.len() || matrix.ncols() != window.len() {
            return Err(Error::Validation(format!(
                "matrix is {}x{} but window holds {} modes",
                matrix.nrows(),
                matrix.ncols(),
                window.len()
            )));
        }
        Ok(Self { window, matrix })
    }

    /// Identity on `window` with an arbitrary 2x2 block on modes
    /// `(base, base+1)`. Useful for injecting ideal gates.
    pub fn from_block(window: ModeWindow, base: i32, block: &Matrix2<Complex64>) -> Result<Self> {
        let i0 = window.index_of(base)?;
        let i1 = window.index_of(base + 1)?;
        let mut m = DMatrix::identity(window.len(), window.len());
        m[(i0, i0)] = block[(0, 0)];
        m[(i0, i1)] = block[(0, 1)];
        m[(i1, i0)] = block[(1, 0)];
        m[(i1, i1)] = block[(1, 1)];
        Ok(Self { window, matrix: m })
    }

    pub fn window(&self) -> ModeWindow {
        self.window
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn element(&self, out_mode: i32, in_mode: i32) -> Result<Complex64> {
        let r = self.window.index_of(out_mode)?;
        let c = self.window.index_of(in_mode)?;
        Ok(self.matrix[(r, c)])
    }

    /// Restrict to a sub-window (both rows and columns).
    pub fn restricted(&self, sub: ModeWindow) -> Result<Self> {
        let r0 = self.window.index_of(sub.lo)?;
        self.window.index_of(sub.hi)?;
        let n = sub.len();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.matrix[(r0 + r, r0 + c)];
            }
        }
        Ok(Self {
            window: sub,
            matrix: m,
        })
    }

    /// Largest deviation of an interior column norm from 1, where interior
    /// means at least `margin` modes away from both window edges. This is
    /// the truncation defect of the represented operator.
    pub fn interior_column_norm_deviation(&self, margin: usize) -> f64 {
        let n = self.window.len();
        if 2 * margin >= n {
            return f64::NAN;
        }
        (margin..n - margin)
            .map(|c| (self.matrix.column(c).norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn i_pow(k: i32) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Sideband unitary of one phase modulator over `window`.
///
/// Element `(n+k, n)` is `i^k J_k(mu) e^{i k theta}`. The window must be wide
/// enough that the sidebands falling outside it carry less than
/// [`TRUNCATION_TAIL_LIMIT`] of the total weight.
pub fn eom_unitary(settings: &EomSettings, window: ModeWindow) -> Result<ModeUnitary> {
    settings.validate()?;
    let n = window.len();
    let half = (n - 1) / 2;
    let tail = sideband_tail_weight(half, settings.modulation_index);
    if tail >= TRUNCATION_TAIL_LIMIT {
        return Err(Error::Truncation {
            tail,
            limit: TRUNCATION_TAIL_LIMIT,
        });
    }

    let table = bessel_j_table(n - 1, settings.modulation_index);
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let k = r as i32 - c as i32;
            let mut jk = table[k.unsigned_abs() as usize];
            if k < 0 && k % 2 != 0 {
                jk = -jk;
            }
            m[(r, c)] = i_pow(k) * Complex64::from_polar(1.0, k as f64 * settings.rf_phase) * jk;
        }
    }
    ModeUnitary::from_matrix(window, m)
}

/// Diagonal unitary of the programmable filter over `window`.
pub fn pf_unitary(mask: &PfMask, window: ModeWindow) -> ModeUnitary {
    let center = window.center();
    let n = window.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, mode) in window.modes().enumerate() {
        let phase = mask.phase_at(mode) + mask.dispersion_phase_at(mode, center);
        m[(i, i)] = Complex64::from_polar(mask.amplitude_at(mode), phase);
    }
    ModeUnitary::from_matrix(window, m).expect("square by construction")
}

/// Full [EOM-PF-EOM] gate parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub eom1: EomSettings,
    pub mask: PfMask,
    pub eom2: EomSettings,
    /// Extra modes kept on each side of the requested window during
    /// composition.
    pub truncation_margin: u32,
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        self.eom1.validate()?;
        self.eom2.validate()?;
        self.mask.validate()?;
        if (self.eom1.rf_frequency_ghz - self.eom2.rf_frequency_ghz).abs()
            > 1e-9 * self.eom1.rf_frequency_ghz
        {
            return Err(Error::Validation(format!(
                "both modulators must share one RF frequency, got {} and {} GHz",
                self.eom1.rf_frequency_ghz, self.eom2.rf_frequency_ghz
            )));
        }
        if self.truncation_margin < 8 {
            return Err(Error::Validation(format!(
                "truncation margin must be >= 8, got {}",
                self.truncation_margin
            )));
        }
        Ok(())
    }
}

/// Compose `eom2 * pf * eom1` over the window padded by the truncation
/// margin, restricted back to the requested window.
pub fn compose_gate(config: &GateConfig, window: ModeWindow) -> Result<ModeUnitary> {
    config.validate()?;
    let padded = window.pad(config.truncation_margin);
    let e1 = eom_unitary(&config.eom1, padded)?;
    let pf = pf_unitary(&config.mask, padded);
    let e2 = eom_unitary(&config.eom2, padded)?;
    let full = e2.matrix() * pf.matrix() * e1.matrix();
    ModeUnitary::from_matrix(padded, full)?.restricted(window)
}

/// The 2x2 submatrix of `u` on the computational modes `(base, base+1)`.
pub fn extract_qubit_block(u: &ModeUnitary, base: i32) -> Result<Matrix2<Complex64>> {
    let a = u.element(base, base)?;
    let b = u.element(base, base + 1)?;
    let c = u.element(base + 1, base)?;
    let d = u.element(base + 1, base + 1)?;
    Ok(Matrix2::new(a, b, c, d))
}

fn trace_product(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Complex64 {
    (a.adjoint() * b).trace()
}

/// Gate fidelity `F = Tr(W^+ T) Tr(T^+ W) / (Tr(W^+ W) Tr(T^+ T))`:
/// how close the realized operation `W` is to the target `T`, insensitive to
/// overall scale and global phase.
pub fn gate_fidelity(w: &Matrix2<Complex64>, t: &Matrix2<Complex64>) -> Result<f64> {
    let ttt = trace_product(t, t).re;
    if ttt <= 0.0 {
        return Err(Error::invalid_input("target operator is zero"));
    }
    let www = trace_product(w, w).re;
    if www <= 0.0 {
        return Err(Error::UndefinedFidelity(
            "realized operation is zero".into(),
        ));
    }
    let cross = trace_product(w, t);
    Ok(cross.norm_sqr() / (www * ttt))
}

/// Success probability `P = Tr(W^+ W) / Tr(T^+ T)`: the fraction of input
/// intensity the gate keeps in the computational modes.
pub fn success_probability(w: &Matrix2<Complex64>, t: &Matrix2<Complex64>) -> Result<f64> {
    let ttt = trace_product(t, t).re;
    if ttt <= 0.0 {
        return Err(Error::invalid_input("target operator is zero"));
    }
    Ok(trace_product(w, w).re / ttt)
}

/// The real Hadamard target `(1/sqrt2) [[1, 1], [1, -1]]`.
pub fn hadamard() -> Matrix2<Complex64> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix2::new(h, h, h, -h)
}

pub fn identity2() -> Matrix2<Complex64> {
    Matrix2::identity()
}

/// One mask implementing an independent step phase for every qubit block.
///
/// Blocks occupy `(base, base+1)`; consecutive blocks must be separated by at
/// least `guard_modes` unused modes. The steps accumulate (a staircase), so
/// each block sees exactly its own relative phase.
pub fn parallel_mask(qubit_bases: &[i32], alphas: &[f64], guard_modes: u32) -> Result<PfMask> {
    if qubit_bases.len() != alphas.len() {
        return Err(Error::invalid_input(format!(
            "{} qubit bases but {} step heights",
            qubit_bases.len(),
            alphas.len()
        )));
    }
    let mut order: Vec<usize> = (0..qubit_bases.len()).collect();
    order.sort_by_key(|&i| qubit_bases[i]);
    for pair in order.windows(2) {
        let (b1, b2) = (qubit_bases[pair[0]], qubit_bases[pair[1]]);
        if b2 - b1 < 2 {
            return Err(Error::Layout(format!(
                "qubit blocks at bases {b1} and {b2} overlap"
            )));
        }
        let gap = (b2 - b1 - 2) as u32;
        if gap < guard_modes {
            return Err(Error::Layout(format!(
                "blocks at bases {b1} and {b2} leave {gap} guard modes, need {guard_modes}"
            )));
        }
    }
    let mut mask = PfMask::identity();
    for &i in &order {
        if alphas[i] != 0.0 {
            mask.add_step(alphas[i], qubit_bases[i] + 1);
        }
    }
    Ok(mask)
}

/// Total output intensity leaking into the block `(target_base, target_base+1)`
/// for unit input at `source_mode`, under the composed gate.
pub fn crosstalk(config: &GateConfig, source_mode: i32, target_base: i32) -> Result<f64> {
    if source_mode == target_base || source_mode == target_base + 1 {
        return Err(Error::invalid_input(
            "crosstalk source must lie outside the target block",
        ));
    }
    let lo = source_mode.min(target_base) - 1;
    let hi = source_mode.max(target_base + 1) + 1;
    let u = compose_gate(config, ModeWindow::new(lo, hi)?)?;
    let mut total = 0.0;
    for t in [target_base, target_base + 1] {
        total += u.element(t, source_mode)?.norm_sqr();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn hadamard_gate_config() -> GateConfig {
        GateConfig {
            eom1: EomSettings::new(0.81, 21.18, FRAC_PI_2).unwrap(),
            mask: PfMask::with_step(PI, 1),
            eom2: EomSettings::new(0.81, 21.18, FRAC_PI_2 + PI).unwrap(),
            truncation_margin: 16,
        }
    }

    fn identity_gate_config() -> GateConfig {
        GateConfig {
            mask: PfMask::identity(),
            ..hadamard_gate_config()
        }
    }

    /// Independent oracle: quadrature Bessel values and a naive triple
    /// product, sharing no code with the implementation path.
    fn oracle_bessel(k: i32, x: f64) -> f64 {
        let n = 4000;
        let h = PI / n as f64;
        let f = |t: f64| (k as f64 * t - x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / (3.0 * PI)
    }

    fn oracle_composite(
        mu: f64,
        th1: f64,
        th2: f64,
        alpha: f64,
        split: i32,
        window: ModeWindow,
    ) -> DMatrix<Complex64> {
        let n = window.len();
        let eom = |theta: f64| {
            let mut m = DMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    let k = r as i32 - c as i32;
                    m[(r, c)] = i_pow(k)
                        * Complex64::from_polar(oracle_bessel(k, mu), k as f64 * theta);
                }
            }
            m
        };
        let mut pf = DMatrix::zeros(n, n);
        for (i, mode) in window.modes().enumerate() {
            let phase = if mode >= split { alpha } else { 0.0 };
            pf[(i, i)] = Complex64::from_polar(1.0, phase);
        }
        eom(th2) * pf * eom(th1)
    }

    #[test]
    fn zero_modulation_is_identity() {
        let settings = EomSettings::new(0.0, 21.18, 0.0).unwrap();
        let u = eom_unitary(&settings, ModeWindow::new(-4, 4).unwrap()).unwrap();
        for r in -4..=4 {
            for c in -4..=4 {
                let e = u.element(r, c).unwrap();
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(e.re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sideband_magnitudes_match_bessel_oracle() {
        let settings = EomSettings::new(0.81, 21.18, 0.0).unwrap();
        let u = eom_unitary(&settings, ModeWindow::new(-10, 10).unwrap()).unwrap();
        assert_abs_diff_eq!(
            u.element(0, 0).unwrap().norm(),
            oracle_bessel(0, 0.81),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            u.element(1, 0).unwrap().norm(),
            oracle_bessel(1, 0.81),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            u.element(-1, 0).unwrap().norm(),
            oracle_bessel(1, 0.81).abs(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn interior_columns_are_unit_norm() {
        for mu in [0.2, 0.81, 1.5, 2.0] {
            let settings = EomSettings::new(mu, 21.18, 0.3).unwrap();
            let u = eom_unitary(&settings, ModeWindow::around_block(0, 16)).unwrap();
            assert!(u.interior_column_norm_deviation(16) < 1e-10, "mu = {mu}");
            // Row norms match by the convolution structure.
            let n = u.window().len();
            for r in 16..n - 16 {
                assert!((u.matrix().row(r).norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn interior_block_is_unitary() {
        // U^+ U restricted to the interior indices equals the identity.
        let settings = EomSettings::new(0.81, 21.18, 0.7).unwrap();
        let u = eom_unitary(&settings, ModeWindow::around_block(0, 16)).unwrap();
        let gram = u.matrix().adjoint() * u.matrix();
        let n = u.window().len();
        for r in 16..n - 16 {
            for c in 16..n - 16 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!(
                    (gram[(r, c)] - Complex64::new(expect, 0.0)).norm() < 1e-10,
                    "gram[({r},{c})] = {}",
                    gram[(r, c)]
                );
            }
        }
    }

    #[test]
    fn truncation_defect_shrinks_with_margin() {
        for mu in [0.2, 0.81, 1.5] {
            let settings = EomSettings::new(mu, 21.18, 0.0).unwrap();
            let d8 = eom_unitary(&settings, ModeWindow::around_block(0, 8))
                .unwrap()
                .interior_column_norm_deviation(8);
            let d16 = eom_unitary(&settings, ModeWindow::around_block(0, 16))
                .unwrap()
                .interior_column_norm_deviation(16);
            assert!(d16 <= d8 + 1e-15, "mu = {mu}: {d16} vs {d8}");
        }
    }

    #[test]
    fn window_too_small_errors() {
        let settings = EomSettings::new(2.0, 21.18, 0.0).unwrap();
        assert!(matches!(
            eom_unitary(&settings, ModeWindow::new(-2, 2).unwrap()),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn pf_identity_and_step() {
        let w = ModeWindow::new(-2, 3).unwrap();
        let id = pf_unitary(&PfMask::identity(), w);
        for m in w.modes() {
            assert_abs_diff_eq!(id.element(m, m).unwrap().re, 1.0, epsilon = 1e-15);
        }
        let step = pf_unitary(&PfMask::with_step(PI, 1), w);
        for m in w.modes() {
            let e = step.element(m, m).unwrap();
            let expect = if m >= 1 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(e.re, expect, epsilon = 1e-12);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dispersion_phase_matches_wavelength_form() {
        // Oracle in the lambda form: phi = -pi D lambda_ref^2 (f - f_ref)^2 / c.
        let mut mask = PfMask::identity();
        mask.dispersion_ps_per_nm = -0.4;
        let w = ModeWindow::new(-40, 40).unwrap();
        let center = w.center();
        for m in [-40i32, -7, 0, 13, 40] {
            let f_ref_hz = (mask.ref_frequency_thz + center * mask.mode_spacing_ghz * 1e-3) * 1e12;
            let lambda_ref = SPEED_OF_LIGHT_M_S / f_ref_hz;
            let df_hz = (m as f64 - center) * mask.mode_spacing_ghz * 1e9;
            let oracle = -PI * (-0.4e-3) * lambda_ref.powi(2) * df_hz.powi(2) / SPEED_OF_LIGHT_M_S;
            assert_abs_diff_eq!(mask.dispersion_phase_at(m, center), oracle, epsilon = 1e-12);
        }
        // -0.4 ps/nm over +-40 modes accumulates a few radians.
        assert!(mask.dispersion_phase_at(40, center).abs() > 1.0);
    }

    #[test]
    fn compose_with_zero_modulation_is_mask_only() {
        let mut config = identity_gate_config();
        config.eom1.modulation_index = 0.0;
        config.eom2.modulation_index = 0.0;
        config.mask = PfMask::with_step(1.2, 1);
        let u = compose_gate(&config, ModeWindow::new(-1, 2).unwrap()).unwrap();
        for m in -1..=2 {
            let e = u.element(m, m).unwrap();
            let expect = Complex64::from_polar(1.0, if m >= 1 { 1.2 } else { 0.0 });
            assert_abs_diff_eq!((e - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn composition_matches_oracle_product() {
        let config = hadamard_gate_config();
        let window = ModeWindow::around_block(0, 3);
        let u = compose_gate(&config, window).unwrap();
        let padded = window.pad(16);
        let oracle = oracle_composite(0.81, FRAC_PI_2, FRAC_PI_2 + PI, PI, 1, padded);
        let r0 = padded.index_of(window.lo).unwrap();
        for r in 0..window.len() {
            for c in 0..window.len() {
                let got = u.matrix()[(r, c)];
                let want = oracle[(r0 + r, r0 + c)];
                assert!((got - want).norm() < 1e-10, "({r},{c}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn composition_equals_naive_triple_product() {
        // Same factors, multiplied by hand: pins the composition and
        // restriction bookkeeping to 1e-12.
        let config = hadamard_gate_config();
        let window = ModeWindow::around_block(0, 3);
        let u = compose_gate(&config, window).unwrap();
        let padded = window.pad(config.truncation_margin);
        let e1 = eom_unitary(&config.eom1, padded).unwrap();
        let pf = pf_unitary(&config.mask, padded);
        let e2 = eom_unitary(&config.eom2, padded).unwrap();
        let n = padded.len();
        let r0 = padded.index_of(window.lo).unwrap();
        for r in 0..window.len() {
            for c in 0..window.len() {
                let mut acc = Complex64::ZERO;
                for k in 0..n {
                    acc += e2.matrix()[(r0 + r, k)] * pf.matrix()[(k, k)] * e1.matrix()[(k, r0 + c)];
                }
                assert!((u.matrix()[(r, c)] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_configuration_is_exact() {
        let config = identity_gate_config();
        let u = compose_gate(&config, ModeWindow::around_block(0, 2)).unwrap();
        let w = extract_qubit_block(&u, 0).unwrap();
        assert!(gate_fidelity(&w, &identity2()).unwrap() > 0.999_999);
        assert!((success_probability(&w, &identity2()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hadamard_configuration_reaches_target() {
        let config = hadamard_gate_config();
        let u = compose_gate(&config, ModeWindow::around_block(0, 2)).unwrap();
        let w = extract_qubit_block(&u, 0).unwrap();
        let f = gate_fidelity(&w, &hadamard()).unwrap();
        let p = success_probability(&w, &hadamard()).unwrap();
        assert!(f >= 0.99, "F = {f}");
        assert!((0.95..=0.99).contains(&p), "P = {p}");
        // Frozen from the quadrature-Bessel triple-product oracle.
        let expect = [[0.709_940_58, 0.687_553_47], [0.687_553_47, 0.709_940_58]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((w[(r, c)].norm() - expect[r][c]).abs() < 1e-6);
            }
        }
        // Entrywise moduli sit near sqrt(P) * |H| (within ~1.2e-2).
        let scale = (p / 2.0).sqrt();
        for r in 0..2 {
            for c in 0..2 {
                assert!((w[(r, c)].norm() - scale).abs() < 2e-2);
            }
        }
    }

    #[test]
    fn diagonal_mask_gate_extracts_phases() {
        let mut config = identity_gate_config();
        config.eom1.modulation_index = 0.0;
        config.eom2.modulation_index = 0.0;
        let mut mask = PfMask::identity();
        mask.set_phase_override(0, 0.4);
        mask.set_phase_override(1, -1.1);
        config.mask = mask;
        let u = compose_gate(&config, ModeWindow::around_block(0, 2)).unwrap();
        let w = extract_qubit_block(&u, 0).unwrap();
        assert!((w[(0, 0)] - Complex64::from_polar(1.0, 0.4)).norm() < 1e-12);
        assert!((w[(1, 1)] - Complex64::from_polar(1.0, -1.1)).norm() < 1e-12);
        assert!(w[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn extract_block_out_of_window() {
        let u = eom_unitary(
            &EomSettings::new(0.5, 21.18, 0.0).unwrap(),
            ModeWindow::new(-8, 9).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            extract_qubit_block(&u, 9),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn fidelity_basics() {
        let h = hadamard();
        assert_abs_diff_eq!(gate_fidelity(&h, &h).unwrap(), 1.0, epsilon = 1e-15);
        let half = h.map(|e| e * Complex64::new(0.5, 0.0));
        assert_abs_diff_eq!(gate_fidelity(&half, &h).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            gate_fidelity(&hadamard(), &identity2()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let zero = Matrix2::zeros();
        assert!(matches!(
            gate_fidelity(&zero, &h),
            Err(Error::UndefinedFidelity(_))
        ));
        assert!(gate_fidelity(&h, &zero).is_err());
    }

    #[test]
    fn success_probability_basics() {
        let h = hadamard();
        assert_abs_diff_eq!(success_probability(&h, &h).unwrap(), 1.0, epsilon = 1e-15);
        let scaled = h.map(|e| e / Complex64::new(2.0_f64.sqrt(), 0.0));
        assert_abs_diff_eq!(success_probability(&scaled, &h).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn parallel_mask_layouts() {
        let mask = parallel_mask(&[0, 4], &[PI, PI], 2).unwrap();
        assert_eq!(mask.phase_at(0), 0.0);
        assert_abs_diff_eq!(mask.phase_at(1), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(mask.phase_at(4), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(mask.phase_at(5), 2.0 * PI, epsilon = 1e-15);

        let id = parallel_mask(&[0], &[0.0], 2).unwrap();
        assert!(id.steps().is_empty());

        // 17 qubit pairs at spacing 4 fit in 70 modes with 2 guards.
        let bases: Vec<i32> = (0..17).map(|i| 4 * i).collect();
        let alphas = vec![PI; 17];
        assert!(parallel_mask(&bases, &alphas, 2).is_ok());
        assert!(*bases.last().unwrap() + 1 < 70);

        assert!(matches!(
            parallel_mask(&[0, 1], &[PI, PI], 0),
            Err(Error::Layout(_))
        ));
        assert!(matches!(
            parallel_mask(&[0, 3], &[PI, PI], 2),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn crosstalk_zero_without_modulation() {
        let mut config = hadamard_gate_config();
        config.eom1.modulation_index = 0.0;
        config.eom2.modulation_index = 0.0;
        assert_abs_diff_eq!(crosstalk(&config, 4, 0).unwrap(), 0.0, epsilon = 1e-24);
    }

    #[test]
    fn crosstalk_two_guards_below_threshold() {
        let mut config = hadamard_gate_config();
        config.mask = parallel_mask(&[0, 4], &[PI, PI], 2).unwrap();
        for src in [4, 5] {
            assert!(crosstalk(&config, src, 0).unwrap() <= 1e-3);
        }
        for src in [0, 1] {
            assert!(crosstalk(&config, src, 4).unwrap() <= 1e-3);
        }
    }

    #[test]
    fn crosstalk_adjacent_exceeds_threshold() {
        let config = hadamard_gate_config();
        // Source immediately adjacent to the block (zero guard modes).
        let leak = crosstalk(&config, 2, 0).unwrap();
        assert!(leak > 1e-3, "adjacent leak = {leak}");
        assert!(matches!(
            crosstalk(&config, 1, 0),
            Err(Error::Invalid { .. })
        ));
    }

    #[test]
    fn parallel_independence_of_blocks() {
        let mut single = hadamard_gate_config();
        single.mask = parallel_mask(&[0], &[PI], 2).unwrap();
        let mut double = hadamard_gate_config();
        double.mask = parallel_mask(&[0, 4], &[PI, PI], 2).unwrap();
        let w = ModeWindow::new(-2, 7).unwrap();
        let u1 = compose_gate(&single, w).unwrap();
        let u2 = compose_gate(&double, w).unwrap();
        let b1 = extract_qubit_block(&u1, 0).unwrap();
        let b2 = extract_qubit_block(&u2, 0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((b1[(r, c)].norm() - b2[(r, c)].norm()).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn alpha_sweep_is_monotone() {
        let steps = 32;
        let mut f_id = Vec::new();
        let mut f_h = Vec::new();
        for i in 0..steps {
            let alpha = PI * i as f64 / (steps - 1) as f64;
            let mut config = hadamard_gate_config();
            config.mask = PfMask::with_step(alpha, 1);
            let u = compose_gate(&config, ModeWindow::around_block(0, 2)).unwrap();
            let w = extract_qubit_block(&u, 0).unwrap();
            f_id.push(gate_fidelity(&w, &identity2()).unwrap());
            f_h.push(gate_fidelity(&w, &hadamard()).unwrap());
        }
        assert!(f_id.windows(2).all(|p| p[1] < p[0]));
        assert!(f_h.windows(2).all(|p| p[1] > p[0]));
    }

    proptest! {
        // F(cW, T) = F(W, T) for any complex c != 0.
        #[test]
        fn fidelity_scale_invariance(re in -2.0_f64..2.0, im in -2.0_f64..2.0) {
            prop_assume!(re.hypot(im) > 1e-3);
            let config = hadamard_gate_config();
            let u = compose_gate(&config, ModeWindow::around_block(0, 2)).unwrap();
            let w = extract_qubit_block(&u, 0).unwrap();
            let c = Complex64::new(re, im);
            let scaled = w.map(|e| e * c);
            let f1 = gate_fidelity(&w, &hadamard()).unwrap();
            let f2 = gate_fidelity(&scaled, &hadamard()).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-9);
        }
    }
}
