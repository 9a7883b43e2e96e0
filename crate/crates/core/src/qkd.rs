//! Entanglement-based QKD metrics from basis-resolved coincidences: raw rate,
//! QBER, sifted key rate, and the security threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::binary_entropy;

/// Default QBER threshold below which a pair supports a positive key rate.
pub const DEFAULT_QBER_THRESHOLD: f64 = 0.11;

/// Coincidence counts in the Z and X analysis bases for one comb pair.
///
/// Counts are kept as reals so synthesized complements can be fractional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisCounts {
    pub c00: f64,
    pub c01: f64,
    pub c10: f64,
    pub c11: f64,
    pub cpp: f64,
    pub cpm: f64,
    pub cmp: f64,
    pub cmm: f64,
    /// Integration time per projection, seconds.
    pub tau_s: f64,
    /// Whether the minus-outcome counts were synthesized rather than measured.
    #[serde(default)]
    pub synthesized_complements: bool,
}

impl BasisCounts {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c00, self.c01, self.c10, self.c11, self.cpp, self.cpm, self.cmp, self.cmm,
        ];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Validation(
                "basis counts must be finite and >= 0".into(),
            ));
        }
        if !(self.tau_s > 0.0) {
            return Err(Error::Validation("integration time must be > 0".into()));
        }
        Ok(())
    }

    fn z_sum(&self) -> f64 {
        self.c00 + self.c01 + self.c10 + self.c11
    }

    fn x_sum(&self) -> f64 {
        self.cpp + self.cpm + self.cmp + self.cmm
    }

    /// Build from a 16-projection tomography record, synthesizing the three
    /// unrecorded X-basis outcomes by context complement: the corrected
    /// `(+,+)` probability fixes `C++ = Cmm` and the error counts absorb the
    /// remainder of the anchored flux. `z_counts` is `[C00, C01, C10, C11]`;
    /// the result is flagged.
    pub fn from_tomography_counts(
        z_counts: [f64; 4],
        cpp_measured: f64,
        eps_i_x: f64,
        eps_s_x: f64,
        tau_s: f64,
    ) -> Result<Self> {
        let [c00, c01, c10, c11] = z_counts;
        let anchor = c00 + c01 + c10 + c11;
        if anchor <= 0.0 {
            return Err(Error::Validation("empty Z context".into()));
        }
        if eps_i_x <= 0.0 || eps_s_x <= 0.0 {
            return Err(Error::Validation(
                "analyzer efficiencies must be positive".into(),
            ));
        }
        let p_pp = (cpp_measured / (anchor * eps_i_x * eps_s_x)).min(0.5);
        let cpp = anchor * p_pp;
        let cerr = anchor * (0.5 - p_pp);
        let counts = Self {
            c00,
            c01,
            c10,
            c11,
            cpp,
            cpm: cerr,
            cmp: cerr,
            cmm: cpp,
            tau_s,
            synthesized_complements: true,
        };
        counts.validate()?;
        Ok(counts)
    }
}

/// Composite per-basis totals `C_Z = (1/2) sum of Z counts`,
/// `C_X = (1/2) sum of X counts`.
pub fn basis_totals(c: &BasisCounts) -> Result<(f64, f64)> {
    c.validate()?;
    Ok((0.5 * c.z_sum(), 0.5 * c.x_sum()))
}

/// Raw coincidence rate `R_raw = (1/2) (C_Z + C_X) / tau`.
pub fn raw_rate(c: &BasisCounts) -> Result<f64> {
    let (cz, cx) = basis_totals(c)?;
    Ok(0.5 * (cz + cx) / c.tau_s)
}

/// Qubit error rate: erroneous coincidences over all coincidences in the two
/// bases, `e = (C01 + C10 + C+- + C-+) / (sum_Z + sum_X)`.
///
/// The denominator uses the plain basis sums (twice the composite totals):
/// with the composite `C_Z + C_X` in the denominator the all-equal-counts
/// case would read 1 instead of the correct 1/2.
pub fn qber(c: &BasisCounts) -> Result<f64> {
    c.validate()?;
    let denom = c.z_sum() + c.x_sum();
    if denom <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok((c.c01 + c.c10 + c.cpm + c.cmp) / denom)
}

/// Sifting and error-correction parameters for the key-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftingParams {
    /// Fraction of raw coincidences surviving basis reconciliation.
    pub sifting_factor: f64,
    /// Error-correction inefficiency `f` multiplying the leaked entropy.
    pub ec_efficiency: f64,
}

impl Default for SiftingParams {
    fn default() -> Self {
        Self {
            sifting_factor: 0.5,
            ec_efficiency: 1.1,
        }
    }
}

/// Sifted key rate and the secure fraction left after error correction and
/// privacy amplification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftedKey {
    /// `sifting_factor * R_raw`, bits/s.
    pub sifted_bps: f64,
    /// `max(0, 1 - (1 + f) h2(e))`.
    pub secure_fraction: f64,
}

/// Sifted key rate from the raw rate and QBER. Errors when `e >= 0.5` (no
/// key is possible).
pub fn sifted_key_rate(raw_rate: f64, e: f64, params: &SiftingParams) -> Result<SiftedKey> {
    if !(0.0..0.5).contains(&e) {
        return Err(Error::NoKey { qber: e });
    }
    let fraction = 1.0 - (1.0 + params.ec_efficiency) * binary_entropy(e);
    Ok(SiftedKey {
        sifted_bps: params.sifting_factor * raw_rate,
        secure_fraction: fraction.max(0.0),
    })
}

/// Everything the network planner needs to know about one comb pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub pair_index: u32,
    pub raw_rate: f64,
    pub qber: f64,
    pub sifted_bps: f64,
    pub secure_fraction: f64,
    /// `qber < threshold`, strict.
    pub secure: bool,
}

/// Aggregate the metrics for one pair; `secure` uses strict inequality
/// against the threshold.
pub fn evaluate_link(
    c: &BasisCounts,
    pair_index: u32,
    threshold: f64,
    params: &SiftingParams,
) -> Result<LinkMetrics> {
    let rate = raw_rate(c)?;
    let e = qber(c)?;
    let key = sifted_key_rate(rate, e, params)?;
    Ok(LinkMetrics {
        pair_index,
        raw_rate: rate,
        qber: e,
        sifted_bps: key.sifted_bps,
        secure_fraction: key.secure_fraction,
        secure: e < threshold,
    })
}
