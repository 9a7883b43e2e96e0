//! Two-qubit state reconstruction from the 16 recorded projections, with
//! physicality projection and Monte-Carlo error bars.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{CoincidenceRecord, ProjectorLabel};
use crate::resonator::TwoQubitState;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGENVALUE_TOL: f64 = 1e-10;

/// How raw counts are turned into the 16 projection probabilities.
///
/// The record holds only the {0, 1, +, +i} outcomes, so some normalization
/// convention is required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// One shared flux anchor: every count is divided by the total of the
    /// four Z(x)Z projections. Exact when all settings share one efficiency;
    /// underestimates coherences when the X/Y analyzers lose photons.
    SharedFlux,
    /// Per-arm, per-basis efficiency anchors estimated from the mixed-context
    /// row sums (e.g. `eps_signal_X = 2 (C_{0,+} + C_{1,+}) / N_ZZ`), assuming
    /// balanced superposition-basis marginals. Corrects the gate
    /// success-probability loss carried by the X/Y settings.
    #[default]
    PerBasisEfficiency,
}

/// The 16-projection tomography data set.
#[derive(Debug, Clone)]
pub struct TomographySet {
    counts: [[f64; 4]; 4],
    pub tau_s: f64,
}

impl TomographySet {
    /// Validates that the record holds exactly the 16 label combinations
    /// {0, 1, +, +i} x {0, 1, +, +i}, each once.
    pub fn from_record(record: &CoincidenceRecord) -> Result<Self> {
        record.validate()?;
        let labels = ProjectorLabel::TOMOGRAPHY;
        let mut counts = [[f64::NAN; 4]; 4];
        let mut seen = 0usize;
        for p in &record.pairs {
            let i = labels.iter().position(|&l| l == p.i_label);
            let s = labels.iter().position(|&l| l == p.s_label);
            match (i, s) {
                (Some(i), Some(s)) => {
                    if !counts[i][s].is_nan() {
                        return Err(Error::Validation(format!(
                            "duplicate projection ({}, {})",
                            p.i_label, p.s_label
                        )));
                    }
                    counts[i][s] = p.counts as f64;
                    seen += 1;
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "projection ({}, {}) is not part of the 16-setting tomography set",
                        p.i_label, p.s_label
                    )))
                }
            }
        }
        if seen != 16 {
            return Err(Error::Validation(format!(
                "tomography set needs all 16 projections, found {seen}"
            )));
        }
        Ok(Self {
            counts,
            tau_s: record.tau_s,
        })
    }

    /// Directly from a 4x4 count table in {0, 1, +, +i} order (idler rows,
    /// signal columns). Accepts fractional counts for synthetic data.
    pub fn from_counts(counts: [[f64; 4]; 4], tau_s: f64) -> Result<Self> {
        if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Validation(
                "counts must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { counts, tau_s })
    }

    pub fn count(&self, i: usize, s: usize) -> f64 {
        self.counts[i][s]
    }

    fn zz_total(&self) -> f64 {
        self.counts[0][0] + self.counts[0][1] + self.counts[1][0] + self.counts[1][1]
    }

    /// Probabilities for the 16 projections under the given normalization.
    pub fn probabilities(&self, normalization: Normalization) -> Result<[[f64; 4]; 4]> {
        let anchor = self.zz_total();
        if anchor <= 0.0 {
            return Err(Error::Reconstruction(
                "Z(x)Z context holds no counts; cannot anchor the pair flux".into(),
            ));
        }
        let (eps_i, eps_s) = match normalization {
            Normalization::SharedFlux => ([1.0; 4], [1.0; 4]),
            Normalization::PerBasisEfficiency => {
                let eps_i_x = 2.0 * (self.counts[2][0] + self.counts[2][1]) / anchor;
                let eps_i_y = 2.0 * (self.counts[3][0] + self.counts[3][1]) / anchor;
                let eps_s_x = 2.0 * (self.counts[0][2] + self.counts[1][2]) / anchor;
                let eps_s_y = 2.0 * (self.counts[0][3] + self.counts[1][3]) / anchor;
                for (name, eps) in [
                    ("idler X", eps_i_x),
                    ("idler Y", eps_i_y),
                    ("signal X", eps_s_x),
                    ("signal Y", eps_s_y),
                ] {
                    if eps <= 0.0 {
                        return Err(Error::Reconstruction(format!(
                            "cannot estimate {name} analyzer efficiency: empty context"
                        )));
                    }
                }
                ([1.0, 1.0, eps_i_x, eps_i_y], [1.0, 1.0, eps_s_x, eps_s_y])
            }
        };
        let mut p = [[0.0; 4]; 4];
        for i in 0..4 {
            for s in 0..4 {
                p[i][s] = self.counts[i][s] / (anchor * eps_i[i] * eps_s[s]);
            }
        }
        Ok(p)
    }
}

/// Reconstructed two-qubit density operator with diagnostics.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: Matrix4<Complex64>,
    pub method: String,
    pub eigenvalues: [f64; 4],
    /// |trace - 1| of the raw input before renormalization.
    pub trace_residual: f64,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        let adj = m.adjoint();
        let herm_dev = (m - adj).iter().map(|e| e.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian: deviation {herm_dev:.3e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace {} != 1",
                tr.re
            )));
        }
        if self.eigenvalues.iter().any(|&l| l < -EIGENVALUE_TOL) {
            return Err(Error::Validation(format!(
                "negative eigenvalue {:?}",
                self.eigenvalues
            )));
        }
        Ok(())
    }
}

/// Rank-1 projector `|a,b><a,b|` for the tensor-product label vector.
pub fn projector_matrix(labels: (ProjectorLabel, ProjectorLabel)) -> Matrix4<Complex64> {
    let vi = labels.0.ket();
    let vs = labels.1.ket();
    let mut v = Vector4::zeros();
    for i in 0..2 {
        for s in 0..2 {
            v[2 * i + s] = vi[i] * vs[s];
        }
    }
    v * v.adjoint()
}

/// Hermitian basis used to parameterize rho by 16 real coefficients:
/// 4 diagonal units, then (re, im) units for each upper-triangle entry.
fn hermitian_basis() -> Vec<Matrix4<Complex64>> {
    let mut basis = Vec::with_capacity(16);
    for i in 0..4 {
        let mut m = Matrix4::zeros();
        m[(i, i)] = Complex64::new(1.0, 0.0);
        basis.push(m);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut re = Matrix4::zeros();
            re[(i, j)] = Complex64::new(1.0, 0.0);
            re[(j, i)] = Complex64::new(1.0, 0.0);
            basis.push(re);
            let mut im = Matrix4::zeros();
            im[(i, j)] = Complex64::new(0.0, 1.0);
            im[(j, i)] = Complex64::new(0.0, -1.0);
            basis.push(im);
        }
    }
    basis
}

/// Least-squares linear inversion of the 16 projection probabilities.
/// Returns the raw (Hermitian, possibly non-positive) estimate.
pub fn linear_inversion(
    set: &TomographySet,
    normalization: Normalization,
) -> Result<Matrix4<Complex64>> {
    let probs = set.probabilities(normalization)?;
    if probs.iter().flatten().any(|&p| p < 0.0) {
        return Err(Error::Validation("negative projection probability".into()));
    }
    let labels = ProjectorLabel::TOMOGRAPHY;
    let basis = hermitian_basis();
    let mut a = DMatrix::zeros(16, 16);
    let mut y = DVector::zeros(16);
    for (row, (i, s)) in (0..4)
        .flat_map(|i| (0..4).map(move |s| (i, s)))
        .enumerate()
    {
        let proj = projector_matrix((labels[i], labels[s]));
        for (col, b) in basis.iter().enumerate() {
            a[(row, col)] = (proj.adjoint() * b).trace().re;
        }
        y[row] = probs[i][s];
    }
    let svd = a.svd(true, true);
    if svd.rank(1e-10) < 16 {
        return Err(Error::Reconstruction("singular design matrix".into()));
    }
    let x = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::Reconstruction(format!("least-squares solve failed: {e}")))?;
    let mut rho = Matrix4::zeros();
    for (c, b) in basis.iter().enumerate() {
        rho += b.map(|e| e * Complex64::new(x[c], 0.0));
    }
    Ok(rho)
}

/// Eigendecomposition of a 4x4 Hermitian matrix via the real-symmetric
/// embedding `[[X, -Y], [Y, X]]` of `H = X + iY`. Every real eigenpair
/// `(lambda, [u; v])` maps to a complex eigenpair `(lambda, u + iv)`; the
/// 8 returned pairs cover the spectrum twice, so rank-1 reconstructions carry
/// weight 1/2.
fn hermitian_eigen_embedded(m: &Matrix4<Complex64>) -> Vec<(f64, Vector4<Complex64>)> {
    let mut real = DMatrix::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            let e = m[(i, j)];
            real[(i, j)] = e.re;
            real[(i + 4, j + 4)] = e.re;
            real[(i, j + 4)] = -e.im;
            real[(i + 4, j)] = e.im;
        }
    }
    let eig = SymmetricEigen::new(real);
    (0..8)
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            let v = Vector4::from_fn(|i, _| Complex64::new(col[i], col[i + 4]));
            (eig.eigenvalues[k], v)
        })
        .collect()
}

/// The four eigenvalues of a Hermitian 4x4 matrix, ascending.
pub fn hermitian_eigenvalues(m: &Matrix4<Complex64>) -> [f64; 4] {
    let mut all: Vec<f64> = hermitian_eigen_embedded(m).iter().map(|p| p.0).collect();
    all.sort_by(f64::total_cmp);
    // The embedded spectrum repeats each eigenvalue twice.
    [all[0], all[2], all[4], all[6]]
}

/// Trace distance `(1/2) Tr |a - b|` between Hermitian operators.
pub fn trace_distance(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> f64 {
    let d = a - b;
    hermitian_eigenvalues(&d).iter().map(|l| l.abs()).sum::<f64>() / 2.0
}

/// Nearest density matrix in the 2-norm: symmetrize, clip negative
/// eigenvalues to zero redistributing the deficit equally over the remaining
/// ones (largest kept last), then renormalize the trace.
pub fn project_to_physical(raw: &Matrix4<Complex64>) -> Result<DensityMatrix> {
    let herm = (raw + raw.adjoint()).map(|e| e * Complex64::new(0.5, 0.0));
    let trace_residual = (herm.trace().re - 1.0).abs();

    let mut pairs = hermitian_eigen_embedded(&herm);
    // Descending eigenvalue order; clip from the smallest upward.
    pairs.sort_by(|a, b| f64::total_cmp(&b.0, &a.0));
    let mut lambda: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut deficit = 0.0;
    let mut keep = lambda.len();
    while keep > 0 {
        if lambda[keep - 1] + deficit / (keep as f64) < 0.0 {
            deficit += lambda[keep - 1];
            lambda[keep - 1] = 0.0;
            keep -= 1;
        } else {
            let shift = deficit / keep as f64;
            for l in lambda.iter_mut().take(keep) {
                *l += shift;
            }
            break;
        }
    }

    let mut rho = Matrix4::zeros();
    for (l, (_, v)) in lambda.iter().zip(&pairs) {
        if *l > 0.0 {
            // Weight 1/2: the embedded decomposition covers each true
            // eigenvector twice.
            rho += (v * v.adjoint()).map(|e| e * Complex64::new(0.5 * l, 0.0));
        }
    }
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::Reconstruction(
            "projection produced a zero operator".into(),
        ));
    }
    let rho = rho.map(|e| e / Complex64::new(tr, 0.0));
    let eigenvalues = hermitian_eigenvalues(&rho);
    let dm = DensityMatrix {
        matrix: rho,
        method: "linear-inversion + eigenvalue clipping".into(),
        eigenvalues,
        trace_residual,
    };
    dm.validate()?;
    Ok(dm)
}

/// Pure-target fidelity `<target| rho |target>`.
pub fn state_fidelity(rho: &DensityMatrix, target: &TwoQubitState) -> f64 {
    let t = Vector4::from_row_slice(target.amplitudes());
    (t.adjoint() * rho.matrix() * t)[(0, 0)].re
}

/// Full reconstruction: linear inversion followed by the physicality
/// projection.
pub fn reconstruct(set: &TomographySet, normalization: Normalization) -> Result<DensityMatrix> {
    let raw = linear_inversion(set, normalization)?;
    let mut dm = project_to_physical(&raw)?;
    dm.method = format!(
        "linear-inversion ({}) + eigenvalue clipping",
        match normalization {
            Normalization::SharedFlux => "shared-flux anchor",
            Normalization::PerBasisEfficiency => "per-basis efficiency anchors",
        }
    );
    Ok(dm)
}

/// Monte-Carlo fidelity statistics over Poisson-resampled counts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub mean: f64,
    pub std_dev: f64,
    pub resamples: usize,
    pub failures: usize,
}

/// Poisson-resample every count, re-run the reconstruction, and report the
/// sample mean and standard deviation of the fidelity to `target`.
/// Deterministic for a fixed seed. Errors if more than 5% of the resamples
/// fail to reconstruct.
pub fn monte_carlo_errors(
    set: &TomographySet,
    target: &TwoQubitState,
    normalization: Normalization,
    n_resamples: usize,
    seed: u64,
) -> Result<MonteCarloStats> {
    if n_resamples < 100 {
        return Err(Error::invalid_input(format!(
            "need at least 100 resamples, got {n_resamples}"
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut fidelities = Vec::with_capacity(n_resamples);
    let mut failures = 0usize;
    for _ in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let mut counts = [[0.0; 4]; 4];
        for i in 0..4 {
            for s in 0..4 {
                let mean = set.count(i, s);
                counts[i][s] = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::Reconstruction(format!("poisson: {e}")))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
            }
        }
        let resampled = TomographySet::from_counts(counts, set.tau_s)?;
        match reconstruct(&resampled, normalization) {
            Ok(dm) => fidelities.push(state_fidelity(&dm, target)),
            Err(_) => failures += 1,
        }
    }
    if failures * 20 > n_resamples {
        return Err(Error::Reconstruction(format!(
            "{failures} of {n_resamples} resamples failed to reconstruct"
        )));
    }
    let n = fidelities.len() as f64;
    let mean = fidelities.iter().sum::<f64>() / n;
    let var = fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloStats {
        mean,
        std_dev: var.sqrt(),
        resamples: n_resamples,
        failures,
    })
}

/// The bundled measured-counts fixture: the 16 recorded projections of one
/// comb pair, 125 s each.
pub fn reference_record() -> CoincidenceRecord {
    serde_json::from_str(include_str!("../fixtures/reference_pair_counts.json"))
        .expect("bundled fixture parses")
}
