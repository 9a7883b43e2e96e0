//! The five subcommands.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use freqbin_core::config::RunConfig;
use freqbin_core::gates::{compose_gate, extract_qubit_block, ModeWindow};
use freqbin_core::measurement::{
    expected_coincidences, CoincidenceRecord, ProjectionCount, ProjectorLabel,
};
use freqbin_core::network::{allocate, usable_pairs, validate_guard_spacing};
use freqbin_core::qkd::{evaluate_link, BasisCounts, LinkMetrics};
use freqbin_core::resonator::{jsi_diagonal, TwoQubitState};
use freqbin_core::sim::{pair_seed, simulate_basis_counts, simulate_tomography_record};
use freqbin_core::tomography::{
    monte_carlo_errors, reconstruct, state_fidelity, Normalization, TomographySet,
};
use freqbin_core::{gate_fidelity, hadamard, identity2, success_probability};

use crate::output::{config_hash, write_json, CsvWriter};
use crate::{CliError, CliResult};

pub fn characterize_gate(
    config: &RunConfig,
    dir: &Path,
    alpha_steps: usize,
    alphas: Option<&str>,
) -> CliResult<()> {
    let alphas: Vec<f64> = match alphas {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("bad alpha {s:?}: {e}")))
            })
            .collect::<CliResult<_>>()?,
        None => match alpha_steps {
            0 => Vec::new(),
            1 => vec![0.0],
            n => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
        },
    };

    let mut csv = CsvWriter::create(
        dir,
        "characterize_gate.csv",
        config,
        "alpha_rad,f_identity,f_hadamard,p_success",
    )?;
    let window = ModeWindow::around_block(0, 2);
    for alpha in &alphas {
        let gate = config.gate.gate_config(*alpha, 0, &config.resonator);
        let u = compose_gate(&gate, window)?;
        let w = extract_qubit_block(&u, 0)?;
        let f_id = gate_fidelity(&w, &identity2())?;
        let f_h = gate_fidelity(&w, &hadamard())?;
        let p = success_probability(&w, &hadamard())?;
        csv.row(&[alpha.to_string(), f_id.to_string(), f_h.to_string(), p.to_string()])?;
    }
    let path = csv.finish()?;
    println!(
        "characterize-gate: {} rows -> {}",
        alphas.len(),
        path.display()
    );
    Ok(())
}

pub fn simulate_jsi(config: &RunConfig, dir: &Path, tau_s: f64) -> CliResult<()> {
    if !(tau_s > 0.0) {
        return Err(CliError::Usage("--tau-s must be positive".into()));
    }
    let model = config.resonator.model()?;
    let det = config.detector.model()?;
    let table = jsi_diagonal(&model, config.resonator.pump_mw)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut csv = CsvWriter::create(
        dir,
        "jsi.csv",
        config,
        "n,expected_rate,sampled_counts",
    )?;
    for (n, pair_rate) in table {
        let expected = expected_coincidences(1.0, pair_rate, &det, tau_s);
        let sampled: u64 = if expected > 0.0 {
            Poisson::new(expected)
                .map_err(|e| CliError::Numerical(format!("poisson: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        csv.row(&[
            n.to_string(),
            (expected / tau_s).to_string(),
            sampled.to_string(),
        ])?;
    }
    let path = csv.finish()?;
    println!("simulate-jsi: wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct TomographyReport {
    source: String,
    pair_index: Option<u32>,
    config_hash: String,
    seed: u64,
    normalization: String,
    method: String,
    fidelity: f64,
    fidelity_mc_mean: f64,
    fidelity_mc_std: f64,
    mc_resamples: usize,
    mc_failures: usize,
    eigenvalues: [f64; 4],
    trace_residual: f64,
    rho_re: [[f64; 4]; 4],
    rho_im: [[f64; 4]; 4],
}

#[derive(Serialize)]
struct TomographyBatch {
    config_hash: String,
    seed: u64,
    pairs: Vec<TomographyReport>,
    fidelity_above_0p8: usize,
}

fn parse_normalization(name: &str) -> CliResult<Normalization> {
    match name {
        "shared-flux" => Ok(Normalization::SharedFlux),
        "per-basis-efficiency" | "per-basis" => Ok(Normalization::PerBasisEfficiency),
        other => Err(CliError::Usage(format!(
            "unknown normalization {other:?}; use shared-flux or per-basis-efficiency"
        ))),
    }
}

fn read_record(path: &Path, default_tau: f64) -> CliResult<CoincidenceRecord> {
    let data_err = |m: String| CliError::Data(m);
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
        let record: CoincidenceRecord = serde_json::from_str(&text)
            .map_err(|e| data_err(format!("malformed record {}: {e}", path.display())))?;
        record.validate().map_err(|e| data_err(e.to_string()))?;
        Ok(record)
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| data_err(format!("bad CSV row: {e}")))?;
            if row.len() < 3 {
                return Err(data_err(format!("expected 3 columns, got {}", row.len())));
            }
            let i_label =
                ProjectorLabel::parse(&row[0]).map_err(|e| data_err(e.to_string()))?;
            let s_label =
                ProjectorLabel::parse(&row[1]).map_err(|e| data_err(e.to_string()))?;
            let counts: u64 = row[2]
                .parse()
                .map_err(|e| data_err(format!("bad count {:?}: {e}", &row[2])))?;
            pairs.push(ProjectionCount {
                i_label,
                s_label,
                counts,
            });
        }
        Ok(CoincidenceRecord {
            pairs,
            tau_s: default_tau,
            seed: 0,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn tomography(
    config: &RunConfig,
    dir: &Path,
    input: Option<&Path>,
    simulate: Option<u32>,
    simulate_all: bool,
    resamples: usize,
    normalization: &str,
    tau_s: Option<f64>,
) -> CliResult<()> {
    if resamples < 100 {
        return Err(CliError::Usage(
            "--resamples must be at least 100".into(),
        ));
    }
    let normalization = parse_normalization(normalization)?;
    let hash = config_hash(config);

    let build_report = |record: &CoincidenceRecord,
                        source: String,
                        pair_index: Option<u32>,
                        mc_seed: u64|
     -> CliResult<TomographyReport> {
        let set = TomographySet::from_record(record).map_err(|e| CliError::Data(e.to_string()))?;
        let target = TwoQubitState::phi_plus();
        let dm = reconstruct(&set, normalization)?;
        let fidelity = state_fidelity(&dm, &target);
        let stats = monte_carlo_errors(&set, &target, normalization, resamples, mc_seed)?;
        let m = dm.matrix();
        let mut rho_re = [[0.0; 4]; 4];
        let mut rho_im = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                rho_re[r][c] = m[(r, c)].re;
                rho_im[r][c] = m[(r, c)].im;
            }
        }
        Ok(TomographyReport {
            source,
            pair_index,
            config_hash: hash.clone(),
            seed: config.seed,
            normalization: match normalization {
                Normalization::SharedFlux => "shared-flux".into(),
                Normalization::PerBasisEfficiency => "per-basis-efficiency".into(),
            },
            method: dm.method.clone(),
            fidelity,
            fidelity_mc_mean: stats.mean,
            fidelity_mc_std: stats.std_dev,
            mc_resamples: stats.resamples,
            mc_failures: stats.failures,
            eigenvalues: dm.eigenvalues,
            trace_residual: dm.trace_residual,
            rho_re,
            rho_im,
        })
    };

    if simulate_all {
        let bases = config.qkd.pair_bases(config.gate.guard_modes);
        let mut pairs = Vec::with_capacity(bases.len());
        for &base in &bases {
            let seed = pair_seed(config.seed, base);
            let record = simulate_tomography_record(config, base, seed)?;
            pairs.push(build_report(
                &record,
                "simulated".into(),
                Some(base),
                seed ^ 0xA5A5_5A5A_A5A5_5A5A,
            )?);
        }
        let above = pairs.iter().filter(|r| r.fidelity > 0.8).count();
        let batch = TomographyBatch {
            config_hash: hash,
            seed: config.seed,
            pairs,
            fidelity_above_0p8: above,
        };
        let path = write_json(dir, "tomography_batch.json", &batch)?;
        println!(
            "tomography: {} pairs, {} with F > 0.8 -> {}",
            batch.pairs.len(),
            above,
            path.display()
        );
        return Ok(());
    }

    let (record, source, pair_index, name) = match (input, simulate) {
        (Some(path), None) => {
            let tau = tau_s.unwrap_or(config.qkd.tau_s);
            (
                read_record(path, tau)?,
                path.display().to_string(),
                None,
                "tomography_report.json".to_string(),
            )
        }
        (None, Some(base)) => {
            let seed = pair_seed(config.seed, base);
            let record = simulate_tomography_record(config, base, seed)?;
            // Persist the simulated counts for re-analysis.
            write_json(dir, &format!("counts_n{base}.json"), &record)?;
            std::fs::write(dir.join(format!("counts_n{base}.csv")), record.to_csv())?;
            (
                record,
                "simulated".to_string(),
                Some(base),
                format!("tomography_n{base}.json"),
            )
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --input, --simulate, --simulate-all".into(),
            ))
        }
    };
    let mc_seed = record.seed ^ 0xA5A5_5A5A_A5A5_5A5A;
    let report = build_report(&record, source, pair_index, mc_seed)?;
    println!(
        "tomography: F = {:.4} +- {:.4} -> {}",
        report.fidelity,
        report.fidelity_mc_std,
        dir.join(&name).display()
    );
    write_json(dir, &name, &report)?;
    Ok(())
}

fn read_basis_counts(path: &Path) -> CliResult<Vec<(u32, BasisCounts)>> {
    let data_err = |m: String| CliError::Data(m);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| data_err(format!("bad CSV row: {e}")))?;
        if row.len() < 10 {
            return Err(data_err(format!(
                "expected 10 columns (n,c00,c01,c10,c11,cpp,cpm,cmp,cmm,tau_s), got {}",
                row.len()
            )));
        }
        let field = |i: usize| -> CliResult<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|e| data_err(format!("bad number {:?}: {e}", &row[i])))
        };
        let n: u32 = row[0]
            .parse()
            .map_err(|e| data_err(format!("bad pair index {:?}: {e}", &row[0])))?;
        let counts = BasisCounts {
            c00: field(1)?,
            c01: field(2)?,
            c10: field(3)?,
            c11: field(4)?,
            cpp: field(5)?,
            cpm: field(6)?,
            cmp: field(7)?,
            cmm: field(8)?,
            tau_s: field(9)?,
            synthesized_complements: false,
        };
        counts.validate().map_err(|e| data_err(e.to_string()))?;
        out.push((n, counts));
    }
    Ok(out)
}

pub fn qkd(
    config: &RunConfig,
    dir: &Path,
    input: Option<&Path>,
    simulate: bool,
    threshold: Option<f64>,
) -> CliResult<()> {
    let threshold = threshold.unwrap_or(config.qkd.qber_threshold);
    if !(0.0..0.5).contains(&threshold) {
        return Err(CliError::Usage("--threshold must be in [0, 0.5)".into()));
    }
    let params = config.qkd.sifting_params();
    let dataset: Vec<(u32, BasisCounts)> = match (input, simulate) {
        (Some(path), false) => read_basis_counts(path)?,
        (None, true) => {
            let bases = config.qkd.pair_bases(config.gate.guard_modes);
            let mut out = Vec::with_capacity(bases.len());
            for &base in &bases {
                let counts = simulate_basis_counts(config, base, pair_seed(config.seed, base))?;
                out.push((base, counts));
            }
            out
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --input or --simulate".into(),
            ))
        }
    };

    let mut csv = CsvWriter::create(
        dir,
        "qkd.csv",
        config,
        "n,raw_rate,qber,sifted_bps,secure",
    )?;
    let mut n_secure = 0usize;
    for (n, counts) in &dataset {
        let m = evaluate_link(counts, *n, threshold, &params)?;
        n_secure += m.secure as usize;
        csv.row(&[
            n.to_string(),
            m.raw_rate.to_string(),
            m.qber.to_string(),
            m.sifted_bps.to_string(),
            m.secure.to_string(),
        ])?;
    }
    let path = csv.finish()?;
    println!(
        "qkd: {} of {} pairs secure (threshold {threshold}) -> {}",
        n_secure,
        dataset.len(),
        path.display()
    );
    Ok(())
}

fn read_metrics(path: &Path) -> CliResult<Vec<LinkMetrics>> {
    let data_err = |m: String| CliError::Data(m);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| data_err(format!("bad CSV row: {e}")))?;
        if row.len() < 5 {
            return Err(data_err(format!(
                "expected 5 columns (n,raw_rate,qber,sifted_bps,secure), got {}",
                row.len()
            )));
        }
        let secure = match &row[4] {
            "true" => true,
            "false" => false,
            other => return Err(data_err(format!("bad secure flag {other:?}"))),
        };
        out.push(LinkMetrics {
            pair_index: row[0]
                .parse()
                .map_err(|e| data_err(format!("bad pair index: {e}")))?,
            raw_rate: row[1]
                .parse()
                .map_err(|e| data_err(format!("bad raw rate: {e}")))?,
            qber: row[2]
                .parse()
                .map_err(|e| data_err(format!("bad qber: {e}")))?,
            sifted_bps: row[3]
                .parse()
                .map_err(|e| data_err(format!("bad sifted rate: {e}")))?,
            secure_fraction: 0.0,
            secure,
        });
    }
    Ok(out)
}

pub fn plan_network(
    config: &RunConfig,
    dir: &Path,
    users: usize,
    input: &Path,
) -> CliResult<()> {
    if users < 2 {
        return Err(CliError::Usage("--users must be at least 2".into()));
    }
    let metrics = read_metrics(input)?;
    let order = usable_pairs(&metrics);
    let usable: Vec<LinkMetrics> = order
        .iter()
        .map(|n| {
            *metrics
                .iter()
                .find(|m| m.pair_index == *n)
                .expect("index from usable_pairs")
        })
        .collect();
    // All usable pairs run their gates in parallel, so the full set must
    // respect the guard spacing.
    let bases: Vec<u32> = usable.iter().map(|m| m.pair_index).collect();
    validate_guard_spacing(&bases, config.gate.guard_modes)?;
    let plan = allocate(&usable, users)?;
    let path = write_json(dir, "network_plan.json", &plan)?;
    println!(
        "plan-network: {} users, {} links, {} unused, max_users {} -> {}",
        plan.users.len(),
        plan.links.len(),
        plan.unused.len(),
        plan.max_users,
        path.display()
    );
    Ok(())
}
