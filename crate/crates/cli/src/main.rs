//! Experiment front end: reads a declarative config, dispatches to the
//! library, writes JSON (always) and CSV (opt-in) reports.
//!
//! Exit codes: 0 success, 2 config/validation failure, 3 success with a
//! numerically marginal count (guard-band disagreement).

mod config;

use anyhow::{Context, Result};
use captivity_core::branch_enum::{count_small_derivative, distortion_sum};
use captivity_core::captivity::{
    birkhoff_spread, chi_estimate, coboundary_spread, fekete_roots, ncal, ntilde, sample_points,
    weighted_m, weighted_n, OverlapMode,
};
use captivity_core::genericity::{
    fourier_jac_survey, parameter_scan, proof_constants, witness_extract, ProofConstants,
};
use captivity_core::report::{
    self, CaptivityMeta, CaptivityRecord, CaptivityReport, CoboundaryReport, ConstantsReport,
    DistortionRecord, DistortionReport, JacReport, MapMeta, NtildeRecord, NtildeReport,
    ScanReport, TauMeta, WitnessGroupReport, WitnessReport,
};
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "captivity", version, about = "Cone-transversality counting diagnostics")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON report path (default: `<command>_report.json`).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Also write the CSV companion here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads (default: available parallelism; also CAPTIVITY_WORKERS).
    /// Never affects report bytes.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Include wall-clock timings in reports (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Counting function over the configured depths.
    Ncal,
    /// Counting function plus weighted counts and the contraction rate.
    Weighted,
    /// Counting function with n-th roots and Fekete advisories.
    Roots,
    /// Distortion sums and small-derivative branch counts.
    Distortion,
    /// Slope-spread and periodic Birkhoff diagnostics for coboundary testing.
    Coboundary,
    /// Certified brackets of the infinite-sum counts against the plain count.
    AppendixA,
    /// Constructive witness extraction at the argmax.
    Witness,
    /// Proof constants for given rho and expansion bounds.
    Constants {
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long = "Lambda")]
        upper_lambda: Option<f64>,
    },
    /// Seeded Monte Carlo scan over the perturbation family.
    Scan,
    /// Jacobian survey of the Fourier family over random branch sets.
    Jac,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ncal => "ncal",
            Command::Weighted => "weighted",
            Command::Roots => "roots",
            Command::Distortion => "distortion",
            Command::Coboundary => "coboundary",
            Command::AppendixA => "appendix_a",
            Command::Witness => "witness",
            Command::Constants { .. } => "constants",
            Command::Scan => "scan",
            Command::Jac => "jac",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers.or_else(workers_from_env) {
        // Pool size changes scheduling only; all merges are order-fixed.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    match run(&cli) {
        Ok(marginal) => std::process::exit(if marginal { 3 } else { 0 }),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn workers_from_env() -> Option<usize> {
    std::env::var("CAPTIVITY_WORKERS").ok()?.parse().ok()
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let mut marginal = false;
    let (json, csv): (String, Option<String>) = match &cli.command {
        Command::Ncal | Command::Roots => {
            let report = captivity_run(&cfg, cli.timings, false)?;
            marginal = report.any_marginal();
            print_captivity_summary(&report);
            (report::to_json(&report), Some(report::captivity_csv(&report)))
        }
        Command::Weighted => {
            let report = captivity_run(&cfg, cli.timings, true)?;
            marginal = report.any_marginal();
            print_captivity_summary(&report);
            (report::to_json(&report), Some(report::captivity_csv(&report)))
        }
        Command::Distortion => {
            let report = distortion_run(&cfg)?;
            println!(
                "distortion sums in [{}, {}] (ratio {})",
                report.min_sum, report.max_sum, report.max_over_min
            );
            (report::to_json(&report), Some(report::distortion_csv(&report)))
        }
        Command::Coboundary => {
            let report = coboundary_run(&cfg)?;
            println!(
                "slope spread {} at x={} (n={}); Birkhoff spread {} up to period {}",
                report.spread, report.x, report.n, report.birkhoff_spread, report.max_period
            );
            (report::to_json(&report), None)
        }
        Command::AppendixA => {
            let report = appendix_a_run(&cfg)?;
            for rec in &report.records {
                println!(
                    "n={}, r_tilde={}: certified bracket [{}, {}], plain count {}",
                    rec.n, rec.r_tilde, rec.lower, rec.upper, rec.ncal
                );
            }
            (report::to_json(&report), None)
        }
        Command::Witness => {
            let report = witness_run(&cfg)?;
            match report.found {
                true => println!(
                    "witness at x={}, slope={}, {} groups",
                    report.x.unwrap(),
                    report.slope.unwrap(),
                    report.groups.len()
                ),
                false => println!("no witness at the configured depth/constants"),
            }
            (report::to_json(&report), None)
        }
        Command::Constants { rho, lambda, upper_lambda } => {
            let report = constants_run(&cfg, *rho, *lambda, *upper_lambda)?;
            println!(
                "N={}, q={}, J={} (checks pass: {})",
                report.big_n, report.q, report.j, report.checks_pass
            );
            (report::to_json(&report), None)
        }
        Command::Scan => {
            let report = scan_run(&cfg)?;
            for row in &report.rows {
                println!("n={}: fraction {} ({}/{})", row.n, row.fraction, row.hits, report.samples);
            }
            (report::to_json(&report), Some(report::scan_csv(&report)))
        }
        Command::Jac => {
            let report = jac_run(&cfg)?;
            println!(
                "min Jac = {} over {} samples (scale to reach 1: {:?})",
                report.min_jac, report.trials, report.required_scale
            );
            (report::to_json(&report), None)
        }
    };

    let json_path = cli
        .json
        .clone()
        .or_else(|| cfg.output.json.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}_report.json", cli.command.name())));
    write_text(&json_path, &json)?;
    println!("wrote {}", json_path.display());

    if let Some(csv_text) = csv {
        if let Some(csv_path) = cli.csv.clone().or_else(|| cfg.output.csv.clone()) {
            write_text(&csv_path, &csv_text)?;
            println!("wrote {}", csv_path.display());
        }
    }
    if marginal {
        eprintln!("warning: at least one count is numerically marginal (guard-band disagreement)");
    }
    Ok(marginal)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn captivity_run(cfg: &ExperimentConfig, timings: bool, weighted: bool) -> Result<CaptivityReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let r = cfg.require_r(&tau)?;
    let depths = cfg.require_depths()?;
    let strategy = cfg.strategy()?;
    let (lambda, _) = map.expansion_bounds();
    let (theta_tau, theta_r) = tau.theta(lambda, r)?;

    let mut records = Vec::with_capacity(depths.len());
    let mut truncated_any = false;
    for &n in &depths {
        let start = Instant::now();
        let out = ncal(&map, &tau, r, n, &strategy)?;
        truncated_any |= out.truncated_grid;
        let (m_val, n_val, chi_val) = if weighted {
            let xs = sample_points(&strategy, &map, n).xs;
            (
                Some(weighted_m(&map, &tau, r, n, &strategy, OverlapMode::Intersecting)?),
                Some(weighted_n(&map, &tau, r, n, &strategy)?),
                Some(chi_estimate(&map, n, &xs)?),
            )
        } else {
            (None, None, None)
        };
        records.push(CaptivityRecord {
            n,
            ncal: out.count,
            root: (out.count as f64).powf(1.0 / n as f64),
            witness_x: out.witness_x,
            witness_slope: out.witness_slope,
            witness_words: out.witness_words.iter().map(|w| w.symbols().to_vec()).collect(),
            weighted_m: m_val,
            weighted_n: n_val,
            chi: chi_val,
            marginal: out.marginal,
            wall_ms: timings.then(|| start.elapsed().as_millis() as u64),
        });
    }
    let roots = fekete_roots(
        &records.iter().map(|r| (r.n, r.ncal)).collect::<Vec<_>>(),
    );
    Ok(CaptivityReport {
        schema: report::CAPTIVITY_SCHEMA.to_string(),
        meta: CaptivityMeta {
            map: MapMeta::of(&map),
            tau: TauMeta::of(&tau),
            r,
            theta_tau,
            theta_r,
            strategy: strategy.describe(),
            seed: cfg.run.seed,
            truncated_grid: truncated_any,
        },
        records,
        fekete_advisories: roots.advisories,
    })
}

fn print_captivity_summary(report: &CaptivityReport) {
    for rec in &report.records {
        println!(
            "n={}: ncal {} (root {}) at x={}, slope {}{}",
            rec.n,
            rec.ncal,
            rec.root,
            rec.witness_x,
            rec.witness_slope,
            if rec.marginal { " [marginal]" } else { "" }
        );
    }
    for (a, b) in &report.fekete_advisories {
        println!("advisory: root({b}) exceeds root({a}) beyond slack");
    }
}

fn distortion_run(cfg: &ExperimentConfig) -> Result<DistortionReport> {
    let map = cfg.build_map()?;
    let depths = cfg.require_depths()?;
    let points = cfg.run.x_points.unwrap_or(64);
    let b_values = if cfg.run.b.is_empty() { vec![0.5, 0.6, 0.7] } else { cfg.run.b.clone() };
    let mut records = Vec::new();
    let mut min_sum = f64::INFINITY;
    let mut max_sum = f64::NEG_INFINITY;
    for &n in &depths {
        for i in 0..points {
            let x = i as f64 / points as f64;
            let sum = distortion_sum(&map, x, n)?;
            min_sum = min_sum.min(sum);
            max_sum = max_sum.max(sum);
            let small_counts = b_values
                .iter()
                .map(|&b| Ok((b, count_small_derivative(&map, x, n, b)?)))
                .collect::<Result<Vec<_>>>()?;
            records.push(DistortionRecord { x, n, sum, small_counts });
        }
    }
    Ok(DistortionReport {
        schema: report::DISTORTION_SCHEMA.to_string(),
        map: MapMeta::of(&map),
        records,
        max_sum,
        min_sum,
        max_over_min: max_sum / min_sum,
    })
}

fn coboundary_run(cfg: &ExperimentConfig) -> Result<CoboundaryReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let depths = cfg.require_depths()?;
    let n = depths[0];
    let x = cfg.run.x.unwrap_or(0.0);
    let max_period = cfg.run.max_period.unwrap_or(8);
    Ok(CoboundaryReport {
        schema: report::COBOUNDARY_SCHEMA.to_string(),
        map: MapMeta::of(&map),
        tau: TauMeta::of(&tau),
        x,
        n,
        spread: coboundary_spread(&map, &tau, x, n)?,
        max_period,
        birkhoff_spread: birkhoff_spread(&map, &tau, max_period)?,
    })
}

fn appendix_a_run(cfg: &ExperimentConfig) -> Result<NtildeReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let r = cfg.require_r(&tau)?;
    let depths = cfg.require_depths()?;
    let strategy = cfg.strategy()?;
    let (lambda, _) = map.expansion_bounds();
    let (theta_tau, theta_r) = tau.theta(lambda, r)?;
    // Defaults exhibit the two-sided comparison: a radius small enough to
    // stay below the count and one large enough to dominate it.
    let r_tildes = if cfg.run.r_tilde.is_empty() {
        vec![theta_r - theta_tau, theta_r + theta_tau + 0.1]
    } else {
        cfg.run.r_tilde.clone()
    };
    let mut records = Vec::new();
    for &n in &depths {
        let count = ncal(&map, &tau, r, n, &strategy)?.count;
        for &r_tilde in &r_tildes {
            let (lower, upper) = ntilde(&map, &tau, r_tilde, n, &strategy)?;
            records.push(NtildeRecord { n, r_tilde, lower, upper, ncal: count });
        }
    }
    Ok(NtildeReport {
        schema: report::APPENDIX_A_SCHEMA.to_string(),
        map: MapMeta::of(&map),
        tau: TauMeta::of(&tau),
        r,
        strategy: strategy.describe(),
        records,
    })
}

fn witness_run(cfg: &ExperimentConfig) -> Result<WitnessReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let r = cfg.require_r(&tau)?;
    let depths = cfg.require_depths()?;
    let n = depths[0];
    let strategy = cfg.strategy()?;
    let rho = cfg.run.rho.context("run.rho is required for witness extraction")?;
    let (lambda, upper) = map.expansion_bounds();
    let constants = match (cfg.run.big_n, cfg.run.q) {
        (Some(big_n), Some(q)) => ProofConstants::with_overrides(rho, lambda, upper, big_n, q)?,
        (None, None) => proof_constants(rho, lambda, upper)?,
        _ => anyhow::bail!("run.N and run.q must be overridden together"),
    };
    let witness = witness_extract(&map, &tau, r, n, &constants, &strategy)?;
    let constants_report = ConstantsReport::of(&constants);
    let report = match witness {
        Some(w) => WitnessReport {
            schema: report::WITNESS_SCHEMA.to_string(),
            map: MapMeta::of(&map),
            tau: TauMeta::of(&tau),
            r,
            n,
            constants: constants_report,
            found: true,
            x: Some(w.x),
            slope: Some(w.slope),
            class_index: Some(w.class_index),
            group_size_floor: Some(w.group_size_floor),
            groups: w.groups.iter().map(WitnessGroupReport::of).collect(),
        },
        None => WitnessReport {
            schema: report::WITNESS_SCHEMA.to_string(),
            map: MapMeta::of(&map),
            tau: TauMeta::of(&tau),
            r,
            n,
            constants: constants_report,
            found: false,
            x: None,
            slope: None,
            class_index: None,
            group_size_floor: None,
            groups: Vec::new(),
        },
    };
    Ok(report)
}

fn constants_run(
    cfg: &ExperimentConfig,
    rho: Option<f64>,
    lambda: Option<f64>,
    upper_lambda: Option<f64>,
) -> Result<ConstantsReport> {
    let rho = rho.or(cfg.run.rho).context("--rho (or run.rho) is required")?;
    let (lambda, upper_lambda) = match (lambda, upper_lambda) {
        (Some(lo), Some(hi)) => (lo, hi),
        (None, None) => cfg
            .build_map()
            .context("--lambda/--Lambda or a [map] section is required")?
            .expansion_bounds(),
        _ => anyhow::bail!("--lambda and --Lambda must be given together"),
    };
    let constants = proof_constants(rho, lambda, upper_lambda)?;
    Ok(ConstantsReport::of(&constants))
}

fn scan_run(cfg: &ExperimentConfig) -> Result<ScanReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let family = cfg.build_family(&tau)?;
    let r = cfg.require_r(&tau)?;
    let worst = family.sup_deriv_bound_on_cube();
    // NaN must fail this check, hence the negated form.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(r > worst) {
        anyhow::bail!(
            "run.r = {r} must exceed the family-wide |tau_t'| bound {worst} over the parameter cube"
        );
    }
    let rho = cfg.run.rho.context("run.rho is required for scans")?;
    let depths = cfg.require_depths()?;
    let samples = cfg.run.samples.context("run.samples is required for scans")?;
    let seed = cfg.require_seed()?;
    let grid_points = cfg.run.grid_points.unwrap_or(64);
    let outcome = parameter_scan(&map, &family, r, rho, &depths, samples, seed, grid_points)?;
    let family_cfg = cfg.family.as_ref().expect("validated by build_family");
    Ok(ScanReport {
        schema: report::SCAN_SCHEMA.to_string(),
        map: MapMeta::of(&map),
        tau: TauMeta::of(&tau),
        family_dim: outcome.family_dim,
        basis_max_freq: family_cfg.max_freq,
        basis_scale: family_cfg.scale,
        r,
        rho,
        grid_points,
        samples,
        seed,
        rows: outcome.rows,
    })
}

fn jac_run(cfg: &ExperimentConfig) -> Result<JacReport> {
    let map = cfg.build_map()?;
    let tau = cfg.build_tau(&map)?;
    let family = cfg.build_family(&tau)?;
    let depths = cfg.require_depths()?;
    let n = depths[0];
    let q = cfg.run.q.context("run.q is required for the jac survey")?;
    let rows = cfg.run.rows.context("run.rows is required for the jac survey")?;
    let trials = cfg.run.trials.unwrap_or(8);
    let seed = cfg.require_seed()?;
    let points = cfg.run.x_points.unwrap_or(16);
    let xs: Vec<f64> = (0..points).map(|i| i as f64 / points as f64).collect();
    let survey = fourier_jac_survey(&map, &family, n, q, rows, &xs, trials, seed)?;
    Ok(JacReport::of(&map, family.dim(), n, q, &survey))
}
