use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zk::config::{parse_config, print_config, RunConfig, CONFIG_HELP};
use zk::ensemble::{run_ensemble, run_sweeps, SweepTable};
use zk::error::{AppError, Result};
use zk::format::{basis_file, csv_bytes, encode_basis, encode_field, field_file, BasisTolerances, PathRow, PATH_COLUMNS};
use zk::gronwall_io::{parse_variant, read_paths, run_gronwall};
use zk::report::{format_for, write_bytes, write_report};
use zk::suites::{boundary_residual, gram_defect, run_suite, SUITES};
use zk::Setup;
use zk_core::{ImexStepper, NoiseKey, SpectralBasis, ZkError};

#[derive(Parser)]
#[command(name = "zk", version, about = "Stochastic Zakharov-Kuznetsov spectral-Galerkin solver and diagnostics")]
#[command(after_long_help = CONFIG_HELP)]
#[command(after_help = "Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 IO error.\nRun with --help for every config key and its default.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides noise.seed and ensemble.master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Galerkin basis and write it as a ZKBASIS1 file.
    #[command(after_long_help = CONFIG_HELP)]
    Basis {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "basis.zkb")]
        out: PathBuf,
    },
    /// Integrate one sample path; writes snapshots, path.csv and config.json.
    #[command(after_long_help = CONFIG_HELP)]
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory (defaults to output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo ensemble; writes stats.csv, moments.csv and sweep.csv.
    #[command(after_long_help = CONFIG_HELP)]
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides ensemble.workers.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a diagnostic suite and write a check report.
    #[command(after_long_help = CONFIG_HELP)]
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        /// Report file; .ndjson selects NDJSON, otherwise output.format.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Check the stochastic Gronwall hypothesis and conclusion on sampled processes.
    Gronwall {
        /// CSV with columns path_id, time, X, Y, Z, M.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        c0: f64,
        #[arg(long, default_value = "full", value_parser = ["full", "weakened"])]
        variant: String,
        /// Only output.format is read from it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Accepted for a uniform interface; the check is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let text = fs::read_to_string(&common.config).map_err(|e| AppError::io(&common.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = common.seed {
        cfg.noise.seed = s;
        cfg.ensemble.master_seed = Some(s);
    }
    Ok(cfg)
}

fn out_dir(out: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    Ok(dir)
}

fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_bytes(&dir.join("config.json"), print_config(cfg).as_bytes())
}

fn basis_cmd(common: &Common, out: &Path) -> Result<()> {
    let cfg = load(common)?;
    let basis = SpectralBasis::build(cfg.domain_config())?;
    let tol = BasisTolerances {
        gram: gram_defect(&basis),
        boundary: boundary_residual(&basis),
    };
    write_bytes(out, &encode_basis(&basis_file(&basis, tol)))
}

fn simulate_cmd(common: &Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(common)?;
    let dir = out_dir(out, &cfg)?;
    write_config(&dir, &cfg)?;
    let setup = Setup::build(&cfg)?;
    let stepper = ImexStepper::new(&setup.basis, &setup.ops, &setup.solver)?;
    let (path, failure) = match stepper.solve_path(&setup.u0, &setup.model, NoiseKey::new(cfg.noise.seed, 0)) {
        Ok(p) => (p, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    let mut rows = Vec::with_capacity(path.len());
    let stride = cfg.output.snapshot_stride;
    let last = path.len().saturating_sub(1);
    for (i, f) in path.fields.iter().enumerate() {
        rows.push(PathRow::new(&setup.basis, f, path.steps[i], path.times[i])?);
        if i == 0 || i == last || (stride > 0 && i % stride == 0) {
            let file = field_file(&setup.basis, f, path.times[i], path.steps[i]);
            write_bytes(&dir.join(format!("snap_{:08}.zkf", path.steps[i])), &encode_field(&file))?;
        }
    }
    write_bytes(&dir.join("path.csv"), &csv_bytes(&PATH_COLUMNS, &rows)?)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn ensemble_cmd(common: &Common, out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(w) = workers {
        cfg.ensemble.workers = w;
        cfg.validate()?;
    }
    let dir = out_dir(out, &cfg)?;
    write_config(&dir, &cfg)?;
    let setup = Setup::build(&cfg)?;
    let e = &cfg.ensemble;
    let stats = run_ensemble(&setup, e.m, cfg.master_seed(), e.workers, &e.moments)?;
    write_bytes(&dir.join("stats.csv"), &stats.stats_csv()?)?;
    write_bytes(&dir.join("moments.csv"), &stats.moments_csv()?)?;
    if !e.sweep.is_empty() {
        let tables = run_sweeps(&cfg, &setup, e.workers)?;
        write_bytes(&dir.join("sweep.csv"), &SweepTable::csv(&tables)?)?;
    }
    if stats.failed {
        let (traj, time) = stats.blowups[0];
        return Err(ZkError::BlowUp {
            time,
            reason: format!(
                "{} of {} trajectories blew up (first: trajectory {traj})",
                stats.blowups.len(),
                stats.m
            ),
        }
        .into());
    }
    Ok(())
}

fn verify_cmd(common: &Common, suite: &str, out: &Path) -> Result<bool> {
    let cfg = load(common)?;
    let rows = run_suite(suite, &cfg, cfg.master_seed())?;
    write_report(out, &rows, format_for(out, cfg.output.format))?;
    for r in &rows {
        println!(
            "{} {}: {:.3e} (tolerance {:.3e})",
            if r.pass { "PASS" } else { "FAIL" },
            r.check_id,
            r.value,
            r.tolerance
        );
    }
    Ok(rows.iter().all(|r| r.pass))
}

fn gronwall_cmd(input: &Path, c0: f64, variant: &str, config: Option<&Path>, out: &Path) -> Result<bool> {
    let fallback = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
            parse_config(&text)?.output.format
        }
        None => zk::config::ReportFormat::Csv,
    };
    let paths = read_paths(input)?;
    let (report, rows) = run_gronwall(&paths, c0, parse_variant(variant)?)?;
    write_report(out, &rows, format_for(out, fallback))?;
    println!(
        "{} stopping times {} (bound {}), hypothesis violations {}/{}, conclusion {:.3e} vs {:.3e}",
        if report.pass { "PASS" } else { "FAIL" },
        report.n,
        report.n_bound,
        report.violations,
        report.windows,
        report.conclusion_lhs,
        report.conclusion_rhs
    );
    Ok(report.pass)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Basis { common, out } => basis_cmd(&common, &out).map(|_| true),
        Command::Simulate { common, out } => simulate_cmd(&common, out).map(|_| true),
        Command::Ensemble { common, out, workers } => ensemble_cmd(&common, out, workers).map(|_| true),
        Command::Verify { common, suite, out } => verify_cmd(&common, &suite, &out),
        Command::Gronwall {
            input,
            c0,
            variant,
            config,
            out,
            ..
        } => gronwall_cmd(&input, c0, &variant, config.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        // A completed check with failing rows is a numerical outcome.
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("zk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
