//! Run orchestration: configuration files, subcommands, output files and
//! the reproducibility manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, EnergyLadderReport, GronwallReport};
use crate::error::{Error, Result};
use crate::exponents::ExponentReport;
use crate::integrator::{Divergence, SimConfig, Simulator, TrajectoryRecord};
use crate::spectral::snapshot;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SPLF_THREADS";

/// Default number of fresh-seed validation pairs in `uniqueness-check`.
pub const DEFAULT_VALIDATION_PAIRS: usize = 50;
/// Default relative margin on the calibrated Gronwall constant.
pub const DEFAULT_MARGIN: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "splf", version, about = "Stochastic power-law fluid simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the ensemble and write per-path CSV files and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the final state of every path as a binary snapshot.
        #[arg(long)]
        snapshots: bool,
    },
    /// Energy identity at dt, dt/2 and dt/4.
    EnergyCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Paired runs with ε-perturbed initial data against the Gronwall envelope.
    UniquenessCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Calibration pairs (defaults to n_paths of the config).
        #[arg(long)]
        calibration: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_VALIDATION_PAIRS)]
        validation: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Critical exponents for dimension d, and exponent checks for p if given.
    Exponents {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: Option<f64>,
    },
}

fn missing_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Parses and validates a TOML configuration; returns warnings alongside.
pub fn parse_config_str(text: &str) -> Result<(SimConfig, Vec<String>)> {
    let config: SimConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        Error::config(missing_field(&msg).unwrap_or_else(|| "config".into()), msg)
    })?;
    let warnings = config.validate()?;
    Ok((config, warnings))
}

pub fn parse_config(path: &Path) -> Result<(SimConfig, Vec<String>)> {
    parse_config_str(&fs::read_to_string(path)?)
}

/// 17 significant digits, enough to round-trip any binary64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-path CSV: `t, normL2sq, normVp1_p, int_diss, int_gammaXX, x0, x1, ...`.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::from("t,normL2sq,normVp1_p,int_diss,int_gammaXX");
    let width = record.rows.first().map_or(0, |r| r.coords.len());
    for i in 0..width {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for row in &record.rows {
        out.push_str(&fmt_f64(row.t));
        for v in [row.norm_l2_sq, row.norm_vp1_p, row.int_diss, row.int_gamma]
            .into_iter()
            .chain(row.coords.iter().copied())
        {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStatus {
    pub path: u64,
    pub diverged: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub code_version: String,
    pub command: String,
    pub config: SimConfig,
    pub seed: u64,
    pub dt_effective: f64,
    pub steps: usize,
    pub warnings: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub paths: Vec<PathStatus>,
    pub outputs: Vec<OutputDigest>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_output(dir: &Path, name: String, bytes: &[u8], inventory: &mut Vec<OutputDigest>) -> Result<()> {
    fs::write(dir.join(&name), bytes)?;
    inventory.push(OutputDigest {
        file: name,
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

/// Simulates every path of `config` and writes CSV files, optional final
/// snapshots and `manifest.json` into `out`.
pub fn run_simulate(config: &SimConfig, warnings: Vec<String>, out: &Path, snapshots: bool) -> Result<RunManifest> {
    let started = now();
    let sim = Simulator::new(config)?;
    fs::create_dir_all(out)?;
    let records = sim.run_ensemble(0..config.n_paths as u64);
    let mut outputs = Vec::new();
    let mut paths = Vec::with_capacity(records.len());
    for r in &records {
        write_output(out, format!("path_{:05}.csv", r.path), trajectory_csv(r).as_bytes(), &mut outputs)?;
        if snapshots {
            let field = sim.basis().to_field(&r.last().coords)?;
            write_output(out, format!("path_{:05}.splf", r.path), &snapshot::to_bytes(&field), &mut outputs)?;
        }
        if let Some(d) = &r.diverged {
            warn!("path {} diverged at step {}: {}", r.path, d.step, d.reason);
        }
        paths.push(PathStatus {
            path: r.path,
            diverged: r.diverged.clone(),
        });
    }
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".into(),
        config: config.clone(),
        seed: config.seed,
        dt_effective: sim.dt(),
        steps: sim.steps(),
        warnings,
        started_unix: started,
        finished_unix: now(),
        paths,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Diagnostics(e.to_string()))?;
    fs::write(out.join("manifest.json"), json)?;
    info!("wrote {} paths to {}", records.len(), out.display());
    Ok(manifest)
}

pub const ENERGY_CSV_HEADER: &str = "check,dt,lhs_mean,lhs_stderr,rhs,residual,z_score,bias_ratio,bias_allowance,tolerance,n_paths,n_diverged,pass";

pub fn energy_verdict(r: &EnergyLadderReport) -> String {
    let c = r.coarse();
    format!(
        "energy,{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(c.dt),
        fmt_f64(c.lhs_mean),
        fmt_f64(c.lhs_stderr),
        fmt_f64(c.rhs),
        fmt_f64(c.residual()),
        fmt_f64(c.z_score),
        fmt_f64(r.bias_ratio),
        fmt_f64(r.bias_allowance),
        fmt_f64(r.tolerance),
        c.n_paths,
        c.n_diverged,
        r.passed()
    )
}

pub fn energy_report_text(r: &EnergyLadderReport) -> String {
    let mut s = String::new();
    for l in &r.levels {
        let _ = writeln!(
            s,
            "dt={:.4e}  lhs={:.8e} ± {:.3e}  rhs={:.8e}  z={:+.3}  paths={} diverged={}",
            l.dt, l.lhs_mean, l.lhs_stderr, l.rhs, l.z_score, l.n_paths, l.n_diverged
        );
    }
    let _ = writeln!(
        s,
        "bias ratio {:.4} (accepted {:?}), allowance {:.3e}, tolerance {:.3e}, |residual| {:.3e}",
        r.bias_ratio,
        diagnostics::BIAS_RATIO_RANGE,
        r.bias_allowance,
        r.tolerance,
        r.coarse().residual().abs()
    );
    s
}

pub const UNIQUENESS_CSV_HEADER: &str = "check,exponent,c_hat,margin,max_required,in_theorem,pairs,checked,violations,pass";

pub fn uniqueness_verdict(r: &GronwallReport) -> String {
    format!(
        "uniqueness,{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.exponent),
        fmt_f64(r.c_hat),
        fmt_f64(r.margin),
        fmt_f64(r.max_required()),
        r.in_theorem,
        r.pairs.len(),
        r.checked,
        r.violations,
        r.holds()
    )
}

/// Applies `SPLF_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got {value:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn load(path: &Path) -> Result<SimConfig> {
    let (config, warnings) = parse_config(path)?;
    for w in &warnings {
        warn!("{w}");
        eprintln!("warning: {w}");
    }
    Ok(config)
}

/// Executes one subcommand; `Ok(false)` means the check ran and failed.
pub fn run(command: &Command) -> Result<bool> {
    match command {
        Command::Simulate { config, out, snapshots } => {
            let (cfg, warnings) = parse_config(config)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let manifest = run_simulate(&cfg, warnings, out, *snapshots)?;
            let diverged = manifest.paths.iter().filter(|p| p.diverged.is_some()).count();
            println!(
                "simulated {} paths ({} diverged), {} steps of dt={:e}",
                manifest.paths.len(),
                diverged,
                manifest.steps,
                manifest.dt_effective
            );
            Ok(true)
        }
        Command::EnergyCheck { config } => {
            let cfg = load(config)?;
            let report = diagnostics::energy_ladder(&cfg)?;
            print!("{}", energy_report_text(&report));
            println!("{ENERGY_CSV_HEADER}");
            println!("{}", energy_verdict(&report));
            Ok(report.passed())
        }
        Command::UniquenessCheck {
            config,
            eps,
            calibration,
            validation,
            margin,
        } => {
            let cfg = load(config)?;
            let calib = calibration.unwrap_or(cfg.n_paths);
            let report = diagnostics::uniqueness_experiment(&cfg, *eps, calib, *validation, *margin)?;
            if !report.in_theorem {
                eprintln!("warning: p = {} below 1 + d/2; report is out-of-theorem", cfg.p);
            }
            for p in report.pairs.iter().filter(|p| p.violations > 0) {
                println!("pair {}: {} violations", p.path, p.violations);
            }
            println!("{UNIQUENESS_CSV_HEADER}");
            println!("{}", uniqueness_verdict(&report));
            Ok(report.holds())
        }
        Command::Exponents { d, p } => {
            let report = ExponentReport::new(*d, *p)?;
            print!("{report}");
            println!("{}", ExponentReport::CSV_HEADER);
            println!("{}", report.csv_row());
            Ok(true)
        }
    }
}

/// Binary entry point: exit 0 on success, 1 on a failed check, 2 on errors.
pub fn main_entry() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| run(&cli.command));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "d = 2\np = 2.0\nnu = 1.0\nn = 2\ndt = 1e-3\nT = 0.1\nn_paths = 10\nseed = 1\n";

    #[test]
    fn minimal_config_accepted() {
        let (c, w) = parse_config_str(MINIMAL).unwrap();
        assert!(w.is_empty());
        assert_eq!((c.d, c.n, c.n_paths, c.seed), (2, 2, 10, 1));
        assert_eq!(c.horizon, 0.1);
    }

    #[test]
    fn bad_configs_name_the_field() {
        let err = parse_config_str(&MINIMAL.replace("p = 2.0", "p = 1.0")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "p"), "{err}");
        let err = parse_config_str(&MINIMAL.replace("dt = 1e-3\n", "")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "dt"), "{err}");
        let err = parse_config_str(&MINIMAL.replace("n = 2", "n = \"two\"")).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn out_of_theorem_warning() {
        let text = MINIMAL.replace("d = 2", "d = 9").replace("p = 2.0", "p = 2.58").replace("n = 2", "n = 1")
            + "[init]\nkind = \"zero\"\n";
        let (_, w) = parse_config_str(&text).unwrap();
        assert_eq!(w.len(), 1, "{w:?}");
    }

    #[test]
    fn tables_parse() {
        let text = format!(
            "{MINIMAL}stepper = \"semi_implicit\"\n[init]\nkind = \"gaussian\"\nsigma = 0.5\nr = 2.5\n[gamma]\nkind = \"power\"\nc = 0.1\ns = 3.0\n"
        );
        let (c, _) = parse_config_str(&text).unwrap();
        assert_eq!(c.stepper, crate::integrator::StepperKind::SemiImplicit);
        let text = format!(
            "{MINIMAL}[gamma]\nkind = \"explicit\"\nentries = [{{ z = [1, 0], j = 1, value = 0.5 }}]\n"
        );
        parse_config_str(&text).unwrap();
    }

    #[test]
    fn csv_is_lossless() {
        let (c, _) = parse_config_str(MINIMAL).unwrap();
        let rec = Simulator::new(&c).unwrap().simulate(0);
        let csv = trajectory_csv(&rec);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("t,normL2sq,normVp1_p,int_diss,int_gammaXX,x0"));
        for (line, row) in lines.zip(&rec.rows) {
            let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals[0], row.t);
            assert_eq!(vals[1], row.norm_l2_sq);
            assert_eq!(&vals[5..], &row.coords[..]);
        }
    }
}
