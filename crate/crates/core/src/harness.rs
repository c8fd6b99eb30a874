//! Subcommand dispatch and artifact writing for the command-line tool.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, CouplingMode, Format, RunConfig};
use crate::error::{FluidError, SimError, StabilityError, VerifyError};
use crate::fluid::integrate_fluid;
use crate::network::{decoupled_simulate, simulate, SimRecord};
use crate::rng::ReplicaKey;
use crate::stability::check_partial_stability;
use crate::verification::{self as checks, CheckResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("check failed to run: {0}")]
    Verify(#[from] VerifyError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fluid,
    Analyze,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fluid => "fluid",
            Command::Analyze => "analyze",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DispatchOptions {
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Overrides `verify.checks` when non-empty.
    pub checks: Vec<String>,
    /// Overrides `output.format`.
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// False when a requested check failed.
    pub pass: bool,
    pub files: Vec<PathBuf>,
    /// Human-readable summary for standard output.
    pub report: String,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    timestamp_unix: u64,
    files: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn dispatch(
    command: Command,
    config: &RunConfig,
    options: &DispatchOptions,
) -> Result<Outcome, HarnessError> {
    let doc = config.doc();
    let dir = options
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&doc.output.dir));
    let format = options.format.unwrap_or(doc.output.format);
    fs::create_dir_all(&dir)?;

    let mut outcome = match command {
        Command::Simulate => run_simulate(config, &dir, format)?,
        Command::Fluid => run_fluid(config, &dir)?,
        Command::Analyze => run_analyze(config, &dir)?,
        Command::Verify => run_verify(config, &dir, format, &options.checks)?,
    };

    let meta_path = dir.join("run_meta.json");
    let meta = RunMeta {
        command: command.name(),
        seed: config.seed(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files: outcome
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    write_json(&meta_path, &meta)?;
    outcome.files.push(meta_path);
    Ok(outcome)
}

#[derive(Serialize)]
struct ReplicaSummary {
    replica: u64,
    eta_final: Vec<u64>,
    z_final: Vec<f64>,
    spikes: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    horizon: f64,
    dt: f64,
    replicas: Vec<ReplicaSummary>,
}

fn write_samples_csv(record: &SimRecord, path: &Path) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = record.n();
    let mut header = vec!["t".to_string()];
    for prefix in ["z", "x", "eta"] {
        header.extend((0..n).map(|i| format!("{prefix}{i}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for k in 0..record.sample_times.len() {
        let mut row = vec![format!("{:.16e}", record.sample_times[k])];
        row.extend(record.z_samples[k].iter().map(|v| format!("{v:.16e}")));
        row.extend(record.x_samples[k].iter().map(|v| format!("{v:.16e}")));
        row.extend(record.eta_samples[k].iter().map(u64::to_string));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn run_simulate(config: &RunConfig, dir: &Path, format: Format) -> Result<Outcome, HarnessError> {
    let doc = config.doc();
    let network = config.network();
    let options = doc.sim.options();
    let z0 = doc.sim.z0.clone().unwrap_or_else(|| vec![1.0; network.n()]);
    let mut files = Vec::new();
    let mut summary = SimulateSummary {
        seed: config.seed(),
        horizon: options.horizon,
        dt: options.dt,
        replicas: Vec::new(),
    };
    for r in 0..doc.sim.replicas {
        let key = ReplicaKey::new(config.seed(), r);
        let record = match doc.sim.coupling {
            CouplingMode::Full => simulate(network, &z0, &options, key)?,
            CouplingMode::Decoupled => decoupled_simulate(network, &z0, &options, key, false)?,
            CouplingMode::DecoupledBar => decoupled_simulate(network, &z0, &options, key, true)?,
        };
        let samples = match format {
            Format::Json => {
                let path = dir.join(format!("samples_r{r:03}.jsonl"));
                let mut out = BufWriter::new(File::create(&path)?);
                record.write_samples_jsonl(&mut out)?;
                out.flush()?;
                path
            }
            Format::Csv => {
                let path = dir.join(format!("samples_r{r:03}.csv"));
                write_samples_csv(&record, &path)?;
                path
            }
        };
        let spikes = dir.join(format!("spikes_r{r:03}.csv"));
        let mut out = BufWriter::new(File::create(&spikes)?);
        record.write_spikes_csv(&mut out)?;
        out.flush()?;
        files.push(samples);
        files.push(spikes);
        summary.replicas.push(ReplicaSummary {
            replica: r,
            eta_final: record.eta_final.clone(),
            z_final: record.z_final.clone(),
            spikes: record.spike_log.len(),
        });
    }
    let path = dir.join("simulate.json");
    write_json(&path, &summary)?;
    files.push(path);
    let report = summary
        .replicas
        .iter()
        .map(|r| format!("replica {}: spike counts {:?}\n", r.replica, r.eta_final))
        .collect();
    Ok(Outcome {
        pass: true,
        files,
        report,
    })
}

fn run_fluid(config: &RunConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let network = config.network();
    let n = network.n();
    let phi0 = config
        .doc()
        .fluid
        .phi0
        .clone()
        .unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let horizon = config.doc().fluid.horizon.unwrap_or(f64::INFINITY);
    let trajectory = integrate_fluid(&phi0, &network.mean_matrix(), &network.nu(), horizon)?;
    let path = dir.join("fluid.json");
    write_json(&path, &trajectory)?;
    let report = format!(
        "breakpoints {:?}, status {}\n",
        trajectory.breakpoints,
        serde_json::to_value(&trajectory.status)
            .map(|v| v.to_string())
            .unwrap_or_default()
    );
    Ok(Outcome {
        pass: true,
        files: vec![path],
        report,
    })
}

fn run_analyze(config: &RunConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let network = config.network();
    let report = check_partial_stability(&network.mean_matrix(), &network.nu())?;
    let path = dir.join("stability.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        pass: true,
        files: vec![path],
        report: report.render_table(),
    })
}

/// Runs one named check with the parameters of the `verify` section.
pub fn run_check(config: &RunConfig, name: &str) -> Result<CheckResult, HarnessError> {
    let network = config.network();
    let verify = &config.doc().verify;
    let seed = config.seed();
    let result = match name {
        "dominance" => checks::dominance_check(network, &verify.dominance, seed)?,
        "renewal" => {
            let i = verify.renewal.neuron;
            if i >= network.n() {
                return Err(ConfigError::Invalid {
                    path: "verify.renewal.neuron".into(),
                    message: format!("no neuron {i} in a {}-neuron network", network.n()),
                }
                .into());
            }
            checks::renewal_rate_estimate(
                &network.specs()[i],
                &network.signal_laws()[i][i],
                &verify.renewal,
                seed,
            )?
        }
        "rates" => checks::empirical_rate_check(network, &verify.rates, seed)?,
        "divergence" => checks::divergence_check(network, &verify.divergence, seed)?,
        "fluid-deviation" => checks::fluid_deviation(network, &verify.fluid_deviation, seed)?,
        "window" => checks::spike_rate_window_check(network, &verify.window, seed)?,
        "return-time" => checks::return_time_estimate(network, &verify.return_time, seed)?,
        "bridge" => checks::bridge_monotonicity(&verify.bridge, seed)?,
        "tv" => checks::tv_diagnostic(network, &verify.tv, seed)?,
        other => {
            return Err(ConfigError::Invalid {
                path: "check".into(),
                message: format!(
                    "unknown check `{other}` (expected one of {})",
                    checks::CHECK_NAMES.join(", ")
                ),
            }
            .into())
        }
    };
    Ok(result)
}

fn run_verify(
    config: &RunConfig,
    dir: &Path,
    format: Format,
    requested: &[String],
) -> Result<Outcome, HarnessError> {
    let names: Vec<String> = if requested.is_empty() {
        config.doc().verify.checks.clone()
    } else {
        requested.to_vec()
    };
    if names.is_empty() {
        return Err(ConfigError::Invalid {
            path: "verify.checks".into(),
            message: "no checks selected (use --check or verify.checks)".into(),
        }
        .into());
    }
    for name in &names {
        if !checks::CHECK_NAMES.contains(&name.as_str()) {
            return Err(ConfigError::Invalid {
                path: "check".into(),
                message: format!(
                    "unknown check `{name}` (expected one of {})",
                    checks::CHECK_NAMES.join(", ")
                ),
            }
            .into());
        }
    }
    let results = names
        .iter()
        .map(|name| run_check(config, name))
        .collect::<Result<Vec<_>, _>>()?;

    let path = match format {
        Format::Json => {
            let path = dir.join("checks.json");
            write_json(&path, &results)?;
            path
        }
        Format::Csv => {
            let path = dir.join("checks.csv");
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "name,statistic,threshold,pass,replicas,seed")?;
            for r in &results {
                writeln!(
                    out,
                    "{},{:.16e},{:.16e},{},{},{}",
                    r.name, r.statistic, r.threshold, r.pass, r.replicas, r.seed
                )?;
            }
            out.flush()?;
            path
        }
    };
    let report = results
        .iter()
        .map(|r| {
            format!(
                "{:<16} {} statistic {:.6} threshold {:.6}\n",
                r.name,
                if r.pass { "PASS" } else { "FAIL" },
                r.statistic,
                r.threshold
            )
        })
        .collect();
    Ok(Outcome {
        pass: results.iter().all(|r| r.pass),
        files: vec![path],
        report,
    })
}
