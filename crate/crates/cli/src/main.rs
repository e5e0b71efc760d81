//! `scim`: command-line front end for the SCIM simulator.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use scim_core::harness::output::{coherence_csv, summary_csv, waveform_csv, waveform_samples};
use scim_core::harness::{run_sweep, SimConfig, SweepAxis, CONFIG_KEYS};
use scim_core::oracle;
use scim_core::precoding::coherence_sweep;

/// Environment variable overriding the master seed.
const SEED_ENV: &str = "SCIM_SEED";

fn config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("Flat `key = value` configuration file"),
    );
    CONFIG_KEYS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .help(format!("Override config key `{key}`"))
                .help_heading("Config keys"),
        )
    })
}

fn output_arg(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("output")
            .long("output")
            .short('o')
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("Write CSV here instead of stdout"),
    )
}

fn cli() -> Command {
    Command::new("scim")
        .about("Single-carrier index modulation simulator")
        .after_help(format!(
            "Settings apply in order: defaults, --config file, ${SEED_ENV} (master seed), per-key flags."
        ))
        .subcommand_required(true)
        .subcommand(output_arg(config_args(
            Command::new("run").about("Run every configured SNR point and print the summary CSV"),
        )))
        .subcommand(output_arg(config_args(
            Command::new("sweep").about("Sweep one axis and print the summary CSV").arg(
                Arg::new("axis")
                    .long("axis")
                    .value_name("AXIS")
                    .required(true)
                    .help("snr, Q, K, L, P, xi or n_run"),
            ),
        )))
        .subcommand(output_arg(
            Command::new("coherence")
                .about("Coherence of single-device FTN precoders versus xi")
                .arg(Arg::new("L").long("L").value_name("VALUE").default_value("64"))
                .arg(
                    Arg::new("xi")
                        .long("xi")
                        .value_name("LIST")
                        .default_value("0.5,0.6,0.7,0.8,0.9,1.0")
                        .help("Comma-separated time-squeezing factors"),
                ),
        ))
        .subcommand(output_arg(config_args(
            Command::new("waveform").about("Per-device FTN waveform of one random block").arg(
                Arg::new("oversample")
                    .long("oversample")
                    .value_name("COUNT")
                    .default_value("8")
                    .value_parser(clap::value_parser!(usize)),
            ),
        )))
        .subcommand(
            Command::new("oracle-check")
                .about("Run the small-instance detector equivalence suites")
                .arg(
                    Arg::new("trials")
                        .long("trials")
                        .value_name("COUNT")
                        .default_value("1000")
                        .value_parser(clap::value_parser!(usize)),
                )
                .arg(
                    Arg::new("seed")
                        .long("seed")
                        .value_name("SEED")
                        .default_value("1")
                        .value_parser(clap::value_parser!(u64)),
                )
                .arg(Arg::new("quiet").long("quiet").action(ArgAction::SetTrue)),
        )
}

fn load_config(m: &ArgMatches) -> Result<SimConfig, String> {
    let mut cfg = SimConfig::default();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        cfg.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.set("seed", &seed).map_err(|e| format!("{SEED_ENV}: {e}"))?;
    }
    for key in CONFIG_KEYS {
        if let Some(value) = m.get_one::<String>(key) {
            cfg.set(key, value).map_err(|e| e.to_string())?;
        }
    }
    Ok(cfg)
}

fn emit(m: &ArgMatches, text: &str) -> Result<(), String> {
    match m.get_one::<PathBuf>("output") {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("cannot parse {s:?} as a number")))
        .collect()
}

fn sweep(cfg: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<String, String> {
    cfg.resolve().map_err(|e| e.to_string())?;
    let summary = run_sweep(cfg, axis, values);
    for f in &summary.failures {
        eprintln!("warning: {axis} = {} failed: {}", f.axis_value, f.message);
    }
    if summary.rows.is_empty() {
        return Err(summary
            .failures
            .first()
            .map_or_else(|| "no sweep points".to_string(), |f| f.message.clone()));
    }
    Ok(summary_csv(&summary.rows))
}

fn dispatch(matches: &ArgMatches) -> Result<(), String> {
    match matches.subcommand() {
        Some(("run", m)) => {
            let cfg = load_config(m)?;
            let snrs = cfg.snr_db.clone();
            emit(m, &sweep(&cfg, SweepAxis::Snr, &snrs)?)
        }
        Some(("sweep", m)) => {
            let cfg = load_config(m)?;
            let axis: SweepAxis = m.get_one::<String>("axis").expect("required").parse().map_err(|e| format!("{e}"))?;
            let values = match (axis, cfg.axis_values.is_empty()) {
                (_, false) => cfg.axis_values.clone(),
                (SweepAxis::Snr, true) => cfg.snr_db.clone(),
                (_, true) => return Err(format!("sweep over {axis} needs axis_values")),
            };
            emit(m, &sweep(&cfg, axis, &values)?)
        }
        Some(("coherence", m)) => {
            let l: usize = m
                .get_one::<String>("L")
                .expect("default")
                .parse()
                .map_err(|_| "L must be a positive integer".to_string())?;
            let xis = parse_list(m.get_one::<String>("xi").expect("default"))?;
            let points = coherence_sweep(l, &xis).map_err(|e| e.to_string())?;
            emit(m, &coherence_csv(&points))
        }
        Some(("waveform", m)) => {
            let cfg = load_config(m)?;
            let oversample = *m.get_one::<usize>("oversample").expect("default");
            let samples = waveform_samples(&cfg, oversample).map_err(|e| e.to_string())?;
            emit(m, &waveform_csv(&samples))
        }
        Some(("oracle-check", m)) => {
            let trials = *m.get_one::<usize>("trials").expect("default");
            let seed = match std::env::var(SEED_ENV) {
                Ok(s) if m.value_source("seed") != Some(clap::parser::ValueSource::CommandLine) => {
                    s.parse().map_err(|_| format!("{SEED_ENV}: cannot parse {s:?}"))?
                }
                _ => *m.get_one::<u64>("seed").expect("default"),
            };
            let reports = oracle::run_all(trials, seed).map_err(|e| e.to_string())?;
            let mut failed = Vec::new();
            for r in &reports {
                if !m.get_flag("quiet") {
                    println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                }
                if !r.passed {
                    failed.push(r.name);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(format!("oracle suites failed: {}", failed.join(", ")))
            }
        }
        _ => unreachable!("subcommand required"),
    }
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {}", msg.lines().next().unwrap_or("unknown error"));
            ExitCode::from(2)
        }
    }
}
