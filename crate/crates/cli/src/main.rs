use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aac_cli::config::{RawConfig, RunConfig};
use aac_cli::exit;
use aac_cli::output::run_to_dir;
use aac_cli::sweep::{run_sweep, SweepSpec};
use aac_cli::verify::{run_suite, SUITES};
use aac_core::presets;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aac",
    version,
    about = "Adaptive actor-critic regulation of drift-free systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run built-in self-checks.
    Verify {
        /// algebra, basis, gamma, projection, cl-envelope, oracle or all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Repeat a scenario for several values of one setting.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=V1,V2,...
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully expanded configuration of a bundled scenario.
    Preset { name: String },
}

fn read_raw(path: &Path) -> Result<RawConfig, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        exit::CONFIG
    })?;
    RawConfig::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        exit::CONFIG
    })
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(config: &Path, out: Option<PathBuf>) -> u8 {
    let raw = match read_raw(config) {
        Ok(raw) => raw,
        Err(code) => return code,
    };
    let cfg = match RunConfig::from_raw(&raw) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return exit::CONFIG;
        }
    };
    let dir = out_dir(out, &cfg);
    let start = Instant::now();
    match run_to_dir(&cfg, &dir) {
        Ok(report) => {
            if let Some(s) = &report.summary {
                println!(
                    "{}: |xbar| {:.4e} -> {:.4e}, theta = {:?}, |Wa - Wc| = {:.2e} ({:.2?})",
                    s.plant,
                    s.initial_error_norm,
                    s.final_error_norm,
                    s.final_theta,
                    s.actor_critic_gap,
                    start.elapsed()
                );
            }
            println!("results in {}", dir.display());
            match report.fault {
                Some(f) => {
                    eprintln!("simulation fault at step {} (t = {}): {}", f.step, f.t, f.reason);
                    exit::FAULT
                }
                None => exit::OK,
            }
        }
        Err(e) => {
            eprintln!("error: writing results to {}: {e}", dir.display());
            exit::FAILURE
        }
    }
}

fn verify(suite: &str) -> u8 {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut failed = 0;
    for name in names {
        let Some(checks) = run_suite(name) else {
            eprintln!(
                "error: unknown suite `{name}`; choose one of {} or all",
                SUITES.join(", ")
            );
            return exit::CONFIG;
        };
        for c in checks {
            println!(
                "[{}] {name}: {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
            failed += usize::from(!c.pass);
        }
    }
    if failed == 0 {
        exit::OK
    } else {
        println!("{failed} check(s) failed");
        exit::FAILURE
    }
}

fn sweep(config: &Path, spec: &str, out: Option<PathBuf>) -> u8 {
    let raw = match read_raw(config) {
        Ok(raw) => raw,
        Err(code) => return code,
    };
    let (spec, variants) = match SweepSpec::parse(spec).and_then(|s| s.variants(&raw).map(|v| (s, v))) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let dir = out_dir(out, &variants[0].1);
    match run_sweep(&spec, &variants, &dir) {
        Ok(results) => {
            let mut code = exit::OK;
            for r in results {
                match r.report {
                    Ok(rep) if rep.fault.is_some() => {
                        println!("{} = {:?}: fault", spec.key, r.value);
                        code = exit::FAULT;
                    }
                    Ok(rep) => {
                        let err = rep.summary.map_or(f64::NAN, |s| s.final_error_norm);
                        println!("{} = {:?}: final |xbar| = {err:.4e}", spec.key, r.value);
                    }
                    Err(e) => {
                        println!("{} = {:?}: {e}", spec.key, r.value);
                        code = exit::FAILURE;
                    }
                }
            }
            println!("summary in {}", dir.join("sweep_summary.csv").display());
            code
        }
        Err(e) => {
            eprintln!("error: writing results to {}: {e}", dir.display());
            exit::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Verify { suite } => verify(&suite),
        Command::Sweep {
            config,
            sweep: spec,
            out,
        } => sweep(&config, &spec, out),
        Command::Preset { name } => match presets::by_name(&name) {
            Some(scenario) => {
                print!(
                    "{}",
                    RunConfig {
                        scenario,
                        output_dir: None
                    }
                    .to_text()
                );
                exit::OK
            }
            None => {
                eprintln!("error: unknown scenario `{name}`; choose scalar, wmr or ibvs");
                exit::CONFIG
            }
        },
    };
    ExitCode::from(code)
}
