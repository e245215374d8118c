//! Files written for one run: the full trajectory, a JSON summary, the
//! effective configuration and small per-quantity CSVs for plotting.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use aac_core::plants::PlantKind;
use aac_core::simulator::{RunStats, SimFault, Summary};
use aac_core::{summarize, RunError, RunOutput, TrajectoryLog};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct FaultInfo {
    pub step: usize,
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counters {
    pub steps: usize,
    pub rate_evals: usize,
    pub stack_offers: usize,
    pub stack_accepts: usize,
    pub mode_switch_time: Option<f64>,
    pub g_bound_breaches: usize,
    pub max_g_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryFile {
    pub plant: &'static str,
    pub status: &'static str,
    pub fault: Option<FaultInfo>,
    pub final_time: f64,
    pub initial_error_norm: f64,
    pub final_error_norm: f64,
    pub final_theta: Vec<f64>,
    pub theta_true: Option<Vec<f64>>,
    pub final_theta_error: Option<f64>,
    pub final_wc: Vec<f64>,
    pub final_wa: Vec<f64>,
    pub actor_critic_gap: f64,
    pub max_control_norm: f64,
    pub time_to_5pct: Option<f64>,
    pub min_gamma_eig: f64,
    pub sigma1_first: f64,
    pub sigma1_last: f64,
    pub counters: Counters,
}

/// What happened to a run, after its files were written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Option<SummaryFile>,
    pub fault: Option<FaultInfo>,
}

/// Runs the scenario and writes every output file into `dir`.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> io::Result<RunReport> {
    fs::create_dir_all(dir.join("plotdata"))?;
    let mut effective = cfg.clone();
    effective.output_dir = Some(dir.to_path_buf());
    fs::write(dir.join("effective.config"), effective.to_text())?;

    let s = &cfg.scenario;
    let (log, stats, fault) = match s.run() {
        Ok(RunOutput { log, stats, .. }) => (log, stats, None),
        Err(RunError::Fault(f)) => {
            let SimFault {
                step,
                t,
                reason,
                log,
                stats,
            } = *f;
            (log, stats, Some(FaultInfo { step, t, reason }))
        }
        Err(RunError::Config(e)) => return Err(io::Error::new(io::ErrorKind::InvalidInput, e.to_string())),
    };

    log.write_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
    write_plotdata(cfg, &log, &dir.join("plotdata"))?;

    let theta_true = s.plant.theta_true();
    let summary = summarize(&log, theta_true.as_ref())
        .ok()
        .map(|sum| summary_file(cfg, &sum, &stats, fault.clone()));
    if let Some(sum) = &summary {
        let text = serde_json::to_string_pretty(sum).map_err(io::Error::other)?;
        fs::write(dir.join("summary.json"), text + "\n")?;
    }
    Ok(RunReport { summary, fault })
}

fn summary_file(cfg: &RunConfig, sum: &Summary, stats: &RunStats, fault: Option<FaultInfo>) -> SummaryFile {
    let s = &cfg.scenario;
    SummaryFile {
        plant: s.plant.name(),
        status: if fault.is_some() { "fault" } else { "ok" },
        fault,
        final_time: sum.final_time,
        initial_error_norm: sum.initial_error_norm,
        final_error_norm: sum.final_error_norm,
        final_theta: sum.final_theta.as_slice().to_vec(),
        theta_true: s.plant.theta_true().map(|t| t.as_slice().to_vec()),
        final_theta_error: sum.final_theta_error,
        final_wc: sum.final_wc.as_slice().to_vec(),
        final_wa: sum.final_wa.as_slice().to_vec(),
        actor_critic_gap: sum.actor_critic_gap,
        max_control_norm: sum.max_control_norm,
        time_to_5pct: sum.time_to_5pct,
        min_gamma_eig: sum.min_gamma_eig,
        sigma1_first: sum.sigma1_first,
        sigma1_last: sum.sigma1_last,
        counters: Counters {
            steps: stats.steps,
            rate_evals: stats.rate_evals,
            stack_offers: stats.stack_offers,
            stack_accepts: stats.stack_accepts,
            mode_switch_time: stats.mode_switch_step.map(|k| k as f64 * s.sim.dt),
            g_bound_breaches: stats.g_bound_breaches,
            max_g_norm: stats.max_g_norm,
        },
    }
}

fn table<F>(path: &Path, header: &[String], log: &TrajectoryLog, mut row: F) -> io::Result<()>
where
    F: FnMut(&aac_core::simulator::LogRow) -> Vec<f64>,
{
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for r in &log.rows {
        let cells: Vec<String> = std::iter::once(r.t).chain(row(r)).map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

fn header(first: &[&str], rest: impl IntoIterator<Item = String>) -> Vec<String> {
    first.iter().map(|s| s.to_string()).chain(rest).collect()
}

fn write_plotdata(cfg: &RunConfig, log: &TrajectoryLog, dir: &Path) -> io::Result<()> {
    let s = &cfg.scenario;
    let dims = s.plant.dims();
    let labels = s.basis().labels();
    let idx = |prefix: &str, len: usize| (1..=len).map(move |i| format!("{prefix}{i}")).collect::<Vec<_>>();

    table(
        &dir.join("error_norms.csv"),
        &header(&["t", "error_norm"], idx("xbar", dims.n)),
        log,
        |r| std::iter::once(r.xbar.norm()).chain(r.xbar.iter().copied()).collect(),
    )?;
    table(
        &dir.join("control_norms.csv"),
        &header(&["t", "control_norm", "applied_norm"], idx("u", dims.m)),
        log,
        |r| {
            let applied = r.u.add_scalar(r.probe).norm();
            [r.u.norm(), applied].into_iter().chain(r.u.iter().copied()).collect()
        },
    )?;
    table(
        &dir.join("value.csv"),
        &header(&["t", "value", "bellman_error"], []),
        log,
        |r| vec![r.value, r.delta],
    )?;

    let theta_true = s.plant.theta_true();
    let is_ibvs = matches!(s.plant.kind(), PlantKind::Ibvs { .. });
    let reference = if is_ibvs {
        idx("inv_depth", dims.p.max(log.rows.first().map_or(0, |r| r.depths.len())))
    } else if theta_true.is_some() {
        idx("theta_true", dims.p)
    } else {
        Vec::new()
    };
    table(
        &dir.join("parameter_estimates.csv"),
        &header(&["t"], idx("theta", dims.p).into_iter().chain(reference)),
        log,
        |r| {
            let mut cells: Vec<f64> = r.theta.iter().copied().collect();
            if is_ibvs {
                cells.extend(r.depths.iter().map(|z| 1.0 / z));
            } else if let Some(th) = &theta_true {
                cells.extend(th.iter().copied());
            }
            cells
        },
    )?;
    table(
        &dir.join("critic_weights.csv"),
        &header(&["t"], labels.iter().map(|l| format!("wc[{l}]"))),
        log,
        |r| r.wc.iter().copied().collect(),
    )?;
    table(
        &dir.join("actor_weights.csv"),
        &header(&["t"], labels.iter().map(|l| format!("wa[{l}]"))),
        log,
        |r| r.wa.iter().copied().collect(),
    )
}
