//! One-parameter sweeps run in parallel, one output directory per value.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::config::{is_scalar_key, parse_value, ConfigError, RawConfig, RunConfig, Value};
use crate::output::{run_to_dir, RunReport};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub key: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    /// Parses `KEY=V1,V2,...`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let fail = |key: Option<&str>, message: String| ConfigError {
            line: None,
            key: key.map(String::from),
            message,
        };
        let Some((key, list)) = text.split_once('=') else {
            return Err(fail(None, format!("expected KEY=V1,V2,..., got `{text}`")));
        };
        let key = key.trim();
        if !is_scalar_key(key) {
            return Err(fail(Some(key), "not a numeric setting that can be swept".into()));
        }
        let mut values = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match parse_value(item) {
                Ok(Value::Number(v)) => values.push(v),
                _ => return Err(fail(Some(key), format!("`{item}` is not a number"))),
            }
        }
        if values.is_empty() {
            return Err(fail(Some(key), "no sweep values given".into()));
        }
        Ok(SweepSpec {
            key: key.to_string(),
            values,
        })
    }

    /// Validates every variant up front so nothing runs if one is bad.
    pub fn variants(&self, base: &RawConfig) -> Result<Vec<(f64, RunConfig)>, ConfigError> {
        self.values
            .iter()
            .map(|&v| {
                let mut raw = base.clone();
                raw.set(&self.key, Value::Number(v));
                RunConfig::from_raw(&raw).map(|cfg| (v, cfg))
            })
            .collect()
    }
}

pub fn run_dir_name(key: &str, value: f64) -> String {
    format!("{key}={value:?}")
}

pub struct SweepResult {
    pub value: f64,
    pub dir: PathBuf,
    pub report: io::Result<RunReport>,
}

/// Runs every variant on its own thread and writes `sweep_summary.csv`.
pub fn run_sweep(spec: &SweepSpec, variants: &[(f64, RunConfig)], out: &Path) -> io::Result<Vec<SweepResult>> {
    fs::create_dir_all(out)?;
    let results: Vec<SweepResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|(value, cfg)| {
                let dir = out.join(run_dir_name(&spec.key, *value));
                scope.spawn(move || SweepResult {
                    value: *value,
                    report: run_to_dir(cfg, &dir),
                    dir,
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut csv = fs::File::create(out.join("sweep_summary.csv"))?;
    writeln!(
        csv,
        "{},status,final_error_norm,final_theta_error,wc_norm,wa_norm,actor_critic_gap,max_control_norm,time_to_5pct,dir",
        spec.key
    )?;
    let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
    for r in &results {
        let dir = r
            .dir
            .file_name()
            .map(|d| d.to_string_lossy().into_owned())
            .unwrap_or_default();
        match &r.report {
            Ok(RunReport { summary: Some(s), .. }) => {
                let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
                writeln!(
                    csv,
                    "{:?},{},{:?},{},{:?},{:?},{:?},{:?},{},{dir}",
                    r.value,
                    s.status,
                    s.final_error_norm,
                    opt(s.final_theta_error),
                    norm(&s.final_wc),
                    norm(&s.final_wa),
                    s.actor_critic_gap,
                    s.max_control_norm,
                    opt(s.time_to_5pct),
                )?;
            }
            Ok(RunReport { summary: None, .. }) => writeln!(csv, "{:?},fault,,,,,,,,{dir}", r.value)?,
            Err(_) => writeln!(csv, "{:?},error,,,,,,,,{dir}", r.value)?,
        }
    }
    Ok(results)
}
