//! One-parameter sweeps over a base scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::output::{self, Executed};
use crate::scenario::Scenario;
use crate::{CliError, CliResult};

/// Environment variable capping the sweep worker pool.
pub const THREADS_ENV: &str = "CROSSDIFF_THREADS";

#[derive(Debug, Clone)]
pub struct SweepSpec {
    base: Scenario,
    param: String,
    values: Vec<f64>,
}

impl SweepSpec {
    /// Checks the value list and that every value yields a valid scenario.
    pub fn new(base: Scenario, param: &str, values: Vec<f64>) -> CliResult<Self> {
        if values.is_empty() {
            return Err(CliError::Config("sweep value list is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("sweep value {v} is not finite")));
        }
        for &v in &values {
            base.with_param(param, v)?;
        }
        Ok(Self {
            base,
            param: param.into(),
            values,
        })
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Parses a comma-separated value list such as `0,0.01,1e-1`.
pub fn parse_values(csv: &str) -> CliResult<Vec<f64>> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad sweep value {s:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// `completed`, `blow_up`, `numerical_failure` or `error`.
    pub outcome: String,
    pub t_star: Option<f64>,
    pub max_sup: Option<f64>,
    pub min: Option<f64>,
    pub c_fit: Option<f64>,
    /// Run completed and all enabled checks passed.
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// First adjacent pair of rows where a completed run is followed by a
/// blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub last_completed: f64,
    pub first_blow_up: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub param: String,
    pub rows: Vec<SweepRow>,
    pub transition: Option<Transition>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        let mut s = String::from("param,value,outcome,t_star,max_sup,min,c_fit,pass\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{:e},{},{},{},{},{},{}",
                self.param,
                r.value,
                r.outcome,
                opt(r.t_star),
                opt(r.max_sup),
                opt(r.min),
                opt(r.c_fit),
                r.pass
            )
            .expect("string write");
        }
        s
    }
}

/// Worker count from [`THREADS_ENV`], or `None` for the rayon default.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every value concurrently, writing `run_<k>/` per value plus
/// `summary.csv` and `sweep.json`. Rows follow the input order.
pub fn sweep(spec: &SweepSpec, out: &Path) -> CliResult<SweepReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(out)?;

    let rows: Vec<SweepRow> = pool.install(|| {
        spec.values
            .par_iter()
            .enumerate()
            .map(|(k, &value)| run_one(spec, k, value, out))
            .collect::<CliResult<Vec<_>>>()
    })?;

    let transition = rows.windows(2).find_map(|w| {
        (w[0].outcome == "completed" && w[1].outcome == "blow_up").then(|| Transition {
            last_completed: w[0].value,
            first_blow_up: w[1].value,
            t_star: w[1].t_star.unwrap_or(f64::NAN),
        })
    });
    let report = SweepReport {
        param: spec.param.clone(),
        rows,
        transition,
    };
    fs::write(out.join("summary.csv"), report.to_csv())?;
    let json = serde_json::to_string_pretty(&report).map_err(crossdiff::Error::from)?;
    fs::write(out.join("sweep.json"), json + "\n")?;
    Ok(report)
}

fn run_one(spec: &SweepSpec, k: usize, value: f64, out: &Path) -> CliResult<SweepRow> {
    let scenario = spec.base.with_param(&spec.param, value)?;
    let executed = output::execute(&scenario)?;
    output::write_artifacts(&scenario, &executed, &out.join(format!("run_{k}")))?;
    Ok(row(value, &executed))
}

fn row(value: f64, executed: &Executed) -> SweepRow {
    match &executed.result {
        Ok((traj, report)) => SweepRow {
            value,
            outcome: traj.outcome.label().into(),
            t_star: traj.outcome.event_time(),
            max_sup: Some(report.sup()),
            min: Some(report.min()),
            c_fit: executed.total_c_fit(),
            pass: executed.passed(),
            error: None,
        },
        Err(e) => SweepRow {
            value,
            outcome: "error".into(),
            t_star: None,
            max_sup: None,
            min: None,
            c_fit: None,
            pass: false,
            error: Some(e.clone()),
        },
    }
}
