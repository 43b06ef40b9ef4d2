//! Running a scenario, its enabled checks, and the output directory.
//!
//! Layout: `manifest.json`, `series.csv`, `diagnostics.json` and
//! `fields/t_<index>.txt`, one file per recorded snapshot holding one
//! snapshot block per species.

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use crossdiff::diagnostics::{self, DiagnosticsReport, GronwallReport, MuMeasure};
use crossdiff::solver::{self, Outcome, Trajectory};
use crossdiff::Field;
use serde::Serialize;

use crate::scenario::{Scenario, RNG_ALGORITHM};
use crate::{positivity_tolerance, CliResult, REDUCTION_TOLERANCE};

/// One pass/fail invariant check with the measured value and its limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            value,
            threshold,
        }
    }
}

/// A run with its checks, before anything is written to disk.
#[derive(Debug, Clone)]
pub struct Executed {
    pub result: Result<(Trajectory, DiagnosticsReport), String>,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl Executed {
    pub fn outcome(&self) -> Option<&Outcome> {
        self.result.as_ref().ok().map(|(t, _)| &t.outcome)
    }

    pub fn passed(&self) -> bool {
        self.outcome().is_some_and(Outcome::is_completed) && self.checks.iter().all(|c| c.pass)
    }

    /// Gronwall constant of the total L² norm `(Σ_i ‖u_i‖²)^{1/2}`.
    pub fn total_c_fit(&self) -> Option<f64> {
        let (_, report) = self.result.as_ref().ok()?;
        let series: Vec<(f64, f64)> = report
            .norms
            .iter()
            .map(|r| (r.t, r.species.iter().map(|s| s.l2 * s.l2).sum::<f64>().sqrt()))
            .collect();
        diagnostics::gronwall_fit(&series).ok()
    }
}

/// Runs the scenario and every enabled diagnostic; errors from the solver
/// (such as a rejected growth certificate) are captured in the result.
pub fn execute(scenario: &Scenario) -> CliResult<Executed> {
    let grid = scenario.grid()?;
    let state0 = scenario.initial_state()?;
    let start = Instant::now();
    let run = solver::run(&scenario.model, &grid, &state0, &scenario.solver)
        .and_then(|(traj, mut report)| {
            let checks = analyze(scenario, &traj, &mut report)?;
            Ok((traj, report, checks))
        });
    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(match run {
        Ok((traj, report, checks)) => Executed {
            result: Ok((traj, report)),
            checks,
            wall_time_s,
        },
        Err(e) => Executed {
            result: Err(e.to_string()),
            checks: Vec::new(),
            wall_time_s,
        },
    })
}

fn analyze(scenario: &Scenario, traj: &Trajectory, report: &mut DiagnosticsReport) -> crossdiff::Result<Vec<Check>> {
    let toggles = &scenario.diagnostics;
    let model = &scenario.model;
    let grid = scenario.grid()?;
    let m = model.m();
    let mut checks = Vec::new();

    if toggles.gronwall {
        for i in 0..m {
            let series = report.l2_series(i);
            if let Ok(c_fit) = diagnostics::gronwall_fit(&series) {
                report.gronwall.push(GronwallReport {
                    species: i,
                    c_fit,
                    ls_slope: diagnostics::log_slope(&series),
                });
            }
        }
    }
    if toggles.positivity {
        let tol = positivity_tolerance(report.sup());
        checks.push(Check::at_least("positivity", report.min(), -tol));
    }
    if toggles.reduction {
        report.residuals = diagnostics::w_reduction_residual(model, &grid, traj)?;
        let worst = report.residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        checks.push(Check::at_most("reduction", worst, REDUCTION_TOLERANCE));
    }
    if toggles.energy_decay {
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let series = report.l2_series(i);
            let scale = series.first().map_or(0.0, |p| p.1).max(f64::MIN_POSITIVE);
            for pair in series.windows(2) {
                worst = worst.max((pair[1].1 - pair[0].1) / scale);
            }
        }
        checks.push(Check::at_most("energy_decay", worst, 1e-12));
    }
    if let Some(species) = toggles.ladder {
        if traj.outcome.is_completed() {
            let ladder = diagnostics::moser_ladder(traj, species, &MuMeasure::of_model(model), 32, None)?;
            checks.push(Check::at_most("ladder_limit", ladder.limit_rel_gap, 0.1));
            let worst_ratio = ladder.ratios.iter().copied().fold(f64::INFINITY, f64::min);
            checks.push(Check::at_least("ladder_monotone", worst_ratio, 1.0 - 1e-12));
            report.ladder = Some(ladder);
        }
    }
    if let Some(species) = toggles.sobolev {
        let ones = Field::constant(grid, 1.0);
        let g: Vec<(f64, &Field)> = traj.snapshots.iter().map(|s| (s.t, &ones)).collect();
        let big_g = traj.species_series(species);
        let sob = diagnostics::sobolev_ratio(&grid, &g, &big_g, 2.0)?;
        checks.push(Check {
            name: "sobolev_finite".into(),
            pass: sob.ratio.is_finite(),
            value: sob.ratio,
            threshold: f64::INFINITY,
        });
        report.sobolev = Some(sob);
    }
    if let Some(species) = toggles.sign_split {
        report.sign_split = diagnostics::sign_split_stats(traj, species)?;
    }
    Ok(checks)
}

#[derive(Serialize)]
struct RngInfo<'a> {
    algorithm: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    config: &'a Scenario,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<&'a Outcome>,
    t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    steps: usize,
    snapshots: usize,
    wall_time_s: f64,
    rng: RngInfo<'a>,
    checks: &'a [Check],
}

/// Writes the output directory for an executed scenario.
pub fn write_artifacts(scenario: &Scenario, executed: &Executed, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    let (steps, snapshots) = match &executed.result {
        Ok((traj, report)) => {
            report.write_csv(BufWriter::new(fs::File::create(out.join("series.csv"))?))?;
            fs::write(out.join("diagnostics.json"), to_json(report)?)?;
            let fields = out.join("fields");
            fs::create_dir_all(&fields)?;
            for (k, state) in traj.snapshots.iter().enumerate() {
                let mut w = BufWriter::new(fs::File::create(fields.join(format!("t_{k}.txt")))?);
                for f in &state.species {
                    f.write_snapshot(state.t, &mut w)?;
                }
            }
            (report.norms.len().saturating_sub(1), traj.snapshots.len())
        }
        Err(_) => (0, 0),
    };
    let manifest = Manifest {
        name: &scenario.name,
        version: env!("CARGO_PKG_VERSION"),
        config: scenario,
        status: if executed.passed() { "pass" } else { "fail" },
        outcome: executed.outcome(),
        t_star: executed.outcome().and_then(Outcome::event_time),
        error: executed.result.as_ref().err().map(String::as_str),
        steps,
        snapshots,
        wall_time_s: executed.wall_time_s,
        rng: RngInfo {
            algorithm: RNG_ALGORITHM,
            seed: scenario.seed,
        },
        checks: &executed.checks,
    };
    fs::write(out.join("manifest.json"), to_json(&manifest)?)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(crossdiff::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// What `simulate` reports back to the caller.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub exit_code: u8,
    pub executed: Executed,
}

/// Runs `scenario`, writes its artifacts to `out`, and derives the exit
/// status: 0 iff the run completed and every enabled check passed.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> CliResult<RunSummary> {
    let executed = execute(scenario)?;
    write_artifacts(scenario, &executed, out)?;
    Ok(RunSummary {
        exit_code: if executed.passed() { 0 } else { 1 },
        executed,
    })
}
