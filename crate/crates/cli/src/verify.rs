//! Built-in invariant batteries run by `crossdiff verify <suite>`.

use std::f64::consts::PI;

use crossdiff::diagnostics::{self, MuMeasure};
use crossdiff::models::{ReactionKind, ReactionSpec};
use crossdiff::solver;
use crossdiff::{Field, Grid, PsiSpec};
use serde::Serialize;

use crate::output::{self, Check};
use crate::scenario::{preset, InitialProfile, Scenario};
use crate::{positivity_tolerance, CliError, CliResult, REDUCTION_TOLERANCE};

pub const SUITES: [&str; 5] = ["operators", "reduction", "positivity", "ladder", "sobolev"];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

/// Runs one suite, or every suite for `all`.
pub fn run_suite(name: &str) -> CliResult<Vec<SuiteReport>> {
    let names: Vec<&str> = match name {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => {
            return Err(CliError::Config(format!(
                "unknown suite {other:?}; expected one of {}, all",
                SUITES.join(", ")
            )))
        }
    };
    names
        .into_iter()
        .map(|s| {
            let checks = match s {
                "operators" => operators()?,
                "reduction" => reduction()?,
                "positivity" => positivity()?,
                "ladder" => ladder()?,
                _ => sobolev()?,
            };
            Ok(SuiteReport {
                suite: s.into(),
                pass: checks.iter().all(|c| c.pass),
                checks,
            })
        })
        .collect()
}

fn sine(grid: Grid, kx: f64, ky: f64) -> Field {
    Field::from_fn(grid, |x, y| {
        let sy = if grid.dim() == 2 { (ky * PI * y).sin() } else { 1.0 };
        (kx * PI * x).sin() * sy
    })
}

fn discrete_eigenvalue(grid: &Grid, k: f64) -> f64 {
    let h = grid.h();
    2.0 / (h * h) * (1.0 - (k * PI * h).cos())
}

fn eigen_error(grid: Grid, kx: f64, ky: f64) -> crossdiff::Result<f64> {
    let phi = sine(grid, kx, ky);
    let mut mu = discrete_eigenvalue(&grid, kx);
    if grid.dim() == 2 {
        mu += discrete_eigenvalue(&grid, ky);
    }
    let lap = grid.laplacian(&phi)?;
    let resid = lap.axpby(1.0, &phi, mu)?;
    Ok(resid.sup_norm() / mu)
}

fn operators() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let g1 = Grid::new(1, 64, 1.0)?;
    for k in 1..=3 {
        checks.push(Check::at_most(&format!("eigenfunction_1d_k{k}"), eigen_error(g1, k as f64, 1.0)?, 1e-10));
    }
    let g2 = Grid::new(2, 32, 1.0)?;
    checks.push(Check::at_most("eigenfunction_2d_k1_l2", eigen_error(g2, 1.0, 2.0)?, 1e-10));

    let truncation = |n: usize| -> CliResult<f64> {
        let grid = Grid::new(1, n, 1.0)?;
        let f = sine(grid, 1.0, 1.0);
        Ok(grid.laplacian(&f)?.axpby(1.0, &f, PI * PI)?.sup_norm())
    };
    let ratio = truncation(31)? / truncation(63)?;
    checks.push(Check {
        name: "laplacian_convergence_ratio".into(),
        pass: (3.2..=4.8).contains(&ratio),
        value: ratio,
        threshold: 4.0,
    });

    let l2 = g1.integrate_lp(&sine(g1, 1.0, 1.0), 2.0, None)?;
    checks.push(Check::at_most("l2_norm_of_sine", (l2 - 0.5f64.sqrt()).abs(), 1e-12));

    let heat = |n: usize| -> CliResult<f64> {
        let mut scenario = preset("heat-1d").expect("shipped preset");
        scenario.grid.n = n;
        scenario.solver.record_every = usize::MAX;
        let grid = scenario.grid()?;
        let (traj, _) = solver::run(&scenario.model, &grid, &scenario.initial_state()?, &scenario.solver)?;
        let last = traj.last();
        let decay = (-PI * PI * last.t).exp();
        let exact = Field::from_fn(grid, |x, _| decay * (PI * x).sin());
        Ok(last.species[0].axpby(1.0, &exact, -1.0)?.sup_norm())
    };
    let coarse = heat(128)?;
    checks.push(Check::at_most("heat_error_n128", coarse, 1e-3));
    let fine = heat(257)?;
    let ratio = coarse / fine;
    checks.push(Check {
        name: "heat_convergence_ratio".into(),
        pass: (3.2..=4.8).contains(&ratio),
        value: ratio,
        threshold: 4.0,
    });
    Ok(checks)
}

fn reduction() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for name in ["skt-equal-diffusion", "yw-small-eps", "ywz"] {
        let scenario = preset(name).expect("shipped preset");
        let grid = scenario.grid()?;
        let (traj, _) = solver::run(&scenario.model, &grid, &scenario.initial_state()?, &scenario.solver)?;
        let worst = diagnostics::w_reduction_residual(&scenario.model, &grid, &traj)?
            .iter()
            .map(|r| r.residual)
            .fold(0.0, f64::max);
        checks.push(Check::at_most(&format!("residual_{name}"), worst, REDUCTION_TOLERANCE));
    }
    let scenario = preset("yw-small-eps").expect("shipped preset");
    let grid = scenario.grid()?;
    let co = solver::co_solve_w(&scenario.model, &grid, &scenario.initial_state()?, &scenario.solver)?;
    checks.push(Check::at_most("w_equation_equivalence_yw", co.max_rel_diff, 1e-10));
    Ok(checks)
}

/// `skt-equal-diffusion` with both species drawn from the seeded stream.
pub fn random_skt(seed: u64) -> Scenario {
    let mut scenario = preset("skt-equal-diffusion").expect("shipped preset");
    scenario.seed = seed;
    scenario.initial = vec![InitialProfile::RandomNonneg { amplitude: 1.0 }; 2];
    scenario
}

fn positivity() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for seed in 0..10 {
        let executed = output::execute(&random_skt(seed))?;
        let name = format!("min_seed_{seed}");
        let check = match &executed.result {
            Ok((traj, report)) => {
                let mut c = Check::at_least(&name, report.min(), -positivity_tolerance(report.sup()));
                c.pass &= traj.outcome.is_completed();
                c
            }
            Err(_) => Check {
                name,
                pass: false,
                value: f64::NAN,
                threshold: 0.0,
            },
        };
        checks.push(check);
    }

    // A cross term that overwhelms the step: the explicit update goes
    // negative, which the solver must report rather than clip.
    let mut control = random_skt(0);
    control.model.reaction = ReactionSpec::new(
        ReactionKind::Affine {
            k: vec![0.0, 0.0],
            b: vec![vec![0.0, -1e6], vec![0.0, 0.0]],
        },
        None,
    )?;
    control.diagnostics.reduction = false;
    control.solver.t_end = 1e-3;
    let executed = output::execute(&control)?;
    let min = executed.result.as_ref().map_or(f64::NAN, |(_, report)| report.min());
    checks.push(Check {
        name: "negative_control_goes_negative".into(),
        pass: min < -positivity_tolerance(1.0),
        value: min,
        threshold: -positivity_tolerance(1.0),
    });
    Ok(checks)
}

fn ladder() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let scenario = preset("scalar-bounded").expect("shipped preset");
    let grid = scenario.grid()?;
    let (traj, _) = solver::run(&scenario.model, &grid, &scenario.initial_state()?, &scenario.solver)?;
    let report = diagnostics::moser_ladder(&traj, 0, &MuMeasure::of_model(&scenario.model), 32, None)?;
    checks.push(Check::at_most("ladder_limit_gap", report.limit_rel_gap, 0.1));
    let worst = report.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("ladder_nondecreasing", worst, 1.0 - 1e-12));

    let p_list: Vec<f64> = (0..=6).map(|e| 2f64.powi(e)).collect();
    let v_list: Vec<f64> = (0..=30).map(|i| 0.1 * 1000f64.powf(i as f64 / 30.0)).collect();
    for (name, psi) in [("s", PsiSpec::identity()), ("s2", PsiSpec::power(2.0))] {
        let mu = MuMeasure::new(1.0, psi)?;
        let growth = diagnostics::f_growth_check(&mu, &p_list, &v_list)?;
        checks.push(Check::at_least(&format!("f_growth_low_{name}"), growth.c_low, 0.2));
        checks.push(Check::at_most(&format!("f_growth_high_{name}"), growth.c_high, 5.0));
    }
    Ok(checks)
}

/// Sobolev ratio of the pair `g ≡ 1`, `G = sin(πx)` on `t ∈ [0, 1]`.
pub fn sobolev_pair_ratio(n: usize) -> crossdiff::Result<f64> {
    let grid = Grid::new(1, n, 1.0)?;
    let g = Field::constant(grid, 1.0);
    let big_g = sine(grid, 1.0, 1.0);
    let gs = [(0.0, &g), (1.0, &g)];
    let bs = [(0.0, &big_g), (1.0, &big_g)];
    Ok(diagnostics::sobolev_ratio(&grid, &gs, &bs, 2.0)?.ratio)
}

fn sobolev() -> CliResult<Vec<Check>> {
    let coarse = sobolev_pair_ratio(64)?;
    let fine = sobolev_pair_ratio(128)?;
    let spread = (coarse / fine).max(fine / coarse);
    let mut finite = Check::at_most("ratio_finite_n64", coarse, f64::MAX);
    finite.pass &= coarse.is_finite() && fine.is_finite() && coarse > 0.0;
    Ok(vec![finite, Check::at_most("refinement_spread", spread, 2.0)])
}
