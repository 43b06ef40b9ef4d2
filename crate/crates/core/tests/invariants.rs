use std::f64::consts::PI;

use crossdiff::diagnostics;
use crossdiff::models::State;
use crossdiff::solver::{self, Scheme, SolverConfig, TimeStep};
use crossdiff::{Field, Grid, ModelSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn model(value: serde_json::Value) -> ModelSpec {
    serde_json::from_value(value).unwrap()
}

fn sine(grid: Grid, k: f64) -> Field {
    Field::from_fn(grid, |x, _| (k * PI * x).sin())
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
    let v = (0..grid.node_count()).map(|_| rng.gen_range(lo..hi)).collect();
    Field::new(grid, v).unwrap()
}

fn fixed(scheme: Scheme, t_end: f64, dt: f64) -> SolverConfig {
    let mut c = SolverConfig::new(scheme, t_end);
    c.dt = TimeStep::Fixed(dt);
    c.record_every = usize::MAX;
    c
}

#[test]
fn sine_modes_are_discrete_eigenfunctions() {
    let grid = Grid::new(1, 50, 1.0).unwrap();
    let h = grid.h();
    for k in 1..=3 {
        let kf = k as f64;
        let mu = 2.0 / (h * h) * (1.0 - (kf * PI * h).cos());
        let phi = sine(grid, kf);
        let lap = grid.laplacian(&phi).unwrap();
        for (l, p) in lap.values().iter().zip(phi.values()) {
            assert!((l + mu * p).abs() <= 1e-10 * mu, "k = {k}");
        }
    }
}

#[test]
fn product_modes_are_eigenfunctions_in_2d() {
    let grid = Grid::new(2, 20, 2.0).unwrap();
    let h = grid.h();
    let mu = |k: f64| 2.0 / (h * h) * (1.0 - (k * PI * h / 2.0).cos());
    let phi = Field::from_fn(grid, |x, y| (PI * x / 2.0).sin() * (3.0 * PI * y / 2.0).sin());
    let lap = grid.laplacian(&phi).unwrap();
    let m = mu(1.0) + mu(3.0);
    for (l, p) in lap.values().iter().zip(phi.values()) {
        assert!((l + m * p).abs() <= 1e-10 * m);
    }
}

#[test]
fn laplacian_is_second_order() {
    let err = |n: usize| {
        let grid = Grid::new(1, n, 1.0).unwrap();
        let f = sine(grid, 1.0);
        grid.laplacian(&f).unwrap().axpby(1.0, &f, PI * PI).unwrap().sup_norm()
    };
    let ratio = err(31) / err(63);
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

proptest! {
    #[test]
    fn laplacian_is_linear(seed in any::<u64>(), a in -5.0..5.0f64, b in -5.0..5.0f64, dim in 1usize..=2) {
        let grid = Grid::new(dim, 9, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid, &mut rng, -1.0, 1.0);
        let g = random_field(grid, &mut rng, -1.0, 1.0);
        let lhs = grid.laplacian(&f.axpby(a, &g, b).unwrap()).unwrap();
        let rhs = grid.laplacian(&f).unwrap().axpby(a, &grid.laplacian(&g).unwrap(), b).unwrap();
        let scale = 1.0 / (grid.h() * grid.h());
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale * 10.0);
        }
    }

    #[test]
    fn lp_norms_grow_with_p_on_sub_unit_domain(seed in any::<u64>(), p in 1.0..20.0f64, dp in 0.0..20.0f64) {
        // Interior cells cover n/(n+1) < 1 of the unit interval.
        let grid = Grid::new(1, 17, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(grid, &mut rng, -3.0, 3.0);
        let lo = grid.integrate_lp(&f, p, None).unwrap();
        let hi = grid.integrate_lp(&f, p + dp, None).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
        prop_assert!(hi <= f.sup_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn explicit_steps_keep_equal_diffusion_nonnegative(seed in any::<u64>(), c0 in 0.0..0.05f64) {
        let m = model(json!({
            "variant": "equal_diffusion", "lambda0": 1.0, "psi": {"alpha": 1.0},
            "combo": [1.0, 1.0],
            "reaction": {"kind": "affine", "k": [1.0, 0.5], "b": [[-c0, 0.0], [0.0, -c0]]}
        }));
        let grid = Grid::new(1, 24, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = State::new(0.0, vec![
            random_field(grid, &mut rng, 0.0, 1.0),
            random_field(grid, &mut rng, 0.0, 1.0),
        ]).unwrap();
        let (traj, report) = solver::run(&m, &grid, &s0, &SolverConfig::new(Scheme::Explicit, 0.005)).unwrap();
        prop_assert!(traj.outcome.is_completed());
        prop_assert!(report.min() >= -1e-10 * (1.0 + report.sup()));
    }
}

#[test]
fn explicit_and_imex_agree_to_first_order() {
    let m = model(json!({
        "variant": "scalar", "lambda0": 1.0, "psi": {"alpha": 1.0},
        "combo": [1.0], "reaction": {"kind": "constant", "k": [0.0]}
    }));
    let grid = Grid::new(1, 32, 1.0).unwrap();
    let s0 = State::new(0.0, vec![sine(grid, 1.0)]).unwrap();
    let gap = |dt: f64| {
        let run = |scheme| {
            let (traj, _) = solver::run(&m, &grid, &s0, &fixed(scheme, 0.01, dt)).unwrap();
            traj.last().species[0].clone()
        };
        run(Scheme::Explicit).axpby(1.0, &run(Scheme::Imex), -1.0).unwrap().sup_norm()
    };
    let ratio = gap(1e-4) / gap(5e-5);
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn mass_is_nonincreasing_without_reaction() {
    let m = model(json!({
        "variant": "equal_diffusion", "lambda0": 0.5, "psi": {"alpha": 1.0, "beta": 1.0, "k": 2.0},
        "combo": [1.0, 2.0], "reaction": {"kind": "constant", "k": [0.0, 0.0]}
    }));
    let grid = Grid::new(2, 12, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = State::new(0.0, vec![
        random_field(grid, &mut rng, 0.0, 1.0),
        random_field(grid, &mut rng, 0.0, 1.0),
    ])
    .unwrap();
    for _ in 0..200 {
        let dt = solver::cfl_dt(&m, &grid, &state, 0.4).unwrap();
        let next = solver::step_explicit(&m, &grid, &state, dt).unwrap();
        for (a, b) in state.species.iter().zip(&next.species) {
            assert!(b.integral() <= a.integral() * (1.0 + 1e-14));
        }
        state = next;
    }
}

#[test]
fn co_solved_w_tracks_the_combination() {
    for (variant, eps0) in [("yw", 0.05), ("ywz", 0.8)] {
        let m = model(json!({
            "variant": variant, "lambda0": 1.0, "psi": {"alpha": 1.0, "beta": 0.5, "k": 2.0},
            "combo": [2.0, 1.5],
            "reaction": {"kind": "psi_bounded", "k": [0.3, 0.3], "c0": 0.02, "sign": [-1.0, -1.0]},
            "eps0": eps0
        }));
        let grid = Grid::new(1, 40, 1.0).unwrap();
        let s0 = State::new(0.0, vec![
            sine(grid, 1.0),
            Field::from_fn(grid, |x, _| 0.5 * (-(x - 0.3).powi(2) / 0.01).exp()),
        ])
        .unwrap();
        let mut config = SolverConfig::new(Scheme::Explicit, 0.02);
        config.record_every = 10;
        let co = solver::co_solve_w(&m, &grid, &s0, &config).unwrap();
        assert!(co.trajectory.outcome.is_completed());
        assert!(co.max_rel_diff <= 1e-10, "{variant}: {}", co.max_rel_diff);
    }
}

#[test]
fn gronwall_constant_survives_subsampling() {
    let m = model(json!({
        "variant": "scalar", "lambda0": 1.0, "psi": {"alpha": 1.0},
        "combo": [1.0], "reaction": {"kind": "psi_bounded", "k": [0.0], "c0": 0.5}
    }));
    let grid = Grid::new(1, 48, 1.0).unwrap();
    let s0 = State::new(0.0, vec![sine(grid, 1.0)]).unwrap();
    let (_, report) = solver::run(&m, &grid, &s0, &SolverConfig::new(Scheme::Explicit, 0.1)).unwrap();
    let series = report.l2_series(0);
    let full = diagnostics::gronwall_fit(&series).unwrap();
    let half: Vec<_> = series.iter().step_by(2).copied().collect();
    let sub = diagnostics::gronwall_fit(&half).unwrap();
    assert!((full - sub).abs() <= 0.05 * full.abs(), "{full} vs {sub}");
    let (t0, y0) = series[0];
    for (t, y) in &series {
        assert!(*y <= y0 * (full * (t - t0)).exp() * (1.0 + 1e-12));
    }
}

#[test]
fn multi_species_snapshot_round_trip() {
    let grid = Grid::new(2, 5, 3.0).unwrap();
    let a = Field::from_fn(grid, |x, y| x * y - 1.0);
    let b = Field::from_fn(grid, |x, y| (x - y).exp());
    let mut buf = Vec::new();
    a.write_snapshot(0.25, &mut buf).unwrap();
    b.write_snapshot(0.25, &mut buf).unwrap();
    let blocks = Field::read_snapshots(buf.as_slice()).unwrap();
    assert_eq!(blocks.len(), 2);
    for ((f, t), orig) in blocks.iter().zip([&a, &b]) {
        assert_eq!(*t, 0.25);
        assert_eq!(f.values(), orig.values());
        assert!((f.grid().length() - 3.0).abs() < 1e-12);
    }
    assert!(Field::read_snapshot(buf.as_slice()).is_err());
}
