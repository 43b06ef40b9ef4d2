//! Method-of-lines time integration with blow-up detection.
//!
//! Two schemes are provided: forward Euler on the full right-hand side, and
//! an IMEX Euler step that treats `λ₀Δ` implicitly (one SPD solve per
//! species, matrix-free conjugate gradients) and everything else
//! explicitly. Neither scheme clamps or limits the solution.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::{self, CertificateReport, ModelSpec, RhsPart, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AutoTag {
    Auto,
}

/// Either a fixed step or `"auto"` (CFL-driven, halved as needed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeStep {
    Fixed(f64),
    #[serde(with = "auto_repr")]
    Auto,
}

mod auto_repr {
    use super::AutoTag;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        AutoTag::Auto.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        AutoTag::deserialize(d).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_dt")]
    pub dt: TimeStep,
    pub t_end: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_linsolve_tol")]
    pub linsolve_tol: f64,
    /// Defaults to ten times the node count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linsolve_maxiter: Option<usize>,
}

fn default_scheme() -> Scheme {
    Scheme::Explicit
}
fn default_dt() -> TimeStep {
    TimeStep::Auto
}
fn default_safety() -> f64 {
    0.4
}
fn default_blowup() -> f64 {
    1e8
}
fn default_record_every() -> usize {
    1
}
fn default_linsolve_tol() -> f64 {
    1e-10
}

impl SolverConfig {
    pub fn new(scheme: Scheme, t_end: f64) -> Self {
        Self {
            scheme,
            dt: TimeStep::Auto,
            t_end,
            safety: default_safety(),
            blowup_threshold: default_blowup(),
            record_every: default_record_every(),
            linsolve_tol: default_linsolve_tol(),
            linsolve_maxiter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety must lie in (0, 1], got {}", self.safety));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!("blowup_threshold must be positive, got {}", self.blowup_threshold));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if !(self.linsolve_tol > 0.0) {
            return bad(format!("linsolve_tol must be positive, got {}", self.linsolve_tol));
        }
        if self.linsolve_maxiter == Some(0) {
            return bad("linsolve_maxiter must be >= 1".into());
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }

    fn linsolve(&self, grid: &Grid) -> LinearSolve {
        LinearSolve {
            tol: self.linsolve_tol,
            maxiter: self.linsolve_maxiter.unwrap_or(10 * grid.node_count()),
        }
    }
}

/// Tolerance and iteration cap for the implicit solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolve {
    pub tol: f64,
    pub maxiter: usize,
}

impl LinearSolve {
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            tol: default_linsolve_tol(),
            maxiter: 10 * grid.node_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowUp { t: f64 },
    NumericalFailure { t: f64, reason: String },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowUp { .. } => "blow_up",
            Outcome::NumericalFailure { .. } => "numerical_failure",
        }
    }

    /// Time of blow-up or failure.
    pub fn event_time(&self) -> Option<f64> {
        match self {
            Outcome::Completed => None,
            Outcome::BlowUp { t } | Outcome::NumericalFailure { t, .. } => Some(*t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Recorded states, strictly increasing in time, starting at t = 0.
    pub snapshots: Vec<State>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }

    /// Space-time sup norm over all snapshots and species.
    pub fn sup_norm(&self) -> f64 {
        self.snapshots.iter().map(State::sup_norm).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.snapshots.iter().map(State::min).fold(f64::INFINITY, f64::min)
    }

    /// Series of one species as `(t, field)` pairs.
    pub fn species_series(&self, i: usize) -> Vec<(f64, &Field)> {
        self.snapshots.iter().map(|s| (s.t, &s.species[i])).collect()
    }
}

/// Norms of one species at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesNorms {
    pub min: f64,
    pub max: f64,
    pub sup: f64,
    pub l1: f64,
    pub l2: f64,
    pub grad_sup: f64,
}

impl SpeciesNorms {
    pub fn of(grid: &Grid, f: &Field) -> Result<Self> {
        Ok(Self {
            min: f.min(),
            max: f.max(),
            sup: f.sup_norm(),
            l1: grid.integrate_lp(f, 1.0, None)?,
            l2: grid.integrate_lp(f, 2.0, None)?,
            grad_sup: grid.gradient_sup(f)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub species: Vec<SpeciesNorms>,
}

impl NormRecord {
    pub fn of(state: &State) -> Result<Self> {
        let grid = *state.grid();
        Ok(Self {
            t: state.t,
            species: state
                .species
                .iter()
                .map(|f| SpeciesNorms::of(&grid, f))
                .collect::<Result<_>>()?,
        })
    }
}

/// Largest stable explicit step for the current state:
/// `safety · h² / (2 · dim · D_max)`, where `D_max` bounds the nodewise
/// effective diffusivity.
pub fn cfl_dt(model: &ModelSpec, grid: &Grid, state: &State, safety: f64) -> Result<f64> {
    let d_max = max_diffusivity(model, state)?;
    Ok(safety * grid.h() * grid.h() / (2.0 * grid.dim() as f64 * d_max))
}

/// `λ₀ + max_nodes [Ψ(L) + Ψ'(L) Σ_i |w_i u_i| + ε₀ (a + b) max(|u|, |v|)]`.
pub fn max_diffusivity(model: &ModelSpec, state: &State) -> Result<f64> {
    if !state.is_finite() {
        return Err(Error::NonFinite("cfl_dt on a non-finite state".into()));
    }
    let w = model.weights();
    let coupling = model.eps0 * model.combo.coeffs().iter().sum::<f64>();
    let mut u = Vec::with_capacity(w.len());
    let mut worst: f64 = 0.0;
    for j in 0..state.grid().node_count() {
        state.node_values(j, &mut u);
        let l: f64 = w.iter().zip(&u).map(|(a, x)| a * x).sum();
        let spread: f64 = w.iter().zip(&u).map(|(a, x)| (a * x).abs()).sum();
        let mut d = model.psi.eval(l) + model.psi.derivative(l) * spread;
        if coupling != 0.0 {
            d += coupling * u[0].abs().max(u[1].abs());
        }
        worst = worst.max(d);
    }
    let d_max = model.lambda0 + worst;
    if !d_max.is_finite() {
        return Err(Error::NonFinite("effective diffusivity overflow".into()));
    }
    Ok(d_max)
}

/// Forward Euler: `u + dt · rhs(u)`.
pub fn step_explicit(model: &ModelSpec, grid: &Grid, state: &State, dt: f64) -> Result<State> {
    check_dt(dt)?;
    let rhs = models::assemble_rhs(model, grid, state)?;
    let species = state
        .species
        .iter()
        .zip(&rhs)
        .enumerate()
        .map(|(i, (u, r))| {
            let next = u.axpby(1.0, r, dt)?;
            next.check_finite(&format!("species {i} after explicit step"))?;
            Ok(next)
        })
        .collect::<Result<Vec<_>>>()?;
    State::new(state.t + dt, species)
}

/// IMEX Euler: `(I − dt λ₀ Δ) u_new = u + dt · N(u)` per species, where
/// `N` is the right-hand side without `λ₀Δu`.
pub fn step_imex(model: &ModelSpec, grid: &Grid, state: &State, dt: f64, solve: LinearSolve) -> Result<State> {
    check_dt(dt)?;
    let explicit = models::assemble(model, grid, state, RhsPart::Nonlinear)?;
    let species = state
        .species
        .iter()
        .zip(&explicit)
        .enumerate()
        .map(|(i, (u, n))| {
            let b = u.axpby(1.0, n, dt)?;
            b.check_finite(&format!("species {i} explicit part"))?;
            let next = solve_shifted_laplacian(grid, dt * model.lambda0, &b, solve)?;
            next.check_finite(&format!("species {i} after implicit solve"))?;
            Ok(next)
        })
        .collect::<Result<Vec<_>>>()?;
    State::new(state.t + dt, species)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")))
    }
}

/// Solves `(I − κ Δ_h) x = b` by conjugate gradients; the operator is SPD
/// for κ ≥ 0. Converged when `‖r‖ ≤ tol ‖b‖`.
pub fn solve_shifted_laplacian(grid: &Grid, kappa: f64, b: &Field, solve: LinearSolve) -> Result<Field> {
    let n = grid.node_count();
    let rhs = b.values();
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(Field::zeros(*grid));
    }
    let apply = |x: &[f64], out: &mut [f64]| -> Result<()> {
        grid.laplacian_into(x, out)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - kappa * *o;
        }
        Ok(())
    };

    let mut x = rhs.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax)?;
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = solve.tol * b_norm;
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while rr.sqrt() > target {
        if iterations >= solve.maxiter {
            return Err(Error::LinearSolve {
                iterations,
                residual: rr.sqrt() / b_norm,
            });
        }
        apply(&p, &mut ap)?;
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::NonFinite("conjugate gradient residual".into()));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    Field::new(*grid, x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lattice points per axis used when certifying the reaction before a run.
fn certificate_samples(m: usize) -> usize {
    match m {
        1 => 201,
        2 => 41,
        3 => 13,
        _ => 7,
    }
}

/// Checks the model's growth certificate on the default box around `state0`.
pub fn certify(model: &ModelSpec, state0: &State) -> Result<CertificateReport> {
    let bounds = model.default_certificate_box(state0);
    models::verify_growth_certificate(model, &bounds, certificate_samples(model.m()))
}

/// Integrates from `state0` to `config.t_end`.
///
/// Blow-up (sup norm above `blowup_threshold`) and numerical failure
/// (non-finite values, linear solver breakdown) end the run early and are
/// reported in the trajectory outcome rather than as errors.
pub fn run(
    model: &ModelSpec,
    grid: &Grid,
    state0: &State,
    config: &SolverConfig,
) -> Result<(Trajectory, DiagnosticsReport)> {
    let certificate = certify(model, state0)?;
    if !certificate.accepted() {
        return Err(Error::CertificateFailed {
            worst_margin: certificate.worst_margin,
            worst_point: certificate.worst_point.clone(),
        });
    }
    let (trajectory, norms) = integrate(model, grid, state0, config, |_, _, _| Ok(()))?;
    let mut report = DiagnosticsReport::new(norms);
    report.certificate = Some(certificate);
    Ok((trajectory, report))
}

/// Core stepping loop shared by [`run`] and [`co_solve_w`]. `observe` sees
/// `(old, new, dt)` after every accepted step.
fn integrate(
    model: &ModelSpec,
    grid: &Grid,
    state0: &State,
    config: &SolverConfig,
    mut observe: impl FnMut(&State, &State, f64) -> Result<()>,
) -> Result<(Trajectory, Vec<NormRecord>)> {
    config.validate()?;
    model.validate()?;
    if state0.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if state0.m() != model.m() {
        return Err(Error::ShapeMismatch {
            expected: model.m(),
            found: state0.m(),
        });
    }
    for (i, f) in state0.species.iter().enumerate() {
        f.check_finite(&format!("initial species {i}"))?;
    }

    let solve = config.linsolve(grid);
    let auto = matches!(config.dt, TimeStep::Auto);
    let mut dt = match config.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => cfl_dt(model, grid, state0, config.safety)?,
    };

    let mut state = State::new(0.0, state0.species.clone())?;
    let mut snapshots = vec![state.clone()];
    let mut norms = vec![NormRecord::of(&state)?];
    let mut steps = 0usize;
    let t_end = config.t_end;

    let outcome = loop {
        if state.t >= t_end {
            break Outcome::Completed;
        }
        if auto {
            let bound = cfl_dt(model, grid, &state, config.safety)?;
            while bound < dt {
                dt *= 0.5;
            }
        }
        // Land exactly on t_end instead of leaving a sliver step.
        let remaining = t_end - state.t;
        let (h, last) = if dt >= remaining * (1.0 - 1e-9) {
            (remaining, true)
        } else {
            (dt, false)
        };
        let t_new = if last { t_end } else { state.t + h };

        let stepped = match config.scheme {
            Scheme::Explicit => step_explicit(model, grid, &state, h),
            Scheme::Imex => step_imex(model, grid, &state, h, solve),
        };
        let mut next = match stepped {
            Ok(s) => s,
            Err(e @ (Error::NonFinite(_) | Error::LinearSolve { .. })) => {
                break Outcome::NumericalFailure {
                    t: t_new,
                    reason: e.to_string(),
                };
            }
            Err(e) => return Err(e),
        };
        next.t = t_new;
        observe(&state, &next, h)?;
        steps += 1;

        let sup = next.sup_norm();
        let blew_up = sup > config.blowup_threshold;
        norms.push(NormRecord::of(&next)?);
        if blew_up || last || steps.is_multiple_of(config.record_every) {
            snapshots.push(next.clone());
        }
        state = next;
        if blew_up {
            break Outcome::BlowUp { t: t_new };
        }
    };

    Ok((Trajectory { snapshots, outcome }, norms))
}

/// Result of integrating a system alongside its scalar W-equation.
#[derive(Debug, Clone)]
pub struct WCoSolve {
    pub trajectory: Trajectory,
    /// W from the scalar equation at every snapshot time.
    pub w_series: Vec<(f64, Field)>,
    /// Largest `sup|L(u) − W| / sup|W|` over the snapshots.
    pub max_rel_diff: f64,
}

/// Steps the system and, with the same scheme and step sequence, the scalar
/// equation `W_t = λ₀ΔW + Δ(Ψ(W)W) + f(u)` from `W₀ = L(u₀)`, where
/// `f(u) = Σ w_i u_i g_i(u)` is taken from the co-evolving system.
pub fn co_solve_w(model: &ModelSpec, grid: &Grid, state0: &State, config: &SolverConfig) -> Result<WCoSolve> {
    let weights = model.weights();
    let mut w = state0.combine(&weights)?;
    let solve = config.linsolve(grid);
    let mut w_by_time: Vec<(f64, Field)> = vec![(0.0, w.clone())];
    let (trajectory, _) = integrate(model, grid, state0, config, |old, new, dt| {
        let forcing = models::combined_reaction(model, old)?;
        w = match config.scheme {
            Scheme::Explicit => {
                let rhs = models::w_rhs(model, grid, &w, &forcing, RhsPart::Full)?;
                w.axpby(1.0, &rhs, dt)?
            }
            Scheme::Imex => {
                let rhs = models::w_rhs(model, grid, &w, &forcing, RhsPart::Nonlinear)?;
                let b = w.axpby(1.0, &rhs, dt)?;
                solve_shifted_laplacian(grid, dt * model.lambda0, &b, solve)?
            }
        };
        w_by_time.push((new.t, w.clone()));
        Ok(())
    })?;

    // Keep W only at recorded snapshot times.
    let mut w_series = Vec::with_capacity(trajectory.snapshots.len());
    let mut max_rel_diff: f64 = 0.0;
    let mut cursor = 0;
    for snap in &trajectory.snapshots {
        while w_by_time[cursor].0 < snap.t {
            cursor += 1;
        }
        let w_snap = w_by_time[cursor].1.clone();
        let from_system = snap.combine(&weights)?;
        let diff = from_system.axpby(1.0, &w_snap, -1.0)?.sup_norm();
        let scale = w_snap.sup_norm();
        if scale > 0.0 {
            max_rel_diff = max_rel_diff.max(diff / scale);
        } else {
            max_rel_diff = max_rel_diff.max(diff);
        }
        w_series.push((snap.t, w_snap));
    }
    Ok(WCoSolve {
        trajectory,
        w_series,
        max_rel_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearCombo, PsiSpec, ReactionKind, ReactionSpec, Variant};
    use std::f64::consts::PI;

    fn heat(lambda0: f64) -> ModelSpec {
        ModelSpec {
            variant: Variant::Scalar,
            lambda0,
            psi: PsiSpec::zero(),
            combo: LinearCombo::new(vec![1.0]).unwrap(),
            reaction: ReactionSpec::none(1),
            eps0: 0.0,
            abs_v: false,
        }
    }

    fn single(f: Field) -> State {
        State::new(0.0, vec![f]).unwrap()
    }

    #[test]
    fn cfl_examples() {
        let g1 = Grid::new(1, 9, 1.0).unwrap();
        let s1 = single(Field::constant(g1, 1.0));
        let dt = cfl_dt(&heat(1.0), &g1, &s1, 0.4).unwrap();
        assert!((dt - 0.002).abs() < 1e-15);
        let dt2 = cfl_dt(&heat(2.0), &g1, &s1, 0.4).unwrap();
        assert!((dt2 - dt / 2.0).abs() < 1e-15);

        let g2 = Grid::new(2, 9, 1.0).unwrap();
        let s2 = single(Field::constant(g2, 1.0));
        let dt = cfl_dt(&heat(1.0), &g2, &s2, 0.4).unwrap();
        assert!((dt - 0.001).abs() < 1e-15);

        let bad = single(Field::new(g1, vec![f64::NAN; 9]).unwrap());
        assert!(cfl_dt(&heat(1.0), &g1, &bad, 0.4).is_err());
    }

    #[test]
    fn explicit_fixed_point_and_spike() {
        let g = Grid::new(1, 7, 2.0).unwrap();
        let zero = single(Field::zeros(g));
        let next = step_explicit(&heat(1.0), &g, &zero, 0.01).unwrap();
        assert_eq!(next.species[0], zero.species[0]);
        assert!((next.t - 0.01).abs() < 1e-15);

        let mut v = vec![0.0; 7];
        v[3] = 1.0;
        let spike = single(Field::new(g, v).unwrap());
        let next = step_explicit(&heat(0.5), &g, &spike, 0.01).unwrap();
        let expect = [0.0, 0.0, 0.08, 1.0 - 0.16, 0.08, 0.0, 0.0];
        for (a, b) in next.species[0].values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(step_explicit(&heat(1.0), &g, &zero, 0.0).is_err());
    }

    #[test]
    fn explicit_heat_matches_kernel_after_hundred_steps() {
        let g = Grid::new(1, 128, 1.0).unwrap();
        let s0 = single(Field::from_fn(g, |x, _| (PI * x).sin()));
        let model = heat(1.0);
        let dt = cfl_dt(&model, &g, &s0, 0.4).unwrap();
        let mut s = s0;
        for _ in 0..100 {
            s = step_explicit(&model, &g, &s, dt).unwrap();
        }
        let decay = (-PI * PI * s.t).exp();
        let err = s.species[0]
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - decay * (PI * g.coords(i)[0]).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "sup error {err}");
    }

    #[test]
    fn imex_heat_amplification_factor() {
        let g = Grid::new(1, 63, 1.0).unwrap();
        let s0 = single(Field::from_fn(g, |x, _| (PI * x).sin()));
        let (lambda0, dt) = (0.7, 0.01);
        let next = step_imex(&heat(lambda0), &g, &s0, dt, LinearSolve::for_grid(&g)).unwrap();
        let h = g.h();
        let mu1 = 2.0 / (h * h) * (1.0 - (PI * h).cos());
        let factor = 1.0 / (1.0 + dt * lambda0 * mu1);
        for (a, b) in next.species[0].values().iter().zip(s0.species[0].values()) {
            assert!((a - factor * b).abs() < 1e-9);
        }
    }

    #[test]
    fn imex_approaches_explicit_quadratically() {
        let g = Grid::new(1, 31, 1.0).unwrap();
        let model = ModelSpec {
            psi: PsiSpec::identity(),
            ..heat(1.0)
        };
        let s0 = single(Field::from_fn(g, |x, _| (PI * x).sin()));
        let gap = |dt: f64| {
            let a = step_explicit(&model, &g, &s0, dt).unwrap();
            let b = step_imex(
                &model,
                &g,
                &s0,
                dt,
                LinearSolve {
                    tol: 1e-14,
                    maxiter: 10_000,
                },
            )
            .unwrap();
            a.species[0].axpby(1.0, &b.species[0], -1.0).unwrap().sup_norm()
        };
        let (g1, g2) = (gap(1e-5), gap(5e-6));
        let ratio = g1 / g2;
        assert!((3.5..4.5).contains(&ratio), "gap ratio {ratio}");
    }

    #[test]
    fn imex_zero_stays_zero_and_reports_nonconvergence() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let zero = single(Field::zeros(g));
        let next = step_imex(&heat(1.0), &g, &zero, 0.1, LinearSolve::for_grid(&g)).unwrap();
        assert!(next.species[0].values().iter().all(|&x| x == 0.0));

        let bump = single(Field::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()));
        let starved = LinearSolve { tol: 1e-14, maxiter: 1 };
        let rough = single(Field::from_fn(g, |x, y| ((13.0 * x + 7.0 * y) * 10.0).sin().abs()));
        assert!(step_imex(&heat(1.0), &g, &bump, 0.1, LinearSolve::for_grid(&g)).is_ok());
        assert!(matches!(
            step_imex(&heat(1.0), &g, &rough, 0.1, starved),
            Err(Error::LinearSolve { .. })
        ));
    }

    #[test]
    fn run_records_and_completes() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let s0 = single(Field::from_fn(g, |x, _| (PI * x).sin()));
        let mut cfg = SolverConfig::new(Scheme::Explicit, 0.05);
        cfg.record_every = 25;
        let (traj, report) = run(&heat(1.0), &g, &s0, &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        assert_eq!(traj.last().t, 0.05);
        let times = traj.times();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(times[0], 0.0);
        let l2: Vec<f64> = report.norms.iter().map(|r| r.species[0].l2).collect();
        assert!(l2.windows(2).all(|w| w[1] < w[0]));
        let steps = report.norms.len() - 1;
        let expected = 1 + steps / 25 + usize::from(steps % 25 != 0);
        assert_eq!(traj.snapshots.len(), expected);
    }

    #[test]
    fn run_rejects_bad_config() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let s0 = single(Field::zeros(g));
        let mut cfg = SolverConfig::new(Scheme::Explicit, 0.0);
        assert!(run(&heat(1.0), &g, &s0, &cfg).is_err());
        cfg.t_end = 1.0;
        cfg.safety = 1.5;
        assert!(run(&heat(1.0), &g, &s0, &cfg).is_err());
        cfg.safety = 0.4;
        cfg.dt = TimeStep::Fixed(-1.0);
        assert!(run(&heat(1.0), &g, &s0, &cfg).is_err());
    }

    #[test]
    fn nonfinite_step_is_numerical_failure() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let s0 = single(Field::constant(g, 1.0));
        let mut cfg = SolverConfig::new(Scheme::Explicit, 500.0);
        // Far beyond the stability limit: the iterates overflow.
        cfg.dt = TimeStep::Fixed(0.5);
        cfg.blowup_threshold = f64::INFINITY;
        let (traj, _) = run(&heat(1.0), &g, &s0, &cfg).unwrap();
        assert!(matches!(traj.outcome, Outcome::NumericalFailure { .. }), "{:?}", traj.outcome);
    }

    fn superlinear(c0: f64) -> ModelSpec {
        ModelSpec {
            variant: Variant::Scalar,
            lambda0: 1.0,
            psi: PsiSpec::power(2.0),
            combo: LinearCombo::new(vec![1.0]).unwrap(),
            reaction: ReactionSpec::new(
                ReactionKind::PsiBounded {
                    k: vec![0.0],
                    c0,
                    sign: vec![1.0],
                },
                None,
            )
            .unwrap(),
            eps0: 0.0,
            abs_v: false,
        }
    }

    #[test]
    fn superlinear_reaction_blows_up_in_finite_time() {
        let g = Grid::new(1, 31, 1.0).unwrap();
        let s0 = single(Field::from_fn(g, |x, _| 4.0 * (PI * x).sin()));
        let cfg = SolverConfig::new(Scheme::Explicit, 1.0);
        let (traj, _) = run(&superlinear(200.0), &g, &s0, &cfg).unwrap();
        match traj.outcome {
            Outcome::BlowUp { t } => assert!(t > 0.0 && t < 1.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
        assert!(traj.last().sup_norm() > 1e8);
    }

    #[test]
    fn blowup_time_monotone_in_threshold() {
        let g = Grid::new(1, 31, 1.0).unwrap();
        let s0 = single(Field::from_fn(g, |x, _| 4.0 * (PI * x).sin()));
        let mut last = 0.0;
        for threshold in [1e3, 1e5, 1e8] {
            let mut cfg = SolverConfig::new(Scheme::Explicit, 1.0);
            cfg.blowup_threshold = threshold;
            let (traj, _) = run(&superlinear(200.0), &g, &s0, &cfg).unwrap();
            let t = traj.outcome.event_time().unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn timestep_json_forms() {
        let auto: TimeStep = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, TimeStep::Auto);
        let fixed: TimeStep = serde_json::from_str("0.001").unwrap();
        assert_eq!(fixed, TimeStep::Fixed(0.001));
        assert!(serde_json::from_str::<TimeStep>("\"fast\"").is_err());
        assert_eq!(serde_json::to_string(&TimeStep::Auto).unwrap(), "\"auto\"");
    }
}
