//! Numerical verifiers built on recorded trajectories: weighted space-time
//! norm ladders, the parabolic Sobolev ratio, Grönwall constants, growth
//! comparability of `F(v, p)`, W-reduction residuals and sign-split
//! statistics.
//!
//! Space-time integrals use the trapezoid rule over snapshot times and the
//! midpoint rule in space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::{self, CertificateReport, ModelSpec, PsiSpec};
use crate::solver::{NormRecord, Trajectory};

/// The effective diffusivity `λ(v) = λ₀ + Ψ(v) + Ψ'(v) v` and the measure
/// `dμ = λ(v) dz` it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuMeasure {
    pub lambda0: f64,
    pub psi: PsiSpec,
}

impl MuMeasure {
    pub fn new(lambda0: f64, psi: PsiSpec) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda0 must be positive, got {lambda0}")));
        }
        psi.validate()?;
        Ok(Self { lambda0, psi })
    }

    pub fn of_model(model: &ModelSpec) -> Self {
        Self {
            lambda0: model.lambda0,
            psi: model.psi,
        }
    }

    pub fn lambda(&self, v: f64) -> f64 {
        self.lambda0 + self.psi.eval(v) + self.psi.derivative(v) * v
    }

    /// `F(v, p) = ∫₀^v λ^{1/2}(s) |s|^{p−1} ds`.
    pub fn f_of_vp(&self, v: f64, p: f64) -> Result<f64> {
        if self.psi.alpha == 0.0 && self.psi.beta == 0.0 {
            check_p(p)?;
            return Ok(self.lambda0.sqrt() * v.signum() * v.abs().powf(p) / p);
        }
        f_integral(|s| self.lambda(s), v, p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")))
    }
}

/// `∫₀^v λ(s)^{1/2} |s|^{p−1} ds` for an arbitrary nonnegative `λ`, by
/// adaptive Gauss–Kronrod quadrature to relative tolerance 1e-10.
pub fn f_integral(lambda: impl Fn(f64) -> f64, v: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    let integrand = |s: f64| lambda(s).max(0.0).sqrt() * s.abs().powf(p - 1.0);
    let (lo, hi, sign) = if v > 0.0 { (0.0, v, 1.0) } else { (v, 0.0, -1.0) };
    Ok(sign * adaptive_gauss_kronrod(integrand, lo, hi, 1e-10, 4000)?)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss 7-point weights for the odd-indexed Kronrod nodes (and the center).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = K15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = r * GK_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += K15_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

/// Globally adaptive G7/K15 quadrature: bisects the interval with the
/// largest error estimate until the total estimate drops below
/// `rel_tol · |integral|`.
pub fn adaptive_gauss_kronrod(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let (value, err) = gk15(&f, a, b);
    let mut parts = vec![(a, b, value, err)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if total_err <= rel_tol * total.abs() || total_err <= f64::MIN_POSITIVE {
            return Ok(total);
        }
        if parts.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} above target after {max_intervals} subintervals"
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::Quadrature(format!("interval [{lo}, {hi}] cannot be bisected further")));
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Smallest `F(v,p) p / (λ^{1/2}(v) v^p)` over the sampled grid.
    pub c_low: f64,
    pub c_high: f64,
    /// Both bounds positive and finite.
    pub comparable: bool,
}

/// Two-sided comparability of `F(v, p)` with `p^{-1} λ^{1/2}(v) v^p`.
pub fn f_growth_check(mu: &MuMeasure, p_list: &[f64], v_list: &[f64]) -> Result<GrowthReport> {
    if p_list.is_empty() || v_list.is_empty() {
        return Err(Error::InvalidParameter("p and v lists must be nonempty".into()));
    }
    if let Some(v) = v_list.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("v samples must be positive, found {v}")));
    }
    let mut c_low = f64::INFINITY;
    let mut c_high: f64 = 0.0;
    for &p in p_list {
        for &v in v_list {
            let f = mu.f_of_vp(v, p)?;
            let ratio = f * p / (mu.lambda(v).sqrt() * v.powf(p));
            c_low = c_low.min(ratio);
            c_high = c_high.max(ratio);
        }
    }
    Ok(GrowthReport {
        c_low,
        c_high,
        comparable: c_low > 0.0 && c_high.is_finite(),
    })
}

/// Trapezoid weights in time; a single sample gets weight 1.
fn time_weights(times: &[f64]) -> Vec<f64> {
    let k = times.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; k];
    for i in 0..k - 1 {
        let dt = times[i + 1] - times[i];
        w[i] += 0.5 * dt;
        w[i + 1] += 0.5 * dt;
    }
    w
}

/// `∫∫ f dx dt` over a field series, `f` evaluated nodewise.
fn space_time_sum<'a>(series: impl IntoIterator<Item = (f64, &'a [f64])>, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    series
        .into_iter()
        .map(|(t, vals)| (t, vals.iter().map(|&x| f(x)).sum::<f64>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub species: usize,
    /// Exponent `p` of each rung; the norm is taken in `L^{2p}`.
    pub p_values: Vec<f64>,
    /// `‖v‖_{L^{2p}(Q,dμ)}`.
    pub norms: Vec<f64>,
    /// Same norms under the normalized measure `μ / μ(Q)`.
    pub normalized_norms: Vec<f64>,
    /// Successive ratios of normalized norms.
    pub ratios: Vec<f64>,
    pub sup: f64,
    /// `|last normalized norm − sup| / sup`.
    pub limit_rel_gap: f64,
    /// `μ(Q)`, reported rather than asserted.
    pub mu_total: f64,
    pub q: f64,
    pub q_conjugate: f64,
    pub gamma: f64,
    pub gamma0: f64,
}

/// `q` default: `N/2 + 2`.
pub fn default_q(dim: usize) -> f64 {
    dim as f64 / 2.0 + 2.0
}

/// Weighted `L^{2p}(Q, dμ)` norms of one species on the exponent ladder
/// `2p = γ₀^i`, capped with a final rung at `2p = 2 p_max`.
pub fn moser_ladder(
    traj: &Trajectory,
    species: usize,
    mu: &MuMeasure,
    p_max: u32,
    q: Option<f64>,
) -> Result<LadderReport> {
    if p_max == 0 {
        return Err(Error::InvalidParameter("p_max must be >= 1".into()));
    }
    if !traj.outcome.is_completed() {
        return Err(Error::InvalidParameter(format!(
            "moser ladder needs a completed trajectory, got {}",
            traj.outcome.label()
        )));
    }
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    if species >= first.m() {
        return Err(Error::InvalidParameter(format!("no species {species}")));
    }
    if traj.snapshots.iter().any(|s| !s.species[species].is_finite()) {
        return Err(Error::NonFinite("unbounded field in ladder input".into()));
    }
    let grid = *first.grid();
    let dim = grid.dim() as f64;
    let q = q.unwrap_or_else(|| default_q(grid.dim()));
    if !(q > dim / 2.0 + 1.0) {
        return Err(Error::InvalidParameter(format!("q must exceed N/2 + 1, got {q}")));
    }
    let q_conjugate = q / (q - 1.0);
    let gamma = 1.0 + 2.0 / dim;
    let gamma0 = gamma / q_conjugate;

    let mut exponents = Vec::new();
    let top = 2.0 * p_max as f64;
    let mut r = 1.0;
    while r < top {
        exponents.push(r);
        r *= gamma0;
    }
    exponents.push(top);

    let times = traj.times();
    let tw = time_weights(&times);
    let cell = grid.cell_volume();
    let series: Vec<&[f64]> = traj.snapshots.iter().map(|s| s.species[species].values()).collect();
    let sup = series.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
        series
            .iter()
            .zip(&tw)
            .map(|(vals, w)| w * vals.iter().map(|&x| f(x)).sum::<f64>())
            .sum::<f64>()
            * cell
    };
    let mu_total = integrate(&|x| mu.lambda(x));

    let mut norms = Vec::with_capacity(exponents.len());
    let mut normalized = Vec::with_capacity(exponents.len());
    for &r in &exponents {
        let (norm, norm_bar) = if sup == 0.0 {
            (0.0, 0.0)
        } else {
            let scaled = integrate(&|x| mu.lambda(x) * (x.abs() / sup).powf(r));
            (sup * scaled.powf(1.0 / r), sup * (scaled / mu_total).powf(1.0 / r))
        };
        norms.push(norm);
        normalized.push(norm_bar);
    }
    let ratios = normalized.windows(2).map(|w| w[1] / w[0]).collect();
    let last = *normalized.last().expect("at least one rung");
    let limit_rel_gap = if sup > 0.0 { (last - sup).abs() / sup } else { 0.0 };
    Ok(LadderReport {
        species,
        p_values: exponents.iter().map(|r| r / 2.0).collect(),
        norms,
        normalized_norms: normalized,
        ratios,
        sup,
        limit_rel_gap,
        mu_total,
        q,
        q_conjugate,
        gamma,
        gamma0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub p: f64,
    pub r_star: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `r* = p/N` when `N > p`, otherwise `1/2`.
pub fn r_star(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if n > p {
        p / n
    } else {
        0.5
    }
}

/// `∫∫ g^{r*} G^p` divided by `sup_t(∫ g)^{r*} ∫∫ (|DG|^p + G^p)`.
/// The two series must share their time stamps. `0/0` is reported as 0.
pub fn sobolev_ratio(grid: &Grid, g: &[(f64, &Field)], big_g: &[(f64, &Field)], p: f64) -> Result<SobolevReport> {
    check_p(p)?;
    if g.is_empty() || g.len() != big_g.len() {
        return Err(Error::InvalidParameter("g and G series must be nonempty and aligned".into()));
    }
    for ((tg, fg), (tb, fb)) in g.iter().zip(big_g) {
        if tg != tb {
            return Err(Error::InvalidParameter(format!("time stamps differ: {tg} vs {tb}")));
        }
        if fg.grid() != grid || fb.grid() != grid {
            return Err(Error::GridMismatch);
        }
        if let Some(bad) = fg.values().iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("g must be nonnegative, found {bad}")));
        }
    }
    let rs = r_star(p, grid.dim());
    let times: Vec<f64> = g.iter().map(|(t, _)| *t).collect();
    let tw = time_weights(&times);
    let cell = grid.cell_volume();

    let mut lhs = 0.0;
    let mut energy = 0.0;
    let mut mass_sup: f64 = 0.0;
    for (((_, fg), (_, fb)), w) in g.iter().zip(big_g).zip(&tw) {
        let grad = grid.gradient_magnitude(fb)?;
        let l: f64 = fg
            .values()
            .iter()
            .zip(fb.values())
            .map(|(a, b)| a.powf(rs) * b.abs().powf(p))
            .sum();
        let e: f64 = grad
            .values()
            .iter()
            .zip(fb.values())
            .map(|(d, b)| d.powf(p) + b.abs().powf(p))
            .sum();
        lhs += w * l * cell;
        energy += w * e * cell;
        mass_sup = mass_sup.max(fg.integral());
    }
    let rhs = mass_sup.powf(rs) * energy;
    let ratio = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    };
    Ok(SobolevReport {
        p,
        r_star: rs,
        lhs,
        rhs,
        ratio,
    })
}

/// Smallest `C` with `y(t) ≤ y(t₀) e^{C (t − t₀)}` at every sample.
/// A single sample gives 0.
pub fn gronwall_fit(series: &[(f64, f64)]) -> Result<f64> {
    let (t0, y0) = *series
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty norm series".into()))?;
    if let Some((t, y)) = series.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::InvalidParameter(format!("series value must be positive, found {y} at t = {t}")));
    }
    let ln0 = y0.ln();
    let c = series
        .iter()
        .filter(|(t, _)| *t > t0)
        .map(|(t, y)| (y.ln() - ln0) / (t - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if c == f64::NEG_INFINITY { 0.0 } else { c })
}

/// Least-squares slope of `ln y` against `t`, reported alongside the
/// envelope constant.
pub fn log_slope(series: &[(f64, f64)]) -> Option<f64> {
    if series.len() < 2 || series.iter().any(|(_, y)| !(*y > 0.0)) {
        return None;
    }
    let n = series.len() as f64;
    let mt = series.iter().map(|p| p.0).sum::<f64>() / n;
    let my = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = series.iter().map(|(t, y)| (t - mt) * (y.ln() - my)).sum();
    let sxx: f64 = series.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub species: usize,
    pub c_fit: f64,
    pub ls_slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub residual: f64,
}

/// Residual of the discrete W-reduction at every snapshot, using the
/// model's own weights.
pub fn w_reduction_residual(model: &ModelSpec, grid: &Grid, traj: &Trajectory) -> Result<Vec<ResidualPoint>> {
    w_reduction_residual_with(model, grid, traj, &model.weights())
}

/// W-reduction residual for arbitrary combination weights:
/// `R = Σ w_i rhs_i − [Δ(λ₀W + Ψ(W)W) + Σ w_i u_i g_i]` with `W = Σ w_i u_i`,
/// reported as `max|R| / (1 + max|rhs|)`.
pub fn w_reduction_residual_with(
    model: &ModelSpec,
    grid: &Grid,
    traj: &Trajectory,
    weights: &[f64],
) -> Result<Vec<ResidualPoint>> {
    if weights.len() != model.m() {
        return Err(Error::ShapeMismatch {
            expected: model.m(),
            found: weights.len(),
        });
    }
    let mut out = Vec::with_capacity(traj.snapshots.len());
    let mut u = Vec::with_capacity(model.m());
    for state in &traj.snapshots {
        let rhs = models::assemble_rhs(model, grid, state)?;
        let mut combined = Field::zeros(*grid);
        let mut scale: f64 = 0.0;
        for (w, r) in weights.iter().zip(&rhs) {
            combined = combined.axpby(1.0, r, *w)?;
            scale += w.abs() * r.sup_norm();
        }
        let w_field = state.combine(weights)?;
        let forcing: Vec<f64> = (0..grid.node_count())
            .map(|j| {
                state.node_values(j, &mut u);
                (0..u.len()).map(|i| weights[i] * u[i] * model.reaction_rate(i, &u)).sum()
            })
            .collect();
        let forcing = Field::new(*grid, forcing)?;
        let w_rhs = models::w_equation_rhs(model, grid, &w_field, &forcing)?;
        let residual = combined.axpby(1.0, &w_rhs, -1.0)?.sup_norm();
        let scale = 1.0 + scale.max(w_rhs.sup_norm());
        out.push(ResidualPoint {
            t: state.t,
            residual: residual / scale,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignSplit {
    pub t: f64,
    /// Measure of `{v ≥ 0}`.
    pub positive: f64,
    /// Measure of `{v < 0}`.
    pub negative: f64,
    pub min: f64,
}

/// Discrete measures of the sign sets of one species at every snapshot.
pub fn sign_split_stats(traj: &Trajectory, species: usize) -> Result<Vec<SignSplit>> {
    traj.snapshots
        .iter()
        .map(|s| {
            let f = s
                .species
                .get(species)
                .ok_or_else(|| Error::InvalidParameter(format!("no species {species}")))?;
            let cell = f.grid().cell_volume();
            let neg = f.values().iter().filter(|&&x| x < 0.0).count();
            let pos = f.values().len() - neg;
            Ok(SignSplit {
                t: s.t,
                positive: pos as f64 * cell,
                negative: neg as f64 * cell,
                min: f.min(),
            })
        })
        .collect()
}

/// Per-run diagnostics; sections other than `norms` are filled on demand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub norms: Vec<NormRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev: Option<SobolevReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gronwall: Vec<GronwallReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<ResidualPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sign_split: Vec<SignSplit>,
}

impl DiagnosticsReport {
    pub fn new(norms: Vec<NormRecord>) -> Self {
        Self {
            norms,
            ..Self::default()
        }
    }

    /// `(t, ‖u_i‖_{L²})` from the per-step norms.
    pub fn l2_series(&self, species: usize) -> Vec<(f64, f64)> {
        self.norms.iter().map(|r| (r.t, r.species[species].l2)).collect()
    }

    /// Smallest value of any species at any step.
    pub fn min(&self) -> f64 {
        self.norms
            .iter()
            .flat_map(|r| r.species.iter().map(|s| s.min))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest sup norm of any species at any step.
    pub fn sup(&self) -> f64 {
        self.norms
            .iter()
            .flat_map(|r| r.species.iter().map(|s| s.sup))
            .fold(0.0, f64::max)
    }

    /// Writes the `t,species,min,max,l1,l2,grad_sup` series.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        use std::fmt::Write as _;
        let mut buf = String::from("t,species,min,max,l1,l2,grad_sup\n");
        for rec in &self.norms {
            for (i, s) in rec.species.iter().enumerate() {
                writeln!(
                    buf,
                    "{:e},{},{:e},{:e},{:e},{:e},{:e}",
                    rec.t, i, s.min, s.max, s.l1, s.l2, s.grad_sup
                )
                .expect("string write");
            }
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// `sup_t ∫ g` helper used by tests and reports.
pub fn sup_mass(series: &[(f64, &Field)]) -> f64 {
    series.iter().map(|(_, f)| f.integral()).fold(f64::NEG_INFINITY, f64::max)
}

/// `∫∫ f(v)` over a species series; exposed for reporting `‖vλ(v)‖_{L¹(Q)}`-type quantities.
pub fn space_time_integral(series: &[(f64, &Field)], f: impl Fn(f64) -> f64) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let times: Vec<f64> = series.iter().map(|(t, _)| *t).collect();
    let tw = time_weights(&times);
    let cell = series[0].1.grid().cell_volume();
    space_time_sum(series.iter().map(|(t, f)| (*t, f.values())), f)
        .iter()
        .zip(&tw)
        .map(|((_, s), w)| s * w)
        .sum::<f64>()
        * cell
}
