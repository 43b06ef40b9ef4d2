//! Model definitions: the pressure nonlinearity Ψ, the linear combination L,
//! reaction families with their growth certificates, and the semi-discrete
//! right-hand side of each system variant.
//!
//! All variants share the structure
//!
//! ```text
//! (u_i)_t = Δ(λ₀ u_i + Ψ(L(u)) u_i) + coupling_i + u_i g_i(u)
//! ```
//!
//! where the coupling term is nonzero only for the two-species `Yw`/`Ywz`
//! systems (`±ε₀ · coef · Δ(u ṽ)`, `ṽ = |v|` when `abs_v` is set).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// `Ψ(s) = alpha s₊ + beta (s₊)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSpec {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub k: f64,
}

fn one() -> f64 {
    1.0
}

impl PsiSpec {
    pub fn new(alpha: f64, beta: f64, k: f64) -> Result<Self> {
        let psi = Self { alpha, beta, k };
        psi.validate()?;
        Ok(psi)
    }

    /// Ψ ≡ 0.
    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            k: 1.0,
        }
    }

    /// Ψ(s) = s₊.
    pub fn identity() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            k: 1.0,
        }
    }

    /// Ψ(s) = (s₊)^k.
    pub fn power(k: f64) -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(Error::InvalidModel(format!(
                "psi coefficients must be finite and >= 0 (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::InvalidModel(format!("psi exponent k must be >= 1, got {}", self.k)));
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let mut out = self.alpha * s;
        if self.beta != 0.0 {
            out += self.beta * s.powf(self.k);
        }
        out
    }

    /// Ψ'(s); the right derivative at 0, zero for s < 0.
    pub fn derivative(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let power_part = if self.beta == 0.0 {
            0.0
        } else if self.k == 1.0 {
            self.beta
        } else {
            self.beta * self.k * s.powf(self.k - 1.0)
        };
        self.alpha + power_part
    }

    /// Whether Ψ(s) ≥ s for all s ≥ 0, which for this family means alpha ≥ 1.
    pub fn dominates_identity(&self) -> bool {
        self.alpha >= 1.0
    }
}

/// `L(u) = Σ a_i u_i` with every `a_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LinearCombo {
    coeffs: Vec<f64>,
}

impl LinearCombo {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidModel("linear combination needs at least one coefficient".into()));
        }
        if let Some(bad) = coeffs.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidModel(format!(
                "linear combination coefficients must be positive, found {bad}"
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.coeffs.len() {
            return Err(Error::ShapeMismatch {
                expected: self.coeffs.len(),
                found: u.len(),
            });
        }
        Ok(dot(&self.coeffs, u))
    }
}

impl TryFrom<Vec<f64>> for LinearCombo {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LinearCombo> for Vec<f64> {
    fn from(c: LinearCombo) -> Self {
        c.coeffs
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Growth-bound constants `C_ij, c_ij ≥ 0`. Two-species `Yw`/`Ywz` and
/// `Scalar` models use the single-entry form `|g| ≤ C + c₀ Ψ(|L|)` stored
/// as 1×1 matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    #[serde(rename = "C")]
    pub big_c: Vec<Vec<f64>>,
    #[serde(rename = "c")]
    pub small_c: Vec<Vec<f64>>,
}

impl Certificate {
    pub fn scalar(big_c: f64, c0: f64) -> Self {
        Self {
            big_c: vec![vec![big_c]],
            small_c: vec![vec![c0]],
        }
    }

    /// `c₀ = max c_ij`.
    pub fn c0(&self) -> f64 {
        self.small_c.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn validate(&self, rows: usize) -> Result<()> {
        for (name, mat) in [("C", &self.big_c), ("c", &self.small_c)] {
            if mat.len() != rows || mat.iter().any(|r| r.len() != rows) {
                return Err(Error::InvalidModel(format!(
                    "certificate matrix {name} must be {rows}x{rows}"
                )));
            }
            if mat.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidModel(format!(
                    "certificate matrix {name} must have finite nonnegative entries"
                )));
            }
        }
        Ok(())
    }
}

/// Per-capita reaction rates `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactionKind {
    /// `g_i = k_i`.
    Constant { k: Vec<f64> },
    /// `g_i = k_i + Σ_j b_ij u_j`, the SKT reaction rates.
    Affine { k: Vec<f64>, b: Vec<Vec<f64>> },
    /// `g_i = k_i + sign_i · c0 · Ψ(|L(u)|)`.
    PsiBounded { k: Vec<f64>, c0: f64, sign: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReactionSpecRepr", into = "ReactionSpecRepr")]
pub struct ReactionSpec {
    kind: ReactionKind,
    certificate: Option<Certificate>,
}

impl ReactionSpec {
    pub fn new(kind: ReactionKind, certificate: Option<Certificate>) -> Result<Self> {
        let spec = Self { kind, certificate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none(m: usize) -> Self {
        Self {
            kind: ReactionKind::Constant { k: vec![0.0; m] },
            certificate: None,
        }
    }

    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn explicit_certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn species(&self) -> usize {
        match &self.kind {
            ReactionKind::Constant { k }
            | ReactionKind::Affine { k, .. }
            | ReactionKind::PsiBounded { k, .. } => k.len(),
        }
    }

    /// True when every species has the same rate function.
    pub fn is_equal_rate(&self) -> bool {
        fn all_eq<T: PartialEq>(v: &[T]) -> bool {
            v.windows(2).all(|w| w[0] == w[1])
        }
        match &self.kind {
            ReactionKind::Constant { k } => all_eq(k),
            ReactionKind::Affine { k, b } => all_eq(k) && all_eq(b),
            ReactionKind::PsiBounded { k, sign, .. } => all_eq(k) && all_eq(sign),
        }
    }

    /// Multiplier of Ψ for `PsiBounded`; `None` for the other kinds.
    pub fn c0(&self) -> Option<f64> {
        match &self.kind {
            ReactionKind::PsiBounded { c0, .. } => Some(*c0),
            _ => None,
        }
    }

    pub fn set_c0(&mut self, value: f64) -> Result<()> {
        match &mut self.kind {
            ReactionKind::PsiBounded { c0, .. } => {
                *c0 = value;
                self.validate()
            }
            _ => Err(Error::InvalidParameter("c0 only applies to psi_bounded reactions".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let m = self.species();
        if m == 0 {
            return Err(Error::InvalidModel("reaction needs at least one species".into()));
        }
        match &self.kind {
            ReactionKind::Constant { k } => {
                if !finite(k) {
                    return Err(Error::InvalidModel("reaction constants must be finite".into()));
                }
            }
            ReactionKind::Affine { k, b } => {
                if !finite(k) || b.len() != m || b.iter().any(|r| r.len() != m || !finite(r)) {
                    return Err(Error::InvalidModel(format!(
                        "affine reaction needs finite k (len {m}) and b ({m}x{m})"
                    )));
                }
            }
            ReactionKind::PsiBounded { k, c0, sign } => {
                if !finite(k) || !(c0.is_finite() && *c0 >= 0.0) || sign.len() != m || !finite(sign) {
                    return Err(Error::InvalidModel(format!(
                        "psi_bounded reaction needs finite k, c0 >= 0 and sign (len {m})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `g_i(u)`; `l_abs_psi` is Ψ(|L(u)|), used only by `PsiBounded`.
    pub fn rate(&self, i: usize, u: &[f64], l_abs_psi: f64) -> f64 {
        match &self.kind {
            ReactionKind::Constant { k } => k[i],
            ReactionKind::Affine { k, b } => k[i] + dot(&b[i], u),
            ReactionKind::PsiBounded { k, c0, sign } => k[i] + sign[i] * c0 * l_abs_psi,
        }
    }

    fn is_identically_zero(&self) -> bool {
        match &self.kind {
            ReactionKind::Constant { k } => k.iter().all(|&x| x == 0.0),
            ReactionKind::Affine { k, b } => k.iter().chain(b.iter().flatten()).all(|&x| x == 0.0),
            ReactionKind::PsiBounded { k, c0, .. } => *c0 == 0.0 && k.iter().all(|&x| x == 0.0),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ReactionKindTag {
    Constant,
    Affine,
    PsiBounded,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionSpecRepr {
    kind: ReactionKindTag,
    k: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sign: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
}

impl TryFrom<ReactionSpecRepr> for ReactionSpec {
    type Error = Error;
    fn try_from(r: ReactionSpecRepr) -> Result<Self> {
        let m = r.k.len();
        let stray = |field: &str| Error::InvalidModel(format!("field `{field}` not allowed for this reaction kind"));
        let kind = match r.kind {
            ReactionKindTag::Constant => {
                if r.b.is_some() {
                    return Err(stray("b"));
                }
                if r.c0.is_some() || r.sign.is_some() {
                    return Err(stray("c0/sign"));
                }
                ReactionKind::Constant { k: r.k }
            }
            ReactionKindTag::Affine => {
                if r.c0.is_some() || r.sign.is_some() {
                    return Err(stray("c0/sign"));
                }
                let b = r.b.ok_or_else(|| Error::InvalidModel("affine reaction requires `b`".into()))?;
                ReactionKind::Affine { k: r.k, b }
            }
            ReactionKindTag::PsiBounded => {
                if r.b.is_some() {
                    return Err(stray("b"));
                }
                ReactionKind::PsiBounded {
                    k: r.k,
                    c0: r.c0.ok_or_else(|| Error::InvalidModel("psi_bounded reaction requires `c0`".into()))?,
                    sign: r.sign.unwrap_or_else(|| vec![1.0; m]),
                }
            }
        };
        ReactionSpec::new(kind, r.certificate)
    }
}

impl From<ReactionSpec> for ReactionSpecRepr {
    fn from(s: ReactionSpec) -> Self {
        let certificate = s.certificate;
        match s.kind {
            ReactionKind::Constant { k } => Self {
                kind: ReactionKindTag::Constant,
                k,
                b: None,
                c0: None,
                sign: None,
                certificate,
            },
            ReactionKind::Affine { k, b } => Self {
                kind: ReactionKindTag::Affine,
                k,
                b: Some(b),
                c0: None,
                sign: None,
                certificate,
            },
            ReactionKind::PsiBounded { k, c0, sign } => Self {
                kind: ReactionKindTag::PsiBounded,
                k,
                b: None,
                c0: Some(c0),
                sign: Some(sign),
                certificate,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `v_t = λ₀Δv + Δ(Ψ(v)v) + v g(v)`.
    Scalar,
    /// m species sharing the diffusion rate `λ₀ + Ψ(L(u))`.
    EqualDiffusion,
    /// Two species, `L = bu + av`, cross coupling `+ε₀aΔ(uṽ)`, `−ε₀bΔ(uṽ)`.
    Yw,
    /// Two species, `L = bu − av`, cross coupling `+ε₀aΔ(uṽ)`, `+ε₀bΔ(uṽ)`.
    Ywz,
}

impl Variant {
    fn uses_scalar_certificate(self) -> bool {
        !matches!(self, Variant::EqualDiffusion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub lambda0: f64,
    pub psi: PsiSpec,
    /// Coefficients `a_i`; for `Yw`/`Ywz` this is the pair `(b, a)`.
    pub combo: LinearCombo,
    pub reaction: ReactionSpec,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default)]
    pub abs_v: bool,
}

impl ModelSpec {
    pub fn m(&self) -> usize {
        self.combo.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()?;
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::InvalidModel(format!("lambda0 must be positive, got {}", self.lambda0)));
        }
        if !(self.eps0 >= 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidModel(format!("eps0 must be >= 0, got {}", self.eps0)));
        }
        let m = self.m();
        if self.reaction.species() != m {
            return Err(Error::InvalidModel(format!(
                "reaction defines {} species but the linear combination has {m}",
                self.reaction.species()
            )));
        }
        match self.variant {
            Variant::Scalar if m != 1 => {
                return Err(Error::InvalidModel("scalar model needs exactly one coefficient".into()));
            }
            Variant::Yw | Variant::Ywz if m != 2 => {
                return Err(Error::InvalidModel("yw/ywz models need exactly two species".into()));
            }
            _ => {}
        }
        match self.variant {
            Variant::Scalar | Variant::EqualDiffusion => {
                if self.eps0 != 0.0 || self.abs_v {
                    return Err(Error::InvalidModel("eps0/abs_v only apply to yw and ywz models".into()));
                }
            }
            Variant::Yw | Variant::Ywz => {
                if self.variant == Variant::Yw && !self.psi.dominates_identity() {
                    return Err(Error::InvalidModel(
                        "yw model requires Psi(s) >= s for s >= 0 (psi.alpha >= 1)".into(),
                    ));
                }
                if !self.reaction.is_equal_rate() {
                    return Err(Error::InvalidModel("yw/ywz models require equal reaction rates".into()));
                }
            }
        }
        if let Some(cert) = self.reaction.explicit_certificate() {
            cert.validate(if self.variant.uses_scalar_certificate() { 1 } else { m })?;
        }
        Ok(())
    }

    /// Signed weights realizing `L`: `a_i` except for `Ywz`, where the pair
    /// `(b, a)` becomes `(b, −a)` so that `L(u, v) = bu − av`.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.combo.coeffs().to_vec();
        if self.variant == Variant::Ywz {
            w[1] = -w[1];
        }
        w
    }

    /// `L(u)` with the variant's sign convention.
    pub fn eval_l(&self, u: &[f64]) -> f64 {
        dot(&self.weights(), u)
    }

    /// `g_i(u)` at one node.
    pub fn reaction_rate(&self, i: usize, u: &[f64]) -> f64 {
        let l = self.eval_l(u);
        self.reaction.rate(i, u, self.psi.eval(l.abs()))
    }

    /// Coupling coefficients `(κ_u, κ_v)` multiplying `Δ(u ṽ)` in each
    /// equation; zero for the single-rate variants.
    pub fn coupling(&self) -> [f64; 2] {
        match self.variant {
            Variant::Yw => {
                let (b, a) = (self.combo.coeffs()[0], self.combo.coeffs()[1]);
                [self.eps0 * a, -self.eps0 * b]
            }
            Variant::Ywz => {
                let (b, a) = (self.combo.coeffs()[0], self.combo.coeffs()[1]);
                [self.eps0 * a, self.eps0 * b]
            }
            _ => [0.0, 0.0],
        }
    }

    /// The certificate to check: the explicit one if given, otherwise one
    /// derived from the reaction parameters.
    pub fn certificate(&self) -> Certificate {
        if let Some(c) = self.reaction.explicit_certificate() {
            return c.clone();
        }
        let m = self.m();
        // Ψ(s) ≥ alpha s, so a linear term |b u| is covered by |b|/alpha · Ψ(|u|).
        let lin = if self.psi.alpha > 0.0 { 1.0 / self.psi.alpha } else { 1.0 };
        match (&self.reaction.kind, self.variant.uses_scalar_certificate()) {
            (ReactionKind::Constant { k }, true) => Certificate::scalar(max_abs(k), 0.0),
            (ReactionKind::Affine { k, b }, true) => {
                let a_min = self.combo.coeffs().iter().copied().fold(f64::INFINITY, f64::min);
                let row = b.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
                Certificate::scalar(max_abs(k), row * lin / a_min)
            }
            (ReactionKind::PsiBounded { k, c0, .. }, true) => Certificate::scalar(max_abs(k), *c0),
            (kind, false) => {
                let mut big_c = vec![vec![0.0; m]; m];
                let mut small_c = vec![vec![0.0; m]; m];
                for i in 0..m {
                    match kind {
                        ReactionKind::Constant { k } => big_c[i][i] = k[i].abs(),
                        ReactionKind::Affine { k, b } => {
                            big_c[i][i] = k[i].abs();
                            for j in 0..m {
                                small_c[i][j] = b[i][j].abs() * lin;
                            }
                        }
                        ReactionKind::PsiBounded { k, c0, .. } => {
                            big_c[i][i] = k[i].abs();
                            small_c[i].iter_mut().for_each(|c| *c = *c0);
                        }
                    }
                }
                Certificate { big_c, small_c }
            }
        }
    }

    /// Nonnegative-orthant box `[0, B]^m` used to gate a run, with `B`
    /// twice the largest initial value (at least 1). Species that start
    /// with negative values get a symmetric range.
    pub fn default_certificate_box(&self, state: &State) -> Vec<(f64, f64)> {
        state
            .species
            .iter()
            .map(|f| {
                let hi = (2.0 * f.max()).max(1.0);
                let lo = (2.0 * f.min()).min(0.0);
                (lo, hi)
            })
            .collect()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// m species fields at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub species: Vec<Field>,
}

impl State {
    pub fn new(t: f64, species: Vec<Field>) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::InvalidParameter("state needs at least one species".into()));
        }
        let g = *species[0].grid();
        if species.iter().any(|f| *f.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { t, species })
    }

    pub fn grid(&self) -> &Grid {
        self.species[0].grid()
    }

    pub fn m(&self) -> usize {
        self.species.len()
    }

    /// Largest absolute value over all species and nodes.
    pub fn sup_norm(&self) -> f64 {
        self.species.iter().map(Field::sup_norm).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.species.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.species.iter().all(Field::is_finite)
    }

    /// Nodewise `Σ w_i u_i`.
    pub fn combine(&self, weights: &[f64]) -> Result<Field> {
        if weights.len() != self.m() {
            return Err(Error::ShapeMismatch {
                expected: self.m(),
                found: weights.len(),
            });
        }
        let n = self.grid().node_count();
        let values = (0..n)
            .map(|j| {
                self.species
                    .iter()
                    .zip(weights)
                    .map(|(f, w)| w * f.values()[j])
                    .sum()
            })
            .collect();
        Field::new(*self.grid(), values)
    }

    /// Species values at node `j` written into `buf`.
    pub fn node_values(&self, j: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.species.iter().map(|f| f.values()[j]));
    }
}

/// Which growth bound a certificate report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// `|g_i(u)| ≤ Σ_j (C_ij + c_ij Ψ(|u_i|))`.
    OwnSpecies,
    /// `|g_i(u)| ≤ Σ_j (C_ij + c_ij Ψ(|u_j|))`.
    EachSpecies,
    /// `|g(u)| ≤ C + c₀ Ψ(|L(u)|)`.
    Combination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub form: BoundForm,
    pub pass: bool,
    /// Smallest `bound − |g_i(u)|` over all samples and species.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    /// For equal-diffusion models, the same check under the
    /// [`BoundForm::EachSpecies`] form, where Ψ takes the j-th species.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate: Option<Box<CertificateReport>>,
}

impl CertificateReport {
    /// Passes under the primary form or, when reported, its alternate.
    pub fn accepted(&self) -> bool {
        self.pass || self.alternate.as_ref().is_some_and(|a| a.pass)
    }
}

/// Samples the reaction rates on a deterministic lattice of `samples`
/// points per axis in `bounds` and checks the model's growth certificate.
pub fn verify_growth_certificate(
    model: &ModelSpec,
    bounds: &[(f64, f64)],
    samples: usize,
) -> Result<CertificateReport> {
    verify_growth_with(model, bounds, samples, |i, u| model.reaction_rate(i, u))
}

/// Like [`verify_growth_certificate`] for an arbitrary rate function
/// `rate(i, u)` in place of the model's reaction family.
pub fn verify_growth_with(
    model: &ModelSpec,
    bounds: &[(f64, f64)],
    samples: usize,
    rate: impl Fn(usize, &[f64]) -> f64,
) -> Result<CertificateReport> {
    let m = model.m();
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample per axis".into()));
    }
    if bounds.len() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            found: bounds.len(),
        });
    }
    if bounds.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
        return Err(Error::InvalidParameter("certificate box bounds must be finite and ordered".into()));
    }
    let cert = model.certificate();
    let psi = &model.psi;
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if samples == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..samples)
                .map(|s| lo + (hi - lo) * s as f64 / (samples - 1) as f64)
                .collect()
        }
    };
    let axes: Vec<Vec<f64>> = bounds.iter().map(|&b| axis(b)).collect();

    let forms: Vec<BoundForm> = if model.variant.uses_scalar_certificate() {
        vec![BoundForm::Combination]
    } else {
        vec![BoundForm::OwnSpecies, BoundForm::EachSpecies]
    };
    let mut worst: Vec<(f64, Vec<f64>)> = vec![(f64::INFINITY, Vec::new()); forms.len()];
    let mut ok = vec![true; forms.len()];

    let total = samples.pow(m as u32);
    let mut u = vec![0.0; m];
    for flat in 0..total {
        let mut rem = flat;
        for (d, ax) in axes.iter().enumerate() {
            u[d] = ax[rem % samples];
            rem /= samples;
        }
        for i in 0..m {
            let g = rate(i, &u).abs();
            for (f, form) in forms.iter().enumerate() {
                let bound = match form {
                    BoundForm::Combination => {
                        cert.big_c[0][0] + cert.small_c[0][0] * psi.eval(model.eval_l(&u).abs())
                    }
                    BoundForm::OwnSpecies => (0..m)
                        .map(|j| cert.big_c[i][j] + cert.small_c[i][j] * psi.eval(u[i].abs()))
                        .sum(),
                    BoundForm::EachSpecies => (0..m)
                        .map(|j| cert.big_c[i][j] + cert.small_c[i][j] * psi.eval(u[j].abs()))
                        .sum(),
                };
                let margin = bound - g;
                // NaN rates fail through the negated comparison.
                if !(margin >= -1e-12 * (1.0 + bound.abs())) {
                    ok[f] = false;
                }
                let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
                if margin < worst[f].0 {
                    worst[f] = (margin, u.clone());
                }
            }
        }
    }

    let mut reports: Vec<CertificateReport> = forms
        .into_iter()
        .zip(worst)
        .zip(ok)
        .map(|((form, (worst_margin, worst_point)), pass)| CertificateReport {
            form,
            pass,
            worst_margin,
            worst_point,
            alternate: None,
        })
        .collect();
    let mut primary = reports.remove(0);
    primary.alternate = reports.pop().map(Box::new);
    Ok(primary)
}

/// Nonlinear/linear split of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RhsPart {
    /// Everything, with λ₀ folded into the composite `λ₀u_i + Ψ(L)u_i`.
    Full,
    /// Everything except `λ₀Δu_i`.
    Nonlinear,
}

/// Semi-discrete right-hand side `dU_i/dt` for every species.
pub fn assemble_rhs(model: &ModelSpec, grid: &Grid, state: &State) -> Result<Vec<Field>> {
    assemble(model, grid, state, RhsPart::Full)
}

/// Right-hand side without the `λ₀Δu_i` term (the explicit part of IMEX).
pub fn assemble_nonlinear_rhs(model: &ModelSpec, grid: &Grid, state: &State) -> Result<Vec<Field>> {
    assemble(model, grid, state, RhsPart::Nonlinear)
}

pub(crate) fn assemble(model: &ModelSpec, grid: &Grid, state: &State, part: RhsPart) -> Result<Vec<Field>> {
    let m = model.m();
    if state.m() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            found: state.m(),
        });
    }
    if state.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let nodes = grid.node_count();
    let weights = model.weights();
    let lambda0 = match part {
        RhsPart::Full => model.lambda0,
        RhsPart::Nonlinear => 0.0,
    };

    // Nodewise Ψ(L) and reaction rates.
    let mut psi_l = vec![0.0; nodes];
    let mut rates = vec![vec![0.0; nodes]; m];
    let skip_reaction = model.reaction.is_identically_zero();
    let mut u = Vec::with_capacity(m);
    for j in 0..nodes {
        state.node_values(j, &mut u);
        let l = dot(&weights, &u);
        let psi_abs = model.psi.eval(l.abs());
        psi_l[j] = if l > 0.0 { psi_abs } else { 0.0 };
        if !skip_reaction {
            for (i, r) in rates.iter_mut().enumerate() {
                r[j] = model.reaction.rate(i, &u, psi_abs);
            }
        }
    }

    let coupling = model.coupling();
    let coupling_lap = if coupling != [0.0, 0.0] {
        let uu = state.species[0].values();
        let vv = state.species[1].values();
        let composite: Vec<f64> = uu
            .iter()
            .zip(vv)
            .map(|(&a, &b)| a * if model.abs_v { b.abs() } else { b })
            .collect();
        let mut lap = vec![0.0; nodes];
        grid.laplacian_into(&composite, &mut lap)?;
        Some(lap)
    } else {
        None
    };

    let mut out = Vec::with_capacity(m);
    let mut composite = vec![0.0; nodes];
    for (i, field) in state.species.iter().enumerate() {
        let ui = field.values();
        for j in 0..nodes {
            composite[j] = lambda0 * ui[j] + psi_l[j] * ui[j];
        }
        if let Some(bad) = composite.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("diffusion composite of species {i} at node {bad}")));
        }
        let mut rhs = vec![0.0; nodes];
        grid.laplacian_into(&composite, &mut rhs)?;
        if let Some(lap) = &coupling_lap {
            let kappa = coupling[i];
            for (r, c) in rhs.iter_mut().zip(lap) {
                *r += kappa * c;
            }
        }
        if !skip_reaction {
            for j in 0..nodes {
                rhs[j] += ui[j] * rates[i][j];
            }
        }
        out.push(Field::new(*grid, rhs)?);
    }
    Ok(out)
}

/// Nodewise reaction contribution `f(u) = Σ w_i u_i g_i(u)` of the
/// combined equation, with `w` the model's signed weights.
pub fn combined_reaction(model: &ModelSpec, state: &State) -> Result<Field> {
    let w = model.weights();
    let nodes = state.grid().node_count();
    let mut u = Vec::with_capacity(model.m());
    let values = (0..nodes)
        .map(|j| {
            state.node_values(j, &mut u);
            (0..u.len()).map(|i| w[i] * u[i] * model.reaction_rate(i, &u)).sum()
        })
        .collect();
    Field::new(*state.grid(), values)
}

/// Right-hand side of the scalar equation for `W = L(u)`:
/// `λ₀ΔW + Δ(Ψ(W)W) + f`, composed as `Δ(λ₀W + Ψ(W)W) + f`.
pub fn w_equation_rhs(model: &ModelSpec, grid: &Grid, w: &Field, forcing: &Field) -> Result<Field> {
    w_rhs(model, grid, w, forcing, RhsPart::Full)
}

pub(crate) fn w_rhs(model: &ModelSpec, grid: &Grid, w: &Field, forcing: &Field, part: RhsPart) -> Result<Field> {
    let lambda0 = match part {
        RhsPart::Full => model.lambda0,
        RhsPart::Nonlinear => 0.0,
    };
    let composite = w.map(|x| lambda0 * x + model.psi.eval(x) * x);
    composite.check_finite("W-equation composite")?;
    let lap = grid.laplacian(&composite)?;
    lap.axpby(1.0, forcing, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    pub(crate) fn equal_diffusion(m: usize, psi: PsiSpec, reaction: ReactionSpec) -> ModelSpec {
        ModelSpec {
            variant: Variant::EqualDiffusion,
            lambda0: 0.5,
            psi,
            combo: LinearCombo::new((1..=m).map(|i| 0.5 + i as f64 * 0.25).collect()).unwrap(),
            reaction,
            eps0: 0.0,
            abs_v: false,
        }
    }

    fn yw(variant: Variant, eps0: f64, abs_v: bool) -> ModelSpec {
        ModelSpec {
            variant,
            lambda0: 0.3,
            psi: PsiSpec::new(1.0, 0.5, 2.0).unwrap(),
            combo: LinearCombo::new(vec![1.5, 0.75]).unwrap(),
            reaction: ReactionSpec::new(
                ReactionKind::PsiBounded {
                    k: vec![0.4, 0.4],
                    c0: 0.05,
                    sign: vec![-1.0, -1.0],
                },
                None,
            )
            .unwrap(),
            eps0,
            abs_v,
        }
    }

    fn random_state(grid: Grid, m: usize, seed: u64, signed: bool) -> State {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let species = (0..m)
            .map(|_| {
                let vals = (0..grid.node_count())
                    .map(|_| if signed { rng.gen_range(-1.0..2.0) } else { rng.gen_range(0.0..2.0) })
                    .collect();
                Field::new(grid, vals).unwrap()
            })
            .collect();
        State::new(0.0, species).unwrap()
    }

    #[test]
    fn psi_examples() {
        let id = PsiSpec::identity();
        assert_eq!(id.eval(2.0), 2.0);
        assert_eq!(id.derivative(2.0), 1.0);
        for psi in [id, PsiSpec::power(3.0), PsiSpec::new(1.0, 2.0, 2.0).unwrap()] {
            assert_eq!(psi.eval(-1.0), 0.0);
            assert_eq!(psi.derivative(-1.0), 0.0);
        }
        let psi = PsiSpec::new(1.0, 2.0, 2.0).unwrap();
        assert_eq!(psi.eval(3.0), 21.0);
        assert_eq!(psi.derivative(3.0), 13.0);
        assert_eq!(psi.derivative(0.0), 1.0);
        assert!(PsiSpec::new(-1.0, 0.0, 1.0).is_err());
        assert!(PsiSpec::new(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn dominates_identity_holds_on_sampled_range() {
        let psi = PsiSpec::new(1.0, 0.25, 1.5).unwrap();
        assert!(psi.dominates_identity());
        for i in 0..=10_000 {
            let s = 1e6 * i as f64 / 10_000.0;
            assert!(psi.eval(s) - s >= 0.0);
        }
        assert!(!PsiSpec::power(2.0).dominates_identity());
    }

    #[test]
    fn linear_combination_examples() {
        let c = LinearCombo::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(c.eval(&[2.0, 3.0]).unwrap(), 5.0);
        assert!(c.eval(&[1.0]).is_err());
        assert!(LinearCombo::new(vec![1.0, 0.0]).is_err());

        let mut m = yw(Variant::Yw, 0.0, false);
        m.combo = LinearCombo::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(m.eval_l(&[3.0, 1.0]), 5.0);
        m.variant = Variant::Ywz;
        m.combo = LinearCombo::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(m.eval_l(&[2.0, 5.0]), -3.0);
    }

    #[test]
    fn model_validation() {
        let mut m = yw(Variant::Yw, 0.1, true);
        assert!(m.validate().is_ok());
        m.psi = PsiSpec::power(2.0);
        assert!(m.validate().is_err(), "yw needs dominating psi");
        m.variant = Variant::Ywz;
        assert!(m.validate().is_ok(), "ywz only needs psi >= 0");

        let mut m = yw(Variant::Yw, 0.1, false);
        m.reaction = ReactionSpec::new(ReactionKind::Constant { k: vec![1.0, 2.0] }, None).unwrap();
        assert!(m.validate().is_err(), "unequal reaction rates");

        let mut m = equal_diffusion(3, PsiSpec::identity(), ReactionSpec::none(3));
        assert!(m.validate().is_ok());
        m.eps0 = 0.1;
        assert!(m.validate().is_err());
        m.eps0 = 0.0;
        m.lambda0 = 0.0;
        assert!(m.validate().is_err());
        m.lambda0 = 1.0;
        m.reaction = ReactionSpec::none(2);
        assert!(m.validate().is_err());
    }

    #[test]
    fn reaction_json_rejects_unknown_and_stray_fields() {
        let ok: ReactionSpec = serde_json::from_str(r#"{"kind":"psi_bounded","k":[0.0],"c0":2.0}"#).unwrap();
        assert_eq!(ok.c0(), Some(2.0));
        assert!(serde_json::from_str::<ReactionSpec>(r#"{"kind":"constant","k":[0.0],"bogus":1}"#).is_err());
        assert!(serde_json::from_str::<ReactionSpec>(r#"{"kind":"constant","k":[0.0],"c0":1}"#).is_err());
        assert!(serde_json::from_str::<ReactionSpec>(r#"{"kind":"affine","k":[0.0]}"#).is_err());
        let back = serde_json::to_string(&ok).unwrap();
        assert_eq!(serde_json::from_str::<ReactionSpec>(&back).unwrap(), ok);
    }

    #[test]
    fn certificate_constant_reaction_passes() {
        let cert = Certificate {
            big_c: vec![vec![1.5, 1.5], vec![0.0, 3.0]],
            small_c: vec![vec![0.0; 2]; 2],
        };
        let m = equal_diffusion(
            2,
            PsiSpec::identity(),
            ReactionSpec::new(ReactionKind::Constant { k: vec![-3.0, 3.0] }, Some(cert)).unwrap(),
        );
        let r = verify_growth_certificate(&m, &[(0.0, 5.0), (0.0, 5.0)], 7).unwrap();
        assert!(r.pass);
        assert_eq!(r.form, BoundForm::OwnSpecies);
        assert!((r.worst_margin - 0.0).abs() < 1e-15);
        assert!(r.alternate.as_ref().unwrap().pass);
    }

    #[test]
    fn certificate_identity_reaction_on_yw_box() {
        // g(u, v) = u against C = 0, c0 = 1, Ψ = s₊, L = u + v.
        let mut m = yw(Variant::Yw, 0.0, false);
        m.psi = PsiSpec::identity();
        m.combo = LinearCombo::new(vec![1.0, 1.0]).unwrap();
        m.reaction = ReactionSpec::new(
            ReactionKind::Affine {
                k: vec![0.0, 0.0],
                b: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            },
            Some(Certificate::scalar(0.0, 1.0)),
        )
        .unwrap();
        m.validate().unwrap();
        let r = verify_growth_certificate(&m, &[(0.0, 10.0), (0.0, 10.0)], 21).unwrap();
        assert!(r.pass);
        assert_eq!(r.form, BoundForm::Combination);
        // Tight along v = 0.
        assert_eq!(r.worst_margin, 0.0);
        assert_eq!(r.worst_point[1], 0.0);
    }

    #[test]
    fn certificate_exponential_rate_fails_at_top_of_box() {
        let m = ModelSpec {
            variant: Variant::Scalar,
            lambda0: 1.0,
            psi: PsiSpec::identity(),
            combo: LinearCombo::new(vec![1.0]).unwrap(),
            reaction: ReactionSpec::new(
                ReactionKind::PsiBounded {
                    k: vec![1.0],
                    c0: 1.0,
                    sign: vec![1.0],
                },
                None,
            )
            .unwrap(),
            eps0: 0.0,
            abs_v: false,
        };
        let r = verify_growth_with(&m, &[(0.0, 10.0)], 101, |_, u| u[0].exp()).unwrap();
        assert!(!r.pass);
        assert!((r.worst_point[0] - 10.0).abs() < 0.2);
        assert!(r.worst_margin < -1e4);
    }

    #[test]
    fn certificate_own_vs_each_species_form() {
        // g_1 = -2 u_2 is covered only when Ψ is evaluated at u_j.
        let m = equal_diffusion(
            2,
            PsiSpec::identity(),
            ReactionSpec::new(
                ReactionKind::Affine {
                    k: vec![0.0, 0.0],
                    b: vec![vec![0.0, -2.0], vec![0.0, 0.0]],
                },
                None,
            )
            .unwrap(),
        );
        let r = verify_growth_certificate(&m, &[(0.0, 4.0), (0.0, 4.0)], 5).unwrap();
        assert!(!r.pass);
        assert!(r.alternate.as_ref().unwrap().pass);
        assert!(r.accepted());
    }

    #[test]
    fn certificate_rejects_bad_inputs() {
        let m = equal_diffusion(1, PsiSpec::identity(), ReactionSpec::none(1));
        assert!(verify_growth_certificate(&m, &[(0.0, 1.0)], 0).is_err());
        assert!(verify_growth_certificate(&m, &[(0.0, f64::INFINITY)], 3).is_err());
        assert!(verify_growth_certificate(&m, &[(0.0, 1.0), (0.0, 1.0)], 3).is_err());
    }

    #[test]
    fn heat_reduction() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let mut m = equal_diffusion(2, PsiSpec::zero(), ReactionSpec::none(2));
        m.lambda0 = 1.7;
        let s = random_state(g, 2, 3, true);
        let rhs = assemble_rhs(&m, &g, &s).unwrap();
        for (r, u) in rhs.iter().zip(&s.species) {
            let expect = g.laplacian(u).unwrap();
            for (a, b) in r.values().iter().zip(expect.values()) {
                assert!((a - 1.7 * b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn scalar_rhs_matches_naive_loop() {
        let n = 40;
        let g = Grid::new(1, n, 1.0).unwrap();
        let m = ModelSpec {
            variant: Variant::Scalar,
            lambda0: 1.0,
            psi: PsiSpec::identity(),
            combo: LinearCombo::new(vec![1.0]).unwrap(),
            reaction: ReactionSpec::none(1),
            eps0: 0.0,
            abs_v: false,
        };
        let u = Field::from_fn(g, |x, _| (PI * x).sin());
        let rhs = assemble_rhs(&m, &g, &State::new(0.0, vec![u.clone()]).unwrap()).unwrap();
        // Independent recomputation: padded array, explicit composite u + u·u₊.
        let h = g.h();
        let mut padded = vec![0.0; n + 2];
        for j in 0..n {
            let x = u.values()[j];
            padded[j + 1] = x + x * x.max(0.0);
        }
        for j in 0..n {
            let naive = (padded[j] - 2.0 * padded[j + 1] + padded[j + 2]) / (h * h);
            assert!((rhs[0].values()[j] - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }

    #[test]
    fn yw_abs_coupling_on_negative_v() {
        let n = 24;
        let g = Grid::new(1, n, 1.0).unwrap();
        let mut m = yw(Variant::Yw, 0.2, true);
        m.combo = LinearCombo::new(vec![1.0, 1.0]).unwrap();
        m.reaction = ReactionSpec::none(2);
        let u = Field::from_fn(g, |x, _| 1.0 + x);
        let v = Field::from_fn(g, |x, _| -(PI * x).sin());
        let s = State::new(0.0, vec![u.clone(), v.clone()]).unwrap();
        let rhs = assemble_rhs(&m, &g, &s).unwrap();

        // Hand-assembled: Ψ = s + 0.5 s², L = u + v.
        let h2 = g.h() * g.h();
        let at = |f: &[f64], j: isize| if j < 0 || j >= n as isize { 0.0 } else { f[j as usize] };
        let lap = |f: &[f64], j: usize| {
            let j = j as isize;
            (at(f, j - 1) - 2.0 * at(f, j) + at(f, j + 1)) / h2
        };
        let uv: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a * (-b)).collect();
        let psi = |s: f64| if s > 0.0 { s + 0.5 * s * s } else { 0.0 };
        let comp_u: Vec<f64> = (0..n)
            .map(|j| {
                let (a, b) = (u.values()[j], v.values()[j]);
                0.3 * a + psi(a + b) * a
            })
            .collect();
        let comp_v: Vec<f64> = (0..n)
            .map(|j| {
                let (a, b) = (u.values()[j], v.values()[j]);
                0.3 * b + psi(a + b) * b
            })
            .collect();
        for j in 0..n {
            let eu = lap(&comp_u, j) + 0.2 * lap(&uv, j);
            let ev = lap(&comp_v, j) - 0.2 * lap(&uv, j);
            assert!((rhs[0].values()[j] - eu).abs() <= 1e-11 * (1.0 + eu.abs()));
            assert!((rhs[1].values()[j] - ev).abs() <= 1e-11 * (1.0 + ev.abs()));
        }
    }

    #[test]
    fn nonfinite_composite_is_reported() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let m = equal_diffusion(1, PsiSpec::identity(), ReactionSpec::none(1));
        let s = State::new(0.0, vec![Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).unwrap()]).unwrap();
        assert!(matches!(assemble_rhs(&m, &g, &s), Err(Error::NonFinite(_))));
    }

    fn max_rel(a: &Field, b: &Field) -> f64 {
        let scale = 1.0 + a.sup_norm().max(b.sup_norm());
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale
    }

    proptest! {
        #[test]
        fn psi_monotone_on_nonnegative_axis(
            alpha in 0.0..3.0f64, beta in 0.0..3.0f64, k in 1.0..4.0f64,
            s1 in 0.0..50.0f64, s2 in 0.0..50.0f64,
        ) {
            let psi = PsiSpec::new(alpha, beta, k).unwrap();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(psi.eval(lo) <= psi.eval(hi));
            prop_assert!(psi.eval(-s1) == 0.0);
            prop_assert!(psi.derivative(lo) >= 0.0);
        }

        #[test]
        fn equal_diffusion_combination_reduces_to_scalar_equation(seed in 0u64..1000, m in 1usize..4) {
            let g = Grid::new(1, 48, 1.0).unwrap();
            let k: Vec<f64> = (0..m).map(|i| 0.3 - 0.2 * i as f64).collect();
            let b: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| 0.1 * (i as f64 - j as f64)).collect()).collect();
            let model = equal_diffusion(
                m,
                PsiSpec::new(1.0, 0.5, 2.0).unwrap(),
                ReactionSpec::new(ReactionKind::Affine { k, b }, None).unwrap(),
            );
            let s = random_state(g, m, seed, false);
            let rhs = assemble_rhs(&model, &g, &s).unwrap();
            let a = model.weights();
            let mut combined = Field::zeros(g);
            for (ai, r) in a.iter().zip(&rhs) {
                combined = combined.axpby(1.0, r, *ai).unwrap();
            }
            let w = s.combine(&a).unwrap();
            let flux = w.map(|x| model.lambda0 * x + model.psi.eval(x) * x);
            let mut expect = g.laplacian(&flux).unwrap();
            let mut u = Vec::new();
            for j in 0..g.node_count() {
                s.node_values(j, &mut u);
                let f: f64 = (0..m).map(|i| a[i] * u[i] * model.reaction_rate(i, &u)).sum();
                expect.values_mut()[j] += f;
            }
            prop_assert!(max_rel(&combined, &expect) <= 1e-12);
        }

        #[test]
        fn yw_coupling_cancels_in_combination(seed in 0u64..1000, eps0 in 0.0..5.0f64, abs_v: bool, z: bool) {
            let g = Grid::new(1, 40, 1.0).unwrap();
            let variant = if z { Variant::Ywz } else { Variant::Yw };
            let with = yw(variant, eps0, abs_v);
            let without = yw(variant, 0.0, abs_v);
            let s = random_state(g, 2, seed, true);
            let w = with.weights();
            let r1 = assemble_rhs(&with, &g, &s).unwrap();
            let r0 = assemble_rhs(&without, &g, &s).unwrap();
            let c1 = r1[0].axpby(w[0], &r1[1], w[1]).unwrap();
            let c0 = r0[0].axpby(w[0], &r0[1], w[1]).unwrap();
            prop_assert!(max_rel(&c1, &c0) <= 1e-12);
        }
    }
}
