//! Scenario configuration files and the built-in preset catalog.

use std::path::Path;

use crossdiff::models::State;
use crossdiff::solver::SolverConfig;
use crossdiff::{Field, Grid, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, CliResult};

/// Name of the generator behind `random_nonneg` profiles, recorded in every
/// manifest. Values are `amplitude * u` with `u` the `f64` produced by
/// `rand` 0.8's standard distribution, drawn species by species in node
/// order from a single stream seeded with `seed_from_u64(seed)`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.3, rand 0.8 Standard f64)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "unit_length")]
    pub length: f64,
}

fn unit_length() -> f64 {
    1.0
}

/// Initial profile of one species. Positions `center`, `lo`, `hi` are
/// fractions of the domain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `amplitude · Π_d sin(mode π x_d / L)`.
    Sine {
        amplitude: f64,
        #[serde(default = "first_mode")]
        mode: u32,
    },
    /// Gaussian `amplitude · exp(−|x − c|² / w²)`.
    Bump {
        amplitude: f64,
        #[serde(default = "half")]
        center: f64,
        width: f64,
    },
    /// `value` on the cube `[lo, hi]^dim`, zero elsewhere.
    ConstantPatch { value: f64, lo: f64, hi: f64 },
    /// Independent uniform values in `[0, amplitude)` from the seeded stream.
    RandomNonneg { amplitude: f64 },
}

fn first_mode() -> u32 {
    1
}

fn half() -> f64 {
    0.5
}

impl InitialProfile {
    fn validate(&self) -> CliResult<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            InitialProfile::Sine { amplitude, mode } => finite(&[amplitude]) && mode >= 1,
            InitialProfile::Bump {
                amplitude,
                center,
                width,
            } => finite(&[amplitude, center]) && width > 0.0 && width.is_finite(),
            InitialProfile::ConstantPatch { value, lo, hi } => finite(&[value, lo, hi]) && lo <= hi,
            InitialProfile::RandomNonneg { amplitude } => amplitude >= 0.0 && amplitude.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!("invalid initial profile {self:?}")))
        }
    }

    fn sample(&self, grid: Grid, rng: &mut ChaCha8Rng) -> Field {
        let len = grid.length();
        match *self {
            InitialProfile::Sine { amplitude, mode } => {
                let k = mode as f64 * std::f64::consts::PI / len;
                Field::from_fn(grid, |x, y| {
                    let sy = if grid.dim() == 2 { (k * y).sin() } else { 1.0 };
                    amplitude * (k * x).sin() * sy
                })
            }
            InitialProfile::Bump {
                amplitude,
                center,
                width,
            } => {
                let c = center * len;
                let w2 = (width * len).powi(2);
                Field::from_fn(grid, |x, y| {
                    let dy = if grid.dim() == 2 { y - c } else { 0.0 };
                    amplitude * (-((x - c).powi(2) + dy * dy) / w2).exp()
                })
            }
            InitialProfile::ConstantPatch { value, lo, hi } => {
                let inside = |s: f64| s >= lo * len && s <= hi * len;
                Field::from_fn(grid, |x, y| {
                    if inside(x) && (grid.dim() == 1 || inside(y)) {
                        value
                    } else {
                        0.0
                    }
                })
            }
            InitialProfile::RandomNonneg { amplitude } => {
                let values = (0..grid.node_count()).map(|_| amplitude * rng.gen::<f64>()).collect();
                Field::new(grid, values).expect("length matches grid")
            }
        }
    }
}

/// Which post-run checks and reports are enabled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsToggles {
    /// Check `min ≥ −1e−10 (1 + sup)`; requires nonnegative initial data.
    #[serde(default)]
    pub positivity: bool,
    /// Check the discrete W-reduction residual at every snapshot.
    #[serde(default)]
    pub reduction: bool,
    /// Check that every species' L² norm is nonincreasing.
    #[serde(default)]
    pub energy_decay: bool,
    /// Moser ladder for this species (checked on completed runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<usize>,
    /// Sobolev ratio with `g ≡ 1` and `G` this species.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev: Option<usize>,
    /// Sign-set measures of this species.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_split: Option<usize>,
    #[serde(default = "enabled")]
    pub gronwall: bool,
}

fn enabled() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub grid: GridParams,
    /// One profile per species.
    pub initial: Vec<InitialProfile>,
    #[serde(default)]
    pub seed: u64,
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_value(value: serde_json::Value) -> CliResult<Self> {
        let scenario: Scenario = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Loads a scenario file, or a preset when no such file exists.
    pub fn load(path_or_name: &str) -> CliResult<Self> {
        let path = Path::new(path_or_name);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
            return Self::from_json(&text);
        }
        preset(path_or_name)
            .ok_or_else(|| CliError::Config(format!("{path_or_name:?} is neither a file nor a preset name")))
    }

    pub fn validate(&self) -> CliResult<()> {
        let config = |e: crossdiff::Error| CliError::Config(e.to_string());
        self.model.validate().map_err(config)?;
        self.solver.validate().map_err(config)?;
        self.grid().map_err(config)?;
        if self.initial.len() != self.model.m() {
            return Err(CliError::Config(format!(
                "model has {} species but {} initial profiles were given",
                self.model.m(),
                self.initial.len()
            )));
        }
        for p in &self.initial {
            p.validate()?;
        }
        let toggles = &self.diagnostics;
        for (what, species) in [
            ("ladder", toggles.ladder),
            ("sobolev", toggles.sobolev),
            ("sign_split", toggles.sign_split),
        ] {
            if species.is_some_and(|s| s >= self.model.m()) {
                return Err(CliError::Config(format!("{what} species index out of range")));
            }
        }
        if toggles.positivity {
            let min = self.initial_state()?.min();
            if min < 0.0 {
                return Err(CliError::Config(format!(
                    "positivity check enabled but initial data has min {min:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> crossdiff::Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.length)
    }

    pub fn initial_state(&self) -> CliResult<State> {
        let grid = self.grid().map_err(|e| CliError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let species = self.initial.iter().map(|p| p.sample(grid, &mut rng)).collect();
        State::new(0.0, species).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Copy with the number at `path` replaced by `value`. The dotted path is
    /// resolved from the scenario root and, failing that, from `model`, so
    /// `reaction.c0` and `model.reaction.c0` name the same field.
    pub fn with_param(&self, path: &str, value: f64) -> CliResult<Self> {
        if !value.is_finite() {
            return Err(CliError::Config(format!("parameter value {value} is not finite")));
        }
        let mut root = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        let keys: Vec<&str> = path.split('.').collect();
        let slot = match lookup(&mut root, &keys) {
            Some(slot) => Some(slot),
            None => root.get_mut("model").and_then(|m| lookup(m, &keys)),
        };
        match slot {
            Some(slot) if slot.is_number() => *slot = json!(value),
            Some(_) => return Err(CliError::Config(format!("parameter {path:?} is not numeric"))),
            None => return Err(CliError::Config(format!("unknown parameter path {path:?}"))),
        }
        Self::from_value(root)
    }
}

fn lookup<'a>(mut node: &'a mut serde_json::Value, keys: &[&str]) -> Option<&'a mut serde_json::Value> {
    for key in keys {
        node = match node {
            serde_json::Value::Object(map) => map.get_mut(*key)?,
            serde_json::Value::Array(items) => items.get_mut(key.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(node)
}

/// Names of the shipped presets, in catalog order.
pub const PRESET_NAMES: [&str; 7] = [
    "heat-1d",
    "heat-2d",
    "skt-equal-diffusion",
    "yw-small-eps",
    "ywz",
    "scalar-bounded",
    "scalar-superlinear",
];

pub fn preset(name: &str) -> Option<Scenario> {
    let value = match name {
        "heat-1d" => json!({
            "name": name,
            "model": {
                "variant": "scalar", "lambda0": 1.0,
                "psi": {"alpha": 0.0},
                "combo": [1.0],
                "reaction": {"kind": "constant", "k": [0.0]}
            },
            "grid": {"dim": 1, "n": 128},
            "initial": [{"profile": "sine", "amplitude": 1.0}],
            "solver": {"t_end": 0.1, "record_every": 250},
            "diagnostics": {"positivity": true, "energy_decay": true, "ladder": 0}
        }),
        "heat-2d" => json!({
            "name": name,
            "model": {
                "variant": "scalar", "lambda0": 1.0,
                "psi": {"alpha": 0.0},
                "combo": [1.0],
                "reaction": {"kind": "constant", "k": [0.0]}
            },
            "grid": {"dim": 2, "n": 31},
            "initial": [{"profile": "sine", "amplitude": 1.0}],
            "solver": {"t_end": 0.05, "record_every": 50},
            "diagnostics": {"positivity": true, "energy_decay": true, "sobolev": 0}
        }),
        "skt-equal-diffusion" => json!({
            "name": name,
            "model": {
                "variant": "equal_diffusion", "lambda0": 1.0,
                "psi": {"alpha": 1.0},
                "combo": [1.0, 1.0],
                "reaction": {
                    "kind": "affine", "k": [1.0, 0.8],
                    "b": [[-0.01, 0.0], [0.0, -0.01]]
                }
            },
            "grid": {"dim": 1, "n": 64},
            "initial": [
                {"profile": "bump", "amplitude": 1.0, "center": 0.35, "width": 0.15},
                {"profile": "random_nonneg", "amplitude": 0.5}
            ],
            "seed": 7,
            "solver": {"t_end": 0.05, "record_every": 50},
            "diagnostics": {"positivity": true, "reduction": true, "sign_split": 1}
        }),
        "yw-small-eps" => json!({
            "name": name,
            "model": {
                "variant": "yw", "lambda0": 1.0,
                "psi": {"alpha": 1.0},
                "combo": [1.0, 2.0],
                "reaction": {"kind": "psi_bounded", "k": [0.5, 0.5], "c0": 0.01, "sign": [-1.0, -1.0]},
                "eps0": 0.01
            },
            "grid": {"dim": 1, "n": 64},
            "initial": [
                {"profile": "sine", "amplitude": 1.0},
                {"profile": "bump", "amplitude": 0.5, "center": 0.6, "width": 0.1}
            ],
            "solver": {"t_end": 0.05, "record_every": 50},
            "diagnostics": {"positivity": true, "reduction": true, "sign_split": 1}
        }),
        "ywz" => json!({
            "name": name,
            "model": {
                "variant": "ywz", "lambda0": 1.0,
                "psi": {"alpha": 1.0},
                "combo": [1.0, 1.0],
                "reaction": {"kind": "psi_bounded", "k": [0.5, 0.5], "c0": 0.01, "sign": [-1.0, -1.0]},
                "eps0": 0.5
            },
            "grid": {"dim": 1, "n": 64},
            "initial": [
                {"profile": "sine", "amplitude": 1.0},
                {"profile": "bump", "amplitude": 0.5, "center": 0.4, "width": 0.1}
            ],
            "solver": {"t_end": 0.05, "record_every": 50},
            "diagnostics": {"positivity": true, "reduction": true, "sign_split": 1}
        }),
        "scalar-bounded" => json!({
            "name": name,
            "model": {
                "variant": "scalar", "lambda0": 1.0,
                "psi": {"alpha": 1.0},
                "combo": [1.0],
                "reaction": {"kind": "psi_bounded", "k": [20.0], "c0": 0.5, "sign": [-1.0]}
            },
            "grid": {"dim": 1, "n": 64},
            "initial": [{"profile": "sine", "amplitude": 1.0}],
            "solver": {"t_end": 0.2, "record_every": 20},
            "diagnostics": {"positivity": true, "ladder": 0, "sobolev": 0}
        }),
        "scalar-superlinear" => json!({
            "name": name,
            "model": {
                "variant": "scalar", "lambda0": 1.0,
                "psi": {"alpha": 0.0, "beta": 1.0, "k": 2.0},
                "combo": [1.0],
                "reaction": {"kind": "psi_bounded", "k": [0.0], "c0": 1.0}
            },
            "grid": {"dim": 1, "n": 31},
            "initial": [{"profile": "sine", "amplitude": 4.0}],
            "solver": {"t_end": 0.5, "record_every": 2000},
            "diagnostics": {"positivity": true}
        }),
        _ => return None,
    };
    Some(Scenario::from_value(value).expect("shipped presets are valid"))
}
