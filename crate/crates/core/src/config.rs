//! JSON run configuration, system factory and canonical hashing.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::equilibrium::TravellingWave;
use crate::error::{Error, Result};
use crate::harness::{ManufacturedScenario, Scenario};
use crate::hypotheses::suggest_a;
use crate::linalg::Matrix;
use crate::solver::{Grid, Limiter, Model, Order};
use crate::systems::{
    make_combustion, make_elasticity, make_linear_reaction, CombustionParams, ElasticityParams, LinearReactionParams,
    SystemDefinition,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    LinearReaction,
    Elasticity,
    Combustion,
}

impl SystemName {
    pub const ALL: [SystemName; 3] = [Self::LinearReaction, Self::Elasticity, Self::Combustion];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearReaction => "linear_reaction",
            Self::Elasticity => "elasticity",
            Self::Combustion => "combustion",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown system `{s}` (linear_reaction, elasticity, combustion)")))
    }
}

impl std::fmt::Display for SystemName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn parse_value<P: DeserializeOwned>(value: Value, prefix: &str) -> Result<P> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        Error::Config { path, message: e.into_inner().to_string() }
    })
}

/// Builds a builtin system from its name and a JSON parameter object.
pub fn build_system(name: SystemName, params: &Map<String, Value>) -> Result<SystemDefinition<f64>> {
    let value = Value::Object(params.clone());
    match name {
        SystemName::LinearReaction => {
            let p: LinearReactionParams = parse_value(value, "params")?;
            make_linear_reaction(p.a, p.lambda)
        }
        SystemName::Elasticity => make_elasticity(&parse_value::<ElasticityParams>(value, "params")?),
        SystemName::Combustion => make_combustion(&parse_value::<CombustionParams>(value, "params")?),
    }
}

/// Parameters with every default filled in, as stored in canonical configs.
fn normalized_params(name: SystemName, params: &Map<String, Value>) -> Result<Value> {
    let value = Value::Object(params.clone());
    Ok(match name {
        SystemName::LinearReaction => serde_json::to_value(parse_value::<LinearReactionParams>(value, "params")?)?,
        SystemName::Elasticity => serde_json::to_value(parse_value::<ElasticityParams>(value, "params")?)?,
        SystemName::Combustion => serde_json::to_value(parse_value::<CombustionParams>(value, "params")?)?,
    })
}

fn one() -> f64 {
    1.0
}

/// `u_k(x) = offset_k + amplitude_k sin(2 pi wavenumber (x - xmin) / L + phase_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierData {
    pub offset: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    #[serde(default = "one")]
    pub wavenumber: f64,
}

impl FourierData {
    pub fn default_for(name: SystemName) -> Self {
        let h = PI / 2.0;
        let (offset, amplitude, phase) = match name {
            SystemName::LinearReaction => (vec![0.0], vec![1.0], vec![0.0]),
            SystemName::Elasticity => (vec![0.0, 0.0], vec![0.05, 0.05], vec![0.0, h]),
            SystemName::Combustion => (vec![0.0, 0.0, 0.5], vec![0.2, 0.1, 0.4], vec![0.0, h, h]),
        };
        Self { offset, amplitude, phase, wavenumber: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        for (field, len) in [("offset", self.offset.len()), ("amplitude", self.amplitude.len()), ("phase", self.phase.len())] {
            if len != dim {
                return Err(Error::Config {
                    path: format!("initial.{field}"),
                    message: format!("expected {dim} entries, got {len}"),
                });
            }
        }
        Ok(())
    }

    /// Closure over `[xmin, xmax]`.
    pub fn profile(&self, xmin: f64, xmax: f64) -> Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync> {
        let d = self.clone();
        let k = 2.0 * PI * self.wavenumber / (xmax - xmin);
        Arc::new(move |x| (0..d.dim()).map(|i| d.offset[i] + d.amplitude[i] * (k * (x - xmin) + d.phase[i]).sin()).collect())
    }

    /// The same profile translated with `speed`.
    pub fn travelling(&self, xmin: f64, xmax: f64, speed: f64) -> TravellingWave<f64> {
        let kappa = 2.0 * PI * self.wavenumber / (xmax - xmin);
        TravellingWave {
            offset: self.offset.clone(),
            amplitude: self.amplitude.clone(),
            phase: self.phase.iter().map(|p| p - kappa * xmin).collect(),
            kappa,
            speed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    /// `2 alpha I` from the system's constants.
    #[default]
    Suggest,
    Explicit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AConfig {
    #[serde(default)]
    pub mode: AMode,
    /// Row-major entries for `mode = "explicit"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<f64>>>,
}

fn zero() -> f64 {
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "zero")]
    pub xmin: f64,
    #[serde(default = "one")]
    pub xmax: f64,
    pub n: usize,
}

fn default_cfl() -> f64 {
    0.45
}

fn default_order() -> u8 {
    2
}

fn default_snapshots() -> usize {
    50
}

/// One relaxation run. Sweeps reuse it with `eps` or `grid.n` varied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemName,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub grid: GridConfig,
    pub eps: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_order")]
    pub order: u8,
    pub t_end: f64,
    #[serde(default)]
    pub model: Model,
    #[serde(default, rename = "A")]
    pub a: AConfig,
    /// Intervals of the uniform snapshot schedule.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub seed: u32,
    #[serde(default)]
    pub limiter: Limiter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FourierData>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    pub fn default_for(system: SystemName) -> Self {
        Self {
            system,
            params: Map::new(),
            grid: GridConfig { xmin: 0.0, xmax: 1.0, n: 2048 },
            eps: 1e-3,
            cfl: default_cfl(),
            order: default_order(),
            t_end: 0.5,
            model: Model::Main,
            a: AConfig::default(),
            snapshots: default_snapshots(),
            seed: 0,
            limiter: Limiter::Minmod,
            dt_max: None,
            initial: None,
        }
    }

    /// Parses and validates; schema errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(&e.path().to_string(), e.into_inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.system()?;
        if !(self.eps > 0.0) {
            return Err(config_error("eps", "must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(config_error("cfl", "must lie in (0, 1]"));
        }
        Order::from_int(self.order).map_err(|e| config_error("order", e.to_string()))?;
        if !(self.t_end >= 0.0) {
            return Err(config_error("t_end", "must be nonnegative"));
        }
        if !(self.grid.xmax > self.grid.xmin) {
            return Err(config_error("grid.xmax", "must exceed grid.xmin"));
        }
        if self.grid.n < 4 {
            return Err(config_error("grid.n", "needs at least 4 cells"));
        }
        if self.snapshots == 0 {
            return Err(config_error("snapshots", "must be at least 1"));
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(config_error("dt_max", "must be positive"));
            }
        }
        if let Some(init) = &self.initial {
            init.validate(sys.dim())?;
        }
        self.relaxation_matrix(&sys)?;
        Ok(())
    }

    pub fn system(&self) -> Result<SystemDefinition<f64>> {
        build_system(self.system, &self.params)
    }

    pub fn relaxation_matrix(&self, sys: &SystemDefinition<f64>) -> Result<Matrix<f64>> {
        match self.a.mode {
            AMode::Suggest => Ok(suggest_a(sys)),
            AMode::Explicit => {
                let rows = self.a.entries.as_ref().ok_or_else(|| config_error("A.entries", "required for explicit mode"))?;
                let n = sys.dim();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(config_error("A.entries", format!("expected a {n}x{n} matrix")));
                }
                Ok(Matrix::from_rows(rows))
            }
        }
    }

    pub fn initial_data(&self) -> FourierData {
        self.initial.clone().unwrap_or_else(|| FourierData::default_for(self.system))
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.grid.xmin, self.grid.xmax, self.grid.n)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let sys = self.system()?;
        let a = self.relaxation_matrix(&sys)?;
        let init = self.initial_data().profile(self.grid.xmin, self.grid.xmax);
        let mut sc = Scenario::new(self.system.as_str(), sys, self.grid()?, init);
        sc.a = a;
        sc.t_end = self.t_end;
        sc.snapshots = self.snapshots;
        sc.order = Order::from_int(self.order)?;
        sc.limiter = self.limiter;
        sc.model = self.model;
        sc.cfl = self.cfl;
        sc.dt_max = self.dt_max;
        Ok(sc)
    }

    /// Manufactured run of the initial profile translated with `speed`.
    pub fn manufactured(&self, speed: f64) -> Result<ManufacturedScenario> {
        let system = self.system()?;
        Ok(ManufacturedScenario {
            name: format!("{}_wave", self.system),
            a: self.relaxation_matrix(&system)?,
            system,
            wave: self.initial_data().travelling(self.grid.xmin, self.grid.xmax, speed),
            xmin: self.grid.xmin,
            xmax: self.grid.xmax,
            eps: self.eps,
            t_end: self.t_end,
            order: Order::from_int(self.order)?,
            limiter: self.limiter,
            cfl: self.cfl,
        })
    }

    /// Sorted-key JSON with every default and parameter filled in.
    pub fn canonical_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        value["params"] = normalized_params(self.system, &self.params)?;
        if value.get("initial").is_none() {
            value["initial"] = serde_json::to_value(self.initial_data())?;
        }
        Ok(serde_json::to_string(&value)?)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(format!("{:x}", Sha256::digest(self.canonical_json()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system": "linear_reaction", "grid": {"n": 64}, "eps": 0.01, "t_end": 0.1}"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.cfl, 0.45);
        assert_eq!(cfg.order, 2);
        assert_eq!(cfg.grid.xmax, 1.0);
        assert_eq!(cfg.a.mode, AMode::Suggest);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let bad = r#"{"system": "elasticity", "grid": {"n": "many"}, "eps": 0.01, "t_end": 0.1}"#;
        match RunConfig::from_json(bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "grid.n"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"system": "elasticity", "params": {"stifness": 2.0}, "grid": {"n": 8}, "eps": 0.01, "t_end": 0.1}"#;
        match RunConfig::from_json(bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.stifness"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"system": "elasticity", "params": {"wiggle": "x"}, "grid": {"n": 8}, "eps": 0.01, "t_end": 0.1}"#;
        match RunConfig::from_json(bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.wiggle"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        for (text, field) in [
            (r#"{"system": "linear_reaction", "grid": {"n": 64}, "eps": 0, "t_end": 0.1}"#, "eps"),
            (r#"{"system": "linear_reaction", "grid": {"n": 64}, "eps": 0.1, "t_end": 0.1, "order": 3}"#, "order"),
            (r#"{"system": "linear_reaction", "grid": {"n": 64}, "eps": 0.1, "t_end": 0.1, "A": {"mode": "explicit"}}"#, "A.entries"),
            (
                r#"{"system": "elasticity", "grid": {"n": 64}, "eps": 0.1, "t_end": 0.1, "initial": {"offset": [0], "amplitude": [1], "phase": [0]}}"#,
                "initial.offset",
            ),
        ] {
            match RunConfig::from_json(text) {
                Err(Error::Config { path, .. }) => assert_eq!(path, field),
                other => panic!("{field}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn hash_ignores_spelling_of_defaults() {
        let explicit = r#"{"system": "linear_reaction", "params": {"a": 1.0}, "grid": {"xmin": 0, "n": 64}, "t_end": 0.1, "eps": 0.01, "cfl": 0.45}"#;
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let b = RunConfig::from_json(explicit).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = a.clone();
        c.eps = 0.02;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn travelling_wave_matches_profile_at_t0() {
        let d = FourierData::default_for(SystemName::Combustion);
        let p = d.profile(-1.0, 3.0);
        let w = d.travelling(-1.0, 3.0, 0.7);
        for x in [-1.0, 0.3, 2.9] {
            let (a, b) = (p(x), crate::equilibrium::ManufacturedSolution::value(&w, x, 0.0));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }
}
