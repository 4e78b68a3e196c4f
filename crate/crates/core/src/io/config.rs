use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discrete::{Field, Grid, GridMode, MIN_RESOLUTION};
use crate::flow::{BcKind, FlowConfig};
use crate::oracles::ORDER_WINDOW;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Simulate,
    Verify,
    Barrier,
    Flatness,
    Rescale,
    Refine,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Verify => "verify",
            Self::Barrier => "barrier",
            Self::Flatness => "flatness",
            Self::Rescale => "rescale",
            Self::Refine => "refine",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub mode: GridMode,
    pub extent: f64,
    pub resolution: usize,
}

fn default_dimension() -> usize {
    3
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dimension, self.mode, self.extent, self.resolution)
    }
}

/// Initial height `offset + amplitude · exp(-|x|^2 / width^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub bc: BcKind,
    pub offset: f64,
    pub amplitude: f64,
    pub width: f64,
    /// Start from a saved state instead of the profile above.
    pub snapshot: Option<PathBuf>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            bc: BcKind::Slicing,
            offset: 0.0,
            amplitude: 0.0,
            width: 1.0,
            snapshot: None,
        }
    }
}

impl InitialConfig {
    pub fn field(&self, grid: Grid) -> Result<Field> {
        let (c, a, w2) = (self.offset, self.amplitude, self.width * self.width);
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            c + a * (-r2 / w2).exp()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub identities: bool,
    pub inequalities: bool,
    pub evolution: bool,
    pub cutoff: bool,
    /// Random jets for the pointwise identity suite; 0 disables it.
    pub jets: usize,
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub epsilon: f64,
    pub cutoff_radius: f64,
    pub t_min: f64,
    /// Step of the three-state window used by evolution and inequality checks.
    pub window_dt: Option<f64>,
    pub order_window: (f64, f64),
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            identities: true,
            inequalities: true,
            evolution: true,
            cutoff: false,
            jets: 1000,
            deltas: vec![0.0, 1.0 / 6.0, 1.0 / 3.0],
            alphas: vec![0.5, 1.0],
            epsilon: 0.1,
            cutoff_radius: 1.0,
            t_min: 10.0,
            window_dt: None,
            order_window: ORDER_WINDOW,
        }
    }
}

impl OracleConfig {
    pub fn none_enabled(&self) -> bool {
        !(self.identities || self.inequalities || self.evolution || self.cutoff) && self.jets == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub theta: f64,
    pub lambdas: Vec<f64>,
    pub rho: f64,
    pub alpha: f64,
    pub radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            theta: 0.05,
            lambdas: vec![0.75, 1.0, 1.25],
            rho: 1.0,
            alpha: 1.0,
            radius: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub oracles: OracleConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("alpha ∈ (0,2) violated: {alpha}")))
    }
}

impl RunConfig {
    /// Range checks done before any run.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.resolution < MIN_RESOLUTION {
            return Err(Error::Validation(format!(
                "resolution ≥ {MIN_RESOLUTION} violated: {}",
                g.resolution
            )));
        }
        if !(g.dimension >= 1 && g.dimension <= 8) {
            return Err(Error::Validation(format!(
                "dimension ∈ [1,8] violated: {}",
                g.dimension
            )));
        }
        g.grid().map_err(|e| Error::Validation(e.to_string()))?;
        self.flow.validate()?;
        if !(self.initial.width > 0.0) {
            return Err(Error::Validation(format!(
                "width > 0 violated: {}",
                self.initial.width
            )));
        }
        let o = &self.oracles;
        for &a in &o.alphas {
            check_alpha(a)?;
        }
        let n = g.dimension as f64;
        for &d in &o.deltas {
            if !(0.0..=1.0 / n).contains(&d) {
                return Err(Error::Validation(format!("delta ∈ [0,1/n] violated: {d}")));
            }
        }
        if !(o.epsilon > 0.0) {
            return Err(Error::Validation(format!("epsilon > 0 violated: {}", o.epsilon)));
        }
        if !(o.cutoff_radius > 0.0) {
            return Err(Error::Validation(format!(
                "cutoff_radius > 0 violated: {}",
                o.cutoff_radius
            )));
        }
        if let Some(dt) = o.window_dt {
            if !(dt > 0.0) {
                return Err(Error::Validation(format!("window_dt > 0 violated: {dt}")));
            }
        }
        if !(o.order_window.0 < o.order_window.1) {
            return Err(Error::Validation("order_window must be increasing".into()));
        }
        let e = &self.experiment;
        check_alpha(e.alpha)?;
        if !(e.theta > 0.0) {
            return Err(Error::Validation(format!("theta > 0 violated: {}", e.theta)));
        }
        if !(e.rho > 0.0) {
            return Err(Error::Validation(format!("rho > 0 violated: {}", e.rho)));
        }
        if !(e.radius > 0.0) {
            return Err(Error::Validation(format!("radius > 0 violated: {}", e.radius)));
        }
        if e.lambdas.is_empty() || e.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "lambdas non-empty and strictly increasing violated".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Parses and validates a config from TOML text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    let line = e
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
    // unknown-field messages quote the key; otherwise read it off the offending line
    let quoted = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("unknown field"))
        .map(str::to_string);
    let key = quoted.or_else(|| {
        let l = text.lines().nth(line? - 1)?;
        let (k, _) = l.split_once('=')?;
        Some(k.trim().to_string())
    });
    Error::Parse { line, key, message }
}
