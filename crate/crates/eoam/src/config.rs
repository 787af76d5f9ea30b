//! TOML configuration files. Speeds marked `_kmh` are converted to m/s on load.

use std::path::Path;

use eoam_core::dmm::BufferPolicy;
use eoam_core::optimizer::{default_speed_grid, PipelineConfig, DEFAULT_MUS};
use eoam_core::runtime::RuntimeConfig;
use eoam_core::scenario::{ScenarioConfig, KMH};
use eoam_core::vehicle::VehicleParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Offline grid: which (speed, mu) points to optimize and how to assemble them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// m/s
    pub speeds: Vec<f64>,
    pub mus: Vec<f64>,
    /// Width of the obstacle the clearing curves are built for, m.
    pub wid_obj: f64,
    /// Spacing of the table's dx axis, m.
    pub dx_step: f64,
    pub pipeline: PipelineConfig,
    pub buffers: BufferPolicy,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            speeds: default_speed_grid(),
            mus: DEFAULT_MUS.to_vec(),
            wid_obj: 2.0,
            dx_step: 0.5,
            pipeline: PipelineConfig::default(),
            buffers: BufferPolicy::default(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> AppResult<()> {
        if self.speeds.is_empty() || self.mus.is_empty() {
            return Err(AppError::Usage(
                "grid spec needs at least one speed and one mu".into(),
            ));
        }
        if self
            .speeds
            .iter()
            .chain(&self.mus)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(AppError::Usage(
                "grid speeds and mus must be positive".into(),
            ));
        }
        if !(self.dx_step > 0.0 && self.wid_obj > 0.0) {
            return Err(AppError::Usage(
                "dx_step and wid_obj must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A single closed-loop run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: ScenarioConfig,
    pub runtime: RuntimeConfig,
}

/// Oncoming traffic column of a sweep: `"none"` or a gap in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OncomingSpec {
    Gap(f64),
    Label(NoneLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoneLabel {
    None,
}

impl OncomingSpec {
    pub fn gap(self) -> Option<f64> {
        match self {
            OncomingSpec::Gap(g) => Some(g),
            OncomingSpec::Label(_) => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            OncomingSpec::Gap(g) => format!("{g}m"),
            OncomingSpec::Label(_) => "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixSpec {
    pub speeds_kmh: Vec<f64>,
    pub mus: Vec<f64>,
    pub oncoming: Vec<OncomingSpec>,
    /// Settings shared by every cell.
    pub base: ScenarioConfig,
    pub runtime: RuntimeConfig,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        Self {
            speeds_kmh: vec![165.0, 120.0, 90.0, 55.0],
            mus: DEFAULT_MUS.to_vec(),
            oncoming: vec![
                OncomingSpec::Label(NoneLabel::None),
                OncomingSpec::Gap(500.0),
                OncomingSpec::Gap(300.0),
                OncomingSpec::Gap(400.0),
            ],
            base: ScenarioConfig::default(),
            runtime: RuntimeConfig::default(),
        }
    }
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub speed_kmh: f64,
    pub mu: f64,
    pub oncoming: OncomingSpec,
    pub config: ScenarioConfig,
}

impl MatrixSpec {
    pub fn validate(&self) -> AppResult<()> {
        if self.speeds_kmh.is_empty() || self.mus.is_empty() || self.oncoming.is_empty() {
            return Err(AppError::Usage(
                "matrix needs speeds_kmh, mus and oncoming entries".into(),
            ));
        }
        self.base.validate()?;
        Ok(())
    }

    /// Cells ordered oncoming-major, then mu, then speed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &onc in &self.oncoming {
            for &mu in &self.mus {
                for &v in &self.speeds_kmh {
                    let mut config = self.base.clone();
                    config.ego_speed_kmh = v;
                    config.mu = mu;
                    config.oncoming_enabled = onc.gap().is_some();
                    if let Some(g) = onc.gap() {
                        config.oncoming_init_dist = g;
                    }
                    out.push(Cell {
                        index: out.len(),
                        speed_kmh: v,
                        mu,
                        oncoming: onc,
                        config,
                    });
                }
            }
        }
        out
    }
}

/// Ego speed of a scenario in m/s.
pub fn ego_speed(cfg: &ScenarioConfig) -> f64 {
    cfg.ego_speed_kmh * KMH
}

/// Parse TOML text, mapping errors to a line and column in `path`.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> AppResult<T> {
    toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
        AppError::Config {
            path: path.to_path_buf(),
            line,
            col,
            message: e.message().to_string(),
        }
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Read and parse a config file; returns the parsed value and the raw text.
pub fn load<T: DeserializeOwned>(path: &Path) -> AppResult<(T, String)> {
    let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
    let value = parse_toml(&text, path)?;
    Ok((value, text))
}

pub fn load_vehicle(path: &Path) -> AppResult<(VehicleParams, String)> {
    let (p, text): (VehicleParams, String) = load(path)?;
    p.validate()?;
    Ok((p, text))
}

pub fn load_grid(path: &Path) -> AppResult<(GridSpec, String)> {
    let (g, text): (GridSpec, String) = load(path)?;
    g.validate()?;
    Ok((g, text))
}

pub fn load_scenario(path: &Path) -> AppResult<(ScenarioFile, String)> {
    let (s, text): (ScenarioFile, String) = load(path)?;
    s.scenario.validate()?;
    Ok((s, text))
}

pub fn load_matrix(path: &Path) -> AppResult<(MatrixSpec, String)> {
    let (m, text): (MatrixSpec, String) = load(path)?;
    m.validate()?;
    Ok((m, text))
}
