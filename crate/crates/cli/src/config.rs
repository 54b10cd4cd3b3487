//! JSON configuration files and their resolution into core types.

use std::fs;
use std::path::Path;

use jeanie_core::alignment::{AlignMethod, AlignmentConfig, BaseDistance};
use jeanie_core::encoders::EncoderConfig;
use jeanie_core::fewshot::{LossConfig, Pipeline, Protocol};
use jeanie_core::geometry::{CameraRig, ViewGrid, ViewMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// View grid and alignment kernel settings, also the `align` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSettings {
    pub gamma: f64,
    pub iota: usize,
    pub eta_az: usize,
    pub eta_alt: usize,
    pub step_deg: f64,
    pub base: BaseDistance,
    pub sigma: f64,
    pub mode: ViewMode,
    /// Required for camvpc view simulation.
    pub camera: Option<CameraRig>,
}

impl Default for AlignSettings {
    fn default() -> Self {
        let a = AlignmentConfig::<f64>::default();
        let g = ViewGrid::default();
        Self {
            gamma: a.gamma,
            iota: a.iota,
            eta_az: g.eta_az,
            eta_alt: g.eta_alt,
            step_deg: g.step_deg,
            base: a.base,
            sigma: a.sigma,
            mode: g.mode,
            camera: None,
        }
    }
}

impl AlignSettings {
    pub fn pipeline(&self, method: AlignMethod, support_grid: bool) -> CliResult<Pipeline<f64>> {
        let grid = ViewGrid { eta_az: self.eta_az, eta_alt: self.eta_alt, step_deg: self.step_deg, mode: self.mode };
        grid.validate()?;
        let alignment = AlignmentConfig { gamma: self.gamma, iota: self.iota, base: self.base, sigma: self.sigma };
        alignment.validate()?;
        let camera = match (&self.camera, self.mode) {
            (Some(rig), _) => Some(rig.pose()?),
            (None, ViewMode::Camvpc) => return Err(CliError::Config("camvpc mode needs a `camera` entry".into())),
            (None, ViewMode::Euler) => None,
        };
        Ok(Pipeline { grid, alignment, method, support_grid, camera })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Iota,
    Gamma,
    EtaAz,
    EtaAlt,
    StepDeg,
    Sigma,
}

/// Extra evaluations with one setting varied, reported in `plotdata.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

fn count(param: SweepParam, v: f64) -> CliResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e6 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("sweep value {v} for {param:?} must be a non-negative integer")))
    }
}

impl Sweep {
    pub fn apply(&self, base: &AlignSettings, v: f64) -> CliResult<AlignSettings> {
        let mut s = base.clone();
        match self.param {
            SweepParam::Iota => s.iota = count(self.param, v)?,
            SweepParam::Gamma => s.gamma = v,
            SweepParam::EtaAz => s.eta_az = count(self.param, v)?,
            SweepParam::EtaAlt => s.eta_alt = count(self.param, v)?,
            SweepParam::StepDeg => s.step_deg = v,
            SweepParam::Sigma => s.sigma = v,
        }
        Ok(s)
    }
}

/// Settings shared by `train` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alignment: AlignSettings,
    pub method: AlignMethod,
    /// Simulate views for supports too (JEANIE only; FVM always does).
    pub support_grid: bool,
    /// Architecture for `train`; `eval` takes it from the checkpoint.
    pub encoder: EncoderConfig,
    pub init_seed: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub loss: LossConfig,
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alignment: AlignSettings::default(),
            method: AlignMethod::Jeanie,
            support_grid: false,
            encoder: EncoderConfig::default(),
            init_seed: 0,
            lr: 1e-3,
            weight_decay: 1e-6,
            loss: LossConfig::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn pipeline(&self) -> CliResult<Pipeline<f64>> {
        self.alignment.pipeline(self.method, self.support_grid)
    }
}

/// Reads a JSON file. Unreadable files are data errors, malformed contents
/// config errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_protocol(path: &Path) -> CliResult<Protocol> {
    let p: Protocol = read_json(path)?;
    if p.n_way < 2 || p.z_shot == 0 || p.batch == 0 {
        return Err(CliError::Config(format!("{}: need n_way ≥ 2, z_shot ≥ 1 and batch ≥ 1", path.display())));
    }
    Ok(p)
}
