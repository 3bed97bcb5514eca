//! Calibrated constants checked into the repository. Values are produced
//! once by the recorded command in calibration.toml and asserted as
//! regressions thereafter.

use crate::error::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct PruningCalibration {
    pub c_prune: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DownFilterCalibration {
    pub cantor5_dominated_ratio: f64,
    pub graph_dominated_ratio: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Calibration {
    pub pruning: PruningCalibration,
    pub down_filter: DownFilterCalibration,
}

const RAW: &str = include_str!("../../../calibration.toml");

pub fn calibration() -> Result<Calibration> {
    toml::from_str(RAW).map_err(|e| Error::Parse(format!("calibration file: {e}")))
}
