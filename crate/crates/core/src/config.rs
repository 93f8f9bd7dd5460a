//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::PhysicsParams;
use crate::lindblad::BoundaryTerms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub ntraj: usize,
    pub master_seed: u64,
    pub rtol: f64,
    pub atol: f64,
    pub bootstrap_resamples: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            ntraj: 30_000,
            master_seed: 20_240_917,
            rtol: 1e-8,
            atol: 1e-12,
            bootstrap_resamples: 1000,
        }
    }
}

/// Counting-field and checkpoint grids; `u` values are in units of β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub u_min: f64,
    pub u_max: f64,
    pub u_count: usize,
    /// Richardson step `h / β` for cumulant extraction.
    pub cumulant_step: f64,
    pub t_checkpoints: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            u_min: -0.25,
            u_max: 1.25,
            u_count: 31,
            cumulant_step: 0.02,
            t_checkpoints: 10,
        }
    }
}

impl GridConfig {
    pub fn u_values(&self, beta: f64) -> Vec<f64> {
        if self.u_count == 1 {
            return vec![self.u_min * beta];
        }
        let step = (self.u_max - self.u_min) / (self.u_count - 1) as f64;
        (0..self.u_count)
            .map(|k| (self.u_min + k as f64 * step) * beta)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Histogram bin width in units of T; Freedman–Diaconis when absent.
    pub bin_width_t: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            bin_width_t: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CgfConfig {
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_count: usize,
}

impl Default for CgfConfig {
    fn default() -> Self {
        Self {
            sweep_min: 1.0,
            sweep_max: 20.0,
            sweep_count: 20,
        }
    }
}

impl CgfConfig {
    pub fn sweep(&self) -> Vec<f64> {
        if self.sweep_count == 1 {
            return vec![self.sweep_min];
        }
        let step = (self.sweep_max - self.sweep_min) / (self.sweep_count - 1) as f64;
        (0..self.sweep_count)
            .map(|k| self.sweep_min + k as f64 * step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    EntropyProduction,
    Landauer,
}

impl From<Boundary> for BoundaryTerms {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::EntropyProduction => BoundaryTerms::EntropyProduction,
            Boundary::Landauer => BoundaryTerms::Landauer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub gammabar_taus: Vec<f64>,
    pub boundary: Boundary,
    pub rtol: f64,
    pub atol: f64,
    /// Trajectories per `γ̄τ` for the empirical column; 0 disables it.
    pub ntraj: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            gammabar_taus: vec![250.0, 500.0],
            boundary: Boundary::EntropyProduction,
            rtol: 1e-11,
            atol: 1e-14,
            ntraj: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub physics: PhysicsParams,
    pub simulation: SimulationConfig,
    pub grid: GridConfig,
    pub output: OutputConfig,
    pub cgf: CgfConfig,
    pub oracle: OracleConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        self.physics
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        let s = &self.simulation;
        if s.ntraj == 0 {
            return Err(config_err("simulation.ntraj must be at least 1"));
        }
        if !(s.rtol > 0.0 && s.atol > 0.0) {
            return Err(config_err("simulation tolerances must be positive"));
        }
        if s.master_seed > i64::MAX as u64 {
            return Err(config_err(
                "simulation.master_seed must fit in a signed 64-bit integer",
            ));
        }
        if s.bootstrap_resamples < 2 {
            return Err(config_err(
                "simulation.bootstrap_resamples must be at least 2",
            ));
        }
        let g = &self.grid;
        if g.u_count == 0 || !(g.u_min.is_finite() && g.u_max.is_finite()) || g.u_max < g.u_min {
            return Err(config_err("grid u range is invalid"));
        }
        if !(g.cumulant_step > 0.0 && g.cumulant_step < 1.0) {
            return Err(config_err("grid.cumulant_step must lie in (0, 1)"));
        }
        if let Some(w) = self.output.bin_width_t {
            if !(w > 0.0 && w.is_finite()) {
                return Err(config_err("output.bin_width_t must be positive"));
            }
        }
        let c = &self.cgf;
        if c.sweep_count == 0 || !(c.sweep_min > 0.0) || c.sweep_max < c.sweep_min {
            return Err(config_err("cgf sweep range is invalid"));
        }
        let o = &self.oracle;
        if o.gammabar_taus.is_empty()
            || o.gammabar_taus.iter().any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return Err(config_err(
                "oracle.gammabar_taus must be a non-empty list of positive values",
            ));
        }
        if !(o.rtol > 0.0 && o.atol > 0.0) {
            return Err(config_err("oracle tolerances must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ThetaMode;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg =
            ExperimentConfig::from_toml("[physics]\nmode = \"classical\"\nalpha = 0.3\n").unwrap();
        assert_eq!(cfg.physics.mode, ThetaMode::Classical);
        assert_eq!(cfg.physics.alpha, 0.3);
        assert_eq!(cfg.simulation, SimulationConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::from_toml("[physics]\nalpah = 1.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[physics]\neps0_ratio = 2.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[physics]\nmode = \"sideways\"\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[oracle]\ngammabar_taus = []\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn u_grid_spans_requested_range() {
        let g = GridConfig {
            u_min: 0.0,
            u_max: 1.0,
            u_count: 5,
            ..Default::default()
        };
        assert_eq!(g.u_values(20.0), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn non_default_values_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.physics.gammabar_tau = 123.456_789_012_345;
        cfg.output.bin_width_t = Some(0.25);
        cfg.oracle.boundary = Boundary::Landauer;
        cfg.simulation.master_seed = u64::MAX / 3;
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
