//! Dimensionless experiment parameters mapped onto a protocol and bath.
//!
//! The final gap `ε_τ` sets the energy unit, so `β = βε_τ`, `ε_0 = ε0_ratio`
//! and `τ = (γ̄τ) / γ̄`, where `γ̄` is the time-averaged relaxation rate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lindblad::{gamma_bar, BathModel};
use crate::protocol::{DrivingProtocol, ThetaMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsParams {
    pub alpha: f64,
    pub beta_eps_tau: f64,
    pub eps0_ratio: f64,
    pub gammabar_tau: f64,
    #[serde(with = "mode_serde")]
    pub mode: ThetaMode,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            alpha: 0.191,
            beta_eps_tau: 20.0,
            eps0_ratio: 0.02,
            gammabar_tau: 250.0,
            mode: ThetaMode::Quantum,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta_eps_tau", self.beta_eps_tau),
            ("eps0_ratio", self.eps0_ratio),
            ("gammabar_tau", self.gammabar_tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.eps0_ratio >= 1.0 {
            return Err(invalid(format!(
                "eps0_ratio must be below 1, got {}",
                self.eps0_ratio
            )));
        }
        Ok(())
    }
}

mod mode_serde {
    use super::ThetaMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &ThetaMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(m.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ThetaMode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub params: PhysicsParams,
    pub bath: BathModel,
    pub protocol: DrivingProtocol,
    pub gamma_bar: f64,
}

impl Experiment {
    pub fn new(params: PhysicsParams) -> Result<Self> {
        params.validate()?;
        let bath = BathModel::new(params.alpha, params.beta_eps_tau)?;
        let unit = DrivingProtocol::new(params.eps0_ratio, 1.0, 1.0, params.mode)?;
        let gb = gamma_bar(&unit, &bath)?;
        let protocol = unit.with_tau(params.gammabar_tau / gb)?;
        Ok(Self {
            params,
            bath,
            protocol,
            gamma_bar: gb,
        })
    }

    pub fn tau(&self) -> f64 {
        self.protocol.tau()
    }

    pub fn temperature(&self) -> f64 {
        self.bath.temperature()
    }

    /// Same physics with another `γ̄τ`.
    pub fn with_gammabar_tau(&self, gammabar_tau: f64) -> Result<Self> {
        Self::new(PhysicsParams {
            gammabar_tau,
            ..self.params
        })
    }

    pub fn with_mode(&self, mode: ThetaMode) -> Result<Self> {
        Self::new(PhysicsParams {
            mode,
            ..self.params
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters() {
        let e = Experiment::new(PhysicsParams::default()).unwrap();
        assert!((e.gamma_bar - 0.049_994_9).abs() < 1e-6);
        assert!((e.tau() - 250.0 / e.gamma_bar).abs() < 1e-9);
        assert!((e.temperature() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        for p in [
            PhysicsParams {
                alpha: -1.0,
                ..Default::default()
            },
            PhysicsParams {
                eps0_ratio: 1.5,
                ..Default::default()
            },
            PhysicsParams {
                gammabar_tau: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(Experiment::new(p).is_err());
        }
    }

    #[test]
    fn gamma_bar_is_independent_of_duration() {
        let a = Experiment::new(PhysicsParams::default()).unwrap();
        let b = a.with_gammabar_tau(500.0).unwrap();
        assert!((a.gamma_bar - b.gamma_bar).abs() < 1e-14);
        assert!((b.tau() - 2.0 * a.tau()).abs() < 1e-9 * b.tau());
    }
}
