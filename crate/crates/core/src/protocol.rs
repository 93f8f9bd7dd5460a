//! Driving protocols for the two-level erasure model.
//!
//! The Hamiltonian is `H_t = (ε_t/2)(cos θ_t σz + sin θ_t σx)`. Basis index 0
//! is the upper level at `θ = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::operator::{r, OperatorMatrix};

/// `t -> (value, time derivative)` in physical time.
pub type ScheduleFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThetaMode {
    /// `θ_t = π(t/τ - 1)`: eigenbasis rotates, coherence is generated.
    Quantum,
    /// `θ_t ≡ 0`: the Hamiltonian commutes with itself at all times.
    Classical,
}

impl ThetaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThetaMode::Quantum => "quantum",
            ThetaMode::Classical => "classical",
        }
    }
}

impl fmt::Display for ThetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ThetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quantum" => Ok(ThetaMode::Quantum),
            "classical" => Ok(ThetaMode::Classical),
            other => Err(invalid(format!("unknown protocol mode '{other}'"))),
        }
    }
}

#[derive(Clone)]
enum Schedule {
    Ramp {
        eps0: f64,
        eps_tau: f64,
        mode: ThetaMode,
    },
    Custom {
        eps: ScheduleFn,
        theta: ScheduleFn,
    },
}

/// Instantaneous protocol values at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSample {
    pub t: f64,
    pub eps: f64,
    pub eps_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl ProtocolSample {
    /// Coefficient of σz in `Ḣ_t`.
    pub fn f(&self) -> f64 {
        0.5 * (self.eps_dot * self.theta.cos() - self.eps * self.theta_dot * self.theta.sin())
    }

    /// Coefficient of σx in `Ḣ_t`.
    pub fn g(&self) -> f64 {
        0.5 * (self.eps_dot * self.theta.sin() + self.eps * self.theta_dot * self.theta.cos())
    }

    pub fn hamiltonian(&self) -> OperatorMatrix {
        bloch_operator(
            0.5 * self.eps * self.theta.sin(),
            0.5 * self.eps * self.theta.cos(),
        )
    }

    pub fn power(&self) -> OperatorMatrix {
        bloch_operator(self.g(), self.f())
    }

    /// `(Ḣ^d, Ḣ^c)`: the parts that change the spectrum and the eigenbasis.
    pub fn power_split(&self) -> (OperatorMatrix, OperatorMatrix) {
        let (s, co) = self.theta.sin_cos();
        let a = 0.5 * self.eps_dot;
        let b = 0.5 * self.eps * self.theta_dot;
        (
            bloch_operator(a * s, a * co),
            bloch_operator(b * co, -b * s),
        )
    }

    /// `L_t = |g_t><e_t|`.
    pub fn lowering(&self) -> OperatorMatrix {
        let (s, co) = self.theta.sin_cos();
        OperatorMatrix::from_real_rows(2, &[-0.5 * s, 0.5 * (co - 1.0), 0.5 * (co + 1.0), 0.5 * s])
            .expect("2x2")
    }

    /// `sqrt((ε̇/ε)² + θ̇²)`.
    pub fn speed(&self) -> f64 {
        (self.eps_dot / self.eps).hypot(self.theta_dot)
    }
}

/// `x σx + z σz`.
pub(crate) fn bloch_operator(x: f64, z: f64) -> OperatorMatrix {
    OperatorMatrix::from_rows(2, &[r(z), r(x), r(x), r(-z)]).expect("2x2")
}

/// A finite-time protocol `t ∈ [0, τ] -> (ε_t, θ_t)`.
#[derive(Clone)]
pub struct DrivingProtocol {
    tau: f64,
    schedule: Schedule,
}

impl fmt::Debug for DrivingProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("DrivingProtocol");
        d.field("tau", &self.tau);
        match &self.schedule {
            Schedule::Ramp {
                eps0,
                eps_tau,
                mode,
            } => d
                .field("eps0", eps0)
                .field("eps_tau", eps_tau)
                .field("mode", mode),
            Schedule::Custom { .. } => d.field("schedule", &"custom"),
        };
        d.finish()
    }
}

impl DrivingProtocol {
    /// `ε_t = ε0 + (ετ - ε0) sin²(πt/2τ)` with the chosen θ-mode.
    pub fn new(eps0: f64, eps_tau: f64, tau: f64, mode: ThetaMode) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < eps_tau && eps_tau.is_finite()) {
            return Err(invalid(format!(
                "require 0 < eps0 < eps_tau, got {eps0}, {eps_tau}"
            )));
        }
        check_tau(tau)?;
        Ok(Self {
            tau,
            schedule: Schedule::Ramp {
                eps0,
                eps_tau,
                mode,
            },
        })
    }

    /// User-supplied schedules; `ε_t` must stay positive.
    pub fn custom(tau: f64, eps: ScheduleFn, theta: ScheduleFn) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            tau,
            schedule: Schedule::Custom { eps, theta },
        })
    }

    /// Fixed `(ε, θ)`; handy for stationary checks.
    pub fn constant(eps: f64, theta: f64, tau: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("energy gap must be positive"));
        }
        Self::custom(
            tau,
            Arc::new(move |_| (eps, 0.0)),
            Arc::new(move |_| (theta, 0.0)),
        )
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mode(&self) -> Option<ThetaMode> {
        match self.schedule {
            Schedule::Ramp { mode, .. } => Some(mode),
            Schedule::Custom { .. } => None,
        }
    }

    /// Same schedule shape, new duration.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        match &self.schedule {
            Schedule::Ramp { .. } => Ok(Self {
                tau,
                schedule: self.schedule.clone(),
            }),
            Schedule::Custom { .. } => Err(invalid("custom schedules are tied to their duration")),
        }
    }

    pub fn sample(&self, t: f64) -> Result<ProtocolSample> {
        let slack = 1e-12 * self.tau;
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(Error::OutOfRange { t, tau: self.tau });
        }
        let s = self.sample_unchecked(t.clamp(0.0, self.tau));
        if !(s.eps > 0.0 && s.eps.is_finite()) {
            return Err(invalid(format!(
                "energy gap {} at t = {t} is not positive",
                s.eps
            )));
        }
        Ok(s)
    }

    /// No range or positivity checks.
    #[inline]
    pub fn sample_unchecked(&self, t: f64) -> ProtocolSample {
        match &self.schedule {
            Schedule::Ramp {
                eps0,
                eps_tau,
                mode,
            } => {
                let w = 0.5 * PI / self.tau;
                let (s, co) = (w * t).sin_cos();
                let de = eps_tau - eps0;
                let eps = eps0 + de * s * s;
                let eps_dot = de * w * 2.0 * s * co;
                let (theta, theta_dot) = match mode {
                    ThetaMode::Quantum => (PI * (t / self.tau - 1.0), PI / self.tau),
                    ThetaMode::Classical => (0.0, 0.0),
                };
                ProtocolSample {
                    t,
                    eps,
                    eps_dot,
                    theta,
                    theta_dot,
                }
            }
            Schedule::Custom { eps, theta } => {
                let (e, ed) = eps(t);
                let (th, thd) = theta(t);
                ProtocolSample {
                    t,
                    eps: e,
                    eps_dot: ed,
                    theta: th,
                    theta_dot: thd,
                }
            }
        }
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<OperatorMatrix> {
        Ok(self.sample(t)?.hamiltonian())
    }

    pub fn power_operator(&self, t: f64) -> Result<OperatorMatrix> {
        Ok(self.sample(t)?.power())
    }

    pub fn power_split(&self, t: f64) -> Result<(OperatorMatrix, OperatorMatrix)> {
        Ok(self.sample(t)?.power_split())
    }

    pub fn lowering_operator(&self, t: f64) -> Result<OperatorMatrix> {
        Ok(self.sample(t)?.lowering())
    }

    pub fn driving_speed(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.speed())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!(
            "protocol duration must be positive, got {tau}"
        )));
    }
    Ok(())
}
