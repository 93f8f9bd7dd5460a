//! Quantum-jump unraveling of the erasure master equation.
//!
//! Between jumps the state is integrated in the instantaneous eigenbasis
//! `{|e_t>, |g_t>}` with the dynamical phase factored out:
//! `|ψ> = e^{-iφ/2} c_e |e_t> + e^{iφ/2} c_g |g_t>`, `φ̇ = ε_t`. This removes
//! the fast Larmor rotation from the amplitudes; `|c_e|² + |c_g|²` is the
//! unnormalised survival probability.

use std::fmt;

use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lindblad::BathModel;
use crate::ode::{Dopri5, Tolerances};
use crate::operator::{c, r, OperatorMatrix, C64};
use crate::protocol::{DrivingProtocol, ProtocolSample};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpKind {
    Emission,
    Absorption,
}

impl JumpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JumpKind::Emission => "emission",
            JumpKind::Absorption => "absorption",
        }
    }

    /// Heat delivered to the bath per quantum.
    pub fn heat_sign(self) -> f64 {
        match self {
            JumpKind::Emission => 1.0,
            JumpKind::Absorption => -1.0,
        }
    }
}

impl fmt::Display for JumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: JumpKind,
    pub quantum: f64,
}

impl JumpEvent {
    pub fn heat(&self) -> f64 {
        self.kind.heat_sign() * self.quantum
    }
}

/// Instantaneous energy level, index 0 is excited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Excited,
    Ground,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Excited => "e",
            Level::Ground => "g",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub events: Vec<JumpEvent>,
    /// Sum of event heats.
    pub heat: f64,
    /// `heat + T ln p_0(n_0) - T ln p_τ(n_τ)` with Gibbs probabilities of the end-point outcomes.
    pub excess_heat: f64,
    pub initial_level: Level,
    pub final_level: Level,
}

impl TrajectoryRecord {
    /// `heat - T ln 2`.
    pub fn landauer_excess(&self, temperature: f64) -> f64 {
        self.heat - temperature * std::f64::consts::LN_2
    }

    /// Two consecutive events of the same kind.
    pub fn has_repeated_kind(&self) -> bool {
        self.events.windows(2).any(|w| w[0].kind == w[1].kind)
    }
}

/// Two lab-frame amplitudes; not necessarily normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    amplitudes: [C64; 2],
}

impl PureState {
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        if !(a0.norm_sqr() + a1.norm_sqr()).is_finite() {
            return Err(invalid("state amplitudes must be finite"));
        }
        Ok(Self {
            amplitudes: [a0, a1],
        })
    }

    /// `|e_θ>` or `|g_θ>` of `(ε/2)(cos θ σz + sin θ σx)`.
    pub fn eigenstate(theta: f64, level: Level) -> Self {
        let (s, co) = (0.5 * theta).sin_cos();
        let amplitudes = match level {
            Level::Excited => [r(co), r(s)],
            Level::Ground => [r(-s), r(co)],
        };
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes[0].norm_sqr() + self.amplitudes[1].norm_sqr()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) {
            return Err(Error::Numerical("cannot normalise a null state".into()));
        }
        Ok(Self {
            amplitudes: [self.amplitudes[0] / n, self.amplitudes[1] / n],
        })
    }

    /// `|ψ><ψ|`.
    pub fn density_matrix(&self) -> OperatorMatrix {
        let [a, b] = self.amplitudes;
        OperatorMatrix::from_rows(2, &[a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()])
            .expect("2x2")
    }

    fn to_frame(self, theta: f64) -> Frame {
        let (s, co) = (0.5 * theta).sin_cos();
        let [a, b] = self.amplitudes;
        Frame {
            ce: a * co + b * s,
            cg: b * co - a * s,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub tol: Tolerances,
    /// Bisection stops when the bracket is below this fraction of τ.
    pub time_tol_fraction: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances {
                rtol: 1e-8,
                atol: 1e-12,
            },
            time_tol_fraction: 1e-10,
        }
    }
}

/// `H_t - (i/2)[Γ_↓ L†L + Γ_↑ L L†]`.
pub fn effective_hamiltonian(
    p: &DrivingProtocol,
    bath: &BathModel,
    t: f64,
) -> Result<OperatorMatrix> {
    let s = p.sample(t)?;
    let l = s.lowering();
    let ldl = &l.adjoint() * &l;
    let lld = &l * &l.adjoint();
    let decay = &ldl.scale(bath.emission_rate(s.eps)) + &lld.scale(bath.absorption_rate(s.eps));
    Ok(&s.hamiltonian() + &decay.scale_c(c(0.0, -0.5)))
}

/// Eigenframe amplitudes plus the accumulated dynamical phase.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    ce: C64,
    cg: C64,
    phi: f64,
}

impl Frame {
    fn pack(&self) -> [f64; 5] {
        [self.ce.re, self.ce.im, self.cg.re, self.cg.im, self.phi]
    }

    fn unpack(y: &[f64; 5]) -> Self {
        Self {
            ce: c(y[0], y[1]),
            cg: c(y[2], y[3]),
            phi: y[4],
        }
    }

    fn at_level(level: Level, phi: f64) -> Self {
        match level {
            Level::Excited => Self {
                ce: r(1.0),
                cg: r(0.0),
                phi,
            },
            Level::Ground => Self {
                ce: r(0.0),
                cg: r(1.0),
                phi,
            },
        }
    }

    fn lab(&self, theta: f64) -> PureState {
        let (s, co) = (0.5 * theta).sin_cos();
        let half = C64::from_polar(1.0, -0.5 * self.phi);
        let e = self.ce * half;
        let g = self.cg * half.conj();
        PureState {
            amplitudes: [e * co - g * s, e * s + g * co],
        }
    }
}

fn norm_sqr(y: &[f64; 5]) -> f64 {
    y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]
}

fn frame_rhs(s: &ProtocolSample, bath: &BathModel, y: &[f64; 5], dy: &mut [f64; 5]) {
    let f = Frame::unpack(y);
    let half_rate = 0.5 * s.theta_dot;
    let rot = C64::from_polar(1.0, f.phi);
    let dce = rot * f.cg * half_rate - f.ce * (0.5 * bath.emission_rate(s.eps));
    let dcg = -(rot.conj() * f.ce) * half_rate - f.cg * (0.5 * bath.absorption_rate(s.eps));
    *dy = [dce.re, dce.im, dcg.re, dcg.im, s.eps];
}

/// Amplitude block measured jointly so that the relative tolerance follows the survival norm.
fn frame_norm(err: &[f64; 5], y0: &[f64; 5], y1: &[f64; 5], tol: &Tolerances) -> f64 {
    let amp_scale = tol.atol + tol.rtol * norm_sqr(y0).max(norm_sqr(y1)).sqrt();
    let amp =
        (err[0] * err[0] + err[1] * err[1] + err[2] * err[2] + err[3] * err[3]).sqrt() / amp_scale;
    let phase = err[4].abs() / (tol.atol + tol.rtol * y0[4].abs().max(y1[4].abs()));
    amp.max(phase)
}

type FrameRhs<'a> = Box<dyn FnMut(f64, &[f64; 5], &mut [f64; 5]) + 'a>;

fn solver<'a>(
    p: &'a DrivingProtocol,
    bath: &'a BathModel,
    t0: f64,
    frame: Frame,
    opts: &TrajectoryOptions,
) -> Dopri5<FrameRhs<'a>, 5> {
    let rhs: FrameRhs<'a> =
        Box::new(move |t, y, dy| frame_rhs(&p.sample_unchecked(t), bath, y, dy));
    Dopri5::new(rhs, t0, frame.pack(), opts.tol).with_norm(frame_norm)
}

/// Integrates `i d|ψ>/dt = H_eff |ψ>` from `t0` to `t1`; the result is unnormalised.
pub fn evolve_nonhermitian(
    state: PureState,
    t0: f64,
    t1: f64,
    p: &DrivingProtocol,
    bath: &BathModel,
    opts: &TrajectoryOptions,
) -> Result<PureState> {
    if !(t0 < t1) {
        return Err(invalid(format!("need t0 < t1, got {t0} and {t1}")));
    }
    let start = p.sample(t0)?;
    let end = p.sample(t1)?;
    let mut ode = solver(p, bath, t0, state.to_frame(start.theta), opts);
    ode.integrate_to(t1)?;
    Ok(Frame::unpack(ode.y()).lab(end.theta))
}

/// Outcome of one waiting-time draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waiting {
    Jump(f64),
    ProtocolEnd,
}

/// Advances until the survival norm falls to `threshold`, locating the crossing by bisection.
fn wait_for_jump<F>(
    ode: &mut Dopri5<F, 5>,
    threshold: f64,
    target: f64,
    t_tol: f64,
) -> Result<Option<f64>>
where
    F: FnMut(f64, &[f64; 5], &mut [f64; 5]),
{
    ode.step(target)?;
    if norm_sqr(ode.y()) > threshold {
        return Ok(None);
    }
    let (mut lo, mut hi) = (ode.t_prev(), ode.t());
    if norm_sqr(&ode.interpolate(lo)) <= threshold {
        return Err(Error::Numerical("waiting-time root not bracketed".into()));
    }
    while hi - lo > t_tol {
        let mid = 0.5 * (lo + hi);
        if norm_sqr(&ode.interpolate(mid)) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

/// Draws `r ∈ (0,1)` and evolves a normalised state until `‖ψ_t‖² = r` or `t = τ`.
pub fn sample_waiting_time<R: Rng + ?Sized>(
    state: PureState,
    t0: f64,
    p: &DrivingProtocol,
    bath: &BathModel,
    rng: &mut R,
    opts: &TrajectoryOptions,
) -> Result<(Waiting, PureState)> {
    if (state.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(invalid("waiting-time sampling needs a normalised state"));
    }
    let tau = p.tau();
    let start = p.sample(t0)?;
    let threshold: f64 = rng.sample(Open01);
    let mut ode = solver(p, bath, t0, state.to_frame(start.theta), opts);
    while ode.t() < tau {
        if let Some(tj) = wait_for_jump(&mut ode, threshold, tau, opts.time_tol_fraction * tau)? {
            let f = Frame::unpack(&ode.interpolate(tj));
            return Ok((Waiting::Jump(tj), f.lab(p.sample(tj)?.theta)));
        }
    }
    Ok((
        Waiting::ProtocolEnd,
        Frame::unpack(ode.y()).lab(p.sample(tau)?.theta),
    ))
}

fn choose_jump<R: Rng + ?Sized>(
    ce: C64,
    cg: C64,
    s: &ProtocolSample,
    bath: &BathModel,
    rng: &mut R,
) -> Result<JumpKind> {
    // L†L = |e><e| and LL† = |g><g|, so the rate-weighted channel weights
    // reduce to rate times level population.
    let we = bath.emission_rate(s.eps) * ce.norm_sqr();
    let wg = bath.absorption_rate(s.eps) * cg.norm_sqr();
    let total = we + wg;
    if !(total > 0.0) {
        return Err(Error::Numerical(format!(
            "no jump channel open at t = {}",
            s.t
        )));
    }
    let x: f64 = rng.gen();
    Ok(if x * total < we {
        JumpKind::Emission
    } else {
        JumpKind::Absorption
    })
}

/// Picks a channel for a normalised state and returns the post-jump eigenstate.
pub fn apply_jump<R: Rng + ?Sized>(
    state: PureState,
    t: f64,
    p: &DrivingProtocol,
    bath: &BathModel,
    rng: &mut R,
) -> Result<(PureState, JumpEvent)> {
    let s = p.sample(t)?;
    let f = state.normalized()?.to_frame(s.theta);
    let kind = choose_jump(f.ce, f.cg, &s, bath, rng)?;
    let level = match kind {
        JumpKind::Emission => Level::Ground,
        JumpKind::Absorption => Level::Excited,
    };
    Ok((
        PureState::eigenstate(s.theta, level),
        JumpEvent {
            time: t,
            kind,
            quantum: s.eps,
        },
    ))
}

fn gibbs_excited(beta: f64, eps: f64) -> f64 {
    1.0 / (1.0 + (beta * eps).exp())
}

fn ln_gibbs(beta: f64, eps: f64, level: Level) -> f64 {
    // ln p_e = -ln(1 + e^{βε}), ln p_g = -ln(1 + e^{-βε})
    let x = beta * eps;
    match level {
        Level::Excited => -(x.max(0.0) + (-x.abs()).exp().ln_1p()),
        Level::Ground => -((-x).max(0.0) + (-x.abs()).exp().ln_1p()),
    }
}

fn draw_level<R: Rng + ?Sized>(p_excited: f64, rng: &mut R) -> Level {
    let x: f64 = rng.gen();
    if x < p_excited {
        Level::Excited
    } else {
        Level::Ground
    }
}

/// One unravelled run; also returns normalised lab states at `checkpoints` (ascending, within `[0, τ]`).
pub fn run_trajectory_with_checkpoints(
    p: &DrivingProtocol,
    bath: &BathModel,
    seed: u64,
    checkpoints: &[f64],
    opts: &TrajectoryOptions,
) -> Result<(TrajectoryRecord, Vec<PureState>)> {
    let tau = p.tau();
    if checkpoints.windows(2).any(|w| w[0] > w[1])
        || checkpoints.iter().any(|&t| !(0.0..=tau).contains(&t))
    {
        return Err(invalid("checkpoints must be ascending and inside [0, tau]"));
    }
    let beta = bath.beta();
    let first = p.sample(0.0)?;
    let last = p.sample(tau)?;
    let mut rng = stream(seed);
    let initial_level = draw_level(gibbs_excited(beta, first.eps), &mut rng);
    let mut ode = solver(p, bath, 0.0, Frame::at_level(initial_level, 0.0), opts);
    let mut threshold: f64 = rng.sample(Open01);
    let mut events: Vec<JumpEvent> = Vec::new();
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    let t_tol = opts.time_tol_fraction * tau;
    loop {
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= ode.t() {
            let tc = checkpoints[next_cp];
            let f = Frame::unpack(&ode.interpolate(tc));
            snapshots.push(f.lab(p.sample(tc)?.theta).normalized()?);
            next_cp += 1;
        }
        if ode.t() >= tau {
            break;
        }
        let target = checkpoints.get(next_cp).copied().unwrap_or(tau).min(tau);
        if let Some(tj) = wait_for_jump(&mut ode, threshold, target, t_tol)? {
            let f = Frame::unpack(&ode.interpolate(tj));
            let s = p.sample_unchecked(tj);
            let kind = choose_jump(f.ce, f.cg, &s, bath, &mut rng)?;
            let level = match kind {
                JumpKind::Emission => Level::Ground,
                JumpKind::Absorption => Level::Excited,
            };
            events.push(JumpEvent {
                time: tj,
                kind,
                quantum: s.eps,
            });
            ode.reset(tj, Frame::at_level(level, f.phi).pack());
            threshold = rng.sample(Open01);
        }
    }
    let end = Frame::unpack(ode.y());
    let survival = end.ce.norm_sqr() + end.cg.norm_sqr();
    let final_level = draw_level(end.ce.norm_sqr() / survival, &mut rng);
    let heat: f64 = events.iter().map(JumpEvent::heat).sum();
    let temperature = bath.temperature();
    let excess_heat = heat + temperature * ln_gibbs(beta, first.eps, initial_level)
        - temperature * ln_gibbs(beta, last.eps, final_level);
    let record = TrajectoryRecord {
        seed,
        events,
        heat,
        excess_heat,
        initial_level,
        final_level,
    };
    Ok((record, snapshots))
}

pub fn run_trajectory(
    p: &DrivingProtocol,
    bath: &BathModel,
    seed: u64,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    Ok(run_trajectory_with_checkpoints(p, bath, seed, &[], opts)?.0)
}

/// `n` runs seeded by `derive_seed(master_seed, i)`, returned in index order.
pub fn run_ensemble(
    p: &DrivingProtocol,
    bath: &BathModel,
    n: usize,
    master_seed: u64,
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    if n == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| run_trajectory(p, bath, derive_seed(master_seed, i), opts))
        .collect()
}

/// Trajectory-averaged `|ψ_t><ψ_t|` at each checkpoint.
pub fn ensemble_average_states(
    p: &DrivingProtocol,
    bath: &BathModel,
    n: usize,
    master_seed: u64,
    checkpoints: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Vec<OperatorMatrix>> {
    if n == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    let per_run: Vec<Vec<PureState>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            run_trajectory_with_checkpoints(p, bath, derive_seed(master_seed, i), checkpoints, opts)
                .map(|x| x.1)
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![DMatrix::<C64>::zeros(2, 2); checkpoints.len()];
    for run in &per_run {
        for (acc, psi) in sums.iter_mut().zip(run) {
            *acc += psi.density_matrix().matrix();
        }
    }
    sums.into_iter()
        .map(|m| OperatorMatrix::from_matrix(m / r(n as f64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ThetaMode;

    fn bath() -> BathModel {
        BathModel::new(0.191, 20.0).unwrap()
    }

    fn default_protocol(mode: ThetaMode) -> DrivingProtocol {
        DrivingProtocol::new(0.02, 1.0, 250.0 / 0.049_994_9, mode).unwrap()
    }

    #[test]
    fn effective_hamiltonian_decay_part() {
        let b = bath();
        let p = DrivingProtocol::constant(0.7, 0.0, 10.0).unwrap();
        let h = effective_hamiltonian(&p, &b, 1.0).unwrap();
        assert!((h.get(0, 0).im + 0.5 * b.emission_rate(0.7)).abs() < 1e-15);
        assert!((h.get(1, 1).im + 0.5 * b.absorption_rate(0.7)).abs() < 1e-15);
        let q = default_protocol(ThetaMode::Quantum);
        let t = 0.3 * q.tau();
        let heff = effective_hamiltonian(&q, &b, t).unwrap();
        let gamma = b.characteristic_rate(q.sample(t).unwrap().eps);
        assert!((heff.trace().im + gamma).abs() < 1e-14);
        let anti = (&heff - &heff.adjoint()).scale_c(c(0.0, -0.5));
        assert!(anti.eigh().unwrap().values.iter().all(|&x| x <= 1e-15));
    }

    #[test]
    fn evolution_without_bath_is_unitary() {
        let b = BathModel::new(0.0, 20.0).unwrap();
        let p = default_protocol(ThetaMode::Quantum);
        let psi = PureState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let tight = TrajectoryOptions {
            tol: Tolerances {
                rtol: 1e-12,
                atol: 1e-14,
            },
            ..Default::default()
        };
        let out = evolve_nonhermitian(psi, 0.0, p.tau(), &p, &b, &tight).unwrap();
        assert!(
            (out.norm_sqr() - 1.0).abs() < 1e-10,
            "{}",
            out.norm_sqr() - 1.0
        );
    }

    #[test]
    fn excited_decay_matches_scalar_integral() {
        let b = bath();
        let p = default_protocol(ThetaMode::Classical);
        let (t0, t1) = (0.2 * p.tau(), 0.25 * p.tau());
        let psi = PureState::eigenstate(0.0, Level::Excited);
        let out = evolve_nonhermitian(psi, t0, t1, &p, &b, &TrajectoryOptions::default()).unwrap();
        let integral = crate::quadrature::integrate_adaptive(
            |t| b.emission_rate(p.sample(t).unwrap().eps),
            t0,
            t1,
            1e-14,
            1e-13,
            100,
        )
        .unwrap();
        assert!(
            (out.norm_sqr() - (-integral).exp()).abs() < 5e-8 * (-integral).exp(),
            "{} {}",
            out.norm_sqr(),
            (-integral).exp()
        );
    }

    #[test]
    fn lab_frame_matches_direct_integration() {
        let b = bath();
        let p = default_protocol(ThetaMode::Quantum);
        let (t0, t1) = (0.1 * p.tau(), 0.1 * p.tau() + 40.0);
        let psi = PureState::new(c(0.6, 0.1), c(-0.3, 0.7))
            .unwrap()
            .normalized()
            .unwrap();
        let fast = evolve_nonhermitian(psi, t0, t1, &p, &b, &TrajectoryOptions::default()).unwrap();
        let pack = |s: &PureState| {
            let [a, bb] = s.amplitudes();
            [a.re, a.im, bb.re, bb.im]
        };
        let heff = |t: f64| effective_hamiltonian(&p, &b, t).unwrap();
        let mut ode = Dopri5::new(
            |t, y: &[f64; 4], dy: &mut [f64; 4]| {
                let h = heff(t);
                let v = [c(y[0], y[1]), c(y[2], y[3])];
                for i in 0..2 {
                    let d = (h.get(i, 0) * v[0] + h.get(i, 1) * v[1]) * c(0.0, -1.0);
                    dy[2 * i] = d.re;
                    dy[2 * i + 1] = d.im;
                }
            },
            t0,
            pack(&psi),
            Tolerances {
                rtol: 1e-11,
                atol: 1e-14,
            },
        );
        ode.integrate_to(t1).unwrap();
        let got = pack(&fast);
        for (k, (g, w)) in got.iter().zip(ode.y()).take(4).enumerate() {
            assert!((g - w).abs() < 1e-6, "component {k}: {g} vs {w}");
        }
    }

    #[test]
    fn ground_state_decays_only_through_absorption() {
        let b = bath();
        let p = DrivingProtocol::constant(1.0, 0.4, 100.0).unwrap();
        let psi = PureState::eigenstate(0.4, Level::Ground);
        let out =
            evolve_nonhermitian(psi, 0.0, 100.0, &p, &b, &TrajectoryOptions::default()).unwrap();
        let expected = (-b.absorption_rate(1.0) * 100.0).exp();
        assert!((out.norm_sqr() - expected).abs() < 1e-9);
    }

    #[test]
    fn jump_channel_limits() {
        let cold = BathModel::new(0.191, 1e6).unwrap();
        let p = DrivingProtocol::constant(1.0, 0.3, 10.0).unwrap();
        let mut rng = stream(1);
        for _ in 0..20 {
            let (post, ev) = apply_jump(
                PureState::eigenstate(0.3, Level::Excited),
                1.0,
                &p,
                &cold,
                &mut rng,
            )
            .unwrap();
            assert_eq!(ev.kind, JumpKind::Emission);
            let g = PureState::eigenstate(0.3, Level::Ground).amplitudes();
            let a = post.amplitudes();
            assert!((a[0] - g[0]).norm() < 1e-15 && (a[1] - g[1]).norm() < 1e-15);
        }
        let b = bath();
        for _ in 0..20 {
            let (_, ev) = apply_jump(
                PureState::eigenstate(0.3, Level::Ground),
                1.0,
                &p,
                &b,
                &mut rng,
            )
            .unwrap();
            assert_eq!(ev.kind, JumpKind::Absorption);
        }
    }

    #[test]
    fn waiting_time_is_exponential_for_static_decay() {
        let b = bath();
        let eps = 0.5;
        let p = DrivingProtocol::constant(eps, 0.0, 1e9).unwrap();
        let rate = b.emission_rate(eps);
        let mut rng = stream(2024);
        let n = 10_000;
        let mut samples: Vec<f64> = (0..n)
            .map(|_| {
                let (w, _) = sample_waiting_time(
                    PureState::eigenstate(0.0, Level::Excited),
                    0.0,
                    &p,
                    &b,
                    &mut rng,
                    &TrajectoryOptions::default(),
                )
                .unwrap();
                match w {
                    Waiting::Jump(t) => t,
                    Waiting::ProtocolEnd => f64::INFINITY,
                }
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        let d = samples
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let cdf = 1.0 - (-rate * t).exp();
                (cdf - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic Kolmogorov critical value for p = 0.01.
        assert!(d * (n as f64).sqrt() < 1.628, "KS statistic {d}");
    }

    #[test]
    fn survival_case_returns_protocol_end() {
        let b = BathModel::new(1e-9, 20.0).unwrap();
        let p = DrivingProtocol::constant(0.5, 0.0, 10.0).unwrap();
        let mut rng = stream(5);
        let (w, s) = sample_waiting_time(
            PureState::eigenstate(0.0, Level::Excited),
            0.0,
            &p,
            &b,
            &mut rng,
            &TrajectoryOptions::default(),
        )
        .unwrap();
        assert_eq!(w, Waiting::ProtocolEnd);
        assert!(s.norm_sqr() > 0.999);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let b = bath();
        let p = default_protocol(ThetaMode::Quantum);
        let opts = TrajectoryOptions::default();
        let a = run_trajectory(&p, &b, 99, &opts).unwrap();
        let bb = run_trajectory(&p, &b, 99, &opts).unwrap();
        assert_eq!(a, bb);
        let ens = run_ensemble(&p, &b, 1, 7, &opts).unwrap();
        assert_eq!(
            ens[0],
            run_trajectory(&p, &b, derive_seed(7, 0), &opts).unwrap()
        );
    }

    #[test]
    fn record_invariants_hold() {
        let b = bath();
        let opts = TrajectoryOptions::default();
        for mode in [ThetaMode::Quantum, ThetaMode::Classical] {
            let p = default_protocol(mode);
            for rec in run_ensemble(&p, &b, 40, 3, &opts).unwrap() {
                let sum: f64 = rec.events.iter().map(JumpEvent::heat).sum();
                assert_eq!(rec.heat, sum);
                assert!(rec.events.windows(2).all(|w| w[0].time < w[1].time));
                assert!(rec
                    .events
                    .iter()
                    .all(|e| e.quantum > 0.0 && e.time >= 0.0 && e.time <= p.tau()));
                if mode == ThetaMode::Classical {
                    assert!(!rec.has_repeated_kind());
                }
            }
        }
    }

    #[test]
    fn decoupled_bath_never_jumps() {
        let b = BathModel::new(0.0, 20.0).unwrap();
        let p = default_protocol(ThetaMode::Quantum);
        let rec = run_trajectory(&p, &b, 11, &TrajectoryOptions::default()).unwrap();
        assert!(rec.events.is_empty());
        assert_eq!(rec.heat, 0.0);
    }

    #[test]
    fn checkpoint_states_are_normalised() {
        let b = bath();
        let p = default_protocol(ThetaMode::Quantum);
        let cps: Vec<f64> = (0..=4).map(|k| k as f64 * p.tau() / 4.0).collect();
        let (_, states) =
            run_trajectory_with_checkpoints(&p, &b, 1, &cps, &TrajectoryOptions::default())
                .unwrap();
        assert_eq!(states.len(), cps.len());
        assert!(states.iter().all(|s| (s.norm_sqr() - 1.0).abs() < 1e-12));
    }
}
