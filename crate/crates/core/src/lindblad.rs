//! Thermal master equation, its counting-field deformation and the exact
//! full-counting-statistics propagator.
//!
//! Superoperators act on column-stacked operators, `vec(AXB) = (Bᵀ ⊗ A) vec X`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};

use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerances};
use crate::operator::{c, gibbs_state, matrix_mean_j, r, OperatorMatrix, C64};
use crate::protocol::{DrivingProtocol, ProtocolSample};
use crate::quadrature::integrate_adaptive;

/// Ohmic bosonic bath with coupling `alpha` at inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModel {
    alpha: f64,
    beta: f64,
}

impl BathModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!(
                "coupling must be non-negative, got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!(
                "inverse temperature must be positive, got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// Bose occupation `1/(e^{βε} - 1)`.
    pub fn occupation(&self, eps: f64) -> f64 {
        1.0 / (self.beta * eps).exp_m1()
    }

    /// `αεN`, finite as `ε -> 0`.
    pub fn absorption_rate(&self, eps: f64) -> f64 {
        let x = self.beta * eps;
        if x.abs() < 1e-6 {
            self.alpha / self.beta * (1.0 - 0.5 * x + x * x / 12.0)
        } else {
            self.alpha * eps / x.exp_m1()
        }
    }

    /// `αε(N + 1)`.
    pub fn emission_rate(&self, eps: f64) -> f64 {
        self.absorption_rate(eps) + self.alpha * eps
    }

    /// `γ = (αε/2) coth(βε/2)`.
    pub fn characteristic_rate(&self, eps: f64) -> f64 {
        self.absorption_rate(eps) + 0.5 * self.alpha * eps
    }
}

/// Linear map on operators of a `d`-dimensional space, stored as `d² × d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d: usize,
    mat: DMatrix<C64>,
}

pub fn vectorize(a: &OperatorMatrix) -> DVector<C64> {
    DVector::from_column_slice(a.matrix().as_slice())
}

pub fn unvectorize(v: &DVector<C64>, d: usize) -> OperatorMatrix {
    OperatorMatrix::from_matrix(DMatrix::from_column_slice(d, d, v.as_slice())).expect("square")
}

impl Superoperator {
    pub fn from_matrix(d: usize, mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != d * d || mat.ncols() != d * d {
            return Err(invalid(
                "superoperator shape does not match Hilbert dimension",
            ));
        }
        Ok(Self { d, mat })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            mat: DMatrix::identity(d * d, d * d),
        }
    }

    /// `X -> A X`.
    pub fn spre(a: &OperatorMatrix) -> Self {
        let d = a.dim();
        Self {
            d,
            mat: DMatrix::<C64>::identity(d, d).kronecker(a.matrix()),
        }
    }

    /// `X -> X B`.
    pub fn spost(b: &OperatorMatrix) -> Self {
        let d = b.dim();
        Self {
            d,
            mat: b
                .matrix()
                .transpose()
                .kronecker(&DMatrix::<C64>::identity(d, d)),
        }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &OperatorMatrix, b: &OperatorMatrix) -> Self {
        Self {
            d: a.dim(),
            mat: b.matrix().transpose().kronecker(a.matrix()),
        }
    }

    /// Dissipator `X -> J X J† - {J†J, X}/2`, with the jump term weighted by `w`.
    pub fn dissipator(j: &OperatorMatrix, w: f64) -> Self {
        let jd = j.adjoint();
        let jdj = &jd * j;
        let anti = Self::spre(&jdj).add(&Self::spost(&jdj)).scale(r(-0.5));
        Self::sandwich(j, &jd).scale(r(w)).add(&anti)
    }

    pub fn hilbert_dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn apply(&self, x: &OperatorMatrix) -> OperatorMatrix {
        unvectorize(&(&self.mat * vectorize(x)), self.d)
    }

    /// Hilbert–Schmidt adjoint.
    pub fn adjoint(&self) -> Self {
        Self {
            d: self.d,
            mat: self.mat.adjoint(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            mat: &self.mat - &other.mat,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            d: self.d,
            mat: self.mat.map(|z| z * s),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let schur = nalgebra::linalg::Schur::try_new(self.mat.clone(), 1e-14, 10_000)
            .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
        let ev = schur
            .eigenvalues()
            .ok_or_else(|| Error::Numerical("eigenvalues unavailable".into()))?;
        Ok(ev.iter().copied().collect())
    }
}

fn generator(s: &ProtocolSample, bath: &BathModel, u: f64) -> Superoperator {
    let h = s.hamiltonian();
    let l = s.lowering();
    let ge = bath.emission_rate(s.eps);
    let ga = bath.absorption_rate(s.eps);
    let unitary = Superoperator::spre(&h)
        .sub(&Superoperator::spost(&h))
        .scale(c(0.0, -1.0));
    let emit = Superoperator::dissipator(&l, (-u * s.eps).exp()).scale(r(ge));
    let absorb = Superoperator::dissipator(&l.adjoint(), (u * s.eps).exp()).scale(r(ga));
    unitary.add(&emit).add(&absorb)
}

pub(crate) fn liouvillian_from_sample(s: &ProtocolSample, bath: &BathModel) -> Superoperator {
    generator(s, bath, 0.0)
}

/// Generator of the thermal master equation at time `t`.
pub fn liouvillian(p: &DrivingProtocol, bath: &BathModel, t: f64) -> Result<Superoperator> {
    Ok(generator(&p.sample(t)?, bath, 0.0))
}

/// Jump terms dressed by `e^{-uε}` (emission) and `e^{+uε}` (absorption).
pub fn tilted_liouvillian(
    p: &DrivingProtocol,
    bath: &BathModel,
    t: f64,
    u: f64,
) -> Result<Superoperator> {
    if !u.is_finite() {
        return Err(invalid("counting field must be finite"));
    }
    Ok(generator(&p.sample(t)?, bath, u))
}

pub fn characteristic_rate(p: &DrivingProtocol, bath: &BathModel, t: f64) -> Result<f64> {
    Ok(bath.characteristic_rate(p.sample(t)?.eps))
}

/// Time average `(1/τ) ∫ γ_t dt`.
pub fn gamma_bar(p: &DrivingProtocol, bath: &BathModel) -> Result<f64> {
    let tau = p.tau();
    let v = integrate_adaptive(
        |s| bath.characteristic_rate(p.sample_unchecked(s * tau).eps),
        0.0,
        1.0,
        1e-14,
        1e-12,
        500,
    )?;
    Ok(v)
}

/// Drazin inverse `(L - P)^{-1} + P` with `P(X) = π tr X`.
pub fn drazin_inverse(l: &Superoperator, pi: &OperatorMatrix) -> Result<Superoperator> {
    let d = l.hilbert_dim();
    if pi.dim() != d || !pi.is_density_matrix(1e-10) {
        return Err(invalid(
            "reference state must be a density matrix of matching dimension",
        ));
    }
    let residual = l.apply(pi).max_abs();
    if residual > 1e-9 * l.norm().max(1.0) {
        return Err(invalid(format!(
            "reference state is not stationary (residual {residual:e})"
        )));
    }
    let vp = vectorize(pi);
    let vi = vectorize(&OperatorMatrix::identity(d));
    let proj = &vp * vi.transpose();
    let m = &l.mat - &proj;
    let lu = m.full_piv_lu();
    let diag = lu.u().diagonal();
    let big = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let small = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if !(small > 1e-12 * big) {
        return Err(Error::Degenerate { gap: small / big });
    }
    let inv = lu.try_inverse().ok_or(Error::Degenerate { gap: 0.0 })?;
    Ok(Superoperator { d, mat: inv + proj })
}

/// First-order lag `δρ_t = -β L^D J_π(Ḣ - tr{πḢ})`, physical time.
pub fn state_correction(p: &DrivingProtocol, bath: &BathModel, t: f64) -> Result<OperatorMatrix> {
    let s = p.sample(t)?;
    let h = s.hamiltonian();
    let pi = gibbs_state(&h, bath.beta())?;
    let hdot = s.power();
    let mean = hdot.trace_product(&pi).re;
    let centred = &hdot - &OperatorMatrix::identity(2).scale(mean);
    let ld = drazin_inverse(&generator(&s, bath, 0.0), &pi)?;
    Ok(ld
        .apply(&matrix_mean_j(&pi, &centred)?)
        .scale(-bath.beta())
        .hermitian_part())
}

/// Heisenberg-picture Bloch equations `d σ_i/dν = Σ_j G_ij σ_j + b_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAffine {
    pub g: Matrix3<f64>,
    pub b: Vector3<f64>,
}

pub fn bloch_affine(p: &DrivingProtocol, bath: &BathModel, t: f64) -> Result<BlochAffine> {
    Ok(bloch_affine_sample(&p.sample(t)?, bath))
}

pub(crate) fn bloch_affine_sample(s: &ProtocolSample, bath: &BathModel) -> BlochAffine {
    let (sn, cs) = s.theta.sin_cos();
    let e = s.eps;
    let gm = bath.characteristic_rate(e);
    let ae = bath.alpha() * e;
    #[rustfmt::skip]
    let g = Matrix3::new(
        -gm * (cs * cs + 2.0 * sn * sn), -e * cs,  -gm * sn * cs,
         e * cs,                         -gm,      -e * sn,
        -gm * sn * cs,                    e * sn,  -gm * (sn * sn + 2.0 * cs * cs),
    );
    BlochAffine {
        g,
        b: Vector3::new(-ae * sn, 0.0, -ae * cs),
    }
}

/// Projects `L†` onto the Pauli basis; any Hermiticity-preserving qubit generator works.
pub fn bloch_affine_from_generator(l: &Superoperator) -> Result<BlochAffine> {
    if l.hilbert_dim() != 2 {
        return Err(invalid("Bloch representation needs a qubit generator"));
    }
    let paulis = [
        OperatorMatrix::sigma_x(),
        OperatorMatrix::sigma_y(),
        OperatorMatrix::sigma_z(),
    ];
    let adj = l.adjoint();
    let mut g = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (i, si) in paulis.iter().enumerate() {
        let img = adj.apply(si);
        for (j, sj) in paulis.iter().enumerate() {
            g[(i, j)] = 0.5 * img.trace_product(sj).re;
        }
        b[i] = 0.5 * img.trace().re;
    }
    Ok(BlochAffine { g, b })
}

/// `A(ν) = e^{νG}`: `σ_i(ν) = Σ_j A_ij(ν) σ_j + const`.
pub fn heisenberg_coefficients(
    p: &DrivingProtocol,
    bath: &BathModel,
    t: f64,
    nu: f64,
) -> Result<Matrix3<f64>> {
    if !(nu >= 0.0) {
        return Err(invalid("Heisenberg time must be non-negative"));
    }
    let s = p.sample(t)?;
    let gm = bath.characteristic_rate(s.eps);
    let (sn, cs) = s.theta.sin_cos();
    let d1 = (-gm * nu).exp();
    let d2 = (-2.0 * gm * nu).exp();
    let (so, co) = (s.eps * nu).sin_cos();
    Ok(rotated_response(sn, cs, d1 * co, d1 * so, d2))
}

/// `Ã = ∫_0^∞ A(ν) dν = -G⁻¹`.
pub fn integrated_heisenberg(
    p: &DrivingProtocol,
    bath: &BathModel,
    t: f64,
) -> Result<Matrix3<f64>> {
    Ok(integrated_heisenberg_sample(&p.sample(t)?, bath))
}

pub(crate) fn integrated_heisenberg_sample(s: &ProtocolSample, bath: &BathModel) -> Matrix3<f64> {
    let gm = bath.characteristic_rate(s.eps);
    let den = gm * gm + s.eps * s.eps;
    let (sn, cs) = s.theta.sin_cos();
    rotated_response(sn, cs, gm / den, s.eps / den, 0.5 / gm)
}

// Transverse block (kc, ks) rotates about the instantaneous field axis; kz is longitudinal.
fn rotated_response(sn: f64, cs: f64, kc: f64, ks: f64, kz: f64) -> Matrix3<f64> {
    #[rustfmt::skip]
    let m = Matrix3::new(
        cs * cs * kc + sn * sn * kz, -cs * ks, sn * cs * (kz - kc),
        cs * ks,                     kc,       -sn * ks,
        sn * cs * (kz - kc),         sn * ks,  sn * sn * kc + cs * cs * kz,
    );
    m
}

/// How the initial and final boundary terms enter the counted heat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryTerms {
    /// `q̃ = q + T ln p_0(n_0) - T ln p_τ(n_τ)` with endpoint energy measurements.
    #[default]
    EntropyProduction,
    /// `q̃ = q - T ln 2`.
    Landauer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub tol: Tolerances,
    /// Step cap as a fraction of `1 / max_t max(ε_t, γ_t)`.
    pub max_step_fraction: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances {
                rtol: 1e-9,
                atol: 1e-12,
            },
            max_step_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcsOptions {
    pub propagation: PropagationOptions,
    pub boundary: BoundaryTerms,
}

impl Default for FcsOptions {
    fn default() -> Self {
        Self {
            propagation: PropagationOptions::default(),
            boundary: BoundaryTerms::EntropyProduction,
        }
    }
}

struct QubitTerms {
    h: Matrix2<C64>,
    l: Matrix2<C64>,
    ld: Matrix2<C64>,
    pe: Matrix2<C64>,
    pg: Matrix2<C64>,
    emit_jump: f64,
    emit: f64,
    absorb_jump: f64,
    absorb: f64,
}

impl QubitTerms {
    fn new(s: &ProtocolSample, bath: &BathModel, u: f64) -> Self {
        let (sn, cs) = s.theta.sin_cos();
        let hz = 0.5 * s.eps * cs;
        let hx = 0.5 * s.eps * sn;
        let h = Matrix2::new(r(hz), r(hx), r(hx), r(-hz));
        let l = Matrix2::new(
            r(-0.5 * sn),
            r(0.5 * (cs - 1.0)),
            r(0.5 * (cs + 1.0)),
            r(0.5 * sn),
        );
        let ld = l.adjoint();
        let ge = bath.emission_rate(s.eps);
        let ga = bath.absorption_rate(s.eps);
        Self {
            h,
            pe: ld * l,
            pg: l * ld,
            l,
            ld,
            emit_jump: ge * (-u * s.eps).exp(),
            emit: ge,
            absorb_jump: ga * (u * s.eps).exp(),
            absorb: ga,
        }
    }

    fn apply(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        let i = c(0.0, 1.0);
        let comm = self.h * rho - rho * self.h;
        let anti_e = self.pe * rho + rho * self.pe;
        let anti_g = self.pg * rho + rho * self.pg;
        -comm * i + self.l * rho * self.ld * r(self.emit_jump) - anti_e * r(0.5 * self.emit)
            + self.ld * rho * self.l * r(self.absorb_jump)
            - anti_g * r(0.5 * self.absorb)
    }
}

fn pack(m: &Matrix2<C64>) -> [f64; 8] {
    let s = m.as_slice();
    [
        s[0].re, s[0].im, s[1].re, s[1].im, s[2].re, s[2].im, s[3].re, s[3].im,
    ]
}

fn unpack(y: &[f64]) -> Matrix2<C64> {
    Matrix2::from_column_slice(&[c(y[0], y[1]), c(y[2], y[3]), c(y[4], y[5]), c(y[6], y[7])])
}

fn to_fixed(a: &OperatorMatrix) -> Result<Matrix2<C64>> {
    if a.dim() != 2 {
        return Err(invalid("qubit propagation needs a 2x2 state"));
    }
    Ok(Matrix2::from_column_slice(a.matrix().as_slice()))
}

fn from_fixed(m: &Matrix2<C64>) -> OperatorMatrix {
    OperatorMatrix::from_matrix(DMatrix::from_column_slice(2, 2, m.as_slice())).expect("2x2")
}

fn max_step(p: &DrivingProtocol, bath: &BathModel, fraction: f64) -> f64 {
    let n = 512;
    let fastest = (0..=n)
        .map(|k| {
            let e = p.sample_unchecked(p.tau() * k as f64 / n as f64).eps;
            e.max(bath.characteristic_rate(e))
        })
        .fold(0.0, f64::max);
    fraction / fastest
}

/// `π^s` for the Gibbs state of `h`, evaluated in log space.
pub fn gibbs_power(h: &OperatorMatrix, beta: f64, s: f64) -> Result<OperatorMatrix> {
    let spec = h.eigh()?;
    let e0 = spec.values[0];
    let ln_z = spec
        .values
        .iter()
        .map(|&e| (-beta * (e - e0)).exp())
        .sum::<f64>()
        .ln();
    Ok(spec.apply(|e| (s * (-beta * (e - e0) - ln_z)).exp()))
}

/// Result of the counting-field propagation.
#[derive(Debug, Clone)]
pub struct FcsSolution {
    pub cgf: f64,
    pub final_state: OperatorMatrix,
    pub steps: usize,
}

/// Exact `K(u) = ln E[e^{-u q̃}]` from the tilted master equation.
pub fn propagate_fcs(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    opts: &FcsOptions,
) -> Result<f64> {
    Ok(propagate_tilted(p, bath, u, opts)?.cgf)
}

pub fn propagate_tilted(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    opts: &FcsOptions,
) -> Result<FcsSolution> {
    if !u.is_finite() {
        return Err(invalid("counting field must be finite"));
    }
    let beta = bath.beta();
    let temp = bath.temperature();
    let h0 = p.hamiltonian_at(0.0)?;
    let rho0 = match opts.boundary {
        BoundaryTerms::EntropyProduction => gibbs_power(&h0, beta, 1.0 - u * temp)?,
        BoundaryTerms::Landauer => gibbs_state(&h0, beta)?,
    };
    let h_max = max_step(p, bath, opts.propagation.max_step_fraction);
    let rhs = |t: f64, y: &[f64; 8], dy: &mut [f64; 8]| {
        let terms = QubitTerms::new(&p.sample_unchecked(t), bath, u);
        *dy = pack(&terms.apply(&unpack(y)));
    };
    let mut ode =
        Dopri5::new(rhs, 0.0, pack(&to_fixed(&rho0)?), opts.propagation.tol).with_max_step(h_max);
    ode.integrate_to(p.tau())?;
    let rho_tau = from_fixed(&unpack(ode.y()));
    let weight = match opts.boundary {
        BoundaryTerms::EntropyProduction => {
            let ht = p.hamiltonian_at(p.tau())?;
            gibbs_power(&ht, beta, u * temp)?.trace_product(&rho_tau).re
        }
        BoundaryTerms::Landauer => rho_tau.trace().re * (u * temp * std::f64::consts::LN_2).exp(),
    };
    if !(weight > 0.0) {
        return Err(Error::Numerical(format!(
            "non-positive generating function {weight:e} at u = {u}"
        )));
    }
    Ok(FcsSolution {
        cgf: weight.ln(),
        final_state: rho_tau,
        steps: ode.accepted_steps(),
    })
}

/// Untilted evolution sampled at `checkpoints`, with the mean heat emitted so far.
#[derive(Debug, Clone)]
pub struct MasterEquationSolution {
    pub times: Vec<f64>,
    pub states: Vec<OperatorMatrix>,
    pub mean_heat: Vec<f64>,
}

pub fn propagate_master_equation(
    p: &DrivingProtocol,
    bath: &BathModel,
    rho0: &OperatorMatrix,
    checkpoints: &[f64],
    opts: &PropagationOptions,
) -> Result<MasterEquationSolution> {
    if !rho0.is_density_matrix(1e-10) {
        return Err(invalid("initial state is not a density matrix"));
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("checkpoints must be non-decreasing"));
    }
    for &t in checkpoints {
        p.sample(t)?;
    }
    let h_max = max_step(p, bath, opts.max_step_fraction);
    let rhs = |t: f64, y: &[f64; 9], dy: &mut [f64; 9]| {
        let terms = QubitTerms::new(&p.sample_unchecked(t), bath, 0.0);
        let rho = unpack(&y[..8]);
        let drho = terms.apply(&rho);
        dy[..8].copy_from_slice(&pack(&drho));
        dy[8] = -(terms.h * drho).trace().re;
    };
    let mut y0 = [0.0; 9];
    y0[..8].copy_from_slice(&pack(&to_fixed(rho0)?));
    let mut ode = Dopri5::new(rhs, 0.0, y0, opts.tol).with_max_step(h_max);
    let mut out = MasterEquationSolution {
        times: Vec::with_capacity(checkpoints.len()),
        states: Vec::with_capacity(checkpoints.len()),
        mean_heat: Vec::with_capacity(checkpoints.len()),
    };
    for &t in checkpoints {
        ode.integrate_to(t)?;
        let y = ode.y();
        out.times.push(t);
        out.states.push(from_fixed(&unpack(&y[..8])));
        out.mean_heat.push(y[8]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ThetaMode;
    use proptest::prelude::*;

    fn bath() -> BathModel {
        BathModel::new(0.191, 20.0).unwrap()
    }

    fn quantum(tau: f64) -> DrivingProtocol {
        DrivingProtocol::new(0.02, 1.0, tau, ThetaMode::Quantum).unwrap()
    }

    #[test]
    fn rates_obey_detailed_balance() {
        let b = bath();
        for eps in [1e-9, 0.02, 0.3, 1.0, 3.0] {
            let ratio = b.absorption_rate(eps) / b.emission_rate(eps);
            assert!(
                (ratio - (-b.beta() * eps).exp()).abs() < 1e-12 * ratio.max(1e-300),
                "eps = {eps}"
            );
            let coth = 1.0 / (0.5 * b.beta() * eps).tanh();
            let gm = 0.5 * b.alpha() * eps * coth;
            assert!((b.characteristic_rate(eps) - gm).abs() < 1e-10 * gm);
        }
    }

    #[test]
    fn small_gap_rates_approach_classical_limit() {
        let b = bath();
        let lim = b.alpha() / b.beta();
        assert!((b.absorption_rate(1e-12) - lim).abs() < 1e-12);
        assert!((b.characteristic_rate(1e-12) - lim).abs() < 1e-12);
    }

    #[test]
    fn classical_generator_is_rate_matrix_on_populations() {
        let p = DrivingProtocol::constant(0.7, 0.0, 1.0).unwrap();
        let b = bath();
        let l = liouvillian(&p, &b, 0.5).unwrap();
        let ge = b.emission_rate(0.7);
        let ga = b.absorption_rate(0.7);
        // vec index: (0,0)->0, (1,1)->3
        let m = l.matrix();
        assert!((m[(0, 0)] - r(-ge)).norm() < 1e-14);
        assert!((m[(0, 3)] - r(ga)).norm() < 1e-14);
        assert!((m[(3, 0)] - r(ge)).norm() < 1e-14);
        assert!((m[(3, 3)] - r(-ga)).norm() < 1e-14);
    }

    #[test]
    fn spectrum_has_expected_relaxation_rates() {
        let p = DrivingProtocol::constant(0.8, 0.9, 1.0).unwrap();
        let b = BathModel::new(0.3, 2.0).unwrap();
        let gm = b.characteristic_rate(0.8);
        let mut ev = liouvillian(&p, &b, 0.0).unwrap().eigenvalues().unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expected = [c(-2.0 * gm, 0.0), c(-gm, -0.8), c(-gm, 0.8), c(0.0, 0.0)];
        for (got, want) in ev.iter().zip(expected) {
            assert!((got - want).norm() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn fast_and_generic_generators_agree() {
        let p = quantum(10.0);
        let b = bath();
        let rho =
            OperatorMatrix::from_rows(2, &[r(0.3), c(0.1, 0.2), c(0.1, -0.2), r(0.7)]).unwrap();
        for (t, u) in [(0.0, 0.0), (3.0, 7.0), (9.5, -4.0)] {
            let s = p.sample(t).unwrap();
            let fast = from_fixed(&QubitTerms::new(&s, &b, u).apply(&to_fixed(&rho).unwrap()));
            let slow = tilted_liouvillian(&p, &b, t, u).unwrap().apply(&rho);
            assert!((&fast - &slow).max_abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_bloch_matches_adjoint_generator() {
        let p = quantum(10.0);
        let b = BathModel::new(0.4, 3.0).unwrap();
        for t in [0.0, 2.5, 6.0, 10.0] {
            let closed = bloch_affine(&p, &b, t).unwrap();
            let numeric = bloch_affine_from_generator(&liouvillian(&p, &b, t).unwrap()).unwrap();
            assert!((closed.g - numeric.g).abs().max() < 1e-13, "t = {t}");
            assert!((closed.b - numeric.b).abs().max() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn heisenberg_coefficients_are_matrix_exponential() {
        let p = quantum(10.0);
        let b = BathModel::new(0.4, 3.0).unwrap();
        for (t, nu) in [(1.0, 0.3), (4.0, 2.0), (8.0, 5.0)] {
            let g = bloch_affine(&p, &b, t).unwrap().g;
            let expected = (g * nu).exp();
            let got = heisenberg_coefficients(&p, &b, t, nu).unwrap();
            assert!((expected - got).abs().max() < 1e-12);
        }
    }

    #[test]
    fn integrated_heisenberg_is_minus_inverse_generator() {
        let p = quantum(10.0);
        let b = bath();
        for t in [0.0, 3.3, 5.0, 10.0] {
            let g = bloch_affine(&p, &b, t).unwrap().g;
            let inv = -g.try_inverse().unwrap();
            let at = integrated_heisenberg(&p, &b, t).unwrap();
            assert!((inv - at).abs().max() < 1e-9 * at.abs().max());
        }
        let s = DrivingProtocol::new(0.02, 1.0, 10.0, ThetaMode::Classical).unwrap();
        let at = integrated_heisenberg(&s, &b, 4.0).unwrap();
        let gm = characteristic_rate(&s, &b, 4.0).unwrap();
        assert!(at[(0, 2)].abs() < 1e-15);
        assert!((at[(2, 2)] - 0.5 / gm).abs() < 1e-12);
    }

    #[test]
    fn drazin_inverse_identities() {
        let p = quantum(10.0);
        let b = BathModel::new(0.3, 2.0).unwrap();
        for t in [0.0, 4.0, 10.0] {
            let l = liouvillian(&p, &b, t).unwrap();
            let pi = gibbs_state(&p.hamiltonian_at(t).unwrap(), b.beta()).unwrap();
            let ld = drazin_inverse(&l, &pi).unwrap();
            let lld = l.compose(&ld);
            let proj = Superoperator::from_matrix(
                2,
                vectorize(&pi) * vectorize(&OperatorMatrix::identity(2)).transpose(),
            )
            .unwrap();
            let expected = Superoperator::identity(2).sub(&proj);
            assert!((lld.matrix() - expected.matrix())
                .iter()
                .all(|z| z.norm() < 1e-10));
            let ldl = ld.compose(&l);
            assert!((ldl.matrix() - expected.matrix())
                .iter()
                .all(|z| z.norm() < 1e-10));
            assert!(ld.apply(&pi).max_abs() < 1e-12);
        }
    }

    #[test]
    fn drazin_rejects_non_stationary_reference() {
        let p = quantum(10.0);
        let b = bath();
        let l = liouvillian(&p, &b, 5.0).unwrap();
        let wrong = OperatorMatrix::identity(2).scale(0.5);
        assert!(drazin_inverse(&l, &wrong).is_err());
    }

    #[test]
    fn state_correction_solves_linear_response() {
        let p = quantum(50.0);
        let b = BathModel::new(0.3, 2.0).unwrap();
        for t in [5.0, 25.0, 45.0] {
            let dr = state_correction(&p, &b, t).unwrap();
            assert!(dr.trace().norm() < 1e-13);
            let l = liouvillian(&p, &b, t).unwrap();
            // L δρ = dπ/dt, compared against a finite difference of the Gibbs state.
            let hstep = 1e-4;
            let pp = gibbs_state(&p.hamiltonian_at(t + hstep).unwrap(), b.beta()).unwrap();
            let pm = gibbs_state(&p.hamiltonian_at(t - hstep).unwrap(), b.beta()).unwrap();
            let pidot = (&pp - &pm).scale(0.5 / hstep);
            assert!((&l.apply(&dr) - &pidot).max_abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_bar_of_default_protocol() {
        let gb = gamma_bar(&quantum(1.0), &bath()).unwrap();
        assert!((gb - 0.0499949).abs() < 1e-6, "{gb}");
    }

    #[test]
    fn counting_field_zero_gives_zero_cgf() {
        let p = quantum(200.0);
        let k = propagate_fcs(&p, &bath(), 0.0, &FcsOptions::default()).unwrap();
        assert!(k.abs() < 1e-9);
    }

    #[test]
    fn integral_fluctuation_theorem_holds() {
        let p = quantum(200.0);
        let b = bath();
        let k = propagate_fcs(&p, &b, b.beta(), &FcsOptions::default()).unwrap();
        assert!(k.abs() < 1e-8, "{k}");
    }

    #[test]
    fn mean_heat_matches_cgf_slope() {
        let p = quantum(100.0);
        let b = bath();
        let pi0 = gibbs_state(&p.hamiltonian_at(0.0).unwrap(), b.beta()).unwrap();
        let me =
            propagate_master_equation(&p, &b, &pi0, &[p.tau()], &PropagationOptions::default())
                .unwrap();
        let q = me.mean_heat[0];
        let opts = FcsOptions {
            boundary: BoundaryTerms::Landauer,
            ..Default::default()
        };
        let h = 1e-3;
        let kp = propagate_fcs(&p, &b, h, &opts).unwrap();
        let km = propagate_fcs(&p, &b, -h, &opts).unwrap();
        let mean_excess = -(kp - km) / (2.0 * h);
        let expected = q - b.temperature() * std::f64::consts::LN_2;
        assert!(
            (mean_excess - expected).abs() < 1e-7,
            "{mean_excess} vs {expected}"
        );
    }

    #[test]
    fn master_equation_keeps_density_matrix() {
        let p = quantum(30.0);
        let b = bath();
        let rho0 = OperatorMatrix::identity(2).scale(0.5);
        let ts: Vec<f64> = (0..=10).map(|k| 3.0 * k as f64).collect();
        let me =
            propagate_master_equation(&p, &b, &rho0, &ts, &PropagationOptions::default()).unwrap();
        for s in &me.states {
            assert!(s.is_density_matrix(1e-9));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gibbs_state_is_fixed_point(t in 0.0f64..1.0, mode in 0usize..2) {
            let m = if mode == 0 { ThetaMode::Quantum } else { ThetaMode::Classical };
            let p = DrivingProtocol::new(0.02, 1.0, 1.0, m).unwrap();
            let b = bath();
            let pi = gibbs_state(&p.hamiltonian_at(t).unwrap(), b.beta()).unwrap();
            let out = liouvillian(&p, &b, t).unwrap().apply(&pi);
            prop_assert!(out.max_abs() < 1e-12);
        }

        #[test]
        fn generator_is_trace_preserving(t in 0.0f64..1.0, a in -1.0f64..1.0, bb in -1.0f64..1.0) {
            let p = quantum(1.0);
            let l = liouvillian(&p, &bath(), t).unwrap();
            let x = OperatorMatrix::from_rows(2, &[r(a), c(bb, a), c(-a, 0.3), r(bb)]).unwrap();
            prop_assert!(l.apply(&x).trace().norm() < 1e-12);
        }

        #[test]
        fn tilted_generator_at_zero_is_untilted(t in 0.0f64..1.0) {
            let p = quantum(1.0);
            let b = bath();
            let a = liouvillian(&p, &b, t).unwrap();
            let z = tilted_liouvillian(&p, &b, t, 0.0).unwrap();
            prop_assert_eq!(a, z);
        }
    }
}
