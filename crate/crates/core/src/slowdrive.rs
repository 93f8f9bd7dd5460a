//! Slow-driving heat statistics.
//!
//! `K(u) = -(β²/τ) ∫_0^1 ds [[cov^u(X_s, Ḃ_s)]]`, where `Ḃ_s` is the power
//! operator in rescaled time and `X_s = ∫_0^∞ dν Ḃ_s(ν)` its integrated
//! Heisenberg evolution. The nested counting-field average is
//! `[[f]] = ∫_0^{uT} dy ∫_y^{1-y} dy' f(y')`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::lindblad::{
    drazin_inverse, integrated_heisenberg_sample, state_correction, BathModel, Superoperator,
};
use crate::operator::{dephase, gibbs_state, log_mean, matrix_mean_j_inverse, OperatorMatrix, C64};
use crate::protocol::{DrivingProtocol, ProtocolSample};
use crate::quadrature::{integrate_adaptive, GaussLegendre};

/// Above this `max v/γ` the first-order expansion is flagged.
pub const SPEED_WARN_RATIO: f64 = 0.5;
/// Above this `max γ/ε` the secular generator is flagged.
pub const SECULAR_WARN_RATIO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CgfComponent {
    Total,
    Classical,
    Coherent,
    ExactOracle,
}

impl CgfComponent {
    pub fn as_str(self) -> &'static str {
        match self {
            CgfComponent::Total => "total",
            CgfComponent::Classical => "classical",
            CgfComponent::Coherent => "coherent",
            CgfComponent::ExactOracle => "exact",
        }
    }

    fn index(self) -> usize {
        match self {
            CgfComponent::Total | CgfComponent::ExactOracle => 0,
            CgfComponent::Classical => 1,
            CgfComponent::Coherent => 2,
        }
    }
}

impl fmt::Display for CgfComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sampled CGF together with cumulants when the grid allows extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfCurve {
    pub component: CgfComponent,
    pub u_grid: Vec<f64>,
    pub k_values: Vec<f64>,
    pub kappa: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowDrivingOptions {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub rel_tol: f64,
}

impl Default for SlowDrivingOptions {
    fn default() -> Self {
        Self {
            initial_nodes: 64,
            max_nodes: 4096,
            rel_tol: 1e-7,
        }
    }
}

/// `[[cov^u]]` data at one rescaled time node, in the eigenbasis of `π`.
#[derive(Debug, Clone)]
struct Node {
    weight: f64,
    ln_p: Vec<f64>,
    /// `Re(X̃_ji B̃_ij)` per component.
    pair: [DMatrix<f64>; 3],
    /// `Re(<X><B>)` per component.
    mean: [f64; 3],
}

/// Slow-driving CGF of one protocol, tabulated on a converged time grid.
#[derive(Debug, Clone)]
pub struct SlowDrivingCgf {
    tau: f64,
    beta: f64,
    nodes: Vec<Node>,
}

impl SlowDrivingCgf {
    pub fn new(p: &DrivingProtocol, bath: &BathModel, opts: &SlowDrivingOptions) -> Result<Self> {
        if opts.initial_nodes == 0 || opts.max_nodes < opts.initial_nodes {
            return Err(invalid("time-grid node counts are inconsistent"));
        }
        let mut n = opts.initial_nodes;
        let mut current = Self::with_nodes(p, bath, n)?;
        loop {
            if 2 * n > opts.max_nodes {
                return Err(Error::Quadrature(format!(
                    "slow-driving time integral not converged with {n} Gauss-Legendre nodes"
                )));
            }
            let refined = Self::with_nodes(p, bath, 2 * n)?;
            if current.agrees_with(&refined, opts.rel_tol) {
                return Ok(refined);
            }
            current = refined;
            n *= 2;
        }
    }

    /// Fixed `n`-point Gauss–Legendre rule in rescaled time.
    pub fn with_nodes(p: &DrivingProtocol, bath: &BathModel, n: usize) -> Result<Self> {
        let tau = p.tau();
        let rule = GaussLegendre::new(n);
        let nodes = rule
            .points(0.0, 1.0)
            .map(|(s, w)| node_terms(&p.sample(s * tau)?, bath, tau, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tau,
            beta: bath.beta(),
            nodes,
        })
    }

    fn probes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for comp in [
            CgfComponent::Total,
            CgfComponent::Classical,
            CgfComponent::Coherent,
        ] {
            out.push(self.evaluate(comp, 0.5 * self.beta));
            out.extend(self.cumulants(comp));
        }
        out
    }

    fn agrees_with(&self, other: &Self, rel_tol: f64) -> bool {
        let a = self.probes();
        let b = other.probes();
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter()
            .zip(&b)
            .all(|(x, y)| (x - y).abs() <= rel_tol * y.abs() + 1e-13 * scale)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `K(u)` for one component.
    pub fn evaluate(&self, component: CgfComponent, u: f64) -> f64 {
        let a = u / self.beta;
        let c = component.index();
        let s: f64 = self
            .nodes
            .iter()
            .map(|nd| {
                let d = nd.ln_p.len();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let w = nd.pair[c][(i, j)];
                        if w != 0.0 {
                            acc += w * pair_kernel(nd.ln_p[i], nd.ln_p[j], a, i == j);
                        }
                    }
                }
                nd.weight * (acc - nd.mean[c] * a * (1.0 - a))
            })
            .sum();
        -self.beta * self.beta / self.tau * s
    }

    /// `κ_1..κ_4` from analytic u-derivatives of the kernel at `u = 0`.
    pub fn cumulants(&self, component: CgfComponent) -> [f64; 4] {
        let c = component.index();
        let temp = 1.0 / self.beta;
        let mut out = [0.0; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let order = k + 1;
            let s: f64 = self
                .nodes
                .iter()
                .map(|nd| {
                    let d = nd.ln_p.len();
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            let w = nd.pair[c][(i, j)];
                            if w != 0.0 {
                                acc += w * kernel_derivative(nd.ln_p[i], nd.ln_p[j], order, i == j);
                            }
                        }
                    }
                    let mean_deriv = match order {
                        1 => 1.0,
                        2 => -2.0,
                        _ => 0.0,
                    };
                    nd.weight * (acc - nd.mean[c] * mean_deriv)
                })
                .sum();
            let deriv = -self.beta * self.beta / self.tau * temp.powi(order as i32) * s;
            *slot = if order % 2 == 0 { deriv } else { -deriv };
        }
        out
    }

    pub fn curve(&self, component: CgfComponent, u_grid: &[f64]) -> CgfCurve {
        let k_values: Vec<f64> = u_grid
            .iter()
            .map(|&u| self.evaluate(component, u))
            .collect();
        let kappa = extract_cumulants(u_grid, &k_values, slow_noise(&k_values)).ok();
        CgfCurve {
            component,
            u_grid: u_grid.to_vec(),
            k_values,
            kappa,
        }
    }
}

fn slow_noise(k: &[f64]) -> f64 {
    1e-14 * k.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn node_terms(s: &ProtocolSample, bath: &BathModel, tau: f64, weight: f64) -> Result<Node> {
    let h = s.hamiltonian();
    let pi = gibbs_state(&h, bath.beta())?;
    let spec = h.eigh()?;
    let e0 = spec.values[0];
    let ln_z = spec
        .values
        .iter()
        .map(|&e| (-bath.beta() * (e - e0)).exp())
        .sum::<f64>()
        .ln();
    let ln_p: Vec<f64> = spec
        .values
        .iter()
        .map(|&e| -bath.beta() * (e - e0) - ln_z)
        .collect();
    let l = crate::lindblad::liouvillian_from_sample(s, bath);
    let ld_adj = drazin_inverse(&l, &pi)?.adjoint();
    let (bd, bc) = s.power_split();
    let bd = bd.scale(tau);
    let bc = bc.scale(tau);
    let bt = &bd + &bc;
    let mut pair = [
        DMatrix::zeros(2, 2),
        DMatrix::zeros(2, 2),
        DMatrix::zeros(2, 2),
    ];
    let mut mean = [0.0; 3];
    for (k, b) in [&bt, &bd, &bc].into_iter().enumerate() {
        let (pm, m) = pair_coefficients(&ld_adj, b, &spec.vectors, &ln_p);
        pair[k] = pm;
        mean[k] = m;
    }
    Ok(Node {
        weight,
        ln_p,
        pair,
        mean,
    })
}

fn pair_coefficients(
    ld_adj: &Superoperator,
    b: &OperatorMatrix,
    vectors: &DMatrix<C64>,
    ln_p: &[f64],
) -> (DMatrix<f64>, f64) {
    let x = ld_adj.apply(b).scale(-1.0);
    let xt = vectors.adjoint() * x.matrix() * vectors;
    let bt = vectors.adjoint() * b.matrix() * vectors;
    let d = ln_p.len();
    let mut pm = DMatrix::zeros(d, d);
    let (mut mx, mut mb) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for i in 0..d {
        let p = ln_p[i].exp();
        mx += xt[(i, i)] * p;
        mb += bt[(i, i)] * p;
        for j in 0..d {
            pm[(i, j)] = (xt[(j, i)] * bt[(i, j)]).re;
        }
    }
    (pm, (mx * mb).re)
}

/// `[[p_i^{y'} p_j^{1-y'}]]` at `a = uT`.
fn pair_kernel(ln_pi: f64, ln_pj: f64, a: f64, diagonal: bool) -> f64 {
    if diagonal {
        return ln_pi.exp() * a * (1.0 - a);
    }
    let c = ln_pi - ln_pj;
    if c.abs() < 0.5 {
        let pj = ln_pj.exp();
        let mut sum = 0.0;
        let mut ck = 1.0; // c^{k-2}
        let mut fact = 2.0; // k!
        for k in 2..=24 {
            let kf = k as f64;
            sum += ck / fact * (1.0 - (1.0 - a).powi(k) - a.powi(k));
            ck *= c;
            fact *= kf + 1.0;
        }
        pj * sum
    } else {
        let num = ln_pi.exp() + ln_pj.exp()
            - ((1.0 - a) * ln_pi + a * ln_pj).exp()
            - (a * ln_pi + (1.0 - a) * ln_pj).exp();
        num / (c * c)
    }
}

/// `d^k/da^k [[p_i^{y'} p_j^{1-y'}]]` at `a = 0`.
fn kernel_derivative(ln_pi: f64, ln_pj: f64, order: usize, diagonal: bool) -> f64 {
    let (pi, pj) = (ln_pi.exp(), ln_pj.exp());
    if diagonal {
        return match order {
            1 => pi,
            2 => -2.0 * pi,
            _ => 0.0,
        };
    }
    let c = ln_pi - ln_pj;
    match order {
        1 => log_mean(pi, pj),
        2 => -(pi + pj),
        3 => c * (pi - pj),
        4 => -c * c * (pi + pj),
        _ => unreachable!("cumulant order 1..=4"),
    }
}

/// `cov^y(A, B) = tr{A π^y B π^{1-y}} - tr{Aπ} tr{Bπ}`.
pub fn quantum_covariance(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    pi: &OperatorMatrix,
    y: f64,
) -> Result<C64> {
    if a.dim() != pi.dim() || b.dim() != pi.dim() {
        return Err(invalid("dimension mismatch"));
    }
    if !pi.is_density_matrix(1e-10) {
        return Err(invalid("reference state is not a density matrix"));
    }
    let spec = pi.eigh()?;
    if spec.values[0] <= 1e-14 {
        return Err(Error::RankDeficient {
            min_eig: spec.values[0],
        });
    }
    let py = spec.apply(|p| p.powf(y));
    let py1 = spec.apply(|p| p.powf(1.0 - y));
    let first = (&(&(a * &py) * b) * &py1).trace();
    Ok(first - a.trace_product(pi) * b.trace_product(pi))
}

/// `∫_0^{uT} dy ∫_y^{1-y} dy' f(y')`, honouring signed limits.
pub fn double_average(f: impl Fn(f64) -> f64, u: f64, temperature: f64) -> Result<f64> {
    let a = u * temperature;
    if a == 0.0 {
        return Ok(0.0);
    }
    integrate_adaptive(
        |y| integrate_adaptive(&f, y, 1.0 - y, 1e-15, 1e-13, 200).unwrap_or(f64::NAN),
        0.0,
        a,
        1e-15,
        1e-12,
        200,
    )
}

pub fn cgf_slow_driving(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    opts: &SlowDrivingOptions,
) -> Result<f64> {
    Ok(SlowDrivingCgf::new(p, bath, opts)?.evaluate(CgfComponent::Total, u))
}

pub fn cgf_classical(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    opts: &SlowDrivingOptions,
) -> Result<f64> {
    Ok(SlowDrivingCgf::new(p, bath, opts)?.evaluate(CgfComponent::Classical, u))
}

pub fn cgf_coherent(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    opts: &SlowDrivingOptions,
) -> Result<f64> {
    Ok(SlowDrivingCgf::new(p, bath, opts)?.evaluate(CgfComponent::Coherent, u))
}

/// `[[cov^u(σx,σx)]]`, `[[cov^u(σx,σz)]]`, `[[cov^u(σz,σz)]]` for the qubit Gibbs state.
pub fn qubit_covariances_closed_form(theta: f64, eps: f64, beta: f64, u: f64) -> Result<[f64; 3]> {
    if !(eps > 0.0 && beta > 0.0) {
        return Err(invalid("closed-form covariances need eps > 0 and beta > 0"));
    }
    let (s, c) = theta.sin_cos();
    let be = beta * eps;
    let bracket = -be.cosh() + (eps * (u - beta)).cosh() + (u * eps).cosh() - 1.0;
    let den = beta * beta * eps * eps * (be.cosh() + 1.0);
    let sech2 = 1.0 / (0.5 * be).cosh().powi(2);
    let xx = (2.0 * u * eps * eps * s * s * (beta - u) - 2.0 * c * c * bracket) / den;
    let xz = (2.0 * theta).sin() * sech2 * (bracket + u * eps * eps * (beta - u))
        / (2.0 * beta * beta * eps * eps);
    let zz = (2.0 * u * eps * eps * c * c * (beta - u) - 2.0 * s * s * bracket) / den;
    Ok([xx, xz, zz])
}

/// Symmetrised Gibbs covariances `cov(σx,σx)`, `cov(σx,σz)`, `cov(σz,σz)`.
pub fn qubit_symmetric_covariances(theta: f64, eps: f64, beta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    let t2 = (0.5 * beta * eps).tanh().powi(2);
    [1.0 - s * s * t2, -s * c * t2, 1.0 - c * c * t2]
}

/// Classical, coherent and total CGF from the qubit closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitCgf {
    pub total: f64,
    pub classical: f64,
    pub coherent: f64,
}

pub fn cgf_qubit_closed_form(
    p: &DrivingProtocol,
    bath: &BathModel,
    u: f64,
    nodes: usize,
) -> Result<QubitCgf> {
    let tau = p.tau();
    let beta = bath.beta();
    let rule = GaussLegendre::new(nodes);
    let mut out = QubitCgf {
        total: 0.0,
        classical: 0.0,
        coherent: 0.0,
    };
    for (s, w) in rule.points(0.0, 1.0) {
        let smp = p.sample(s * tau)?;
        let at = integrated_heisenberg_sample(&smp, bath);
        let [xx, xz, zz] = qubit_covariances_closed_form(smp.theta, smp.eps, beta, u)?;
        let (x, z) = (0, 2);
        let f = tau * smp.f();
        let g = tau * smp.g();
        let total = zz * (f * f * at[(z, z)] + f * g * at[(x, z)])
            + xx * (g * g * at[(x, x)] + f * g * at[(z, x)])
            + xz * (f * f * at[(z, x)] + g * g * at[(x, z)] + f * g * (at[(z, z)] + at[(x, x)]));
        let [sxx, sxz, szz] = qubit_symmetric_covariances(smp.theta, smp.eps, beta);
        let (sn, cs) = smp.theta.sin_cos();
        let half_edot = 0.5 * tau * smp.eps_dot;
        let classical = half_edot.powi(2)
            * (szz * cs * (cs * at[(z, z)] + sn * at[(x, z)])
                + sxx * sn * (sn * at[(x, x)] + cs * at[(z, x)])
                + sxz * (at[(z, x)] + sn * cs * (at[(x, x)] + at[(z, z)])));
        // Coherent power is along the rotated transverse axis; only Ã in that direction survives.
        let half_coh = 0.5 * tau * smp.eps * smp.theta_dot;
        let gm = bath.characteristic_rate(smp.eps);
        let transverse = gm / (gm * gm + smp.eps * smp.eps);
        let xprime = cs * cs * xx - 2.0 * sn * cs * xz + sn * sn * zz;
        let coherent = half_coh.powi(2) * transverse * xprime;
        out.total += w * total;
        out.classical += w * classical * u * (beta - u) / (beta * beta);
        out.coherent += w * coherent;
    }
    let pref = -beta * beta / tau;
    Ok(QubitCgf {
        total: pref * out.total,
        classical: pref * out.classical,
        coherent: pref * out.coherent,
    })
}

/// Nine-point symmetric grid `u_k = k h/2`, `k = -4..=4`, with `h = step_fraction * β`.
pub fn cumulant_grid(beta: f64, step_fraction: f64) -> Vec<f64> {
    let half = 0.5 * step_fraction * beta;
    (-4..=4).map(|k| k as f64 * half).collect()
}

/// `κ_k = (-1)^k K^{(k)}(0)` from a nine-point symmetric grid.
///
/// Five-point central stencils at the grid spacing and twice it are combined
/// by Richardson extrapolation; the refined value must lie within 1% of the
/// fine-step value. `noise` is the absolute accuracy of the K values.
pub fn extract_cumulants(u_grid: &[f64], k_values: &[f64], noise: f64) -> Result<[f64; 4]> {
    if u_grid.len() != 9 || k_values.len() != 9 {
        return Err(invalid("cumulant extraction needs a nine-point grid"));
    }
    let h = u_grid[5] - u_grid[4];
    let symmetric = u_grid
        .iter()
        .enumerate()
        .all(|(i, &u)| (u - (i as f64 - 4.0) * h).abs() <= 1e-12 * h.abs().max(1e-300));
    if !(h > 0.0) || !symmetric {
        return Err(invalid(
            "cumulant grid must be symmetric about 0 with uniform spacing",
        ));
    }
    if k_values[4].abs() > 1e-10_f64.max(10.0 * noise) {
        return Err(invalid(format!("K(0) = {:e}, expected 0", k_values[4])));
    }
    let f = |k: i32| k_values[(k + 4) as usize];
    let stencil = |m: i32, step: f64| -> [f64; 4] {
        let (fm2, fm1, f0, f1, f2) = (f(-2 * m), f(-m), f(0), f(m), f(2 * m));
        [
            (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * step),
            (-f2 + 16.0 * f1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * step * step),
            (f2 - 2.0 * f1 + 2.0 * fm1 - fm2) / (2.0 * step.powi(3)),
            (f2 - 4.0 * f1 + 6.0 * f0 - 4.0 * fm1 + fm2) / step.powi(4),
        ]
    };
    let fine = stencil(1, h);
    let coarse = stencil(2, 2.0 * h);
    let stencil_gain = [18.0 / 12.0, 64.0 / 12.0, 6.0 / 2.0, 16.0];
    let mut out = [0.0; 4];
    for k in 0..4 {
        let order = (k + 1) as i32;
        let floor = 4.0 * noise * stencil_gain[k] / h.powi(order);
        let d = if k < 2 {
            (16.0 * fine[k] - coarse[k]) / 15.0
        } else {
            (4.0 * fine[k] - coarse[k]) / 3.0
        };
        let diff = (d - fine[k]).abs();
        if diff > 0.01 * d.abs() + floor {
            return Err(Error::StepSize(format!(
                "order-{order} Richardson correction {diff:e} exceeds 1% of {d:e}"
            )));
        }
        out[k] = if order % 2 == 0 { d } else { -d };
    }
    Ok(out)
}

/// Scale-separation diagnostics over the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    /// `max_t v_t / γ_t`.
    pub max_speed_ratio: f64,
    /// `max_t γ_t / ε_t`.
    pub max_secular_ratio: f64,
}

impl ValidityReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.max_speed_ratio > SPEED_WARN_RATIO {
            w.push(format!(
                "slow-driving validity: max v/gamma = {:.3} exceeds {SPEED_WARN_RATIO}",
                self.max_speed_ratio
            ));
        }
        if self.max_secular_ratio > SECULAR_WARN_RATIO {
            w.push(format!(
                "secular validity: max gamma/eps = {:.3} exceeds {SECULAR_WARN_RATIO}",
                self.max_secular_ratio
            ));
        }
        w
    }
}

pub fn validity_report(p: &DrivingProtocol, bath: &BathModel) -> Result<ValidityReport> {
    let n = 1000;
    let mut rep = ValidityReport {
        max_speed_ratio: 0.0,
        max_secular_ratio: 0.0,
    };
    for k in 0..=n {
        let s = p.sample(p.tau() * k as f64 / n as f64)?;
        let gm = bath.characteristic_rate(s.eps);
        rep.max_speed_ratio = rep.max_speed_ratio.max(s.speed() / gm);
        rep.max_secular_ratio = rep.max_secular_ratio.max(gm / s.eps);
    }
    Ok(rep)
}

/// First cumulants `(κ₁^d, κ₁^c)` from the entropy-production rates of the lagged state.
///
/// Uses `ρ_t ≈ π_t + δρ_t` and the second-order expansions
/// `-tr{L(δρ̄) J⁻¹_π(δρ̄)}` and `-tr{L(δρ) J⁻¹_π(δρ - D(δρ))}`, `δρ̄ = D(δρ)`.
pub fn first_cumulants_relative_entropy(
    p: &DrivingProtocol,
    bath: &BathModel,
    nodes: usize,
) -> Result<(f64, f64)> {
    let tau = p.tau();
    let rule = GaussLegendre::new(nodes);
    let (mut kd, mut kc) = (0.0, 0.0);
    for (s, w) in rule.points(0.0, 1.0) {
        let t = s * tau;
        let smp = p.sample(t)?;
        let h = smp.hamiltonian();
        let pi = gibbs_state(&h, bath.beta())?;
        let l = crate::lindblad::liouvillian_from_sample(&smp, bath);
        let dr = state_correction(p, bath, t)?;
        let dr_bar = dephase(&dr, &h)?;
        let dr_coh = &dr - &dr_bar;
        let rate_d = l
            .apply(&dr_bar)
            .trace_product(&matrix_mean_j_inverse(&pi, &dr_bar)?)
            .re;
        let rate_c = l
            .apply(&dr)
            .trace_product(&matrix_mean_j_inverse(&pi, &dr_coh)?)
            .re;
        kd -= w * rate_d;
        kc -= w * rate_c;
    }
    let scale = tau * bath.temperature();
    Ok((scale * kd, scale * kc))
}
