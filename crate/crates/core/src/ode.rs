//! Dormand–Prince 5(4) with adaptive steps and continuous output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Scaled error norm: receives the local error estimate and both endpoints.
pub type ErrorNorm<const N: usize> = fn(&[f64; N], &[f64; N], &[f64; N], &Tolerances) -> f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

/// Componentwise RMS norm with `atol + rtol * max(|y0|, |y1|)` scaling.
pub fn rms_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    tol: &Tolerances,
) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

pub struct Dopri5<F, const N: usize>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    rhs: F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    h_max: f64,
    tol: Tolerances,
    norm: ErrorNorm<N>,
    t_old: f64,
    h_old: f64,
    cont: [[f64; N]; 5],
    steps: usize,
    rejected: usize,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let mut k1 = [0.0; N];
        rhs(t0, &y0, &mut k1);
        Self {
            rhs,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            h_max: f64::INFINITY,
            tol,
            norm: rms_norm::<N>,
            t_old: t0,
            h_old: 0.0,
            cont: [y0, [0.0; N], [0.0; N], [0.0; N], [0.0; N]],
            steps: 0,
            rejected: 0,
        }
    }

    pub fn with_norm(mut self, norm: ErrorNorm<N>) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Start of the most recent accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Restart from a new state, keeping the step-size estimate.
    pub fn reset(&mut self, t: f64, y: [f64; N]) {
        self.t = t;
        self.y = y;
        self.t_old = t;
        self.h_old = 0.0;
        self.cont = [y, [0.0; N], [0.0; N], [0.0; N], [0.0; N]];
        (self.rhs)(t, &y, &mut self.k1);
    }

    fn initial_step(&mut self, direction: f64) -> f64 {
        let sc = |i: usize, y: &[f64; N]| self.tol.atol + self.tol.rtol * y[i].abs();
        let d0 = (0..N)
            .map(|i| (self.y[i] / sc(i, &self.y)).powi(2))
            .sum::<f64>()
            .sqrt();
        let d1 = (0..N)
            .map(|i| (self.k1[i] / sc(i, &self.y)).powi(2))
            .sum::<f64>()
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(self.h_max);
        let y1: [f64; N] = std::array::from_fn(|i| self.y[i] + direction * h0 * self.k1[i]);
        let mut f1 = [0.0; N];
        (self.rhs)(self.t + direction * h0, &y1, &mut f1);
        let d2 = (0..N)
            .map(|i| ((f1[i] - self.k1[i]) / sc(i, &self.y)).powi(2))
            .sum::<f64>()
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Takes one accepted step towards `t_end` without passing it.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        let direction = if t_end >= self.t { 1.0 } else { -1.0 };
        if self.h == 0.0 {
            self.h = self.initial_step(direction);
        }
        loop {
            let mut h = self.h.min(self.h_max).min((t_end - self.t).abs());
            let last = h >= (t_end - self.t).abs();
            if h <= 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            h *= direction;
            let (y_new, k7, err) = self.attempt(h);
            if !err.is_finite() {
                self.h = 0.25 * h.abs();
                self.rejected += 1;
                if self.h <= 1e-14 * self.t.abs().max(1.0) {
                    return Err(Error::StepUnderflow {
                        t: self.t,
                        h: self.h,
                    });
                }
                continue;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                self.build_dense(h, &y_new, &k7);
                self.t_old = self.t;
                self.h_old = h;
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
                if !last || fac > 1.0 {
                    self.h = (h.abs() * fac).min(self.h_max);
                }
                return Ok(());
            }
            self.rejected += 1;
            self.h = h.abs() * fac.min(1.0);
        }
    }

    /// Integrates until `t == t_end`.
    pub fn integrate_to(&mut self, t_end: f64) -> Result<()> {
        while self.t != t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    fn attempt(&mut self, h: f64) -> ([f64; N], [f64; N], f64) {
        let t = self.t;
        let y = &self.y;
        let k1 = &self.k1;
        let mut tmp = [0.0; N];
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);

        for i in 0..N {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        (self.rhs)(t + C2 * h, &tmp, &mut k2);
        for i in 0..N {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        (self.rhs)(t + C3 * h, &tmp, &mut k3);
        for i in 0..N {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        (self.rhs)(t + C4 * h, &tmp, &mut k4);
        for i in 0..N {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        (self.rhs)(t + C5 * h, &tmp, &mut k5);
        for i in 0..N {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        (self.rhs)(t + h, &tmp, &mut k6);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        (self.rhs)(t + h, &y_new, &mut k7);
        let mut e = [0.0; N];
        for i in 0..N {
            e[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = (self.norm)(&e, y, &y_new, &self.tol);

        // Stash stages needed for dense output in the unused slots.
        self.cont[1] = k3;
        self.cont[2] = k4;
        self.cont[3] = k5;
        self.cont[4] = k6;
        (y_new, k7, err)
    }

    fn build_dense(&mut self, h: f64, y_new: &[f64; N], k7: &[f64; N]) {
        let (k3, k4, k5, k6) = (self.cont[1], self.cont[2], self.cont[3], self.cont[4]);
        let k1 = self.k1;
        let y0 = self.y;
        for i in 0..N {
            let ydiff = y_new[i] - y0[i];
            let bspl = h * k1[i] - ydiff;
            self.cont[0][i] = y0[i];
            self.cont[1][i] = ydiff;
            self.cont[2][i] = bspl;
            self.cont[3][i] = ydiff - h * k7[i] - bspl;
            self.cont[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
    }

    /// Dense output inside the last accepted step `[t_prev, t]`.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        if self.h_old == 0.0 {
            return self.y;
        }
        let s = (t - self.t_old) / self.h_old;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut ode = Dopri5::new(
            |_t, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0],
            0.0,
            [1.0],
            Tolerances::default(),
        );
        ode.integrate_to(5.0).unwrap();
        assert!((ode.y()[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        };
        let mut ode = Dopri5::new(
            |_t, y: &[f64; 2], dy: &mut [f64; 2]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            [1.0, 0.0],
            tol,
        );
        let t_end = 20.0 * std::f64::consts::PI;
        ode.integrate_to(t_end).unwrap();
        assert!((ode.y()[0] - 1.0).abs() < 1e-8);
        assert!(ode.y()[1].abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_fifth_order_accurate() {
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-13,
        };
        let mut ode = Dopri5::new(
            |_t, y: &[f64; 2], dy: &mut [f64; 2]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            [0.0, 1.0],
            tol,
        );
        let mut worst: f64 = 0.0;
        while ode.t() < 10.0 {
            ode.step(10.0).unwrap();
            let (a, b) = (ode.t_prev(), ode.t());
            for k in 1..10 {
                let t = a + (b - a) * k as f64 / 10.0;
                worst = worst.max((ode.interpolate(t)[0] - t.sin()).abs());
            }
        }
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn max_step_is_honoured() {
        let mut ode = Dopri5::new(
            |_t, _y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = 1.0,
            0.0,
            [0.0],
            Tolerances::default(),
        )
        .with_max_step(0.1);
        ode.integrate_to(1.0).unwrap();
        assert!(ode.accepted_steps() >= 10);
        assert!((ode.y()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn backward_integration_works() {
        let mut ode = Dopri5::new(
            |_t, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0],
            1.0,
            [1.0f64.exp()],
            Tolerances::default(),
        );
        ode.integrate_to(0.0).unwrap();
        assert!((ode.y()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reports_step_underflow() {
        let mut ode = Dopri5::new(
            |_t, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * y[0],
            0.0,
            [1.0],
            Tolerances::default(),
        );
        let err = ode.integrate_to(2.0).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }
}
