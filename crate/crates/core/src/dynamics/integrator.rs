//! Adaptive Dormand-Prince 5(4) integrator on flat complex state vectors.

use num_complex::Complex64;

use crate::error::{Result, UomError};

pub trait OdeSystem {
    fn len(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted local error estimate (in tolerance units).
    pub max_error: f64,
    /// Sum of accepted local error bounds in max norm; a crude global error estimate.
    pub error_bound: f64,
}

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

/// Integrator state carried between calls so the step size is reused.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    tol: Tolerances,
    pub max_steps: usize,
    h: Option<f64>,
    err_old: f64,
    k: [Vec<Complex64>; 7],
    y_stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    fsal_valid: bool,
    record: Option<Vec<f64>>,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(n: usize, tol: Tolerances) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            tol,
            max_steps: 50_000_000,
            h: None,
            err_old: 1e-4,
            k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            y_stage: z.clone(),
            y_new: z,
            fsal_valid: false,
            record: None,
            stats: StepStats::default(),
        }
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Forget the cached derivative (call after changing `y` externally).
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[Complex64], span: f64) -> f64 {
        // Hairer-Wanner starting-step heuristic
        sys.rhs(t, y, &mut self.k[0]);
        self.stats.rhs_evals += 1;
        self.fsal_valid = true;
        let (mut d0, mut d1) = (0.0, 0.0);
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sk = self.tol.atol + self.tol.rtol * yi.norm();
            d0 += (yi.norm() / sk).powi(2);
            d1 += (fi.norm() / sk).powi(2);
        }
        let n = y.len().max(1) as f64;
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        h0.min(span.abs())
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn integrate<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, t1: f64, y: &mut [Complex64]) -> Result<()> {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        if span < 0.0 {
            return Err(UomError::InvalidArgument("integration must move forward in time".into()));
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(sys, t0, y, span),
        };
        let mut t = t0;
        let h_floor = 1e-14 * t1.abs().max(span);
        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(UomError::MaxStepsExceeded { t, max_steps: self.max_steps });
            }
            let last = t + h >= t1 || t1 - (t + h) < 1e-12 * span;
            let step = if last { t1 - t } else { h };
            let (err, scale) = self.try_step(sys, t, step, y);
            if !err.is_finite() {
                return Err(UomError::Divergence(format!("non-finite state at t = {t:.6e}")));
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + step };
                self.stats.accepted += 1;
                if let Some(r) = self.record.as_mut() {
                    r.push(step);
                }
                self.stats.max_error = self.stats.max_error.max(err);
                self.stats.error_bound += err * scale;
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.fsal_valid = true;
                let fac = 0.9 * err.max(1e-10).powf(-0.14) * self.err_old.powf(0.08);
                self.err_old = err.max(1e-4);
                let h_next = step * fac.clamp(0.2, 5.0);
                // keep the unclamped size for the next interval
                h = if last { h.max(h_next) } else { h_next };
            } else {
                self.stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < h_floor {
                    return Err(UomError::StepSizeUnderflow { t, h, err });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// Like [`Dopri5::integrate`] but also returns the accepted step sizes.
    pub fn integrate_recording<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, t1: f64, y: &mut [Complex64]) -> Result<Vec<f64>> {
        self.record = Some(Vec::new());
        let out = self.integrate(sys, t0, t1, y);
        let steps = self.record.take().unwrap_or_default();
        out.map(|_| steps)
    }

    /// Fixed-step integration along a recorded step sequence. The map
    /// `y(t0) -> y(t0 + sum steps)` is then exactly linear for linear systems.
    pub fn replay<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, steps: &[f64], y: &mut [Complex64]) -> Result<()> {
        self.fsal_valid = false;
        let mut t = t0;
        for &h in steps {
            let (err, _) = self.try_step(sys, t, h, y);
            if !err.is_finite() {
                return Err(UomError::Divergence(format!("non-finite state at t = {t:.6e}")));
            }
            y.copy_from_slice(&self.y_new);
            self.k.swap(0, 6);
            self.fsal_valid = true;
            self.stats.accepted += 1;
            t += h;
        }
        Ok(())
    }

    /// One trial step; leaves the candidate in `y_new` and returns the scaled error.
    fn try_step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, h: f64, y: &[Complex64]) -> (f64, f64) {
        if !self.fsal_valid {
            sys.rhs(t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal_valid = true;
        }
        let stages: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (s, (c, a)) in stages.iter().enumerate() {
            self.combine(y, h, a);
            let (_, rest) = self.k.split_at_mut(s + 1);
            sys.rhs(t + c * h, &self.y_stage, &mut rest[0]);
        }
        // fifth-order solution
        let b = [A71, 0.0, A73, A74, A75, A76];
        for i in 0..y.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, bj) in b.iter().enumerate() {
                if *bj != 0.0 {
                    acc += self.k[j][i] * *bj;
                }
            }
            self.y_new[i] = y[i] + acc * h;
        }
        sys.rhs(t + h, &self.y_new, &mut self.k[6]);
        self.stats.rhs_evals += 6;
        let e = [E1, 0.0, E3, E4, E5, E6, E7];
        let mut sum = 0.0;
        let mut sk_max: f64 = 0.0;
        for i in 0..y.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, ej) in e.iter().enumerate() {
                if *ej != 0.0 {
                    acc += self.k[j][i] * *ej;
                }
            }
            let sk = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
            sk_max = sk_max.max(sk);
            sum += ((acc * h).norm() / sk).powi(2);
        }
        let n = y.len().max(1) as f64;
        ((sum / n).sqrt(), sk_max * n.sqrt())
    }

    fn combine(&mut self, y: &[Complex64], h: f64, a: &[f64]) {
        for i in 0..y.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, aj) in a.iter().enumerate() {
                acc += self.k[j][i] * *aj;
            }
            self.y_stage[i] = y[i] + acc * h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotor(f64);

    impl OdeSystem for Rotor {
        fn len(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = Complex64::new(-0.3, -self.0) * y[0];
        }
    }

    #[test]
    fn damped_rotation() {
        let mut sys = Rotor(5.0);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut ode = Dopri5::new(1, Tolerances { rtol: 1e-10, atol: 1e-12 });
        ode.integrate(&mut sys, 0.0, 3.0, &mut y).unwrap();
        let want = (Complex64::new(-0.3, -5.0) * 3.0).exp();
        assert!((y[0] - want).norm() < 1e-8);
        // continue on a second interval with the cached step
        ode.integrate(&mut sys, 3.0, 4.0, &mut y).unwrap();
        let want = (Complex64::new(-0.3, -5.0) * 4.0).exp();
        assert!((y[0] - want).norm() < 1e-8);
    }

    #[test]
    fn replay_reproduces_adaptive_run() {
        let mut sys = Rotor(5.0);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut ode = Dopri5::new(1, Tolerances { rtol: 1e-9, atol: 1e-12 });
        let steps = ode.integrate_recording(&mut sys, 0.0, 2.0, &mut y).unwrap();
        assert!((steps.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let mut z = vec![Complex64::new(1.0, 0.0)];
        ode.replay(&mut sys, 0.0, &steps, &mut z).unwrap();
        assert!((y[0] - z[0]).norm() < 1e-14);
    }

    #[test]
    fn step_budget() {
        let mut sys = Rotor(1e6);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut ode = Dopri5::new(1, Tolerances::default());
        ode.max_steps = 10;
        assert!(matches!(
            ode.integrate(&mut sys, 0.0, 1.0, &mut y),
            Err(UomError::MaxStepsExceeded { .. })
        ));
    }
}
