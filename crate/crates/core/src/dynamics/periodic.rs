//! Steady states of periodically driven master equations by shooting:
//! solve `P rho = rho` for the one-period propagator `P` with GMRES.

use faer::linalg::solvers::{PartialPivLu, Solve};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, UomError};
use crate::hilbert::QuantumState;

use crate::hamiltonians::Envelope;
use crate::hilbert::Operator;

use super::generator::{liouvillian, LindbladGenerator, Liouvillian, TimeDependentHamiltonian};
use super::integrator::{Dopri5, OdeSystem, StepStats, Tolerances};
use super::krylov::{gmres, GmresOptions};
use super::CollapseSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest vectorized dimension for the dense secular factorization (~1 GB).
pub const MAX_SECULAR_DIM: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOptions {
    pub tol: Tolerances,
    pub gmres: GmresOptions,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances { rtol: 1e-9, atol: 1e-12 },
            gmres: GmresOptions {
                tol: 1e-7,
                restart: 120,
                max_iter: 600,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicSteadyState {
    /// State at the start of the period (t = 0 mod T).
    pub state: QuantumState,
    /// `max |P rho - rho| / max |rho|` after the solve.
    pub residual: f64,
    pub iterations: usize,
    /// Steps per period of the frozen integration schedule.
    pub steps_per_period: usize,
    pub stats: StepStats,
}

struct GeneralSystem {
    gen: LindbladGenerator,
}

impl OdeSystem for GeneralSystem {
    fn len(&self) -> usize {
        self.gen.dim().pow(2)
    }
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.gen.apply(t, y, dy);
    }
}

/// The periodic steady state of `h` (period `period`) starting from `guess`.
///
/// The step schedule of one adaptive period from `guess` is frozen and
/// replayed, which makes the period map exactly linear. `precond`, if
/// given, approximates `(P - I)^{-1}` on traceless inputs.
pub fn periodic_steady_state(
    h: &TimeDependentHamiltonian,
    collapses: &CollapseSet,
    period: f64,
    guess: &QuantumState,
    precond: Option<&mut dyn FnMut(&[Complex64], &mut [Complex64]) -> Result<()>>,
    opts: &PeriodicOptions,
) -> Result<PeriodicSteadyState> {
    if !(period > 0.0) {
        return Err(UomError::InvalidArgument("period must be positive".into()));
    }
    if guess.space().dims() != h.space().dims() {
        return Err(UomError::InvalidDimension(format!(
            "guess on {} but Hamiltonian on {}",
            guess.space(),
            h.space()
        )));
    }
    let n = guess.dim();
    let nn = n * n;
    let mut sys = GeneralSystem {
        gen: LindbladGenerator::new(h, collapses)?,
    };
    let mut ode = Dopri5::new(nn, opts.tol);
    let rho0: Vec<Complex64> = guess.density_matrix().as_slice().to_vec();
    let mut probe = rho0.clone();
    let steps = ode.integrate_recording(&mut sys, 0.0, period, &mut probe)?;

    // (P - I) x + tr(x) E with E = I/n removes the trace degeneracy
    let diag: Vec<usize> = (0..n).map(|i| i * (n + 1)).collect();
    let inv_n = Complex64::new(1.0 / n as f64, 0.0);
    let mut apply = |x: &[Complex64], out: &mut [Complex64]| -> Result<()> {
        out.copy_from_slice(x);
        ode.replay(&mut sys, 0.0, &steps, out)?;
        let tr: Complex64 = diag.iter().map(|&i| x[i]).sum();
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= xi;
        }
        for &i in &diag {
            out[i] += tr * inv_n;
        }
        Ok(())
    };

    // rho = rho0 + d with (P - I) d = -(P - I) rho0 and tr d = 0
    let mut r0 = vec![ZERO; nn];
    apply(&rho0, &mut r0)?;
    let tr0: Complex64 = diag.iter().map(|&i| rho0[i]).sum();
    for &i in &diag {
        r0[i] -= tr0 * inv_n;
    }
    let b: Vec<Complex64> = r0.iter().map(|z| -z).collect();
    let mut d = vec![ZERO; nn];
    let identity = |v: &[Complex64], out: &mut [Complex64]| -> Result<()> {
        out.copy_from_slice(v);
        Ok(())
    };
    let report = match precond {
        Some(p) => gmres(&mut apply, p, &b, &mut d, &opts.gmres)?,
        None => gmres(&mut apply, identity, &b, &mut d, &opts.gmres)?,
    };
    let x: Vec<Complex64> = rho0.iter().zip(&d).map(|(a, b)| a + b).collect();
    let m = DMatrix::from_column_slice(n, n, &x);
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace().re;
    let m = m / Complex64::new(tr, 0.0);

    let mut after = m.as_slice().to_vec();
    ode.replay(&mut sys, 0.0, &steps, &mut after)?;
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let residual = after.iter().zip(m.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    Ok(PeriodicSteadyState {
        state: QuantumState::density_unchecked(guess.space(), m),
        residual,
        iterations: report.iterations,
        steps_per_period: steps.len(),
        stats: ode.stats,
    })
}

/// Approximate inverse of `P - I` built from the secular (rotating-wave)
/// generator in the eigenbasis of the static Hamiltonian.
///
/// Each dressed level `k` gets the integer `q_k = round((E_k - E_0) / nu)`;
/// in the frame `exp(i nu t sum q_k |k><k|)` every drive element with
/// `q_k - q_l + h = 0` (harmonic `h` of `nu`) is static and kept, the rest
/// is dropped. Collapse operators are split by `q_k - q_l` (secular
/// approximation). Because the `q_k` are integers the frame is the identity
/// at multiples of `2 pi / nu`.
pub struct FloquetPreconditioner {
    n: usize,
    basis: DMatrix<Complex64>,
    lu: PartialPivLu<Complex64>,
    secular: Liouvillian,
    secular_state: QuantumState,
}

fn harmonic_parts(env: &Envelope, nu: f64) -> Result<Vec<(i64, Complex64)>> {
    let harmonic = |omega: f64| -> Result<i64> {
        let h = (omega / nu).round();
        if (omega - h * nu).abs() > 1e-9 * nu.max(omega.abs()) {
            return Err(UomError::InvalidArgument(format!(
                "drive frequency {omega:.6e} is not a harmonic of {nu:.6e}"
            )));
        }
        Ok(h as i64)
    };
    Ok(match *env {
        Envelope::Const(c) => vec![(0, Complex64::new(c, 0.0))],
        Envelope::Step { amp, t_on } => {
            if t_on > 0.0 {
                return Err(UomError::InvalidArgument("step drives must be on from t = 0 in a periodic solve".into()));
            }
            vec![(0, Complex64::new(amp, 0.0))]
        }
        Envelope::Cos { amp, omega, phase } => {
            let h = harmonic(omega)?;
            let e = Complex64::from_polar(amp / 2.0, phase);
            vec![(h, e), (-h, e.conj())]
        }
        Envelope::Sin { amp, omega, phase } => {
            let h = harmonic(omega)?;
            let e = Complex64::from_polar(amp / 2.0, phase) / Complex64::new(0.0, 1.0);
            vec![(h, e), (-h, e.conj())]
        }
    })
}

impl FloquetPreconditioner {
    pub fn new(h: &TimeDependentHamiltonian, collapses: &CollapseSet, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(UomError::InvalidArgument("base frequency must be positive".into()));
        }
        let space = h.space().clone();
        let n = space.total_dim();
        if n * n > MAX_SECULAR_DIM {
            return Err(UomError::TooLarge(format!("secular preconditioner on {n} levels")));
        }
        let eig = h.static_part.to_dense().symmetric_eigen();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let basis = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
        let energies: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let e0 = energies[0];
        let q: Vec<i64> = energies.iter().map(|e| ((e - e0) / nu).round() as i64).collect();
        let to_dressed = |m: &DMatrix<Complex64>| basis.adjoint() * m * &basis;

        let mut hs = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(energies[r] - e0 - q[r] as f64 * nu, 0.0)
            } else {
                ZERO
            }
        });
        for (op, env) in &h.terms {
            let od = to_dressed(&op.to_dense());
            for (hk, amp) in harmonic_parts(env, nu)? {
                for r in 0..n {
                    for c in 0..n {
                        if q[r] - q[c] + hk == 0 {
                            hs[(r, c)] += amp * od[(r, c)];
                        }
                    }
                }
            }
        }
        let hs = (&hs + hs.adjoint()) * Complex64::new(0.5, 0.0);
        let mut sec = CollapseSet::new();
        for (op, rate) in collapses.iter() {
            let ad = to_dressed(&op.to_dense());
            let mut orders: Vec<i64> = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    if ad[(r, c)].norm() > 0.0 && !orders.contains(&(q[r] - q[c])) {
                        orders.push(q[r] - q[c]);
                    }
                }
            }
            for d in orders {
                let part = DMatrix::from_fn(n, n, |r, c| if q[r] - q[c] == d { ad[(r, c)] } else { ZERO });
                if part.iter().any(|z| z.norm() > 1e-12) {
                    sec.push(Operator::from_dense(&space, &part)?, *rate)?;
                }
            }
        }
        let secular = liouvillian(&Operator::from_dense(&space, &hs)?, &sec)?;
        // solved before the factorization below so the two dense copies never coexist
        let ss = super::steady_state_with(&secular, None, &Default::default())?;
        let rho = &basis * ss.state.density_matrix() * basis.adjoint();
        let secular_state = QuantumState::density_unchecked(&space, rho);

        let period = std::f64::consts::TAU / nu;
        let nn = n * n;
        let mut m = faer::Mat::<Complex64>::zeros(nn, nn);
        for (r, c, v) in secular.matrix().triplets() {
            m[(r, c)] = v * period;
        }
        for i in 0..nn {
            // exact one-period factor for the diagonal, first order elsewhere
            m[(i, i)] = m[(i, i)].exp() - Complex64::new(1.0, 0.0);
        }
        let inv_n = Complex64::new(1.0 / n as f64, 0.0);
        for i in 0..n {
            for j in 0..n {
                m[(i * (n + 1), j * (n + 1))] += inv_n;
            }
        }
        super::pin_dense_parallelism();
        let lu = m.partial_piv_lu();
        drop(m);
        Ok(Self {
            n,
            basis,
            lu,
            secular,
            secular_state,
        })
    }

    /// The secular generator in the dressed basis.
    pub fn secular_liouvillian(&self) -> &Liouvillian {
        &self.secular
    }

    pub fn apply(&self, r: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let n = self.n;
        let rd = self.basis.adjoint() * DMatrix::from_column_slice(n, n, r) * &self.basis;
        let mut y = faer::Mat::<Complex64>::from_fn(n * n, 1, |i, _| rd[i]);
        self.lu.solve_in_place(&mut y);
        if y.col(0).iter().any(|z| !z.is_finite()) {
            return Err(UomError::SingularSystem("secular preconditioner is singular".into()));
        }
        let y: Vec<Complex64> = y.col(0).iter().copied().collect();
        let back = &self.basis * DMatrix::from_column_slice(n, n, &y) * self.basis.adjoint();
        out.copy_from_slice(back.as_slice());
        Ok(())
    }

    /// Steady state of the secular model, returned in the original basis.
    pub fn secular_steady_state(&self) -> Result<QuantumState> {
        Ok(self.secular_state.clone())
    }
}

/// [`periodic_steady_state`] warm-started from, and preconditioned by, the
/// secular model of a drive periodic in `2 pi / nu`.
pub fn floquet_steady_state(
    h: &TimeDependentHamiltonian,
    collapses: &CollapseSet,
    nu: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicSteadyState> {
    let pre = FloquetPreconditioner::new(h, collapses, nu)?;
    let guess = pre.secular_steady_state()?;
    let mut apply = |r: &[Complex64], out: &mut [Complex64]| pre.apply(r, out);
    periodic_steady_state(h, collapses, std::f64::consts::TAU / nu, &guess, Some(&mut apply), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::steady_state;
    use crate::hilbert::{expect, ladder, number, CompositeSpace};

    #[test]
    fn driven_cavity_in_lab_frame() {
        // eps (a e^{i w t} + h.c.) on a cavity at w0; in the frame at w the
        // steady amplitude is -i eps / (i (w0 - w) + g/2)
        let dim = 12;
        let s = CompositeSpace::single(dim).unwrap();
        let a = ladder(dim).unwrap();
        let (w0, w, eps, g) = (20.0, 19.5, 0.3, 0.8);
        let x = &a + &a.adjoint();
        let p = &(&a - &a.adjoint()) * Complex64::new(0.0, 1.0);
        let h = TimeDependentHamiltonian::constant(&number(dim).unwrap() * w0)
            .with_term(x, Envelope::Cos { amp: eps, omega: w, phase: 0.0 })
            .with_term(p, Envelope::Sin { amp: eps, omega: w, phase: 0.0 });
        let mut c = CollapseSet::new();
        c.push(a.clone(), g).unwrap();
        let guess = s.basis_ket(&[0]).unwrap();
        let ss = periodic_steady_state(&h, &c, std::f64::consts::TAU / w, &guess, None, &Default::default()).unwrap();
        assert!(ss.residual < 1e-6, "{ss:?}");
        let want = Complex64::new(0.0, -eps) / Complex64::new(g / 2.0, w0 - w);
        let got = expect(&a, &ss.state).unwrap();
        assert!((got - want).norm() < 1e-6, "{got} vs {want}");

        // the static rotating-frame problem gives the same populations
        let hr = &(&number(dim).unwrap() * (w0 - w)) + &(&(&a + &a.adjoint()) * eps);
        let rs = steady_state(&liouvillian(&hr, &c).unwrap()).unwrap();
        let nr = expect(&number(dim).unwrap(), &rs).unwrap().re;
        let nl = expect(&number(dim).unwrap(), &ss.state).unwrap().re;
        assert!((nr - nl).abs() < 1e-6);
    }
}
