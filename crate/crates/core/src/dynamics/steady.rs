use faer::linalg::solvers::Solve;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, UomError};
use crate::hilbert::QuantumState;
use crate::sparse::CsrMatrix;

use super::generator::Liouvillian;
use super::integrator::{Dopri5, OdeSystem, Tolerances};

/// Largest vectorized dimension solved by dense LU.
pub const DENSE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    NullSpace,
    Integration,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: QuantumState,
    /// `max |L vec(rho)| / max |L|`
    pub residual: f64,
    pub method: SteadyMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    pub dense_limit: usize,
    /// Target for the relative residual.
    pub residual_tol: f64,
    pub tol: Tolerances,
    /// Longest integration time for the fallback path.
    pub max_time: Option<f64>,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            dense_limit: DENSE_LIMIT,
            residual_tol: 1e-10,
            tol: Tolerances { rtol: 1e-10, atol: 1e-13 },
            max_time: None,
        }
    }
}

pub fn steady_state(l: &Liouvillian) -> Result<QuantumState> {
    Ok(steady_state_with(l, None, &SteadyOptions::default())?.state)
}

/// Steady state by a trace-constrained null-space solve, or by
/// integrating from `guess` when the system is too large or ill-conditioned.
pub fn steady_state_with(l: &Liouvillian, guess: Option<&QuantumState>, opts: &SteadyOptions) -> Result<SteadyState> {
    let n = l.dim();
    let big_n = n * n;
    if big_n <= opts.dense_limit {
        match null_space_solve(l) {
            Ok(ss) if ss.residual <= opts.residual_tol => return Ok(ss),
            Ok(ss) => log::debug!("null-space residual {:.2e}; integrating instead", ss.residual),
            Err(e @ UomError::MultipleSteadyStates(_)) => return Err(e),
            Err(e) => log::debug!("null-space solve failed ({e}); integrating instead"),
        }
    }
    let start = match guess {
        Some(g) => g.density_matrix(),
        None => {
            let mut m = DMatrix::zeros(n, n);
            m[(0, 0)] = Complex64::new(1.0, 0.0);
            m
        }
    };
    integrate_to_steady(l, start, opts)
}

fn normalize(x: &[Complex64], n: usize) -> Result<DMatrix<Complex64>> {
    let m = DMatrix::from_column_slice(n, n, x);
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace().re;
    if !tr.is_finite() || tr.abs() < 1e-300 {
        return Err(UomError::SingularSystem("steady state has zero trace".into()));
    }
    Ok(m / Complex64::new(tr, 0.0))
}

fn relative_residual(l: &Liouvillian, rho: &DMatrix<Complex64>) -> f64 {
    let r = l.matrix().matvec(rho.as_slice());
    r.iter().map(|z| z.norm()).fold(0.0, f64::max) / l.max_abs().max(f64::MIN_POSITIVE)
}

fn solve_replaced(l: &CsrMatrix, scale: f64, n: usize, row: usize) -> Option<(Vec<Complex64>, f64)> {
    let nn = n * n;
    let mut m = faer::Mat::<Complex64>::zeros(nn, nn);
    for (r, c, v) in l.triplets() {
        if r != row {
            m[(r, c)] = v / scale;
        }
    }
    for i in 0..n {
        m[(row, i * (n + 1))] = Complex64::new(1.0, 0.0);
    }
    super::pin_dense_parallelism();
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let diag: Vec<f64> = (0..nn).map(|i| u[(i, i)].norm()).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        return None;
    }
    let mut rhs = faer::Mat::<Complex64>::zeros(nn, 1);
    rhs[(row, 0)] = Complex64::new(1.0, 0.0);
    lu.solve_in_place(&mut rhs);
    Some((rhs.col(0).iter().copied().collect(), lo / hi))
}

fn null_space_solve(l: &Liouvillian) -> Result<SteadyState> {
    let n = l.dim();
    let scale = l.max_abs();
    if scale == 0.0 {
        return Err(UomError::MultipleSteadyStates(n * n));
    }
    // row of the (0,0) equation; it is implied by trace preservation
    let (x, pivot_ratio) =
        solve_replaced(l.matrix(), scale, n, 0).ok_or_else(|| UomError::SingularSystem("trace-constrained system is singular".into()))?;
    let rho = normalize(&x, n)?;
    if pivot_ratio < 1e-12 {
        // a near-zero pivot means either a degenerate null space or an
        // ill-conditioned unique one; a different constraint row tells them apart
        let last = (n - 1) * (n + 1);
        let other = solve_replaced(l.matrix(), scale, n, last).map(|(y, _)| normalize(&y, n));
        match other {
            Some(Ok(rho2)) if (&rho2 - &rho).norm() < 1e-6 => {}
            _ => return Err(UomError::MultipleSteadyStates(2)),
        }
    }
    let residual = relative_residual(l, &rho);
    Ok(SteadyState {
        state: QuantumState::density_unchecked(l.space(), rho),
        residual,
        method: SteadyMethod::NullSpace,
    })
}

/// Propagation of `vec(X)` under a static Liouvillian.
pub(crate) struct SuperopSystem<'a> {
    pub l: &'a CsrMatrix,
}

impl OdeSystem for SuperopSystem<'_> {
    fn len(&self) -> usize {
        self.l.nrows()
    }
    fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        dy.fill(Complex64::new(0.0, 0.0));
        self.l.matvec_acc(Complex64::new(1.0, 0.0), y, dy);
    }
}

fn integrate_to_steady(l: &Liouvillian, start: DMatrix<Complex64>, opts: &SteadyOptions) -> Result<SteadyState> {
    let n = l.dim();
    let mat = l.matrix();
    // slowest plausible scale: the smallest nonzero diagonal decay
    let min_rate = (0..n * n)
        .map(|i| mat.get(i, i).re.abs())
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_rate.is_finite() {
        return Err(UomError::MultipleSteadyStates(2));
    }
    let max_time = opts.max_time.unwrap_or(1e4 / min_rate);
    let mut sys = SuperopSystem { l: mat };
    let mut y: Vec<Complex64> = start.as_slice().to_vec();
    let mut ode = Dopri5::new(n * n, opts.tol);
    let mut t = 0.0;
    let mut window = 1.0 / min_rate;
    loop {
        ode.integrate(&mut sys, t, t + window, &mut y)?;
        t += window;
        let rho = normalize(&y, n)?;
        let residual = relative_residual(l, &rho);
        if residual <= opts.residual_tol {
            return Ok(SteadyState {
                state: QuantumState::density_unchecked(l.space(), rho),
                residual,
                method: SteadyMethod::Integration,
            });
        }
        if t >= max_time {
            return Err(UomError::NonConvergent(format!(
                "steady state not reached after t = {t:.3e} (relative residual {residual:.2e})"
            )));
        }
        window *= 2.0;
    }
}
