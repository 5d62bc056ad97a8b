//! Lindblad master-equation machinery.

mod evolve;
mod generator;
mod integrator;
mod krylov;
mod oracle;
mod periodic;
mod steady;

pub use evolve::{evolve, evolve_ket, evolve_ket_spectral, EvolveOptions, Trajectory};
pub use generator::{liouvillian, Liouvillian, LindbladGenerator, TimeDependentHamiltonian};
pub use integrator::{Dopri5, OdeSystem, StepStats, Tolerances};
pub use krylov::{gmres, GmresOptions, GmresReport};
pub use oracle::{propagate_dense, propagator_oracle, ORACLE_MAX_DIM};
pub use periodic::{floquet_steady_state, periodic_steady_state, FloquetPreconditioner, PeriodicOptions, MAX_SECULAR_DIM, PeriodicSteadyState};
pub use steady::{steady_state, steady_state_with, SteadyMethod, SteadyOptions, SteadyState, DENSE_LIMIT};

pub(crate) use steady::SuperopSystem;

use crate::error::{Result, UomError};
use crate::hilbert::{CompositeSpace, Operator};

/// Fixes faer's block splitting for the dense solves. Its default follows
/// the current rayon pool size, which would make results depend on the
/// number of sweep workers.
pub(crate) fn pin_dense_parallelism() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        #[cfg(feature = "parallel")]
        let par = faer::Par::rayon(std::thread::available_parallelism().map_or(1, |n| n.get()));
        #[cfg(not(feature = "parallel"))]
        let par = faer::Par::Seq;
        faer::set_global_parallelism(par);
    });
}

/// Collapse operators with their rates; the dissipator is
/// `r (2 A rho A^dag - A^dag A rho - rho A^dag A) / 2`.
#[derive(Debug, Clone, Default)]
pub struct CollapseSet {
    ops: Vec<(Operator, f64)>,
}

impl CollapseSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, op: Operator, rate: f64) -> Result<()> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(UomError::InvalidArgument(format!("collapse rate must be >= 0, got {rate}")));
        }
        if let Some((first, _)) = self.ops.first() {
            first.check_same_space(&op)?;
        }
        self.ops.push((op, rate));
        Ok(())
    }

    pub fn with(mut self, op: Operator, rate: f64) -> Result<Self> {
        self.push(op, rate)?;
        Ok(self)
    }

    /// `kappa (n_th + 1) D[b] + kappa n_th D[b^dag]`, relaxing to occupation `n_th`.
    pub fn thermal(b: &Operator, kappa: f64, n_th: f64) -> Result<Self> {
        if n_th < 0.0 {
            return Err(UomError::InvalidArgument("n_th must be >= 0".into()));
        }
        let mut c = Self::new();
        c.push(b.clone(), kappa * (n_th + 1.0))?;
        if n_th > 0.0 {
            c.push(b.adjoint(), kappa * n_th)?;
        }
        Ok(c)
    }

    pub fn extend(&mut self, other: CollapseSet) -> Result<()> {
        for (op, r) in other.ops {
            self.push(op, r)?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Operator, f64)> {
        self.ops.iter()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub(crate) fn check_space(&self, space: &CompositeSpace) -> Result<()> {
        for (op, _) in &self.ops {
            if op.space().dims() != space.dims() {
                return Err(UomError::InvalidDimension(format!(
                    "collapse operator on {} does not match {space}",
                    op.space()
                )));
            }
        }
        Ok(())
    }
}
