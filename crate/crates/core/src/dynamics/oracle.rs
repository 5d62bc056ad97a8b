use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, UomError};

use super::generator::Liouvillian;

/// Largest state-space dimension accepted by [`propagator_oracle`].
pub const ORACLE_MAX_DIM: usize = 64;

/// Dense `exp(L t)` by scaling and squaring with Padé approximants.
/// Meant as an independent reference for the adaptive integrator.
pub fn propagator_oracle(l: &Liouvillian, t: f64) -> Result<DMatrix<Complex64>> {
    let n = l.dim();
    if n > ORACLE_MAX_DIM {
        return Err(UomError::TooLarge(format!(
            "dense propagator limited to dimension {ORACLE_MAX_DIM}, got {n}"
        )));
    }
    let m = l.matrix().to_dense() * Complex64::new(t, 0.0);
    Ok(m.exp())
}

/// Applies a dense propagator to a density matrix.
pub fn propagate_dense(p: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = rho.nrows();
    let v = p * nalgebra::DVector::from_column_slice(rho.as_slice());
    DMatrix::from_column_slice(n, n, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{liouvillian, CollapseSet};
    use crate::hilbert::{ladder, number, CompositeSpace, Operator};

    fn sample() -> Liouvillian {
        let a = ladder(3).unwrap();
        let h = &(&number(3).unwrap() * 1.3) + &(&(&a + &a.adjoint()) * 0.4);
        let mut c = CollapseSet::new();
        c.push(a, 0.5).unwrap();
        liouvillian(&h, &c).unwrap()
    }

    #[test]
    fn identity_at_zero() {
        let p = propagator_oracle(&sample(), 0.0).unwrap();
        assert!((p - DMatrix::identity(9, 9)).norm() < 1e-14);
    }

    #[test]
    fn semigroup() {
        let l = sample();
        let p1 = propagator_oracle(&l, 0.7).unwrap();
        let p2 = propagator_oracle(&l, 1.1).unwrap();
        let p12 = propagator_oracle(&l, 1.8).unwrap();
        assert!((&p1 * &p2 - p12).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn refuses_large_spaces() {
        let s = CompositeSpace::single(65).unwrap();
        let l = liouvillian(&Operator::zero(&s), &CollapseSet::new()).unwrap();
        assert!(matches!(propagator_oracle(&l, 1.0), Err(UomError::TooLarge(_))));
    }
}
