use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, UomError};
use crate::hamiltonians::Envelope;
use crate::hilbert::{CompositeSpace, Operator};
use crate::sparse::CsrMatrix;

use super::CollapseSet;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Static Hamiltonian plus a sum of constant Hermitian operators with scalar envelopes.
#[derive(Debug, Clone)]
pub struct TimeDependentHamiltonian {
    pub static_part: Operator,
    pub terms: Vec<(Operator, Envelope)>,
}

impl TimeDependentHamiltonian {
    pub fn constant(h: Operator) -> Self {
        Self {
            static_part: h,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, op: Operator, env: Envelope) -> Self {
        self.terms.push((op, env));
        self
    }

    pub fn space(&self) -> &CompositeSpace {
        self.static_part.space()
    }

    pub fn is_static(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn at(&self, t: f64) -> Operator {
        let mut h = self.static_part.clone();
        for (op, env) in &self.terms {
            h = &h + &(op * env.value(t));
        }
        h
    }

    fn check(&self) -> Result<()> {
        for (op, _) in &self.terms {
            self.static_part.check_same_space(op)?;
        }
        Ok(())
    }
}

impl From<Operator> for TimeDependentHamiltonian {
    fn from(h: Operator) -> Self {
        Self::constant(h)
    }
}

/// Right-hand side of the master equation acting on column-major dense matrices.
///
/// Uses `L(X) = -i H_eff X + i X H_eff^dag + sum r A X A^dag` with
/// `H_eff = H - (i/2) sum r A^dag A`, which is valid for any `X`.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    n: usize,
    h_eff: CsrMatrix,
    jumps: Vec<(CsrMatrix, f64)>,
    drives: Vec<(CsrMatrix, Envelope)>,
    hermitian_input: bool,
    scratch: Vec<Complex64>,
}

impl LindbladGenerator {
    pub fn new(h: &TimeDependentHamiltonian, collapses: &CollapseSet) -> Result<Self> {
        h.check()?;
        collapses.check_space(h.space())?;
        let n = h.space().total_dim();
        let mut h_eff = h.static_part.matrix().clone();
        let mut jumps = Vec::new();
        for (op, rate) in collapses.iter() {
            if *rate == 0.0 {
                continue;
            }
            let a = op.matrix();
            let ada = a.adjoint().matmul(a);
            h_eff = h_eff.add_scaled(&ada, Complex64::new(0.0, -0.5 * rate));
            jumps.push((a.clone(), *rate));
        }
        let drives = h.terms.iter().map(|(op, env)| (op.matrix().clone(), *env)).collect();
        Ok(Self {
            n,
            h_eff,
            jumps,
            drives,
            hermitian_input: false,
            scratch: vec![ZERO; n * n],
        })
    }

    /// Promise that every input is Hermitian, which halves the work.
    pub fn assume_hermitian(mut self, yes: bool) -> Self {
        self.hermitian_input = yes;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_static(&self) -> bool {
        self.drives.is_empty()
    }

    /// `out = L(t) X`.
    pub fn apply(&mut self, t: f64, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        out.fill(ZERO);
        let herm = self.hermitian_input;
        // with Hermitian X, L(X) = Y + Y^dag where Y = -i H_eff X + (1/2) sum r A X A^dag
        let jump_weight = if herm { 0.5 } else { 1.0 };
        self.h_eff.mul_dense_acc(-I, x, n, out);
        if !herm {
            self.h_eff.dense_mul_adjoint_acc(I, x, n, out);
        }
        for (hk, env) in &self.drives {
            let f = env.value(t);
            if f == 0.0 {
                continue;
            }
            hk.mul_dense_acc(-I * f, x, n, out);
            if !herm {
                hk.dense_mul_acc(I * f, x, n, out);
            }
        }
        for (a, rate) in &self.jumps {
            self.scratch.fill(ZERO);
            a.mul_dense_acc(Complex64::new(1.0, 0.0), x, n, &mut self.scratch);
            a.dense_mul_adjoint_acc(Complex64::new(rate * jump_weight, 0.0), &self.scratch, n, out);
        }
        if herm {
            add_adjoint_in_place(out, n);
        }
    }
}

/// `Y <- Y + Y^dag` for a column-major square matrix.
fn add_adjoint_in_place(y: &mut [Complex64], n: usize) {
    for j in 0..n {
        y[j * n + j] = Complex64::new(2.0 * y[j * n + j].re, 0.0);
        for i in (j + 1)..n {
            let a = y[j * n + i];
            let b = y[i * n + j];
            y[j * n + i] = a + b.conj();
            y[i * n + j] = b + a.conj();
        }
    }
}

/// Liouvillian superoperator acting on column-stacked `vec(rho)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    space: CompositeSpace,
    op: Operator,
}

impl Liouvillian {
    pub fn from_superoperator(space: &CompositeSpace, op: Operator) -> Result<Self> {
        let n = space.total_dim();
        if op.dim() != n * n {
            return Err(UomError::InvalidDimension(format!(
                "superoperator of dimension {} does not act on {space}",
                op.dim()
            )));
        }
        Ok(Self { space: space.clone(), op })
    }

    /// State-space (not superoperator) dimension.
    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn superoperator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &CsrMatrix {
        self.op.matrix()
    }

    pub fn max_abs(&self) -> f64 {
        self.op.max_abs()
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = self.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(UomError::InvalidDimension(format!(
                "Liouvillian on {} cannot act on a {}x{} matrix",
                self.space,
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(DMatrix::from_vec(n, n, self.op.matrix().matvec(rho.as_slice())))
    }
}

/// Sparse Liouvillian, built with `vec(A X B) = (B^T (x) A) vec(X)`.
pub fn liouvillian(h: &Operator, collapses: &CollapseSet) -> Result<Liouvillian> {
    collapses.check_space(h.space())?;
    let n = h.dim();
    let id = CsrMatrix::identity(n);
    let hm = h.matrix();
    let mut l = id.kron(hm).scale(-I).add_scaled(&hm.transpose().kron(&id), I);
    for (op, rate) in collapses.iter() {
        if *rate == 0.0 {
            continue;
        }
        let a = op.matrix();
        let ada = a.adjoint().matmul(a);
        let r = Complex64::new(*rate, 0.0);
        l = l.add_scaled(&a.conj().kron(a), r);
        l = l.add_scaled(&id.kron(&ada), -0.5 * r);
        l = l.add_scaled(&ada.transpose().kron(&id), -0.5 * r);
    }
    Liouvillian::from_superoperator(h.space(), Operator::new(CompositeSpace::single(n * n)?, l)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ladder, mode_op, CompositeSpace, Subsystem};
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn generator_matches_superoperator() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let s = CompositeSpace::cavity_mech(2, 3).unwrap();
        let n = s.total_dim();
        let hr = random_matrix(n, &mut rng);
        let h = Operator::from_dense(&s, &(&hr + hr.adjoint())).unwrap();
        let mut c = CollapseSet::new();
        c.push(mode_op(&s, Subsystem::Mech).unwrap(), 0.7).unwrap();
        c.push(mode_op(&s, Subsystem::Cavity).unwrap(), 0.3).unwrap();
        let l = liouvillian(&h, &c).unwrap();
        let x = random_matrix(n, &mut rng);
        let want = l.apply(&x).unwrap();

        let mut g = LindbladGenerator::new(&h.clone().into(), &c).unwrap();
        let mut out = vec![ZERO; n * n];
        g.apply(0.0, x.as_slice(), &mut out);
        let got = DMatrix::from_vec(n, n, out.clone());
        assert!((&got - &want).norm() < 1e-12 * want.norm());

        // direct commutator/dissipator oracle on a Hermitian input
        let rho = &x + x.adjoint();
        let mut g = g.assume_hermitian(true);
        g.apply(0.0, rho.as_slice(), &mut out);
        let hd = h.to_dense();
        let mut direct = (&hd * &rho - &rho * &hd) * (-I);
        for (op, r) in c.iter() {
            let a = op.to_dense();
            let ad = a.adjoint();
            direct += (&a * &rho * &ad * Complex64::new(2.0, 0.0) - &ad * &a * &rho - &rho * &ad * &a) * Complex64::new(r / 2.0, 0.0);
        }
        let got = DMatrix::from_vec(n, n, out);
        assert!((got - direct).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn single_photon_decay_rate() {
        let s = CompositeSpace::single(2).unwrap();
        let mut c = CollapseSet::new();
        let kappa = 2.5;
        c.push(ladder(2).unwrap(), kappa).unwrap();
        let l = liouvillian(&Operator::zero(&s), &c).unwrap();
        let mut rho = DMatrix::zeros(2, 2);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let d = l.apply(&rho).unwrap();
        assert!((d[(0, 0)].re - kappa).abs() < 1e-14);
        assert!((d[(1, 1)].re + kappa).abs() < 1e-14);
    }

    #[test]
    fn generator_is_traceless() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let s = CompositeSpace::tripartite(2, 2).unwrap();
        let n = s.total_dim();
        let hr = random_matrix(n, &mut rng);
        let h = Operator::from_dense(&s, &(&hr + hr.adjoint())).unwrap();
        let mut c = CollapseSet::new();
        c.push(mode_op(&s, Subsystem::Mech).unwrap(), 1.3).unwrap();
        let l = liouvillian(&h, &c).unwrap();
        for _ in 0..5 {
            let x = random_matrix(n, &mut rng);
            let rho = &x + x.adjoint();
            let d = l.apply(&rho).unwrap();
            assert!(d.trace().norm() < 1e-12);
        }
    }
}
