//! Tensor-product Hilbert spaces, operators and states for the
//! qubit ⊗ cavity ⊗ mechanical-mode system.
//!
//! Subsystems are always ordered qubit, cavity, mech. The qubit basis is
//! ordered `(|e>, |g>)`, so `sigma_z = diag(+1, -1)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UomError};
use crate::sparse::CsrMatrix;

/// Index of `|e>` in the qubit basis.
pub const EXCITED: usize = 0;
/// Index of `|g>` in the qubit basis.
pub const GROUND: usize = 1;

/// Population of the highest Fock level above which a run is flagged.
pub const TRUNCATION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Qubit,
    Cavity,
    Mech,
    /// Unlabelled factor, used for bare single-mode operators.
    Other,
}

impl Subsystem {
    fn rank(self) -> Option<u8> {
        match self {
            Subsystem::Qubit => Some(0),
            Subsystem::Cavity => Some(1),
            Subsystem::Mech => Some(2),
            Subsystem::Other => None,
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Subsystem::Qubit => "qubit",
            Subsystem::Cavity => "cavity",
            Subsystem::Mech => "mech",
            Subsystem::Other => "mode",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositeSpace {
    dims: Vec<usize>,
    labels: Vec<Subsystem>,
}

impl CompositeSpace {
    pub fn new(factors: &[(Subsystem, usize)]) -> Result<Self> {
        if factors.is_empty() {
            return Err(UomError::InvalidDimension("space needs at least one factor".into()));
        }
        let mut last_rank = None;
        for &(label, dim) in factors {
            if dim < 2 {
                return Err(UomError::InvalidDimension(format!(
                    "{label} truncation must be at least 2, got {dim}"
                )));
            }
            if label == Subsystem::Qubit && dim != 2 {
                return Err(UomError::InvalidDimension(format!("qubit dimension must be 2, got {dim}")));
            }
            if let Some(rank) = label.rank() {
                if last_rank.is_some_and(|r| r >= rank) {
                    return Err(UomError::InvalidDimension(
                        "subsystems must appear once each, ordered (qubit, cavity, mech)".into(),
                    ));
                }
                last_rank = Some(rank);
            }
        }
        Ok(Self {
            dims: factors.iter().map(|f| f.1).collect(),
            labels: factors.iter().map(|f| f.0).collect(),
        })
    }

    /// Single unlabelled factor of dimension `dim`.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(&[(Subsystem::Other, dim)])
    }

    pub fn tripartite(cavity: usize, mech: usize) -> Result<Self> {
        Self::new(&[(Subsystem::Qubit, 2), (Subsystem::Cavity, cavity), (Subsystem::Mech, mech)])
    }

    pub fn qubit_mech(mech: usize) -> Result<Self> {
        Self::new(&[(Subsystem::Qubit, 2), (Subsystem::Mech, mech)])
    }

    pub fn cavity_mech(cavity: usize, mech: usize) -> Result<Self> {
        Self::new(&[(Subsystem::Cavity, cavity), (Subsystem::Mech, mech)])
    }

    pub fn mech(mech: usize) -> Result<Self> {
        Self::new(&[(Subsystem::Mech, mech)])
    }

    pub fn qubit() -> Self {
        Self {
            dims: vec![2],
            labels: vec![Subsystem::Qubit],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[Subsystem] {
        &self.labels
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: Subsystem) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn require(&self, label: Subsystem) -> Result<usize> {
        self.position(label)
            .ok_or_else(|| UomError::InvalidDimension(format!("space has no {label} factor")))
    }

    pub fn has_layout(&self, layout: &[Subsystem]) -> bool {
        self.labels == layout
    }

    /// Flat index of a product basis state; `levels[i]` indexes factor `i`.
    pub fn basis_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(UomError::InvalidDimension(format!(
                "expected {} levels, got {}",
                self.dims.len(),
                levels.len()
            )));
        }
        let mut idx = 0;
        for (&l, &d) in levels.iter().zip(&self.dims) {
            if l >= d {
                return Err(UomError::InvalidDimension(format!("level {l} exceeds truncation {d}")));
            }
            idx = idx * d + l;
        }
        Ok(idx)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn levels_of(&self, mut idx: usize) -> Vec<usize> {
        let mut levels = vec![0; self.dims.len()];
        for (slot, &d) in levels.iter_mut().zip(&self.dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        levels
    }

    pub fn basis_ket(&self, levels: &[usize]) -> Result<QuantumState> {
        let mut v = DVector::zeros(self.total_dim());
        v[self.basis_index(levels)?] = Complex64::new(1.0, 0.0);
        Ok(QuantumState {
            space: self.clone(),
            data: StateData::Ket(v),
        })
    }

    /// Projector onto the product basis state `levels`.
    pub fn basis_projector(&self, levels: &[usize]) -> Result<Operator> {
        let i = self.basis_index(levels)?;
        let n = self.total_dim();
        Ok(Operator {
            space: self.clone(),
            matrix: CsrMatrix::from_triplets(n, n, [(i, i, Complex64::new(1.0, 0.0))]),
        })
    }
}

impl fmt::Display for CompositeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().zip(&self.dims).map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "({})", parts.join(" x "))
    }
}

/// Sparse complex operator tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: CompositeSpace,
    matrix: CsrMatrix,
}

impl Operator {
    pub fn new(space: CompositeSpace, matrix: CsrMatrix) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(UomError::InvalidDimension(format!(
                "matrix is {}x{}, space {space} has dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &CompositeSpace) -> Self {
        Self {
            matrix: CsrMatrix::identity(space.total_dim()),
            space: space.clone(),
        }
    }

    pub fn zero(space: &CompositeSpace) -> Self {
        let n = space.total_dim();
        Self {
            matrix: CsrMatrix::zeros(n, n),
            space: space.clone(),
        }
    }

    pub fn from_dense(space: &CompositeSpace, m: &DMatrix<Complex64>) -> Result<Self> {
        Self::new(space.clone(), CsrMatrix::from_dense(m))
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.scale(s.into()),
        }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(&(self * other) - &(other * self))
    }

    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(UomError::InvalidDimension(format!(
                "operators act on different spaces {} and {}",
                self.space, other.space
            )));
        }
        Ok(())
    }

    pub fn apply(&self, ket: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_vec(self.matrix.matvec(ket.as_slice()))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.add_scaled(&rhs.matrix, Complex64::new(1.0, 0.0)),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.add_scaled(&rhs.matrix, Complex64::new(-1.0, 0.0)),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator space mismatch");
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.matmul(&rhs.matrix),
        }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<Complex64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: Complex64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

/// Single-mode annihilation operator truncated to `dim` Fock levels.
pub fn ladder(dim: usize) -> Result<Operator> {
    let space = CompositeSpace::single(dim)?;
    let trip = (1..dim).map(|n| (n - 1, n, Complex64::new((n as f64).sqrt(), 0.0)));
    Ok(Operator {
        matrix: CsrMatrix::from_triplets(dim, dim, trip),
        space,
    })
}

/// Number operator `a^dagger a` for a `dim`-level mode.
pub fn number(dim: usize) -> Result<Operator> {
    let a = ladder(dim)?;
    Ok(&a.adjoint() * &a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
    /// `sigma_+ = |e><g|`
    Plus,
    /// `sigma_- = |g><e|`
    Minus,
}

pub fn pauli(kind: Pauli) -> Operator {
    let one = Complex64::new(1.0, 0.0);
    let trip: Vec<(usize, usize, Complex64)> = match kind {
        Pauli::Z => vec![(EXCITED, EXCITED, one), (GROUND, GROUND, -one)],
        Pauli::X => vec![(EXCITED, GROUND, one), (GROUND, EXCITED, one)],
        Pauli::Plus => vec![(EXCITED, GROUND, one)],
        Pauli::Minus => vec![(GROUND, EXCITED, one)],
    };
    Operator {
        space: CompositeSpace::qubit(),
        matrix: CsrMatrix::from_triplets(2, 2, trip),
    }
}

/// Places a single-factor operator at `index`, padding with identities.
pub fn embed(op: &Operator, index: usize, space: &CompositeSpace) -> Result<Operator> {
    let dims = space.dims();
    if index >= dims.len() {
        return Err(UomError::InvalidDimension(format!(
            "subsystem index {index} out of range for {space}"
        )));
    }
    if op.dim() != dims[index] {
        return Err(UomError::InvalidDimension(format!(
            "operator dimension {} does not match factor {index} of {space}",
            op.dim()
        )));
    }
    let left: usize = dims[..index].iter().product();
    let right: usize = dims[index + 1..].iter().product();
    let matrix = CsrMatrix::identity(left)
        .kron(op.matrix())
        .kron(&CsrMatrix::identity(right));
    Operator::new(space.clone(), matrix)
}

/// Annihilation operator of the labelled mode, embedded in `space`.
pub fn mode_op(space: &CompositeSpace, label: Subsystem) -> Result<Operator> {
    let i = space.require(label)?;
    if label == Subsystem::Qubit {
        return Err(UomError::InvalidArgument("qubit has no ladder operator".into()));
    }
    embed(&ladder(space.dims()[i])?, i, space)
}

pub fn qubit_op(space: &CompositeSpace, kind: Pauli) -> Result<Operator> {
    embed(&pauli(kind), space.require(Subsystem::Qubit)?, space)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Ket(DVector<Complex64>),
    Density(DMatrix<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    space: CompositeSpace,
    data: StateData,
}

const STATE_TOL: f64 = 1e-10;

impl QuantumState {
    pub fn ket(space: &CompositeSpace, v: DVector<Complex64>) -> Result<Self> {
        check_len(space, v.len())?;
        let norm = v.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(UomError::InvalidArgument(format!("ket norm is {norm}, expected 1")));
        }
        Ok(Self {
            space: space.clone(),
            data: StateData::Ket(v),
        })
    }

    pub fn normalized_ket(space: &CompositeSpace, v: DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(UomError::InvalidArgument("zero vector cannot be normalized".into()));
        }
        Self::ket(space, v / Complex64::new(norm, 0.0))
    }

    /// Validated density matrix: unit trace, Hermitian, eigenvalues >= -1e-8.
    pub fn density(space: &CompositeSpace, m: DMatrix<Complex64>) -> Result<Self> {
        check_len(space, m.nrows())?;
        if !m.is_square() {
            return Err(UomError::InvalidDimension("density matrix must be square".into()));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(UomError::InvalidArgument(format!("density trace is {tr}, expected 1")));
        }
        let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > STATE_TOL {
            return Err(UomError::InvalidArgument(format!("density not Hermitian (defect {herm:.2e})")));
        }
        let state = Self {
            space: space.clone(),
            data: StateData::Density(m),
        };
        let lo = state.min_eigenvalue();
        if lo < -1e-8 {
            return Err(UomError::InvalidArgument(format!("density has eigenvalue {lo:.3e}")));
        }
        Ok(state)
    }

    /// Wraps a density matrix without the positivity check (trusted solver output).
    pub(crate) fn density_unchecked(space: &CompositeSpace, m: DMatrix<Complex64>) -> Self {
        Self {
            space: space.clone(),
            data: StateData::Density(m),
        }
    }

    /// Truncated coherent state of one mode (Poisson amplitudes, renormalized).
    pub fn coherent(space: &CompositeSpace, alpha: Complex64) -> Result<Self> {
        if space.dims().len() != 1 || space.labels()[0] == Subsystem::Qubit {
            return Err(UomError::InvalidDimension("coherent state needs a single-mode space".into()));
        }
        let n = space.total_dim();
        let mut v = DVector::zeros(n);
        let mut amp = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..n {
            v[k] = amp;
            amp *= alpha / ((k + 1) as f64).sqrt();
        }
        Self::normalized_ket(space, v)
    }

    /// Thermal state `exp(-beta w n) / Z` with mean occupation `n_th`.
    pub fn thermal(space: &CompositeSpace, n_th: f64) -> Result<Self> {
        if space.dims().len() != 1 || n_th < 0.0 {
            return Err(UomError::InvalidArgument("thermal state needs a single mode and n_th >= 0".into()));
        }
        let n = space.total_dim();
        let ratio = n_th / (1.0 + n_th);
        let pops: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
        let z: f64 = pops.iter().sum();
        let m = DMatrix::from_diagonal(&DVector::from_iterator(n, pops.iter().map(|p| Complex64::new(p / z, 0.0))));
        Ok(Self::density_unchecked(space, m))
    }

    /// Tensor product of states on consecutive factors.
    pub fn product(space: &CompositeSpace, parts: &[QuantumState]) -> Result<Self> {
        let dims: Vec<usize> = parts.iter().map(|p| p.dim()).collect();
        if dims != space.dims() {
            return Err(UomError::InvalidDimension(format!(
                "factor dimensions {dims:?} do not match {space}"
            )));
        }
        if parts.iter().all(|p| matches!(p.data, StateData::Ket(_))) {
            let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
            for p in parts {
                if let StateData::Ket(k) = &p.data {
                    v = v.kronecker(k);
                }
            }
            return Self::normalized_ket(space, v);
        }
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for p in parts {
            m = m.kronecker(&p.density_matrix());
        }
        Ok(Self::density_unchecked(space, m))
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn is_ket(&self) -> bool {
        matches!(self.data, StateData::Ket(_))
    }

    pub fn as_ket(&self) -> Option<&DVector<Complex64>> {
        match &self.data {
            StateData::Ket(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match &self.data {
            StateData::Ket(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self::density_unchecked(&self.space, self.density_matrix())
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Ket(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Ket(v) => v.norm_squared().powi(2),
            StateData::Density(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.data {
            StateData::Ket(_) => 0.0,
            StateData::Density(m) => {
                let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
                h.symmetric_eigenvalues().min()
            }
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match &self.data {
            StateData::Ket(_) => 0.0,
            StateData::Density(m) => (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    /// Population of a product basis state.
    pub fn population(&self, levels: &[usize]) -> Result<f64> {
        let i = self.space.basis_index(levels)?;
        Ok(match &self.data {
            StateData::Ket(v) => v[i].norm_sqr(),
            StateData::Density(m) => m[(i, i)].re,
        })
    }

    /// Diagonal of the state in the product basis.
    pub fn diagonal(&self) -> Vec<f64> {
        match &self.data {
            StateData::Ket(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            StateData::Density(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    /// Reduced density matrix of factor `index`.
    pub fn subsystem_density(&self, index: usize) -> Result<DMatrix<Complex64>> {
        let dims = self.space.dims();
        if index >= dims.len() {
            return Err(UomError::InvalidDimension(format!("no factor {index} in {}", self.space)));
        }
        let d = dims[index];
        let left: usize = dims[..index].iter().product();
        let right: usize = dims[index + 1..].iter().product();
        let rho = self.density_matrix();
        let mut out = DMatrix::zeros(d, d);
        for l in 0..left {
            for r in 0..right {
                for i in 0..d {
                    for j in 0..d {
                        out[(i, j)] += rho[((l * d + i) * right + r, (l * d + j) * right + r)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Population of the highest Fock level of every bosonic factor.
    pub fn top_level_populations(&self) -> Vec<(Subsystem, f64)> {
        tail_populations(&self.space, &self.diagonal(), 1)
    }

    /// Population of the `depth` highest Fock levels of every bosonic factor.
    /// Squeezed states fill only every other level, so `depth = 2` is the
    /// safer truncation probe for them.
    pub fn tail_populations(&self, depth: usize) -> Vec<(Subsystem, f64)> {
        tail_populations(&self.space, &self.diagonal(), depth)
    }
}

pub(crate) fn top_level_populations(space: &CompositeSpace, diag: &[f64]) -> Vec<(Subsystem, f64)> {
    tail_populations(space, diag, 1)
}

fn tail_populations(space: &CompositeSpace, diag: &[f64], depth: usize) -> Vec<(Subsystem, f64)> {
    let dims = space.dims();
    let mut out: Vec<(Subsystem, f64)> = space
        .labels()
        .iter()
        .filter(|l| **l != Subsystem::Qubit)
        .map(|&l| (l, 0.0))
        .collect();
    for (idx, p) in diag.iter().enumerate() {
        let levels = space.levels_of(idx);
        let mut slot = 0;
        for (f, (&lvl, &d)) in levels.iter().zip(dims).enumerate() {
            if space.labels()[f] == Subsystem::Qubit {
                continue;
            }
            if lvl + depth >= d {
                out[slot].1 += p;
            }
            slot += 1;
        }
    }
    out
}

fn check_len(space: &CompositeSpace, n: usize) -> Result<()> {
    if n != space.total_dim() {
        return Err(UomError::InvalidDimension(format!(
            "state length {n} does not match {space} (dimension {})",
            space.total_dim()
        )));
    }
    Ok(())
}

/// `<psi|A|psi>` or `Tr(A rho)`.
pub fn expect(op: &Operator, state: &QuantumState) -> Result<Complex64> {
    if op.space().dims() != state.space().dims() {
        return Err(UomError::InvalidDimension(format!(
            "operator on {} applied to state on {}",
            op.space(),
            state.space()
        )));
    }
    Ok(match state.data() {
        StateData::Ket(v) => {
            let av = op.matrix().matvec(v.as_slice());
            v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum()
        }
        StateData::Density(m) => expect_dense(op.matrix(), m.as_slice()),
    })
}

/// `Tr(A X)` for a column-major square block `X`.
pub(crate) fn expect_dense(a: &CsrMatrix, x: &[Complex64]) -> Complex64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for (r, c, v) in a.triplets() {
        s += v * x[c + r * n];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ladder_two_and_three() {
        let a2 = ladder(2).unwrap().to_dense();
        assert_eq!(a2, DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));
        let a3 = ladder(3).unwrap().to_dense();
        let s2 = 2f64.sqrt();
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[c(0.0), c(1.0), c(0.0), c(0.0), c(0.0), c(s2), c(0.0), c(0.0), c(0.0)],
        );
        assert!((a3 - want).norm() < 1e-15);
    }

    #[test]
    fn number_operator_by_direct_multiplication() {
        // independent dense product of the superdiagonal matrix with its transpose
        let n = 5;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = (k as f64).sqrt();
        }
        let want = a.transpose() * &a;
        let got = number(n).unwrap().to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!((got[(i, j)].re - want[(i, j)]).abs() < 1e-14);
            }
            assert!((got[(i, i)].re - i as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn ladder_rejects_small_dim() {
        assert!(matches!(ladder(1), Err(UomError::InvalidDimension(_))));
    }

    #[test]
    fn pauli_conventions() {
        let z = pauli(Pauli::Z).to_dense();
        assert_eq!(z[(EXCITED, EXCITED)], c(1.0));
        assert_eq!(z[(GROUND, GROUND)], c(-1.0));
        let x = pauli(Pauli::X);
        assert!(((&x * &x).to_dense() - DMatrix::identity(2, 2)).norm() < 1e-15);
        let q = CompositeSpace::qubit();
        let g = q.basis_ket(&[GROUND]).unwrap();
        let raised = pauli(Pauli::Plus).apply(g.as_ket().unwrap());
        assert_eq!(raised[EXCITED], c(1.0));
        assert_eq!(raised[GROUND], c(0.0));
    }

    #[test]
    fn embed_sigma_z_matches_kron() {
        let s = CompositeSpace::tripartite(2, 2).unwrap();
        let e = embed(&pauli(Pauli::Z), 0, &s).unwrap().to_dense();
        let z = pauli(Pauli::Z).to_dense();
        let want = z.kronecker(&DMatrix::identity(2, 2)).kronecker(&DMatrix::identity(2, 2));
        assert!((e - want).norm() < 1e-15);
    }

    #[test]
    fn embedded_modes_commute() {
        let s = CompositeSpace::tripartite(3, 4).unwrap();
        let a = mode_op(&s, Subsystem::Cavity).unwrap();
        let b = mode_op(&s, Subsystem::Mech).unwrap();
        assert!(a.commutator(&b).unwrap().max_abs() < 1e-15);
        assert!(a.commutator(&b.adjoint()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn embedded_ladder_lowers_photon() {
        let s = CompositeSpace::tripartite(3, 4).unwrap();
        let a = embed(&ladder(3).unwrap(), 1, &s).unwrap();
        // Kronecker oracle: e_g (x) e_1 (x) e_0 -> e_g (x) e_0 (x) e_0
        let unit = |n: usize, k: usize| {
            let mut v = DVector::<Complex64>::zeros(n);
            v[k] = c(1.0);
            v
        };
        let start = unit(2, GROUND).kronecker(&unit(3, 1)).kronecker(&unit(4, 0));
        let want = unit(2, GROUND).kronecker(&unit(3, 0)).kronecker(&unit(4, 0));
        assert!((a.apply(&start) - want).norm() < 1e-15);
    }

    #[test]
    fn embed_dimension_mismatch() {
        let s = CompositeSpace::tripartite(3, 4).unwrap();
        assert!(embed(&ladder(5).unwrap(), 1, &s).is_err());
    }

    #[test]
    fn space_validation() {
        assert!(CompositeSpace::new(&[(Subsystem::Qubit, 3)]).is_err());
        assert!(CompositeSpace::new(&[(Subsystem::Mech, 3), (Subsystem::Cavity, 3)]).is_err());
        assert!(CompositeSpace::new(&[(Subsystem::Cavity, 1)]).is_err());
        let s = CompositeSpace::tripartite(3, 4).unwrap();
        assert_eq!(s.total_dim(), 24);
        let idx = s.basis_index(&[GROUND, 2, 3]).unwrap();
        assert_eq!(s.levels_of(idx), vec![GROUND, 2, 3]);
    }

    #[test]
    fn expectation_values() {
        let s = CompositeSpace::mech(6).unwrap();
        let n = number(6).unwrap();
        let n = Operator::new(s.clone(), n.matrix().clone()).unwrap();
        let vac = s.basis_ket(&[0]).unwrap();
        assert_eq!(expect(&n, &vac).unwrap(), c(0.0));

        let q = CompositeSpace::tripartite(2, 3).unwrap();
        let sz = qubit_op(&q, Pauli::Z).unwrap();
        let st = q.basis_ket(&[GROUND, 1, 2]).unwrap();
        assert_eq!(expect(&sz, &st).unwrap(), c(-1.0));
        assert_eq!(expect(&sz, &st.to_density()).unwrap(), c(-1.0));
    }

    #[test]
    fn coherent_quadrature_mean() {
        // Displaced vacuum built from its Fock expansion; <a + a^dagger> = 2 Re(alpha).
        let s = CompositeSpace::single(24).unwrap();
        let psi = QuantumState::coherent(&s, c(1.0)).unwrap();
        let a = ladder(24).unwrap();
        let x = &a + &a.adjoint();
        let v = expect(&x, &psi).unwrap();
        assert!((v.re - 2.0).abs() < 1e-10 && v.im.abs() < 1e-12);
    }

    #[test]
    fn subsystem_density_of_product() {
        let s = CompositeSpace::tripartite(2, 3).unwrap();
        let st = s.basis_ket(&[GROUND, 1, 2]).unwrap();
        let m = st.subsystem_density(2).unwrap();
        assert!((m[(2, 2)].re - 1.0).abs() < 1e-15);
        let top = st.top_level_populations();
        assert_eq!(top, vec![(Subsystem::Cavity, 1.0), (Subsystem::Mech, 1.0)]);
    }
}
