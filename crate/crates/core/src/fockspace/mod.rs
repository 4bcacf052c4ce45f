//! Operator algebra on truncated tensor-product Fock spaces.
//!
//! Subsystems are ordered `(qubit, mode1, mode2)` throughout the crate and
//! multi-indices are flattened row-major, so the first subsystem is the most
//! significant digit (the same ordering a Kronecker product produces). The
//! qubit basis is `{|e>, |g>}` with `sigma_z |e> = +|e>`.
//!
//! Density matrices are vectorized by column stacking: `vec(A rho B) =
//! (B^T (x) A) vec(rho)`. Every superoperator in the crate relies on this.

mod sparse;
mod superop;

pub use sparse::SparseMatrix;
pub use superop::{devectorize, spost, spre, sprepost, vectorize, SuperOperator};

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Hermiticity tolerance for a valid density matrix (max elementwise).
pub const TOL_HERMITIAN: f64 = 1e-10;
/// Trace tolerance for a valid density matrix.
pub const TOL_TRACE: f64 = 1e-8;
/// Smallest admissible eigenvalue of a valid density matrix.
pub const TOL_POSITIVITY: f64 = -1e-8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Ordered subsystem dimensions of a truncated tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension("empty subsystem list".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(format!(
                "subsystem dimension {d} < 2 in {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    /// `(qubit, mode1, mode2)` with `levels` Fock states per mode.
    pub fn qubit_two_modes(levels: usize) -> Result<Self> {
        Self::new(vec![2, levels, levels])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Row-major stride of subsystem `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.dims[k + 1..].iter().product()
    }

    /// Flatten a multi-index.
    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Split a flat index into its multi-index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Sub-space made of the listed subsystems, in the given order.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        Self::new(keep.iter().map(|&k| self.dims[k]).collect())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "subsystem index {k} out of range for {} subsystems",
                self.dims.len()
            )));
        }
        Ok(())
    }
}

/// Dense complex operator tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidDimension(format!(
                "{}x{} matrix on a space of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Single-subsystem operator from a square matrix.
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        let space = HilbertSpace::new(vec![matrix.nrows()])?;
        Self::new(space, matrix)
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::zeros(d, d),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..d {
            for i in 0..=j {
                let diff = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        if psi.space != self.space {
            return Err(Error::InvalidDimension(
                "operator and state live on different spaces".into(),
            ));
        }
        Ok(&self.matrix * &psi.amplitudes)
    }

    /// Kronecker product; the result's subsystems are `self`'s followed by
    /// `other`'s.
    pub fn kron(&self, other: &Operator) -> Operator {
        let mut dims = self.space.dims.clone();
        dims.extend_from_slice(&other.space.dims);
        Operator {
            space: HilbertSpace { dims },
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }
}

fn assert_same_space(a: &Operator, b: &Operator) {
    assert_eq!(
        a.space, b.space,
        "operator arithmetic on mismatched spaces"
    );
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_same_space(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_same_space(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_same_space(self, rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(space: HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::InvalidDimension(format!(
                "{} amplitudes on a space of dimension {}",
                amplitudes.len(),
                space.total_dim()
            )));
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "state vector squared norm {norm2} is not 1"
            )));
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalize arbitrary amplitudes.
    pub fn normalized(space: HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        Self::new(space, amplitudes.unscale(n))
    }

    /// Product basis state `|digits>`.
    pub fn basis(space: &HilbertSpace, digits: &[usize]) -> Result<Self> {
        if digits.len() != space.num_subsystems()
            || digits.iter().zip(space.dims()).any(|(&i, &d)| i >= d)
        {
            return Err(Error::InvalidArgument(format!(
                "basis label {digits:?} does not fit {:?}",
                space.dims()
            )));
        }
        let mut amps = DVector::zeros(space.total_dim());
        amps[space.index(digits)] = ONE;
        Ok(Self {
            space: space.clone(),
            amplitudes: amps,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn projector(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Tensor product `self (x) other`.
    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut dims = self.space.dims.clone();
        dims.extend_from_slice(&other.space.dims);
        StateVector {
            space: HilbertSpace { dims },
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validate with the default tolerances.
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, TOL_HERMITIAN, TOL_POSITIVITY)
    }

    /// Validate with explicit Hermiticity and positivity tolerances (the
    /// trace tolerance is fixed at [`TOL_TRACE`]).
    pub fn with_tolerances(op: Operator, herm_tol: f64, min_eigenvalue: f64) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > herm_tol {
            return Err(Error::InvalidArgument(format!(
                "density matrix not Hermitian (defect {defect:e})"
            )));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > TOL_TRACE {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let lowest = op.hermitian_eigenvalues()[0];
        if lowest < min_eigenvalue {
            return Err(Error::InvalidArgument(format!(
                "density matrix has eigenvalue {lowest:e}"
            )));
        }
        Ok(Self { op })
    }

    /// Hermitize and normalize the trace, then validate.
    pub fn from_hermitian_part(op: Operator) -> Result<Self> {
        let herm = (op.matrix() + op.matrix().adjoint()) * C64::new(0.5, 0.0);
        let tr = herm.trace().re;
        if tr.abs() < f64::MIN_POSITIVE {
            return Err(Error::InvalidArgument("operator has zero trace".into()));
        }
        Self::new(Operator::new(op.space().clone(), herm.unscale(tr))?)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        Self {
            op: psi.projector(),
        }
    }

    pub fn maximally_mixed(space: &HilbertSpace) -> Self {
        let d = space.total_dim() as f64;
        Self {
            op: Operator::identity(space).scale_real(1.0 / d),
        }
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn space(&self) -> &HilbertSpace {
        self.op.space()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.op.matrix()
    }

    /// `<psi| rho |psi>`
    pub fn population(&self, psi: &StateVector) -> f64 {
        psi.amplitudes
            .dotc(&(self.op.matrix() * &psi.amplitudes))
            .re
    }

    /// `<psi| rho |psi>` for the product basis state `|digits>`.
    pub fn diagonal(&self, digits: &[usize]) -> f64 {
        let i = self.space().index(digits);
        self.op.matrix()[(i, i)].re
    }

    /// Fidelity with a pure state.
    pub fn fidelity_pure(&self, psi: &StateVector) -> f64 {
        self.population(psi)
    }

    /// `0.5 * ||self - other||_1`
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.op - &other.op;
        0.5 * diff.hermitian_eigenvalues().iter().map(|e| e.abs()).sum::<f64>()
    }
}

/// Bosonic lowering operator on `cutoff` Fock levels.
pub fn annihilation(cutoff: usize) -> Result<Operator> {
    if cutoff < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock cutoff {cutoff} < 2"
        )));
    }
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::from_matrix(m)
}

/// Number operator on `cutoff` Fock levels.
pub fn number(cutoff: usize) -> Result<Operator> {
    let a = annihilation(cutoff)?;
    Ok(&a.dagger() * &a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// `sigma_+ = |e><g|`
    Plus,
    /// `sigma_- = |g><e|`
    Minus,
}

/// Pauli operator in the `{|e>, |g>}` basis.
pub fn pauli(which: Pauli) -> Operator {
    let z = ZERO;
    let o = ONE;
    let entries = match which {
        Pauli::X => [z, o, o, z],
        Pauli::Y => [z, -I, I, z],
        Pauli::Z => [o, z, z, -o],
        Pauli::Plus => [z, o, z, z],
        Pauli::Minus => [z, z, o, z],
    };
    let m = DMatrix::from_row_slice(2, 2, &entries);
    Operator::from_matrix(m).expect("2x2 is a valid qubit operator")
}

/// Place a single-subsystem operator at `position` of `space`.
pub fn embed(op: &Operator, space: &HilbertSpace, position: usize) -> Result<Operator> {
    space.check_index(position)?;
    if op.space().num_subsystems() != 1 || op.dim() != space.dims()[position] {
        return Err(Error::InvalidDimension(format!(
            "operator of dimension {} cannot sit at slot {position} of {:?}",
            op.dim(),
            space.dims()
        )));
    }
    let before: usize = space.dims()[..position].iter().product();
    let after: usize = space.dims()[position + 1..].iter().product();
    let m = DMatrix::<C64>::identity(before, before)
        .kronecker(op.matrix())
        .kronecker(&DMatrix::<C64>::identity(after, after));
    Operator::new(space.clone(), m)
}

/// Reduced state on `keep` (sorted, deduplicated).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let reduced = partial_trace_operator(rho.as_operator(), keep)?;
    Ok(DensityMatrix { op: reduced })
}

/// Partial trace of an arbitrary operator.
pub fn partial_trace_operator(op: &Operator, keep: &[usize]) -> Result<Operator> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("partial trace must keep a subsystem".into()));
    }
    let space = op.space();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &k in &keep {
        space.check_index(k)?;
    }
    let traced: Vec<usize> = (0..space.num_subsystems())
        .filter(|k| !keep.contains(k))
        .collect();
    let kept_space = space.subspace(&keep)?;
    let dk = kept_space.total_dim();
    let dt: usize = traced.iter().map(|&k| space.dims()[k]).product();

    // full index of (kept multi-index, traced multi-index)
    let mut full = vec![0usize; dk * dt];
    let mut digits = vec![0usize; space.num_subsystems()];
    for ik in 0..dk {
        let mut r = ik;
        for &k in keep.iter().rev() {
            digits[k] = r % space.dims()[k];
            r /= space.dims()[k];
        }
        for it in 0..dt {
            let mut r = it;
            for &k in traced.iter().rev() {
                digits[k] = r % space.dims()[k];
                r /= space.dims()[k];
            }
            full[ik * dt + it] = space.index(&digits);
        }
    }

    let m = op.matrix();
    let out = DMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).fold(ZERO, |acc, t| acc + m[(full[i * dt + t], full[j * dt + t])])
    });
    Operator::new(kept_space, out)
}

/// Transpose the indices of one subsystem.
pub fn partial_transpose(op: &Operator, subsystem: usize) -> Result<Operator> {
    let space = op.space();
    space.check_index(subsystem)?;
    let d = op.dim();
    let stride = space.stride(subsystem);
    let ds = space.dims()[subsystem];
    let digit = |i: usize| (i / stride) % ds;
    let m = op.matrix();
    let out = DMatrix::from_fn(d, d, |r, c| {
        let (a, b) = (digit(r), digit(c));
        let rr = r - a * stride + b * stride;
        let cc = c - b * stride + a * stride;
        m[(rr, cc)]
    });
    Operator::new(space.clone(), out)
}

/// `Tr(rho op)`
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.space() != op.space() {
        return Err(Error::InvalidDimension(format!(
            "state on {:?}, operator on {:?}",
            rho.space().dims(),
            op.space().dims()
        )));
    }
    Ok(trace_product(rho.matrix(), op.matrix()))
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
