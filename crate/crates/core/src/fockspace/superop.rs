use std::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector};

use super::{HilbertSpace, Operator, SparseMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Linear map on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    space: HilbertSpace,
    matrix: SparseMatrix,
}

impl SuperOperator {
    pub fn new(space: HilbertSpace, matrix: SparseMatrix) -> Result<Self> {
        let n = space.total_dim().pow(2);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "superoperator must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim().pow(2);
        Self {
            space: space.clone(),
            matrix: SparseMatrix::zeros(n, n),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.scale(c),
        }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_vec(self.matrix.matvec(v.as_slice()))
    }

    /// Apply to an operator and devectorize the result.
    pub fn apply_operator(&self, op: &Operator) -> Result<Operator> {
        if op.space() != &self.space {
            return Err(Error::InvalidDimension(
                "superoperator and operator spaces differ".into(),
            ));
        }
        devectorize(&self.apply(&vectorize(op)), &self.space)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }
}

impl<'a> Add<&'a SuperOperator> for &'a SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.space, rhs.space, "superoperator spaces differ");
        SuperOperator {
            space: self.space.clone(),
            matrix: self.matrix.add_scaled(C64::new(1.0, 0.0), &rhs.matrix),
        }
    }
}

impl<'a> Sub<&'a SuperOperator> for &'a SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.space, rhs.space, "superoperator spaces differ");
        SuperOperator {
            space: self.space.clone(),
            matrix: self.matrix.add_scaled(C64::new(-1.0, 0.0), &rhs.matrix),
        }
    }
}

/// Column-stacking vectorization.
pub fn vectorize(op: &Operator) -> DVector<C64> {
    // nalgebra stores matrices column-major, so the raw slice is vec(op)
    DVector::from_column_slice(op.matrix().as_slice())
}

pub fn devectorize(v: &DVector<C64>, space: &HilbertSpace) -> Result<Operator> {
    let d = space.total_dim();
    if v.len() != d * d {
        return Err(Error::InvalidDimension(format!(
            "vector of length {} cannot be a {d}x{d} matrix",
            v.len()
        )));
    }
    Operator::new(space.clone(), DMatrix::from_column_slice(d, d, v.as_slice()))
}

fn nonzeros(op: &Operator) -> Vec<(usize, usize, C64)> {
    let m = op.matrix();
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != ZERO {
                out.push((r, c, v));
            }
        }
    }
    out
}

/// Left multiplication: `spre(A) vec(rho) = vec(A rho)`.
pub fn spre(op: &Operator) -> SuperOperator {
    let d = op.dim();
    let nz = nonzeros(op);
    let mut trip = Vec::with_capacity(nz.len() * d);
    for k in 0..d {
        for &(r, c, v) in &nz {
            trip.push((r + d * k, c + d * k, v));
        }
    }
    SuperOperator {
        space: op.space().clone(),
        matrix: SparseMatrix::from_triplets(d * d, d * d, trip),
    }
}

/// Right multiplication: `spost(B) vec(rho) = vec(rho B)`.
pub fn spost(op: &Operator) -> SuperOperator {
    let d = op.dim();
    let nz = nonzeros(op);
    let mut trip = Vec::with_capacity(nz.len() * d);
    // (rho B)[k, c] = sum_l rho[k, l] B[l, c]
    for k in 0..d {
        for &(l, c, v) in &nz {
            trip.push((k + d * c, k + d * l, v));
        }
    }
    SuperOperator {
        space: op.space().clone(),
        matrix: SparseMatrix::from_triplets(d * d, d * d, trip),
    }
}

/// Two-sided multiplication: `sprepost(A, B) vec(rho) = vec(A rho B)`.
pub fn sprepost(a: &Operator, b: &Operator) -> SuperOperator {
    assert_eq!(a.space(), b.space(), "sprepost operands on different spaces");
    let d = a.dim();
    let na = nonzeros(a);
    let nb = nonzeros(b);
    let mut trip = Vec::with_capacity(na.len() * nb.len());
    for &(r, j, va) in &na {
        for &(l, c, vb) in &nb {
            trip.push((r + d * c, j + d * l, va * vb));
        }
    }
    SuperOperator {
        space: a.space().clone(),
        matrix: SparseMatrix::from_triplets(d * d, d * d, trip),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_operator(rng: &mut ChaCha8Rng, space: &HilbertSpace) -> Operator {
        let d = space.total_dim();
        let m = DMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        Operator::new(space.clone(), m).unwrap()
    }

    #[test]
    fn identity_vectorizes_column_stacked() {
        let id = Operator::identity(&HilbertSpace::new(vec![2]).unwrap());
        let v = vectorize(&id);
        let one = C64::new(1.0, 0.0);
        assert_eq!(v.as_slice(), &[one, ZERO, ZERO, one]);
    }

    #[test]
    fn column_stacking_order() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)],
        );
        let v = vectorize(&Operator::from_matrix(m).unwrap());
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn random_hermitian_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let space = HilbertSpace::new(vec![2, 3]).unwrap();
        let a = random_operator(&mut rng, &space);
        let h = &a + &a.dagger();
        let back = devectorize(&vectorize(&h), &space).unwrap();
        assert!((back.matrix() - h.matrix()).norm() <= 1e-14);
        assert!(devectorize(&vectorize(&h), &HilbertSpace::new(vec![5]).unwrap()).is_err());
    }

    #[test]
    fn composition_law_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let space = HilbertSpace::new(vec![2, 2]).unwrap();
        for _ in 0..100 {
            let a = random_operator(&mut rng, &space);
            let b = random_operator(&mut rng, &space);
            let rho = random_operator(&mut rng, &space);
            let v = vectorize(&rho);

            let pre = devectorize(&spre(&a).apply(&v), &space).unwrap();
            assert!((pre.matrix() - a.matrix() * rho.matrix()).norm() < 1e-12);

            let post = devectorize(&spost(&b).apply(&v), &space).unwrap();
            assert!((post.matrix() - rho.matrix() * b.matrix()).norm() < 1e-12);

            let both = spre(&a).apply(&spost(&b).apply(&v));
            let expected = a.matrix() * rho.matrix() * b.matrix();
            let got = devectorize(&both, &space).unwrap();
            assert!((got.matrix() - &expected).norm() < 1e-11);

            let fused = devectorize(&sprepost(&a, &b).apply(&v), &space).unwrap();
            assert!((fused.matrix() - &expected).norm() < 1e-11);
        }
    }

    #[test]
    fn commutator_superoperator_preserves_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = HilbertSpace::new(vec![3]).unwrap();
        let a = random_operator(&mut rng, &space);
        let h = &a + &a.dagger();
        let b = random_operator(&mut rng, &space);
        let rho = &b * &b.dagger();
        let i = C64::new(0.0, 1.0);
        let l = (&spre(&h) - &spost(&h)).scale(-i);
        let out = l.apply_operator(&rho).unwrap();
        assert!(out.is_hermitian(1e-10));
    }
}
