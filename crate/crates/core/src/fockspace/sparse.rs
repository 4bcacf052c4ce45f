use nalgebra::DMatrix;

use super::{C64, ZERO};

/// Compressed sparse row matrix of complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_counts = vec![0usize; nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        // drop entries that summed to exactly zero
        let mut keep_indices = Vec::with_capacity(indices.len());
        let mut keep_values = Vec::with_capacity(values.len());
        let mut pos = 0;
        for r in 0..nrows {
            let mut kept = 0;
            for _ in 0..row_counts[r] {
                if values[pos] != ZERO {
                    keep_indices.push(indices[pos]);
                    keep_values.push(values[pos]);
                    kept += 1;
                }
                pos += 1;
            }
            indptr[r + 1] = indptr[r] + kept;
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices: keep_indices,
            values: keep_values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    /// `out = self * x`
    pub fn matvec_into(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *slot = acc;
        }
    }

    /// `out += alpha * self * x`
    pub fn matvec_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *slot += alpha * acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.nrows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: C64, other: &SparseMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trip: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(r, col, v)| (r, col, c * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut trip = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != ZERO {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_cancel() {
        let one = C64::new(1.0, 0.0);
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, one), (0, 0, one), (1, 0, one), (1, 0, -one), (1, 1, one)],
        );
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], C64::new(2.0, 0.0));
        assert_eq!(d[(1, 0)], ZERO);
        assert_eq!(m.matvec(&[one, one]), vec![C64::new(2.0, 0.0), one]);
    }

    #[test]
    fn dense_round_trip() {
        let m = DMatrix::from_fn(4, 3, |r, c| if (r + c) % 2 == 0 { C64::new(r as f64, c as f64) } else { ZERO });
        let s = SparseMatrix::from_dense(&m);
        assert_eq!(s.to_dense(), m);
        let sum = s.add_scaled(C64::new(-1.0, 0.0), &s);
        assert_eq!(sum.nnz(), 0);
    }
}
