//! Null vector of a Liouvillian by shifted inverse iteration.

use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fockspace::{devectorize, DensityMatrix, SuperOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Shift relative to `max |L_ij|`.
    pub shift: f64,
    /// Residual target relative to `max |L_ij|`.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Trace distance between the two start vectors' limits above which the
    /// null space is declared degenerate.
    pub ambiguity: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            shift: 1e-12,
            tolerance: 1e-10,
            max_iter: 200,
            ambiguity: 1e-6,
        }
    }
}

/// Unique steady state of `L` with default options.
pub fn steady_state(l: &SuperOperator) -> Result<DensityMatrix> {
    steady_state_with(l, &SteadyStateOptions::default())
}

pub fn steady_state_with(l: &SuperOperator, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    faer::set_global_parallelism(faer::Par::Seq);
    let space = l.space();
    let d = space.total_dim();
    let n = d * d;
    let scale = l.max_abs();
    if scale == 0.0 {
        return Err(Error::AmbiguousSteadyState { distance: 1.0 });
    }
    let sigma = opts.shift * scale;

    let mut trip: Vec<Triplet<usize, usize, c64>> =
        l.matrix().triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    trip.extend((0..n).map(|i| Triplet::new(i, i, C64::new(-sigma, 0.0))));
    let shifted = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::NumericalFailure { message: format!("sparse assembly: {e:?}"), residual: f64::NAN })?;
    let lu = shifted
        .sp_lu()
        .map_err(|e| Error::NumericalFailure { message: format!("sparse LU: {e:?}"), residual: f64::NAN })?;

    let solve = |v: &DVector<C64>| -> DVector<C64> {
        use faer::linalg::solvers::Solve;
        let mut rhs = Mat::<c64>::from_fn(n, 1, |i, _| v[i]);
        lu.solve_in_place(rhs.as_mut());
        DVector::from_fn(n, |i, _| rhs[(i, 0)])
    };

    let iterate = |start: DVector<C64>| -> Result<DVector<C64>> {
        let mut x = start;
        let mut residual = f64::INFINITY;
        for _ in 0..opts.max_iter {
            x = solve(&x);
            let tr: C64 = (0..d).map(|i| x[i + d * i]).sum();
            if tr.norm() > f64::MIN_POSITIVE {
                x /= tr;
            } else {
                let nrm = x.norm();
                x /= C64::new(nrm, 0.0);
            }
            residual = l.apply(&x).iter().fold(0.0, |m, z| m.max(z.norm()));
            if residual < opts.tolerance * scale {
                // one more pass removes the remaining non-null component
                x = solve(&x);
                let tr: C64 = (0..d).map(|i| x[i + d * i]).sum();
                x /= tr;
                return Ok(x);
            }
        }
        Err(Error::NumericalFailure {
            message: format!("inverse iteration did not converge in {} iterations", opts.max_iter),
            residual,
        })
    };

    let mut mixed = DVector::<C64>::zeros(n);
    for i in 0..d {
        mixed[i + d * i] = C64::new(1.0 / d as f64, 0.0);
    }
    let first = to_density(&iterate(mixed)?, space)?;

    let mut corner = DVector::<C64>::zeros(n);
    corner[n - 1] = C64::new(1.0, 0.0);
    let second = to_density(&iterate(corner)?, space)?;
    let distance = first.trace_distance(&second);
    if distance > opts.ambiguity {
        return Err(Error::AmbiguousSteadyState { distance });
    }
    Ok(first)
}

fn to_density(x: &DVector<C64>, space: &crate::fockspace::HilbertSpace) -> Result<DensityMatrix> {
    DensityMatrix::from_hermitian_part(devectorize(x, space)?)
}
