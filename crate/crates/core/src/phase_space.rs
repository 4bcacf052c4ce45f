//! s-parametrized quasiprobabilities, nonclassical depth, photon-number
//! statistics and logarithmic negativity.
//!
//! `W^(s)(alpha) = sum_{k,l} <k|rho|l> <l|T^(s)(alpha)|k>`, where `s = -1`
//! is the Husimi function, `s = 0` the Wigner function and `s -> 1` the
//! P function. Raising `s` is the inverse of Gaussian smoothing, so the
//! nonclassical depth follows from the largest `s` at which `W^(s)` stays
//! nonnegative.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit_model::{supermode_state, SupermodeParams, SupermodeState};
use crate::error::{Error, Result};
use crate::fockspace::{partial_trace, partial_transpose, DensityMatrix, HilbertSpace, C64};

/// Grid values below this count as genuine negativity.
pub const NEGATIVITY_THRESHOLD: f64 = -1e-9;

/// Largest `s` probed by the depth search; `W^(1)` is singular.
pub const S_MAX: f64 = 1.0 - 1e-3;

fn check_s(s: f64) -> Result<()> {
    if !(-1.0..1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("ordering parameter s = {s} outside [-1, 1)")));
    }
    Ok(())
}

/// Generalized Laguerre `L_n^(m)(x)` for `n = 0..len`.
fn laguerre_row(m: usize, x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(1.0);
    if len == 1 {
        return out;
    }
    let a = m as f64;
    out.push(1.0 + a - x);
    for n in 1..len - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + a - x) * out[n] - (nf + a) * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
    out
}

/// `z^l L_l^(m)(x)` for `l = 0..len`. At `s = -1` the factor `z` vanishes
/// while `x` diverges; the product tends to `|alpha|^(2l) / l!`.
fn scaled_laguerre(m: usize, a2: f64, s: f64, len: usize) -> Vec<f64> {
    if s == -1.0 {
        let mut out = Vec::with_capacity(len);
        let mut term = 1.0;
        for l in 0..len {
            out.push(term);
            term *= a2 / (l + 1) as f64;
        }
        return out;
    }
    let x = 4.0 * a2 / (1.0 - s * s);
    let z = (s + 1.0) / (s - 1.0);
    let mut zl = 1.0;
    laguerre_row(m, x, len)
        .into_iter()
        .map(|v| {
            let out = v * zl;
            zl *= z;
            out
        })
        .collect()
}

fn log_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Matrix element `<l|T^(s)(alpha)|k>`.
pub fn t_matrix_element(l: usize, k: usize, alpha: C64, s: f64) -> Result<C64> {
    check_s(s)?;
    if k < l {
        return Ok(t_matrix_element(k, l, alpha, s)?.conj());
    }
    let m = k - l;
    let a2 = alpha.norm_sqr();
    let y = 2.0 / (1.0 - s);
    let c = (-2.0 * a2 / (1.0 - s)).exp() / PI;
    let zl_lag = scaled_laguerre(m, a2, s, l + 1)[l];
    let ratio = (0.5 * (log_factorial(l) - log_factorial(k))).exp();
    Ok(alpha.conj().powu(m as u32) * (c * ratio * y.powi(m as i32 + 1) * zl_lag))
}

/// Axis ranges and sampling of a quasiprobability grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Both axes span `[-half_width, half_width]`.
    pub half_width: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: 3.0, resolution: 201 }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        let n = self.resolution;
        (0..n)
            .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 || !(self.half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs resolution >= 2 and positive half width, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Same range, doubled density.
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width, resolution: 2 * self.resolution - 1 }
    }
}

/// `W^(s)` sampled on a square grid; `values[(i, j)]` sits at
/// `alpha = re[j] + i im[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpdGrid {
    pub s: f64,
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    #[serde(skip)]
    pub values: DMatrix<f64>,
    /// Largest imaginary residue discarded when taking the real part.
    pub max_imaginary: f64,
}

impl QpdGrid {
    /// Riemann sum of `W dA`.
    pub fn integral(&self) -> f64 {
        let dx = self.re_axis[1] - self.re_axis[0];
        let dy = self.im_axis[1] - self.im_axis[0];
        self.values.sum() * dx * dy
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }
}

fn single_mode(rho: &DensityMatrix) -> Result<usize> {
    if rho.space().num_subsystems() != 1 {
        return Err(Error::InvalidArgument(format!(
            "quasiprobabilities need a single-mode state, got dimensions {:?}",
            rho.space().dims()
        )));
    }
    Ok(rho.space().total_dim())
}

/// `W^(s)` at one point, with the imaginary residue.
fn qpd_point(rho: &DMatrix<C64>, alpha: C64, s: f64) -> C64 {
    let n = rho.nrows();
    let a2 = alpha.norm_sqr();
    let y = 2.0 / (1.0 - s);
    let c = (-2.0 * a2 / (1.0 - s)).exp() / PI;
    let ac = alpha.conj();
    let mut total = C64::new(0.0, 0.0);
    let mut ac_pow = C64::new(1.0, 0.0);
    for m in 0..n {
        let lag = scaled_laguerre(m, a2, s, n - m);
        let ym = y.powi(m as i32 + 1);
        for (l, zl_lag) in lag.into_iter().enumerate() {
            let k = l + m;
            let ratio = (0.5 * (log_factorial(l) - log_factorial(k))).exp();
            let t = ac_pow * (c * ratio * ym * zl_lag);
            // <k|rho|l><l|T|k> and, for m > 0, <l|rho|k><k|T|l> = <l|rho|k> conj(<l|T|k>)
            total += rho[(k, l)] * t;
            if m > 0 {
                total += rho[(l, k)] * t.conj();
            }
        }
        ac_pow *= ac;
    }
    total
}

/// Evaluate `W^(s)` of a single-mode state on a grid.
pub fn qpd(rho: &DensityMatrix, s: f64, grid: &GridSpec) -> Result<QpdGrid> {
    check_s(s)?;
    grid.validate()?;
    single_mode(rho)?;
    let axis = grid.axis();
    let n = grid.resolution;
    let m = rho.matrix();
    let points: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            qpd_point(m, C64::new(axis[j], axis[i]), s)
        })
        .collect();
    let max_imaginary = points.iter().fold(0.0_f64, |a, p| a.max(p.im.abs()));
    let values = DMatrix::from_fn(n, n, |i, j| points[i * n + j].re);
    Ok(QpdGrid { s, re_axis: axis.clone(), im_axis: axis, values, max_imaginary })
}

fn grid_min(rho: &DensityMatrix, s: f64, grid: &GridSpec) -> Result<f64> {
    let axis = grid.axis();
    let n = grid.resolution;
    let m = rho.matrix();
    Ok((0..n * n)
        .into_par_iter()
        .map(|idx| qpd_point(m, C64::new(axis[idx % n], axis[idx / n]), s).re)
        .reduce(|| f64::INFINITY, f64::min))
}

/// Floating-point noise bound of the Fock series at `alpha = 0`, where the
/// alternating terms `y^(m+1) z^l` are largest. Near `s = 1` they grow
/// without bound and cancel catastrophically.
fn series_noise(rho: &DMatrix<C64>, s: f64) -> f64 {
    let n = rho.nrows();
    let y = 2.0 / (1.0 - s);
    let z = ((s + 1.0) / (1.0 - s)).abs();
    let mut total = 0.0;
    for k in 0..n {
        for l in 0..=k {
            let m = k - l;
            let binom = (log_factorial(k) - log_factorial(l) - log_factorial(m)).exp();
            let ratio = (0.5 * (log_factorial(l) - log_factorial(k))).exp();
            let weight = if m == 0 { 1.0 } else { 2.0 };
            total += weight * rho[(k, l)].norm() * ratio * y.powi(m as i32 + 1) * z.powi(l as i32) * binom;
        }
    }
    f64::EPSILON * total / PI
}

/// Largest `s <= S_MAX` at which the series noise stays two decades below
/// the negativity threshold.
pub fn reliable_s_limit(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let budget = 0.01 * NEGATIVITY_THRESHOLD.abs();
    if series_noise(m, S_MAX) <= budget {
        return S_MAX;
    }
    let (mut lo, mut hi) = (-1.0, S_MAX);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if series_noise(m, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Closed-form depth of a state truncated to `{|0>, |1>}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitDepth {
    pub tau: f64,
    /// `1 - 2 tau`
    pub s0: f64,
    /// Weight outside `{|0>, |1>}` before renormalization.
    pub outside_population: f64,
    /// Denominator vanished (vacuum-like state); `tau` is reported as 0.
    pub degenerate: bool,
}

pub fn nonclassical_depth_qubit(rho: &DensityMatrix, max_outside: f64) -> Result<QubitDepth> {
    let dim = single_mode(rho)?;
    let m = rho.matrix();
    let p0 = m[(0, 0)].re;
    let p1 = if dim > 1 { m[(1, 1)].re } else { 0.0 };
    let kept = p0 + p1;
    let outside_population = 1.0 - kept;
    if outside_population > max_outside {
        return Err(Error::InvalidArgument(format!(
            "population {outside_population:e} outside the qubit block exceeds {max_outside:e}"
        )));
    }
    if kept <= 0.0 {
        return Err(Error::InvalidArgument("no population in the qubit block".into()));
    }
    let r11 = p1 / kept;
    let r01 = if dim > 1 { m[(0, 1)].norm() / kept } else { 0.0 };
    let denom = r11 - r01 * r01;
    if denom <= 1e-14 {
        return Ok(QubitDepth { tau: 0.0, s0: 1.0, outside_population, degenerate: true });
    }
    let tau = r11 * r11 / denom;
    Ok(QubitDepth { tau, s0: 1.0 - 2.0 * tau, outside_population, degenerate: false })
}

/// Depth from the onset of negativity in `W^(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericDepth {
    pub tau: f64,
    pub s0: f64,
    /// No negativity up to `s_limit`; `tau` is reported as 0.
    pub classical: bool,
    /// Upper end of the search, from [`reliable_s_limit`].
    pub s_limit: f64,
}

/// Bisection on `s` for the onset of grid negativity, confirmed on a
/// refined grid.
pub fn nonclassical_depth_numeric(rho: &DensityMatrix, grid: &GridSpec, s_tol: f64) -> Result<NumericDepth> {
    single_mode(rho)?;
    grid.validate()?;
    if !(s_tol > 0.0) {
        return Err(Error::InvalidArgument("s tolerance must be positive".into()));
    }
    let negative = |s: f64, g: &GridSpec| -> Result<bool> { Ok(grid_min(rho, s, g)? < NEGATIVITY_THRESHOLD) };
    let s_limit = reliable_s_limit(rho);
    if !negative(s_limit, grid)? {
        return Ok(NumericDepth { tau: 0.0, s0: 1.0, classical: true, s_limit });
    }
    let (mut lo, mut hi) = (-1.0, s_limit);
    while hi - lo > s_tol {
        let mid = 0.5 * (lo + hi);
        if negative(mid, grid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);

    let fine = grid.refined();
    let above = (s0 + 2.0 * s_tol).min(s_limit);
    if !negative(above, &fine)? {
        return Err(Error::Resolution { s: above });
    }
    let below = s0 - 2.0 * s_tol;
    if below > -1.0 && negative(below, &fine)? {
        return Err(Error::Resolution { s: below });
    }
    Ok(NumericDepth { tau: 0.5 * (1.0 - s0), s0, classical: false, s_limit })
}

/// Photon-number distributions of a `(qubit, mode1, mode2)` state in the
/// bare basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonStatistics {
    /// `joint[(n1, n2)]`
    #[serde(skip)]
    pub joint: DMatrix<f64>,
    pub mode1: Vec<f64>,
    pub mode2: Vec<f64>,
    /// Population of the symmetric single-excitation supermode state.
    pub psi1_plus: f64,
}

/// Diagonal photon statistics with the qubit traced out.
pub fn photon_probabilities(rho: &DensityMatrix, sp: &SupermodeParams) -> Result<PhotonStatistics> {
    let dims = rho.space().dims();
    if dims.len() != 3 || dims[0] != 2 || dims[1] != dims[2] {
        return Err(Error::InvalidDimension(format!("expected (2, N, N), got {dims:?}")));
    }
    let n = dims[1];
    let modes = partial_trace(rho, &[1, 2])?;
    let joint = DMatrix::from_fn(n, n, |a, b| modes.matrix()[(a * n + b, a * n + b)].re);
    let mode1 = (0..n).map(|a| joint.row(a).sum()).collect();
    let mode2 = (0..n).map(|b| joint.column(b).sum()).collect();
    let psi = supermode_state(sp, rho.space(), SupermodeState::Psi1Plus)?;
    Ok(PhotonStatistics { joint, mode1, mode2, psi1_plus: rho.population(&psi) })
}

/// Probability of at least two photons in total.
pub fn multiphoton_probability(stats: &PhotonStatistics) -> f64 {
    let n = stats.joint.nrows();
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a + b >= 2 {
                total += stats.joint[(a, b)];
            }
        }
    }
    total
}

/// Largest single `P(n1, n2)` with `n1 + n2 >= 2`.
pub fn max_multiphoton_probability(stats: &PhotonStatistics) -> f64 {
    let n = stats.joint.nrows();
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            if a + b >= 2 {
                worst = worst.max(stats.joint[(a, b)]);
            }
        }
    }
    worst
}

impl PhotonStatistics {
    /// `P(n >= 2)` in resonator `mode` (1 or 2).
    pub fn mode_multiphoton(&self, mode: usize) -> f64 {
        let dist = if mode == 1 { &self.mode1 } else { &self.mode2 };
        dist.iter().skip(2).sum()
    }
}

/// Single-mode reduced state of resonator `mode` (1 or 2).
pub fn reduced_mode(rho: &DensityMatrix, mode: usize) -> Result<DensityMatrix> {
    if rho.space().num_subsystems() != 3 || !(1..=2).contains(&mode) {
        return Err(Error::InvalidArgument(format!(
            "mode {mode} of a {:?} state",
            rho.space().dims()
        )));
    }
    partial_trace(rho, &[mode])
}

/// `E_c = log2 ||rho^{T1}||_1` of a two-mode state.
pub fn logarithmic_negativity(rho12: &DensityMatrix) -> Result<f64> {
    if rho12.space().num_subsystems() != 2 {
        return Err(Error::InvalidArgument(format!(
            "negativity needs a bipartite state, got dimensions {:?}",
            rho12.space().dims()
        )));
    }
    let pt = partial_transpose(rho12.as_operator(), 0)?;
    let trace_norm: f64 = pt.hermitian_eigenvalues().iter().map(|e| e.abs()).sum();
    Ok(trace_norm.log2().max(0.0))
}

/// Reference vacuum Wigner function for tests and diagnostics.
pub fn vacuum_qpd(alpha: C64, s: f64) -> f64 {
    2.0 / (PI * (1.0 - s)) * (-2.0 * alpha.norm_sqr() / (1.0 - s)).exp()
}

#[doc(hidden)]
pub fn single_mode_space(levels: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(vec![levels])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_model::{derive_supermodes, CircuitParams};
    use crate::fockspace::{Operator, StateVector};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn fock(levels: usize, n: usize) -> DensityMatrix {
        let space = HilbertSpace::new(vec![levels]).unwrap();
        DensityMatrix::from_pure(&StateVector::basis(&space, &[n]).unwrap())
    }

    fn coherent(levels: usize, alpha: C64) -> DensityMatrix {
        let space = HilbertSpace::new(vec![levels]).unwrap();
        let mut amps = DVector::zeros(levels);
        let mut coef = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..levels {
            amps[n] = coef;
            coef *= alpha / ((n + 1) as f64).sqrt();
        }
        DensityMatrix::from_pure(&StateVector::normalized(space, amps).unwrap())
    }

    fn random_state(seed: u64, levels: usize, decay: f64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(levels, levels, |r, _| {
            let w = (-decay * r as f64).exp();
            C64::new(rng.random_range(-1.0..1.0) * w, rng.random_range(-1.0..1.0) * w)
        });
        let m = &a * a.adjoint();
        let op = Operator::new(HilbertSpace::new(vec![levels]).unwrap(), m).unwrap();
        DensityMatrix::from_hermitian_part(op).unwrap()
    }

    #[test]
    fn t_matrix_reference_values() {
        let zero = C64::new(0.0, 0.0);
        assert!((t_matrix_element(0, 0, zero, 0.0).unwrap().re - 2.0 / PI).abs() < 1e-15);
        assert!((t_matrix_element(1, 1, zero, 0.0).unwrap().re + 2.0 / PI).abs() < 1e-15);
        let alpha = C64::new(0.4, -0.7);
        let q = t_matrix_element(0, 0, alpha, -1.0).unwrap();
        assert!((q.re - (-alpha.norm_sqr()).exp() / PI).abs() < 1e-15);
        assert!(t_matrix_element(0, 0, zero, 1.0).is_err());
    }

    #[test]
    fn t_matrix_hermitian_symmetry() {
        let alpha = C64::new(0.3, 0.5);
        for (l, k) in [(0, 2), (1, 3), (2, 5)] {
            let a = t_matrix_element(l, k, alpha, 0.3).unwrap();
            let b = t_matrix_element(k, l, alpha, 0.3).unwrap();
            assert!((a - b.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn laguerre_matches_closed_forms() {
        let x = 0.7;
        let row = laguerre_row(2, x, 3);
        assert!((row[1] - (3.0 - x)).abs() < 1e-15);
        assert!((row[2] - (x * x / 2.0 - 4.0 * x + 6.0)).abs() < 1e-14);
    }

    #[test]
    fn vacuum_wigner_pointwise() {
        let g = qpd(&fock(4, 0), 0.0, &GridSpec { half_width: 2.0, resolution: 21 }).unwrap();
        for (i, im) in g.im_axis.iter().enumerate() {
            for (j, re) in g.re_axis.iter().enumerate() {
                let exact = vacuum_qpd(C64::new(*re, *im), 0.0);
                assert!((g.values[(i, j)] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multimode_state_rejected() {
        let space = HilbertSpace::new(vec![2, 2]).unwrap();
        let rho = DensityMatrix::maximally_mixed(&space);
        assert!(matches!(qpd(&rho, 0.0, &GridSpec::default()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn qpd_normalization_and_refinement() {
        let rho = coherent(12, C64::new(0.5, 0.3));
        for s in [-1.0, -0.5, 0.0, 0.5] {
            let coarse = qpd(&rho, s, &GridSpec { half_width: 5.0, resolution: 41 }).unwrap();
            assert!((coarse.integral() - 1.0).abs() < 0.03, "s = {s}");
            let fine = qpd(&rho, s, &GridSpec { half_width: 5.0, resolution: 161 }).unwrap();
            assert!((fine.integral() - 1.0).abs() < 1e-4, "s = {s}: {}", fine.integral());
        }
    }

    #[test]
    fn qubit_depth_closed_form() {
        let one = nonclassical_depth_qubit(&fock(3, 1), 0.01).unwrap();
        assert!((one.tau - 1.0).abs() < 1e-15);
        let vac = nonclassical_depth_qubit(&fock(3, 0), 0.01).unwrap();
        assert!(vac.tau == 0.0 && vac.degenerate);
        assert!(nonclassical_depth_qubit(&fock(3, 2), 0.01).is_err());
    }

    #[test]
    fn numeric_depth_of_fock_and_coherent_states() {
        let grid = GridSpec { half_width: 3.0, resolution: 61 };
        let one = nonclassical_depth_numeric(&fock(4, 1), &grid, 5e-3).unwrap();
        assert!((one.tau - 1.0).abs() < 5e-3, "{one:?}");
        // any finite Fock support is nonclassical; 30 levels push that below the threshold
        let coh = nonclassical_depth_numeric(&coherent(30, C64::new(0.6, 0.0)), &grid, 5e-3).unwrap();
        assert!(coh.classical && coh.tau == 0.0, "{coh:?}");
    }

    #[test]
    fn numeric_depth_matches_closed_form_on_qubit_states() {
        let space = HilbertSpace::new(vec![2]).unwrap();
        let grid = GridSpec { half_width: 3.0, resolution: 81 };
        for (p1, coh) in [(0.3, 0.2), (0.2, 0.3), (0.45, 0.1)] {
            let m = DMatrix::from_row_slice(2, 2, &[
                C64::new(1.0 - p1, 0.0), C64::new(coh, 0.0),
                C64::new(coh, 0.0), C64::new(p1, 0.0),
            ]);
            let rho = DensityMatrix::new(Operator::new(space.clone(), m).unwrap()).unwrap();
            let closed = nonclassical_depth_qubit(&rho, 0.01).unwrap();
            let numeric = nonclassical_depth_numeric(&rho, &grid, 5e-3).unwrap();
            assert!((numeric.s0 - closed.s0).abs() < 5e-3, "{numeric:?} vs {closed:?}");
        }
    }

    #[test]
    fn symmetric_single_excitation_is_one_ebit() {
        let sp = derive_supermodes(&CircuitParams::reference()).unwrap();
        let space = HilbertSpace::qubit_two_modes(3).unwrap();
        let psi = supermode_state(&sp, &space, SupermodeState::Psi1Plus).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let stats = photon_probabilities(&rho, &sp).unwrap();
        assert!((stats.joint[(1, 0)] - 0.5).abs() < 1e-15 && (stats.joint[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((stats.psi1_plus - 1.0).abs() < 1e-14);
        assert!((stats.joint.sum() - 1.0).abs() < 1e-10);
        let modes = partial_trace(&rho, &[1, 2]).unwrap();
        assert!((logarithmic_negativity(&modes).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_no_negativity() {
        let space = HilbertSpace::new(vec![3, 3]).unwrap();
        let psi = StateVector::basis(&space, &[1, 2]).unwrap();
        assert!(logarithmic_negativity(&DensityMatrix::from_pure(&psi)).unwrap().abs() < 1e-14);
        assert!(logarithmic_negativity(&fock(3, 1)).is_err());
    }

    fn local_phase(levels: usize, phi: f64, which: usize) -> DMatrix<C64> {
        let d = DMatrix::from_fn(levels, levels, |r, c| {
            if r == c { C64::from_polar(1.0, phi * r as f64) } else { C64::new(0.0, 0.0) }
        });
        let id = DMatrix::<C64>::identity(levels, levels);
        if which == 0 { d.kronecker(&id) } else { id.kronecker(&d) }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn qpd_is_real(seed in 0u64..10_000, s in -1.0f64..0.9) {
            let rho = random_state(seed, 5, 0.3);
            let g = qpd(&rho, s, &GridSpec { half_width: 2.5, resolution: 15 }).unwrap();
            prop_assert!(g.max_imaginary < 1e-10);
        }

        #[test]
        fn husimi_is_nonnegative(seed in 0u64..10_000) {
            let rho = random_state(seed, 6, 0.2);
            let g = qpd(&rho, -1.0, &GridSpec { half_width: 3.0, resolution: 25 }).unwrap();
            prop_assert!(g.min() >= -1e-14);
        }

        #[test]
        fn grid_minimum_decreases_with_s(seed in 0u64..10_000) {
            let rho = random_state(seed, 5, 0.4);
            let grid = GridSpec { half_width: 3.0, resolution: 31 };
            let mut last = f64::INFINITY;
            for s in [-0.8, -0.4, 0.0, 0.4, 0.8] {
                let m = grid_min(&rho, s, &grid).unwrap();
                prop_assert!(m <= last + 1e-12);
                last = m;
            }
        }

        #[test]
        fn negativity_invariant_under_local_phases(seed in 0u64..10_000, phi in 0.0f64..6.3, which in 0usize..2) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let space = HilbertSpace::new(vec![3, 3]).unwrap();
            let amps = DVector::from_fn(9, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let rho = DensityMatrix::from_pure(&StateVector::normalized(space.clone(), amps).unwrap());
            let u = local_phase(3, phi, which);
            let rotated = Operator::new(space, &u * rho.matrix() * u.adjoint()).unwrap();
            let a = logarithmic_negativity(&rho).unwrap();
            let b = logarithmic_negativity(&DensityMatrix::new(rotated).unwrap()).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn fock_sum_truncation_is_stable(seed in 0u64..10_000) {
            let base = random_state(seed, 4, 2.5);
            let mut wide = DMatrix::zeros(6, 6);
            wide.view_mut((0, 0), (4, 4)).copy_from(base.matrix());
            let wide = DensityMatrix::new(Operator::new(HilbertSpace::new(vec![6]).unwrap(), wide).unwrap()).unwrap();
            let grid = GridSpec { half_width: 2.0, resolution: 11 };
            let a = qpd(&base, 0.3, &grid).unwrap();
            let b = qpd(&wide, 0.3, &grid).unwrap();
            prop_assert!((a.values - b.values).abs().max() < 1e-8);
        }
    }
}
