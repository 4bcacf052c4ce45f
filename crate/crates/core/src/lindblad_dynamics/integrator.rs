//! Dormand-Prince 5(4) for linear systems `y' = (L0 + sum_k f_k(t) S_k) y`.

use crate::circuit_model::Phasor;
use crate::error::{Error, Result};
use crate::fockspace::{SparseMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Tolerances and limits of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; `None` lets the controller decide.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

/// Generator of a linear, possibly time-dependent, flow.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    pub base: SparseMatrix,
    pub terms: Vec<(SparseMatrix, Phasor)>,
}

impl LinearFlow {
    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn eval(&self, t: f64, y: &[C64], out: &mut [C64]) {
        self.base.matvec_into(y, out);
        for (m, f) in &self.terms {
            m.matvec_acc(f.at(t), y, out);
        }
    }
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension: b_i(theta) = sum_j P[i][j] theta^(j+1)
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0; 4],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn combine(y: &[C64], h: f64, parts: &[(f64, &[C64])], out: &mut [C64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for &(w, k) in parts {
            acc += k[i] * w;
        }
        *o = y[i] + acc * h;
    }
}

fn rms_error(err: &[C64], y0: &[C64], y1: &[C64], opts: &IntegratorOptions) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step(flow: &LinearFlow, t0: f64, y0: &[C64], f0: &[C64], span: f64, opts: &IntegratorOptions) -> f64 {
    let scaled = |v: &[C64]| {
        let n = v.len() as f64;
        (v.iter()
            .zip(y0)
            .map(|(x, y)| (x.norm() / (opts.atol + opts.rtol * y.norm())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scaled(y0);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, f)| y + f * h0).collect();
    let mut f1 = vec![ZERO; y0.len()];
    flow.eval(t0 + h0, &y1, &mut f1);
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate from `t_grid[0]` and return the state at every grid time.
pub fn integrate(
    flow: &LinearFlow,
    y0: &[C64],
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<C64>>> {
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    if y0.len() != flow.dim() {
        return Err(Error::InvalidDimension(format!(
            "initial vector has length {}, generator acts on {}",
            y0.len(),
            flow.dim()
        )));
    }
    let n = y0.len();
    let t_end = *t_grid.last().unwrap();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0.to_vec());
    if t_grid.len() == 1 {
        return Ok(out);
    }

    let mut t = t_grid[0];
    let mut y = y0.to_vec();
    let mut k1 = vec![ZERO; n];
    flow.eval(t, &y, &mut k1);
    let span = t_end - t;
    let mut h = initial_step(flow, t, &y, &k1, span, opts);
    if let Some(m) = opts.max_step {
        h = h.min(m);
    }

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut next = 1;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while next < t_grid.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NumericalFailure {
                message: format!("integrator exceeded {} steps at t = {t}", opts.max_steps),
                residual: f64::NAN,
            });
        }
        let remaining = t_end - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }

        combine(&y, h, &[(A21, &k1)], &mut stage);
        flow.eval(t + C2 * h, &stage, &mut k2);
        combine(&y, h, &[(A31, &k1), (A32, &k2)], &mut stage);
        flow.eval(t + C3 * h, &stage, &mut k3);
        combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut stage);
        flow.eval(t + C4 * h, &stage, &mut k4);
        combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut stage);
        flow.eval(t + C5 * h, &stage, &mut k5);
        combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut stage);
        flow.eval(t + h, &stage, &mut k6);
        combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], &mut y_new);
        let t_new = if last { t_end } else { t + h };
        flow.eval(t_new, &y_new, &mut k7);
        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = rms_error(&err, &y, &y_new, opts);
        if !e.is_finite() {
            return Err(Error::NumericalFailure {
                message: format!("non-finite error estimate at t = {t}"),
                residual: e,
            });
        }

        if e <= 1.0 {
            while next < t_grid.len() && (t_grid[next] <= t_new || (last && next == t_grid.len() - 1)) {
                let theta = ((t_grid[next] - t) / h).clamp(0.0, 1.0);
                out.push(if theta == 1.0 {
                    y_new.clone()
                } else {
                    dense_output(theta, h, &y, [&k1, &k2, &k3, &k4, &k5, &k6, &k7])
                });
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            rejected_last = true;
        }
        if let Some(m) = opts.max_step {
            h = h.min(m);
        }
        if next < t_grid.len() && h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t });
        }
    }
    Ok(out)
}

fn dense_output(theta: f64, h: f64, y0: &[C64], k: [&[C64]; 7]) -> Vec<C64> {
    let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
    let w: Vec<f64> = P.iter().map(|row| row.iter().zip(&powers).map(|(a, b)| a * b).sum()).collect();
    (0..y0.len())
        .map(|i| {
            let mut acc = ZERO;
            for (wj, kj) in w.iter().zip(&k) {
                acc += kj[i] * *wj;
            }
            y0[i] + acc * h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[C64]) -> SparseMatrix {
        SparseMatrix::from_triplets(
            values.len(),
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
        )
    }

    #[test]
    fn exponential_decay_and_rotation() {
        let flow = LinearFlow {
            base: diag(&[C64::new(-1.0, 0.0), C64::new(0.0, -3.0)]),
            terms: Vec::new(),
        };
        let grid: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
        let y0 = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let out = integrate(&flow, &y0, &grid, &IntegratorOptions::with_tolerances(1e-10, 1e-12)).unwrap();
        for (t, y) in grid.iter().zip(&out) {
            assert!((y[0].re - (-t).exp()).abs() < 1e-8, "t = {t}");
            assert!((y[1] - C64::from_polar(1.0, -3.0 * t)).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn time_dependent_phase() {
        // y' = -i cos(t) y  =>  y = exp(-i sin t)
        let one = diag(&[C64::new(0.0, -1.0)]);
        let flow = LinearFlow {
            base: SparseMatrix::zeros(1, 1),
            terms: vec![
                (one.clone(), Phasor { amplitude: C64::new(0.5, 0.0), frequency: 1.0 }),
                (one, Phasor { amplitude: C64::new(0.5, 0.0), frequency: -1.0 }),
            ],
        };
        let grid = [0.0, 0.5, 2.0, 7.3];
        let out = integrate(&flow, &[C64::new(1.0, 0.0)], &grid, &IntegratorOptions::with_tolerances(1e-10, 1e-12)).unwrap();
        for (t, y) in grid.iter().zip(&out) {
            assert!((y[0] - C64::from_polar(1.0, -t.sin())).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_increasing_grid() {
        let flow = LinearFlow { base: SparseMatrix::zeros(1, 1), terms: Vec::new() };
        let r = integrate(&flow, &[C64::new(1.0, 0.0)], &[0.0, 1.0, 1.0], &IntegratorOptions::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn step_limit_reports_failure() {
        let flow = LinearFlow {
            base: diag(&[C64::new(0.0, -1e4)]),
            terms: Vec::new(),
        };
        let opts = IntegratorOptions { max_steps: 10, ..IntegratorOptions::default() };
        let r = integrate(&flow, &[C64::new(1.0, 0.0)], &[0.0, 10.0], &opts);
        assert!(matches!(r, Err(Error::NumericalFailure { .. })));
    }
}
