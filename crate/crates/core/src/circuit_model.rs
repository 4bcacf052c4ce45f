//! Circuit parameters, supermode quantities and Hamiltonian builders.
//!
//! Two resonators `a1`, `a2` couple to a qubit with strengths `G1`, `G2`.
//! The normal modes `A+ = (G1 a1 + G2 a2)/Gbar` and `A- = (G2 a1 - G1 a2)/Gbar`
//! diagonalize the resonator block when `omega1 - omega2 = g (beta^2-1)/beta`
//! with `beta = G1/G2`; only `A+` couples to the qubit. After a polaron
//! transformation with Lamb-Dicke parameter `lambda = Gz/Omega+`, the
//! two-photon resonance `omega_q = 2 Omega+'` leaves the quadratic coupling
//! `Theta (sigma+ A+^2 + h.c.)` with `Theta = -2 lambda Gx`.
//!
//! Two-mode operators and states are built either in the *bare* basis
//! (Fock states of `a1`, `a2`) or in the *supermode* basis (Fock states of
//! `A+`, `A-`). The effective Hamiltonian lives in the supermode basis, so
//! truncation never mixes the decoupled supermode into the blockaded one.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{
    annihilation, embed, pauli, DensityMatrix, HilbertSpace, Operator, Pauli, StateVector, C64,
};

/// Physical inputs of the lab-frame model (dimensionless, `hbar = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub omega1: f64,
    pub omega2: f64,
    /// Capacitive hopping `g` between the resonators.
    #[serde(rename = "g")]
    pub hopping: f64,
    #[serde(rename = "G1")]
    pub coupling1: f64,
    #[serde(rename = "G2")]
    pub coupling2: f64,
    /// Qubit mixing angle, `tan(theta_mix) = Delta/omega`.
    pub theta_mix: f64,
    pub omega_q: f64,
    pub eps1: C64,
    pub eps2: C64,
    pub omega_d: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "Gamma")]
    pub qubit_decay: f64,
    #[serde(rename = "Gamma_f")]
    pub qubit_dephasing: f64,
}

/// Whether [`derive_supermodes_with`] enforces the resonator frequency
/// constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintCheck {
    Enforce,
    Skip,
}

const CONSTRAINT_RTOL: f64 = 1e-9;

impl CircuitParams {
    /// The blockade configuration used throughout the reference results:
    /// identical resonators at 2500 with `G = 0.06 omega`, `g = 6`,
    /// `theta_mix = pi/4`, drives 0.95 and 1, unit losses and `Gamma_f = 2`.
    /// The qubit sits on the two-photon resonance and the drive on `Omega+'`.
    pub fn reference() -> Self {
        let p = Self {
            omega1: 2500.0,
            omega2: 2500.0,
            hopping: 6.0,
            coupling1: 150.0,
            coupling2: 150.0,
            theta_mix: std::f64::consts::FRAC_PI_4,
            omega_q: 0.0,
            eps1: C64::new(0.95, 0.0),
            eps2: C64::new(1.0, 0.0),
            omega_d: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
            qubit_decay: 1.0,
            qubit_dephasing: 2.0,
        };
        p.tuned(0.0)
    }

    pub fn beta(&self) -> f64 {
        self.coupling1 / self.coupling2
    }

    /// Put the qubit on the two-photon resonance `omega_q = 2 Omega+'` and the
    /// drive at `omega_d = Omega+' - delta_plus`.
    pub fn tuned(mut self, delta_plus: f64) -> Self {
        let shifted = omega_plus_prime(&self);
        self.omega_q = 2.0 * shifted;
        self.omega_d = shifted - delta_plus;
        self
    }

    /// Drive amplitudes `eps1 = |eps1| e^{-i theta/2}`, `eps2 = |eps2| e^{+i theta/2}`.
    pub fn with_drive_phase(mut self, mag1: f64, mag2: f64, theta_drive: f64) -> Self {
        let (e1, e2) = drive_amplitudes(mag1, mag2, theta_drive);
        self.eps1 = e1;
        self.eps2 = e2;
        self
    }

    /// `omega1 - omega2 - g (beta^2 - 1)/beta`
    pub fn constraint_residual(&self) -> f64 {
        let b = self.beta();
        self.omega1 - self.omega2 - self.hopping * (b * b - 1.0) / b
    }

    /// Hard errors for invalid inputs plus advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        let nonneg = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("omega_q", self.omega_q),
            ("omega_d", self.omega_d),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("Gamma", self.qubit_decay),
            ("Gamma_f", self.qubit_dephasing),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                errors.push(format!("{name} must be a nonnegative number (got {v})"));
            }
        }
        for (name, v) in [("G1", self.coupling1), ("G2", self.coupling2)] {
            if !(v > 0.0) {
                errors.push(format!("{name} must be positive (got {v})"));
            }
        }
        for (name, v) in [
            ("g", self.hopping),
            ("theta_mix", self.theta_mix),
            ("eps1", self.eps1.re + self.eps1.im),
            ("eps2", self.eps2.re + self.eps2.im),
        ] {
            if !v.is_finite() {
                errors.push(format!("{name} must be finite"));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }

        let mut warnings = Vec::new();
        let gmin = self.coupling1.min(self.coupling2);
        if self.hopping.abs() > 0.1 * gmin {
            warnings.push(format!(
                "hopping g = {} is not much smaller than min(G1, G2) = {gmin}",
                self.hopping
            ));
        }
        let lambda = lamb_dicke(self);
        if lambda.abs() >= 0.15 {
            warnings.push(format!(
                "Lamb-Dicke parameter {lambda:.4} is not small; the quadratic-coupling expansion degrades"
            ));
        }
        Ok(warnings)
    }
}

/// `eps1 = |eps1| e^{-i theta/2}`, `eps2 = |eps2| e^{+i theta/2}`.
pub fn drive_amplitudes(mag1: f64, mag2: f64, theta_drive: f64) -> (C64, C64) {
    (
        C64::from_polar(mag1, -0.5 * theta_drive),
        C64::from_polar(mag2, 0.5 * theta_drive),
    )
}

/// `omega1` satisfying the supermode constraint for given `omega2`, `g`, `beta`.
pub fn constrained_omega1(omega2: f64, hopping: f64, beta: f64) -> f64 {
    omega2 + hopping * (beta * beta - 1.0) / beta
}

fn g_bar(p: &CircuitParams) -> f64 {
    p.coupling1.hypot(p.coupling2)
}

fn omega_plus(p: &CircuitParams) -> f64 {
    p.omega1 + p.hopping / p.beta()
}

fn transverse(p: &CircuitParams) -> f64 {
    -g_bar(p) * p.theta_mix.sin()
}

fn longitudinal(p: &CircuitParams) -> f64 {
    g_bar(p) * p.theta_mix.cos()
}

fn lamb_dicke(p: &CircuitParams) -> f64 {
    longitudinal(p) / omega_plus(p)
}

fn dispersive_shift(p: &CircuitParams) -> f64 {
    let gx = transverse(p);
    4.0 * gx * gx / (3.0 * omega_plus(p))
}

fn omega_plus_prime(p: &CircuitParams) -> f64 {
    omega_plus(p) - dispersive_shift(p)
}

fn supermode_splitting(p: &CircuitParams) -> f64 {
    let b = p.beta();
    dispersive_shift(p) - p.hopping * (1.0 + b * b) / b
}

/// Derived supermode quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupermodeParams {
    pub beta: f64,
    pub g_bar: f64,
    pub g_x: f64,
    pub g_z: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_plus_prime: f64,
    pub lambda: f64,
    pub theta: f64,
    pub eps_plus: C64,
    pub eps_minus: C64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub delta2: f64,
}

impl SupermodeParams {
    /// Override the drive detuning, keeping the supermode splitting.
    pub fn with_delta_plus(mut self, delta_plus: f64) -> Self {
        self.delta_plus = delta_plus;
        self.delta_minus = delta_plus + self.delta2;
        self
    }

    pub fn rotation(&self) -> ModeRotation {
        ModeRotation::from_beta(self.beta)
    }
}

/// Supermode parameters, enforcing the resonator frequency constraint.
pub fn derive_supermodes(p: &CircuitParams) -> Result<SupermodeParams> {
    derive_supermodes_with(p, ConstraintCheck::Enforce)
}

pub fn derive_supermodes_with(p: &CircuitParams, check: ConstraintCheck) -> Result<SupermodeParams> {
    if !(p.coupling1 > 0.0 && p.coupling2 > 0.0) {
        return Err(Error::InvalidParameter("G1 and G2 must be positive".into()));
    }
    if check == ConstraintCheck::Enforce {
        let residual = p.constraint_residual();
        let scale = p.omega1.abs().max(p.omega2.abs()).max(1.0);
        if residual.abs() > CONSTRAINT_RTOL * scale {
            return Err(Error::ConstraintViolation { residual });
        }
    }
    let beta = p.beta();
    let norm = (1.0 + beta * beta).sqrt();
    let g_x = transverse(p);
    let g_z = longitudinal(p);
    let omega_plus = omega_plus(p);
    let lambda = g_z / omega_plus;
    let omega_plus_prime = omega_plus_prime(p);
    let delta2 = supermode_splitting(p);
    let delta_plus = omega_plus_prime - p.omega_d;
    Ok(SupermodeParams {
        beta,
        g_bar: g_bar(p),
        g_x,
        g_z,
        omega_plus,
        omega_minus: p.omega2 - p.hopping / beta,
        omega_plus_prime,
        lambda,
        theta: -2.0 * lambda * g_x,
        eps_plus: (p.eps1 * beta + p.eps2) / norm,
        eps_minus: (p.eps1 - p.eps2 * beta) / norm,
        delta_plus,
        delta_minus: delta_plus + delta2,
        delta2,
    })
}

/// Re-solve the hopping `g` so that the supermode splitting equals `target`,
/// keeping `omega2`, `G1`, `G2` fixed and moving `omega1` along the
/// frequency constraint.
pub fn hopping_for_splitting(p: &CircuitParams, target: f64) -> Result<CircuitParams> {
    let beta = p.beta();
    let splitting = |g: f64| {
        let mut q = p.clone();
        q.hopping = g;
        q.omega1 = constrained_omega1(p.omega2, g, beta);
        supermode_splitting(&q) - target
    };
    // splitting(g) decreases monotonically for omega2 + g beta > 0
    let floor = -p.omega2 / beta;
    let mut lo = 0.5 * floor;
    let mut hi = 1.0_f64;
    let mut guard = 0;
    while splitting(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidParameter(format!(
                "no hopping reaches supermode splitting {target}"
            )));
        }
    }
    while splitting(lo) < 0.0 {
        lo = 0.5 * (lo + floor);
        guard += 1;
        if guard > 400 {
            return Err(Error::InvalidParameter(format!(
                "no hopping reaches supermode splitting {target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if splitting(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    let mut q = p.clone();
    q.hopping = g;
    q.omega1 = constrained_omega1(p.omega2, g, beta);
    Ok(q)
}

/// `amplitude * exp(-i frequency t)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Phasor {
    pub amplitude: C64,
    pub frequency: f64,
}

impl Phasor {
    pub fn at(&self, t: f64) -> C64 {
        self.amplitude * C64::from_polar(1.0, -self.frequency * t)
    }
}

/// `H(t) = H_static + sum_k f_k(t) O_k`; the operators need not be Hermitian
/// individually, only the sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentHamiltonian {
    pub static_part: Operator,
    pub terms: Vec<(Operator, Phasor)>,
}

impl TimeDependentHamiltonian {
    pub fn at(&self, t: f64) -> Operator {
        let mut m = self.static_part.matrix().clone();
        for (op, f) in &self.terms {
            m += op.matrix() * f.at(t);
        }
        Operator::new(self.static_part.space().clone(), m).expect("terms share the static space")
    }

    pub fn space(&self) -> &HilbertSpace {
        self.static_part.space()
    }

    /// Average over `[t0, t0 + period]` by the trapezoid rule on `samples`
    /// points; exact for trigonometric polynomials of degree below `samples`
    /// when `period` is a common period.
    pub fn time_average(&self, t0: f64, period: f64, samples: usize) -> Operator {
        let mut m = DMatrix::zeros(self.static_part.dim(), self.static_part.dim());
        for k in 0..samples {
            let t = t0 + period * k as f64 / samples as f64;
            m += self.at(t).matrix();
        }
        Operator::new(self.space().clone(), m / C64::new(samples as f64, 0.0)).unwrap()
    }
}

fn check_qubit_two_modes(space: &HilbertSpace, min_levels: usize) -> Result<usize> {
    let d = space.dims();
    if d.len() != 3 || d[0] != 2 || d[1] != d[2] || d[1] < min_levels {
        return Err(Error::InvalidDimension(format!(
            "expected (2, N, N) with N >= {min_levels}, got {d:?}"
        )));
    }
    Ok(d[1])
}

/// Two-mode basis in which a `(qubit, mode, mode)` space is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeBasis {
    /// Fock states of the resonators `a1`, `a2`.
    Bare,
    /// Fock states of the supermodes `A+`, `A-`.
    Supermode,
}

/// Qubit, resonator and supermode operators on a `(2, N, N)` space.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub basis: ModeBasis,
    pub a1: Operator,
    pub a2: Operator,
    pub a_plus: Operator,
    pub a_minus: Operator,
    pub sigma_minus: Operator,
    pub sigma_z: Operator,
}

impl ModeOperators {
    /// `beta = G1/G2` fixes the supermode rotation.
    pub fn new(space: &HilbertSpace, basis: ModeBasis, beta: f64) -> Result<Self> {
        let n = check_qubit_two_modes(space, 2)?;
        let a = annihilation(n)?;
        let first = embed(&a, space, 1)?;
        let second = embed(&a, space, 2)?;
        let r = ModeRotation::from_beta(beta);
        let mixed_a = &first.scale_real(r.c) + &second.scale_real(r.s);
        let mixed_b = &first.scale_real(r.s) - &second.scale_real(r.c);
        let (a1, a2, a_plus, a_minus) = match basis {
            ModeBasis::Bare => (first, second, mixed_a, mixed_b),
            ModeBasis::Supermode => (mixed_a, mixed_b, first, second),
        };
        Ok(Self {
            basis,
            a1,
            a2,
            a_plus,
            a_minus,
            sigma_minus: embed(&pauli(Pauli::Minus), space, 0)?,
            sigma_z: embed(&pauli(Pauli::Z), space, 0)?,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        self.a1.space()
    }
}

/// Lab-frame Hamiltonian with resonator drives, in the bare basis.
pub fn build_lab_hamiltonian(p: &CircuitParams, space: &HilbertSpace) -> Result<TimeDependentHamiltonian> {
    check_qubit_two_modes(space, 2)?;
    let ops = ModeOperators::new(space, ModeBasis::Bare, p.beta())?;
    let sx = embed(&pauli(Pauli::X), space, 0)?;
    let sz = &ops.sigma_z;
    let (a1, a2) = (&ops.a1, &ops.a2);
    let n1 = &a1.dagger() * a1;
    let n2 = &a2.dagger() * a2;
    let hop = &(&a1.dagger() * a2) + &(&a2.dagger() * a1);
    let x1 = a1 + &a1.dagger();
    let x2 = a2 + &a2.dagger();
    let (sin, cos) = p.theta_mix.sin_cos();

    let mut h = sz.scale_real(0.5 * p.omega_q);
    h = &h + &n1.scale_real(p.omega1);
    h = &h + &n2.scale_real(p.omega2);
    h = &h + &hop.scale_real(p.hopping);
    for (gi, xi) in [(p.coupling1, &x1), (p.coupling2, &x2)] {
        h = &h + &(&sx * xi).scale_real(-gi * sin);
        h = &h + &(sz * xi).scale_real(gi * cos);
    }

    let mut terms = Vec::new();
    for (eps, a) in [(p.eps1, a1), (p.eps2, a2)] {
        if eps != C64::new(0.0, 0.0) {
            terms.push((a.dagger(), Phasor { amplitude: eps, frequency: p.omega_d }));
            terms.push((a.clone(), Phasor { amplitude: eps.conj(), frequency: -p.omega_d }));
        }
    }
    Ok(TimeDependentHamiltonian { static_part: h, terms })
}

/// Time-independent quadratic-coupling Hamiltonian on `(qubit, A+, A-)`.
pub fn build_effective_hamiltonian(sp: &SupermodeParams, space: &HilbertSpace) -> Result<Operator> {
    check_qubit_two_modes(space, 2)?;
    let ops = ModeOperators::new(space, ModeBasis::Supermode, sp.beta)?;
    let ap = &ops.a_plus;
    let am = &ops.a_minus;
    let sp_op = ops.sigma_minus.dagger();
    let ap2 = ap * ap;

    let mut h = ops.sigma_z.scale_real(0.5 * sp.delta_plus);
    h = &h + &(&ap.dagger() * ap).scale_real(sp.delta_plus);
    h = &h + &(&am.dagger() * am).scale_real(sp.delta_minus);
    let quad = &(&sp_op * &ap2) + &(&ops.sigma_minus * &ap2.dagger());
    h = &h + &quad.scale_real(sp.theta);
    h = &h + &drive(ap, sp.eps_plus);
    h = &h + &drive(am, sp.eps_minus);
    Ok(h)
}

fn drive(a: &Operator, eps: C64) -> Operator {
    &a.dagger().scale(eps) + &a.scale(eps.conj())
}

/// First-order-in-lambda Hamiltonian in the frame rotating at the drive
/// frequency (qubit at twice the drive), on `(qubit, A+, A-)`.
///
/// The dispersive shift of `A+` is absorbed into `Omega+'`, so the static
/// part coincides with [`build_effective_hamiltonian`] at `omega_q = 2
/// Omega+'` and `Delta+ = 0`. The transverse coupling and the non-resonant
/// half of the quadratic coupling are kept as explicit phasors at
/// `omega_d`, `3 omega_d` and `4 omega_d`; they average to zero over one
/// period `2 pi / omega_d`.
pub fn build_rotating_frame_full(
    p: &CircuitParams,
    sp: &SupermodeParams,
    space: &HilbertSpace,
) -> Result<TimeDependentHamiltonian> {
    check_qubit_two_modes(space, 2)?;
    let ops = ModeOperators::new(space, ModeBasis::Supermode, sp.beta)?;
    let ap = &ops.a_plus;
    let am = &ops.a_minus;
    let sm = &ops.sigma_minus;
    let spl = sm.dagger();
    let ap2 = ap * ap;
    let wd = p.omega_d;

    let mut h = ops.sigma_z.scale_real(0.5 * (p.omega_q - 2.0 * wd));
    h = &h + &(&ap.dagger() * ap).scale_real(sp.omega_plus_prime - wd);
    h = &h + &(&am.dagger() * am).scale_real(sp.omega_minus - wd);
    let quad = &(&spl * &ap2) + &(sm * &ap2.dagger());
    h = &h + &quad.scale_real(sp.theta);
    h = &h + &drive(ap, sp.eps_plus);
    h = &h + &drive(am, sp.eps_minus);

    let gx = C64::new(sp.g_x, 0.0);
    let counter = C64::new(2.0 * sp.lambda * sp.g_x, 0.0);
    let terms = vec![
        (&spl * ap, Phasor { amplitude: gx, frequency: -wd }),
        (sm * &ap.dagger(), Phasor { amplitude: gx, frequency: wd }),
        (&spl * &ap.dagger(), Phasor { amplitude: gx, frequency: -3.0 * wd }),
        (sm * ap, Phasor { amplitude: gx, frequency: 3.0 * wd }),
        (&spl * &ap2.dagger(), Phasor { amplitude: counter, frequency: -4.0 * wd }),
        (sm * &ap2, Phasor { amplitude: counter, frequency: 4.0 * wd }),
    ];
    Ok(TimeDependentHamiltonian { static_part: h, terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiphoton {
    B1,
    B2,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Expansion coefficients of the `n`-photon qubit-supermode processes.
pub fn multiphoton_coefficient(kind: Multiphoton, m: u32, n: u32, lambda: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("photon order n = {n} must be >= 1")));
    }
    let gauss = (-2.0 * lambda * lambda).exp();
    let power = (2.0 * lambda).powi((2 * m + n - 1) as i32);
    match kind {
        Multiphoton::B1 => {
            if m < 1 {
                return Err(Error::InvalidArgument("B1 requires m >= 1".into()));
            }
            let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
            Ok(gauss * sign * power / (factorial(m - 1) * factorial(m + n)))
        }
        Multiphoton::B2 => {
            let sign = if (m + n + 1) % 2 == 0 { 1.0 } else { -1.0 };
            Ok(gauss * sign * power / (factorial(m) * factorial(m + n - 1)))
        }
    }
}

/// Leading `n`-photon transition rate `|Gx B2(0, n)|`.
pub fn multiphoton_rate(g_x: f64, lambda: f64, n: u32) -> Result<f64> {
    Ok((g_x * multiphoton_coefficient(Multiphoton::B2, 0, n, lambda)?).abs())
}

/// Named supermode eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupermodeState {
    Psi1Plus,
    Psi1Minus,
    Psi2Plus,
    Psi2Minus,
    DressedPlus,
    DressedMinus,
}

/// Supermode eigenstates in the bare `(qubit, mode1, mode2)` basis. All but
/// the dressed states carry the qubit in `|g>`.
pub fn supermode_state(sp: &SupermodeParams, space: &HilbertSpace, which: SupermodeState) -> Result<StateVector> {
    let needs_two = !matches!(which, SupermodeState::Psi1Plus | SupermodeState::Psi1Minus);
    let n = check_qubit_two_modes(space, if needs_two { 3 } else { 2 })?;
    let b = sp.beta;
    let norm1 = (1.0 + b * b).sqrt();
    let norm2 = 1.0 + b * b;
    let (e, g) = (0usize, 1usize);
    let mut amps = DVector::<C64>::zeros(space.total_dim());
    let mut put = |q: usize, n1: usize, n2: usize, v: f64| {
        debug_assert!(n1 < n && n2 < n);
        amps[space.index(&[q, n1, n2])] += C64::new(v, 0.0);
    };
    match which {
        SupermodeState::Psi1Plus => {
            put(g, 1, 0, b / norm1);
            put(g, 0, 1, 1.0 / norm1);
        }
        SupermodeState::Psi1Minus => {
            put(g, 1, 0, 1.0 / norm1);
            put(g, 0, 1, -b / norm1);
        }
        SupermodeState::Psi2Plus => {
            put(g, 2, 0, b * b / norm2);
            put(g, 1, 1, SQRT_2 * b / norm2);
            put(g, 0, 2, 1.0 / norm2);
        }
        SupermodeState::Psi2Minus => {
            put(g, 2, 0, 1.0 / norm2);
            put(g, 1, 1, -SQRT_2 * b / norm2);
            put(g, 0, 2, b * b / norm2);
        }
        SupermodeState::DressedPlus | SupermodeState::DressedMinus => {
            let sign = if which == SupermodeState::DressedPlus { 1.0 } else { -1.0 };
            let r = 1.0 / SQRT_2;
            put(g, 2, 0, r * b * b / norm2);
            put(g, 1, 1, r * SQRT_2 * b / norm2);
            put(g, 0, 2, r / norm2);
            put(e, 0, 0, sign * r);
        }
    }
    StateVector::new(space.clone(), amps)
}

/// Orthogonal two-mode rotation `A+ = c a1 + s a2`, `A- = s a1 - c a2` with
/// `c = G1/Gbar`, `s = G2/Gbar`. The map is an involution, so the same
/// rotation converts bare to supermode and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRotation {
    pub c: f64,
    pub s: f64,
}

impl ModeRotation {
    pub fn from_beta(beta: f64) -> Self {
        let norm = (1.0 + beta * beta).sqrt();
        Self { c: beta / norm, s: 1.0 / norm }
    }

    /// Fock-space representation: column `(p, m)` of the input basis
    /// expanded on the output basis `(n1, n2)`, for `levels_in` input and
    /// `levels_out` output levels per mode. Lossless when `levels_out >=
    /// 2 levels_in - 1`.
    pub fn fock_matrix(&self, levels_in: usize, levels_out: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(levels_out * levels_out, levels_in * levels_in);
        let fact = |k: usize| factorial(k as u32);
        for p in 0..levels_in {
            for m in 0..levels_in {
                // (c x + s y)^p (s x - c y)^m, x, y standing for a1^dag, a2^dag
                let norm = 1.0 / (fact(p) * fact(m)).sqrt();
                for i in 0..=p {
                    for j in 0..=m {
                        let n1 = i + j;
                        let n2 = p - i + m - j;
                        if n1 >= levels_out || n2 >= levels_out {
                            continue;
                        }
                        let w = binomial(p, i)
                            * self.c.powi(i as i32)
                            * self.s.powi((p - i) as i32)
                            * binomial(m, j)
                            * self.s.powi(j as i32)
                            * (-self.c).powi((m - j) as i32);
                        v[(n1 * levels_out + n2, p * levels_in + m)] +=
                            w * norm * (fact(n1) * fact(n2)).sqrt();
                    }
                }
            }
        }
        v
    }

    fn full_matrix(&self, space: &HilbertSpace, levels_out: usize) -> Result<(DMatrix<C64>, HilbertSpace)> {
        let dims = space.dims();
        let k = dims.len();
        if k < 2 || dims[k - 1] != dims[k - 2] {
            return Err(Error::InvalidDimension(format!(
                "mode rotation needs two equal trailing mode dimensions, got {dims:?}"
            )));
        }
        if levels_out < 2 {
            return Err(Error::InvalidDimension("output cutoff must be >= 2".into()));
        }
        let prefix: usize = dims[..k - 2].iter().product();
        let v = self.fock_matrix(dims[k - 1], levels_out).map(|x| C64::new(x, 0.0));
        let full = DMatrix::<C64>::identity(prefix, prefix).kronecker(&v);
        let mut out_dims = dims[..k - 2].to_vec();
        out_dims.extend([levels_out, levels_out]);
        Ok((full, HilbertSpace::new(out_dims)?))
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n as u32) / (factorial(k as u32) * factorial((n - k) as u32))
}

/// Objects that can be re-expressed in the other two-mode basis.
pub trait ModeBasisChange: Sized {
    fn rotate_modes(&self, rotation: &ModeRotation, levels_out: usize) -> Result<Self>;
}

impl ModeBasisChange for StateVector {
    fn rotate_modes(&self, rotation: &ModeRotation, levels_out: usize) -> Result<Self> {
        let (t, space) = rotation.full_matrix(self.space(), levels_out)?;
        let amps = t * self.amplitudes();
        StateVector::normalized(space, amps)
    }
}

impl ModeBasisChange for Operator {
    fn rotate_modes(&self, rotation: &ModeRotation, levels_out: usize) -> Result<Self> {
        let (t, space) = rotation.full_matrix(self.space(), levels_out)?;
        Operator::new(space, &t * self.matrix() * t.adjoint())
    }
}

impl ModeBasisChange for DensityMatrix {
    fn rotate_modes(&self, rotation: &ModeRotation, levels_out: usize) -> Result<Self> {
        let op = self.as_operator().rotate_modes(rotation, levels_out)?;
        let lost = (1.0 - op.trace().re).abs();
        if lost > 1e-8 {
            return Err(Error::InvalidDimension(format!(
                "{levels_out} output levels discard {lost:e} of the population"
            )));
        }
        DensityMatrix::with_tolerances(op, 1e-8, -1e-6)
    }
}

/// Express a bare-basis object in the supermode basis.
pub fn bare_to_supermode<T: ModeBasisChange>(x: &T, sp: &SupermodeParams, levels_out: usize) -> Result<T> {
    x.rotate_modes(&sp.rotation(), levels_out)
}

/// Express a supermode-basis object in the bare basis.
pub fn supermode_to_bare<T: ModeBasisChange>(x: &T, sp: &SupermodeParams, levels_out: usize) -> Result<T> {
    x.rotate_modes(&sp.rotation(), levels_out)
}

/// Smallest per-mode cutoff that makes a rotation of `levels` lossless.
pub fn lossless_levels(levels: usize) -> usize {
    2 * levels - 1
}
