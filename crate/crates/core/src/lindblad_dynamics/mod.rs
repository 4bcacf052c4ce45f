//! Lindblad master equation: Liouvillian assembly, transient evolution,
//! steady states and output-port photon statistics.
//!
//! Each resonator leaks into three channels at `gamma_i/3` each; port 3
//! collects one channel of both resonators, so its field operator is
//! `sqrt(gamma1/3) a1 + sqrt(gamma2/3) a2`. Input vacuum terms vanish in
//! normally ordered averages and are never simulated.

mod integrator;
mod effective;
mod steady;

pub use integrator::{integrate, IntegratorOptions, LinearFlow};
pub use effective::{EffectiveSteadyState, PortStatistics};
pub use steady::{steady_state, steady_state_with, SteadyStateOptions};

use nalgebra::DVector;

use crate::circuit_model::{
    build_effective_hamiltonian, build_lab_hamiltonian, CircuitParams, ModeBasis, ModeOperators,
    SupermodeParams, TimeDependentHamiltonian,
};
use crate::error::{Error, Result};
use crate::fockspace::{
    devectorize, spost, spre, sprepost, trace_product, vectorize, DensityMatrix, HilbertSpace,
    Operator, SuperOperator, C64,
};

const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Debug, Clone)]
pub enum Hamiltonian {
    Static(Operator),
    TimeDependent(TimeDependentHamiltonian),
}

impl Hamiltonian {
    pub fn space(&self) -> &HilbertSpace {
        match self {
            Hamiltonian::Static(h) => h.space(),
            Hamiltonian::TimeDependent(h) => h.space(),
        }
    }
}

/// Hamiltonian plus collapse operators `(B_k, rate_k)` with dissipators
/// `rate_k (B rho B^dag - {B^dag B, rho}/2)`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: Hamiltonian,
    collapse_ops: Vec<(Operator, f64)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Hamiltonian, collapse_ops: Vec<(Operator, f64)>) -> Result<Self> {
        let space = hamiltonian.space();
        for (k, (op, rate)) in collapse_ops.iter().enumerate() {
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(Error::InvalidParameter(format!("collapse rate {k} is {rate}")));
            }
            if op.space() != space {
                return Err(Error::InvalidDimension(format!(
                    "collapse operator {k} acts on {:?}, Hamiltonian on {:?}",
                    op.space().dims(),
                    space.dims()
                )));
            }
        }
        Ok(Self { hamiltonian, collapse_ops })
    }

    /// `{(sigma-, Gamma), (sigma_z, Gamma_f/2), (a1, gamma1), (a2, gamma2)}`
    pub fn default_collapse_ops(ops: &ModeOperators, p: &CircuitParams) -> Vec<(Operator, f64)> {
        vec![
            (ops.sigma_minus.clone(), p.qubit_decay),
            (ops.sigma_z.clone(), 0.5 * p.qubit_dephasing),
            (ops.a1.clone(), p.gamma1),
            (ops.a2.clone(), p.gamma2),
        ]
    }

    /// Effective quadratic-coupling model on `(qubit, A+, A-)` with `levels`
    /// Fock states per supermode.
    pub fn effective(p: &CircuitParams, sp: &SupermodeParams, levels: usize) -> Result<(Self, ModeOperators)> {
        let space = HilbertSpace::qubit_two_modes(levels)?;
        let h = build_effective_hamiltonian(sp, &space)?;
        let ops = ModeOperators::new(&space, ModeBasis::Supermode, sp.beta)?;
        let model = Self::new(Hamiltonian::Static(h), Self::default_collapse_ops(&ops, p))?;
        Ok((model, ops))
    }

    /// Driven lab-frame model on `(qubit, a1, a2)`.
    pub fn lab(p: &CircuitParams, levels: usize) -> Result<(Self, ModeOperators)> {
        let space = HilbertSpace::qubit_two_modes(levels)?;
        let h = build_lab_hamiltonian(p, &space)?;
        let ops = ModeOperators::new(&space, ModeBasis::Bare, p.beta())?;
        let model = Self::new(Hamiltonian::TimeDependent(h), Self::default_collapse_ops(&ops, p))?;
        Ok((model, ops))
    }

    pub fn space(&self) -> &HilbertSpace {
        self.hamiltonian.space()
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[(Operator, f64)] {
        &self.collapse_ops
    }

    fn dissipator(&self) -> SuperOperator {
        let mut total = SuperOperator::zeros(self.space());
        for (b, rate) in &self.collapse_ops {
            if *rate == 0.0 {
                continue;
            }
            let bd = b.dagger();
            let bdb = &bd * b;
            let jump = sprepost(b, &bd);
            let anti = &spre(&bdb) + &spost(&bdb);
            let d = &jump - &anti.scale(C64::new(0.5, 0.0));
            total = &total + &d.scale(C64::new(*rate, 0.0));
        }
        total
    }

    fn flow(&self) -> LinearFlow {
        let (h0, terms): (&Operator, &[(Operator, _)]) = match &self.hamiltonian {
            Hamiltonian::Static(h) => (h, &[]),
            Hamiltonian::TimeDependent(h) => (&h.static_part, &h.terms),
        };
        let base = &commutator_generator(h0) + &self.dissipator();
        LinearFlow {
            base: base.matrix().clone(),
            terms: terms
                .iter()
                .map(|(op, f)| (commutator_generator(op).matrix().clone(), *f))
                .collect(),
        }
    }
}

/// `-i (spre(H) - spost(H))`
fn commutator_generator(h: &Operator) -> SuperOperator {
    (&spre(h) - &spost(h)).scale(MINUS_I)
}

/// Liouvillian of a model with a static Hamiltonian.
pub fn build_liouvillian(model: &LindbladModel) -> Result<SuperOperator> {
    match &model.hamiltonian {
        Hamiltonian::Static(h) => Ok(&commutator_generator(h) + &model.dissipator()),
        Hamiltonian::TimeDependent(_) => Err(Error::Unsupported(
            "time-dependent Hamiltonian has no single Liouvillian; integrate with evolve".into(),
        )),
    }
}

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    /// `Tr(rho(t) op)` at each sample.
    pub fn expectations(&self, op: &Operator) -> Result<Vec<C64>> {
        self.states.iter().map(|r| crate::fockspace::expectation(r, op)).collect()
    }
}

/// Integrate the master equation from `rho0` at `t_grid[0]` and sample at
/// every grid time.
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if rho0.space() != model.space() {
        return Err(Error::InvalidDimension("initial state and model spaces differ".into()));
    }
    let flow = model.flow();
    let y0 = vectorize(rho0.as_operator());
    let raw = integrate(&flow, y0.as_slice(), t_grid, opts)?;
    let mut states = Vec::with_capacity(raw.len());
    for (t, y) in t_grid.iter().zip(raw) {
        let op = devectorize(&DVector::from_vec(y), model.space())?;
        let rho = DensityMatrix::with_tolerances(op, 1e-8, -1e-6).map_err(|e| Error::NumericalFailure {
            message: format!("state left the physical set at t = {t}: {e}"),
            residual: f64::NAN,
        })?;
        states.push(rho);
    }
    Ok(Trajectory { times: t_grid.to_vec(), states })
}

/// Field operators of the three output ports.
#[derive(Debug, Clone)]
pub struct Ports {
    ops: [Operator; 3],
}

impl Ports {
    pub fn new(modes: &ModeOperators, gamma1: f64, gamma2: f64) -> Self {
        let c1 = modes.a1.scale_real((gamma1 / 3.0).sqrt());
        let c2 = modes.a2.scale_real((gamma2 / 3.0).sqrt());
        let c3 = &c1 + &c2;
        Self { ops: [c1, c2, c3] }
    }

    /// Port `1`, `2` or `3`.
    pub fn port(&self, port: usize) -> Result<&Operator> {
        match port {
            1..=3 => Ok(&self.ops[port - 1]),
            _ => Err(Error::InvalidArgument(format!("port {port} is not 1, 2 or 3"))),
        }
    }
}

/// Average output photon numbers `(N1, N2, N3)`.
pub fn output_photon_numbers(rho: &DensityMatrix, ports: &Ports) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let c = &ports.ops[k];
        *slot = crate::fockspace::expectation(rho, &(&c.dagger() * c))?.re;
    }
    Ok(out)
}

const FLUX_FLOOR: f64 = 1e-12;

/// Zero-delay second-order correlation of one port.
pub fn g2_port(rho: &DensityMatrix, ports: &Ports, port: usize) -> Result<f64> {
    let c = ports.port(port)?;
    let cd = c.dagger();
    let flux = crate::fockspace::expectation(rho, &(&cd * c))?.re;
    if flux < FLUX_FLOOR {
        return Err(Error::UndefinedCorrelation { port, flux });
    }
    let pairs = &(&cd * &cd) * &(c * c);
    Ok(crate::fockspace::expectation(rho, &pairs)?.re / (flux * flux))
}

/// `g2(0)` of all three ports.
pub fn g2_zero(rho: &DensityMatrix, ports: &Ports) -> Result<[f64; 3]> {
    Ok([g2_port(rho, ports, 1)?, g2_port(rho, ports, 2)?, g2_port(rho, ports, 3)?])
}

/// Delayed correlation `<c^dag(0) c^dag(tau) c(tau) c(0)> / N^2` by quantum
/// regression from the steady state.
pub fn g2_tau(
    model: &LindbladModel,
    rho_ss: &DensityMatrix,
    ports: &Ports,
    port: usize,
    tau_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<f64>> {
    let l = build_liouvillian(model)?;
    let c = ports.port(port)?;
    let cd = c.dagger();
    let n_op = &cd * c;
    let flux = crate::fockspace::expectation(rho_ss, &n_op)?.re;
    if flux < FLUX_FLOOR {
        return Err(Error::UndefinedCorrelation { port, flux });
    }
    let kicked = &(c * rho_ss.as_operator()) * &cd;
    let flow = LinearFlow { base: l.matrix().clone(), terms: Vec::new() };
    let mut grid = tau_grid.to_vec();
    let prepend = grid.first().map_or(true, |&t| t > 0.0);
    if prepend {
        grid.insert(0, 0.0);
    }
    let raw = integrate(&flow, vectorize(&kicked).as_slice(), &grid, opts)?;
    let skip = usize::from(prepend);
    raw.into_iter()
        .skip(skip)
        .map(|y| {
            let op = devectorize(&DVector::from_vec(y), model.space())?;
            Ok(trace_product(n_op.matrix(), op.matrix()).re / (flux * flux))
        })
        .collect()
}

/// Result of repeating an observable at two Fock cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffCheck {
    pub levels: usize,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

impl CutoffCheck {
    pub fn converged(&self, tol: f64) -> bool {
        self.relative_change < tol
    }
}

/// Evaluate `observable(levels)` and `observable(levels + 2)`.
pub fn cutoff_convergence<F>(levels: usize, observable: F) -> Result<CutoffCheck>
where
    F: Fn(usize) -> Result<f64>,
{
    let coarse = observable(levels)?;
    let fine = observable(levels + 2)?;
    let relative_change = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    Ok(CutoffCheck { levels, coarse, fine, relative_change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_model::{derive_supermodes, supermode_state, SupermodeState};
    use crate::fockspace::{annihilation, expectation, StateVector};

    fn single_mode(levels: usize) -> HilbertSpace {
        HilbertSpace::new(vec![levels]).unwrap()
    }

    #[test]
    fn single_decay_generator() {
        let space = single_mode(2);
        let a = annihilation(2).unwrap();
        let model = LindbladModel::new(Hamiltonian::Static(Operator::zeros(&space)), vec![(a, 0.7)]).unwrap();
        let l = build_liouvillian(&model).unwrap();
        let one = DensityMatrix::from_pure(&StateVector::basis(&space, &[1]).unwrap());
        let out = l.apply_operator(one.as_operator()).unwrap();
        let m = out.matrix();
        assert!((m[(0, 0)].re - 0.7).abs() < 1e-15);
        assert!((m[(1, 1)].re + 0.7).abs() < 1e-15);
        assert!(m[(0, 1)].norm() < 1e-15 && m[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn generator_is_traceless_on_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = CircuitParams::reference();
        let sp = derive_supermodes(&p).unwrap();
        let (model, _) = LindbladModel::effective(&p, &sp, 3).unwrap();
        let l = build_liouvillian(&model).unwrap();
        let d = model.space().total_dim();
        for _ in 0..10 {
            let m = nalgebra::DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let out = l.apply_operator(&Operator::new(model.space().clone(), m).unwrap()).unwrap();
            assert!(out.trace().norm() < 1e-10 * l.max_abs());
        }
    }

    #[test]
    fn time_dependent_model_has_no_liouvillian() {
        let p = CircuitParams::reference();
        let (model, _) = LindbladModel::lab(&p, 2).unwrap();
        assert!(matches!(build_liouvillian(&model), Err(Error::Unsupported(_))));
    }

    #[test]
    fn negative_rate_rejected() {
        let space = single_mode(3);
        let a = annihilation(3).unwrap();
        let r = LindbladModel::new(Hamiltonian::Static(Operator::zeros(&space)), vec![(a, -1.0)]);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn driven_damped_mode_relaxes_to_coherent_state() {
        let levels = 25;
        let a = annihilation(levels).unwrap();
        let (delta, eps, gamma) = (0.8, 0.6, 1.3);
        let h = &(&a.dagger() * &a).scale_real(delta) + &(&a + &a.dagger()).scale_real(eps);
        let model = LindbladModel::new(Hamiltonian::Static(h), vec![(a.clone(), gamma)]).unwrap();
        let rho = steady_state(&build_liouvillian(&model).unwrap()).unwrap();
        let alpha = C64::new(-eps, 0.0) / C64::new(delta, -gamma / 2.0);
        let got = expectation(&rho, &a).unwrap();
        assert!((got - alpha).norm() < 1e-8, "{got} vs {alpha}");
    }

    #[test]
    fn undriven_system_relaxes_to_ground_state() {
        let mut p = CircuitParams::reference();
        p.eps1 = C64::new(0.0, 0.0);
        p.eps2 = C64::new(0.0, 0.0);
        let sp = derive_supermodes(&p).unwrap();
        let (model, _) = LindbladModel::effective(&p, &sp, 3).unwrap();
        let rho = steady_state(&build_liouvillian(&model).unwrap()).unwrap();
        let ground = StateVector::basis(model.space(), &[1, 0, 0]).unwrap();
        assert!(rho.fidelity_pure(&ground) > 1.0 - 1e-10);
    }

    #[test]
    fn zero_generator_is_ambiguous() {
        let space = single_mode(2);
        let model = LindbladModel::new(
            Hamiltonian::Static(crate::fockspace::pauli(crate::fockspace::Pauli::Z)),
            Vec::new(),
        )
        .unwrap();
        let l = build_liouvillian(&model).unwrap();
        assert_eq!(l.space(), &space);
        assert!(matches!(steady_state(&l), Err(Error::AmbiguousSteadyState { .. })));
    }

    #[test]
    fn pure_decay_follows_exponential_law() {
        let levels = 6;
        let space = single_mode(levels);
        let a = annihilation(levels).unwrap();
        let gamma = 0.9;
        let model = LindbladModel::new(Hamiltonian::Static(Operator::zeros(&space)), vec![(a.clone(), gamma)]).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(&space, &[3]).unwrap());
        let grid: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let opts = IntegratorOptions::with_tolerances(1e-9, 1e-11);
        let traj = evolve(&model, &rho0, &grid, &opts).unwrap();
        let n = &a.dagger() * &a;
        for (t, v) in grid.iter().zip(traj.expectations(&n).unwrap()) {
            let exact = 3.0 * (-gamma * t).exp();
            assert!((v.re - exact).abs() < 1e-7 * 3.0, "t = {t}");
        }
    }

    #[test]
    fn port_numbers_and_selection_rule() {
        let p = CircuitParams::reference();
        let sp = derive_supermodes(&p).unwrap();
        let space = HilbertSpace::qubit_two_modes(3).unwrap();
        let ops = ModeOperators::new(&space, ModeBasis::Bare, 1.0).unwrap();
        let gamma = 1.0;
        let ports = Ports::new(&ops, gamma, gamma);

        let vac = DensityMatrix::from_pure(&StateVector::basis(&space, &[1, 0, 0]).unwrap());
        assert_eq!(output_photon_numbers(&vac, &ports).unwrap(), [0.0, 0.0, 0.0]);

        let minus = DensityMatrix::from_pure(&supermode_state(&sp, &space, SupermodeState::Psi1Minus).unwrap());
        let n = output_photon_numbers(&minus, &ports).unwrap();
        assert!(n[2].abs() < 1e-15);
        assert!(matches!(g2_port(&minus, &ports, 3), Err(Error::UndefinedCorrelation { port: 3, .. })));

        let plus = DensityMatrix::from_pure(&supermode_state(&sp, &space, SupermodeState::Psi1Plus).unwrap());
        let n = output_photon_numbers(&plus, &ports).unwrap();
        let ap = &ops.a_plus;
        let nplus = expectation(&plus, &(&ap.dagger() * ap)).unwrap().re;
        assert!((n[2] - 2.0 * gamma / 3.0 * nplus).abs() < 1e-14);
        assert!((n[0] - gamma / 6.0).abs() < 1e-14);
    }

    #[test]
    fn fock_state_is_antibunched() {
        let space = HilbertSpace::qubit_two_modes(4).unwrap();
        let ops = ModeOperators::new(&space, ModeBasis::Bare, 1.0).unwrap();
        let ports = Ports::new(&ops, 1.0, 1.0);
        let one = DensityMatrix::from_pure(&StateVector::basis(&space, &[1, 1, 0]).unwrap());
        assert!(g2_port(&one, &ports, 1).unwrap().abs() < 1e-15);
        assert!(ports.port(4).is_err());
    }

    #[test]
    fn cutoff_check_reports_relative_change() {
        let check = cutoff_convergence(4, |n| Ok(1.0 + 1.0 / (n as f64).powi(8))).unwrap();
        assert_eq!(check.levels, 4);
        assert!(check.relative_change < 1e-4 && !check.converged(1e-6));
    }
}
