//! Steady state of the effective model.
//!
//! In the supermode basis `H_eff` has no `A+`/`A-` coupling, and for equal
//! resonator losses `gamma1 D[a1] + gamma2 D[a2] = gamma (D[A+] + D[A-])`
//! because the mode rotation is orthogonal. The Liouvillian is then a sum
//! of commuting generators on `(qubit, A+)` and `A-`, and its null vector
//! is the product of the two factors' null vectors.

use nalgebra::DMatrix;

use super::{build_liouvillian, steady_state_with, Hamiltonian, LindbladModel, Ports, SteadyStateOptions};
use crate::circuit_model::{CircuitParams, ModeRotation, SupermodeParams};
use crate::error::{Error, Result};
use crate::fockspace::{annihilation, embed, partial_trace, pauli, DensityMatrix, HilbertSpace, Operator, Pauli, C64};

const FLUX_FLOOR: f64 = 1e-12;
/// Population allowed in the top Fock level of a factor.
const EDGE_POPULATION: f64 = 1e-10;
const MAX_MINUS_LEVELS: usize = 120;

/// Steady state of the effective model, factorized when possible.
#[derive(Debug, Clone)]
pub enum EffectiveSteadyState {
    /// `rho = rho_{qubit, A+} (x) rho_{A-}`.
    Product {
        plus: DensityMatrix,
        minus: DensityMatrix,
        beta: f64,
    },
    /// Full `(qubit, A+, A-)` state.
    Joint { rho: DensityMatrix, beta: f64 },
}

/// Photon fluxes and zero-delay correlations of the three ports; `None`
/// marks a port whose flux is below `1e-12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortStatistics {
    pub flux: [f64; 3],
    pub g2: [Option<f64>; 3],
}

fn has_equal_losses(p: &CircuitParams) -> bool {
    p.gamma1 == p.gamma2
}

/// Fock levels for the `A-` factor: enough for its coherent amplitude.
fn minus_levels(p: &CircuitParams, sp: &SupermodeParams, levels: usize) -> usize {
    let kappa = 0.5 * p.gamma1;
    let amp = sp.eps_minus.norm() / sp.delta_minus.hypot(kappa).max(f64::MIN_POSITIVE);
    let n = amp * amp;
    let needed = (n + 10.0 * n.sqrt() + 14.0).ceil() as usize;
    needed.max(levels).min(MAX_MINUS_LEVELS)
}

fn edge_population(rho: &DensityMatrix) -> f64 {
    let d = rho.matrix().nrows();
    rho.matrix()[(d - 1, d - 1)].re
}

impl EffectiveSteadyState {
    /// Solve with `levels` Fock states per supermode (the `A-` factor may
    /// use more to hold its coherent displacement).
    pub fn solve(p: &CircuitParams, sp: &SupermodeParams, levels: usize) -> Result<Self> {
        Self::solve_with(p, sp, levels, &SteadyStateOptions::default())
    }

    pub fn solve_with(
        p: &CircuitParams,
        sp: &SupermodeParams,
        levels: usize,
        opts: &SteadyStateOptions,
    ) -> Result<Self> {
        if !has_equal_losses(p) {
            let (model, _) = LindbladModel::effective(p, sp, levels)?;
            let rho = steady_state_with(&build_liouvillian(&model)?, opts)?;
            return Ok(Self::Joint { rho, beta: sp.beta });
        }

        let space = HilbertSpace::new(vec![2, levels])?;
        let a = embed(&annihilation(levels)?, &space, 1)?;
        let sm = embed(&pauli(Pauli::Minus), &space, 0)?;
        let sz = embed(&pauli(Pauli::Z), &space, 0)?;
        let a2 = &a * &a;
        let mut h = sz.scale_real(0.5 * sp.delta_plus);
        h = &h + &(&a.dagger() * &a).scale_real(sp.delta_plus);
        h = &h + &(&(&sm.dagger() * &a2) + &(&sm * &a2.dagger())).scale_real(sp.theta);
        h = &h + &(&a.dagger().scale(sp.eps_plus) + &a.scale(sp.eps_plus.conj()));
        let plus_model = LindbladModel::new(
            Hamiltonian::Static(h),
            vec![
                (sm, p.qubit_decay),
                (sz, 0.5 * p.qubit_dephasing),
                (a, p.gamma1),
            ],
        )?;
        let plus = steady_state_with(&build_liouvillian(&plus_model)?, opts)?;

        let nm = minus_levels(p, sp, levels);
        let mspace = HilbertSpace::new(vec![nm])?;
        let b = annihilation(nm)?;
        let hm = &(&b.dagger() * &b).scale_real(sp.delta_minus)
            + &(&b.dagger().scale(sp.eps_minus) + &b.scale(sp.eps_minus.conj()));
        let minus_model = LindbladModel::new(Hamiltonian::Static(hm), vec![(b, p.gamma2)])?;
        debug_assert_eq!(minus_model.space(), &mspace);
        let minus = steady_state_with(&build_liouvillian(&minus_model)?, opts)?;

        let plus_modes = partial_trace(&plus, &[1])?;
        for (name, edge) in [("A+", edge_population(&plus_modes)), ("A-", edge_population(&minus))] {
            if edge > EDGE_POPULATION {
                log::warn!("{name} factor holds {edge:e} in its top Fock level; raise the cutoff");
            }
        }
        Ok(Self::Product { plus, minus, beta: sp.beta })
    }

    pub fn beta(&self) -> f64 {
        match self {
            Self::Product { beta, .. } | Self::Joint { beta, .. } => *beta,
        }
    }

    /// `(qubit, A+, A-)` state with `levels` per supermode. A wider `A-`
    /// factor is truncated; the discarded weight must stay below `1e-8`.
    pub fn joint(&self, levels: usize) -> Result<DensityMatrix> {
        match self {
            Self::Joint { rho, .. } => {
                if rho.space().dims()[1] != levels {
                    return Err(Error::InvalidDimension(format!(
                        "joint state has {} levels per mode, {levels} requested",
                        rho.space().dims()[1]
                    )));
                }
                Ok(rho.clone())
            }
            Self::Product { plus, minus, .. } => {
                if plus.space().dims()[1] != levels {
                    return Err(Error::InvalidDimension(format!(
                        "A+ factor has {} levels, {levels} requested",
                        plus.space().dims()[1]
                    )));
                }
                let m = minus.matrix();
                let n = levels.min(m.nrows());
                let mut cut = DMatrix::<C64>::zeros(levels, levels);
                cut.view_mut((0, 0), (n, n)).copy_from(&m.view((0, 0), (n, n)));
                let lost = 1.0 - cut.trace().re;
                if lost > 1e-8 {
                    return Err(Error::InvalidDimension(format!(
                        "{levels} levels discard {lost:e} of the A- population"
                    )));
                }
                let space = HilbertSpace::qubit_two_modes(levels)?;
                let full = plus.matrix().kronecker(&cut);
                DensityMatrix::with_tolerances(Operator::new(space, full)?, 1e-8, -1e-8)
            }
        }
    }

    /// Port fluxes and `g2(0)` for escape rates `gamma_i/3`.
    pub fn port_statistics(&self, gamma1: f64, gamma2: f64) -> Result<PortStatistics> {
        match self {
            Self::Joint { rho, beta } => {
                let ops = crate::circuit_model::ModeOperators::new(
                    rho.space(),
                    crate::circuit_model::ModeBasis::Supermode,
                    *beta,
                )?;
                let ports = Ports::new(&ops, gamma1, gamma2);
                let flux = super::output_photon_numbers(rho, &ports)?;
                let mut g2 = [None; 3];
                for (k, slot) in g2.iter_mut().enumerate() {
                    *slot = match super::g2_port(rho, &ports, k + 1) {
                        Ok(v) => Some(v),
                        Err(Error::UndefinedCorrelation { .. }) => None,
                        Err(e) => return Err(e),
                    };
                }
                Ok(PortStatistics { flux, g2 })
            }
            Self::Product { plus, minus, beta } => {
                let mp = moments(&partial_trace(plus, &[1])?);
                let mm = moments(minus);
                let r = ModeRotation::from_beta(*beta);
                let (w1, w2) = ((gamma1 / 3.0).sqrt(), (gamma2 / 3.0).sqrt());
                // port field = u A+ + v A-
                let weights = [
                    (w1 * r.c, w1 * r.s),
                    (w2 * r.s, -w2 * r.c),
                    (w1 * r.c + w2 * r.s, w1 * r.s - w2 * r.c),
                ];
                let mut flux = [0.0; 3];
                let mut g2 = [None; 3];
                for (k, &(u, v)) in weights.iter().enumerate() {
                    let n = normal_moment(&mp, &mm, u, v, 1);
                    flux[k] = n;
                    if n >= FLUX_FLOOR {
                        g2[k] = Some(normal_moment(&mp, &mm, u, v, 2) / (n * n));
                    }
                }
                Ok(PortStatistics { flux, g2 })
            }
        }
    }
}

/// `M[p][q] = Tr(rho a^dag^p a^q)` for `p, q <= 2`.
fn moments(rho: &DensityMatrix) -> [[C64; 3]; 3] {
    let d = rho.matrix().nrows();
    let a = annihilation(d).expect("single mode with >= 2 levels").into_matrix();
    let ad = a.adjoint();
    let id = DMatrix::<C64>::identity(d, d);
    let pow = |m: &DMatrix<C64>, k: usize| (0..k).fold(id.clone(), |acc, _| acc * m);
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for (p, row) in out.iter_mut().enumerate() {
        for (q, slot) in row.iter_mut().enumerate() {
            let op = pow(&ad, p) * pow(&a, q);
            *slot = (rho.matrix() * op).trace();
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    match (n, k) {
        (_, 0) => 1.0,
        (n, k) if k == n => 1.0,
        (2, 1) => 2.0,
        _ => unreachable!("orders above 2 are not used"),
    }
}

/// `<c^dag^p c^p>` for `c = u A+ + v A-` in a product state.
fn normal_moment(mp: &[[C64; 3]; 3], mm: &[[C64; 3]; 3], u: f64, v: f64, p: usize) -> f64 {
    let mut total = C64::new(0.0, 0.0);
    for i in 0..=p {
        for j in 0..=p {
            let w = binomial(p, i) * binomial(p, j) * u.powi((i + j) as i32) * v.powi((2 * p - i - j) as i32);
            total += mp[i][j] * mm[p - i][p - j] * w;
        }
    }
    total.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_model::derive_supermodes;

    #[test]
    fn product_and_joint_solutions_agree() {
        let p = CircuitParams::reference();
        let sp = derive_supermodes(&p).unwrap().with_delta_plus(1.5);
        let levels = 4;
        let product = EffectiveSteadyState::solve(&p, &sp, levels).unwrap();
        assert!(matches!(product, EffectiveSteadyState::Product { .. }));
        let (model, _) = LindbladModel::effective(&p, &sp, levels).unwrap();
        let joint_rho = crate::lindblad_dynamics::steady_state(&build_liouvillian(&model).unwrap()).unwrap();
        let joint = EffectiveSteadyState::Joint { rho: joint_rho, beta: sp.beta };

        let a = product.port_statistics(1.0, 1.0).unwrap();
        let b = joint.port_statistics(1.0, 1.0).unwrap();
        for k in 0..3 {
            assert!((a.flux[k] - b.flux[k]).abs() < 1e-8, "{a:?} {b:?}");
            assert!((a.g2[k].unwrap() - b.g2[k].unwrap()).abs() < 1e-6, "{a:?} {b:?}");
        }

        let tight = CircuitParams::reference();
        let tsp = derive_supermodes(&tight).unwrap();
        let prod = EffectiveSteadyState::solve(&tight, &tsp, levels).unwrap().joint(levels).unwrap();
        let (m, _) = LindbladModel::effective(&tight, &tsp, levels).unwrap();
        let full = crate::lindblad_dynamics::steady_state(&build_liouvillian(&m).unwrap()).unwrap();
        assert!(prod.trace_distance(&full) < 1e-6);
    }

    #[test]
    fn unequal_losses_use_joint_solver() {
        let mut p = CircuitParams::reference();
        p.gamma2 = 1.5;
        let sp = derive_supermodes(&p).unwrap();
        let s = EffectiveSteadyState::solve(&p, &sp, 3).unwrap();
        assert!(matches!(s, EffectiveSteadyState::Joint { .. }));
        let stats = s.port_statistics(p.gamma1, p.gamma2).unwrap();
        assert!(stats.flux.iter().all(|f| *f > 0.0));
    }

    #[test]
    fn undriven_ports_are_undefined() {
        let mut p = CircuitParams::reference();
        p.eps1 = C64::new(0.0, 0.0);
        p.eps2 = C64::new(0.0, 0.0);
        let sp = derive_supermodes(&p).unwrap();
        let stats = EffectiveSteadyState::solve(&p, &sp, 4).unwrap().port_statistics(1.0, 1.0).unwrap();
        assert_eq!(stats.g2, [None, None, None]);
    }
}
