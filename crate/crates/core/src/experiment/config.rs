//! Declarative experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit_model::{hopping_for_splitting, CircuitParams};
use crate::error::{Error, Result};
use crate::phase_space::GridSpec;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Evolve,
    Steady,
    G2tau,
    Qpd,
    Sweep2d,
    NegativityVsBeta,
    RatesTable,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::Steady => "steady",
            Self::G2tau => "g2tau",
            Self::Qpd => "qpd",
            Self::Sweep2d => "sweep2d",
            Self::NegativityVsBeta => "negativity_vs_beta",
            Self::RatesTable => "rates_table",
        }
    }
}

/// Which Hamiltonian an `evolve` run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Effective,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }

    fn check(&self, name: &str, min_count: usize, errors: &mut Vec<String>) {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            errors.push(format!("{name}: start and stop must be finite"));
        }
        if self.count < min_count {
            errors.push(format!("{name}: count must be >= {min_count} (got {})", self.count));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub delta_plus: AxisRange,
    pub theta_drive: AxisRange,
}

/// Detunings applied on top of the raw circuit. `delta2` re-solves the
/// hopping `g` (with `omega2` fixed and `omega1` constrained); the qubit is
/// then put on the two-photon resonance and the drive at `delta_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    #[serde(default)]
    pub delta_plus: f64,
    #[serde(default)]
    pub delta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Fock levels per (super)mode, i.e. max photon number + 1.
    #[serde(default = "default_cutoff")]
    pub fock_cutoff: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub t_grid: Option<AxisRange>,
    #[serde(default)]
    pub tau_grid: Option<AxisRange>,
    #[serde(default)]
    pub qpd_grid: GridSpec,
    #[serde(default)]
    pub s_values: Vec<f64>,
    /// Resonator whose reduced state a `qpd` run samples.
    #[serde(default = "default_mode")]
    pub mode: usize,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default = "default_max_order")]
    pub max_photon_order: u32,
}

fn default_cutoff() -> usize {
    7
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_mode() -> usize {
    1
}
fn default_max_order() -> u32 {
    5
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            fock_cutoff: default_cutoff(),
            rtol: default_rtol(),
            atol: default_atol(),
            model: ModelKind::default(),
            t_grid: None,
            tau_grid: None,
            qpd_grid: GridSpec::default(),
            s_values: Vec::new(),
            mode: default_mode(),
            sweep: None,
            betas: Vec::new(),
            max_photon_order: default_max_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    pub experiment: ExperimentKind,
    pub circuit: CircuitParams,
    #[serde(default)]
    pub tuning: Option<Tuning>,
    #[serde(default)]
    pub numerics: Numerics,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parse and validate. Schema problems and invalid values both come back
    /// as [`Error::Validation`].
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Validation(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_json_str(&text)
    }

    /// All offending fields at once; `Ok` carries advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        if self.spec_version != SPEC_VERSION {
            errors.push(format!("spec_version must be {SPEC_VERSION} (got {})", self.spec_version));
        }
        let warnings = match self.circuit.validate() {
            Ok(w) => w,
            Err(Error::Validation(list)) => {
                errors.extend(list.into_iter().map(|e| format!("circuit.{e}")));
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        let n = &self.numerics;
        if n.fock_cutoff < 3 {
            errors.push(format!("numerics.fock_cutoff must be >= 3 (got {})", n.fock_cutoff));
        }
        if !(n.rtol > 0.0) || !(n.atol > 0.0) {
            errors.push("numerics.rtol and numerics.atol must be positive".into());
        }
        if n.qpd_grid.validate().is_err() {
            errors.push("numerics.qpd_grid needs resolution >= 2 and a positive half_width".into());
        }
        if let Some(t) = &self.tuning {
            if !t.delta_plus.is_finite() || t.delta2.is_some_and(|d| !d.is_finite()) {
                errors.push("tuning values must be finite".into());
            }
        }
        match self.experiment {
            ExperimentKind::Evolve => match &n.t_grid {
                None => errors.push("numerics.t_grid is required for evolve".into()),
                Some(r) => {
                    r.check("numerics.t_grid", 2, &mut errors);
                    if r.stop <= r.start {
                        errors.push("numerics.t_grid must increase".into());
                    }
                }
            },
            ExperimentKind::G2tau => match &n.tau_grid {
                None => errors.push("numerics.tau_grid is required for g2tau".into()),
                Some(r) => {
                    r.check("numerics.tau_grid", 2, &mut errors);
                    if r.start < 0.0 || r.stop <= r.start {
                        errors.push("numerics.tau_grid must start at >= 0 and increase".into());
                    }
                }
            },
            ExperimentKind::Qpd => {
                if n.s_values.is_empty() {
                    errors.push("numerics.s_values must list at least one s".into());
                }
                for s in &n.s_values {
                    if !(-1.0..1.0).contains(s) {
                        errors.push(format!("numerics.s_values entry {s} is outside [-1, 1)"));
                    }
                }
                if !(1..=2).contains(&n.mode) {
                    errors.push(format!("numerics.mode must be 1 or 2 (got {})", n.mode));
                }
            }
            ExperimentKind::Sweep2d => match &n.sweep {
                None => errors.push("numerics.sweep is required for sweep2d".into()),
                Some(ax) => {
                    ax.delta_plus.check("numerics.sweep.delta_plus", 2, &mut errors);
                    ax.theta_drive.check("numerics.sweep.theta_drive", 2, &mut errors);
                }
            },
            ExperimentKind::NegativityVsBeta => {
                if n.betas.is_empty() {
                    errors.push("numerics.betas must list at least one ratio".into());
                }
                if n.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                    errors.push("numerics.betas entries must be positive".into());
                }
            }
            ExperimentKind::RatesTable => {
                if n.max_photon_order < 1 {
                    errors.push("numerics.max_photon_order must be >= 1".into());
                }
            }
            ExperimentKind::Steady => {}
        }
        if self.tuning.is_none()
            && !matches!(self.experiment, ExperimentKind::RatesTable | ExperimentKind::NegativityVsBeta)
        {
            let r = self.circuit.constraint_residual();
            if r.abs() > 1e-9 * self.circuit.omega1.abs().max(self.circuit.omega2.abs()).max(1.0) {
                errors.push(format!(
                    "circuit violates omega1 - omega2 = g(beta^2 - 1)/beta by {r:e}; fix the frequencies or set tuning.delta2"
                ));
            }
        }
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// The circuit with [`Tuning`] applied.
    pub fn tuned_circuit(&self) -> Result<CircuitParams> {
        tune(&self.circuit, self.tuning.as_ref())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn tune(p: &CircuitParams, tuning: Option<&Tuning>) -> Result<CircuitParams> {
    let Some(t) = tuning else {
        return Ok(p.clone());
    };
    let base = match t.delta2 {
        Some(d2) => hopping_for_splitting(p, d2)?,
        None => p.clone(),
    };
    Ok(base.tuned(t.delta_plus))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        let circuit = serde_json::to_string(&CircuitParams::reference()).unwrap();
        format!(
            r#"{{"spec_version": 1, "experiment": "steady", "circuit": {circuit},
                "output": {{"path": "out.csv"}}{extra}}}"#
        )
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json_str(&minimal("")).unwrap();
        assert_eq!(cfg.numerics.fock_cutoff, 7);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
        assert_eq!(cfg.numerics.qpd_grid, GridSpec::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json_str(&minimal(r#", "colour": 3"#)).unwrap_err();
        assert!(matches!(err, Error::Validation(ref v) if v[0].contains("colour")), "{err}");
        let err = ExperimentConfig::from_json_str(&minimal(r#", "numerics": {"cutof": 3}"#)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn every_offending_field_is_listed() {
        let text = minimal(r#", "numerics": {"fock_cutoff": 2, "rtol": -1}"#).replace("\"spec_version\": 1", "\"spec_version\": 2");
        match ExperimentConfig::from_json_str(&text).unwrap_err() {
            Error::Validation(list) => {
                assert_eq!(list.len(), 3, "{list:?}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn sweeps_need_two_points_per_axis() {
        let text = minimal(
            r#", "numerics": {"sweep": {"delta_plus": {"start": 0, "stop": 1, "count": 1},
                                        "theta_drive": {"start": 0, "stop": 1, "count": 5}}}"#,
        )
        .replace("\"steady\"", "\"sweep2d\"");
        match ExperimentConfig::from_json_str(&text).unwrap_err() {
            Error::Validation(list) => assert!(list[0].contains("delta_plus"), "{list:?}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn axis_endpoints_are_exact() {
        let r = AxisRange { start: -std::f64::consts::PI, stop: std::f64::consts::PI, count: 21 };
        let v = r.values();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], -std::f64::consts::PI);
        assert_eq!(v[20], std::f64::consts::PI);
        assert!(v[10].abs() < 1e-15);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json_str(&minimal("")).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.numerics.fock_cutoff = 9;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
