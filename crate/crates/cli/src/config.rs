//! Run configuration: JSON schema, defaults and validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kgcurve_core::{
    build_family, BoundConstants, CurveFamily, CurveShape, CurveSpec, ManifoldSpec, Prescription, QuadratureConfig,
};

use crate::{CliError, Task};

/// One curve of the family with its binding scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub shape: CurveShape,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Binding scale `μ_i`; ignored by the RG prescription.
    #[serde(default)]
    pub mu: f64,
}

fn default_samples() -> usize {
    64
}

impl CurveEntry {
    pub fn spec(&self) -> CurveSpec {
        CurveSpec {
            shape: self.shape.clone(),
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    /// Root bracket; defaults to `(-0.999 m, ceiling)`.
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            e_min: -0.9,
            e_max: 0.0,
            points: 19,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsParams {
    /// Also locate `E_gr` and check `E* ≤ E_gr`.
    pub solve: bool,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self { solve: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    /// Coupling at the reference scale.
    pub lambda: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tau_min: 0.5,
            tau_max: 2.0,
            points: 31,
        }
    }
}

fn default_mass() -> f64 {
    1.0
}

fn default_prescription() -> Prescription {
    Prescription::MinimalBoundState
}

/// Everything a run depends on. Task parameters live in per-task sections;
/// the subcommand picks which one is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub curves: Vec<CurveEntry>,
    #[serde(default = "default_prescription")]
    pub prescription: Prescription,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Heat-kernel bound constants; defaults depend on the manifold.
    #[serde(default)]
    pub bound_constants: Option<BoundConstants>,
    #[serde(default)]
    pub solve: SolveParams,
    #[serde(default)]
    pub scan: ScanParams,
    #[serde(default)]
    pub bounds: BoundsParams,
    #[serde(default)]
    pub flow: FlowParams,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunConfig {
    pub fn constants(&self) -> BoundConstants {
        self.bound_constants
            .unwrap_or_else(|| BoundConstants::for_manifold(&self.manifold))
    }

    pub fn family(&self) -> Result<CurveFamily, CliError> {
        let specs: Vec<CurveSpec> = self.curves.iter().map(CurveEntry::spec).collect();
        let mu = self.curves.iter().map(|c| c.mu).collect();
        build_family(&specs, &self.manifold, mu, self.mass).map_err(|e| invalid("curves", e))
    }

    /// Field-level checks; the family itself is validated when it is built.
    pub fn validate(&self) -> Result<(), CliError> {
        self.manifold.validate().map_err(|e| invalid("manifold", e))?;
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", format!("must be positive and finite, got {}", self.mass)));
        }
        if self.curves.is_empty() {
            return Err(invalid("curves", "at least one curve is required"));
        }
        for (i, c) in self.curves.iter().enumerate() {
            if c.samples < 4 {
                return Err(invalid(&format!("curves[{i}].samples"), format!("need at least 4, got {}", c.samples)));
            }
            if !(c.mu.abs() < self.mass) {
                return Err(invalid(&format!("curves[{i}].mu"), format!("{} outside (-m, m)", c.mu)));
            }
        }
        self.prescription.validate().map_err(|e| invalid("prescription", e))?;
        self.quadrature.validate().map_err(|e| invalid("quadrature", e))?;
        self.constants().validate().map_err(|e| invalid("bound_constants", e))?;
        Ok(())
    }

    /// Checks of the section the task reads.
    pub fn validate_task(&self, task: Task, family: &CurveFamily) -> Result<(), CliError> {
        let m = self.mass;
        let ceiling = self.prescription.energy_ceiling(family);
        match task {
            Task::Solve | Task::Bounds => {
                if let Some((lo, hi)) = self.solve.bracket {
                    if !(lo > -m && lo < hi && hi <= ceiling) {
                        return Err(invalid("solve.bracket", format!("need -m < lo < hi <= {ceiling}, got ({lo}, {hi})")));
                    }
                }
            }
            Task::Scan => {
                let s = &self.scan;
                if !(s.e_min > -m && s.e_min < s.e_max && s.e_max <= ceiling) {
                    return Err(invalid("scan", format!("need -m < e_min < e_max <= {ceiling}")));
                }
                if s.points < 2 {
                    return Err(invalid("scan.points", "need at least 2"));
                }
            }
            Task::Flow => {
                let f = &self.flow;
                if !(f.lambda > 0.0 && f.lambda.is_finite()) {
                    return Err(invalid("flow.lambda", format!("must be positive, got {}", f.lambda)));
                }
                if !(f.tau_min > 0.0 && f.tau_min < f.tau_max && f.tau_max.is_finite()) {
                    return Err(invalid("flow", "need 0 < tau_min < tau_max"));
                }
                if f.points < 2 {
                    return Err(invalid("flow.points", "need at least 2"));
                }
            }
            Task::Validate => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the resolved configuration.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses and validates a config document. Unknown keys are errors under
/// `strict` and warnings otherwise.
pub fn parse_config(text: &str, strict: bool) -> Result<(RunConfig, Vec<String>), CliError> {
    let mut ignored = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut track = |path: serde_ignored::Path| ignored.push(path.to_string());
    let tracked = serde_ignored::Deserializer::new(de, &mut track);
    let config: RunConfig = serde_path_to_error::deserialize(tracked).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "config".to_string() } else { path };
        invalid(&path, e.into_inner())
    })?;
    if strict && !ignored.is_empty() {
        return Err(invalid(&ignored[0], "unknown key"));
    }
    config.validate()?;
    config.family()?;
    let warnings = ignored.into_iter().map(|p| format!("{p}: unknown key ignored")).collect();
    Ok((config, warnings))
}
