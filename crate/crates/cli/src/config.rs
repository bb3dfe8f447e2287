//! Experiment configuration: JSON file, `--set key=value` overrides, field
//! validation and the content hash stamped into every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use selfrepel::galerkin::Truncation;
use selfrepel::simulate::Scheme;
use selfrepel::SpectralModel64;

use crate::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
    pub frequencies: Vec<u32>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    /// Starting Hermite degree `D`.
    #[serde(rename = "D", alias = "d")]
    pub max_degree: u32,
    /// Starting Fourier window `J`.
    #[serde(rename = "J", alias = "j")]
    pub max_fourier: u32,
    /// Refinement stops before the degree would exceed this.
    pub refine_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub n_steps: usize,
    pub n_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub sigma_grid: Vec<f64>,
    /// Append `σ*(L)` to the σ grid of sweeps.
    pub include_sigma_star: bool,
    /// Circumference parameters of the galerkin and compare sweeps; empty
    /// means `model.L` only.
    pub l_grid: Vec<f64>,
    pub truncation: TruncationConfig,
    pub integrator: IntegratorSection,
    pub output: OutputConfig,
    /// Universal constant of the upper bound, never absorbed.
    pub c_universal: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                l: 1.0,
                frequencies: vec![1],
                coefficients: vec![1.0],
            },
            sigma_grid: vec![0.5, 1.0, 2.0],
            include_sigma_star: true,
            l_grid: Vec::new(),
            truncation: TruncationConfig {
                max_degree: 8,
                max_fourier: 8,
                refine_limit: 20,
            },
            integrator: IntegratorSection {
                dt: 1e-3,
                scheme: Scheme::StrangSplitting,
                seed: 1,
                n_steps: 1000,
                n_trajectories: 30_000,
            },
            output: OutputConfig {
                directory: PathBuf::from("selfrepel-out"),
                formats: vec!["csv".into(), "json".into()],
            },
            c_universal: 1.0,
        }
    }
}

/// Config file (or defaults), then each `--set` in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<ExperimentConfig> {
    let mut tree = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ValidationError(format!("cannot read config {}: {e}", p.display())))?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| ValidationError(format!("config {} is not valid JSON: {e}", p.display())))?;
            let mut base = serde_json::to_value(ExperimentConfig::default())?;
            merge(&mut base, user);
            base
        }
        None => serde_json::to_value(ExperimentConfig::default())?,
    };
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(tree).map_err(|e| ValidationError(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Recursive object merge; `patch` wins.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as JSON, falling back to a string.
fn apply_override(tree: &mut Value, spec: &str) -> anyhow::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ValidationError(format!("--set expects key=value, got {spec:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ValidationError(format!("--set {key}: {} is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(ValidationError(format!("--set: empty key in {spec:?}")).into())
}

fn field(name: &str, msg: impl std::fmt::Display) -> anyhow::Error {
    ValidationError(format!("{name}: {msg}")).into()
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let m = &self.model;
        if !(m.l > 0.0 && m.l.is_finite()) {
            return Err(field("model.L", format!("must be positive, got {}", m.l)));
        }
        if m.coefficients.is_empty() || m.frequencies.is_empty() {
            return Err(field("model.coefficients", "needs at least one frequency and coefficient"));
        }
        if m.coefficients.len() != m.frequencies.len() {
            return Err(field(
                "model.coefficients",
                format!("{} coefficients for {} frequencies", m.coefficients.len(), m.frequencies.len()),
            ));
        }
        if let Some(a) = m.coefficients.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(field("model.coefficients", format!("must be nonnegative, got {a}")));
        }
        if let Some(s) = self.sigma_grid.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(field("sigma_grid", format!("entries must be nonnegative, got {s}")));
        }
        if let Some(l) = self.l_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(field("l_grid", format!("entries must be positive, got {l}")));
        }
        SpectralModel64::torus(m.l, &m.frequencies, &m.coefficients).map_err(|e| field("model", e))?;
        let t = &self.truncation;
        if t.max_degree < 1 {
            return Err(field("truncation.D", "must be at least 1"));
        }
        let kmax = *m.frequencies.iter().max().unwrap();
        if t.max_fourier < kmax {
            return Err(field("truncation.J", format!("must be at least the largest frequency {kmax}")));
        }
        // convergence needs two consecutive refinements
        if t.refine_limit < t.max_degree + 4 {
            return Err(field("truncation.refine_limit", "must allow two refinements (at least D + 4)"));
        }
        let i = &self.integrator;
        if !(i.dt > 0.0 && i.dt.is_finite()) {
            return Err(field("integrator.dt", format!("must be positive, got {}", i.dt)));
        }
        if i.n_steps == 0 || i.n_trajectories == 0 {
            return Err(field("integrator", "n_steps and n_trajectories must be at least 1"));
        }
        if let Some(f) = self.output.formats.iter().find(|f| !matches!(f.as_str(), "csv" | "json")) {
            return Err(field("output.formats", format!("unknown format {f:?}; use csv and/or json")));
        }
        if !(self.c_universal > 0.0 && self.c_universal.is_finite()) {
            return Err(field("c_universal", "must be positive"));
        }
        Ok(())
    }

    pub fn model(&self) -> SpectralModel64 {
        self.model_at(self.model.l)
    }

    pub fn model_at(&self, l: f64) -> SpectralModel64 {
        SpectralModel64::torus(l, &self.model.frequencies, &self.model.coefficients).expect("validated")
    }

    pub fn l_values(&self) -> Vec<f64> {
        if self.l_grid.is_empty() {
            vec![self.model.l]
        } else {
            self.l_grid.clone()
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.truncation.max_degree, self.truncation.max_fourier)
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    /// SHA-256 of the canonical JSON, with the output directory blanked so
    /// that relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("serialisable");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
