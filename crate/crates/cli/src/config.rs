//! Experiment configuration: the JSON file format, flag overrides and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use diffapprox::model::ModelParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_GRID_POINTS: usize = 1000;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_EPS_LADDER: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
pub const DEFAULT_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Contents of a configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub d: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub mu0: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub n: Option<u64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub grid_points: Option<usize>,
    pub h: Option<f64>,
    #[serde(rename = "M")]
    pub replicas: Option<usize>,
    pub master_seed: Option<u64>,
    pub n_list: Option<Vec<u64>>,
    pub gamma: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub q0: Option<Vec<u64>>,
    pub eps_ladder: Option<Vec<f64>>,
    pub krylov_radius: Option<f64>,
    pub plateau_radius: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub fluid_q0: Option<Vec<f64>>,
    pub summarize: Option<bool>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub grid_points: Option<usize>,
    pub step: Option<f64>,
    pub n_list: Option<Vec<u64>>,
    pub gamma: Option<f64>,
    pub eps_ladder: Option<Vec<f64>>,
}

/// Fully validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub mu0: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub n: u64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub grid_points: usize,
    pub h: f64,
    #[serde(rename = "M")]
    pub replicas: usize,
    pub master_seed: u64,
    pub n_list: Vec<u64>,
    pub gamma: Option<f64>,
    pub x0: Vec<f64>,
    pub q0: Option<Vec<u64>>,
    pub eps_ladder: Vec<f64>,
    pub krylov_radius: f64,
    pub plateau_radius: f64,
    pub beta: Option<Vec<f64>>,
    pub fluid_q0: Option<Vec<f64>>,
    pub summarize: bool,
    pub format: OutputFormat,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing required field `{field}`"))
}

fn invalid(field: &str, why: impl fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{field}`: {why}"))
}

fn check_len(field: &str, v: &[impl Sized], d: usize) -> Result<(), CliError> {
    if v.len() == d {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("expected {d} entries, got {}", v.len()),
        ))
    }
}

fn check_finite(field: &str, v: &[f64]) -> Result<(), CliError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(invalid(&format!("{field}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides and defaults, then validates every field.
    pub fn resolve(self, over: Overrides) -> Result<ExperimentConfig, CliError> {
        let d = self.d.ok_or_else(|| missing("d"))?;
        if d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
        check_len("alpha", &alpha, d)?;
        for (i, &a) in alpha.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid(
                    &format!("alpha[{i}]"),
                    format!("must be positive, got {a}"),
                ));
            }
        }
        let mu0 = self.mu0.ok_or_else(|| missing("mu0"))?;
        if !(mu0 >= 0.0 && mu0.is_finite()) {
            return Err(invalid("mu0", format!("must be nonnegative, got {mu0}")));
        }
        let mu = self.mu.ok_or_else(|| missing("mu"))?;
        check_len("mu", &mu, d)?;
        for (i, &m) in mu.iter().enumerate() {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(invalid(
                    &format!("mu[{i}]"),
                    format!("must be nonnegative, got {m}"),
                ));
            }
        }
        let nu = self.nu.ok_or_else(|| missing("nu"))?;
        check_len("nu", &nu, d)?;
        check_finite("nu", &nu)?;
        let n = self.n.ok_or_else(|| missing("n"))?;
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let horizon = self.horizon.ok_or_else(|| missing("T"))?;
        check_positive("T", horizon)?;

        let grid_points = over
            .grid_points
            .or(self.grid_points)
            .unwrap_or(DEFAULT_GRID_POINTS);
        if grid_points == 0 {
            return Err(invalid("grid_points", "must be at least 1"));
        }
        let h = over.step.or(self.h).unwrap_or(DEFAULT_STEP);
        check_positive("h", h)?;
        if h > horizon {
            return Err(invalid("h", format!("step {h} exceeds T = {horizon}")));
        }
        let replicas = over.replicas.or(self.replicas).unwrap_or(DEFAULT_REPLICAS);
        if replicas == 0 {
            return Err(invalid("M", "must be at least 1"));
        }
        let n_list = over.n_list.or(self.n_list).unwrap_or_default();
        if let Some(i) = n_list.iter().position(|&v| v == 0) {
            return Err(invalid(&format!("n_list[{i}]"), "must be at least 1"));
        }
        let gamma = over.gamma.or(self.gamma);
        if let Some(g) = gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(invalid("gamma", format!("must be nonnegative, got {g}")));
            }
        }
        let x0 = self.x0.unwrap_or_else(|| vec![0.0; d]);
        check_len("x0", &x0, d)?;
        check_finite("x0", &x0)?;
        if let Some(q0) = &self.q0 {
            check_len("q0", q0, d)?;
        }
        let eps_ladder = over
            .eps_ladder
            .or(self.eps_ladder)
            .unwrap_or_else(|| DEFAULT_EPS_LADDER.to_vec());
        if eps_ladder.is_empty() {
            return Err(invalid("eps_ladder", "must not be empty"));
        }
        for (i, &e) in eps_ladder.iter().enumerate() {
            check_positive(&format!("eps_ladder[{i}]"), e)?;
        }
        let krylov_radius = self.krylov_radius.unwrap_or(DEFAULT_RADIUS);
        check_positive("krylov_radius", krylov_radius)?;
        let plateau_radius = self.plateau_radius.unwrap_or(DEFAULT_RADIUS);
        check_positive("plateau_radius", plateau_radius)?;
        if let Some(beta) = &self.beta {
            check_len("beta", beta, d)?;
            check_finite("beta", beta)?;
            if let Some(i) = beta.iter().position(|&b| b < 0.0) {
                return Err(invalid(&format!("beta[{i}]"), "must be nonnegative"));
            }
        }
        if let Some(fq) = &self.fluid_q0 {
            check_len("fluid_q0", fq, d)?;
            check_finite("fluid_q0", fq)?;
        }
        Ok(ExperimentConfig {
            d,
            alpha,
            mu0,
            mu,
            nu,
            n,
            horizon,
            grid_points,
            h,
            replicas,
            master_seed: over.seed.or(self.master_seed).unwrap_or(0),
            n_list,
            gamma,
            x0,
            q0: self.q0,
            eps_ladder,
            krylov_radius,
            plateau_radius,
            beta: self.beta,
            fluid_q0: self.fluid_q0,
            summarize: self.summarize.unwrap_or(false),
            format: over.format.or(self.format).unwrap_or_default(),
            out: over.out.or(self.out),
        })
    }
}

impl ExperimentConfig {
    pub fn model(&self) -> ModelParams<f64> {
        self.model_at(self.n)
    }

    pub fn model_at(&self, n: u64) -> ModelParams<f64> {
        ModelParams {
            d: self.d,
            alpha: self.alpha.clone(),
            mu0: self.mu0,
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            n,
        }
    }

    /// Hex SHA-256 (first 16 bytes) of the canonical JSON of the resolved
    /// configuration, excluding the output path.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        hash[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}
