//! Experiment configuration, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable holding the default precision in bits.
pub const PRECISION_ENV: &str = "QPGORDON_PRECISION_BITS";
pub const DEFAULT_PRECISION_BITS: usize = 256;

/// Energies as an explicit list, a uniform grid, or a box eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Energies {
    List(Vec<f64>),
    Grid { min: f64, max: f64, count: usize },
    /// The middle eigenvalue of the box with half-width `q_k`.
    BoxMid { box_mid_k: usize },
}

impl Default for Energies {
    fn default() -> Self {
        Energies::List(vec![0.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscrepancySection {
    pub k_min: usize,
    pub k_max: usize,
    /// Random base phases drawn from the seed, on top of `phases`.
    pub random_phases: usize,
    /// Also check the Gordon grids `R_s` with `δ = ±‖q_k α‖`.
    pub gordon_grids: bool,
    /// Orbit points are certified to `10^-tolerance_digits`.
    pub tolerance_digits: u32,
}

impl Default for DiscrepancySection {
    fn default() -> Self {
        DiscrepancySection {
            k_min: 1,
            k_max: 10,
            random_phases: 20,
            gordon_grids: false,
            tolerance_digits: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationSection {
    pub b_max: f64,
    pub log_b: Vec<f64>,
    pub max_refinement: usize,
}

impl Default for VariationSection {
    fn default() -> Self {
        VariationSection {
            b_max: 64.0,
            log_b: vec![1.0, 2.0, 4.0, 8.0],
            max_refinement: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSection {
    pub n: usize,
    pub phase_count: usize,
    pub tolerance_digits: u32,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection {
            n: 1024,
            phase_count: 32,
            tolerance_digits: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformBoundSection {
    pub n_max: usize,
    pub phase_count: usize,
    /// Apply the Schrödinger factorization so unbounded potentials qualify.
    pub factorize: bool,
    pub tolerance_digits: u32,
}

impl Default for UniformBoundSection {
    fn default() -> Self {
        UniformBoundSection {
            n_max: 4096,
            phase_count: 512,
            factorize: true,
            tolerance_digits: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GordonSection {
    pub k_list: Vec<usize>,
    pub directions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_hat: Option<f64>,
    pub tolerance_digits: u32,
    pub lyapunov_n: usize,
    pub lyapunov_phases: usize,
}

impl Default for GordonSection {
    fn default() -> Self {
        GordonSection {
            k_list: vec![1, 2],
            directions: 360,
            beta_hat: None,
            l_hat: None,
            tolerance_digits: 70,
            lyapunov_n: 1024,
            lyapunov_phases: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub half_width: usize,
    pub eigen_tol: f64,
    pub lyapunov_n: usize,
    pub phase_count: usize,
    /// `L̂` below this is labelled subcritical.
    pub l_zero: f64,
    /// Smallest `k` entering `β̂ = max_{k ≥ k_min} log q_{k+1} / q_k`.
    pub beta_k_min: usize,
    pub tolerance_digits: u32,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            half_width: 200,
            eigen_tol: 1e-12,
            lyapunov_n: 1024,
            phase_count: 32,
            l_zero: 0.05,
            beta_k_min: 1,
            tolerance_digits: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub frequency: String,
    pub potential: String,
    /// Continued-fraction depth requested from the frequency.
    pub depth: usize,
    /// Exact phases, as decimals or `p/q`.
    pub phases: Vec<String>,
    pub energies: Energies,
    pub epsilon: f64,
    /// Falls back to the environment, then to 256.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<usize>,
    /// Digit budget for synthesized quotients and for enumerated `q`.
    pub q_budget_digits: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub discrepancy: DiscrepancySection,
    pub variation: VariationSection,
    pub lyapunov: LyapunovSection,
    pub uniform_bound: UniformBoundSection,
    pub gordon: GordonSection,
    pub spectrum: SpectrumSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            frequency: "surd:(sqrt(5)-1)/2".into(),
            potential: "cos:lambda=4".into(),
            depth: 200,
            phases: vec!["0".into()],
            energies: Energies::default(),
            epsilon: 0.1,
            precision_bits: None,
            q_budget_digits: 10_000,
            output_dir: PathBuf::from("qpgordon-out"),
            seed: 0,
            discrepancy: DiscrepancySection::default(),
            variation: VariationSection::default(),
            lyapunov: LyapunovSection::default(),
            uniform_bound: UniformBoundSection::default(),
            gordon: GordonSection::default(),
            spectrum: SpectrumSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The explicit setting, else the environment, else the default.
    pub fn precision(&self) -> CliResult<usize> {
        if let Some(b) = self.precision_bits {
            return Ok(b);
        }
        match std::env::var(PRECISION_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{PRECISION_ENV}={v:?} is not a bit count"))),
            Err(_) => Ok(DEFAULT_PRECISION_BITS),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.depth == 0 {
            return bad("depth must be positive");
        }
        if self.phases.is_empty() {
            return bad("at least one phase is required");
        }
        if let Energies::Grid { min, max, count } = self.energies {
            if count == 0 || !(min <= max) {
                return bad("energy grid needs min <= max and count >= 1");
            }
        }
        if self.gordon.k_list.is_empty() {
            return bad("gordon.k_list is empty");
        }
        if self.discrepancy.k_min > self.discrepancy.k_max {
            return bad("discrepancy.k_min exceeds k_max");
        }
        Ok(())
    }
}
