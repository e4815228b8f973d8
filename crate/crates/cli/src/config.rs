use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nonlocal_core::grid::GridSpec;
use nonlocal_core::kernel::{builtin_kernels, KernelConfig};
use nonlocal_core::solver_elliptic::HomotopyConfig;
use nonlocal_core::solver_parabolic::TimeScheme;
use nonlocal_core::symbol::SymbolQuadrature;

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Vec<usize>,
    /// Side lengths; unit box when omitted.
    #[serde(default)]
    pub box_len: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec, Failure> {
        let len = self.box_len.clone().unwrap_or_else(|| vec![1.0; self.n.len()]);
        GridSpec::new(&self.n, &len).map_err(Failure::config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub quadrature: SymbolQuadrature,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllipticMethod {
    #[default]
    Direct,
    Homotopy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticConfig {
    pub kernel: KernelConfig,
    pub lambda: f64,
    #[serde(default)]
    pub method: EllipticMethod,
    #[serde(default)]
    pub homotopy: HomotopyConfig,
    #[serde(default)]
    pub quadrature: SymbolQuadrature,
    /// Grid of the synthesized right-hand side when no input file is given.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingKind {
    /// The input (or synthesized) field, held constant in time.
    #[default]
    Constant,
    /// Synthesized `G₀ + cos(2πt/T + φ)G₁`.
    Oscillating,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicConfig {
    pub kernel: KernelConfig,
    pub lambda: f64,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: TimeScheme,
    #[serde(default)]
    pub forcing: ForcingKind,
    #[serde(default)]
    pub quadrature: SymbolQuadrature,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub kernel: KernelConfig,
    pub sizes: Vec<usize>,
    pub lambda: f64,
    pub steps: usize,
    pub quadrature: SymbolQuadrature,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let kernel = builtin_kernels(2, 0.5)
            .expect("built-in kernels are valid")
            .into_iter()
            .find(|(n, _)| n == "harmonic-4")
            .map(|(_, k)| k.config())
            .expect("harmonic-4 is built in");
        BenchConfig {
            kernel,
            sizes: vec![32, 64, 128],
            lambda: 1.0,
            steps: 16,
            quadrature: SymbolQuadrature::default(),
            seed: default_seed(),
        }
    }
}

fn default_seed() -> u64 {
    nonlocal_core::norms::EnsembleConfig::default().seed
}

fn default_scheme() -> TimeScheme {
    TimeScheme::ExponentialEuler
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::Io)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(Failure::Config)
}

/// SHA-256 of the canonical serialization of a parsed config.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configs serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
