//! JSON run configurations, one per command. Unknown keys are rejected.

use std::path::Path;

use free_stein::kernel_tensor::KernelSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub kernels: Vec<KernelSpec>,
    /// Each word lists kernel indices (0-based) of one product `F_{w_1} .. F_{w_r}`.
    pub words: Vec<Vec<usize>>,
    /// Also evaluate every word by the pairing sum and report the difference.
    #[serde(default)]
    pub check_pairings: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub kernels: Vec<KernelSpec>,
    /// Free Fisher information; enables the HSI and LSI columns.
    #[serde(default)]
    pub fisher: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn unit_interval() -> Vec<f64> {
    vec![0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreuerMajorConfig {
    #[serde(rename = "H")]
    pub h: f64,
    pub q: usize,
    #[serde(default = "unit_interval")]
    pub times: Vec<f64>,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub covariance: Vec<Vec<f64>>,
    /// Words of 0-based family indices.
    pub words: Vec<Vec<usize>>,
    pub n: usize,
    pub reps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// SHA-256 of the canonical JSON form of a parsed configuration.
pub fn digest<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configurations serialize");
    hex::encode(Sha256::digest(&bytes))
}
