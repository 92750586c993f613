use serde::Serialize;
use sha2::{Digest, Sha256};

use embclust_core::embedspace::PipelineConfig;

/// Seed used throughout the parameter search.
pub const SEARCH_SEED: u64 = 100;
/// Seed used for final runs.
pub const FINAL_SEED: u64 = 1;

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Per-cell generator seed derived from the global seed and the
/// (encoder, dataset) key. Clusterers of one cell share it, so they also
/// share the reduced embeddings.
pub fn cell_seed(global: u64, encoder: &str, dataset: &str) -> u64 {
    let key = format!("{global}\u{1f}{encoder}\u{1f}{dataset}");
    let d = digest(key.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// First 16 hex digits of the SHA-256 of the config's canonical JSON.
pub fn config_hash(config: &PipelineConfig) -> String {
    hash_json(config)
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    digest(text.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
