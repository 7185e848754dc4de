//! Named, seeded random streams.
//!
//! Every stream is keyed by `(base_seed, replicate, role)`; the seed is the
//! first eight bytes (little endian) of
//! `SHA-256(base_seed_le ‖ replicate_le ‖ role_utf8)`. Roles for per-method
//! streams are suffixed with the method label, e.g. `model-noise/enkf`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used for every stochastic component.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    InitialEnsemble,
    ModelNoise,
    ObservationNoise,
    Resampling,
}

impl StreamRole {
    pub fn tag(self) -> &'static str {
        match self {
            StreamRole::InitialEnsemble => "initial-ensemble",
            StreamRole::ModelNoise => "model-noise",
            StreamRole::ObservationNoise => "observation-noise",
            StreamRole::Resampling => "resampling",
        }
    }
}

pub fn derive_seed(base_seed: u64, replicate: u64, role: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(replicate.to_le_bytes());
    hasher.update(role.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(base_seed: u64, replicate: u64, role: StreamRole) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base_seed, replicate, role.tag()))
}

pub fn method_stream(base_seed: u64, replicate: u64, role: StreamRole, method: &str) -> StreamRng {
    let tag = format!("{}/{}", role.tag(), method);
    StreamRng::seed_from_u64(derive_seed(base_seed, replicate, &tag))
}
