//! Seeded random streams.
//!
//! Every replication owns two ChaCha8 streams keyed by
//! `(master_seed, replication)`: one consumed only by the environment's
//! latent loss draws, one consumed only by the learner. Changing a policy
//! therefore never perturbs the loss sequence the environment produces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ENV_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct ReplicationRng {
    pub env: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl ReplicationRng {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&replication.to_le_bytes());
        seed[16..].copy_from_slice(b"csb-replication\0");

        let mut env = ChaCha8Rng::from_seed(seed);
        env.set_stream(ENV_STREAM);
        let mut policy = ChaCha8Rng::from_seed(seed);
        policy.set_stream(POLICY_STREAM);
        Self { env, policy }
    }
}
