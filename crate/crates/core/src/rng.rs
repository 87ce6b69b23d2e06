//! Counter-based random streams.
//!
//! Every draw in a simulation comes from a ChaCha stream selected by
//! `(seed, purpose)` for the key and `(agent, round)` for the stream id, so
//! adding or removing a consumer never shifts another consumer's numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Each purpose gets its own key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Perturbation directions of the gradient estimators.
    Perturbation,
    /// The Bernoulli coin of the moving target.
    TargetCoin,
    /// Per-(agent, round) loss noise.
    LossNoise,
    /// Initial decisions.
    Initialization,
    /// Anything test- or verification-only.
    Auxiliary,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Perturbation => 0x7065_7274,
            Purpose::TargetCoin => 0x636f_696e,
            Purpose::LossNoise => 0x6e6f_6973,
            Purpose::Initialization => 0x696e_6974,
            Purpose::Auxiliary => 0x6175_7869,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns the generator keyed by `(seed, purpose)` positioned on stream
/// `(agent, round)`.
pub fn keyed_stream(seed: u64, purpose: Purpose, agent: usize, round: usize) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(purpose.tag()));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let stream = ((agent as u64) << 32) | (round as u64 & 0xffff_ffff);
    rng.set_stream(stream);
    rng
}
