use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How users are drawn at each step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// Independent draws from the arrival distribution.
    #[default]
    Iid,
    /// Uniformly random permutations of the population, one after another;
    /// every user appears once per pass.
    Permutation,
    /// A fixed user sequence, repeated cyclically.
    Scripted(Vec<usize>),
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Arrivals = 1,
    Outcomes = 2,
    Policy = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

fn stream(seed: u64, episode: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, episode));
    rng.set_stream(purpose as u64);
    rng
}

pub(crate) enum ArrivalStream {
    Iid { rng: ChaCha8Rng, dist: WeightedIndex<f64> },
    Permutation { rng: ChaCha8Rng, pass: Vec<usize>, pos: usize },
    Scripted { sequence: Vec<usize>, pos: usize },
}

impl ArrivalStream {
    pub(crate) fn next_user(&mut self) -> usize {
        match self {
            ArrivalStream::Iid { rng, dist } => dist.sample(rng),
            ArrivalStream::Permutation { rng, pass, pos } => {
                if *pos == pass.len() {
                    pass.shuffle(rng);
                    *pos = 0;
                }
                *pos += 1;
                pass[*pos - 1]
            }
            ArrivalStream::Scripted { sequence, pos } => {
                let user = sequence[*pos % sequence.len()];
                *pos += 1;
                user
            }
        }
    }
}

/// Independent random streams for one episode.
///
/// Arrivals and outcome draws do not depend on the policy's choices, so two
/// policies run with the same `(seed, episode)` see the same users and the
/// same per-step uniforms (common random numbers). Only the policy stream is
/// consumed by stochastic policies.
pub struct EpisodeStreams {
    pub(crate) arrivals: ArrivalStream,
    pub(crate) outcomes: ChaCha8Rng,
    pub(crate) policy: ChaCha8Rng,
}

impl EpisodeStreams {
    pub(crate) fn new(mode: &ArrivalMode, weights: &WeightedIndex<f64>, users: usize, seed: u64, episode: u64) -> Self {
        let arrival_rng = stream(seed, episode, Purpose::Arrivals);
        let arrivals = match mode {
            ArrivalMode::Iid => ArrivalStream::Iid { rng: arrival_rng, dist: weights.clone() },
            ArrivalMode::Permutation => {
                ArrivalStream::Permutation { rng: arrival_rng, pass: (0..users).collect(), pos: users }
            }
            ArrivalMode::Scripted(sequence) => ArrivalStream::Scripted { sequence: sequence.clone(), pos: 0 },
        };
        Self {
            arrivals,
            outcomes: stream(seed, episode, Purpose::Outcomes),
            policy: stream(seed, episode, Purpose::Policy),
        }
    }
}
