//! Replication streams.
//!
//! Every simulated draw uses ChaCha12 keyed by the run seed (expanded with
//! `SeedableRng::seed_from_u64`) and positioned on the 64-bit ChaCha stream
//! numbered by the replication index. Replication `r` therefore sees the same
//! numbers no matter how many replications run, in what order, or on which
//! thread.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

pub fn replication_rng(seed: u64, replication: u64) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}
