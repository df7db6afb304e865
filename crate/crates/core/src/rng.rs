//! Seeded random substreams.
//!
//! Every structural random choice (graph edges, task data, shard assignment,
//! model initialization, batch draws, placement) pulls from its own ChaCha8
//! stream keyed by the master seed. The stream id packs a purpose tag into the
//! top byte and a caller-chosen index into the remaining 56 bits, so adding a
//! new consumer never shifts the draws seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for the independent substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Graph = 1,
    TaskData = 2,
    Partition = 3,
    Init = 4,
    Batch = 5,
    Placement = 6,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

/// ChaCha8 generator for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & INDEX_MASK));
    rng
}

/// Index for per-node, per-epoch draws.
pub fn node_epoch_index(node: usize, epoch: usize) -> u64 {
    ((node as u64) << 32) | (epoch as u64 & 0xffff_ffff)
}
