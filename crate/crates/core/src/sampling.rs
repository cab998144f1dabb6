//! Invariant-measure sampling and deterministic random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::billiard_map::PhasePoint;
use crate::exec::Execution;
use crate::geometry::LemonTable;
use crate::induced_maps::{advance_to_m, return_step, ReturnStep};

/// Steps allowed when iterating from a random point to `M`.
pub const ADVANCE_CAP: u64 = 100_000;
/// Blocks drawn from one random stream when sampling in parallel.
pub const CHUNK: usize = 1024;

/// Independent streams keyed by a purpose tag and an index.
pub mod domain {
    pub const BLOCKS: u64 = 1;
    pub const LYAPUNOV: u64 = 2;
    pub const SCAN: u64 = 3;
    pub const ORBIT: u64 = 4;
}

/// Generator for task `index` of kind `domain` under `master`.
pub fn stream_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((domain << 48) ^ index);
    rng
}

/// Draws from `μ ∝ cos φ ds dφ`.
pub fn mu_sample(table: &LemonTable, rng: &mut impl Rng) -> PhasePoint {
    let s = rng.random_range(0.0..table.len_gamma());
    let phi = (2.0 * rng.random::<f64>() - 1.0).asin();
    PhasePoint::on_table(table, s, phi)
}

/// A return block together with the point of `M` it starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSample {
    pub start: PhasePoint,
    pub step: ReturnStep,
}

#[derive(Debug, Clone, Default)]
pub struct BlockBatch {
    pub blocks: Vec<BlockSample>,
    /// Draws discarded because the orbit hit a singularity or the cap.
    pub singular: u64,
}

/// One block started from a fresh `μ`-random point; `None` on singular draws.
pub fn sample_block(table: &LemonTable, rng: &mut impl Rng) -> Option<BlockSample> {
    let x = mu_sample(table, rng);
    let start = advance_to_m(table, &x, ADVANCE_CAP).ok()?;
    let step = return_step(table, &start, |_| {}).ok()?;
    Some(BlockSample { start, step })
}

/// Draws `count` blocks from `rng`, giving up after `10·count + 100` draws.
pub fn sample_blocks_seq(table: &LemonTable, count: usize, rng: &mut impl Rng) -> BlockBatch {
    let mut out = BlockBatch::default();
    let max_draws = 10 * count as u64 + 100;
    let mut draws = 0;
    while out.blocks.len() < count && draws < max_draws {
        draws += 1;
        match sample_block(table, rng) {
            Some(b) => out.blocks.push(b),
            None => out.singular += 1,
        }
    }
    out
}

/// `count` blocks split into chunks of [`CHUNK`], one stream per chunk.
pub fn sample_blocks(table: &LemonTable, count: usize, master: u64, exec: &Execution) -> BlockBatch {
    let chunks = count.div_ceil(CHUNK);
    let parts = exec.map(chunks, |c| {
        let n = CHUNK.min(count - c * CHUNK);
        let mut rng = stream_rng(master, domain::BLOCKS, c as u64);
        sample_blocks_seq(table, n, &mut rng)
    });
    let mut out = BlockBatch::default();
    for p in parts {
        out.blocks.extend(p.blocks);
        out.singular += p.singular;
    }
    out
}
