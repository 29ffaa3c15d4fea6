//! Counter-based random streams.
//!
//! Every estimator draws from ChaCha12 keyed by the user seed. The 64-bit stream
//! id is `(operation tag << 40) | chunk index`, so each (operation, replicate chunk)
//! pair owns an independent keystream and the draws of a chunk never depend on which
//! thread produced the chunk before it.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::par::{map_range, Execution};

/// Draws per replicate chunk. Fixed so that chunk boundaries never move with `N`.
pub const CHUNK: usize = 4096;

/// Stream tags, one per operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sample = 1,
    Orthant = 2,
    Puod = 3,
    Spuod = 4,
    Survival = 5,
    NegativeExponent = 6,
    CorrelationInequality = 7,
    /// Random covariance families in the scanner; one stream per instance.
    Scan = 8,
}

pub fn stream_rng(seed: u64, op: Stream, chunk: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((op as u64) << 40) | chunk as u64);
    rng
}

/// Runs `f` once per chunk of `0..n` and returns the per-chunk results in chunk
/// order. Reductions over the result are therefore thread-count independent.
pub fn run_chunks<A, F>(exec: Execution, n: usize, seed: u64, op: Stream, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha12Rng, Range<usize>) -> A + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_range(exec, chunks, |c| {
        let mut rng = stream_rng(seed, op, c);
        f(&mut rng, c * CHUNK..((c + 1) * CHUNK).min(n))
    })
}

/// Folds per-chunk accumulators into `init` strictly in chunk order. Chunks are
/// computed in bounded batches so memory does not grow with `n`.
pub fn reduce_chunks<A, F, M>(
    exec: Execution,
    n: usize,
    seed: u64,
    op: Stream,
    init: A,
    f: F,
    mut merge: M,
) -> A
where
    A: Send,
    F: Fn(&mut ChaCha12Rng, Range<usize>) -> A + Sync + Send,
    M: FnMut(&mut A, A),
{
    const BATCH: usize = 64;
    let chunks = n.div_ceil(CHUNK);
    let mut acc = init;
    let mut start = 0;
    while start < chunks {
        let end = (start + BATCH).min(chunks);
        let parts = map_range(exec, end - start, |k| {
            let c = start + k;
            let mut rng = stream_rng(seed, op, c);
            f(&mut rng, c * CHUNK..((c + 1) * CHUNK).min(n))
        });
        for part in parts {
            merge(&mut acc, part);
        }
        start = end;
    }
    acc
}
