use peerfed_core::{Executor, Peer};
use rayon::prelude::*;

/// Runs peers on the current rayon pool. Results come back in peer order and
/// every peer owns its RNG stream, so output matches [`peerfed_core::Sequential`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map_peers<T, F>(&self, peers: &mut [Peer], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut Peer) -> T + Sync + Send,
    {
        peers.par_iter_mut().map(f).collect()
    }
}
