//! Shared fixtures for the benches.

use mevkit_core::corpus::{generate_corpus, CorpusParams};
use mevkit_core::scenario::Scenario;

/// First scenario of a fixed-seed corpus with `txs` swaps.
pub fn corpus_scenario(txs: usize) -> Scenario {
    generate_corpus(&CorpusParams::new(0xbe0c, 1, txs)).remove(0)
}
