//! Which orderings a miner may choose, and the search over them.

mod search;
mod space;

pub use search::{
    canonicalize, count_candidates, enumerate, enumerate_task, evaluate_candidate, is_canonical, partition, search,
    search_greedy_blocks, BlockResult, EvReport, MultiBlockReport, SearchBudget, SearchMode, Task, Witness,
};
pub use space::{Candidate, OrderingSpace, Pruning, BREAK, MAX_ITEMS};

use crate::amount::Value;
use crate::state::State;

/// Scores a final state.
pub trait Objective: Sync {
    fn value(&self, state: &State) -> Value;
}

impl<F: Fn(&State) -> Value + Sync> Objective for F {
    fn value(&self, state: &State) -> Value {
        self(state)
    }
}
