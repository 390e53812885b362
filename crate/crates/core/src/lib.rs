//! Maximal extractable value over a small DeFi model: contract semantics,
//! ordering search, value metrics and composability checks.

pub mod amount;
pub mod compose;
pub mod contracts;
pub mod corpus;
pub mod eventlog;
pub mod ids;
pub mod insertion;
pub mod metrics;
pub mod ordering;
pub mod presets;
pub mod scenario;
pub mod state;
pub mod tx;

pub use amount::{Amount, Ratio, Value};
pub use contracts::{AmmPool, Contract, MakerBook, PricebetRecord, Reject};
pub use ids::{AccountId, ContractId, TokenId, TxId};
pub use ordering::{EvReport, Objective, OrderingSpace, Pruning, SearchBudget, SearchMode};
pub use state::{apply_sequence, apply_tx, ApplyMode, State, TokenInfo, TxError};
pub use tx::{Action, Block, Origin, Qty, Transaction};
