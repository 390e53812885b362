//! Scenario files: initial state, mempool, miner configuration, valuation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amount::{Amount, Ratio};
use crate::contracts::{Contract, PriceSource};
use crate::ids::{AccountId, ContractId, TokenId};
use crate::metrics::{BlockProbabilities, MinerModel, Valuation};
use crate::ordering::{OrderingSpace, SearchBudget};
use crate::state::{State, StateError, TokenInfo};
use crate::tx::{Action, Origin, Transaction};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{0} refers to unknown {1} {2}")]
    Dangling(String, &'static str, String),
    #[error("template {0} is not signed by the miner account")]
    ForeignTemplate(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceEntry {
    pub account: AccountId,
    pub token: TokenId,
    pub amount: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub account: AccountId,
    #[serde(default)]
    pub templates: Vec<Transaction>,
    #[serde(default = "yes")]
    pub allow_reorder: bool,
    #[serde(default)]
    pub allow_censor: bool,
    #[serde(default)]
    pub allow_insert: bool,
    #[serde(default = "one")]
    pub k: u32,
    /// Accounts whose gains count as the player's; defaults to the miner.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub players: Vec<AccountId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_fraction: Option<Ratio>,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaBounds {
    pub lo: Amount,
    pub hi: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewContract {
    pub id: ContractId,
    pub contract: Contract,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub tokens: Vec<TokenInfo>,
    #[serde(default)]
    pub balances: Vec<BalanceEntry>,
    #[serde(default)]
    pub contracts: BTreeMap<ContractId, Contract>,
    #[serde(default)]
    pub block_number: u64,
    #[serde(default)]
    pub mempool: Vec<Transaction>,
    pub miner: MinerConfig,
    #[serde(default)]
    pub valuation: Valuation,
    #[serde(default)]
    pub budget: SearchBudget,
    #[serde(default)]
    pub epsilon: Ratio,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_bounds: Option<AlphaBounds>,
    /// Contract whose deployment `compose-check` evaluates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_contract: Option<NewContract>,
    /// Account whose spread `spread` reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beneficiary: Option<AccountId>,
}

impl Scenario {
    pub fn new(tokens: Vec<TokenInfo>, miner: impl Into<AccountId>) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            tokens,
            balances: Vec::new(),
            contracts: BTreeMap::new(),
            block_number: 0,
            mempool: Vec::new(),
            miner: MinerConfig {
                account: miner.into(),
                templates: Vec::new(),
                allow_reorder: true,
                allow_censor: false,
                allow_insert: false,
                k: 1,
                players: Vec::new(),
                hash_fraction: None,
            },
            valuation: Valuation::primary_only(),
            budget: SearchBudget::default(),
            epsilon: Ratio::zero(),
            alpha_bounds: None,
            new_contract: None,
            beneficiary: None,
        }
    }

    pub fn fund(&mut self, account: &str, token: &str, amount: Amount) {
        self.balances.push(BalanceEntry { account: account.into(), token: token.into(), amount });
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(self.schema_version));
        }
        let state = self.state()?;
        let known_token = |t: &TokenId| state.token(t).is_some();
        for (id, c) in &self.contracts {
            let tokens: Vec<&TokenId> = match c {
                Contract::Amm(p) => vec![&p.token_x, &p.token_y],
                Contract::Maker(m) => {
                    if let PriceSource::Pool { pool } = &m.price_source {
                        if !matches!(self.contracts.get(pool), Some(Contract::Amm(_))) {
                            return Err(ScenarioError::Dangling(id.to_string(), "pool", pool.to_string()));
                        }
                    }
                    vec![&m.loan_token, &m.collateral_token]
                }
                Contract::Pricebet(b) => {
                    let oracle_known = matches!(self.contracts.get(&b.oracle), Some(Contract::Amm(_)))
                        || self.new_contract.as_ref().is_some_and(|n| n.id == b.oracle);
                    if !oracle_known {
                        return Err(ScenarioError::Dangling(id.to_string(), "pool", b.oracle.to_string()));
                    }
                    vec![&b.token]
                }
            };
            if let Some(t) = tokens.into_iter().find(|t| !known_token(t)) {
                return Err(ScenarioError::Dangling(id.to_string(), "token", t.to_string()));
            }
        }
        let extra = self.new_contract.as_ref().map(|n| &n.id);
        for tx in self.mempool.iter().chain(&self.miner.templates) {
            if !self.contracts.contains_key(&tx.venue) && Some(&tx.venue) != extra {
                return Err(ScenarioError::Dangling(tx.id.to_string(), "venue", tx.venue.to_string()));
            }
            let token = match &tx.action {
                Action::Swap { token_in, .. } => Some(token_in),
                Action::SwapForExact { token_out, .. } => Some(token_out),
                _ => None,
            };
            if let Some(t) = token.filter(|t| !known_token(t)) {
                return Err(ScenarioError::Dangling(tx.id.to_string(), "token", t.to_string()));
            }
        }
        for t in &self.miner.templates {
            if t.actor != self.miner.account {
                return Err(ScenarioError::ForeignTemplate(t.id.to_string()));
            }
        }
        Ok(())
    }

    pub fn state(&self) -> Result<State, ScenarioError> {
        let mut state = State::new(self.tokens.clone())?;
        state.block_number = self.block_number;
        for b in &self.balances {
            if state.token(&b.token).is_none() {
                return Err(StateError::UnknownToken(b.token.clone()).into());
            }
            let cur = state.balance(&b.account, &b.token);
            state.set_balance(&b.account, &b.token, cur.checked_add(b.amount).unwrap_or(Amount::MAX));
        }
        for (id, c) in &self.contracts {
            state.deploy(id.clone(), c.clone())?;
        }
        Ok(state)
    }

    pub fn space(&self) -> OrderingSpace {
        let templates = self
            .miner
            .templates
            .iter()
            .map(|t| Transaction { origin: Origin::MinerTemplate, ..t.clone() })
            .collect();
        OrderingSpace {
            mempool: self.mempool.clone(),
            templates,
            allow_reorder: self.miner.allow_reorder,
            allow_censor: self.miner.allow_censor,
            allow_insert: self.miner.allow_insert,
            miner: self.miner.account.clone(),
            k: self.miner.k,
        }
    }

    /// The configured budget with `alpha_bounds` applied.
    pub fn search_budget(&self) -> SearchBudget {
        let mut b = self.budget.clone();
        if let Some(ab) = &self.alpha_bounds {
            b.alpha.lo = Some(ab.lo);
            b.alpha.hi = Some(ab.hi);
        }
        b
    }

    pub fn players(&self) -> Vec<AccountId> {
        if self.miner.players.is_empty() {
            vec![self.miner.account.clone()]
        } else {
            self.miner.players.clone()
        }
    }

    pub fn miner_model(&self) -> MinerModel {
        let blocks = match &self.miner.hash_fraction {
            Some(f) => BlockProbabilities::Geometric { f: f.clone() },
            None => BlockProbabilities::Explicit { p: vec![Ratio::one()] },
        };
        MinerModel { players: self.players(), blocks, increment: None, mining_cost: None }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_json(&text)
}

pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let mut text = scenario.to_json();
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}
