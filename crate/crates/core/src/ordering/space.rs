//! The miner's action model and the static structure the search walks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{AccountId, ContractId, TokenId};
use crate::state::State;
use crate::tx::{Action, Transaction};

/// Marker for a block boundary inside a candidate sequence.
pub const BREAK: u32 = u32::MAX;

/// Item indices into `mempool ++ templates`, with [`BREAK`] separating blocks.
pub type Candidate = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingSpace {
    pub mempool: Vec<Transaction>,
    #[serde(default)]
    pub templates: Vec<Transaction>,
    #[serde(default = "yes")]
    pub allow_reorder: bool,
    #[serde(default)]
    pub allow_censor: bool,
    #[serde(default)]
    pub allow_insert: bool,
    pub miner: AccountId,
    #[serde(default = "one")]
    pub k: u32,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

impl OrderingSpace {
    /// Only the given mempool order, nothing else.
    pub fn fixed(mempool: Vec<Transaction>, miner: impl Into<AccountId>) -> Self {
        OrderingSpace {
            mempool,
            templates: Vec::new(),
            allow_reorder: false,
            allow_censor: false,
            allow_insert: false,
            miner: miner.into(),
            k: 1,
        }
    }

    pub fn reorder_only(mempool: Vec<Transaction>, miner: impl Into<AccountId>) -> Self {
        OrderingSpace { allow_reorder: true, ..Self::fixed(mempool, miner) }
    }

    pub fn with_templates(mut self, templates: Vec<Transaction>) -> Self {
        self.templates = templates;
        self.allow_insert = true;
        self
    }

    pub fn censoring(mut self, on: bool) -> Self {
        self.allow_censor = on;
        self
    }

    pub fn n_items(&self) -> usize {
        self.mempool.len() + self.templates.len()
    }

    pub fn item(&self, i: u32) -> &Transaction {
        let i = i as usize;
        if i < self.mempool.len() {
            &self.mempool[i]
        } else {
            &self.templates[i - self.mempool.len()]
        }
    }

    pub fn is_template(&self, i: u32) -> bool {
        i as usize >= self.mempool.len()
    }

    pub fn has_alpha(&self) -> bool {
        self.allow_insert && self.templates.iter().any(Transaction::has_alpha)
    }

    /// Transaction ids of a candidate, with `"|"` at block boundaries.
    pub fn render(&self, cand: &[u32]) -> Vec<String> {
        cand.iter()
            .map(|&i| if i == BREAK { "|".to_string() } else { self.item(i).id.to_string() })
            .collect()
    }
}

/// How aggressively equivalent orderings are collapsed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    /// Every feasible sequence.
    None,
    /// Collapse orderings that provably reach the same state: adjacent
    /// transactions with disjoint footprints commute, and identical
    /// transactions are interchangeable.
    #[default]
    Exact,
    /// `Exact` plus treating same-direction swaps on one pool as commuting.
    /// Mirrors the path-independence shortcut; integer rounding makes it lossy.
    PathIndependence,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Resource {
    Contract(ContractId),
    Balance(AccountId, TokenId),
    BlockNumber,
}

#[derive(Default)]
struct Footprint {
    reads: BTreeSet<Resource>,
    writes: BTreeSet<Resource>,
}

impl Footprint {
    fn conflicts(&self, other: &Footprint) -> bool {
        self.writes.iter().any(|r| other.writes.contains(r) || other.reads.contains(r))
            || other.writes.iter().any(|r| self.reads.contains(r))
    }
}

fn footprint(state: Option<&State>, tx: &Transaction) -> Footprint {
    let mut fp = Footprint::default();
    fp.writes.insert(Resource::Contract(tx.venue.clone()));
    let contract = state.and_then(|s| s.contract(&tx.venue));
    let touch = |fp: &mut Footprint, t: &TokenId| {
        fp.writes.insert(Resource::Balance(tx.actor.clone(), t.clone()));
    };
    match contract {
        None => {
            // Unknown layout: conflict with everything touching the actor.
            touch(&mut fp, &TokenId::new("*"));
            fp.reads.insert(Resource::BlockNumber);
        }
        Some(c) => {
            use crate::contracts::{Contract, PriceSource};
            match c {
                Contract::Amm(p) => {
                    touch(&mut fp, &p.token_x);
                    touch(&mut fp, &p.token_y);
                }
                Contract::Maker(m) => {
                    touch(&mut fp, &m.loan_token);
                    touch(&mut fp, &m.collateral_token);
                    if let PriceSource::Pool { pool } = &m.price_source {
                        fp.reads.insert(Resource::Contract(pool.clone()));
                    }
                }
                Contract::Pricebet(b) => {
                    touch(&mut fp, &b.token);
                    if matches!(tx.action, Action::GetReward) {
                        fp.reads.insert(Resource::Contract(b.oracle.clone()));
                        fp.reads.insert(Resource::BlockNumber);
                    }
                }
            }
        }
    }
    // A wildcard balance collides with any balance of the same actor.
    if fp.writes.iter().any(|r| matches!(r, Resource::Balance(_, t) if t.as_str() == "*")) {
        fp.writes.insert(Resource::Contract(ContractId::new(format!("*actor:{}", tx.actor))));
    }
    fp
}

fn same_direction_swap(a: &Transaction, b: &Transaction) -> bool {
    match (&a.action, &b.action) {
        (Action::Swap { token_in: ta, .. }, Action::Swap { token_in: tb, .. }) => a.venue == b.venue && ta == tb,
        _ => false,
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ItemInfo {
    pub rank: u32,
    pub arrival: u32,
    /// Identical items that must be used before this one.
    pub twins_before: u64,
}

/// Static constraints compiled from an [`OrderingSpace`].
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub n_mempool: usize,
    pub items: Vec<ItemInfo>,
    /// `dep[i]` has bit `j` set when `i` and `j` must keep their relative order.
    pub dep: Vec<u64>,
    pub reorder: bool,
    pub censor: bool,
    pub k: u32,
    pub usable: u64,
    pub required: u64,
    pub pruning: Pruning,
}

pub const MAX_ITEMS: usize = 64;

fn bit(i: usize) -> u64 {
    1u64 << i
}

impl Plan {
    /// `state` supplies contract layouts for footprint analysis.
    pub fn new(space: &OrderingSpace, state: &State, pruning: Pruning) -> Plan {
        let n_mempool = space.mempool.len();
        let n_templates = space.templates.len();
        let n = n_mempool + n_templates;
        assert!(n <= MAX_ITEMS, "ordering space supports at most {MAX_ITEMS} transactions");
        let k = space.k.max(1);
        let txs: Vec<&Transaction> = (0..n as u32).map(|i| space.item(i)).collect();

        let items: Vec<ItemInfo> = (0..n)
            .map(|i| {
                // Templates rank ahead of mempool entries in the tie-break.
                let rank = if i >= n_mempool { (i - n_mempool) as u32 } else { (n_templates + i) as u32 };
                let template = i >= n_mempool;
                let mut twins_before = 0u64;
                if pruning != Pruning::None && (template || space.allow_reorder) {
                    for j in 0..i {
                        let same_class = (j >= n_mempool) == template;
                        let (a, b) = (txs[i], txs[j]);
                        if same_class && a.actor == b.actor && a.venue == b.venue && a.action == b.action && a.arrival == b.arrival {
                            twins_before |= bit(j);
                        }
                    }
                }
                ItemInfo { rank, arrival: txs[i].arrival, twins_before }
            })
            .collect();

        let fps: Vec<Footprint> = txs.iter().map(|t| footprint(Some(state), t)).collect();
        let mut dep = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let dependent = match pruning {
                    Pruning::None => true,
                    Pruning::Exact => i == j || fps[i].conflicts(&fps[j]),
                    Pruning::PathIndependence => {
                        i == j || (fps[i].conflicts(&fps[j]) && !same_direction_swap(txs[i], txs[j]))
                    }
                };
                let both_mempool = i < n_mempool && j < n_mempool;
                if dependent || (both_mempool && !space.allow_reorder) {
                    dep[i] |= bit(j);
                }
            }
        }

        let mut usable = 0u64;
        let mut required = 0u64;
        for (i, tx) in txs.iter().enumerate().take(n) {
            let template = i >= n_mempool;
            if tx.arrival >= k || (template && !space.allow_insert) {
                continue;
            }
            usable |= bit(i);
            if !template && !space.allow_censor {
                required |= bit(i);
            }
        }

        Plan {
            n_mempool,
            items,
            dep,
            reorder: space.allow_reorder,
            censor: space.allow_censor,
            k,
            usable,
            required,
            pruning,
        }
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn rank(&self, i: u32) -> u32 {
        if i == BREAK {
            u32::MAX
        } else {
            self.items[i as usize].rank
        }
    }

    pub fn is_terminal(&self, seq: &[u32], used: u64) -> bool {
        if seq.last() == Some(&BREAK) {
            return false;
        }
        self.censor || used & self.required == self.required
    }

    pub fn can_append(&self, seq: &[u32], used: u64, block: u32, i: usize) -> bool {
        let b = bit(i);
        if self.usable & b == 0 || used & b != 0 || self.items[i].arrival > block {
            return false;
        }
        if i < self.n_mempool && !self.reorder {
            let used_mempool = used & (bit(self.n_mempool) - 1);
            if used_mempool != 0 && (63 - used_mempool.leading_zeros() as usize) > i {
                return false;
            }
            if !self.censor {
                let before = (bit(i) - 1) & self.required;
                if before & !used != 0 {
                    return false;
                }
            }
        }
        if self.items[i].twins_before & !used != 0 {
            return false;
        }
        if self.pruning != Pruning::None {
            let rank = self.items[i].rank;
            for &j in seq.iter().rev() {
                if j == BREAK || self.dep[i] & bit(j as usize) != 0 {
                    break;
                }
                if self.items[j as usize].rank > rank {
                    return false;
                }
            }
        }
        true
    }

    pub fn can_break(&self, block: u32, used: u64) -> bool {
        block + 1 < self.k && self.usable & !used != 0
    }

    /// Lexicographic comparison of candidates by rank.
    pub fn cmp_key(&self, a: &[u32], b: &[u32]) -> std::cmp::Ordering {
        let ra = a.iter().map(|&i| self.rank(i));
        let rb = b.iter().map(|&i| self.rank(i));
        ra.cmp(rb)
    }

    /// Maps a feasible sequence to the representative the walk would produce.
    pub fn canonicalize(&self, seq: &[u32]) -> Candidate {
        let mut out = Vec::with_capacity(seq.len());
        for block in seq.split(|&i| i == BREAK) {
            let mut block: Vec<u32> = block.to_vec();
            if self.pruning != Pruning::None {
                self.rename_twins(&mut block, &out);
                block = self.lex_normal(&block);
            }
            out.extend(block);
            out.push(BREAK);
        }
        out.pop();
        out
    }

    fn rename_twins(&self, block: &mut [u32], earlier: &[u32]) {
        // Identical items take the lowest free index in order of appearance.
        let mut taken: u64 = earlier.iter().filter(|&&i| i != BREAK).fold(0, |m, &i| m | bit(i as usize));
        for slot in block.iter_mut() {
            let i = *slot as usize;
            let class = self.items[i].twins_before | bit(i) | self.twins_after(i);
            let pick = (0..self.n()).find(|&j| class & bit(j) != 0 && taken & bit(j) == 0).unwrap_or(i);
            taken |= bit(pick);
            *slot = pick as u32;
        }
    }

    fn twins_after(&self, i: usize) -> u64 {
        (i + 1..self.n()).filter(|&j| self.items[j].twins_before & bit(i) != 0).fold(0, |m, j| m | bit(j))
    }

    fn lex_normal(&self, block: &[u32]) -> Vec<u32> {
        let mut rest: Vec<u32> = block.to_vec();
        let mut out = Vec::with_capacity(block.len());
        while !rest.is_empty() {
            let mut best: Option<usize> = None;
            for (pos, &c) in rest.iter().enumerate() {
                let blocked = rest[..pos].iter().any(|&p| self.dep[c as usize] & bit(p as usize) != 0);
                if !blocked && best.is_none_or(|b| self.items[c as usize].rank < self.items[rest[b] as usize].rank) {
                    best = Some(pos);
                }
            }
            let pos = best.expect("first remaining element is always available");
            out.push(rest.remove(pos));
        }
        out
    }
}
