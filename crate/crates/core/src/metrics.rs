//! EV, k-MEV, WMEV and the b_h - b_l spread.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::amount::{value_serde, Ratio, Value};
use crate::ids::{AccountId, TokenId};
use crate::ordering::{search, search_greedy_blocks, EvReport, OrderingSpace, SearchBudget, Witness};
use crate::state::State;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationMode {
    PrimaryOnly,
    #[default]
    OraclePriced,
}

/// Prices in primary-token base units per base unit of each token.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valuation {
    #[serde(default)]
    pub mode: ValuationMode,
    #[serde(default)]
    pub reference_prices: BTreeMap<TokenId, Ratio>,
}

impl Valuation {
    pub fn primary_only() -> Self {
        Valuation { mode: ValuationMode::PrimaryOnly, reference_prices: BTreeMap::new() }
    }

    pub fn priced(prices: impl IntoIterator<Item = (TokenId, Ratio)>) -> Self {
        Valuation { mode: ValuationMode::OraclePriced, reference_prices: prices.into_iter().collect() }
    }

    /// `None` for tokens that carry no value under this valuation.
    pub fn price(&self, state: &State, token: &TokenId) -> Option<BigRational> {
        if token == state.primary() {
            return Some(BigRational::one());
        }
        match self.mode {
            ValuationMode::PrimaryOnly => None,
            ValuationMode::OraclePriced => self.reference_prices.get(token).map(|r| r.0.clone()),
        }
    }

    fn priced_tokens<'s>(&self, state: &'s State) -> Vec<(&'s TokenId, BigRational)> {
        state.tokens().iter().filter_map(|t| self.price(state, &t.id).map(|p| (&t.id, p))).collect()
    }

    pub fn account_value(&self, state: &State, accounts: &[AccountId]) -> Value {
        self.prepared(state).account_value(state, accounts)
    }

    /// Prices resolved once, for repeated evaluation against one token set.
    pub fn prepared(&self, state: &State) -> PreparedValuation {
        let prices = self
            .priced_tokens(state)
            .into_iter()
            .map(|(t, p)| (t.clone(), p.numer().clone(), p.denom().clone()))
            .collect();
        PreparedValuation { prices }
    }

    /// Sum over tokens of `floor(price * delta)` between two states.
    pub fn delta_value(&self, before: &State, after: &State, accounts: &[AccountId]) -> Value {
        self.prepared(before).delta_value(before, after, accounts)
    }
}

#[derive(Clone, Debug)]
pub struct PreparedValuation {
    prices: Vec<(TokenId, BigInt, BigInt)>,
}

impl PreparedValuation {
    pub fn account_value(&self, state: &State, accounts: &[AccountId]) -> Value {
        let mut total = Value::zero();
        for (token, num, den) in &self.prices {
            let held: BigInt = accounts.iter().map(|a| state.balance(a, token).to_value()).sum();
            total += (held * num).div_floor(den);
        }
        total
    }

    pub fn delta_value(&self, before: &State, after: &State, accounts: &[AccountId]) -> Value {
        let mut total = Value::zero();
        for (token, num, den) in &self.prices {
            let delta: BigInt = accounts
                .iter()
                .map(|a| after.balance(a, token).to_value() - before.balance(a, token).to_value())
                .sum();
            if !delta.is_zero() {
                total += (delta * num).div_floor(den);
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockProbabilities {
    /// `p_k = f^k (1 - f)`.
    Geometric { f: Ratio },
    Explicit { p: Vec<Ratio> },
}

impl BlockProbabilities {
    pub fn p(&self, k: usize) -> BigRational {
        match self {
            BlockProbabilities::Geometric { f } => {
                let f = &f.0;
                num_traits::pow(f.clone(), k) * (BigRational::one() - f)
            }
            BlockProbabilities::Explicit { p } => p.get(k.wrapping_sub(1)).map(|r| r.0.clone()).unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerModel {
    pub players: Vec<AccountId>,
    pub blocks: BlockProbabilities,
    /// Per-block increment `m` of the constant-increment model.
    #[serde(default, with = "value_serde::option", skip_serializing_if = "Option::is_none")]
    pub increment: Option<Value>,
    /// Reported alongside, never subtracted from EV.
    #[serde(default, with = "value_serde::option", skip_serializing_if = "Option::is_none")]
    pub mining_cost: Option<Value>,
}

impl MinerModel {
    pub fn single(player: impl Into<AccountId>) -> Self {
        MinerModel {
            players: vec![player.into()],
            blocks: BlockProbabilities::Explicit { p: vec![Ratio::one()] },
            increment: None,
            mining_cost: None,
        }
    }

    pub fn geometric(player: impl Into<AccountId>, f: Ratio) -> Self {
        MinerModel { blocks: BlockProbabilities::Geometric { f }, ..Self::single(player) }
    }
}

/// Valued balance change of `players` relative to `initial`.
pub fn player_objective<'a>(
    initial: &'a State,
    players: &'a [AccountId],
    valuation: &'a Valuation,
) -> impl Fn(&State) -> Value + Sync + 'a {
    let prepared = valuation.prepared(initial);
    move |s: &State| prepared.delta_value(initial, s, players)
}

pub fn ev(model: &MinerModel, state: &State, space: &OrderingSpace, valuation: &Valuation, budget: &SearchBudget) -> EvReport {
    let objective = player_objective(state, &model.players, valuation);
    search(state, space, &objective, budget)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiBlockStrategy {
    #[default]
    Greedy,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMevReport {
    pub k: u32,
    /// Entry `j` is the value reached with `j + 1` blocks.
    #[serde(with = "value_vec")]
    pub series: Vec<Value>,
    pub best: Option<Witness>,
    pub paths_explored: u64,
    pub exhaustive: bool,
}

impl KMevReport {
    pub fn value(&self) -> Value {
        self.series.last().cloned().unwrap_or_default()
    }
}

mod value_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::amount::Value;

    pub fn serialize<S: Serializer>(v: &[Value], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Value>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// EV over `k` consecutive blocks.
pub fn k_mev(
    model: &MinerModel,
    state: &State,
    space: &OrderingSpace,
    k: u32,
    valuation: &Valuation,
    budget: &SearchBudget,
    strategy: MultiBlockStrategy,
) -> KMevReport {
    let k = k.max(1);
    let space = OrderingSpace { k, ..space.clone() };
    let objective = player_objective(state, &model.players, valuation);
    match strategy {
        MultiBlockStrategy::Exact => {
            let rep = search(state, &space, &objective, budget);
            let v = rep.best.as_ref().map(|w| w.value.clone()).unwrap_or_default();
            KMevReport { k, series: vec![v], best: rep.best, paths_explored: rep.paths_explored, exhaustive: rep.exhaustive }
        }
        MultiBlockStrategy::Greedy => {
            let rep = search_greedy_blocks(state, &space, &objective, budget);
            let mut ordering = Vec::new();
            for (j, b) in rep.blocks.iter().enumerate() {
                if j > 0 {
                    ordering.push("|".to_string());
                }
                ordering.extend(b.ordering.iter().cloned());
            }
            let series: Vec<Value> = rep.blocks.iter().map(|b| b.value.clone()).collect();
            let best = series.last().map(|v| Witness {
                value: v.clone(),
                ordering,
                alpha: rep.blocks.iter().find_map(|b| b.alpha),
                candidate: Vec::new(),
            });
            KMevReport { k, series, best, paths_explored: rep.paths_explored, exhaustive: rep.exhaustive }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WmevResult {
    pub value: Ratio,
    pub horizon: usize,
    /// Upper bound on the truncated tail under the constant-increment model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder_bound: Option<Ratio>,
}

impl WmevResult {
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.value.0)
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// `sum_{k=1..H} p_k * series[k-1]`, exact.
pub fn wmev_from_series(blocks: &BlockProbabilities, series: &[Value], increment: Option<&Value>) -> WmevResult {
    let mut total = BigRational::zero();
    for (i, v) in series.iter().enumerate() {
        total += blocks.p(i + 1) * BigRational::from_integer(v.clone());
    }
    let h = series.len();
    let remainder_bound = match (blocks, increment) {
        (BlockProbabilities::Geometric { f }, Some(m)) if f.0 < BigRational::one() => {
            let f = &f.0;
            let hb = BigRational::from_integer(BigInt::from(h));
            let tail = num_traits::pow(f.clone(), h + 1) * (&hb + BigRational::one() - &hb * f) / (BigRational::one() - f);
            Some(Ratio(tail * BigRational::from_integer(m.abs())))
        }
        _ => None,
    };
    WmevResult { value: Ratio(total), horizon: h, remainder_bound }
}

/// `f m / (1 - f)`.
pub fn wmev_closed_form(f: &Ratio, m: &Value) -> Ratio {
    Ratio(&f.0 * BigRational::from_integer(m.clone()) / (BigRational::one() - &f.0))
}

/// Truncated WMEV using the greedy block-by-block k-MEV series.
pub fn wmev(
    model: &MinerModel,
    state: &State,
    space: &OrderingSpace,
    horizon: usize,
    valuation: &Valuation,
    budget: &SearchBudget,
) -> WmevResult {
    let horizon = horizon.max(1);
    let mut series = if let Some(m) = &model.increment {
        (1..=horizon).map(|k| m * BigInt::from(k)).collect()
    } else {
        let rep = k_mev(model, state, space, horizon as u32, valuation, budget, MultiBlockStrategy::Greedy);
        rep.series
    };
    // Fewer blocks than the horizon means nothing more was found.
    let last = series.last().cloned().unwrap_or_default();
    series.resize(horizon, last);
    wmev_from_series(&model.blocks, &series, model.increment.as_ref())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSpread {
    pub beneficiary: AccountId,
    #[serde(with = "value_serde")]
    pub b_high: Value,
    #[serde(with = "value_serde")]
    pub b_low: Value,
    pub best_ordering: Vec<String>,
    pub worst_ordering: Vec<String>,
    pub paths_explored: u64,
    pub exhaustive: bool,
}

impl ValueSpread {
    pub fn spread(&self) -> Value {
        &self.b_high - &self.b_low
    }
}

/// Highest and lowest valued balance of `beneficiary` over the space.
pub fn value_spread(
    beneficiary: &AccountId,
    state: &State,
    space: &OrderingSpace,
    valuation: &Valuation,
    budget: &SearchBudget,
) -> ValueSpread {
    let who = std::slice::from_ref(beneficiary);
    let prepared = valuation.prepared(state);
    let objective = |s: &State| prepared.account_value(s, who);
    let budget = SearchBudget { track_worst: true, ..budget.clone() };
    let rep = search(state, space, &objective, &budget);
    let (best, worst) = (rep.best.expect("space is never empty"), rep.worst.expect("worst tracked"));
    ValueSpread {
        beneficiary: beneficiary.clone(),
        b_high: best.value,
        b_low: worst.value,
        best_ordering: best.ordering,
        worst_ordering: worst.ordering,
        paths_explored: rep.paths_explored,
        exhaustive: rep.exhaustive,
    }
}
