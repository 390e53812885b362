//! Composability checks and the oracle-manipulation scenarios.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::amount::{value_serde, Amount, Ratio, Value};
use crate::contracts::{AmmPool, Contract, PricebetRecord, PriceSource};
use crate::ids::{AccountId, ContractId, TokenId};
use crate::metrics::{player_objective, value_spread, Valuation, ValueSpread};
use crate::ordering::{search, EvReport, OrderingSpace, SearchBudget};
use crate::state::{State, StateError, TokenInfo};
use crate::tx::{Action, Qty, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Proven for the modeled action space by exhaustive search.
    Composable,
    NotComposable,
    /// Sampling found no violation; nothing is proven.
    NoViolationFound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposabilityVerdict {
    pub epsilon: Ratio,
    #[serde(with = "value_serde")]
    pub mev_before: Value,
    #[serde(with = "value_serde")]
    pub mev_after: Value,
    pub composable: bool,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    pub exhaustive: bool,
}

/// `mev_after <= (1 + epsilon) * mev_before`, cross-multiplied.
pub fn within_epsilon(mev_before: &Value, mev_after: &Value, epsilon: &Ratio) -> bool {
    let (num, den) = (epsilon.0.numer(), epsilon.0.denom());
    den * mev_after <= (den + num) * mev_before
}

#[allow(clippy::too_many_arguments)]
pub fn check_composability(
    state: &State,
    new_id: &ContractId,
    new_contract: &Contract,
    players: &[AccountId],
    epsilon: &Ratio,
    space: &OrderingSpace,
    valuation: &Valuation,
    budget: &SearchBudget,
) -> Result<ComposabilityVerdict, StateError> {
    let after_state = state.with_contract(new_id.clone(), new_contract.clone())?;
    let before = search(state, space, &player_objective(state, players, valuation), budget);
    let after = search(&after_state, space, &player_objective(&after_state, players, valuation), budget);
    let value = |r: &EvReport| r.best.as_ref().map(|w| w.value.clone()).unwrap_or_default();
    let (mev_before, mev_after) = (value(&before), value(&after));
    let composable = within_epsilon(&mev_before, &mev_after, epsilon);
    let exhaustive = before.exhaustive && after.exhaustive;
    let verdict = match (composable, exhaustive) {
        (false, _) => Verdict::NotComposable,
        (true, true) => Verdict::Composable,
        (true, false) => Verdict::NoViolationFound,
    };
    Ok(ComposabilityVerdict {
        epsilon: epsilon.clone(),
        mev_before,
        mev_after,
        composable,
        verdict,
        witness: (!composable).then(|| after.best.map(|w| w.ordering).unwrap_or_default()),
        exhaustive,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidityMetrics {
    pub liquid_eth: Amount,
    pub liquid_other: Amount,
    pub mempool_eth_in: Amount,
    pub mempool_other_in: Amount,
    pub player_eth: Amount,
    pub player_other: Amount,
}

/// Inputs for the Uniswap-as-oracle betting example. Amounts are whole tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBetParams {
    /// `b`
    pub other_reserve: u128,
    /// `e`
    pub eth_reserve: u128,
    /// Sizes of mempool ETH -> BBT sells; they sum to `e'`.
    pub eth_in: Vec<u128>,
    /// Sizes of mempool BBT -> ETH sells; they sum to `b'`.
    pub other_in: Vec<u128>,
    pub player_eth: u128,
    pub player_other: u128,
    /// Let the player also trade its own free tokens on the pool.
    #[serde(default)]
    pub player_swaps: bool,
    #[serde(default)]
    pub fee_bps: u32,
    #[serde(default = "default_deadline")]
    pub deadline: u64,
}

fn default_deadline() -> u64 {
    10
}

pub struct OracleBetScenario {
    pub state: State,
    pub bet_id: ContractId,
    pub bet: Contract,
    pub space: OrderingSpace,
    pub player: AccountId,
    pub metrics: LiquidityMetrics,
}

pub const ETH: &str = "ETH";
pub const BBT: &str = "BBT";

fn units(n: u128) -> Amount {
    Amount::ether(n)
}

fn sum(v: &[u128]) -> u128 {
    v.iter().sum()
}

/// Builds state `s` (pool only) and the betting contract to add. Mempool ETH
/// sells come first, then BBT sells.
pub fn oracle_bet_scenario(p: &OracleBetParams) -> OracleBetScenario {
    let mut state = State::new(vec![TokenInfo::new(ETH, true), TokenInfo::new(BBT, false)]).expect("two tokens");
    let pool = AmmPool::new(BBT, units(p.other_reserve), ETH, units(p.eth_reserve), p.fee_bps);
    state.deploy("uniswap", Contract::Amm(pool)).expect("fresh state");
    let player = AccountId::new("miner");
    state.set_balance(&player, &TokenId::new(ETH), units(p.player_eth));
    state.set_balance(&player, &TokenId::new(BBT), units(p.player_other));

    let mut mempool = Vec::new();
    for (i, &a) in p.eth_in.iter().enumerate() {
        let user = format!("e{}", i + 1);
        state.set_balance(&AccountId::new(user.as_str()), &TokenId::new(ETH), units(a));
        mempool.push(Transaction::swap(&format!("eth_in_{}", i + 1), &user, "uniswap", ETH, units(a)));
    }
    for (i, &a) in p.other_in.iter().enumerate() {
        let user = format!("b{}", i + 1);
        state.set_balance(&AccountId::new(user.as_str()), &TokenId::new(BBT), units(a));
        mempool.push(Transaction::swap(&format!("bbt_in_{}", i + 1), &user, "uniswap", BBT, units(a)));
    }

    let mut templates = vec![
        Transaction::new("bet", player.clone(), "pricebet", Action::Bet).template(),
        Transaction::new("getreward", player.clone(), "pricebet", Action::GetReward).template(),
    ];
    if p.player_swaps {
        let free_eth = p.player_eth.saturating_sub(100);
        if free_eth > 0 {
            templates.push(Transaction::swap("miner_eth_in", "miner", "uniswap", ETH, units(free_eth)).template());
        }
        if p.player_other > 0 {
            templates.push(Transaction::swap("miner_bbt_in", "miner", "uniswap", BBT, units(p.player_other)).template());
        }
    }
    let space = OrderingSpace::reorder_only(mempool, player.clone()).with_templates(templates);
    let bet = Contract::Pricebet(PricebetRecord::new(ETH, "uniswap", p.deadline, units(1)));

    let (e1, b1) = (sum(&p.eth_in), sum(&p.other_in));
    let metrics = LiquidityMetrics {
        liquid_eth: units(e1 + p.player_eth),
        liquid_other: units(b1 + p.player_other),
        mempool_eth_in: units(e1),
        mempool_other_in: units(b1),
        player_eth: units(p.player_eth),
        player_other: units(p.player_other),
    };
    OracleBetScenario { state, bet_id: ContractId::new("pricebet"), bet, space, player, metrics }
}

impl OracleBetScenario {
    /// As a scenario file with the bet as the contract under test.
    pub fn to_scenario(&self, name: &str) -> crate::scenario::Scenario {
        use crate::scenario::{BalanceEntry, NewContract, Scenario};
        let mut sc = Scenario::new(self.state.tokens().to_vec(), self.player.clone());
        sc.name = name.to_string();
        sc.block_number = self.state.block_number;
        sc.balances = self
            .state
            .balances()
            .map(|(a, t, amount)| BalanceEntry { account: a.clone(), token: t.clone(), amount })
            .collect();
        sc.contracts = self.state.contracts().map(|(id, c)| (id.clone(), c.clone())).collect();
        sc.mempool = self.space.mempool.clone();
        sc.miner.templates = self.space.templates.clone();
        sc.miner.allow_reorder = self.space.allow_reorder;
        sc.miner.allow_censor = self.space.allow_censor;
        sc.miner.allow_insert = self.space.allow_insert;
        sc.budget = SearchBudget::exhaustive();
        sc.new_contract = Some(NewContract { id: self.bet_id.clone(), contract: self.bet.clone() });
        sc
    }
}

impl OracleBetParams {
    /// `l_e <= b - e`.
    pub fn low_liquidity(&self) -> bool {
        let le = sum(&self.eth_in) + if self.player_swaps { self.player_eth } else { 0 };
        self.eth_reserve + le <= self.other_reserve
    }

    /// No ordering can push the ETH reserve above the BBT reserve: with
    /// every ETH sell applied first, `(e + l_e)^2 <= b * e`.
    pub fn oracle_unreachable(&self) -> bool {
        let le = sum(&self.eth_in) + if self.player_swaps { self.player_eth.saturating_sub(100) } else { 0 };
        let top = BigInt::from(self.eth_reserve + le);
        &top * &top <= BigInt::from(self.other_reserve) * BigInt::from(self.eth_reserve)
    }

    /// `e' > b - e` and `p_e >= 100`.
    pub fn high_liquidity(&self) -> bool {
        sum(&self.eth_in) + self.eth_reserve > self.other_reserve && self.player_eth >= 100
    }
}

/// Which pool the round trip enters first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPool {
    A,
    B,
}

/// Two pools over the same pair; `x` is BBT (`b`), `y` is ETH (`e`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoAmmInstance {
    pub pool_a: AmmPool,
    pub pool_b: AmmPool,
}

impl TwoAmmInstance {
    pub fn new(a: (Amount, Amount), b: (Amount, Amount), fee_bps: u32) -> Self {
        let mk = |(x, y): (Amount, Amount)| AmmPool::new(BBT, x, ETH, y, fee_bps);
        TwoAmmInstance { pool_a: mk(a), pool_b: mk(b) }
    }

    fn pools(&self, start: StartPool) -> (&AmmPool, &AmmPool) {
        match start {
            StartPool::A => (&self.pool_a, &self.pool_b),
            StartPool::B => (&self.pool_b, &self.pool_a),
        }
    }

    /// `b e* == b* e`.
    pub fn aligned(&self) -> bool {
        self.pool_a.reserve_x.wide() * self.pool_b.reserve_y.wide()
            == self.pool_b.reserve_x.wide() * self.pool_a.reserve_y.wide()
    }

    /// `|b e* - b* e| / (b + b*)`, floored.
    pub fn delta(&self) -> Amount {
        let (a, b) = (&self.pool_a, &self.pool_b);
        let l = a.reserve_x.to_value() * b.reserve_y.to_value();
        let r = b.reserve_x.to_value() * a.reserve_y.to_value();
        let d = (l - r).abs() / (a.reserve_x.to_value() + b.reserve_x.to_value());
        Amount::try_from_value(&d).unwrap_or(Amount::MAX)
    }

    /// The pool where ETH is cheaper in BBT, i.e. the profitable entry.
    pub fn profitable_start(&self) -> StartPool {
        let (a, b) = (&self.pool_a, &self.pool_b);
        // Entry pays more BBT per ETH: b_s / e_s larger.
        if a.reserve_x.wide() * b.reserve_y.wide() >= b.reserve_x.wide() * a.reserve_y.wide() {
            StartPool::A
        } else {
            StartPool::B
        }
    }

    /// Sell `alpha` ETH into the start pool, sell the BBT into the other,
    /// with each pool's fee and floor rounding. `None` if a leg reverts.
    pub fn roundtrip(&self, start: StartPool, alpha: Amount) -> Option<Value> {
        let (s, o) = self.pools(start);
        let bbt = s.clone().swap_exact_in(&TokenId::new(ETH), alpha).ok()?;
        let eth = o.clone().swap_exact_in(&TokenId::new(BBT), bbt).ok()?;
        Some(eth.to_value() - alpha.to_value())
    }

    /// No-fee profit in exact rationals:
    /// `e_o b_s a / (b_o e_s + (b_o + b_s) a) - a`.
    pub fn roundtrip_rational(&self, start: StartPool, alpha: &BigRational) -> BigRational {
        let (s, o) = self.pools(start);
        let r = |a: Amount| a.to_rational();
        let (bs, es, bo, eo) = (r(s.reserve_x), r(s.reserve_y), r(o.reserve_x), r(o.reserve_y));
        let num = &eo * &bs * alpha;
        let den = &bo * &es + (&bo + &bs) * alpha;
        num / den - alpha
    }

    /// Rational maximiser `(sqrt(e_o b_s b_o e_s) - b_o e_s) / (b_o + b_s)`,
    /// as a float.
    pub fn rational_optimum(&self, start: StartPool) -> f64 {
        let (s, o) = self.pools(start);
        let f = Amount::to_f64;
        let (bs, es, bo, eo) = (f(s.reserve_x), f(s.reserve_y), f(o.reserve_x), f(o.reserve_y));
        let n = eo * bs;
        let q = bo * es;
        ((n * q).sqrt() - q) / (bo + bs)
    }
}

/// Adds one miner `Liquidate` template per open position of every Maker book
/// priced by a pool, then searches.
pub fn liquidation_templates(state: &State, miner: &AccountId) -> Vec<Transaction> {
    let mut out = Vec::new();
    for (id, c) in state.contracts() {
        let Contract::Maker(book) = c else { continue };
        if !matches!(book.price_source, PriceSource::Pool { .. }) {
            continue;
        }
        for victim in book.open_positions() {
            let tx_id = format!("liquidate_{}_{}", id, victim);
            out.push(
                Transaction::new(tx_id, miner.clone(), id.clone(), Action::Liquidate { victim: victim.clone() }).template(),
            );
        }
    }
    out
}

pub fn oracle_liquidation_mev(
    state: &State,
    space: &OrderingSpace,
    players: &[AccountId],
    valuation: &Valuation,
    budget: &SearchBudget,
) -> EvReport {
    let mut space = space.clone();
    space.templates.extend(liquidation_templates(state, &space.miner));
    space.allow_insert = true;
    search(state, &space, &player_objective(state, players, valuation), budget)
}

/// MEV added by a bribery contract paying out the beneficiary's spread.
pub fn bribery_bound(
    beneficiary: &AccountId,
    state: &State,
    space: &OrderingSpace,
    valuation: &Valuation,
    budget: &SearchBudget,
) -> ValueSpread {
    let space = OrderingSpace { templates: Vec::new(), allow_insert: false, allow_censor: false, ..space.clone() };
    value_spread(beneficiary, state, &space, valuation, budget)
}

/// Convenience: `alpha` buy/sell template pair for a two-pool arbitrage.
pub fn arbitrage_templates(miner: &str, buy_pool: &str, sell_pool: &str, token: &str) -> Vec<Transaction> {
    vec![
        Transaction::new(
            "miner_buy",
            miner,
            buy_pool,
            Action::SwapForExact { token_out: TokenId::new(token), amount_out: Qty::Alpha, max_in: None },
        )
        .template(),
        Transaction::new(
            "miner_sell",
            miner,
            sell_pool,
            Action::Swap { token_in: TokenId::new(token), amount_in: Qty::Alpha, min_out: None },
        )
        .template(),
    ]
}
