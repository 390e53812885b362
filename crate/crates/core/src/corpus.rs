//! Seeded random AMM scenarios for convergence experiments.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amount::{Amount, Ratio};
use crate::contracts::{AmmPool, Contract};
use crate::metrics::Valuation;
use crate::scenario::Scenario;
use crate::state::TokenInfo;
use crate::tx::Transaction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub seed: u64,
    pub count: usize,
    pub min_txs: usize,
    pub max_txs: usize,
    /// Pools per scenario are drawn from `1..=max_pools`.
    pub max_pools: usize,
}

impl CorpusParams {
    pub fn new(seed: u64, count: usize, txs: usize) -> Self {
        CorpusParams { seed, count, min_txs: txs, max_txs: txs, max_pools: 1 }
    }
}

const TRADE_BPS: [u32; 6] = [5, 10, 25, 50, 100, 200];

/// Trade sizes are log-spread between 0.05% and 4% of the input reserve,
/// directions are fair coins, and the beneficiary is the largest trader.
pub fn generate_scenario(rng: &mut ChaCha8Rng, txs: usize, pools: usize, name: String) -> Scenario {
    let pools = pools.max(1);
    let mut tokens = vec![TokenInfo::new("ETH", true)];
    let mut s_prices = Vec::new();
    for p in 0..pools {
        tokens.push(TokenInfo::new(format!("TKN{p}"), false));
    }
    let mut s = Scenario::new(tokens, "miner");
    s.name = name;
    for p in 0..pools {
        let eth = Amount::ether(rng.gen_range(500..50_000u128));
        // Token price between 0.001 and 10 ETH.
        let per_eth: u128 = rng.gen_range(1..10_000);
        let tkn = Amount::from_wide(eth.wide() * Amount::from(per_eth).wide() / Amount::from(10u64).wide())
            .expect("fits");
        let token = format!("TKN{p}");
        s.contracts.insert(format!("pool{p}").into(), Contract::Amm(AmmPool::new(token.as_str(), tkn, "ETH", eth, 30)));
        let price = BigRational::new(eth.to_value(), tkn.to_value());
        s_prices.push((token.into(), Ratio(price)));
    }
    let mut largest: Option<(Amount, usize)> = None;
    for i in 0..txs {
        let p = rng.gen_range(0..pools);
        let Some(Contract::Amm(pool)) = s.contracts.get(&format!("pool{p}").into()) else { unreachable!() };
        let sell_eth = rng.gen_bool(0.5);
        let (token, reserve) = if sell_eth { (pool.token_y.clone(), pool.reserve_y) } else { (pool.token_x.clone(), pool.reserve_x) };
        let band = TRADE_BPS[rng.gen_range(0..TRADE_BPS.len())];
        let bps = rng.gen_range(band..=band * 2);
        let amount = Amount::from_wide(reserve.wide() * Amount::from(bps as u64).wide() / Amount::from(10_000u64).wide())
            .expect("fits");
        let user = format!("user{i}");
        s.fund(&user, token.as_str(), amount);
        s.mempool.push(Transaction::swap(&format!("tx{i}"), &user, &format!("pool{p}"), token.as_str(), amount));
        let eth_size = if sell_eth {
            amount
        } else {
            let r = &s_prices[p].1 .0;
            Amount::try_from_value(&(r * BigRational::from_integer(amount.to_value())).floor().to_integer())
                .unwrap_or(Amount::MAX)
        };
        if largest.is_none_or(|(a, _)| eth_size > a) {
            largest = Some((eth_size, i));
        }
    }
    s.valuation = Valuation::priced(s_prices);
    s.beneficiary = largest.map(|(_, i)| format!("user{i}").into());
    s
}

pub fn generate_corpus(params: &CorpusParams) -> Vec<Scenario> {
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
            let txs = rng.gen_range(params.min_txs..=params.max_txs.max(params.min_txs));
            let pools = rng.gen_range(1..=params.max_pools.max(1));
            generate_scenario(&mut rng, txs, pools, format!("corpus-{:04}", i))
        })
        .collect()
}

/// Ratio helper for reports: `found / optimum`, or 1 when the optimum is 0.
pub fn attainment(found: &BigInt, optimum: &BigInt) -> f64 {
    use num_traits::{ToPrimitive, Zero};
    if optimum.is_zero() {
        return 1.0;
    }
    BigRational::new(found.clone(), optimum.clone()).to_f64().unwrap_or(0.0)
}
