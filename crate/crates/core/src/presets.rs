//! Ready-made scenarios.

use crate::amount::Amount;
use crate::compose::arbitrage_templates;
use crate::contracts::{AmmPool, Contract};
use crate::insertion::{InsertionProblem, Step};
use crate::scenario::{AlphaBounds, Scenario};
use crate::state::TokenInfo;
use crate::tx::Transaction;

fn amt(s: &str) -> Amount {
    s.parse().expect("literal amount")
}

pub const COMP_BACKRUN_USER: &str = "697323163401596485410334513241460920685086001293";

/// A 1300 COMP sell on UniswapV2 with Sushiswap as the exit venue, and the
/// miner's `alpha`-sized buy/sell pair. Both pools charge 30 bps.
pub fn comp_backrun() -> Scenario {
    let mut s = Scenario::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("COMP", false)], "miner");
    s.name = "comp-backrun".into();
    s.contracts.insert(
        "sushiswap".into(),
        Contract::Amm(AmmPool::new("COMP", amt("107495485843438764484770"), "ETH", amt("49835502094518088853633"), 30)),
    );
    s.contracts.insert(
        "uniswap_v2".into(),
        Contract::Amm(AmmPool::new("COMP", amt("5945498629669852264883"), "ETH", amt("2615599823603823616442"), 30)),
    );
    s.fund(COMP_BACKRUN_USER, "COMP", Amount::ether(1300));
    s.fund("miner", "ETH", Amount::ether(10_000));
    let mut user = Transaction::swap("user_sell", COMP_BACKRUN_USER, "uniswap_v2", "COMP", Amount::ether(1300));
    user.fee = Some(amt("1767957155464"));
    s.mempool.push(user);
    s.miner.templates = arbitrage_templates("miner", "uniswap_v2", "sushiswap", "COMP");
    s.miner.allow_insert = true;
    s.alpha_bounds = Some(AlphaBounds { lo: Amount::from(1u64), hi: amt("9999999999999999999999") });
    s
}

/// The fixed user-then-buy-then-sell skeleton of [`comp_backrun`].
pub fn comp_backrun_problem() -> InsertionProblem {
    let s = comp_backrun();
    let state = s.state().expect("preset is valid");
    let mut steps: Vec<Step> = s.mempool.iter().cloned().map(Step::Tx).collect();
    steps.extend(s.space().templates.into_iter().map(Step::Tx));
    let b = s.alpha_bounds.expect("bounds set");
    InsertionProblem::new(state, steps).with_bounds(b.lo, b.hi)
}

/// DAI/ETH pool at 200 DAI per ETH pricing a Maker book with one position
/// just above the 1.5 ratio (10 ETH against 1300 DAI). A 30 ETH sell moves
/// the price under the threshold; the owner's top-up would move it back.
pub fn near_threshold_cdp() -> Scenario {
    use crate::contracts::{MakerBook, PriceSource};
    use crate::tx::{Action, CdpOp, Qty};

    let mut s = Scenario::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("DAI", false)], "miner");
    s.name = "near-threshold-cdp".into();
    s.contracts.insert(
        "uniswap".into(),
        Contract::Amm(AmmPool::new("DAI", Amount::ether(200_000), "ETH", Amount::ether(1_000), 30)),
    );
    let mut book = MakerBook::new("DAI", "ETH", PriceSource::Pool { pool: "uniswap".into() });
    book.collateral.insert("vault_owner".into(), Amount::ether(10));
    book.debt.insert("vault_owner".into(), Amount::ether(1_300));
    book.loan_reserve = Amount::ether(50_000);
    s.contracts.insert("maker".into(), Contract::Maker(book));
    s.fund("seller", "ETH", Amount::ether(30));
    s.fund("buyer", "DAI", Amount::ether(1_000));
    s.fund("vault_owner", "ETH", Amount::ether(1));
    s.mempool = vec![
        Transaction::swap("sell_eth", "seller", "uniswap", "ETH", Amount::ether(30)),
        Transaction::swap("buy_eth", "buyer", "uniswap", "DAI", Amount::ether(1_000)),
        Transaction::new(
            "top_up",
            "vault_owner",
            "maker",
            Action::CdpManipulate { op: CdpOp::DepositCollateral, qty: Qty::Fixed(Amount::ether(1)) },
        ),
    ];
    s
}

/// Betting contract whose oracle can only be pushed over parity by an ETH
/// sell that shows up one block later.
pub fn late_pump_bet() -> Scenario {
    use crate::contracts::PricebetRecord;
    use crate::tx::Action;

    let mut s = Scenario::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("BBT", false)], "miner");
    s.name = "late-pump-bet".into();
    s.contracts.insert(
        "uniswap".into(),
        Contract::Amm(AmmPool::new("BBT", Amount::ether(1_000), "ETH", Amount::ether(900), 0)),
    );
    s.contracts.insert("pricebet".into(), Contract::Pricebet(PricebetRecord::new("ETH", "uniswap", 5, Amount::ether(1))));
    s.fund("miner", "ETH", Amount::ether(100));
    s.fund("whale", "ETH", Amount::ether(200));
    s.mempool = vec![Transaction::swap("pump", "whale", "uniswap", "ETH", Amount::ether(200)).arriving_at(1)];
    s.miner.templates = vec![
        Transaction::new("bet", "miner", "pricebet", Action::Bet).template(),
        Transaction::new("getreward", "miner", "pricebet", Action::GetReward).template(),
    ];
    s.miner.allow_insert = true;
    s.miner.k = 2;
    s
}
