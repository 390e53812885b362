#![allow(dead_code)]

use mevkit_core::contracts::{AmmPool, Contract, MakerBook, PriceSource, PricebetRecord};
use mevkit_core::metrics::Valuation;
use mevkit_core::ordering::OrderingSpace;
use mevkit_core::tx::{Action, CdpOp, Qty};
use mevkit_core::{AccountId, Amount, Ratio, State, TokenId, TokenInfo, Transaction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn eth(n: u128) -> Amount {
    Amount::ether(n)
}

pub fn acct(s: &str) -> AccountId {
    AccountId::new(s)
}

pub fn tok(s: &str) -> TokenId {
    TokenId::new(s)
}

/// ETH plus `TKN`, one pool `pool` holding `x` TKN and `y` ETH.
pub fn one_pool(x: Amount, y: Amount, fee_bps: u32) -> State {
    let mut s = State::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("TKN", false)]).unwrap();
    s.deploy("pool", Contract::Amm(AmmPool::new("TKN", x, "ETH", y, fee_bps))).unwrap();
    s
}

pub fn fund(s: &mut State, who: &str, token: &str, amount: Amount) {
    let cur = s.balance(&acct(who), &tok(token));
    s.set_balance(&acct(who), &tok(token), cur.checked_add(amount).unwrap());
}

/// A mixed instance: two pools over one pair, a Maker book priced by the
/// first pool, a betting contract on the second, user swaps and CDP moves,
/// miner liquidation and bet templates.
pub struct Instance {
    pub state: State,
    pub space: OrderingSpace,
    pub players: Vec<AccountId>,
    pub valuation: Valuation,
}

fn small(rng: &mut ChaCha8Rng, lo: u128, hi: u128) -> Amount {
    Amount::from_u128(rng.gen_range(lo..=hi))
}

pub fn random_instance(rng: &mut ChaCha8Rng, n_txs: usize) -> Instance {
    let mut s = State::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("TKN", false)]).unwrap();
    let fee = if rng.gen_bool(0.5) { 0 } else { 30 };
    s.deploy("p0", Contract::Amm(AmmPool::new("TKN", small(rng, 5_000, 20_000), "ETH", small(rng, 5_000, 20_000), fee)))
        .unwrap();
    s.deploy("p1", Contract::Amm(AmmPool::new("TKN", small(rng, 5_000, 20_000), "ETH", small(rng, 5_000, 20_000), fee)))
        .unwrap();
    let mut book = MakerBook::new("TKN", "ETH", PriceSource::Pool { pool: "p0".into() });
    book.loan_reserve = Amount::from(100_000u64);
    book.collateral.insert(acct("v0"), small(rng, 100, 400));
    book.debt.insert(acct("v0"), small(rng, 100, 400));
    s.deploy("maker", Contract::Maker(book)).unwrap();
    s.deploy("bet", Contract::Pricebet(PricebetRecord::new("ETH", "p1", 10, Amount::from(1u64)))).unwrap();

    let users = ["u0", "u1", "u2", "v0"];
    for u in users.iter().chain(["miner"].iter()) {
        fund(&mut s, u, "ETH", Amount::from(3_000u64));
        fund(&mut s, u, "TKN", Amount::from(3_000u64));
    }

    let mut mempool = Vec::new();
    let mut templates = Vec::new();
    for i in 0..n_txs {
        let actor = users[rng.gen_range(0..users.len())];
        let pool = if rng.gen_bool(0.5) { "p0" } else { "p1" };
        let token = if rng.gen_bool(0.5) { "ETH" } else { "TKN" };
        let id = format!("t{i}");
        let roll = rng.gen_range(0..10);
        let tx = match roll {
            0..=5 => Transaction::swap(&id, actor, pool, token, small(rng, 50, 2_500)),
            6 => {
                let op = [CdpOp::DepositCollateral, CdpOp::WithdrawLoan, CdpOp::PayLoan, CdpOp::WithdrawCollateral]
                    [rng.gen_range(0..4)];
                Transaction::new(id, "v0", "maker", Action::CdpManipulate { op, qty: Qty::Fixed(small(rng, 1, 150)) })
            }
            7 => Transaction::new(id, "miner", "maker", Action::Liquidate { victim: acct("v0") }).template(),
            8 => Transaction::new(id, "miner", "bet", if rng.gen_bool(0.5) { Action::Bet } else { Action::GetReward })
                .template(),
            _ => Transaction::new(
                id,
                actor,
                pool,
                Action::AddLiquidity { amount_x: Qty::Fixed(small(rng, 10, 500)), amount_y: Qty::Fixed(small(rng, 10, 500)) },
            ),
        };
        if tx.origin == mevkit_core::Origin::MinerTemplate {
            templates.push(tx);
        } else {
            mempool.push(tx);
        }
    }
    let space = OrderingSpace {
        mempool,
        templates,
        allow_reorder: rng.gen_bool(0.8),
        allow_censor: rng.gen_bool(0.4),
        allow_insert: true,
        miner: acct("miner"),
        k: 1,
    };
    let players = if rng.gen_bool(0.5) { vec![acct("miner")] } else { vec![acct(users[rng.gen_range(0..users.len())])] };
    let valuation = if rng.gen_bool(0.5) {
        Valuation::primary_only()
    } else {
        Valuation::priced([(tok("TKN"), Ratio::new(rng.gen_range(1..5), rng.gen_range(1..5)))])
    };
    Instance { state: s, space, players, valuation }
}

/// Every single-block sequence the miner may build, enumerated directly from
/// the flags with no pruning: mempool items are mandatory unless censoring,
/// keep their order unless reordering, templates are optional.
pub fn all_sequences(space: &OrderingSpace) -> Vec<Vec<usize>> {
    let m = space.mempool.len();
    let n = m + space.templates.len();
    let mut out = Vec::new();
    fn go(space: &OrderingSpace, m: usize, n: usize, seq: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let complete = space.allow_censor || (0..m).all(|i| used[i]);
        if complete {
            out.push(seq.clone());
        }
        for i in 0..n {
            if used[i] {
                continue;
            }
            if i >= m && !space.allow_insert {
                continue;
            }
            if i < m && !space.allow_reorder && seq.iter().any(|&j| j < m && j > i) {
                continue;
            }
            used[i] = true;
            seq.push(i);
            go(space, m, n, seq, used, out);
            seq.pop();
            used[i] = false;
        }
    }
    go(space, m, n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

pub fn sequence_txs(space: &OrderingSpace, seq: &[usize]) -> Vec<Transaction> {
    let m = space.mempool.len();
    seq.iter().map(|&i| if i < m { space.mempool[i].clone() } else { space.templates[i - m].clone() }).collect()
}

/// Max and min of the players' value over [`all_sequences`], failing
/// transactions skipped.
pub fn brute_force(inst: &Instance) -> (mevkit_core::Value, mevkit_core::Value) {
    let mut best: Option<mevkit_core::Value> = None;
    let mut worst: Option<mevkit_core::Value> = None;
    for seq in all_sequences(&inst.space) {
        let txs = sequence_txs(&inst.space, &seq);
        let (s, _) = mevkit_core::apply_sequence(&inst.state, &txs, mevkit_core::ApplyMode::SkipInvalid).unwrap();
        let v = inst.valuation.account_value(&s, &inst.players) - inst.valuation.account_value(&inst.state, &inst.players);
        if best.as_ref().is_none_or(|b| v > *b) {
            best = Some(v.clone());
        }
        if worst.as_ref().is_none_or(|w| v < *w) {
            worst = Some(v);
        }
    }
    (best.unwrap(), worst.unwrap())
}
