mod common;

use common::*;
use mevkit_core::compose::arbitrage_templates;
use mevkit_core::insertion::{optimize_alpha, profit_curve, write_curve_csv, InsertionProblem, Step};
use mevkit_core::metrics::{player_objective, Valuation};
use mevkit_core::presets::comp_backrun_problem;
use mevkit_core::{AccountId, AmmPool, Amount, Contract, State, TokenInfo, Transaction, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D3_PROFIT: &str = "123061201464936859816";

static MINER: std::sync::LazyLock<[AccountId; 1]> = std::sync::LazyLock::new(|| [AccountId::new("miner")]);

fn miner() -> &'static [AccountId] {
    &*MINER
}

#[test]
fn comp_backrun_profit() {
    let p = comp_backrun_problem();
    let val = Valuation::primary_only();
    let obj = player_objective(&p.state, miner(), &val);
    let opt = optimize_alpha(&p, &obj).expect("feasible");
    assert_eq!(opt.value, D3_PROFIT.parse::<Value>().unwrap());
    let wei = 10f64.powi(18);
    let eth = opt.value.to_string().parse::<f64>().unwrap() / wei;
    assert!((eth - 123.0).abs() <= 0.05 * 123.0 && eth > 76.0);
    assert!(opt.alpha > Amount::ZERO && opt.alpha < Amount::ether(10_000));
    // Re-running at the reported alpha gives the same value.
    assert_eq!(p.value(opt.alpha, &obj), Some(opt.value.clone()));
    for pt in profit_curve(&p, &obj, 128) {
        if let Some(v) = pt.value {
            assert!(v <= opt.value);
        }
    }
}

#[test]
fn curve_csv_header() {
    let p = comp_backrun_problem();
    let val = Valuation::primary_only();
    let obj = player_objective(&p.state, miner(), &val);
    let mut out = Vec::new();
    write_curve_csv(&mut out, &profit_curve(&p, &obj, 4)).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("alpha,value\n"));
    assert_eq!(text.lines().count(), 5);
}

/// Two pools `a`, `b` over (TKN, ETH); the miner buys `alpha` TKN on `buy`
/// and sells it on the other.
fn two_pool_problem(a: (u64, u64), b: (u64, u64), fee: u32, buy: &str) -> InsertionProblem {
    let mut s = State::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("TKN", false)]).unwrap();
    s.deploy("a", Contract::Amm(AmmPool::new("TKN", a.0.into(), "ETH", a.1.into(), fee))).unwrap();
    s.deploy("b", Contract::Amm(AmmPool::new("TKN", b.0.into(), "ETH", b.1.into(), fee))).unwrap();
    fund(&mut s, "miner", "ETH", Amount::from(10u64 * (a.1 + b.1)));
    let sell = if buy == "a" { "b" } else { "a" };
    let txs: Vec<Transaction> = arbitrage_templates("miner", buy, sell, "TKN");
    let hi = a.0.min(b.0) - 1;
    InsertionProblem::new(s, txs.into_iter().map(Step::Tx).collect()).with_bounds(1u64.into(), hi.into())
}

fn scan(p: &InsertionProblem, obj: &dyn mevkit_core::Objective) -> Option<(Value, u64)> {
    let hi: u64 = p.hi.to_string().parse().unwrap();
    let mut best: Option<(Value, u64)> = None;
    for a in 1..=hi {
        if let Some(v) = p.value(a.into(), obj) {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, a));
            }
        }
    }
    best
}

#[test]
fn matches_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..6 {
        let a = (rng.gen_range(20_000..60_000u64), rng.gen_range(20_000..60_000u64));
        let b = (rng.gen_range(20_000..60_000u64), rng.gen_range(20_000..60_000u64));
        let fee = [0, 30][rng.gen_range(0..2)];
        for buy in ["a", "b"] {
            let p = two_pool_problem(a, b, fee, buy);
            let val = Valuation::primary_only();
            let obj = player_objective(&p.state, miner(), &val);
            let (truth, _) = scan(&p, &obj).unwrap();
            let opt = optimize_alpha(&p, &obj).unwrap();
            assert!(opt.value <= truth);
            assert!(&truth - &opt.value <= Value::from(2), "{a:?} {b:?} {fee} {buy}: {} vs {truth}", opt.value);
        }
    }
}

#[test]
fn aligned_pools_offer_nothing_with_fee() {
    for (x, y) in [(10_000u64, 10_000u64), (50_000, 20_000), (7_000, 90_000)] {
        let p = two_pool_problem((x, y), (3 * x, 3 * y), 30, "a");
        let val = Valuation::primary_only();
        let obj = player_objective(&p.state, miner(), &val);
        let opt = optimize_alpha(&p, &obj).unwrap();
        assert!(opt.value <= Value::from(0), "{}", opt.value);
    }
}

#[test]
fn pool_labels_do_not_matter() {
    let val = Valuation::primary_only();
    let p = two_pool_problem((30_000, 20_000), (25_000, 27_000), 30, "a");
    let q = two_pool_problem((25_000, 27_000), (30_000, 20_000), 30, "b");
    let op = optimize_alpha(&p, &player_objective(&p.state, miner(), &val)).unwrap();
    let oq = optimize_alpha(&q, &player_objective(&q.state, miner(), &val)).unwrap();
    assert_eq!((op.value, op.alpha), (oq.value, oq.alpha));
}

#[test]
fn infeasible_bounds() {
    let p = two_pool_problem((1_000, 1_000), (1_000, 900), 0, "b").with_bounds(5u64.into(), 4u64.into());
    let val = Valuation::primary_only();
    assert!(optimize_alpha(&p, &player_objective(&p.state, miner(), &val)).is_none());
}
