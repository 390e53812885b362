mod common;

use common::*;
use mevkit_core::metrics::{
    ev, k_mev, value_spread, wmev, wmev_closed_form, wmev_from_series, BlockProbabilities, MinerModel, MultiBlockStrategy,
    Valuation,
};
use mevkit_core::presets::{comp_backrun, late_pump_bet};
use mevkit_core::{AmmPool, Amount, Contract, OrderingSpace, Pruning, Ratio, SearchBudget, State, Transaction, Value};
use num_rational::BigRational;
use num_traits::{One, Zero};

fn ether(v: &Value) -> f64 {
    v.to_string().parse::<f64>().unwrap() / 1e18
}

#[test]
fn empty_mempool_has_zero_ev() {
    let s = one_pool(eth(100), eth(100), 30);
    let space = OrderingSpace::reorder_only(vec![], "miner").censoring(true);
    let rep = ev(&MinerModel::single("miner"), &s, &space, &Valuation::primary_only(), &SearchBudget::exhaustive());
    assert_eq!(rep.best_value(), Some(&Value::zero()));
    assert!(rep.exhaustive);
}

#[test]
fn best_at_least_original_order() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(21);
    for _ in 0..30 {
        let inst = random_instance(&mut rng, 5);
        let model = MinerModel { players: inst.players.clone(), ..MinerModel::single("miner") };
        let rep = ev(&model, &inst.state, &inst.space, &inst.valuation, &SearchBudget::exhaustive());
        let (s, _) =
            mevkit_core::apply_sequence(&inst.state, &inst.space.mempool, mevkit_core::ApplyMode::SkipInvalid).unwrap();
        let orig = inst.valuation.account_value(&s, &inst.players) - inst.valuation.account_value(&inst.state, &inst.players);
        assert!(rep.best_value().unwrap() >= &orig);
    }
}

#[test]
fn comp_backrun_through_search() {
    let sc = comp_backrun();
    let st = sc.state().unwrap();
    let rep = ev(&sc.miner_model(), &st, &sc.space(), &sc.valuation, &sc.search_budget());
    let best = rep.best.unwrap();
    assert_eq!(best.value, "123061201464936859816".parse::<Value>().unwrap());
    assert_eq!(best.ordering, vec!["user_sell", "miner_buy", "miner_sell"]);
    assert!((ether(&best.value) - 123.0).abs() < 0.05 * 123.0);
}

#[test]
fn late_pump_needs_two_blocks() {
    let sc = late_pump_bet();
    let st = sc.state().unwrap();
    let model = sc.miner_model();
    let val = Valuation::primary_only();
    let b = SearchBudget::exhaustive();
    let one = k_mev(&model, &st, &sc.space(), 1, &val, &b, MultiBlockStrategy::Exact);
    let two = k_mev(&model, &st, &sc.space(), 2, &val, &b, MultiBlockStrategy::Exact);
    let greedy = k_mev(&model, &st, &sc.space(), 2, &val, &b, MultiBlockStrategy::Greedy);
    assert_eq!(one.value(), Value::zero());
    assert_eq!(two.value(), Amount::ether(100).to_value());
    assert_eq!(greedy.series, vec![Value::zero(), Amount::ether(100).to_value()]);

    // Oracle: every split of {bet, pump, getreward} over two blocks with
    // the pump in block 1, by hand.
    let mut best = None::<Value>;
    let sp = sc.space();
    let (bet, reward, pump) = (&sp.templates[0], &sp.templates[1], &sp.mempool[0]);
    let opts: Vec<Vec<Vec<&Transaction>>> = vec![
        vec![vec![], vec![pump]],
        vec![vec![bet], vec![pump]],
        vec![vec![bet], vec![pump, reward]],
        vec![vec![], vec![bet, pump, reward]],
        vec![vec![], vec![pump, bet, reward]],
        vec![vec![bet, reward], vec![pump]],
        vec![vec![], vec![bet, pump]],
    ];
    for blocks in opts {
        let mut s = st.clone();
        for blk in blocks {
            for tx in blk {
                if let Ok(n) = mevkit_core::apply_tx(&s, tx) {
                    s = n;
                }
            }
            s.block_number += 1;
        }
        let v = val.delta_value(&st, &s, &model.players);
        if best.as_ref().is_none_or(|b| v > *b) {
            best = Some(v);
        }
    }
    assert_eq!(best.unwrap(), two.value());
}

#[test]
fn k_one_equals_single_block_ev() {
    let sc = comp_backrun();
    let st = sc.state().unwrap();
    let b = sc.search_budget();
    let e = ev(&sc.miner_model(), &st, &sc.space(), &sc.valuation, &b);
    let k = k_mev(&sc.miner_model(), &st, &sc.space(), 1, &sc.valuation, &b, MultiBlockStrategy::Exact);
    assert_eq!(e.best_value().cloned().unwrap(), k.value());
}

#[test]
fn wmev_matches_closed_form() {
    for (n, d) in [(1, 10), (1, 4), (1, 2)] {
        let f = Ratio::new(n, d);
        let m = Value::from(2);
        let series: Vec<Value> = (1..=64).map(|k| &m * k).collect();
        let r = wmev_from_series(&BlockProbabilities::Geometric { f: f.clone() }, &series, Some(&m));
        let closed = wmev_closed_form(&f, &m);
        let gap = &closed.0 - &r.value.0;
        assert!(gap >= BigRational::zero());
        assert!(gap <= r.remainder_bound.unwrap().0);
        let rel = mevkit_core::metrics::ratio_to_f64(&(gap / &closed.0));
        assert!(rel < 1e-9, "f={n}/{d} rel={rel}");
    }
    assert_eq!(wmev_closed_form(&Ratio::new(1, 2), &Value::from(2)), Ratio::new(2, 1));
}

#[test]
fn wmev_degenerate_and_linear() {
    let series = vec![Value::from(7), Value::from(9)];
    let p1 = BlockProbabilities::Explicit { p: vec![Ratio::one()] };
    assert_eq!(wmev_from_series(&p1, &series, None).value, Ratio::new(7, 1));
    let f0 = BlockProbabilities::Geometric { f: Ratio::zero() };
    assert_eq!(wmev_from_series(&f0, &series, None).value, Ratio::zero());
    let p = BlockProbabilities::Explicit { p: vec![Ratio::new(1, 3), Ratio::new(1, 5)] };
    let half = BlockProbabilities::Explicit { p: vec![Ratio::new(1, 6), Ratio::new(1, 10)] };
    let a = wmev_from_series(&p, &series, None).value.0;
    let b = wmev_from_series(&half, &series, None).value.0;
    assert_eq!(a, b * BigRational::from_integer(2.into()));
    // Small exact case: f = 1/2, series [m, 2m] gives m/4 + 2m/8.
    let g = BlockProbabilities::Geometric { f: Ratio::new(1, 2) };
    assert_eq!(wmev_from_series(&g, &[Value::from(4), Value::from(8)], None).value, Ratio::new(2, 1));
    assert!(BigRational::one() >= (1..=64).map(|k| g.p(k)).sum::<BigRational>());
}

#[test]
fn wmev_pads_short_series() {
    let sc = late_pump_bet();
    let st = sc.state().unwrap();
    let model = MinerModel::geometric("miner", Ratio::new(1, 2));
    let r = wmev(&model, &st, &sc.space(), 3, &Valuation::primary_only(), &SearchBudget::exhaustive());
    // p2 + p3 = 1/8 + 1/16 of 100 ETH.
    let expect = BigRational::new(3.into(), 16.into()) * BigRational::from_integer(Amount::ether(100).to_value());
    assert_eq!(r.value.0, expect);
}

fn spread_pools() -> State {
    let mut s = one_pool(eth(1_000), eth(1_000), 30);
    s.deploy("other", Contract::Amm(AmmPool::new("TKN", eth(1_000), "ETH", eth(1_000), 30))).unwrap();
    for who in ["alice", "bot", "carol", "dave"] {
        fund(&mut s, who, "ETH", eth(100));
        fund(&mut s, who, "TKN", eth(100));
    }
    s
}

#[test]
fn single_tx_has_no_spread() {
    let s = spread_pools();
    let space = OrderingSpace::reorder_only(vec![Transaction::swap("a", "alice", "pool", "TKN", eth(10))], "miner");
    let v = value_spread(&acct("alice"), &s, &space, &Valuation::priced([]), &SearchBudget::exhaustive());
    assert_eq!(v.b_high, v.b_low);
    assert_eq!(v.spread(), Value::zero());
}

#[test]
fn backrun_spread_puts_user_last() {
    let s = spread_pools();
    let mempool = vec![
        Transaction::swap("alice_sell", "alice", "pool", "TKN", eth(50)),
        Transaction::swap("bot_buy", "bot", "pool", "ETH", eth(40)),
    ];
    let space = OrderingSpace::reorder_only(mempool, "miner");
    let val = Valuation::priced([(tok("TKN"), Ratio::one())]);
    let v = value_spread(&acct("alice"), &s, &space, &val, &SearchBudget::exhaustive());
    assert!(v.spread() > Value::zero());
    assert_eq!(v.best_ordering.last().unwrap(), "alice_sell");
    assert_eq!(v.worst_ordering.first().unwrap(), "alice_sell");
    assert!(v.b_high >= v.b_low);
    // Magnitude by direct evaluation of both orders.
    let value_after = |order: &[usize]| {
        let txs: Vec<_> = order.iter().map(|&i| space.mempool[i].clone()).collect();
        let (st, _) = mevkit_core::apply_sequence(&s, &txs, mevkit_core::ApplyMode::SkipInvalid).unwrap();
        val.account_value(&st, &[acct("alice")])
    };
    assert_eq!(v.spread(), value_after(&[1, 0]) - value_after(&[0, 1]));
}

#[test]
fn same_direction_spread_vanishes() {
    let s = spread_pools();
    let mempool: Vec<_> = ["alice", "bot", "carol", "dave"]
        .iter()
        .enumerate()
        .map(|(i, w)| Transaction::swap(&format!("t{i}"), w, "pool", "ETH", eth(5 * (i as u128 + 1))))
        .collect();
    let space = OrderingSpace::reorder_only(mempool, "miner");
    for p in [Pruning::PathIndependence, Pruning::Exact, Pruning::None] {
        let v = value_spread(&acct("alice"), &s, &space, &Valuation::primary_only(), &SearchBudget::exhaustive().pruning(p));
        assert_eq!(v.spread(), Value::zero());
    }
    let pi = value_spread(
        &acct("alice"),
        &s,
        &space,
        &Valuation::primary_only(),
        &SearchBudget::exhaustive().pruning(Pruning::PathIndependence),
    );
    assert_eq!(pi.paths_explored, 1);
}

#[test]
fn spread_ignores_unrelated_permutations() {
    let s = spread_pools();
    let mut mempool = vec![
        Transaction::swap("alice_sell", "alice", "pool", "TKN", eth(50)),
        Transaction::swap("bot_buy", "bot", "pool", "ETH", eth(40)),
        Transaction::swap("c", "carol", "other", "ETH", eth(30)),
        Transaction::swap("d", "dave", "other", "TKN", eth(20)),
    ];
    let val = Valuation::priced([(tok("TKN"), Ratio::new(1, 1))]);
    let a = value_spread(&acct("alice"), &s, &OrderingSpace::reorder_only(mempool.clone(), "m"), &val, &SearchBudget::exhaustive());
    mempool.swap(2, 3);
    let b = value_spread(&acct("alice"), &s, &OrderingSpace::reorder_only(mempool, "m"), &val, &SearchBudget::exhaustive());
    assert_eq!((a.b_high, a.b_low), (b.b_high, b.b_low));
}

#[test]
fn priced_valuation_floors_per_token() {
    let mut s = one_pool(eth(1), eth(1), 0);
    fund(&mut s, "x", "TKN", Amount::from(7u64));
    let v = Valuation::priced([(tok("TKN"), Ratio::new(1, 2))]);
    assert_eq!(v.account_value(&s, &[acct("x")]), Value::from(3));
    let mut neg = s.clone();
    neg.set_balance(&acct("x"), &tok("TKN"), Amount::ZERO);
    assert_eq!(v.delta_value(&s, &neg, &[acct("x")]), Value::from(-4));
    // Primary is priced at one.
    assert_eq!(v.price(&s, &tok("ETH")), Some(BigRational::one()));
}
