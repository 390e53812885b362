mod common;

use common::*;
use mevkit_core::corpus::{generate_corpus, CorpusParams};
use mevkit_core::eventlog::{
    parse_event_log, record_events, replay, replay_validate, snapshot, write_event_log, EventKind, EventLogError,
    EventRecord, Tolerance,
};
use mevkit_core::presets::{comp_backrun, late_pump_bet, near_threshold_cdp};
use mevkit_core::scenario::{load_scenario, save_scenario, Scenario, ScenarioError};
use mevkit_core::{Amount, Transaction};

#[test]
fn presets_round_trip() {
    for sc in [comp_backrun(), near_threshold_cdp(), late_pump_bet()] {
        let text = sc.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, sc);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn save_and_load_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let sc = comp_backrun();
    save_scenario(&path, &sc).unwrap();
    assert_eq!(load_scenario(&path).unwrap(), sc);
    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(ScenarioError::Io { .. })));
}

#[test]
fn amounts_are_strings() {
    let text = comp_backrun().to_json();
    assert!(text.contains("\"107495485843438764484770\""));
    assert!(text.contains("\"1300000000000000000000\""));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    fn no_big_numbers(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Number(n) => n.as_u64().is_some_and(|x| x < 1 << 32),
            serde_json::Value::Array(a) => a.iter().all(no_big_numbers),
            serde_json::Value::Object(o) => o.values().all(no_big_numbers),
            _ => true,
        }
    }
    assert!(no_big_numbers(&v));
}

#[test]
fn schema_and_reference_errors() {
    let sc = comp_backrun();
    let mut bad = sc.clone();
    bad.schema_version = 99;
    assert!(matches!(Scenario::from_json(&bad.to_json()), Err(ScenarioError::Schema(99))));

    let mut dangling = sc.clone();
    dangling.mempool.push(Transaction::swap("x", "u", "nowhere", "ETH", Amount::from(1u64)));
    assert!(matches!(dangling.validate(), Err(ScenarioError::Dangling(..))));

    let mut token = sc.clone();
    token.mempool.push(Transaction::swap("x", "u", "sushiswap", "DOGE", Amount::from(1u64)));
    assert!(matches!(token.validate(), Err(ScenarioError::Dangling(..))));

    let mut foreign = sc.clone();
    foreign.miner.templates.push(Transaction::swap("y", "someone", "sushiswap", "ETH", Amount::from(1u64)));
    assert!(matches!(foreign.validate(), Err(ScenarioError::ForeignTemplate(_))));

    let text = sc.to_json();
    let broken = text.replacen("\"reserve_x\"", "\"reserve_x\" 12", 1);
    match Scenario::from_json(&broken) {
        Err(ScenarioError::Parse { line, column, .. }) => assert!(line > 1 && column > 0),
        other => panic!("{other:?}"),
    }
}

fn engine_log() -> (mevkit_core::State, Vec<EventRecord>, mevkit_core::State) {
    let sc = generate_corpus(&CorpusParams::new(3, 1, 9)).remove(0);
    let st = sc.state().unwrap();
    let (records, end) = record_events(&st, &sc.mempool, 1);
    (st, records, end)
}

#[test]
fn engine_log_replays_exactly() {
    let (st, records, end) = engine_log();
    assert!(records.iter().all(|r| r.kind == EventKind::Swap));
    let mut buf = Vec::new();
    write_event_log(&mut buf, &records).unwrap();
    let parsed = parse_event_log(buf.as_slice()).unwrap();
    assert_eq!(parsed, records);
    let rep = replay_validate(&st, &parsed, &snapshot(&end), &Tolerance::default());
    assert!(rep.ok);
    assert!(rep.skipped.is_empty());
    assert!(rep.fields.iter().all(|f| f.abs_diff.is_zero()));
    assert_eq!(snapshot(&replay(&st, &parsed).state), snapshot(&end));
}

#[test]
fn corrupted_amount_is_localized() {
    let (st, mut records, end) = engine_log();
    let target = records[0].venue.clone();
    let a = records[0].amount_a.unwrap();
    records[0].amount_a = Some(a.checked_add(Amount::ether(5)).unwrap());
    let rep = replay_validate(&st, &records, &snapshot(&end), &Tolerance::default());
    assert!(!rep.ok);
    let bad: Vec<_> = rep.mismatches().map(|f| f.field.clone()).collect();
    assert!(!bad.is_empty());
    assert!(bad.iter().all(|f| f.starts_with(&format!("{target}."))), "{bad:?}");
}

#[test]
fn maker_and_liquidity_records_replay() {
    let sc = near_threshold_cdp();
    let st = sc.state().unwrap();
    let mut txs = sc.mempool.clone();
    txs.extend(mevkit_core::compose::liquidation_templates(&st, &"miner".into()));
    // sell, buy, top-up, then the liquidation fails once the owner tops up;
    // put the liquidation before the top-up.
    txs.swap(2, 3);
    txs.push(Transaction::new(
        "lp",
        "seller",
        "uniswap",
        mevkit_core::Action::AddLiquidity {
            amount_x: mevkit_core::Qty::Fixed(Amount::ether(2)),
            amount_y: mevkit_core::Qty::Fixed(Amount::from(1u64)),
        },
    ));
    let mut st2 = st.clone();
    fund(&mut st2, "seller", "DAI", Amount::ether(10));
    fund(&mut st2, "seller", "ETH", Amount::ether(1));
    let (records, end) = record_events(&st2, &txs, 0);
    let kinds: Vec<_> = records.iter().map(|r| r.kind).collect();
    assert!(kinds.contains(&EventKind::Liquidate));
    assert!(kinds.contains(&EventKind::CdpManipulate));
    assert!(kinds.contains(&EventKind::LiquidityAdd));
    let rep = replay_validate(&st2, &records, &snapshot(&end), &Tolerance::default());
    assert!(rep.ok, "{:?}", rep.mismatches().collect::<Vec<_>>());
}

#[test]
fn parse_errors_carry_position() {
    let head = "block,index,venue,kind,actor,arg,token_a,amount_a,token_b,amount_b,reverted\n";
    let good = "1,0,pool,swap,a,,ETH,10,TKN,9,\n";
    let unknown = format!("{head}{good}1,1,pool,teleport,a,,,,,,\n");
    match parse_event_log(unknown.as_bytes()) {
        Err(EventLogError::UnknownRecordType { record, kind, .. }) => {
            assert_eq!(record, 2);
            assert_eq!(kind, "teleport");
        }
        other => panic!("{other:?}"),
    }
    let amount = format!("{head}{good}1,1,pool,swap,a,,ETH,1x0,,,\n");
    assert!(matches!(parse_event_log(amount.as_bytes()), Err(EventLogError::Parse { record: 2, line: 3, .. })));
    let order = format!("{head}{good}0,5,pool,swap,a,,ETH,1,,,\n");
    assert!(matches!(parse_event_log(order.as_bytes()), Err(EventLogError::Unsorted { record: 2, .. })));
    let missing = "block,index,venue\n1,0,pool\n";
    assert!(matches!(parse_event_log(missing.as_bytes()), Err(EventLogError::Parse { .. })));
}

#[test]
fn reverted_records_are_not_applied() {
    let (st, mut records, _) = engine_log();
    for r in &mut records {
        r.reverted = true;
    }
    let out = replay(&st, &records);
    assert_eq!(out.applied, 0);
    assert_eq!(snapshot(&out.state), snapshot(&st));
}

#[test]
fn corpus_is_deterministic() {
    let a = generate_corpus(&CorpusParams::new(7, 5, 8));
    let b = generate_corpus(&CorpusParams::new(7, 5, 8));
    assert_eq!(a, b);
    let c = generate_corpus(&CorpusParams::new(8, 5, 8));
    assert_ne!(a, c);
    assert!(a.iter().all(|s| s.mempool.len() == 8 && s.validate().is_ok()));
}

#[test]
fn ratio_literals() {
    use mevkit_core::Ratio;
    let p = |s: &str| s.parse::<Ratio>();
    assert_eq!(p("0.05").unwrap(), Ratio::new(1, 20));
    assert_eq!(p("-1.5").unwrap(), Ratio::new(-3, 2));
    assert_eq!(p(".25").unwrap(), Ratio::new(1, 4));
    assert_eq!(p("6/8").unwrap(), Ratio::new(3, 4));
    assert_eq!(p("2").unwrap(), Ratio::new(2, 1));
    for bad in ["1.", "1.2.3", "1/0", "x", "0.-5"] {
        assert!(p(bad).is_err(), "{bad}");
    }
}
