use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mevkit_core::compose::{liquidation_templates, oracle_bet_scenario, OracleBetParams};
use mevkit_core::eventlog::{record_events, snapshot, write_event_log};
use mevkit_core::presets;
use mevkit_core::scenario::Scenario;
use mevkit_core::{AmmPool, Amount, Contract, TokenInfo, Transaction};
use serde_json::Value as Json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mevkit"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mevkit")
}

fn report(args: &[&str]) -> Json {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn write(dir: &Path, name: &str, sc: &Scenario) -> String {
    let p = dir.join(name);
    fs::write(&p, sc.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

fn bet_params(b: u128, e: u128, eth_in: &[u128], other_in: &[u128]) -> OracleBetParams {
    OracleBetParams {
        other_reserve: b,
        eth_reserve: e,
        eth_in: eth_in.to_vec(),
        other_in: other_in.to_vec(),
        player_eth: 100,
        player_other: 0,
        player_swaps: false,
        fee_bps: 0,
        deadline: 10,
    }
}

#[test]
fn shipped_scenarios_match_presets() {
    let load = |n: &str| Scenario::from_json(&fs::read_to_string(shipped(n)).unwrap()).unwrap();
    assert_eq!(load("comp_backrun.json"), presets::comp_backrun());
    assert_eq!(load("late_pump_bet.json"), presets::late_pump_bet());
    let mut cdp = presets::near_threshold_cdp();
    cdp.miner.templates = liquidation_templates(&cdp.state().unwrap(), &cdp.miner.account);
    cdp.miner.allow_insert = true;
    assert_eq!(load("near_threshold_cdp.json"), cdp);
    let low = oracle_bet_scenario(&bet_params(10_000, 100, &[300, 200], &[50])).to_scenario("pricebet-low-liquidity");
    assert_eq!(load("pricebet_low_liquidity.json"), low);
    let high = oracle_bet_scenario(&bet_params(1000, 500, &[300, 300], &[200])).to_scenario("pricebet-high-liquidity");
    assert_eq!(load("pricebet_high_liquidity.json"), high);
}

#[test]
fn comp_backrun_mev_near_123_eth() {
    let r = report(&["mev", "--scenario", shipped("comp_backrun.json").to_str().unwrap()]);
    let v: f64 = r["best_value"].as_str().unwrap().parse().unwrap();
    assert!((v / 1e18 - 123.0).abs() < 0.05 * 123.0 && v / 1e18 > 76.0, "{v}");
    assert_eq!(r["best_value"], "123061201464936859816");
    assert_eq!(r["best"]["ordering"], serde_json::json!(["user_sell", "miner_buy", "miner_sell"]));
}

#[test]
fn optimize_insert_agrees_with_mev() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = report(&[
        "optimize-insert",
        "--scenario",
        shipped("comp_backrun.json").to_str().unwrap(),
        "--points",
        "32",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r["optimum"]["value"], "123061201464936859816");
    let csv = fs::read_to_string(out.join("profit_curve.csv")).unwrap();
    assert!(csv.starts_with("alpha,value\n"));
    assert_eq!(csv.lines().count(), 33);
    assert!(out.join("optimize_insert.json").exists());
}

#[test]
fn empty_mempool_mev_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = Scenario::new(vec![TokenInfo::new("ETH", true), TokenInfo::new("TKN", false)], "miner");
    sc.contracts.insert("pool".into(), Contract::Amm(AmmPool::new("TKN", Amount::ether(1000), "ETH", Amount::ether(1000), 30)));
    sc.fund("miner", "ETH", Amount::ether(10));
    let p = write(dir.path(), "empty.json", &sc);
    let r = report(&["mev", "--scenario", &p, "--censor", "on", "--insert", "on"]);
    assert_eq!(r["best_value"], "0");
    assert_eq!(r["best"]["ordering"], serde_json::json!([]));
}

#[test]
fn gen_corpus_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["gen-corpus", "--seed", "7", "--count", "100", "--txs", "8", "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 101);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }
    let other = dir.path().join("c");
    run(&["gen-corpus", "--seed", "8", "--count", "100", "--txs", "8", "--out", other.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("corpus-0000.json")).unwrap(), fs::read(other.join("corpus-0000.json")).unwrap());
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    run(&["gen-corpus", "--seed", "3", "--count", "1", "--txs", "7", "--out", dir.path().to_str().unwrap()]);
    let p = dir.path().join("corpus-0000.json");
    let p = p.to_str().unwrap();
    let one = run(&["spread", "--scenario", p, "--workers", "1"]).stdout;
    let four = run(&["spread", "--scenario", p, "--workers", "4"]).stdout;
    assert!(!one.is_empty());
    assert_eq!(one, four);
    let s1 = run(&["spread", "--scenario", p, "--budget", "50", "--seed", "11", "--workers", "3"]).stdout;
    let s2 = run(&["spread", "--scenario", p, "--budget", "50", "--seed", "11", "--workers", "3"]).stdout;
    assert_eq!(s1, s2);
}

#[test]
fn insert_flag_controls_liquidation() {
    let p = shipped("near_threshold_cdp.json");
    let on = report(&["mev", "--scenario", p.to_str().unwrap()]);
    let off = report(&["mev", "--scenario", p.to_str().unwrap(), "--insert", "off"]);
    assert_eq!(on["best_value"], Amount::ether(10).to_string());
    assert_eq!(off["best_value"], "0");
}

#[test]
fn compose_check_verdicts() {
    let low = report(&["compose-check", "--scenario", shipped("pricebet_low_liquidity.json").to_str().unwrap()]);
    assert_eq!(low["result"]["verdict"], "composable");
    let high = report(&["compose-check", "--scenario", shipped("pricebet_high_liquidity.json").to_str().unwrap()]);
    assert_eq!(high["result"]["verdict"], "not_composable");
    assert_eq!(high["result"]["mev_after"], Amount::ether(100).to_string());
    // A zero baseline stays zero under any epsilon.
    let eps = report(&["compose-check", "--scenario", shipped("pricebet_high_liquidity.json").to_str().unwrap(), "--epsilon", "0.5"]);
    assert_eq!(eps["result"]["verdict"], "not_composable");
    assert_eq!(eps["result"]["epsilon"], "1/2");
}

#[test]
fn k_blocks_emit_series() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&[
        "mev",
        "--scenario",
        shipped("late_pump_bet.json").to_str().unwrap(),
        "--k",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(r["series"], serde_json::json!(["0", Amount::ether(100).to_string()]));
    let csv = fs::read_to_string(dir.path().join("mev_series.csv")).unwrap();
    assert_eq!(csv, format!("block,value\n1,0\n2,{}\n", Amount::ether(100)));
}

#[test]
fn wmev_constant_increment() {
    let r = report(&[
        "wmev",
        "--scenario",
        shipped("comp_backrun.json").to_str().unwrap(),
        "--f",
        "1/2",
        "--increment",
        "1000",
        "--horizon",
        "64",
        "--mining-cost",
        "7",
    ]);
    // f m / (1 - f) = 1000, short by the tail.
    let floor: i64 = r["wmev_floor"].as_str().unwrap().parse().unwrap();
    assert_eq!(floor, 999);
    assert_eq!(r["mining_cost"], "7");
    assert!(r["remainder_bound"].is_string());
}

#[test]
fn replay_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let sc = presets::comp_backrun();
    let state = sc.state().unwrap();
    let txs = vec![
        Transaction::swap("a", presets::COMP_BACKRUN_USER, "uniswap_v2", "COMP", Amount::ether(500)),
        Transaction::swap("b", "miner", "sushiswap", "ETH", Amount::ether(20)),
        Transaction::swap("c", "miner", "uniswap_v2", "ETH", Amount::ether(3)),
    ];
    let (records, end) = record_events(&state, &txs, 1);
    let log = dir.path().join("log.csv");
    write_event_log(fs::File::create(&log).unwrap(), &records).unwrap();
    let expected = dir.path().join("expected.json");
    fs::write(&expected, serde_json::to_string(&snapshot(&end)).unwrap()).unwrap();
    let scen = write(dir.path(), "s.json", &sc);
    let args = ["replay", "--scenario", &scen, "--log", log.to_str().unwrap(), "--expected", expected.to_str().unwrap()];
    let ok = run(&args);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let r: Json = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(r["ok"], true);
    assert_eq!(r["applied"], 3);

    let text = fs::read_to_string(&log).unwrap().replace(&Amount::ether(20).to_string(), &Amount::ether(21).to_string());
    fs::write(&log, text).unwrap();
    let bad = run(&args);
    assert_eq!(bad.status.code(), Some(1));
    let r: Json = serde_json::from_slice(&bad.stdout).unwrap();
    let off: Vec<&str> = r["fields"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["within"] == false)
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    assert_eq!(off, ["sushiswap.reserve_x", "sushiswap.reserve_y"]);
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_eq!(run(&["mev"]).status.code(), Some(2));
    let p = shipped("comp_backrun.json");
    let p = p.to_str().unwrap();
    assert_eq!(run(&["mev", "--scenario", p, "--budget", "lots"]).status.code(), Some(2));
    assert_eq!(run(&["mev", "--scenario", p, "--censor", "maybe"]).status.code(), Some(2));
    assert_eq!(run(&["mev", "--scenario", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["compose-check", "--scenario", p]).status.code(), Some(2));
    assert_eq!(run(&["spread", "--scenario", p]).status.code(), Some(2));
}
