use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use mevkit_core::compose::check_composability;
use mevkit_core::corpus::{generate_corpus, CorpusParams};
use mevkit_core::eventlog::{parse_event_log, replay_validate, Snapshot, Tolerance};
use mevkit_core::insertion::{optimize_alpha_with, profit_curve, write_curve_csv, InsertionProblem};
use mevkit_core::metrics::{
    ev, k_mev, player_objective, value_spread, wmev_from_series, BlockProbabilities, MultiBlockStrategy,
};
use mevkit_core::scenario::{load_scenario, Scenario};
use mevkit_core::{AccountId, Value};
use serde::Serialize;
use serde_json::json;

use crate::{CorpusArgs, InsertArgs, ReplayArgs, RunArgs, SpreadArgs, WmevArgs};

fn emit(report: &impl Serialize, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn write_series(out: Option<&Path>, name: &str, series: &[Value]) -> Result<()> {
    let Some(dir) = out else { return Ok(()) };
    fs::create_dir_all(dir)?;
    let mut f = File::create(dir.join(name))?;
    writeln!(f, "block,value")?;
    for (i, v) in series.iter().enumerate() {
        writeln!(f, "{},{v}", i + 1)?;
    }
    Ok(())
}

fn parse_value(s: &str, flag: &str) -> Result<Value> {
    s.parse().map_err(|_| anyhow!("{flag} {s:?}: expected an integer in base units"))
}

pub fn replay(a: &ReplayArgs) -> Result<bool> {
    let sc = load_scenario(&a.scenario)?;
    let state = sc.state()?;
    let f = File::open(&a.log).with_context(|| format!("opening {}", a.log.display()))?;
    let records = parse_event_log(BufReader::new(f)).with_context(|| format!("in {}", a.log.display()))?;
    let text = fs::read_to_string(&a.expected).with_context(|| format!("reading {}", a.expected.display()))?;
    let expected: Snapshot = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.expected.display()))?;
    let tol = Tolerance { units_per_swap: a.units_per_swap, relative: a.relative.clone() };
    let report = replay_validate(&state, &records, &expected, &tol);
    emit(&report, a.out.as_deref(), "replay.json")?;
    if !report.ok {
        for d in report.mismatches() {
            eprintln!("mismatch {}: expected {} got {} (diff {})", d.field, d.expected, d.actual, d.abs_diff);
        }
    }
    Ok(report.ok)
}

pub fn mev(a: &RunArgs) -> Result<bool> {
    let sc = a.load()?;
    let state = sc.state()?;
    let model = sc.miner_model();
    let budget = sc.search_budget();
    let k = sc.miner.k.max(1);
    let (best, series, paths, exhaustive) = if k == 1 {
        let rep = ev(&model, &state, &sc.space(), &sc.valuation, &budget);
        let v = rep.best_value().cloned().unwrap_or_default();
        (rep.best, vec![v], rep.paths_explored, rep.exhaustive)
    } else {
        let rep = k_mev(&model, &state, &sc.space(), k, &sc.valuation, &budget, MultiBlockStrategy::Greedy);
        (rep.best, rep.series, rep.paths_explored, rep.exhaustive)
    };
    let best_value = series.last().cloned().unwrap_or_default();
    let report = json!({
        "command": "mev",
        "scenario": sc.name,
        "players": model.players,
        "k": k,
        "best_value": best_value.to_string(),
        "best": best,
        "series": series.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "paths_explored": paths,
        "exhaustive": exhaustive,
    });
    emit(&report, a.out.as_deref(), "mev.json")?;
    write_series(a.out.as_deref(), "mev_series.csv", &series)?;
    Ok(true)
}

pub fn spread(a: &SpreadArgs) -> Result<bool> {
    let sc = a.run.load()?;
    let state = sc.state()?;
    let who: AccountId = match (&a.account, &sc.beneficiary) {
        (Some(x), _) => x.as_str().into(),
        (None, Some(b)) => b.clone(),
        (None, None) => return Err(anyhow!("no --account given and the scenario names no beneficiary")),
    };
    let s = value_spread(&who, &state, &sc.space(), &sc.valuation, &sc.search_budget());
    let report = json!({
        "command": "spread",
        "scenario": sc.name,
        "spread": s.spread().to_string(),
        "result": s,
    });
    emit(&report, a.run.out.as_deref(), "spread.json")?;
    Ok(true)
}

pub fn compose_check(a: &RunArgs) -> Result<bool> {
    let sc = a.load()?;
    let state = sc.state()?;
    let nc = sc.new_contract.as_ref().ok_or_else(|| anyhow!("scenario has no new_contract"))?;
    let v = check_composability(
        &state,
        &nc.id,
        &nc.contract,
        &sc.players(),
        &sc.epsilon,
        &sc.space(),
        &sc.valuation,
        &sc.search_budget(),
    )?;
    let report = json!({
        "command": "compose-check",
        "scenario": sc.name,
        "contract": nc.id,
        "result": v,
    });
    emit(&report, a.out.as_deref(), "compose.json")?;
    Ok(true)
}

fn insertion_problem(sc: &Scenario) -> Result<InsertionProblem> {
    let state = sc.state()?;
    let space = sc.space();
    let txs = space.mempool.into_iter().chain(space.templates).collect();
    let mut p = InsertionProblem::from_txs(state, txs);
    if let Some(b) = &sc.alpha_bounds {
        p = p.with_bounds(b.lo, b.hi);
    }
    Ok(p)
}

pub fn optimize_insert(a: &InsertArgs) -> Result<bool> {
    let sc = a.run.load()?;
    let problem = insertion_problem(&sc)?;
    let players = sc.players();
    let objective = player_objective(&problem.state, &players, &sc.valuation);
    let best = optimize_alpha_with(&problem, &objective, sc.budget.alpha);
    let report = json!({
        "command": "optimize-insert",
        "scenario": sc.name,
        "lo": problem.lo,
        "hi": problem.hi,
        "feasible": best.is_some(),
        "optimum": best,
    });
    emit(&report, a.run.out.as_deref(), "optimize_insert.json")?;
    if let Some(dir) = a.run.out.as_deref() {
        let curve = profit_curve(&problem, &objective, a.points);
        write_curve_csv(File::create(dir.join("profit_curve.csv"))?, &curve)?;
    }
    Ok(true)
}

pub fn wmev(a: &WmevArgs) -> Result<bool> {
    let sc = a.run.load()?;
    let state = sc.state()?;
    let mut model = sc.miner_model();
    if let Some(f) = &a.f {
        model.blocks = BlockProbabilities::Geometric { f: f.clone() };
    }
    model.increment = a.increment.as_deref().map(|s| parse_value(s, "--increment")).transpose()?;
    model.mining_cost = a.mining_cost.as_deref().map(|s| parse_value(s, "--mining-cost")).transpose()?;
    let horizon = a.horizon.max(1);
    let (mut series, exhaustive) = match &model.increment {
        Some(m) => ((1..=horizon).map(|k| m * Value::from(k)).collect(), true),
        None => {
            let rep = k_mev(&model, &state, &sc.space(), horizon as u32, &sc.valuation, &sc.search_budget(), MultiBlockStrategy::Greedy);
            (rep.series, rep.exhaustive)
        }
    };
    let last = series.last().cloned().unwrap_or_default();
    series.resize(horizon, last);
    let w = wmev_from_series(&model.blocks, &series, model.increment.as_ref());
    let report = json!({
        "command": "wmev",
        "scenario": sc.name,
        "blocks": model.blocks,
        "wmev": w.value,
        "wmev_floor": w.value.0.floor().to_integer().to_string(),
        "horizon": w.horizon,
        "remainder_bound": w.remainder_bound,
        "mining_cost": model.mining_cost.as_ref().map(|v| v.to_string()),
        "exhaustive": exhaustive,
    });
    emit(&report, a.run.out.as_deref(), "wmev.json")?;
    write_series(a.run.out.as_deref(), "kmev_series.csv", &series)?;
    Ok(true)
}

pub fn gen_corpus(a: &CorpusArgs) -> Result<bool> {
    let params = CorpusParams {
        seed: a.seed,
        count: a.count,
        min_txs: a.txs,
        max_txs: a.max_txs.unwrap_or(a.txs).max(a.txs),
        max_pools: a.pools.max(1),
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut files = Vec::new();
    for sc in generate_corpus(&params) {
        let name = format!("{}.json", sc.name);
        fs::write(a.out.join(&name), sc.to_json() + "\n")?;
        files.push(name);
    }
    emit(&json!({ "command": "gen-corpus", "params": params, "files": files }), Some(&a.out), "manifest.json")?;
    Ok(true)
}
