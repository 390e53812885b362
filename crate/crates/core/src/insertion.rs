//! Choosing the free quantity `alpha` of miner-inserted transactions.

use std::io::Write;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::amount::{value_serde, Amount, Value, U256};
use crate::contracts::Contract;
use crate::ordering::Objective;
use crate::state::{apply_tx_in_place, State};
use crate::tx::{Action, Origin, Transaction};

/// One step of a sequence whose templates may mention `alpha`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Tx(Transaction),
    EndBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaSearch {
    pub grid_points: usize,
    pub local_scan: u64,
    /// Overrides the per-sequence default bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Amount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Amount>,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        AlphaSearch { grid_points: 1024, local_scan: 2048, lo: None, hi: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsertionProblem {
    pub state: State,
    pub steps: Vec<Step>,
    pub lo: Amount,
    pub hi: Amount,
}

impl InsertionProblem {
    /// Bounds default to `[1, 2 * largest reserve touched]`.
    pub fn new(state: State, steps: Vec<Step>) -> Self {
        let hi = default_upper_bound(&state, &steps);
        InsertionProblem { state, steps, lo: Amount::from(1u64), hi }
    }

    pub fn from_txs(state: State, txs: Vec<Transaction>) -> Self {
        Self::new(state, txs.into_iter().map(Step::Tx).collect())
    }

    pub fn with_bounds(mut self, lo: Amount, hi: Amount) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// Final state for a given `alpha`, or `None` when a template reverts.
    pub fn run(&self, alpha: Amount) -> Option<State> {
        run_steps(&self.state, &self.steps, alpha)
    }

    pub fn value(&self, alpha: Amount, objective: &dyn Objective) -> Option<Value> {
        self.run(alpha).map(|s| objective.value(&s))
    }
}

pub(crate) fn run_steps(state: &State, steps: &[Step], alpha: Amount) -> Option<State> {
    let mut s = state.clone();
    for step in steps {
        match step {
            Step::EndBlock => s.block_number += 1,
            Step::Tx(tx) => {
                let bound = if tx.has_alpha() { tx.bind_alpha(alpha) } else { tx.clone() };
                if apply_tx_in_place(&mut s, &bound).is_err() && tx.origin == Origin::MinerTemplate {
                    return None;
                }
            }
        }
    }
    Some(s)
}

fn default_upper_bound(state: &State, steps: &[Step]) -> Amount {
    let mut hi = Amount::from(1u64);
    for step in steps {
        let Step::Tx(tx) = step else { continue };
        if !tx.has_alpha() {
            continue;
        }
        let cands: Vec<Amount> = match state.contract(&tx.venue) {
            Some(Contract::Amm(p)) => vec![p.reserve_x, p.reserve_y],
            Some(Contract::Maker(m)) => vec![m.loan_reserve, m.total_collateral().unwrap_or(Amount::MAX)],
            Some(Contract::Pricebet(b)) => vec![b.pot],
            None => vec![],
        };
        for c in cands {
            hi = hi.max(c.checked_add(c).unwrap_or(Amount::MAX));
        }
        if let Action::Swap { token_in, .. } = &tx.action {
            hi = hi.max(state.balance(&tx.actor, token_in));
        }
    }
    hi
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    pub alpha: Amount,
    #[serde(with = "value_serde")]
    pub value: Value,
    pub evaluations: u64,
}

struct Probe<'a> {
    problem: &'a InsertionProblem,
    objective: &'a dyn Objective,
    best: Option<(Value, Amount)>,
    evaluations: u64,
}

impl Probe<'_> {
    fn eval(&mut self, a: Amount) -> Option<Value> {
        self.evaluations += 1;
        let v = self.problem.value(a, self.objective)?;
        let better = match &self.best {
            None => true,
            Some((bv, ba)) => v > *bv || (v == *bv && a < *ba),
        };
        if better {
            self.best = Some((v.clone(), a));
        }
        Some(v)
    }
}

fn geometric_grid(lo: Amount, hi: Amount, points: usize) -> Vec<Amount> {
    let mut out = vec![lo];
    let (flo, fhi) = (lo.to_f64().max(1.0), hi.to_f64());
    if points > 2 && fhi > flo {
        let ratio = (fhi / flo).ln() / (points - 1) as f64;
        for i in 1..points - 1 {
            let x = flo * (ratio * i as f64).exp();
            if let Ok(a) = format!("{:.0}", x.floor()).parse::<Amount>() {
                if a > lo && a < hi {
                    out.push(a);
                }
            }
        }
    }
    out.push(hi);
    out.dedup();
    out
}

/// Grid, then ternary refinement around the best grid point, then a local
/// integer scan. Ties go to the smaller `alpha`.
pub fn optimize_alpha(problem: &InsertionProblem, objective: &dyn Objective) -> Option<AlphaOptimum> {
    optimize_alpha_with(problem, objective, AlphaSearch::default())
}

pub fn optimize_alpha_with(
    problem: &InsertionProblem,
    objective: &dyn Objective,
    cfg: AlphaSearch,
) -> Option<AlphaOptimum> {
    if problem.lo > problem.hi {
        return None;
    }
    let mut probe = Probe { problem, objective, best: None, evaluations: 0 };
    let grid = geometric_grid(problem.lo, problem.hi, cfg.grid_points);
    let vals: Vec<Option<Value>> = grid.iter().map(|&a| probe.eval(a)).collect();
    let (best_idx, _) = vals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().map(|v| (i, v)))
        .fold(None::<(usize, &Value)>, |acc, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        })?;

    // Ternary search on the bracket around the best grid point.
    let mut l = grid[best_idx.saturating_sub(1)];
    let mut r = grid[(best_idx + 1).min(grid.len() - 1)];
    let three = U256::from(3u64);
    let neg = |v: Option<Value>| v.unwrap_or_else(|| Value::from(-1) << 800u32);
    while r.0 - l.0 > three {
        let third = (r.0 - l.0) / three;
        let m1 = Amount(l.0 + third);
        let m2 = Amount(r.0 - third);
        let (v1, v2) = (neg(probe.eval(m1)), neg(probe.eval(m2)));
        if v1 < v2 {
            l = m1;
        } else {
            r = m2;
        }
    }
    let mut a = l;
    while a <= r {
        probe.eval(a);
        a = Amount(a.0 + U256::from(1u64));
    }

    let (_, centre) = probe.best.clone()?;
    let w = U256::from(cfg.local_scan);
    let from = if centre.0 > problem.lo.0 + w { Amount(centre.0 - w) } else { problem.lo };
    let to = if problem.hi.0 - centre.0 > w { Amount(centre.0 + w) } else { problem.hi };
    let mut a = from;
    while a <= to {
        probe.eval(a);
        if a == Amount::MAX {
            break;
        }
        a = Amount(a.0 + U256::from(1u64));
    }

    let (value, alpha) = probe.best?;
    Some(AlphaOptimum { alpha, value, evaluations: probe.evaluations })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: Amount,
    #[serde(with = "value_serde::option")]
    pub value: Option<Value>,
}

/// Objective sampled on a geometric grid over the bounds.
pub fn profit_curve(problem: &InsertionProblem, objective: &dyn Objective, points: usize) -> Vec<CurvePoint> {
    geometric_grid(problem.lo, problem.hi, points.max(2))
        .into_iter()
        .map(|alpha| CurvePoint { alpha, value: problem.value(alpha, objective) })
        .collect()
}

/// `alpha,value` rows; infeasible points get an empty value.
pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "value"])?;
    for p in curve {
        let v = p.value.as_ref().map(|v| v.to_string()).unwrap_or_default();
        w.write_record([p.alpha.to_string(), v])?;
    }
    w.flush()?;
    Ok(())
}

/// Lossy float view, for plotting.
pub fn value_to_f64(v: &Value) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
