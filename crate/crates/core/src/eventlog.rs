//! Flat event-log ingestion and replay against recorded final state.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::amount::{Amount, Ratio};
use crate::contracts::{Contract, PriceSource};
use crate::ids::{AccountId, ContractId, TokenId};
use crate::state::{apply_tx_in_place, State, TxError};
use crate::tx::{Action, CdpOp, Qty, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Swap,
    LiquidityAdd,
    LiquidityRemove,
    CdpManipulate,
    Liquidate,
    PriceUpdate,
    FeeUpdate,
}

impl EventKind {
    fn parse(s: &str) -> Option<EventKind> {
        Some(match s {
            "swap" => EventKind::Swap,
            "liquidity_add" => EventKind::LiquidityAdd,
            "liquidity_remove" => EventKind::LiquidityRemove,
            "cdp_manipulate" => EventKind::CdpManipulate,
            "liquidate" => EventKind::Liquidate,
            "price_update" => EventKind::PriceUpdate,
            "fee_update" => EventKind::FeeUpdate,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Swap => "swap",
            EventKind::LiquidityAdd => "liquidity_add",
            EventKind::LiquidityRemove => "liquidity_remove",
            EventKind::CdpManipulate => "cdp_manipulate",
            EventKind::Liquidate => "liquidate",
            EventKind::PriceUpdate => "price_update",
            EventKind::FeeUpdate => "fee_update",
        }
    }
}

/// One row. Column meaning per kind:
///
/// | kind | arg | token_a / amount_a | token_b / amount_b |
/// |---|---|---|---|
/// | swap | | token in, amount in | token out, amount out (informational) |
/// | liquidity_add | | x deposited | y deposited |
/// | liquidity_remove | | x withdrawn | y withdrawn |
/// | cdp_manipulate | op | quantity | |
/// | liquidate | victim | | |
/// | price_update | | price numerator | price denominator |
/// | fee_update | | new debt of `actor` | |
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub block: u64,
    pub index: u32,
    pub venue: ContractId,
    pub kind: EventKind,
    pub actor: AccountId,
    #[serde(default)]
    pub arg: String,
    #[serde(default)]
    pub token_a: Option<TokenId>,
    #[serde(default)]
    pub amount_a: Option<Amount>,
    #[serde(default)]
    pub token_b: Option<TokenId>,
    #[serde(default)]
    pub amount_b: Option<Amount>,
    #[serde(default)]
    pub reverted: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum EventLogError {
    #[error("record {record} (line {line}): {message}")]
    Parse { record: usize, line: u64, message: String },
    #[error("record {record} (line {line}): unknown record type {kind:?}")]
    UnknownRecordType { record: usize, line: u64, kind: String },
    #[error("record {record} (line {line}) is out of (block, index) order")]
    Unsorted { record: usize, line: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

const COLUMNS: [&str; 11] =
    ["block", "index", "venue", "kind", "actor", "arg", "token_a", "amount_a", "token_b", "amount_b", "reverted"];

pub fn parse_event_log<R: Read>(input: R) -> Result<Vec<EventRecord>, EventLogError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx: Vec<Option<usize>> = COLUMNS.iter().map(|c| col(c)).collect();
    for (name, i) in COLUMNS.iter().zip(&idx).take(5) {
        if i.is_none() {
            return Err(EventLogError::Parse { record: 0, line: 1, message: format!("missing column {name}") });
        }
    }
    let mut out: Vec<EventRecord> = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let record = n + 1;
        let get = |k: usize| idx[k].and_then(|i| row.get(i)).unwrap_or("");
        let err = |message: String| EventLogError::Parse { record, line, message };
        let int = |k: usize| -> Result<u64, EventLogError> {
            get(k).parse().map_err(|_| err(format!("bad {} {:?}", COLUMNS[k], get(k))))
        };
        let opt_amount = |k: usize| -> Result<Option<Amount>, EventLogError> {
            let s = get(k);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| err(format!("bad {} {:?}", COLUMNS[k], s)))
        };
        let opt_token = |k: usize| Some(get(k)).filter(|s| !s.is_empty()).map(TokenId::new);
        let kind = EventKind::parse(get(3))
            .ok_or_else(|| EventLogError::UnknownRecordType { record, line, kind: get(3).to_string() })?;
        let reverted = match get(10) {
            "" | "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(err(format!("bad reverted flag {other:?}"))),
        };
        let rec = EventRecord {
            block: int(0)?,
            index: int(1)? as u32,
            venue: ContractId::new(get(2)),
            kind,
            actor: AccountId::new(get(4)),
            arg: get(5).to_string(),
            token_a: opt_token(6),
            amount_a: opt_amount(7)?,
            token_b: opt_token(8),
            amount_b: opt_amount(9)?,
            reverted,
        };
        if let Some(prev) = out.last() {
            if (prev.block, prev.index) >= (rec.block, rec.index) {
                return Err(EventLogError::Unsorted { record, line });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_event_log<W: Write>(out: W, records: &[EventRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let s = |a: &Option<Amount>| a.map(|a| a.to_string()).unwrap_or_default();
    let t = |a: &Option<TokenId>| a.as_ref().map(|a| a.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.block.to_string(),
            r.index.to_string(),
            r.venue.to_string(),
            r.kind.as_str().to_string(),
            r.actor.to_string(),
            r.arg.clone(),
            t(&r.token_a),
            s(&r.amount_a),
            t(&r.token_b),
            s(&r.amount_b),
            if r.reverted { "1".into() } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pool reserves and Maker books, the fields replay is checked against.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default)]
    pub pools: BTreeMap<ContractId, PoolSnapshot>,
    #[serde(default)]
    pub books: BTreeMap<ContractId, BookSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub reserve_x: Amount,
    pub reserve_y: Amount,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub collateral: BTreeMap<AccountId, Amount>,
    pub debt: BTreeMap<AccountId, Amount>,
}

pub fn snapshot(state: &State) -> Snapshot {
    let mut s = Snapshot::default();
    for (id, c) in state.contracts() {
        match c {
            Contract::Amm(p) => {
                s.pools.insert(id.clone(), PoolSnapshot { reserve_x: p.reserve_x, reserve_y: p.reserve_y });
            }
            Contract::Maker(m) => {
                s.books.insert(id.clone(), BookSnapshot { collateral: m.collateral.clone(), debt: m.debt.clone() });
            }
            Contract::Pricebet(_) => {}
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub record: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub state: State,
    pub applied: usize,
    pub skipped: Vec<SkippedRecord>,
    /// Applied swaps per pool.
    pub swaps: BTreeMap<ContractId, u64>,
}

fn top_up(state: &mut State, who: &AccountId, token: &TokenId, need: Amount) {
    let have = state.balance(who, token);
    if have < need {
        state.set_balance(who, token, need);
    }
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, String> {
    v.ok_or_else(|| format!("missing {what}"))
}

fn replay_one(state: &mut State, r: &EventRecord) -> Result<bool, String> {
    let contract = state.contract(&r.venue).ok_or_else(|| TxError::UnknownVenue(r.venue.clone()).to_string())?.clone();
    let run = |state: &mut State, action: Action| {
        let tx = Transaction::new(format!("{}:{}", r.block, r.index), r.actor.clone(), r.venue.clone(), action);
        apply_tx_in_place(state, &tx).map_err(|e| e.to_string())
    };
    match (r.kind, &contract) {
        (EventKind::Swap, Contract::Amm(_)) => {
            let (token, amount) = (need(r.token_a.clone(), "token_a")?, need(r.amount_a, "amount_a")?);
            top_up(state, &r.actor, &token, amount);
            run(state, Action::Swap { token_in: token, amount_in: Qty::Fixed(amount), min_out: None })?;
            return Ok(true);
        }
        (EventKind::LiquidityAdd, Contract::Amm(p)) => {
            let (ax, ay) = (need(r.amount_a, "amount_a")?, need(r.amount_b, "amount_b")?);
            top_up(state, &r.actor, &p.token_x, ax);
            top_up(state, &r.actor, &p.token_y, ay);
            run(state, Action::AddLiquidity { amount_x: Qty::Fixed(ax), amount_y: Qty::Fixed(ay) })?;
        }
        (EventKind::LiquidityRemove, Contract::Amm(p)) => {
            // Burn events carry the withdrawn amounts; shares are implied.
            let (ax, ay) = (need(r.amount_a, "amount_a")?, need(r.amount_b, "amount_b")?);
            let (Some(rx), Some(ry)) = (p.reserve_x.checked_sub(ax), p.reserve_y.checked_sub(ay)) else {
                return Err("withdrawal exceeds reserves".into());
            };
            let burned = if p.reserve_x.is_zero() {
                Amount::ZERO
            } else {
                Amount::from_wide(p.lp_total_supply.wide() * ax.wide() / p.reserve_x.wide()).unwrap_or(Amount::ZERO)
            };
            let Some(Contract::Amm(pool)) = state.contract_mut(&r.venue) else { unreachable!() };
            pool.reserve_x = rx;
            pool.reserve_y = ry;
            pool.lp_total_supply = pool.lp_total_supply.saturating_sub(burned);
            let (tx_, ty_) = (pool.token_x.clone(), pool.token_y.clone());
            let (bx, by) = (state.balance(&r.actor, &tx_), state.balance(&r.actor, &ty_));
            state.set_balance(&r.actor, &tx_, bx.checked_add(ax).unwrap_or(Amount::MAX));
            state.set_balance(&r.actor, &ty_, by.checked_add(ay).unwrap_or(Amount::MAX));
        }
        (EventKind::CdpManipulate, Contract::Maker(m)) => {
            let op = match r.arg.as_str() {
                "deposit_collateral" => CdpOp::DepositCollateral,
                "pay_loan" => CdpOp::PayLoan,
                "withdraw_collateral" => CdpOp::WithdrawCollateral,
                "withdraw_loan" => CdpOp::WithdrawLoan,
                other => return Err(format!("unknown cdp op {other:?}")),
            };
            let qty = need(r.amount_a, "amount_a")?;
            match op {
                CdpOp::DepositCollateral => top_up(state, &r.actor, &m.collateral_token, qty),
                CdpOp::PayLoan => top_up(state, &r.actor, &m.loan_token, qty),
                CdpOp::WithdrawLoan => {
                    if m.loan_reserve < qty {
                        let Some(Contract::Maker(book)) = state.contract_mut(&r.venue) else { unreachable!() };
                        book.loan_reserve = qty;
                    }
                }
                CdpOp::WithdrawCollateral => {}
            }
            run(state, Action::CdpManipulate { op, qty: Qty::Fixed(qty) })?;
        }
        (EventKind::Liquidate, Contract::Maker(_)) => {
            let victim = AccountId::new(r.arg.as_str());
            run(state, Action::Liquidate { victim })?;
        }
        (EventKind::PriceUpdate, Contract::Maker(_)) => {
            let (num, den) = (need(r.amount_a, "amount_a")?, need(r.amount_b, "amount_b")?);
            if den.is_zero() {
                return Err("zero price denominator".into());
            }
            let Some(Contract::Maker(book)) = state.contract_mut(&r.venue) else { unreachable!() };
            book.price_source = PriceSource::Fixed { num, den };
        }
        (EventKind::FeeUpdate, Contract::Maker(_)) => {
            let debt = need(r.amount_a, "amount_a")?;
            let Some(Contract::Maker(book)) = state.contract_mut(&r.venue) else { unreachable!() };
            book.set_debt(&r.actor, debt);
        }
        (kind, _) => return Err(format!("{} does not apply to {}", kind.as_str(), r.venue)),
    }
    Ok(false)
}

/// Applies each non-reverted record in order. Actors are topped up with
/// whatever the record spends, since logs carry no balances.
pub fn replay(state: &State, records: &[EventRecord]) -> ReplayOutcome {
    let mut s = state.clone();
    let (mut applied, mut skipped, mut swaps) = (0, Vec::new(), BTreeMap::new());
    for (i, r) in records.iter().enumerate() {
        if r.reverted {
            continue;
        }
        s.block_number = r.block;
        match replay_one(&mut s, r) {
            Ok(was_swap) => {
                applied += 1;
                if was_swap {
                    *swaps.entry(r.venue.clone()).or_default() += 1;
                }
            }
            Err(reason) => skipped.push(SkippedRecord { record: i + 1, reason }),
        }
    }
    ReplayOutcome { state: s, applied, skipped, swaps }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Allowed absolute reserve drift per applied swap on the pool.
    pub units_per_swap: u64,
    /// Optional relative tolerance applied to every field.
    #[serde(default)]
    pub relative: Option<Ratio>,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { units_per_swap: 1, relative: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub field: String,
    pub expected: Amount,
    pub actual: Amount,
    pub abs_diff: Amount,
    pub rel_diff: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub records: usize,
    pub applied: usize,
    pub skipped: Vec<SkippedRecord>,
    pub fields: Vec<FieldDiff>,
    pub ok: bool,
}

impl DiffReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &FieldDiff> {
        self.fields.iter().filter(|f| !f.within)
    }
}

fn diff(field: String, expected: Amount, actual: Amount, allowed: u64, rel: Option<&Ratio>) -> FieldDiff {
    let abs = if expected > actual { expected.saturating_sub(actual) } else { actual.saturating_sub(expected) };
    let rel_exact = if expected.is_zero() {
        if abs.is_zero() { BigRational::zero() } else { BigRational::from_integer(1.into()) }
    } else {
        abs.to_rational() / expected.to_rational()
    };
    let within = abs <= Amount::from(allowed) || rel.is_some_and(|r| rel_exact <= r.0);
    FieldDiff { field, expected, actual, abs_diff: abs, rel_diff: rel_exact.to_f64().unwrap_or(f64::INFINITY), within }
}

/// Replays `records` from `initial` and compares with `expected`.
pub fn replay_validate(initial: &State, records: &[EventRecord], expected: &Snapshot, tol: &Tolerance) -> DiffReport {
    let outcome = replay(initial, records);
    let actual = snapshot(&outcome.state);
    let rel = tol.relative.as_ref();
    let mut fields = Vec::new();
    for (id, want) in &expected.pools {
        let got = actual.pools.get(id);
        let allowed = tol.units_per_swap.saturating_mul(outcome.swaps.get(id).copied().unwrap_or(0));
        let zero = Amount::ZERO;
        fields.push(diff(format!("{id}.reserve_x"), want.reserve_x, got.map_or(zero, |p| p.reserve_x), allowed, rel));
        fields.push(diff(format!("{id}.reserve_y"), want.reserve_y, got.map_or(zero, |p| p.reserve_y), allowed, rel));
    }
    for (id, want) in &expected.books {
        let empty = BookSnapshot::default();
        let got = actual.books.get(id).unwrap_or(&empty);
        for (name, w, g) in [("collateral", &want.collateral, &got.collateral), ("debt", &want.debt, &got.debt)] {
            let keys: std::collections::BTreeSet<&AccountId> = w.keys().chain(g.keys()).collect();
            for k in keys {
                let (e, a) = (w.get(k).copied().unwrap_or_default(), g.get(k).copied().unwrap_or_default());
                fields.push(diff(format!("{id}.{name}[{k}]"), e, a, 0, rel));
            }
        }
    }
    let ok = fields.iter().all(|f| f.within);
    DiffReport { records: records.len(), applied: outcome.applied, skipped: outcome.skipped, fields, ok }
}

/// Runs `txs` and logs the successful ones, as a chain export would.
pub fn record_events(state: &State, txs: &[Transaction], block: u64) -> (Vec<EventRecord>, State) {
    let mut s = state.clone();
    s.block_number = block;
    let mut out = Vec::new();
    for (i, tx) in txs.iter().enumerate() {
        let before = s.clone();
        if apply_tx_in_place(&mut s, tx).is_err() {
            continue;
        }
        let base = |kind: EventKind| EventRecord {
            block,
            index: i as u32,
            venue: tx.venue.clone(),
            kind,
            actor: tx.actor.clone(),
            arg: String::new(),
            token_a: None,
            amount_a: None,
            token_b: None,
            amount_b: None,
            reverted: false,
        };
        let pool_delta = |id: &ContractId| -> (Amount, Amount, Amount, Amount) {
            let (Some(Contract::Amm(p0)), Some(Contract::Amm(p1))) = (before.contract(id), s.contract(id)) else {
                return Default::default();
            };
            (p0.reserve_x, p0.reserve_y, p1.reserve_x, p1.reserve_y)
        };
        let rec = match &tx.action {
            Action::Swap { .. } | Action::SwapForExact { .. } => {
                let (x0, y0, x1, y1) = pool_delta(&tx.venue);
                let Some(Contract::Amm(p)) = s.contract(&tx.venue) else { continue };
                let (tin, ain, tout, aout) = if x1 > x0 {
                    (p.token_x.clone(), x1.saturating_sub(x0), p.token_y.clone(), y0.saturating_sub(y1))
                } else {
                    (p.token_y.clone(), y1.saturating_sub(y0), p.token_x.clone(), x0.saturating_sub(x1))
                };
                EventRecord { token_a: Some(tin), amount_a: Some(ain), token_b: Some(tout), amount_b: Some(aout), ..base(EventKind::Swap) }
            }
            Action::AddLiquidity { .. } | Action::RemoveLiquidity { .. } => {
                let (x0, y0, x1, y1) = pool_delta(&tx.venue);
                let Some(Contract::Amm(p)) = s.contract(&tx.venue) else { continue };
                let add = x1 >= x0;
                let (ax, ay) = if add { (x1.saturating_sub(x0), y1.saturating_sub(y0)) } else { (x0.saturating_sub(x1), y0.saturating_sub(y1)) };
                let kind = if add { EventKind::LiquidityAdd } else { EventKind::LiquidityRemove };
                EventRecord {
                    token_a: Some(p.token_x.clone()),
                    amount_a: Some(ax),
                    token_b: Some(p.token_y.clone()),
                    amount_b: Some(ay),
                    ..base(kind)
                }
            }
            Action::CdpManipulate { op, qty } => {
                let arg = match op {
                    CdpOp::DepositCollateral => "deposit_collateral",
                    CdpOp::PayLoan => "pay_loan",
                    CdpOp::WithdrawCollateral => "withdraw_collateral",
                    CdpOp::WithdrawLoan => "withdraw_loan",
                };
                EventRecord { arg: arg.into(), amount_a: qty.resolve(None), ..base(EventKind::CdpManipulate) }
            }
            Action::Liquidate { victim } => EventRecord { arg: victim.to_string(), ..base(EventKind::Liquidate) },
            Action::Bet | Action::GetReward => continue,
        };
        out.push(rec);
    }
    (out, s)
}
