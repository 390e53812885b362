//! System state and the transaction transition function.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::amount::{Amount, U512};
use crate::contracts::{Contract, Price, PriceSource, Reject};
use crate::ids::{AccountId, ContractId, TokenId};
use crate::tx::{Action, CdpOp, Qty, Transaction};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenInfo {
    pub id: TokenId,
    #[serde(default)]
    pub primary: bool,
    #[serde(default = "default_decimals")]
    pub decimals: u32,
}

fn default_decimals() -> u32 {
    18
}

impl TokenInfo {
    pub fn new(id: impl Into<TokenId>, primary: bool) -> Self {
        TokenInfo { id: id.into(), primary, decimals: 18 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("expected exactly one primary token, found {0}")]
    PrimaryToken(usize),
    #[error("duplicate token {0}")]
    DuplicateToken(TokenId),
    #[error("contract id {0} already deployed")]
    ContractExists(ContractId),
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxError {
    #[error("invalid transaction: {0}")]
    Invalid(Reject),
    #[error("no contract registered at {0}")]
    UnknownVenue(ContractId),
}

impl From<Reject> for TxError {
    fn from(r: Reject) -> Self {
        TxError::Invalid(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transaction #{index} failed: {error}")]
pub struct SequenceError {
    pub index: usize,
    pub error: TxError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyMode {
    /// First failure aborts the whole sequence.
    Strict,
    /// Failing transactions become no-ops.
    SkipInvalid,
}

/// Balance ledger plus contract state. Cloning is cheap enough to use states
/// as immutable snapshots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    tokens: Arc<[TokenInfo]>,
    balances: BTreeMap<(AccountId, TokenId), Amount>,
    contracts: BTreeMap<ContractId, Contract>,
    pub block_number: u64,
}

impl State {
    pub fn new(tokens: Vec<TokenInfo>) -> Result<State, StateError> {
        let primaries = tokens.iter().filter(|t| t.primary).count();
        if primaries != 1 {
            return Err(StateError::PrimaryToken(primaries));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &tokens {
            if !seen.insert(&t.id) {
                return Err(StateError::DuplicateToken(t.id.clone()));
            }
        }
        // Primary token first so that index 0 is the primary token.
        let mut tokens = tokens;
        tokens.sort_by_key(|t| !t.primary);
        Ok(State { tokens: tokens.into(), balances: BTreeMap::new(), contracts: BTreeMap::new(), block_number: 0 })
    }

    pub fn tokens(&self) -> &[TokenInfo] {
        &self.tokens
    }

    pub fn primary(&self) -> &TokenId {
        &self.tokens[0].id
    }

    pub fn token(&self, id: &TokenId) -> Option<&TokenInfo> {
        self.tokens.iter().find(|t| t.id == *id)
    }

    /// Absent entries read as zero.
    pub fn balance(&self, account: &AccountId, token: &TokenId) -> Amount {
        self.balances.get(&(account.clone(), token.clone())).copied().unwrap_or_default()
    }

    pub fn set_balance(&mut self, account: &AccountId, token: &TokenId, amount: Amount) {
        let key = (account.clone(), token.clone());
        if amount.is_zero() {
            self.balances.remove(&key);
        } else {
            self.balances.insert(key, amount);
        }
    }

    /// Non-zero balances in key order.
    pub fn balances(&self) -> impl Iterator<Item = (&AccountId, &TokenId, Amount)> {
        self.balances.iter().map(|((a, t), v)| (a, t, *v))
    }

    pub fn accounts(&self) -> Vec<AccountId> {
        let mut v: Vec<AccountId> = self.balances.keys().map(|(a, _)| a.clone()).collect();
        v.dedup();
        v
    }

    pub(crate) fn credit(&mut self, account: &AccountId, token: &TokenId, amount: Amount) -> Result<(), Reject> {
        if amount.is_zero() {
            return Ok(());
        }
        let next = self.balance(account, token).checked_add(amount).ok_or(Reject::Overflow)?;
        self.set_balance(account, token, next);
        Ok(())
    }

    pub(crate) fn debit(&mut self, account: &AccountId, token: &TokenId, amount: Amount) -> Result<(), Reject> {
        if amount.is_zero() {
            return Ok(());
        }
        let next = self.balance(account, token).checked_sub(amount).ok_or(Reject::InsufficientBalance)?;
        self.set_balance(account, token, next);
        Ok(())
    }

    pub fn contract(&self, id: &ContractId) -> Option<&Contract> {
        self.contracts.get(id)
    }

    pub fn contract_mut(&mut self, id: &ContractId) -> Option<&mut Contract> {
        self.contracts.get_mut(id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = (&ContractId, &Contract)> {
        self.contracts.iter()
    }

    /// Adds a contract. Its initial holdings enter the token supply.
    pub fn deploy(&mut self, id: impl Into<ContractId>, contract: Contract) -> Result<(), StateError> {
        let id = id.into();
        if self.contracts.contains_key(&id) {
            return Err(StateError::ContractExists(id));
        }
        for (token, _) in contract.holdings() {
            if self.token(&token).is_none() {
                return Err(StateError::UnknownToken(token));
            }
        }
        self.contracts.insert(id, contract);
        Ok(())
    }

    /// Copy with `contract` deployed at `id`; a no-op if it already exists.
    pub fn with_contract(&self, id: impl Into<ContractId>, contract: Contract) -> Result<State, StateError> {
        let id = id.into();
        let mut next = self.clone();
        match next.deploy(id, contract) {
            Ok(()) | Err(StateError::ContractExists(_)) => Ok(next),
            Err(e) => Err(e),
        }
    }

    /// Sum of `token` over every account and contract holding.
    pub fn total_supply(&self, token: &TokenId) -> Amount {
        let mut sum = U512::ZERO;
        for ((_, t), v) in &self.balances {
            if t == token {
                sum += v.wide();
            }
        }
        for c in self.contracts.values() {
            for (t, v) in c.holdings() {
                if t == *token {
                    sum += v.wide();
                }
            }
        }
        Amount::from_wide(sum).unwrap_or(Amount::MAX)
    }

    /// Price of a CDP book's collateral in loan units.
    pub fn maker_price(&self, source: &PriceSource, loan: &TokenId, collateral: &TokenId) -> Result<Price, TxError> {
        match source {
            PriceSource::Fixed { num, den } => Ok(Price { num: *num, den: *den }),
            PriceSource::Pool { pool } => {
                let p = self
                    .contracts
                    .get(pool)
                    .ok_or_else(|| TxError::UnknownVenue(pool.clone()))?
                    .as_amm()
                    .ok_or(Reject::BadParameter)?;
                let num = p.reserve(loan).ok_or(Reject::BadParameter)?;
                let den = p.reserve(collateral).ok_or(Reject::BadParameter)?;
                Ok(Price { num, den })
            }
        }
    }
}

fn fixed(q: Qty) -> Result<Amount, Reject> {
    q.resolve(None).ok_or(Reject::Unresolved)
}

/// Applies one transaction. On failure the input state is untouched.
pub fn apply_tx(state: &State, tx: &Transaction) -> Result<State, TxError> {
    let mut next = state.clone();
    execute(&mut next, tx)?;
    Ok(next)
}

/// Applies `tx` in place, restoring `state` if it fails.
pub fn apply_tx_in_place(state: &mut State, tx: &Transaction) -> Result<(), TxError> {
    let snapshot = state.clone();
    let r = execute(state, tx);
    if r.is_err() {
        *state = snapshot;
    }
    r
}

/// Like [`apply_tx_in_place`] but leaves `state` unspecified on failure; for
/// callers that hold their own copy to fall back to.
pub(crate) fn apply_tx_unguarded(state: &mut State, tx: &Transaction) -> Result<(), TxError> {
    execute(state, tx)
}

/// Runs `txs` in order. Returns the final state and the indices that applied.
pub fn apply_sequence(state: &State, txs: &[Transaction], mode: ApplyMode) -> Result<(State, Vec<usize>), SequenceError> {
    let mut cur = state.clone();
    let mut applied = Vec::with_capacity(txs.len());
    for (index, tx) in txs.iter().enumerate() {
        match apply_tx(&cur, tx) {
            Ok(s) => {
                cur = s;
                applied.push(index);
            }
            Err(error) => {
                if mode == ApplyMode::Strict {
                    return Err(SequenceError { index, error });
                }
            }
        }
    }
    Ok((cur, applied))
}

/// A block is valid iff strict application succeeds at its block number.
pub fn block_is_valid(state: &State, block: &crate::tx::Block) -> bool {
    let mut s = state.clone();
    s.block_number = block.number;
    apply_sequence(&s, &block.txs, ApplyMode::Strict).is_ok()
}

fn execute(state: &mut State, tx: &Transaction) -> Result<(), TxError> {
    let kind = state.contracts.get(&tx.venue).ok_or_else(|| TxError::UnknownVenue(tx.venue.clone()))?;
    let actor = &tx.actor;
    match (&tx.action, kind) {
        (Action::Swap { token_in, amount_in, min_out }, Contract::Amm(_)) => {
            let amount_in = fixed(*amount_in)?;
            let Some(Contract::Amm(pool)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            let token_out = pool.other(token_in).ok_or(Reject::InvalidToken)?.clone();
            let out = pool.swap_exact_in(token_in, amount_in)?;
            if min_out.is_some_and(|m| out < m) {
                return Err(Reject::Slippage.into());
            }
            state.debit(actor, token_in, amount_in)?;
            state.credit(actor, &token_out, out)?;
        }
        (Action::SwapForExact { token_out, amount_out, max_in }, Contract::Amm(_)) => {
            let amount_out = fixed(*amount_out)?;
            let Some(Contract::Amm(pool)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            let token_in = pool.other(token_out).ok_or(Reject::InvalidToken)?.clone();
            let paid = pool.swap_exact_out(token_out, amount_out)?;
            if max_in.is_some_and(|m| paid > m) {
                return Err(Reject::Slippage.into());
            }
            state.debit(actor, &token_in, paid)?;
            state.credit(actor, token_out, amount_out)?;
        }
        (Action::AddLiquidity { amount_x, amount_y }, Contract::Amm(_)) => {
            let (ax, ay) = (fixed(*amount_x)?, fixed(*amount_y)?);
            let Some(Contract::Amm(pool)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            pool.add_liquidity(actor, ax, ay)?;
            let (tx_token, ty_token) = (pool.token_x.clone(), pool.token_y.clone());
            state.debit(actor, &tx_token, ax)?;
            state.debit(actor, &ty_token, ay)?;
        }
        (Action::RemoveLiquidity { shares }, Contract::Amm(_)) => {
            let shares = fixed(*shares)?;
            let Some(Contract::Amm(pool)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            let (ox, oy) = pool.remove_liquidity(actor, shares)?;
            let (tx_token, ty_token) = (pool.token_x.clone(), pool.token_y.clone());
            state.credit(actor, &tx_token, ox)?;
            state.credit(actor, &ty_token, oy)?;
        }
        (Action::CdpManipulate { op, qty }, Contract::Maker(book)) => {
            let qty = fixed(*qty)?;
            let (loan, coll) = (book.loan_token.clone(), book.collateral_token.clone());
            let price = state.maker_price(&book.price_source.clone(), &loan, &coll)?;
            if qty.is_zero() {
                return Ok(());
            }
            let Some(Contract::Maker(book)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            match op {
                CdpOp::DepositCollateral => {
                    book.deposit_collateral(actor, qty)?;
                    state.debit(actor, &coll, qty)?;
                }
                CdpOp::PayLoan => {
                    book.pay_loan(actor, qty)?;
                    state.debit(actor, &loan, qty)?;
                }
                CdpOp::WithdrawCollateral => {
                    book.withdraw_collateral(price, actor, qty)?;
                    state.credit(actor, &coll, qty)?;
                }
                CdpOp::WithdrawLoan => {
                    book.withdraw_loan(price, actor, qty)?;
                    state.credit(actor, &loan, qty)?;
                }
            }
        }
        (Action::Liquidate { victim }, Contract::Maker(book)) => {
            let (loan, coll) = (book.loan_token.clone(), book.collateral_token.clone());
            let price = state.maker_price(&book.price_source.clone(), &loan, &coll)?;
            let Some(Contract::Maker(book)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            let (repaid, seized) = book.liquidate(price, victim)?;
            state.debit(actor, &loan, repaid)?;
            state.credit(actor, &coll, seized)?;
        }
        (Action::Bet, Contract::Pricebet(_)) => {
            let Some(Contract::Pricebet(rec)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            rec.place(actor)?;
            let (token, stake) = (rec.token.clone(), rec.stake);
            state.debit(actor, &token, stake)?;
        }
        (Action::GetReward, Contract::Pricebet(rec)) => {
            let pool = state
                .contracts
                .get(&rec.oracle)
                .ok_or_else(|| TxError::UnknownVenue(rec.oracle.clone()))?
                .as_amm()
                .ok_or(Reject::BadParameter)?;
            let token_reserve = pool.reserve(&rec.token).ok_or(Reject::BadParameter)?;
            let other = pool.other(&rec.token).ok_or(Reject::BadParameter)?;
            let other_reserve = pool.reserve(other).ok_or(Reject::BadParameter)?;
            let block = state.block_number;
            let Some(Contract::Pricebet(rec)) = state.contracts.get_mut(&tx.venue) else { unreachable!() };
            let paid = rec.claim(actor, token_reserve, other_reserve, block)?;
            let token = rec.token.clone();
            state.credit(actor, &token, paid)?;
        }
        _ => return Err(Reject::WrongContract.into()),
    }
    Ok(())
}
