//! Constant-product pool with Uniswap-style fee and floor rounding.
//!
//! With `fee_bps = 0` the exact-in quote is `floor(y * a / (x + a))`, the
//! integer form of `y - x*y/(x + a)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Reject;
use crate::amount::{Amount, U512};
use crate::ids::{AccountId, TokenId};

pub const BPS: u64 = 10_000;
pub const DEFAULT_FEE_BPS: u32 = 30;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmmPool {
    pub token_x: TokenId,
    pub token_y: TokenId,
    pub reserve_x: Amount,
    pub reserve_y: Amount,
    #[serde(default = "default_fee")]
    pub fee_bps: u32,
    #[serde(default)]
    pub lp_total_supply: Amount,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lp_shares: BTreeMap<AccountId, Amount>,
}

fn default_fee() -> u32 {
    DEFAULT_FEE_BPS
}

/// Which reserve a token sits in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

impl AmmPool {
    /// Pool whose initial liquidity is unowned; the share supply starts at
    /// `isqrt(x * y)` so later providers mint proportionally.
    pub fn new(token_x: impl Into<TokenId>, reserve_x: Amount, token_y: impl Into<TokenId>, reserve_y: Amount, fee_bps: u32) -> Self {
        let mut pool = AmmPool {
            token_x: token_x.into(),
            token_y: token_y.into(),
            reserve_x,
            reserve_y,
            fee_bps,
            lp_total_supply: Amount::ZERO,
            lp_shares: BTreeMap::new(),
        };
        pool.lp_total_supply = pool.genesis_supply();
        pool
    }

    pub(crate) fn genesis_supply(&self) -> Amount {
        Amount::from_wide(self.reserve_x.wide() * self.reserve_y.wide())
            .map(|p| p.isqrt())
            .unwrap_or_else(|| Amount(isqrt_wide(self.reserve_x.wide() * self.reserve_y.wide())))
    }

    pub fn side(&self, token: &TokenId) -> Option<Side> {
        if *token == self.token_x {
            Some(Side::X)
        } else if *token == self.token_y {
            Some(Side::Y)
        } else {
            None
        }
    }

    pub fn reserve(&self, token: &TokenId) -> Option<Amount> {
        match self.side(token)? {
            Side::X => Some(self.reserve_x),
            Side::Y => Some(self.reserve_y),
        }
    }

    pub fn other(&self, token: &TokenId) -> Option<&TokenId> {
        match self.side(token)? {
            Side::X => Some(&self.token_y),
            Side::Y => Some(&self.token_x),
        }
    }

    fn in_out(&self, token_in: &TokenId) -> Result<(Side, Amount, Amount), Reject> {
        match self.side(token_in).ok_or(Reject::InvalidToken)? {
            Side::X => Ok((Side::X, self.reserve_x, self.reserve_y)),
            Side::Y => Ok((Side::Y, self.reserve_y, self.reserve_x)),
        }
    }

    fn gamma(&self) -> Result<u64, Reject> {
        let fee = u64::from(self.fee_bps);
        if fee >= BPS {
            return Err(Reject::BadParameter);
        }
        Ok(BPS - fee)
    }

    /// Output for selling `amount_in`:
    /// `floor(a*g*y / (x*10000 + a*g))` with `g = 10000 - fee_bps`.
    pub fn quote_exact_in(&self, token_in: &TokenId, amount_in: Amount) -> Result<Amount, Reject> {
        let (_, r_in, r_out) = self.in_out(token_in)?;
        if amount_in.is_zero() {
            return Err(Reject::ZeroAmount);
        }
        let gamma = U512::from(self.gamma()?);
        let a = amount_in.wide() * gamma;
        let num = a * r_out.wide();
        let den = r_in.wide() * U512::from(BPS) + a;
        if den.is_zero() {
            return Err(Reject::EmptyPool);
        }
        Amount::from_wide(num / den).ok_or(Reject::Overflow)
    }

    /// Input needed to buy exactly `amount_out`, rounded as Uniswap's
    /// `getAmountIn`: `floor(x*o*10000 / ((y - o)*g)) + 1`.
    pub fn quote_exact_out(&self, token_out: &TokenId, amount_out: Amount) -> Result<Amount, Reject> {
        let token_in = self.other(token_out).ok_or(Reject::InvalidToken)?.clone();
        let (_, r_in, r_out) = self.in_out(&token_in)?;
        if amount_out.is_zero() {
            return Err(Reject::ZeroAmount);
        }
        if amount_out >= r_out {
            return Err(Reject::InsufficientLiquidity);
        }
        let gamma = U512::from(self.gamma()?);
        let num = r_in.wide() * amount_out.wide() * U512::from(BPS);
        let den = (r_out.wide() - amount_out.wide()) * gamma;
        Amount::from_wide(num / den + U512::from(1u64)).ok_or(Reject::Overflow)
    }

    fn settle(&mut self, side_in: Side, amount_in: Amount, amount_out: Amount) -> Result<(), Reject> {
        let (r_in, r_out) = match side_in {
            Side::X => (&mut self.reserve_x, &mut self.reserve_y),
            Side::Y => (&mut self.reserve_y, &mut self.reserve_x),
        };
        let new_in = r_in.checked_add(amount_in).ok_or(Reject::Overflow)?;
        let new_out = r_out.checked_sub(amount_out).ok_or(Reject::InsufficientLiquidity)?;
        *r_in = new_in;
        *r_out = new_out;
        Ok(())
    }

    /// Sells `amount_in` into the pool and returns the output amount.
    pub fn swap_exact_in(&mut self, token_in: &TokenId, amount_in: Amount) -> Result<Amount, Reject> {
        let out = self.quote_exact_in(token_in, amount_in)?;
        let (side, _, _) = self.in_out(token_in)?;
        self.settle(side, amount_in, out)?;
        Ok(out)
    }

    /// Buys `amount_out` of `token_out`; returns the input paid.
    pub fn swap_exact_out(&mut self, token_out: &TokenId, amount_out: Amount) -> Result<Amount, Reject> {
        let amount_in = self.quote_exact_out(token_out, amount_out)?;
        let token_in = self.other(token_out).ok_or(Reject::InvalidToken)?.clone();
        let (side, _, _) = self.in_out(&token_in)?;
        self.settle(side, amount_in, amount_out)?;
        Ok(amount_in)
    }

    /// Deposits both amounts in full and mints shares
    /// `min(ax*L/x, ay*L/y)`, or `isqrt(ax*ay)` for an empty pool.
    pub fn add_liquidity(&mut self, provider: &AccountId, amount_x: Amount, amount_y: Amount) -> Result<Amount, Reject> {
        if amount_x.is_zero() || amount_y.is_zero() {
            return Err(Reject::ZeroAmount);
        }
        let minted = if self.lp_total_supply.is_zero() {
            Amount::from_wide(amount_x.wide() * amount_y.wide())
                .map(|p| p.isqrt())
                .unwrap_or_else(|| Amount(isqrt_wide(amount_x.wide() * amount_y.wide())))
        } else {
            if self.reserve_x.is_zero() || self.reserve_y.is_zero() {
                return Err(Reject::EmptyPool);
            }
            let l = self.lp_total_supply.wide();
            let by_x = amount_x.wide() * l / self.reserve_x.wide();
            let by_y = amount_y.wide() * l / self.reserve_y.wide();
            Amount::from_wide(by_x.min(by_y)).ok_or(Reject::Overflow)?
        };
        if minted.is_zero() {
            return Err(Reject::ZeroAmount);
        }
        self.reserve_x = self.reserve_x.checked_add(amount_x).ok_or(Reject::Overflow)?;
        self.reserve_y = self.reserve_y.checked_add(amount_y).ok_or(Reject::Overflow)?;
        self.lp_total_supply = self.lp_total_supply.checked_add(minted).ok_or(Reject::Overflow)?;
        let held = self.lp_shares.entry(provider.clone()).or_default();
        *held = held.checked_add(minted).ok_or(Reject::Overflow)?;
        Ok(minted)
    }

    /// Burns `shares` and returns the pro-rata floor of each reserve.
    pub fn remove_liquidity(&mut self, provider: &AccountId, shares: Amount) -> Result<(Amount, Amount), Reject> {
        if shares.is_zero() {
            return Err(Reject::ZeroAmount);
        }
        let held = self.lp_shares.get(provider).copied().unwrap_or_default();
        if shares > held || shares > self.lp_total_supply {
            return Err(Reject::InsufficientShares);
        }
        let l = self.lp_total_supply.wide();
        let out_x = Amount::from_wide(shares.wide() * self.reserve_x.wide() / l).ok_or(Reject::Overflow)?;
        let out_y = Amount::from_wide(shares.wide() * self.reserve_y.wide() / l).ok_or(Reject::Overflow)?;
        self.reserve_x = self.reserve_x.checked_sub(out_x).ok_or(Reject::InsufficientLiquidity)?;
        self.reserve_y = self.reserve_y.checked_sub(out_y).ok_or(Reject::InsufficientLiquidity)?;
        self.lp_total_supply = self.lp_total_supply.saturating_sub(shares);
        let left = held.saturating_sub(shares);
        if left.is_zero() {
            self.lp_shares.remove(provider);
        } else {
            self.lp_shares.insert(provider.clone(), left);
        }
        Ok((out_x, out_y))
    }

    /// `reserve_x * reserve_y` widened to 512 bits.
    pub fn product(&self) -> U512 {
        self.reserve_x.wide() * self.reserve_y.wide()
    }
}

fn isqrt_wide(v: U512) -> ruint::aliases::U256 {
    let r = v.root(2);
    Amount::from_wide(r).map(|a| a.0).unwrap_or(ruint::aliases::U256::MAX)
}
