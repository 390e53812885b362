//! Single-collateral CDP book priced by a pool.
//!
//! All safety checks compare `price_num * collateral * ratio_den` against
//! `ratio_num * debt * price_den`, so no quotient is ever formed.

use std::collections::BTreeMap;

use ruint::Uint;
use serde::{Deserialize, Serialize};

use super::Reject;
use crate::amount::Amount;
use crate::ids::{AccountId, ContractId, TokenId};

type U768 = Uint<768, 12>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceSource {
    /// Loan-token reserve over collateral-token reserve of this pool.
    Pool { pool: ContractId },
    /// Externally fed price, `num` loan units per `den` collateral units.
    Fixed { num: Amount, den: Amount },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiquidationOutcome {
    /// Liquidator takes the whole collateral and repays nothing.
    #[default]
    FullCollateral,
    /// Liquidator repays the debt and receives `debt / price` collateral.
    Efficient,
}

/// Price as a pair `(loan units, collateral units)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Price {
    pub num: Amount,
    pub den: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MakerBook {
    pub loan_token: TokenId,
    pub collateral_token: TokenId,
    #[serde(default = "default_ratio_num")]
    pub ratio_num: u64,
    #[serde(default = "default_ratio_den")]
    pub ratio_den: u64,
    #[serde(default)]
    pub collateral: BTreeMap<AccountId, Amount>,
    #[serde(default)]
    pub debt: BTreeMap<AccountId, Amount>,
    pub price_source: PriceSource,
    /// Loan tokens held by the contract; loans are paid out of it.
    #[serde(default)]
    pub loan_reserve: Amount,
    #[serde(default)]
    pub liquidation: LiquidationOutcome,
}

fn default_ratio_num() -> u64 {
    3
}

fn default_ratio_den() -> u64 {
    2
}

fn wide(a: Amount) -> U768 {
    U768::from(a.0)
}

impl MakerBook {
    pub fn new(loan_token: impl Into<TokenId>, collateral_token: impl Into<TokenId>, price_source: PriceSource) -> Self {
        MakerBook {
            loan_token: loan_token.into(),
            collateral_token: collateral_token.into(),
            ratio_num: 3,
            ratio_den: 2,
            collateral: BTreeMap::new(),
            debt: BTreeMap::new(),
            price_source,
            loan_reserve: Amount::ZERO,
            liquidation: LiquidationOutcome::FullCollateral,
        }
    }

    pub fn collateral_of(&self, who: &AccountId) -> Amount {
        self.collateral.get(who).copied().unwrap_or_default()
    }

    pub fn debt_of(&self, who: &AccountId) -> Amount {
        self.debt.get(who).copied().unwrap_or_default()
    }

    /// `price * collateral >= ratio * debt`.
    pub fn is_safe(&self, price: Price, collateral: Amount, debt: Amount) -> bool {
        let lhs = wide(price.num) * wide(collateral) * U768::from(self.ratio_den);
        let rhs = U768::from(self.ratio_num) * wide(debt) * wide(price.den);
        lhs >= rhs
    }

    pub fn is_underwater(&self, price: Price, who: &AccountId) -> bool {
        !self.is_safe(price, self.collateral_of(who), self.debt_of(who))
    }

    /// Accounts with outstanding debt, in key order.
    pub fn open_positions(&self) -> impl Iterator<Item = &AccountId> {
        self.debt.iter().filter(|(_, d)| !d.is_zero()).map(|(a, _)| a)
    }

    fn set(map: &mut BTreeMap<AccountId, Amount>, who: &AccountId, v: Amount) {
        if v.is_zero() {
            map.remove(who);
        } else {
            map.insert(who.clone(), v);
        }
    }

    pub(crate) fn set_collateral(&mut self, who: &AccountId, v: Amount) {
        Self::set(&mut self.collateral, who, v);
    }

    pub(crate) fn set_debt(&mut self, who: &AccountId, v: Amount) {
        Self::set(&mut self.debt, who, v);
    }

    /// Book side of `deposit_collateral`; the caller moves the tokens.
    pub fn deposit_collateral(&mut self, who: &AccountId, qty: Amount) -> Result<(), Reject> {
        let c = self.collateral_of(who).checked_add(qty).ok_or(Reject::Overflow)?;
        self.set_collateral(who, c);
        Ok(())
    }

    pub fn pay_loan(&mut self, who: &AccountId, qty: Amount) -> Result<(), Reject> {
        let d = self.debt_of(who).checked_sub(qty).ok_or(Reject::GuardFailed)?;
        self.loan_reserve = self.loan_reserve.checked_add(qty).ok_or(Reject::Overflow)?;
        self.set_debt(who, d);
        Ok(())
    }

    pub fn withdraw_collateral(&mut self, price: Price, who: &AccountId, qty: Amount) -> Result<(), Reject> {
        let left = self.collateral_of(who).checked_sub(qty).ok_or(Reject::GuardFailed)?;
        if !self.is_safe(price, left, self.debt_of(who)) {
            return Err(Reject::GuardFailed);
        }
        self.set_collateral(who, left);
        Ok(())
    }

    pub fn withdraw_loan(&mut self, price: Price, who: &AccountId, qty: Amount) -> Result<(), Reject> {
        let d = self.debt_of(who).checked_add(qty).ok_or(Reject::Overflow)?;
        if !self.is_safe(price, self.collateral_of(who), d) {
            return Err(Reject::GuardFailed);
        }
        self.loan_reserve = self.loan_reserve.checked_sub(qty).ok_or(Reject::InsufficientLiquidity)?;
        self.set_debt(who, d);
        Ok(())
    }

    /// Closes an underwater position. Returns `(loan repaid, collateral seized)`.
    pub fn liquidate(&mut self, price: Price, victim: &AccountId) -> Result<(Amount, Amount), Reject> {
        if !self.is_underwater(price, victim) {
            return Err(Reject::NotUnderwater);
        }
        let coll = self.collateral_of(victim);
        let debt = self.debt_of(victim);
        match self.liquidation {
            LiquidationOutcome::FullCollateral => {
                self.set_collateral(victim, Amount::ZERO);
                self.set_debt(victim, Amount::ZERO);
                Ok((Amount::ZERO, coll))
            }
            LiquidationOutcome::Efficient => {
                if price.num.is_zero() {
                    return Err(Reject::BadParameter);
                }
                let seized = Amount::from_wide(debt.wide() * price.den.wide() / price.num.wide())
                    .unwrap_or(Amount::MAX)
                    .min(coll);
                self.loan_reserve = self.loan_reserve.checked_add(debt).ok_or(Reject::Overflow)?;
                self.set_collateral(victim, coll.saturating_sub(seized));
                self.set_debt(victim, Amount::ZERO);
                Ok((debt, seized))
            }
        }
    }

    pub fn total_collateral(&self) -> Option<Amount> {
        self.collateral.values().try_fold(Amount::ZERO, |acc, c| acc.checked_add(*c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::U256;

    fn book() -> MakerBook {
        let mut b = MakerBook::new("DAI", "ETH", PriceSource::Fixed { num: 2u64.into(), den: 1u64.into() });
        b.set_collateral(&"v".into(), 100u64.into());
        b.set_debt(&"v".into(), 150u64.into());
        b
    }

    const TWO: Price = Price { num: Amount(U256::from_limbs([2, 0, 0, 0])), den: Amount(U256::from_limbs([1, 0, 0, 0])) };

    #[test]
    fn withdraw_collateral_blocked_when_unsafe() {
        // 2 * 99 < 1.5 * 150
        let mut b = book();
        assert_eq!(b.withdraw_collateral(TWO, &"v".into(), 1u64.into()), Err(Reject::GuardFailed));
    }

    #[test]
    fn liquidation_predicate() {
        let b = book();
        assert!(b.is_underwater(TWO, &"v".into())); // 200 < 225
        let three = Price { num: 3u64.into(), den: 1u64.into() };
        assert!(!b.is_underwater(three, &"v".into())); // 300 >= 225
        assert!(!b.is_underwater(TWO, &"nobody".into())); // 0 < 0 is false
    }

    #[test]
    fn full_collateral_outcome() {
        let mut b = book();
        assert_eq!(b.liquidate(TWO, &"v".into()), Ok((Amount::ZERO, 100u64.into())));
        assert!(b.collateral.is_empty() && b.debt.is_empty());
        assert_eq!(b.liquidate(TWO, &"v".into()), Err(Reject::NotUnderwater));
    }

    #[test]
    fn efficient_outcome_pays_debt_at_price() {
        let mut b = book();
        b.liquidation = LiquidationOutcome::Efficient;
        // 150 DAI at 2 DAI/ETH buys 75 ETH of the 100 posted.
        assert_eq!(b.liquidate(TWO, &"v".into()), Ok((150u64.into(), 75u64.into())));
        assert_eq!(b.collateral_of(&"v".into()), 25u64.into());
        assert_eq!(b.loan_reserve, 150u64.into());
    }

    #[test]
    fn withdraw_loan_guard_is_inclusive() {
        let mut b = MakerBook::new("DAI", "ETH", PriceSource::Fixed { num: 2u64.into(), den: 1u64.into() });
        b.loan_reserve = 1000u64.into();
        b.set_collateral(&"u".into(), 3u64.into());
        // 2*3 = 6 >= 1.5*4 = 6
        assert!(b.withdraw_loan(TWO, &"u".into(), 4u64.into()).is_ok());
        assert_eq!(b.withdraw_loan(TWO, &"u".into(), 1u64.into()), Err(Reject::GuardFailed));
    }
}
