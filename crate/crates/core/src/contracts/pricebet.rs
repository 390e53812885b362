//! Single-bet contract that pays out when a pool prices its token above parity.

use serde::{Deserialize, Serialize};

use super::Reject;
use crate::amount::Amount;
use crate::ids::{AccountId, ContractId, TokenId};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BetStatus {
    #[default]
    Open,
    Placed { player: AccountId },
    Settled { player: AccountId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricebetRecord {
    /// Stake and payout token; also the numerator side of the oracle check.
    pub token: TokenId,
    pub oracle: ContractId,
    /// Last block number at which the reward can be claimed.
    pub deadline: u64,
    pub stake: Amount,
    pub payout: Amount,
    /// Tokens currently held by the contract.
    pub pot: Amount,
    #[serde(default)]
    pub status: BetStatus,
}

impl PricebetRecord {
    /// 100-unit stake, 200-unit payout, pot seeded with 100.
    pub fn new(token: impl Into<TokenId>, oracle: impl Into<ContractId>, deadline: u64, unit: Amount) -> Self {
        let hundred = unit.checked_mul(Amount::from(100u64)).expect("unit too large");
        PricebetRecord {
            token: token.into(),
            oracle: oracle.into(),
            deadline,
            stake: hundred,
            payout: hundred.checked_add(hundred).expect("unit too large"),
            pot: hundred,
            status: BetStatus::Open,
        }
    }

    pub fn has_bet(&self) -> bool {
        !matches!(self.status, BetStatus::Open)
    }

    pub fn place(&mut self, player: &AccountId) -> Result<(), Reject> {
        if self.has_bet() {
            return Err(Reject::GuardFailed);
        }
        self.pot = self.pot.checked_add(self.stake).ok_or(Reject::Overflow)?;
        self.status = BetStatus::Placed { player: player.clone() };
        Ok(())
    }

    /// `token_reserve` and `other_reserve` come from the oracle pool.
    pub fn claim(&mut self, caller: &AccountId, token_reserve: Amount, other_reserve: Amount, block: u64) -> Result<Amount, Reject> {
        match &self.status {
            BetStatus::Placed { player } if player == caller => {}
            _ => return Err(Reject::GuardFailed),
        }
        if token_reserve <= other_reserve || block > self.deadline {
            return Err(Reject::GuardFailed);
        }
        self.pot = self.pot.checked_sub(self.payout).ok_or(Reject::InsufficientBalance)?;
        self.status = BetStatus::Settled { player: caller.clone() };
        Ok(self.payout)
    }
}
