//! Executable contract models.

pub mod amm;
pub mod maker;
pub mod pricebet;

use serde::{Deserialize, Serialize};

pub use amm::AmmPool;
pub use maker::{LiquidationOutcome, MakerBook, Price, PriceSource};
pub use pricebet::{BetStatus, PricebetRecord};

use crate::amount::Amount;
use crate::ids::TokenId;

/// Why a contract refused a transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, thiserror::Error)]
pub enum Reject {
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("insufficient pool or contract liquidity")]
    InsufficientLiquidity,
    #[error("insufficient liquidity shares")]
    InsufficientShares,
    #[error("token not traded by this venue")]
    InvalidToken,
    #[error("zero amount")]
    ZeroAmount,
    #[error("pool has no reserves")]
    EmptyPool,
    #[error("contract guard failed")]
    GuardFailed,
    #[error("position is not underwater")]
    NotUnderwater,
    #[error("slippage limit exceeded")]
    Slippage,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("action not supported by this contract")]
    WrongContract,
    #[error("transaction still has an unresolved quantity")]
    Unresolved,
    #[error("bad contract parameter")]
    BadParameter,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contract {
    Amm(AmmPool),
    Maker(MakerBook),
    Pricebet(PricebetRecord),
}

impl Contract {
    /// Tokens held by the contract itself.
    pub fn holdings(&self) -> Vec<(TokenId, Amount)> {
        match self {
            Contract::Amm(p) => vec![(p.token_x.clone(), p.reserve_x), (p.token_y.clone(), p.reserve_y)],
            Contract::Maker(m) => vec![
                (m.loan_token.clone(), m.loan_reserve),
                (m.collateral_token.clone(), m.total_collateral().unwrap_or(Amount::MAX)),
            ],
            Contract::Pricebet(b) => vec![(b.token.clone(), b.pot)],
        }
    }

    pub fn as_amm(&self) -> Option<&AmmPool> {
        match self {
            Contract::Amm(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_maker(&self) -> Option<&MakerBook> {
        match self {
            Contract::Maker(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_pricebet(&self) -> Option<&PricebetRecord> {
        match self {
            Contract::Pricebet(b) => Some(b),
            _ => None,
        }
    }
}
