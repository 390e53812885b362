//! Transactions and blocks.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::amount::Amount;
use crate::ids::{AccountId, ContractId, TokenId, TxId};

/// A quantity that is either concrete or the free insertion size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qty {
    Fixed(Amount),
    Alpha,
}

impl Qty {
    pub fn resolve(self, alpha: Option<Amount>) -> Option<Amount> {
        match self {
            Qty::Fixed(a) => Some(a),
            Qty::Alpha => alpha,
        }
    }

    pub fn is_alpha(self) -> bool {
        matches!(self, Qty::Alpha)
    }
}

impl From<Amount> for Qty {
    fn from(a: Amount) -> Self {
        Qty::Fixed(a)
    }
}

impl fmt::Display for Qty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qty::Fixed(a) => write!(f, "{a}"),
            Qty::Alpha => f.write_str("alpha"),
        }
    }
}

impl Serialize for Qty {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Qty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.trim().eq_ignore_ascii_case("alpha") {
            Ok(Qty::Alpha)
        } else {
            s.parse().map(Qty::Fixed).map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdpOp {
    DepositCollateral,
    PayLoan,
    WithdrawCollateral,
    WithdrawLoan,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// Sell exactly `amount_in` of `token_in`.
    Swap {
        token_in: TokenId,
        amount_in: Qty,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_out: Option<Amount>,
    },
    /// Buy exactly `amount_out` of `token_out`, paying whatever the pool asks.
    SwapForExact {
        token_out: TokenId,
        amount_out: Qty,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_in: Option<Amount>,
    },
    AddLiquidity {
        amount_x: Qty,
        amount_y: Qty,
    },
    RemoveLiquidity {
        shares: Qty,
    },
    CdpManipulate {
        op: CdpOp,
        qty: Qty,
    },
    Liquidate {
        victim: AccountId,
    },
    Bet,
    GetReward,
}

impl Action {
    pub fn has_alpha(&self) -> bool {
        match self {
            Action::Swap { amount_in, .. } => amount_in.is_alpha(),
            Action::SwapForExact { amount_out, .. } => amount_out.is_alpha(),
            Action::AddLiquidity { amount_x, amount_y } => amount_x.is_alpha() || amount_y.is_alpha(),
            Action::RemoveLiquidity { shares } => shares.is_alpha(),
            Action::CdpManipulate { qty, .. } => qty.is_alpha(),
            Action::Liquidate { .. } | Action::Bet | Action::GetReward => false,
        }
    }

    fn bind(&mut self, alpha: Amount) {
        let fix = |q: &mut Qty| {
            if q.is_alpha() {
                *q = Qty::Fixed(alpha);
            }
        };
        match self {
            Action::Swap { amount_in, .. } => fix(amount_in),
            Action::SwapForExact { amount_out, .. } => fix(amount_out),
            Action::AddLiquidity { amount_x, amount_y } => {
                fix(amount_x);
                fix(amount_y);
            }
            Action::RemoveLiquidity { shares } => fix(shares),
            Action::CdpManipulate { qty, .. } => fix(qty),
            Action::Liquidate { .. } | Action::Bet | Action::GetReward => {}
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Mempool,
    MinerTemplate,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub actor: AccountId,
    pub venue: ContractId,
    pub action: Action,
    #[serde(default)]
    pub origin: Origin,
    /// Gas fee metadata carried from exports. Not part of any value computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fee: Option<Amount>,
    /// First block offset (0-based) at which the transaction is available.
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    pub arrival: u32,
}

fn is_zero_u32(v: &u32) -> bool {
    *v == 0
}

impl Transaction {
    pub fn new(id: impl Into<TxId>, actor: impl Into<AccountId>, venue: impl Into<ContractId>, action: Action) -> Self {
        Transaction {
            id: id.into(),
            actor: actor.into(),
            venue: venue.into(),
            action,
            origin: Origin::Mempool,
            fee: None,
            arrival: 0,
        }
    }

    pub fn template(mut self) -> Self {
        self.origin = Origin::MinerTemplate;
        self
    }

    pub fn arriving_at(mut self, block_offset: u32) -> Self {
        self.arrival = block_offset;
        self
    }

    pub fn swap(id: &str, actor: &str, venue: &str, token_in: &str, amount_in: Amount) -> Self {
        Self::new(
            id,
            actor,
            venue,
            Action::Swap { token_in: token_in.into(), amount_in: Qty::Fixed(amount_in), min_out: None },
        )
    }

    pub fn has_alpha(&self) -> bool {
        self.action.has_alpha()
    }

    /// Copy with every free quantity set to `alpha`.
    pub fn bind_alpha(&self, alpha: Amount) -> Transaction {
        let mut tx = self.clone();
        tx.action.bind(alpha);
        tx
    }
}

/// An ordered list of transactions plus the block number it executes at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub txs: Vec<Transaction>,
}
