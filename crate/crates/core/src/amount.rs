//! Token amounts, signed values and exact ratios.
//!
//! Amounts are unsigned 256-bit integers in a token's base unit. Every
//! arithmetic helper is checked; overflow surfaces as `None` and callers turn
//! that into an invalid transaction rather than wrapping.

use ruint::UintTryFrom;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use ruint::Uint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type U256 = Uint<256, 4>;
pub(crate) type U512 = Uint<512, 8>;

/// Signed value in primary-token base units (profits, valued balances).
pub type Value = BigInt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(pub U256);

impl Amount {
    pub const ZERO: Amount = Amount(U256::ZERO);
    pub const MAX: Amount = Amount(U256::MAX);

    pub fn from_u128(v: u128) -> Self {
        Amount(U256::from(v))
    }

    /// `whole * 10^decimals`, panicking on overflow (only used for literals).
    pub fn units(whole: u128, decimals: u32) -> Self {
        let scale = U256::from(10u64).pow(U256::from(decimals));
        Amount(U256::from(whole).checked_mul(scale).expect("amount literal overflows 256 bits"))
    }

    /// Whole ether-style units with 18 decimals.
    pub fn ether(whole: u128) -> Self {
        Self::units(whole, 18)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn checked_mul(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_mul(rhs.0).map(Amount)
    }

    pub fn checked_div(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_div(rhs.0).map(Amount)
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }

    pub(crate) fn wide(self) -> U512 {
        U512::from(self.0)
    }

    /// Narrows a 512-bit intermediate back to an amount if it fits.
    pub(crate) fn from_wide(v: U512) -> Option<Amount> {
        U256::uint_try_from(v).ok().map(Amount)
    }

    pub fn to_biguint(self) -> BigUint {
        BigUint::from_bytes_le(&self.0.to_le_bytes::<32>())
    }

    pub fn to_value(self) -> Value {
        BigInt::from_biguint(Sign::Plus, self.to_biguint())
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::from_integer(self.to_value())
    }

    /// Converts a non-negative integer value back into an amount.
    pub fn try_from_value(v: &Value) -> Option<Amount> {
        if v.is_negative() {
            return None;
        }
        let bytes = v.magnitude().to_bytes_le();
        if bytes.len() > 32 {
            return None;
        }
        let mut buf = [0u8; 32];
        buf[..bytes.len()].copy_from_slice(&bytes);
        Some(Amount(U256::from_le_bytes(buf)))
    }

    /// Lossy conversion for plotting and log output only.
    pub fn to_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// Integer square root (floor).
    pub fn isqrt(self) -> Amount {
        Amount(self.0.root(2))
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(U256::from(v))
    }
}

impl From<u128> for Amount {
    fn from(v: u128) -> Self {
        Amount(U256::from(v))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount literal {0:?}: expected a decimal integer")]
pub struct ParseAmountError(pub String);

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('_', "");
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseAmountError(s.to_string()));
        }
        U256::from_str_radix(&t, 10).map(Amount).map_err(|_| ParseAmountError(s.to_string()))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helpers for [`Value`] as a decimal string.
pub mod value_serde {
    use super::Value;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Value, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Value, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse().map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::Value;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
            let s = Option::<String>::deserialize(d)?;
            s.map(|s| s.trim().parse().map_err(serde::de::Error::custom)).transpose()
        }
    }
}

/// Exact non-float ratio, written as `"num/den"` or `"num"` in files.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio(pub BigRational);

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        Ratio(BigRational::new(num.into(), den.into()))
    }

    pub fn zero() -> Self {
        Ratio(BigRational::zero())
    }

    pub fn one() -> Self {
        Ratio(BigRational::one())
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::zero()
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ratio literal {0:?}: expected \"num\", \"num/den\" or a decimal")]
pub struct ParseRatioError(pub String);

impl FromStr for Ratio {
    type Err = ParseRatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatioError(s.to_string());
        if let Some((int, frac)) = s.trim().split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let neg = int.starts_with('-');
            let whole: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| err())? };
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let f: BigInt = frac.parse().map_err(|_| err())?;
            let num = whole.abs() * &scale + f;
            return Ok(Ratio(BigRational::new(if neg { -num } else { num }, scale)));
        }
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let num: BigInt = n.parse().map_err(|_| err())?;
        let den: BigInt = d.parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        Ok(Ratio(BigRational::new(num, den)))
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Floor of a rational, toward negative infinity.
pub fn floor_rational(r: &BigRational) -> Value {
    r.floor().to_integer()
}
