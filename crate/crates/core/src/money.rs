//! Exact monetary amounts and fee rates.
//!
//! Amounts are integer counts of minor currency units. Fee rates are exact
//! rationals expressed in basis points; the product of a rate and an amount is
//! rounded half-to-even when it is turned back into [`Money`].

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of basis points in one whole unit.
pub const BPS_PER_UNIT: i64 = 10_000;

/// An amount of money in minor units (e.g. cents).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn new(minor_units: i64) -> Self {
        Money(minor_units)
    }

    pub const fn minor_units(self) -> i64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn min(self, other: Money) -> Money {
        Money(self.0.min(other.0))
    }

    /// Value in major units, for reporting only.
    pub fn as_major(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Money {
    /// Formats with two decimals, e.g. `109.30`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

/// Rounds `num / den` to the nearest integer, ties to even. `den` must be positive.
pub fn div_round_half_even(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    let twice = 2 * r;
    if twice > den || (twice == den && q % 2 != 0) {
        q + 1
    } else {
        q
    }
}

/// Largest integer not above `num / den`. `den` must be positive.
pub fn div_floor(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    num.div_euclid(den)
}

/// Smallest integer not below `num / den`. `den` must be positive.
pub fn div_ceil(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    -(-num).div_euclid(den)
}

/// A non-negative fee rate in basis points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bps(Ratio<i64>);

impl Bps {
    pub const ZERO: Bps = Bps(Ratio::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Self {
        Bps(Ratio::new(numer, denom))
    }

    pub fn from_integer(bps: i64) -> Self {
        Bps(Ratio::from_integer(bps))
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `rate * amount` as an exact fraction of minor units: `(num, den)` with `den > 0`.
    pub fn apply_exact(&self, amount: Money) -> (i128, i128) {
        let num = self.numer() as i128 * amount.0 as i128;
        let den = self.denom() as i128 * BPS_PER_UNIT as i128;
        (num, den)
    }

    /// `rate * amount`, rounded half-to-even to whole minor units.
    pub fn apply(&self, amount: Money) -> Money {
        let (num, den) = self.apply_exact(amount);
        Money(div_round_half_even(num, den) as i64)
    }

    /// Rate as a fraction of one unit (bps / 10000), formatted as a decimal.
    pub fn as_fraction_decimal(&self) -> String {
        decimal_string(self.numer() as i128, self.denom() as i128 * BPS_PER_UNIT as i128, 12)
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl Add for Bps {
    type Output = Bps;
    fn add(self, rhs: Bps) -> Bps {
        Bps(self.0 + rhs.0)
    }
}

impl Default for Bps {
    fn default() -> Self {
        Bps::ZERO
    }
}

impl From<Ratio<i64>> for Bps {
    fn from(r: Ratio<i64>) -> Self {
        Bps(r)
    }
}

impl fmt::Display for Bps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rate `{0}`: expected an integer, a decimal or `p/q`")]
pub struct ParseRateError(pub String);

/// Parses `"5"`, `"2.5"` or `"5/2"` into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>, ParseRateError> {
    let err = || ParseRateError(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int.starts_with('-');
        let int_part: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| err())? };
        let scale = 10i64.pow(frac.len() as u32);
        let frac_part: i64 = frac.parse().map_err(|_| err())?;
        let magnitude = int_part.abs().checked_mul(scale).and_then(|v| v.checked_add(frac_part)).ok_or_else(err)?;
        let numer = if negative || int_part < 0 { -magnitude } else { magnitude };
        return Ok(Ratio::new(numer, scale));
    }
    let n: i64 = t.parse().map_err(|_| err())?;
    Ok(Ratio::from_integer(n))
}

impl FromStr for Bps {
    type Err = ParseRateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ratio(s).map(Bps)
    }
}

/// Formats `num / den` as a decimal with at most `max_places` fractional digits
/// (truncated, trailing zeros removed).
pub fn decimal_string(num: i128, den: i128, max_places: u32) -> String {
    assert!(den > 0);
    let negative = num < 0;
    let n = num.abs();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&(n / den).to_string());
    let mut rem = n % den;
    if rem != 0 {
        out.push('.');
        let mut places = 0;
        while rem != 0 && places < max_places {
            rem *= 10;
            out.push(char::from(b'0' + (rem / den) as u8));
            rem %= den;
            places += 1;
        }
    }
    out
}

// Rates travel through files as either bare integers or strings ("5/2", "2.5").
#[derive(Deserialize)]
#[serde(untagged)]
enum RateRepr {
    Int(i64),
    Float(f64),
    Text(String),
}

pub(crate) fn ratio_from_repr<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Ratio<i64>, D::Error> {
    match RateRepr::deserialize(deserializer)? {
        RateRepr::Int(i) => Ok(Ratio::from_integer(i)),
        RateRepr::Float(f) => parse_ratio(&format!("{f}")).map_err(serde::de::Error::custom),
        RateRepr::Text(s) => parse_ratio(&s).map_err(serde::de::Error::custom),
    }
}

impl Serialize for Bps {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.denom() == 1 {
            serializer.serialize_i64(self.numer())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Bps {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        ratio_from_repr(deserializer).map(Bps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(div_round_half_even(5, 10), 0);
        assert_eq!(div_round_half_even(15, 10), 2);
        assert_eq!(div_round_half_even(25, 10), 2);
        assert_eq!(div_round_half_even(26, 10), 3);
        assert_eq!(div_round_half_even(24, 10), 2);
        assert_eq!(div_round_half_even(-5, 10), 0);
        assert_eq!(div_round_half_even(-15, 10), -2);
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(div_floor(7, 2), 3);
        assert_eq!(div_ceil(7, 2), 4);
        assert_eq!(div_floor(-7, 2), -4);
        assert_eq!(div_ceil(-7, 2), -3);
        assert_eq!(div_ceil(6, 2), 3);
    }

    #[test]
    fn bps_products() {
        // 23110 * 10 / 10000 = 23.11
        assert_eq!(Bps::from_integer(10).apply(Money(23110)), Money(23));
        // 10930 * 4 / 10000 = 4.372
        assert_eq!(Bps::from_integer(4).apply(Money(10930)), Money(4));
        // 5000 * 1 / 10000 = 0.5 -> 0 (even)
        assert_eq!(Bps::from_integer(1).apply(Money(5000)), Money(0));
        assert_eq!(Bps::from_integer(3).apply(Money(5000)), Money(2));
    }

    #[test]
    fn money_display() {
        assert_eq!(Money(10930).to_string(), "109.30");
        assert_eq!(Money(5).to_string(), "0.05");
        assert_eq!(Money(-1760).to_string(), "-17.60");
    }

    #[test]
    fn parse_rates() {
        assert_eq!(parse_ratio("5").unwrap(), Ratio::from_integer(5));
        assert_eq!(parse_ratio("5/2").unwrap(), Ratio::new(5, 2));
        assert_eq!(parse_ratio("2.5").unwrap(), Ratio::new(5, 2));
        assert_eq!(parse_ratio("0.0005").unwrap(), Ratio::new(1, 2000));
        assert!(parse_ratio("abc").is_err());
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn fraction_decimal() {
        assert_eq!(Bps::from_integer(5).as_fraction_decimal(), "0.0005");
        assert_eq!(Bps::from_integer(0).as_fraction_decimal(), "0");
        assert_eq!(Bps::new(1, 3).as_fraction_decimal(), "0.000033333333");
    }
}
