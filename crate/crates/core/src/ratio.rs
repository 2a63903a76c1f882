//! Entitlement ratios and their canonical (lowest-terms, order-free)
//! representatives.
//!
//! A ratio `(a, b)` states that Alice is owed `a/(a+b)` of the cake and Bob
//! `b/(a+b)`. For allocation purposes `(a, b)`, `(b, a)` and `(m*a, m*b)`
//! are all the same entitlement; [`CanonicalKey`] is the shared
//! representative used as a map key by the solver.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::num::Nat;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RatioError {
    #[error("ratio (0,0) is not a valid entitlement")]
    BothZero,
    #[error("cannot parse {0:?} as a nonnegative integer")]
    BadInteger(String),
}

/// Ordered pair of nonnegative integers, not both zero.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ratio<N> {
    a: N,
    b: N,
}

impl<N: Nat> Ratio<N> {
    pub fn new(a: N, b: N) -> Result<Self, RatioError> {
        if a.is_zero() && b.is_zero() {
            return Err(RatioError::BothZero);
        }
        Ok(Ratio { a, b })
    }

    /// Convenience constructor; panics on `(0, 0)`.
    pub fn of(a: u32, b: u32) -> Self {
        Ratio::new(N::from(a), N::from(b)).expect("(0,0) is not a ratio")
    }

    pub fn from_decimal(a: &str, b: &str) -> Result<Self, RatioError> {
        let a = N::from_str(a).map_err(|_| RatioError::BadInteger(a.to_owned()))?;
        let b = N::from_str(b).map_err(|_| RatioError::BadInteger(b.to_owned()))?;
        Ratio::new(a, b)
    }

    pub fn a(&self) -> &N {
        &self.a
    }

    pub fn b(&self) -> &N {
        &self.b
    }

    pub fn into_parts(self) -> (N, N) {
        (self.a, self.b)
    }

    /// `a + b`, the denominator of both due shares.
    pub fn sum(&self) -> N {
        self.a.clone() + self.b.clone()
    }

    pub fn swap(&self) -> Self {
        Ratio {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    /// Lowest-terms form; `gcd(0, x) = x`, so `(0, x)` reduces to `(0, 1)`.
    pub fn reduce(&self) -> Self {
        let g = self.a.gcd(&self.b);
        Ratio {
            a: self.a.clone() / g.clone(),
            b: self.b.clone() / g,
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.a.gcd(&self.b).is_one()
    }

    /// True when one side is owed nothing: the division is a single
    /// allocation and needs no cut.
    pub fn is_leaf(&self) -> bool {
        self.a.is_zero() || self.b.is_zero()
    }

    /// Ordered proportionality: `a1:b1 = a2:b2` (not swap-insensitive).
    pub fn equivalent(&self, other: &Self) -> bool {
        self.a.clone() * other.b.clone() == other.a.clone() * self.b.clone()
    }

    /// Reduced and ordered so the smaller entry comes first.
    pub fn canonical_key(&self) -> CanonicalKey<N> {
        let r = self.reduce();
        if r.a <= r.b {
            CanonicalKey { lo: r.a, hi: r.b }
        } else {
            CanonicalKey { lo: r.b, hi: r.a }
        }
    }
}

impl<N: Nat> fmt::Display for Ratio<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

impl<N: Nat> fmt::Debug for Ratio<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

impl<N: Nat> Serialize for Ratio<N> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.a.to_string(), self.b.to_string()).serialize(serializer)
    }
}

impl<'de, N: Nat> Deserialize<'de> for Ratio<N> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (a, b) = <(String, String)>::deserialize(deserializer)?;
        Ratio::from_decimal(&a, &b).map_err(D::Error::custom)
    }
}

/// Unordered lowest-terms representative: `gcd(lo, hi) = 1` and `lo <= hi`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey<N> {
    lo: N,
    hi: N,
}

impl<N: Nat> CanonicalKey<N> {
    pub fn lo(&self) -> &N {
        &self.lo
    }

    pub fn hi(&self) -> &N {
        &self.hi
    }

    /// The `(lo, hi)` orientation, or `(hi, lo)` when `swapped`.
    pub fn ratio(&self, swapped: bool) -> Ratio<N> {
        if swapped {
            Ratio {
                a: self.hi.clone(),
                b: self.lo.clone(),
            }
        } else {
            Ratio {
                a: self.lo.clone(),
                b: self.hi.clone(),
            }
        }
    }

    pub fn sum(&self) -> N {
        self.lo.clone() + self.hi.clone()
    }

    pub fn is_leaf(&self) -> bool {
        self.lo.is_zero()
    }
}

impl<N: Nat> fmt::Display for CanonicalKey<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

impl<N: Nat> fmt::Debug for CanonicalKey<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

impl<N: Nat> Serialize for CanonicalKey<N> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.lo.to_string(), self.hi.to_string()).serialize(serializer)
    }
}

impl<'de, N: Nat> Deserialize<'de> for CanonicalKey<N> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = Ratio::<N>::deserialize(deserializer)?;
        let key = r.canonical_key();
        if r.a != key.lo || r.b != key.hi {
            return Err(D::Error::custom(format!(
                "{r} is not a canonical key (expected {key})"
            )));
        }
        Ok(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Ratio<u64>;

    #[test]
    fn rejects_zero_zero() {
        assert_eq!(R::new(0, 0), Err(RatioError::BothZero));
        assert!(R::new(0, 1).is_ok());
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(R::of(9, 3).reduce(), R::of(3, 1));
        assert_eq!(R::of(4, 8).reduce(), R::of(1, 2));
        assert_eq!(R::of(1, 0).reduce(), R::of(1, 0));
        assert_eq!(R::of(0, 6).reduce(), R::of(0, 1));
    }

    #[test]
    fn canonical_key_examples() {
        assert_eq!(R::of(9, 8).canonical_key(), R::of(8, 9).canonical_key());
        assert_eq!(R::of(2, 2).canonical_key(), R::of(1, 1).canonical_key());
        let big = Ratio::<u64>::new(72019008, 58470565).unwrap();
        let key = big.canonical_key();
        assert_eq!((*key.lo(), *key.hi()), (58470565, 72019008));
    }

    #[test]
    fn sum_examples() {
        assert_eq!(R::of(9, 8).sum(), 17);
        assert_eq!(R::of(1, 0).sum(), 1);
        let big = Ratio::<u64>::new(58470565, 72019008).unwrap();
        assert_eq!(big.sum(), 130489573);
    }

    #[test]
    fn equivalent_examples() {
        assert!(R::of(2, 2).equivalent(&R::of(1, 1)));
        assert!(!R::of(1, 2).equivalent(&R::of(2, 1)));
        assert!(R::of(68, 136).equivalent(&R::of(1, 2)));
    }

    #[test]
    fn serde_digit_strings() {
        let r = Ratio::<u64>::of(9, 8);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"["9","8"]"#);
        let back: Ratio<u64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);

        // beyond 2^53: digit strings keep full precision
        let big: Ratio<num_bigint::BigUint> =
            Ratio::from_decimal("340282366920938463463374607431768211457", "1").unwrap();
        let json = serde_json::to_string(&big).unwrap();
        let back: Ratio<num_bigint::BigUint> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, big);
    }
}
