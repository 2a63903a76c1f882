//! Scalar abstraction for the unsigned integer arithmetic used throughout
//! the crate.
//!
//! All core algorithms are generic over [`Nat`]. The fixed-width lanes
//! (`u64`, `u128`) are fast and suffice whenever intermediate products are
//! known to fit; `BigUint` removes every size limit at the usual cost. The
//! crate root exposes concrete aliases for the common instantiations.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Unsigned};

/// Unsigned integer scalar: `u64`, `u128` or `BigUint`.
pub trait Nat:
    Integer
    + Unsigned
    + CheckedAdd
    + CheckedSub
    + CheckedMul
    + Clone
    + Hash
    + Ord
    + Debug
    + Display
    + FromStr
    + From<u32>
    + Into<BigUint>
    + Send
    + Sync
    + 'static
{
    /// Bits in the minimal binary representation; zero has length 0.
    fn bit_length(&self) -> u64;
}

impl Nat for u64 {
    fn bit_length(&self) -> u64 {
        u64::from(64 - self.leading_zeros())
    }
}

impl Nat for u128 {
    fn bit_length(&self) -> u64 {
        u64::from(128 - self.leading_zeros())
    }
}

impl Nat for BigUint {
    fn bit_length(&self) -> u64 {
        self.bits()
    }
}

/// Shorthand for small constants in generic code.
pub fn nat<N: Nat>(value: u32) -> N {
    N::from(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_lengths() {
        assert_eq!(0u64.bit_length(), 0);
        assert_eq!(1u64.bit_length(), 1);
        assert_eq!(16u64.bit_length(), 5);
        assert_eq!(17u128.bit_length(), 5);
        assert_eq!(BigUint::from(130489573u64).bit_length(), 27);
    }
}
