//! The doubly-exponential constructions and the closed-form integer bounds
//! they give on the minimum worst-case cut count.
//!
//! Everything is computed with exact integer comparisons on bit lengths;
//! no floating point anywhere.

use crate::combine::{apply_cut, recover_cutoff, star, Operator};
use crate::num::Nat;
use crate::protocol::{cutter_for, ProtocolNode, ProtocolTree};
use crate::ratio::Ratio;

/// `s <= 2^(2^n - 1)`, the necessary condition for a ratio of sum `s` to be
/// achievable in `n` cuts. Compared via bit length: `s <= 2^m` iff
/// `bits(s - 1) <= m`.
pub fn fits_in_cuts<N: Nat>(sum: &N, cuts: u32) -> bool {
    if sum.is_zero() {
        return true;
    }
    let bits = (sum.clone() - N::one()).bit_length();
    if cuts >= 64 {
        return true;
    }
    bits <= (1u64 << cuts) - 1
}

/// Smallest `n >= 0` with `a + b <= 2^(2^n - 1)`: no protocol divides the
/// reduced ratio in fewer cuts.
pub fn lower_bound_int<N: Nat>(ratio: &Ratio<N>) -> u32 {
    let sum = ratio.reduce().sum();
    let mut n = 0;
    while !fits_in_cuts(&sum, n) {
        n += 1;
    }
    n
}

/// `ceil(lg(a + b))` on the reduced ratio: the depth of the cut-near-halves
/// tree, hence an upper bound.
pub fn upper_bound_int<N: Nat>(ratio: &Ratio<N>) -> u64 {
    let sum = ratio.reduce().sum();
    (sum - N::one()).bit_length()
}

/// The squaring chain: item 1 is `(1,1)`; item n is the raw *2 product of
/// item n-1 with its own swap, which is provably already in lowest terms
/// (verified here computationally) and has sum `2^(2^(n-1))`.
#[derive(Debug, Clone)]
pub struct Construction1<N: Nat> {
    /// `items[k]` is chain item `k + 1`, in lowest terms.
    pub items: Vec<Ratio<N>>,
    /// Protocol tree of depth `n` realizing the last item.
    pub witness: ProtocolTree<N>,
}

pub fn construction1<N: Nat>(n: u32) -> Construction1<N> {
    assert!(n >= 1, "construction is defined for n >= 1");
    let mut items: Vec<Ratio<N>> = vec![Ratio::of(1, 1)];
    for _ in 1..n {
        let prev = items.last().unwrap();
        let raw = star(Operator::Op2, prev, &prev.swap()).expect("chain products are nonzero");
        assert!(
            raw.is_reduced(),
            "raw *2 chain product must have gcd 1, got {raw}"
        );
        items.push(raw);
    }
    let witness = ProtocolTree::new(chain_node(&items, items.len() - 1, None));
    Construction1 { items, witness }
}

// Builds the witness recursively; `oriented` instantiates a chain item in a
// specific player order (both orientations occur as branches).
fn chain_node<N: Nat>(items: &[Ratio<N>], idx: usize, oriented: Option<Ratio<N>>) -> ProtocolNode<N> {
    let ratio = oriented.unwrap_or_else(|| items[idx].clone());
    debug_assert_eq!(ratio.canonical_key(), items[idx].canonical_key());
    if idx == 0 {
        // (1,1): cut and choose
        let (_, cutoff) = recover_cutoff(&ratio, &Ratio::of(1, 0), &Ratio::of(0, 1))
            .expect("cut-and-choose decomposes (1,1)");
        let cut = apply_cut(&ratio, &cutoff).expect("recovered cutoff applies");
        return ProtocolNode::Cut {
            cutter: cutter_for(&ratio),
            ratio,
            cutoff,
            take: Box::new(ProtocolNode::leaf(cut.take)),
            keep: Box::new(ProtocolNode::leaf(cut.keep)),
        };
    }
    let prev = &items[idx - 1];
    let (_, cutoff) =
        recover_cutoff(&ratio, prev, &prev.swap()).expect("chain item decomposes into its parents");
    let cut = apply_cut(&ratio, &cutoff).expect("recovered cutoff applies");
    ProtocolNode::Cut {
        cutter: cutter_for(&ratio),
        ratio,
        cutoff,
        take: Box::new(chain_node(items, idx - 1, Some(cut.take))),
        keep: Box::new(chain_node(items, idx - 1, Some(cut.keep))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{validate_tree, worst_case_depth};
    use num_bigint::BigUint;

    type R = Ratio<u64>;

    #[test]
    fn lower_bound_examples() {
        assert_eq!(lower_bound_int(&R::of(9, 8)), 3);
        assert_eq!(lower_bound_int(&R::of(1, 1)), 1);
        assert_eq!(lower_bound_int(&R::of(1, 0)), 0);
        let giant = Ratio::<u64>::new(58470565, 72019008).unwrap();
        assert_eq!(lower_bound_int(&giant), 5);
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(upper_bound_int(&R::of(9, 8)), 5);
        assert_eq!(upper_bound_int(&R::of(1, 1)), 1);
        assert_eq!(upper_bound_int(&R::of(1, 0)), 0);
        let giant = Ratio::<u64>::new(58470565, 72019008).unwrap();
        // the prose says twenty-eight; ceil(lg 130489573) is 27
        assert_eq!(upper_bound_int(&giant), 27);
    }

    #[test]
    fn bounds_are_ordered() {
        for s in 1u32..=600 {
            for a in 0..=s / 2 {
                let r = R::of(a, s - a);
                assert!(u64::from(lower_bound_int(&r)) <= upper_bound_int(&r), "{r}");
            }
        }
    }

    #[test]
    fn construction_chain_values() {
        let c = construction1::<u64>(5);
        assert_eq!(c.items[0], R::of(1, 1));
        assert_eq!(c.items[1], R::of(1, 3));
        assert_eq!(c.items[2], R::of(3, 13));
        assert_eq!(c.items[3], R::of(39, 217));
        assert_eq!(c.items[4], R::of(8463, 57073));
        for (i, item) in c.items.iter().enumerate() {
            assert_eq!(item.sum(), 1u64 << (1u32 << i));
            assert_eq!(u64::from(lower_bound_int(item)), (i + 1) as u64);
        }
    }

    #[test]
    fn construction_witness_depth() {
        for n in 1..=5 {
            let c = construction1::<u64>(n);
            assert!(validate_tree(&c.witness).is_valid());
            assert_eq!(worst_case_depth(&c.witness), n);
        }
    }

    #[test]
    fn construction_big_lane() {
        // sums up to 2^128 need arbitrary precision
        let c = construction1::<BigUint>(8);
        let last = c.items.last().unwrap();
        assert_eq!(last.sum(), BigUint::from(1u32) << 128u32);
        assert!(last.is_reduced());
        assert_eq!(lower_bound_int(last), 8);
    }

    #[test]
    fn fits_in_cuts_thresholds() {
        assert!(fits_in_cuts(&1u64, 0));
        assert!(!fits_in_cuts(&2u64, 0));
        assert!(fits_in_cuts(&2u64, 1));
        assert!(!fits_in_cuts(&3u64, 1));
        assert!(fits_in_cuts(&8u64, 2));
        assert!(!fits_in_cuts(&9u64, 2));
        assert!(fits_in_cuts(&128u64, 3));
        assert!(!fits_in_cuts(&129u64, 3));
    }
}
