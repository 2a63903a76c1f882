//! The three ratio-combination operators and the forward/backward relations
//! between a parent ratio and the two child subproblems a single cut leaves
//! behind.
//!
//! Forward: [`apply_cut`] maps a parent and a cutoff to the two children.
//! Backward: [`recover_cutoff`] finds an operator and exact cutoff that
//! reproduce a given child pair, by solving the linear system of the
//! corresponding combination case in exact rational arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::num::Nat;
use crate::ratio::Ratio;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombineError {
    #[error("operator product is the degenerate ratio (0,0)")]
    DegenerateProduct,
    #[error("cutoff must satisfy 0 < k < d")]
    InvalidFraction,
    #[error("parent ratio must be in lowest terms")]
    ParentNotReduced,
    #[error("children must be in lowest terms")]
    ChildNotReduced,
    #[error("cutoff {cutoff} satisfies neither cut relation for parent {parent}")]
    CutoffOutOfRange { parent: String, cutoff: String },
    #[error("no operator, orientation and cutoff produce the given children")]
    NotADecomposition,
}

/// One of the three ways two child ratios combine into a parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Op1,
    Op2,
    Op3,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::Op1, Operator::Op2, Operator::Op3];

    pub fn code(self) -> &'static str {
        match self {
            Operator::Op1 => "1",
            Operator::Op2 => "2",
            Operator::Op3 => "3",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "1" => Some(Operator::Op1),
            "2" => Some(Operator::Op2),
            "3" => Some(Operator::Op3),
            _ => None,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "*{}", self.code())
    }
}

/// Fraction of the current piece a cutter is asked to cut off, in `(0, 1)`
/// and stored in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cutoff<N> {
    k: N,
    d: N,
}

impl<N: Nat> Cutoff<N> {
    pub fn new(k: N, d: N) -> Result<Self, CombineError> {
        if k.is_zero() || k >= d {
            return Err(CombineError::InvalidFraction);
        }
        let g = k.gcd(&d);
        Ok(Cutoff {
            k: k / g.clone(),
            d: d / g,
        })
    }

    /// Convenience constructor; panics unless `0 < k < d`.
    pub fn of(k: u32, d: u32) -> Self {
        Cutoff::new(N::from(k), N::from(d)).expect("cutoff must satisfy 0 < k < d")
    }

    pub fn numer(&self) -> &N {
        &self.k
    }

    pub fn denom(&self) -> &N {
        &self.d
    }

    /// `(d - k) / d`, the other piece's share by the cutter's measure.
    pub fn complement(&self) -> Self {
        Cutoff {
            k: self.d.clone() - self.k.clone(),
            d: self.d.clone(),
        }
    }

    /// Cross-multiplied strict comparison `self < other`.
    pub fn lt(&self, other: &Self) -> bool {
        self.k.clone() * other.d.clone() < other.k.clone() * self.d.clone()
    }
}

impl<N: Nat> fmt::Display for Cutoff<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.k, self.d)
    }
}

impl<N: Nat> fmt::Debug for Cutoff<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.k, self.d)
    }
}

impl<N: Nat> FromStr for Cutoff<N> {
    type Err = CombineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (k, d) = s.split_once('/').ok_or(CombineError::InvalidFraction)?;
        let k = N::from_str(k.trim()).map_err(|_| CombineError::InvalidFraction)?;
        let d = N::from_str(d.trim()).map_err(|_| CombineError::InvalidFraction)?;
        Cutoff::new(k, d)
    }
}

impl<N: Nat> Serialize for Cutoff<N> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de, N: Nat> Deserialize<'de> for Cutoff<N> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Cutoff::from_str(&s).map_err(D::Error::custom)
    }
}

/// Raw (unreduced) operator product.
///
/// `Op1 -> ((a1+b1)*a2, (a2+b2)*b1)`;
/// `Op2 -> (a1*a2, a1*a2 + b2*a1 + a2*b1)`;
/// `Op3 -> (a1*b2 + b1*a2 + b2*b1, b2*b1)`.
/// Reduction is the caller's explicit step.
pub fn star<N: Nat>(
    op: Operator,
    r1: &Ratio<N>,
    r2: &Ratio<N>,
) -> Result<Ratio<N>, CombineError> {
    let (a1, b1) = (r1.a().clone(), r1.b().clone());
    let (a2, b2) = (r2.a().clone(), r2.b().clone());
    let (a, b) = match op {
        Operator::Op1 => ((a1.clone() + b1.clone()) * a2.clone(), (a2 + b2) * b1),
        Operator::Op2 => {
            let p = a1.clone() * a2.clone();
            (p.clone(), p + b2 * a1 + a2 * b1)
        }
        Operator::Op3 => {
            let p = b2.clone() * b1.clone();
            (a1 * b2 + b1 * a2 + p.clone(), p)
        }
    };
    Ratio::new(a, b).map_err(|_| CombineError::DegenerateProduct)
}

/// Which of the two cut relations a cutoff falls in.
///
/// Case A: the cutoff lies strictly between the two due shares, so the
/// allocated piece always goes to the larger-entitled player. Case B: the
/// cut piece is within both shares (`k*(a+b) <= min(a,b)*d`), so whoever
/// takes it, the rest is divided by the matching relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutCase {
    A,
    B,
}

/// The two children a cut produces, raw and reduced.
///
/// `take` is the subproblem when the non-cutter (the larger-entitled
/// player; ties make Alice the cutter) values the cut piece strictly above
/// the cutoff and takes it. `keep` is the other branch: in Case B the
/// cutter takes the cut piece, in Case A the non-cutter takes the remainder
/// and the cut piece is divided further. Components stay in the parent's
/// player order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutChildren<N: Nat> {
    pub case: CutCase,
    pub take_raw: Ratio<N>,
    pub keep_raw: Ratio<N>,
    pub take: Ratio<N>,
    pub keep: Ratio<N>,
}

/// Applies one cut to a lowest-terms parent.
///
/// With `s = a + b`, Case B (`k*s <= min(a,b)*d`) leaves
/// `(a*d - k*s, b*d)` when the smaller-entitled player takes the cut piece
/// and `(a*d, b*d - k*s)` when the larger one does; Case A
/// (`min(a,b)*d < k*s < max(a,b)*d`) leaves `(a*d, b*d - k*s)`-style
/// children with the smaller side fixed. Any other cutoff is rejected.
pub fn apply_cut<N: Nat>(
    parent: &Ratio<N>,
    cutoff: &Cutoff<N>,
) -> Result<CutChildren<N>, CombineError> {
    if !parent.is_reduced() {
        return Err(CombineError::ParentNotReduced);
    }
    let a = parent.a().clone();
    let b = parent.b().clone();
    let s = parent.sum();
    let ks = cutoff.k.clone() * s;
    let ad = a.clone() * cutoff.d.clone();
    let bd = b.clone() * cutoff.d.clone();
    let a_small = a <= b;
    let (min_d, max_d) = if a_small {
        (ad.clone(), bd.clone())
    } else {
        (bd.clone(), ad.clone())
    };

    let (case, take_raw, keep_raw) = if ks <= min_d {
        // Case B: subtracting from the taker's side keeps both entries
        // nonnegative for either taker.
        let take = if a_small {
            Ratio::new(ad.clone(), bd.clone() - ks.clone())
        } else {
            Ratio::new(ad.clone() - ks.clone(), bd.clone())
        };
        let keep = if a_small {
            Ratio::new(ad - ks, bd)
        } else {
            Ratio::new(ad, bd - ks)
        };
        (CutCase::B, take, keep)
    } else if ks < max_d {
        // Case A: the smaller-entitled side is fixed at min*d; the larger
        // side shrinks by the allocated piece on either branch.
        let take = if a_small {
            Ratio::new(ad.clone(), bd.clone() - ks.clone())
        } else {
            Ratio::new(ad.clone() - ks.clone(), bd.clone())
        };
        let keep = if a_small {
            Ratio::new(ad.clone(), ks - ad)
        } else {
            Ratio::new(ks - bd.clone(), bd)
        };
        (CutCase::A, take, keep)
    } else {
        return Err(CombineError::CutoffOutOfRange {
            parent: parent.to_string(),
            cutoff: cutoff.to_string(),
        });
    };

    // (0,0) children are impossible: Case B keeps a positive d-scaled entry
    // on the untouched side, Case A keeps min*d > 0 or ks - min_d > 0.
    let take_raw = take_raw.expect("cut child cannot be (0,0)");
    let keep_raw = keep_raw.expect("cut child cannot be (0,0)");
    Ok(CutChildren {
        case,
        take: take_raw.reduce(),
        keep: keep_raw.reduce(),
        take_raw,
        keep_raw,
    })
}

/// Cutoff candidate for one operator and one oriented operand assignment,
/// from the operator's linear system. `x = (a1,b1)`, `y = (a2,b2)`.
fn cutoff_candidate<N: Nat>(
    op: Operator,
    parent: &Ratio<N>,
    x: &Ratio<N>,
    y: &Ratio<N>,
) -> Option<Cutoff<N>> {
    let a = parent.a().clone();
    let b = parent.b().clone();
    let s = parent.sum();
    let (num, den) = match op {
        // s2*a2 = a*d and s2*b2 = b*d - k*s  =>  k/d = (a2*b - a*b2)/(s*a2)
        Operator::Op1 => {
            let a2 = y.a().clone();
            let num = (a2.clone() * b).checked_sub(&(a * y.b().clone()))?;
            (num, s * a2)
        }
        // s1*a1 = a*d and s1*b1 = k*s - a*d  =>  k/d = a*(a1+b1)/(s*a1)
        Operator::Op2 => {
            let a1 = x.a().clone();
            (a * x.sum(), s * a1)
        }
        // mirror of Op2  =>  k/d = (a*b1 - a1*b)/(s*b1)
        Operator::Op3 => {
            let b1 = x.b().clone();
            let num = (a * b1.clone()).checked_sub(&(x.a().clone() * b))?;
            (num, s * b1)
        }
    };
    Cutoff::new(num, den).ok()
}

/// Checks a candidate cutoff against the target child key pair and returns
/// the cut case on success.
fn cutoff_matches<N: Nat>(
    parent: &Ratio<N>,
    cutoff: &Cutoff<N>,
    c1: &Ratio<N>,
    c2: &Ratio<N>,
) -> Option<CutCase> {
    let cut = apply_cut(parent, cutoff).ok()?;
    let mut got = [cut.take.canonical_key(), cut.keep.canonical_key()];
    let mut want = [c1.canonical_key(), c2.canonical_key()];
    got.sort();
    want.sort();
    (got == want).then_some(cut.case)
}

/// Finds an operator and exact cutoff whose cut reproduces `child1` and
/// `child2` (by canonical key) from `parent`.
///
/// The search is deterministic: operators in order *1, *2, *3; the children
/// in the given slot order first, then exchanged; each operand unswapped
/// before swapped. A combination counts only if the raw operator product is
/// proportional to the parent and the solved cutoff's cut reproduces the
/// child keys. When the cut falls in Case A there are two valid cutoffs
/// symmetric about 1/2; the smaller is returned (1/2 on a tie).
pub fn recover_cutoff<N: Nat>(
    parent: &Ratio<N>,
    child1: &Ratio<N>,
    child2: &Ratio<N>,
) -> Result<(Operator, Cutoff<N>), CombineError> {
    if !parent.is_reduced() {
        return Err(CombineError::ParentNotReduced);
    }
    if !child1.is_reduced() || !child2.is_reduced() {
        return Err(CombineError::ChildNotReduced);
    }
    for op in Operator::ALL {
        for (x, y) in [(child1, child2), (child2, child1)] {
            for xo in [x.clone(), x.swap()] {
                for yo in [y.clone(), y.swap()] {
                    let Ok(product) = star(op, &xo, &yo) else {
                        continue;
                    };
                    if !product.reduce().equivalent(parent) {
                        continue;
                    }
                    let Some(cutoff) = cutoff_candidate(op, parent, &xo, &yo) else {
                        continue;
                    };
                    let Some(case) = cutoff_matches(parent, &cutoff, child1, child2) else {
                        continue;
                    };
                    if case == CutCase::A {
                        let other = cutoff.complement();
                        if other.lt(&cutoff)
                            && cutoff_matches(parent, &other, child1, child2).is_some()
                        {
                            return Ok((op, other));
                        }
                    }
                    return Ok((op, cutoff));
                }
            }
        }
    }
    Err(CombineError::NotADecomposition)
}
