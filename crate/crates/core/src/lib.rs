//! Exact arithmetic for dividing a cake between two players in an
//! arbitrary integer ratio `(a : b)`.
//!
//! The crate computes the minimum worst-case number of cuts needed for a
//! division in which Alice is guaranteed `a/(a+b)` of the cake and Bob
//! `b/(a+b)` by their own (possibly different) measures, builds and
//! validates the protocol trees that realize it, generates the
//! doubly-exponential bound constructions, and simulates protocol
//! execution against explicit rational valuation measures.
//!
//! Core math is generic over the unsigned scalar type [`Nat`]; use the
//! `u64`/`u128` lanes when magnitudes permit and the `BigUint` lane
//! otherwise. The [`BigRatio`], [`Ratio64`] and [`Ratio128`] aliases pick
//! a lane at the crate root.

pub mod bounds;
pub mod combine;
pub mod num;
pub mod protocol;
pub mod ratio;
pub mod sim;
pub mod solver;

pub use crate::bounds::{construction1, lower_bound_int, upper_bound_int, Construction1};
pub use crate::combine::{
    apply_cut, recover_cutoff, star, CombineError, CutCase, CutChildren, Cutoff, Operator,
};
pub use crate::num::Nat;
pub use crate::protocol::{
    build_near_half, export_tree, tree_from_json, tree_to_dot, tree_to_json, validate_tree,
    worst_case_depth, Player, ProtocolNode, ProtocolTree, TreeFormat, ValidationReport,
};
pub use crate::ratio::{CanonicalKey, Ratio, RatioError};
pub use crate::sim::{
    run_protocol, trace_to_json, ExecutionTrace, Piece, SimError, ValuationMeasure,
};
pub use crate::solver::{
    f_exact, invert_product, level_sets, search_witness, LevelTable, SearchBudget, SearchMiss,
    Searcher, SolverError,
};

/// Unbounded lane: arbitrary-precision entitlements.
pub type BigRatio = ratio::Ratio<num_bigint::BigUint>;
/// Fast lane for ratios whose intermediate products fit 64 bits.
pub type Ratio64 = ratio::Ratio<u64>;
/// Fast lane with 128-bit headroom; enough for every search the node
/// budgets allow.
pub type Ratio128 = ratio::Ratio<u128>;
