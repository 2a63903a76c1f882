//! Exact computation of the minimum worst-case cut count.
//!
//! Two complementary engines share this module. [`LevelTable`] is the
//! bottom-up closure: level `n` holds every canonical ratio achievable in
//! at most `n` cuts, generated by applying the three operators to all
//! oriented pairs from level `n - 1`; first appearance is exact, so
//! membership decides the cut count unconditionally. [`Searcher`] works
//! top-down by operator inversion: it enumerates child pairs whose raw
//! product equals an integer multiple of the target and iterates deepening
//! with memoized depth bounds. Inversion only sees multiples up to
//! `max_scale`, so a failed search proves impossibility only modulo that
//! cap; every report says which of the two cases applies.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{fits_in_cuts, lower_bound_int};
use crate::combine::{apply_cut, recover_cutoff, star, Operator};
use crate::num::Nat;
use crate::protocol::{cutter_for, ProtocolNode, ProtocolTree};
use crate::ratio::{CanonicalKey, Ratio};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "node budget of {max_nodes} exhausted after completing level {completed}; \
         partial table kept"
    )]
    LevelBudget { max_nodes: u64, completed: u32 },
    #[error("node budget of {max_nodes} exhausted during search")]
    SearchBudget { max_nodes: u64 },
    #[error("stored witness for {key} failed to reassemble: {reason}")]
    WitnessAssembly { key: String, reason: String },
    #[error("malformed table line {line}: {reason}")]
    TableParse { line: usize, reason: String },
}

/// Bounds on how much work a search may do.
///
/// `max_scale` caps the proportionality factor between a raw operator
/// product and the reduced parent during inversion; it bounds the search's
/// completeness, not its soundness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_depth: u32,
    pub max_nodes: u64,
    pub max_scale: u32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_depth: 8,
            max_nodes: 10_000_000,
            max_scale: 64,
        }
    }
}

/// How a table key was first derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness<N: Nat> {
    /// `(0,1)`: allocate everything, no cut.
    Leaf,
    /// First product that produced the key: operand keys plus the
    /// orientation each was used in.
    Product {
        op: Operator,
        left: CanonicalKey<N>,
        left_swapped: bool,
        right: CanonicalKey<N>,
        right_swapped: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry<N: Nat> {
    pub f: u32,
    pub witness: Witness<N>,
}

/// Map from canonical ratio to its exact cut count, complete through
/// `levels_complete()` cuts.
#[derive(Debug, Clone)]
pub struct LevelTable<N: Nat> {
    entries: HashMap<CanonicalKey<N>, TableEntry<N>>,
    /// `levels[m]`: keys first reachable with `m` cuts, sorted.
    levels: Vec<Vec<CanonicalKey<N>>>,
}

impl<N: Nat> Default for LevelTable<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<N: Nat> LevelTable<N> {
    pub fn new() -> Self {
        let origin = Ratio::<N>::of(0, 1).canonical_key();
        let mut entries = HashMap::new();
        entries.insert(
            origin.clone(),
            TableEntry {
                f: 0,
                witness: Witness::Leaf,
            },
        );
        LevelTable {
            entries,
            levels: vec![vec![origin]],
        }
    }

    /// Highest `n` such that the table holds exactly the ratios achievable
    /// in at most `n` cuts.
    pub fn levels_complete(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &CanonicalKey<N>) -> Option<&TableEntry<N>> {
        self.entries.get(key)
    }

    pub fn f_of(&self, key: &CanonicalKey<N>) -> Option<u32> {
        self.entries.get(key).map(|e| e.f)
    }

    pub fn keys_at_level(&self, level: u32) -> &[CanonicalKey<N>] {
        &self.levels[level as usize]
    }

    /// Largest ratio sum among keys with `f <= level`.
    pub fn max_sum_through(&self, level: u32) -> N {
        self.levels[..=level as usize]
            .iter()
            .flatten()
            .map(CanonicalKey::sum)
            .max()
            .expect("level 0 is never empty")
    }

    /// Extends the closure to level `n`, inserting each new product with
    /// the first (deterministic) decomposition that produced it. On budget
    /// exhaustion the partially generated level is rolled back so the table
    /// stays exactly `A_{completed}`.
    pub fn extend_to(&mut self, n: u32, max_nodes: u64) -> Result<(), SolverError> {
        while self.levels_complete() < n {
            let level = self.levels_complete() + 1;
            let frontier = self.levels.last().unwrap().clone();
            let all: Vec<CanonicalKey<N>> = self
                .levels
                .iter()
                .flatten()
                .cloned()
                .collect();
            let older: Vec<CanonicalKey<N>> = self.levels[..self.levels.len() - 1]
                .iter()
                .flatten()
                .cloned()
                .collect();
            let mut new_keys: Vec<CanonicalKey<N>> = Vec::new();
            let mut over_budget = false;

            let emit = |entries: &mut HashMap<CanonicalKey<N>, TableEntry<N>>,
                            new_keys: &mut Vec<CanonicalKey<N>>,
                            x: &CanonicalKey<N>,
                            y: &CanonicalKey<N>|
             -> bool {
                for (xr, x_swapped) in orientations(x) {
                    for (yr, y_swapped) in orientations(y) {
                        for op in Operator::ALL {
                            let Ok(raw) = star(op, &xr, &yr) else {
                                continue; // degenerate (0,0) product
                            };
                            let key = raw.canonical_key();
                            if entries.contains_key(&key) {
                                continue;
                            }
                            if entries.len() as u64 >= max_nodes {
                                return false;
                            }
                            // An operator product is only a protocol step if
                            // some cutoff actually leaves these children; the
                            // wrong slotting solves the operator equation with
                            // a negative cut and must not enter the table.
                            if recover_cutoff(&raw.reduce(), &xr, &yr).is_err() {
                                continue;
                            }
                            entries.insert(
                                key.clone(),
                                TableEntry {
                                    f: level,
                                    witness: Witness::Product {
                                        op,
                                        left: x.clone(),
                                        left_swapped: x_swapped,
                                        right: y.clone(),
                                        right_swapped: y_swapped,
                                    },
                                },
                            );
                            new_keys.push(key);
                        }
                    }
                }
                true
            };

            // Pairs of earlier keys were all multiplied in earlier rounds,
            // so only pairs touching the frontier are new.
            'pairs: for x in &frontier {
                for y in &all {
                    if !emit(&mut self.entries, &mut new_keys, x, y) {
                        over_budget = true;
                        break 'pairs;
                    }
                }
            }
            if !over_budget {
                'pairs: for x in &older {
                    for y in &frontier {
                        if !emit(&mut self.entries, &mut new_keys, x, y) {
                            over_budget = true;
                            break 'pairs;
                        }
                    }
                }
            }

            if over_budget {
                for key in &new_keys {
                    self.entries.remove(key);
                }
                return Err(SolverError::LevelBudget {
                    max_nodes,
                    completed: self.levels_complete(),
                });
            }
            new_keys.sort();
            self.levels.push(new_keys);
        }
        Ok(())
    }

    /// One JSON record per key, ordered by level then key.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for keys in &self.levels {
            for key in keys {
                let entry = &self.entries[key];
                let record = TableRecord::from_entry(key, entry);
                writeln!(out, "{}", serde_json::to_string(&record).unwrap()).unwrap();
            }
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SolverError> {
        let mut entries = HashMap::new();
        let mut by_level: Vec<Vec<CanonicalKey<N>>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse = |reason: String| SolverError::TableParse {
                line: idx + 1,
                reason,
            };
            let record: TableRecord =
                serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
            let (key, entry) = record.into_entry::<N>().map_err(parse)?;
            while by_level.len() <= entry.f as usize {
                by_level.push(Vec::new());
            }
            by_level[entry.f as usize].push(key.clone());
            entries.insert(key, entry);
        }
        for keys in &mut by_level {
            keys.sort();
        }
        Ok(LevelTable {
            entries,
            levels: by_level,
        })
    }
}

fn orientations<N: Nat>(key: &CanonicalKey<N>) -> Vec<(Ratio<N>, bool)> {
    if key.lo() == key.hi() {
        vec![(key.ratio(false), false)]
    } else {
        vec![(key.ratio(false), false), (key.ratio(true), true)]
    }
}

/// JSON-lines schema: {"key": [str,str], "f": n, "op": "1"|"2"|"3"|null,
/// "children": [key,key]|null, "swap": [bool,bool]|null}.
#[derive(Serialize, Deserialize)]
struct TableRecord {
    key: (String, String),
    f: u32,
    op: Option<String>,
    children: Option<((String, String), (String, String))>,
    swap: Option<(bool, bool)>,
}

impl TableRecord {
    fn from_entry<N: Nat>(key: &CanonicalKey<N>, entry: &TableEntry<N>) -> Self {
        let key_pair = (key.lo().to_string(), key.hi().to_string());
        match &entry.witness {
            Witness::Leaf => TableRecord {
                key: key_pair,
                f: entry.f,
                op: None,
                children: None,
                swap: None,
            },
            Witness::Product {
                op,
                left,
                left_swapped,
                right,
                right_swapped,
            } => TableRecord {
                key: key_pair,
                f: entry.f,
                op: Some(op.code().to_owned()),
                children: Some((
                    (left.lo().to_string(), left.hi().to_string()),
                    (right.lo().to_string(), right.hi().to_string()),
                )),
                swap: Some((*left_swapped, *right_swapped)),
            },
        }
    }

    fn into_entry<N: Nat>(self) -> Result<(CanonicalKey<N>, TableEntry<N>), String> {
        let key = parse_key::<N>(&self.key.0, &self.key.1)?;
        let witness = match (self.op, self.children, self.swap) {
            (None, None, None) => Witness::Leaf,
            (Some(op), Some((left, right)), Some((ls, rs))) => Witness::Product {
                op: Operator::from_code(&op).ok_or(format!("bad operator {op:?}"))?,
                left: parse_key::<N>(&left.0, &left.1)?,
                left_swapped: ls,
                right: parse_key::<N>(&right.0, &right.1)?,
                right_swapped: rs,
            },
            _ => return Err("op, children and swap must be all present or all null".into()),
        };
        Ok((key, TableEntry { f: self.f, witness }))
    }
}

fn parse_key<N: Nat>(lo: &str, hi: &str) -> Result<CanonicalKey<N>, String> {
    let ratio = Ratio::<N>::from_decimal(lo, hi).map_err(|e| e.to_string())?;
    let key = ratio.canonical_key();
    if ratio.a() != key.lo() || ratio.b() != key.hi() {
        return Err(format!("{ratio} is not canonical"));
    }
    Ok(key)
}

/// Bottom-up closure of the three operators through level `n`.
///
/// Level 0 is `{(0,1)}`; each later level adds every nondegenerate product
/// over both orientations of all earlier pairs. First appearance is the
/// exact cut count.
pub fn level_sets<N: Nat>(n: u32, max_nodes: u64) -> Result<LevelTable<N>, SolverError> {
    let mut table = LevelTable::new();
    table.extend_to(n, max_nodes)?;
    Ok(table)
}

/// Exact cut count via level-set membership, with a witness tree
/// reassembled from the stored decompositions.
///
/// Extends the closure one level at a time so the first hit is minimal;
/// `None` if the key is not reachable within `n_max` cuts. Budget errors
/// propagate with the table rolled back to the last complete level.
pub fn f_exact<N: Nat>(
    ratio: &Ratio<N>,
    n_max: u32,
    max_nodes: u64,
) -> Result<Option<(u32, ProtocolTree<N>)>, SolverError> {
    let mut table = LevelTable::new();
    let key = ratio.canonical_key();
    for level in 0..=n_max {
        table.extend_to(level, max_nodes)?;
        if let Some(entry) = table.get(&key) {
            let f = entry.f;
            let tree = assemble_tree(&table, ratio.reduce())?;
            return Ok(Some((f, tree)));
        }
    }
    Ok(None)
}

/// Rebuilds a protocol tree for `ratio` from table witnesses. The stored
/// operand orientations pin the decomposition; the cutoff is re-derived
/// with `recover_cutoff`, which also re-verifies it.
pub fn assemble_tree<N: Nat>(
    table: &LevelTable<N>,
    ratio: Ratio<N>,
) -> Result<ProtocolTree<N>, SolverError> {
    Ok(ProtocolTree::new(assemble_node(table, ratio)?))
}

fn assemble_node<N: Nat>(
    table: &LevelTable<N>,
    ratio: Ratio<N>,
) -> Result<ProtocolNode<N>, SolverError> {
    let key = ratio.canonical_key();
    let missing = |reason: String| SolverError::WitnessAssembly {
        key: key.to_string(),
        reason,
    };
    let entry = table
        .get(&key)
        .ok_or_else(|| missing("key not in table".into()))?;
    match &entry.witness {
        Witness::Leaf => Ok(ProtocolNode::leaf(ratio)),
        Witness::Product {
            left,
            left_swapped,
            right,
            right_swapped,
            ..
        } => {
            let c1 = left.ratio(*left_swapped);
            let c2 = right.ratio(*right_swapped);
            let (_, cutoff) =
                recover_cutoff(&ratio, &c1, &c2).map_err(|e| missing(e.to_string()))?;
            let cut = apply_cut(&ratio, &cutoff).map_err(|e| missing(e.to_string()))?;
            Ok(ProtocolNode::Cut {
                cutter: cutter_for(&ratio),
                ratio,
                cutoff,
                take: Box::new(assemble_node(table, cut.take)?),
                keep: Box::new(assemble_node(table, cut.keep)?),
            })
        }
    }
}

/// All lowest-terms child pairs whose raw operator product equals
/// `scale * parent`, in a deterministic order.
///
/// For *2 the target `(A, B)` needs `A = a1*a2` and
/// `a2*b1 + a1*b2 = B - A`, enumerated over divisors of `A` and the
/// nonnegative solutions of the resulting linear Diophantine equation; *3
/// mirrors *2; *1 enumerates divisor pairs `A = (a1+b1)*a2`,
/// `B = (a2+b2)*b1`. *2 and *3 pairs are restricted to children with all
/// four entries positive: a pair with a `(1,0)`-style child yields the
/// identical raw product under *1 with the `(0,1)` operand, so nothing is
/// lost and boundary pairs that no cut realizes are not reported. Leaf
/// parents return nothing (they need no cut).
pub fn invert_product<N: Nat>(
    parent: &Ratio<N>,
    op: Operator,
    scale: u32,
) -> Vec<(Ratio<N>, Ratio<N>)> {
    let parent = parent.reduce();
    if parent.is_leaf() || scale == 0 {
        return Vec::new();
    }
    let a = parent.a().clone() * N::from(scale);
    let b = parent.b().clone() * N::from(scale);
    let mut out: Vec<(Ratio<N>, Ratio<N>)> = Vec::new();
    match op {
        Operator::Op2 => invert_op2(&a, &b, false, &mut out),
        Operator::Op3 => invert_op2(&b, &a, true, &mut out),
        Operator::Op1 => {
            let div_a = divisors(&a);
            let div_b = divisors(&b);
            for a2 in &div_a {
                let u = a.clone() / a2.clone(); // a1 + b1
                for b1 in &div_b {
                    let v = b.clone() / b1.clone(); // a2 + b2
                    if b1 <= &u && a2 <= &v {
                        let c1 = Ratio::new(u.clone() - b1.clone(), b1.clone())
                            .expect("b1 >= 1");
                        let c2 = Ratio::new(a2.clone(), v - a2.clone()).expect("a2 >= 1");
                        if c1.is_reduced() && c2.is_reduced() {
                            out.push((c1, c2));
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

// *2 inversion of target (A, B); with `mirrored` the caller passed the
// swapped target, so emit *3 children (component-swapped, same slots).
fn invert_op2<N: Nat>(a: &N, b: &N, mirrored: bool, out: &mut Vec<(Ratio<N>, Ratio<N>)>) {
    if b < a {
        return;
    }
    let rest = b.clone() - a.clone(); // b2*a1 + a2*b1
    for a1 in divisors(a) {
        let a2 = a.clone() / a1.clone();
        for (b1, b2) in diophantine_nonneg(&a2, &a1, &rest) {
            if b1.is_zero() || b2.is_zero() {
                continue;
            }
            let (c1, c2) = if mirrored {
                (Ratio::new(b1, a1.clone()), Ratio::new(b2, a2.clone()))
            } else {
                (Ratio::new(a1.clone(), b1), Ratio::new(a2.clone(), b2))
            };
            let (c1, c2) = (c1.expect("positive"), c2.expect("positive"));
            if c1.is_reduced() && c2.is_reduced() {
                out.push((c1, c2));
            }
        }
    }
}

/// Divisors of `n >= 1` by trial division, sorted ascending.
pub fn divisors<N: Nat>(n: &N) -> Vec<N> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = N::one();
    loop {
        let sq = i.clone() * i.clone();
        if &sq > n {
            break;
        }
        let (q, r) = n.div_rem(&i);
        if r.is_zero() {
            small.push(i.clone());
            if q != i {
                large.push(q);
            }
        }
        i = i + N::one();
    }
    large.reverse();
    small.extend(large);
    small
}

/// All nonnegative integer solutions `(x, y)` of `p*x + q*y = r` with
/// `p, q >= 1`, ascending in `x`.
pub fn diophantine_nonneg<N: Nat>(p: &N, q: &N, r: &N) -> Vec<(N, N)> {
    let g = p.gcd(q);
    if !r.mod_floor(&g).is_zero() {
        return Vec::new();
    }
    let q_red = q.clone() / g.clone();
    // smallest nonnegative x: x = (r/g) * inv(p/g) mod (q/g)
    let x0 = if q_red.is_one() {
        N::zero()
    } else {
        let p_red = (p.clone() / g.clone()).mod_floor(&q_red);
        let inv = mod_inverse(&p_red, &q_red).expect("p/g and q/g are coprime");
        ((r.clone() / g).mod_floor(&q_red) * inv).mod_floor(&q_red)
    };
    let mut solutions = Vec::new();
    let mut x = x0;
    loop {
        let px = p.clone() * x.clone();
        if &px > r {
            break;
        }
        let y = (r.clone() - px) / q.clone();
        solutions.push((x.clone(), y));
        x = x + q_red.clone();
    }
    solutions
}

/// Inverse of `a` modulo `m` (`m >= 1`), if `gcd(a, m) = 1`. Extended
/// Euclid with an explicit sign flag so it works on unsigned scalars.
pub fn mod_inverse<N: Nat>(a: &N, m: &N) -> Option<N> {
    if m.is_one() {
        return Some(N::zero());
    }
    let mut r0 = a.mod_floor(m);
    let mut r1 = m.clone();
    // coefficient of `a` in r0 = s0*a + t0*m, as (magnitude, negative)
    let mut s0 = (N::one(), false);
    let mut s1 = (N::zero(), false);
    while !r1.is_zero() {
        let (quot, rem) = r0.div_rem(&r1);
        let qs = (quot * s1.0.clone(), s1.1);
        let s2 = signed_sub(s0, qs);
        r0 = std::mem::replace(&mut r1, rem);
        s0 = std::mem::replace(&mut s1, s2);
    }
    if !r0.is_one() {
        return None;
    }
    let (mag, neg) = s0;
    let reduced = mag.mod_floor(m);
    Some(if neg && !reduced.is_zero() {
        m.clone() - reduced
    } else {
        reduced
    })
}

// (x, xneg) - (y, yneg) in sign-magnitude form.
fn signed_sub<N: Nat>(x: (N, bool), y: (N, bool)) -> (N, bool) {
    match (x, y) {
        ((xm, xn), (ym, yn)) if xn == yn => {
            if xm >= ym {
                (xm - ym, xn)
            } else {
                (ym - xm, !xn)
            }
        }
        ((xm, xn), (ym, _)) => (xm + ym, xn),
    }
}

/// Result of a top-down search that did not return a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMiss {
    /// Every decomposition up to `max_scale` was exhausted: the ratio is
    /// not achievable within the depth budget unless some decomposition
    /// only exists at a larger scale.
    ExhaustedUpToScale { max_scale: u32 },
    /// The node budget ran out first; nothing is proved.
    NodeBudget { max_nodes: u64 },
}

/// Top-down witness search by operator inversion with iterative deepening.
///
/// A closure table is grown lazily (never past level 5) and used as a
/// complete decision procedure for subproblems within its range; above it,
/// child pairs are enumerated by `invert_product` over scales
/// `1..=max_scale` and tried smallest-sum first. Memoized depth bounds are
/// kept per canonical key. Reusable across calls: the table and memos
/// carry over.
pub struct Searcher<N: Nat> {
    budget: SearchBudget,
    table: LevelTable<N>,
    table_budget_hit: bool,
    /// proven achievable in at most this many cuts
    achievable: HashMap<CanonicalKey<N>, u32>,
    /// proven not achievable within this many cuts (modulo max_scale)
    exhausted: HashMap<CanonicalKey<N>, u32>,
    decompositions: HashMap<CanonicalKey<N>, (Ratio<N>, Ratio<N>)>,
    nodes_used: u64,
}

/// Deepest closure level the searcher will materialize.
const MAX_TABLE_LEVEL: u32 = 5;

impl<N: Nat> Searcher<N> {
    pub fn new(budget: SearchBudget) -> Self {
        Searcher {
            budget,
            table: LevelTable::new(),
            table_budget_hit: false,
            achievable: HashMap::new(),
            exhausted: HashMap::new(),
            decompositions: HashMap::new(),
            nodes_used: 0,
        }
    }

    pub fn nodes_used(&self) -> u64 {
        self.nodes_used
    }

    /// Closure levels the internal table actually completed; decisions at
    /// or below this depth carry no scale caveat.
    pub fn table_complete_level(&self) -> u32 {
        self.table.levels_complete()
    }

    /// Shallowest witness tree within the budget, or why there is none.
    pub fn search(&mut self, ratio: &Ratio<N>) -> Result<ProtocolTree<N>, SearchMiss> {
        let reduced = ratio.reduce();
        let key = reduced.canonical_key();
        let start = lower_bound_int(&reduced);
        for depth in start..=self.budget.max_depth {
            match self.try_depth(&key, depth) {
                Ok(true) => {
                    let root = self
                        .assemble(reduced)
                        .expect("successful search leaves a complete decomposition trail");
                    return Ok(ProtocolTree::new(root));
                }
                Ok(false) => continue,
                Err(miss) => return Err(miss),
            }
        }
        Err(SearchMiss::ExhaustedUpToScale {
            max_scale: self.budget.max_scale,
        })
    }

    // Grows the internal table as far as the remaining node budget allows.
    fn ensure_table(&mut self, level: u32) {
        let target = level.min(MAX_TABLE_LEVEL);
        while !self.table_budget_hit && self.table.levels_complete() < target {
            let next = self.table.levels_complete() + 1;
            let before = self.table.len() as u64;
            let room = self.budget.max_nodes.saturating_sub(self.nodes_used);
            match self.table.extend_to(next, before + room) {
                Ok(()) => {
                    self.nodes_used += self.table.len() as u64 - before;
                }
                Err(_) => {
                    self.table_budget_hit = true;
                }
            }
        }
    }

    /// Is `key` achievable within `depth` cuts?
    fn try_depth(&mut self, key: &CanonicalKey<N>, depth: u32) -> Result<bool, SearchMiss> {
        if key.is_leaf() {
            return Ok(true);
        }
        if lower_bound_int(&key.ratio(false)) > depth {
            return Ok(false);
        }
        self.ensure_table(depth);
        if let Some(f) = self.table.f_of(key) {
            if f <= depth {
                return Ok(true);
            }
        }
        if depth <= self.table.levels_complete() {
            // the closure is complete through this depth, so absence or a
            // larger f decides negatively with no scale caveat
            return Ok(false);
        }
        if self.achievable.get(key).is_some_and(|d| *d <= depth) {
            return Ok(true);
        }
        if self.exhausted.get(key).is_some_and(|d| *d >= depth) {
            return Ok(false);
        }
        if depth == 0 {
            return Ok(false);
        }

        let parent = key.ratio(false);
        let child_depth = depth - 1;
        for scale in 1..=self.budget.max_scale {
            for op in Operator::ALL {
                let mut candidates: Vec<(N, Ratio<N>, Ratio<N>)> =
                    invert_product(&parent, op, scale)
                        .into_iter()
                        .filter(|(c1, c2)| {
                            fits_in_cuts(&c1.sum(), child_depth)
                                && fits_in_cuts(&c2.sum(), child_depth)
                        })
                        .map(|(c1, c2)| (c1.sum().max(c2.sum()), c1, c2))
                        .collect();
                candidates.sort();
                for (_, c1, c2) in candidates {
                    self.nodes_used += 1;
                    if self.nodes_used > self.budget.max_nodes {
                        return Err(SearchMiss::NodeBudget {
                            max_nodes: self.budget.max_nodes,
                        });
                    }
                    if self.try_depth(&c1.canonical_key(), child_depth)?
                        && self.try_depth(&c2.canonical_key(), child_depth)?
                    {
                        // drop algebraic solutions no cut realizes
                        if recover_cutoff(&parent, &c1, &c2).is_err() {
                            continue;
                        }
                        self.decompositions
                            .entry(key.clone())
                            .or_insert_with(|| (c1, c2));
                        let best = self
                            .achievable
                            .get(key)
                            .map_or(depth, |d| depth.min(*d));
                        self.achievable.insert(key.clone(), best);
                        return Ok(true);
                    }
                }
            }
        }
        let worst = self.exhausted.get(key).map_or(depth, |d| depth.max(*d));
        self.exhausted.insert(key.clone(), worst);
        Ok(false)
    }

    fn assemble(&self, ratio: Ratio<N>) -> Result<ProtocolNode<N>, SolverError> {
        let key = ratio.canonical_key();
        if self.table.get(&key).is_some() {
            return assemble_node(&self.table, ratio);
        }
        let missing = |reason: String| SolverError::WitnessAssembly {
            key: key.to_string(),
            reason,
        };
        let (c1, c2) = self
            .decompositions
            .get(&key)
            .ok_or_else(|| missing("no decomposition recorded".into()))?;
        let (_, cutoff) = recover_cutoff(&ratio, c1, c2).map_err(|e| missing(e.to_string()))?;
        let cut = apply_cut(&ratio, &cutoff).map_err(|e| missing(e.to_string()))?;
        Ok(ProtocolNode::Cut {
            cutter: cutter_for(&ratio),
            ratio,
            cutoff,
            take: Box::new(self.assemble(cut.take)?),
            keep: Box::new(self.assemble(cut.keep)?),
        })
    }
}

/// One-shot convenience wrapper around [`Searcher`].
pub fn search_witness<N: Nat>(
    ratio: &Ratio<N>,
    budget: SearchBudget,
) -> Result<ProtocolTree<N>, SearchMiss> {
    Searcher::new(budget).search(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{validate_tree, worst_case_depth};

    type R = Ratio<u64>;

    #[test]
    fn levels_zero_through_two() {
        let table = level_sets::<u64>(2, 1 << 20).unwrap();
        let keys = |m: u32| {
            table
                .keys_at_level(m)
                .iter()
                .map(|k| (*k.lo(), *k.hi()))
                .collect::<Vec<_>>()
        };
        assert_eq!(keys(0), vec![(0, 1)]);
        assert_eq!(keys(1), vec![(1, 1)]);
        assert_eq!(keys(2), vec![(1, 2), (1, 3)]);
    }

    #[test]
    fn level_three_and_four_sizes() {
        let table = level_sets::<u64>(4, 1 << 20).unwrap();
        assert_eq!(table.keys_at_level(3).len(), 16);
        assert_eq!(table.keys_at_level(4).len(), 651);
        assert_eq!(table.len(), 671);
        assert_eq!(table.max_sum_through(3), 17);
        assert_eq!(table.max_sum_through(4), 397);
    }

    #[test]
    fn unrealizable_product_stays_out() {
        // (3,8) is the raw *1 product of (1,2) and (1,3), but the matching
        // linear system needs a negative cut: no single cut on (3,8) leaves
        // those children, so its true count is 4, not 3
        assert!(recover_cutoff(&R::of(3, 8), &R::of(1, 2), &R::of(1, 3)).is_err());
        let table = level_sets::<u64>(4, 1 << 20).unwrap();
        assert_eq!(table.f_of(&R::of(3, 8).canonical_key()), Some(4));
    }

    #[test]
    fn budget_rolls_back_partial_level() {
        let err = level_sets::<u64>(4, 30).unwrap_err();
        match err {
            SolverError::LevelBudget { completed, .. } => assert_eq!(completed, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn f_exact_examples() {
        let (f, tree) = f_exact(&R::of(9, 8), 5, 1 << 24).unwrap().unwrap();
        assert_eq!(f, 3);
        assert!(validate_tree(&tree).is_valid());
        assert_eq!(worst_case_depth(&tree), 3);

        let (f, _) = f_exact(&R::of(1, 1), 3, 1 << 20).unwrap().unwrap();
        assert_eq!(f, 1);
        let (f, tree) = f_exact(&R::of(1, 0), 3, 1 << 20).unwrap().unwrap();
        assert_eq!(f, 0);
        assert_eq!(worst_case_depth(&tree), 0);
        let (f, _) = f_exact(&R::of(1, 3), 3, 1 << 20).unwrap().unwrap();
        assert_eq!(f, 2);
    }

    #[test]
    fn invert_examples() {
        let pairs = invert_product(&R::of(9, 8), Operator::Op1, 1);
        assert!(pairs.contains(&(R::of(1, 2), R::of(3, 1))));

        let pairs = invert_product(&R::of(1, 3), Operator::Op2, 1);
        assert!(pairs.contains(&(R::of(1, 1), R::of(1, 1))));

        assert!(invert_product(&R::of(1, 1), Operator::Op2, 1).is_empty());
    }

    #[test]
    fn invert_round_trips_through_star() {
        for parent in [R::of(9, 8), R::of(5, 7), R::of(1, 16), R::of(13, 19)] {
            for op in Operator::ALL {
                for scale in 1..=6u32 {
                    for (c1, c2) in invert_product(&parent, op, scale) {
                        let raw = star(op, &c1, &c2).unwrap();
                        assert_eq!(*raw.a(), parent.a() * u64::from(scale));
                        assert_eq!(*raw.b(), parent.b() * u64::from(scale));
                    }
                }
            }
        }
    }

    #[test]
    fn diophantine_and_inverse() {
        assert_eq!(mod_inverse(&3u64, &7), Some(5));
        assert_eq!(mod_inverse(&2u64, &4), None);
        assert_eq!(mod_inverse(&1u64, &1), Some(0));

        let sols = diophantine_nonneg(&3u64, &5, &34);
        assert_eq!(sols, vec![(3, 5), (8, 2)]);
        assert!(diophantine_nonneg(&4u64, &6, &7).is_empty());
        // exhaustive cross-check on small inputs
        for p in 1u64..=12 {
            for q in 1..=12 {
                for r in 0..=60 {
                    let got = diophantine_nonneg(&p, &q, &r);
                    let want: Vec<(u64, u64)> = (0..=r / p)
                        .filter(|x| (r - p * x) % q == 0)
                        .map(|x| (x, (r - p * x) / q))
                        .collect();
                    assert_eq!(got, want, "p={p} q={q} r={r}");
                }
            }
        }
    }

    #[test]
    fn search_finds_nine_eight() {
        let mut searcher = Searcher::new(SearchBudget {
            max_depth: 5,
            max_nodes: 1 << 22,
            max_scale: 64,
        });
        let tree = searcher.search(&R::of(9, 8)).unwrap();
        assert!(validate_tree(&tree).is_valid());
        assert_eq!(worst_case_depth(&tree), 3);
    }

    #[test]
    fn search_cut_and_choose() {
        let tree = search_witness(&R::of(1, 1), SearchBudget::default()).unwrap();
        assert_eq!(worst_case_depth(&tree), 1);
    }

    #[test]
    fn search_respects_max_depth() {
        let miss = search_witness(
            &R::of(9, 8),
            SearchBudget {
                max_depth: 2,
                max_nodes: 1 << 22,
                max_scale: 64,
            },
        )
        .unwrap_err();
        assert_eq!(miss, SearchMiss::ExhaustedUpToScale { max_scale: 64 });
    }

    #[test]
    fn jsonl_round_trip() {
        let table = level_sets::<u64>(3, 1 << 20).unwrap();
        let text = table.to_jsonl();
        let back = LevelTable::<u64>::from_jsonl(&text).unwrap();
        assert_eq!(back.len(), table.len());
        assert_eq!(back.levels_complete(), table.levels_complete());
        for level in 0..=3 {
            assert_eq!(back.keys_at_level(level), table.keys_at_level(level));
        }
        let key = R::of(8, 9).canonical_key();
        assert_eq!(back.f_of(&key), Some(3));
    }

    #[test]
    fn monotone_levels() {
        // A_n grows and every level-m key has a witness over level-(m-1) keys
        let table = level_sets::<u64>(4, 1 << 20).unwrap();
        for level in 1..=4u32 {
            for key in table.keys_at_level(level) {
                match &table.get(key).unwrap().witness {
                    Witness::Product { left, right, .. } => {
                        let fl = table.f_of(left).unwrap();
                        let fr = table.f_of(right).unwrap();
                        assert_eq!(fl.max(fr), level - 1, "witness levels for {key}");
                    }
                    Witness::Leaf => panic!("non-root leaf witness"),
                }
            }
        }
    }
}
