//! Protocol trees: the cut-near-halves construction, validation of
//! arbitrary trees against the cut relations, depth accounting, and JSON /
//! DOT export.
//!
//! A tree certifies that its ratio is achievable in `worst_case_depth`
//! cuts: every internal node names a cutter and a cutoff, and its two
//! branches are the subproblems left when the non-cutter does or does not
//! take the cut piece.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combine::{apply_cut, Cutoff};
use crate::num::Nat;
use crate::ratio::Ratio;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("malformed tree JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("node {path}: {reason}")]
    Schema { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Alice,
    Bob,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::Alice => Player::Bob,
            Player::Bob => Player::Alice,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Player::Alice => "A",
            Player::Bob => "B",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "A" => Some(Player::Alice),
            "B" => Some(Player::Bob),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One step of a protocol. Ratios are stored in lowest terms with Alice's
/// entitlement first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolNode<N: Nat> {
    /// One side is owed nothing; the whole remaining piece goes to `winner`.
    Leaf { ratio: Ratio<N>, winner: Player },
    /// `cutter` cuts off a piece worth `cutoff` of the current piece by
    /// their own measure. `take` is followed when the other player values
    /// that piece strictly above the cutoff (and takes it), `keep`
    /// otherwise.
    Cut {
        ratio: Ratio<N>,
        cutter: Player,
        cutoff: Cutoff<N>,
        take: Box<ProtocolNode<N>>,
        keep: Box<ProtocolNode<N>>,
    },
}

impl<N: Nat> ProtocolNode<N> {
    pub fn ratio(&self) -> &Ratio<N> {
        match self {
            ProtocolNode::Leaf { ratio, .. } => ratio,
            ProtocolNode::Cut { ratio, .. } => ratio,
        }
    }

    /// Leaf node for a reduced leaf ratio.
    pub fn leaf(ratio: Ratio<N>) -> Self {
        debug_assert!(ratio.is_leaf() && ratio.is_reduced());
        let winner = if ratio.b().is_zero() {
            Player::Alice
        } else {
            Player::Bob
        };
        ProtocolNode::Leaf { ratio, winner }
    }
}

/// The cutter at a node: the player who is owed less, Alice on ties.
pub fn cutter_for<N: Nat>(ratio: &Ratio<N>) -> Player {
    if ratio.a() <= ratio.b() {
        Player::Alice
    } else {
        Player::Bob
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolTree<N: Nat> {
    root: ProtocolNode<N>,
}

impl<N: Nat> ProtocolTree<N> {
    pub fn new(root: ProtocolNode<N>) -> Self {
        ProtocolTree { root }
    }

    pub fn root(&self) -> &ProtocolNode<N> {
        &self.root
    }

    /// The (reduced) ratio this tree divides.
    pub fn ratio(&self) -> &Ratio<N> {
        self.root.ratio()
    }
}

/// Builds the cut-near-halves tree: each cut asks for `floor(s/2)/s` of the
/// current piece, so both children have ratio sum at most `ceil(s/2)` and
/// the depth is at most `ceil(lg s)`.
pub fn build_near_half<N: Nat>(ratio: &Ratio<N>) -> ProtocolTree<N> {
    ProtocolTree::new(near_half_node(ratio.reduce()))
}

fn near_half_node<N: Nat>(ratio: Ratio<N>) -> ProtocolNode<N> {
    if ratio.is_leaf() {
        return ProtocolNode::leaf(ratio);
    }
    let s = ratio.sum();
    let two = N::from(2u32);
    let t = s.clone() / two;
    let cutoff = Cutoff::new(t, s).expect("0 < floor(s/2) < s for s >= 2");
    let cut = apply_cut(&ratio, &cutoff).expect("floor(s/2)/s always satisfies a cut relation");
    ProtocolNode::Cut {
        cutter: cutter_for(&ratio),
        ratio,
        cutoff,
        take: Box::new(near_half_node(cut.take)),
        keep: Box::new(near_half_node(cut.keep)),
    }
}

/// Longest root-to-leaf path counting internal nodes; one cut per internal
/// node.
pub fn worst_case_depth<N: Nat>(tree: &ProtocolTree<N>) -> u32 {
    fn depth<N: Nat>(node: &ProtocolNode<N>) -> u32 {
        match node {
            ProtocolNode::Leaf { .. } => 0,
            ProtocolNode::Cut { take, keep, .. } => 1 + depth(take).max(depth(keep)),
        }
    }
    depth(&tree.root)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

/// Outcome of checking a tree against the cut relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Checks every node: ratios in lowest terms, leaves are `(1,0)`/`(0,1)`
/// with the matching winner, the cutter is the less-entitled player, and
/// each internal node's branches carry exactly the canonical keys its
/// cutoff produces.
pub fn validate_tree<N: Nat>(tree: &ProtocolTree<N>) -> ValidationReport {
    let mut report = ValidationReport::default();
    walk(&tree.root, "root", &mut report);
    report
}

fn walk<N: Nat>(node: &ProtocolNode<N>, path: &str, report: &mut ValidationReport) {
    let mut fail = |reason: String| {
        report.violations.push(Violation {
            path: path.to_owned(),
            reason,
        });
    };
    if !node.ratio().is_reduced() {
        fail(format!("ratio {} is not in lowest terms", node.ratio()));
        return;
    }
    match node {
        ProtocolNode::Leaf { ratio, winner } => {
            if !ratio.is_leaf() {
                fail(format!("leaf ratio {ratio} still owes both players"));
                return;
            }
            let expected = if ratio.b().is_zero() {
                Player::Alice
            } else {
                Player::Bob
            };
            if *winner != expected {
                fail(format!("leaf {ratio} must allocate to {expected}"));
            }
        }
        ProtocolNode::Cut {
            ratio,
            cutter,
            cutoff,
            take,
            keep,
        } => {
            if *cutter != cutter_for(ratio) {
                fail(format!(
                    "cutter must be the less-entitled player ({})",
                    cutter_for(ratio)
                ));
            }
            match apply_cut(ratio, cutoff) {
                Err(e) => fail(e.to_string()),
                Ok(cut) => {
                    if take.ratio().canonical_key() != cut.take.canonical_key() {
                        fail(format!(
                            "take branch is {} but cutoff {} leaves {}",
                            take.ratio(),
                            cutoff,
                            cut.take
                        ));
                    }
                    if keep.ratio().canonical_key() != cut.keep.canonical_key() {
                        fail(format!(
                            "keep branch is {} but cutoff {} leaves {}",
                            keep.ratio(),
                            cutoff,
                            cut.keep
                        ));
                    }
                }
            }
            walk(take, &format!("{path}/take"), report);
            walk(keep, &format!("{path}/keep"), report);
        }
    }
}

// JSON mirror matching the documented schema: {"ratio": [str,str],
// "kind": "leaf"|"cut", "winner"?, "cutter"?, "cutoff"?, "take"?, "keep"?}.
#[derive(Serialize, Deserialize)]
struct NodeJson {
    ratio: (String, String),
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    winner: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    take: Option<Box<NodeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    keep: Option<Box<NodeJson>>,
}

fn node_to_json<N: Nat>(node: &ProtocolNode<N>) -> NodeJson {
    let ratio = (node.ratio().a().to_string(), node.ratio().b().to_string());
    match node {
        ProtocolNode::Leaf { winner, .. } => NodeJson {
            ratio,
            kind: "leaf".to_owned(),
            winner: Some(winner.code().to_owned()),
            cutter: None,
            cutoff: None,
            take: None,
            keep: None,
        },
        ProtocolNode::Cut {
            cutter,
            cutoff,
            take,
            keep,
            ..
        } => NodeJson {
            ratio,
            kind: "cut".to_owned(),
            winner: None,
            cutter: Some(cutter.code().to_owned()),
            cutoff: Some(cutoff.to_string()),
            take: Some(Box::new(node_to_json(take))),
            keep: Some(Box::new(node_to_json(keep))),
        },
    }
}

fn node_from_json<N: Nat>(json: &NodeJson, path: &str) -> Result<ProtocolNode<N>, TreeError> {
    let schema = |reason: String| TreeError::Schema {
        path: path.to_owned(),
        reason,
    };
    let ratio = Ratio::from_decimal(&json.ratio.0, &json.ratio.1)
        .map_err(|e| schema(e.to_string()))?;
    match json.kind.as_str() {
        "leaf" => {
            let code = json
                .winner
                .as_deref()
                .ok_or_else(|| schema("leaf without winner".into()))?;
            let winner =
                Player::from_code(code).ok_or_else(|| schema(format!("bad player {code:?}")))?;
            Ok(ProtocolNode::Leaf { ratio, winner })
        }
        "cut" => {
            let code = json
                .cutter
                .as_deref()
                .ok_or_else(|| schema("cut without cutter".into()))?;
            let cutter =
                Player::from_code(code).ok_or_else(|| schema(format!("bad player {code:?}")))?;
            let cutoff = json
                .cutoff
                .as_deref()
                .ok_or_else(|| schema("cut without cutoff".into()))?
                .parse::<Cutoff<N>>()
                .map_err(|e| schema(e.to_string()))?;
            let take = json
                .take
                .as_deref()
                .ok_or_else(|| schema("cut without take branch".into()))?;
            let keep = json
                .keep
                .as_deref()
                .ok_or_else(|| schema("cut without keep branch".into()))?;
            Ok(ProtocolNode::Cut {
                ratio,
                cutter,
                cutoff,
                take: Box::new(node_from_json(take, &format!("{path}/take"))?),
                keep: Box::new(node_from_json(keep, &format!("{path}/keep"))?),
            })
        }
        other => Err(schema(format!("unknown node kind {other:?}"))),
    }
}

pub fn tree_to_json<N: Nat>(tree: &ProtocolTree<N>) -> String {
    serde_json::to_string_pretty(&node_to_json(&tree.root)).expect("tree serializes")
}

pub fn tree_from_json<N: Nat>(json: &str) -> Result<ProtocolTree<N>, TreeError> {
    let parsed: NodeJson = serde_json::from_str(json)?;
    Ok(ProtocolTree::new(node_from_json(&parsed, "root")?))
}

/// Graphviz DOT rendering: nodes `n<preorder-index>` labelled with the
/// reduced ratio (and cutoff for internal nodes), edges labelled with the
/// branch kind.
pub fn tree_to_dot<N: Nat>(tree: &ProtocolTree<N>) -> String {
    fn emit<N: Nat>(node: &ProtocolNode<N>, next_id: &mut usize, out: &mut String) -> usize {
        let id = *next_id;
        *next_id += 1;
        match node {
            ProtocolNode::Leaf { ratio, winner } => {
                out.push_str(&format!(
                    "  n{id} [label=\"{ratio} wins {winner}\" shape=box];\n"
                ));
            }
            ProtocolNode::Cut {
                ratio,
                cutoff,
                take,
                keep,
                ..
            } => {
                out.push_str(&format!("  n{id} [label=\"{ratio} cut {cutoff}\"];\n"));
                let take_id = emit(take, next_id, out);
                out.push_str(&format!("  n{id} -> n{take_id} [label=\"take\"];\n"));
                let keep_id = emit(keep, next_id, out);
                out.push_str(&format!("  n{id} -> n{keep_id} [label=\"keep\"];\n"));
            }
        }
        id
    }
    let mut out = String::from("digraph protocol {\n");
    let mut next_id = 0;
    emit(&tree.root, &mut next_id, &mut out);
    out.push_str("}\n");
    out
}

/// Export in the format the CLI exposes.
pub fn export_tree<N: Nat>(tree: &ProtocolTree<N>, format: TreeFormat) -> String {
    match format {
        TreeFormat::Json => tree_to_json(tree),
        TreeFormat::Dot => tree_to_dot(tree),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Json,
    Dot,
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Ratio<u64>;

    #[test]
    fn near_half_nine_eight_has_depth_five() {
        let tree = build_near_half(&R::of(9, 8));
        assert!(validate_tree(&tree).is_valid());
        assert_eq!(worst_case_depth(&tree), 5);
    }

    #[test]
    fn near_half_one_one_is_cut_and_choose() {
        let tree = build_near_half(&R::of(1, 1));
        assert_eq!(worst_case_depth(&tree), 1);
        let ProtocolNode::Cut { cutoff, take, keep, .. } = tree.root() else {
            panic!("expected a cut node");
        };
        assert_eq!(*cutoff, Cutoff::of(1, 2));
        assert!(matches!(**take, ProtocolNode::Leaf { .. }));
        assert!(matches!(**keep, ProtocolNode::Leaf { .. }));
    }

    #[test]
    fn near_half_leaf() {
        let tree = build_near_half(&R::of(1, 0));
        assert_eq!(worst_case_depth(&tree), 0);
        assert!(validate_tree(&tree).is_valid());
    }

    #[test]
    fn near_half_root_children_match_figure() {
        // (9,8) splits into (1,8) and the all-to-Alice leaf (9,0)
        let tree = build_near_half(&R::of(9, 8));
        let ProtocolNode::Cut { take, keep, cutter, .. } = tree.root() else {
            panic!("expected a cut node");
        };
        assert_eq!(*cutter, Player::Bob);
        assert_eq!(take.ratio().canonical_key(), R::of(1, 8).canonical_key());
        assert_eq!(keep.ratio().canonical_key(), R::of(1, 0).canonical_key());
    }

    #[test]
    fn near_half_depth_bound_small_sums() {
        for s in 2u32..=64 {
            for a in 0..=s / 2 {
                let r = R::of(a, s - a).reduce();
                let tree = build_near_half(&r);
                assert!(validate_tree(&tree).is_valid(), "invalid tree for {r}");
                let bound = 64 - u64::from(r.sum() - 1).leading_zeros();
                assert!(
                    worst_case_depth(&tree) <= bound,
                    "depth {} > ceil(lg {}) for {r}",
                    worst_case_depth(&tree),
                    r.sum()
                );
            }
        }
    }

    #[test]
    fn validate_rejects_figure_branch() {
        // hand-built node (1,8) -> (1,4),(1,5): no cutoff leaves that pair
        let bad = ProtocolTree::new(ProtocolNode::Cut {
            ratio: R::of(1, 8),
            cutter: Player::Alice,
            cutoff: Cutoff::of(4, 9),
            take: Box::new(build_near_half(&R::of(1, 4)).root.clone()),
            keep: Box::new(build_near_half(&R::of(1, 5)).root.clone()),
        });
        let report = validate_tree(&bad);
        assert!(!report.is_valid());
        assert_eq!(report.first().unwrap().path, "root");
    }

    #[test]
    fn validate_rejects_unreduced_ratio() {
        let bad = ProtocolTree::new(ProtocolNode::Leaf {
            ratio: Ratio::new(2u64, 0).unwrap(),
            winner: Player::Alice,
        });
        assert!(!validate_tree(&bad).is_valid());
    }

    #[test]
    fn json_round_trip() {
        let tree = build_near_half(&R::of(9, 8));
        let json = tree_to_json(&tree);
        let back: ProtocolTree<u64> = tree_from_json(&json).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn json_leaf_shape() {
        let tree = build_near_half(&R::of(1, 0));
        let json = tree_to_json(&tree);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["kind"], "leaf");
        assert_eq!(value["winner"], "A");
    }

    #[test]
    fn dot_cut_and_choose() {
        let dot = tree_to_dot(&build_near_half(&R::of(1, 1)));
        assert!(dot.contains("(1,1) cut 1/2"));
        assert!(dot.contains("n0 -> n1 [label=\"take\"]"));
    }
}
