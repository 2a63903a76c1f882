//! Executes protocol trees against explicit valuation measures and checks
//! the due-share guarantee with exact rational arithmetic.
//!
//! Measures are piecewise-constant rational densities on `[0, 1]` with
//! total mass one, so every evaluation and every inverse-CDF cut is an
//! exact `BigRational`. The guarantee check is an exact comparison; there
//! is no tolerance anywhere.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::combine::{apply_cut, CutCase, Cutoff};
use crate::num::Nat;
use crate::protocol::{Player, ProtocolNode, ProtocolTree};
use crate::ratio::Ratio;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("measure is invalid: {0}")]
    BadMeasure(String),
    #[error("piece endpoints must satisfy 0 <= lo <= hi <= 1")]
    BadPiece,
    #[error("cut target {target} exceeds the piece's value {available}")]
    InfeasibleCut { target: String, available: String },
    #[error("cannot parse {0:?} as a rational")]
    BadRational(String),
    #[error("tree is not executable: {0}")]
    BadTree(String),
}

fn big(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn parse_rational(s: &str) -> Result<BigRational, SimError> {
    let bad = || SimError::BadRational(s.to_owned());
    let parse_int = |t: &str| t.trim().parse::<BigInt>().map_err(|_| bad());
    match s.split_once('/') {
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(parse_int(num)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

fn display_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Sub-interval of the cake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    lo: BigRational,
    hi: BigRational,
}

impl Piece {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self, SimError> {
        if lo.is_negative() || lo > hi || hi > BigRational::one() {
            return Err(SimError::BadPiece);
        }
        Ok(Piece { lo, hi })
    }

    pub fn whole() -> Self {
        Piece {
            lo: BigRational::zero(),
            hi: BigRational::one(),
        }
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            display_rational(&self.lo),
            display_rational(&self.hi)
        )
    }
}

/// Piecewise-constant probability density on `[0, 1]`: strictly increasing
/// breakpoints `0 = x_0 < ... < x_m = 1` and one nonnegative density per
/// segment, integrating to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationMeasure {
    breakpoints: Vec<BigRational>,
    densities: Vec<BigRational>,
}

impl ValuationMeasure {
    pub fn new(
        breakpoints: Vec<BigRational>,
        densities: Vec<BigRational>,
    ) -> Result<Self, SimError> {
        let bad = |s: &str| SimError::BadMeasure(s.to_owned());
        if breakpoints.len() < 2 || densities.len() + 1 != breakpoints.len() {
            return Err(bad("need m+1 breakpoints and m densities"));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(bad("breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("breakpoints must be strictly increasing"));
        }
        if densities.iter().any(BigRational::is_negative) {
            return Err(bad("densities must be nonnegative"));
        }
        let mass: BigRational = breakpoints
            .windows(2)
            .zip(&densities)
            .map(|(w, d)| d * (&w[1] - &w[0]))
            .sum();
        if !mass.is_one() {
            return Err(bad(&format!(
                "total mass must be exactly 1, got {}",
                display_rational(&mass)
            )));
        }
        Ok(ValuationMeasure {
            breakpoints,
            densities,
        })
    }

    /// Density 1 everywhere.
    pub fn uniform() -> Self {
        ValuationMeasure {
            breakpoints: vec![BigRational::zero(), BigRational::one()],
            densities: vec![BigRational::one()],
        }
    }

    /// Seed-deterministic random measure with `pieces` segments. The same
    /// seed always produces the same measure; one segment always yields the
    /// uniform measure.
    pub fn random(seed: u64, pieces: usize) -> Self {
        assert!(pieces >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let denom = 4 * pieces as u64;
        let mut cuts: Vec<u64> = Vec::with_capacity(pieces - 1);
        while cuts.len() < pieces - 1 {
            let cut = rng.next_u64() % (denom - 1) + 1;
            if !cuts.contains(&cut) {
                cuts.push(cut);
            }
        }
        cuts.sort_unstable();
        let mut breakpoints = Vec::with_capacity(pieces + 1);
        breakpoints.push(BigRational::zero());
        breakpoints.extend(cuts.iter().map(|&c| big(c) / big(denom)));
        breakpoints.push(BigRational::one());

        let weights: Vec<u64> = loop {
            let w: Vec<u64> = (0..pieces).map(|_| rng.next_u64() % 16).collect();
            if w.iter().any(|&x| x > 0) {
                break w;
            }
        };
        let total: BigRational = breakpoints
            .windows(2)
            .zip(&weights)
            .map(|(span, &w)| big(w) * (&span[1] - &span[0]))
            .sum();
        let densities = weights.iter().map(|&w| big(w) / &total).collect();
        ValuationMeasure::new(breakpoints, densities).expect("normalized by construction")
    }

    pub fn segments(&self) -> usize {
        self.densities.len()
    }

    /// Exact integral of the density over the piece.
    pub fn eval(&self, piece: &Piece) -> BigRational {
        let mut total = BigRational::zero();
        for (span, density) in self.breakpoints.windows(2).zip(&self.densities) {
            let lo = piece.lo.clone().max(span[0].clone());
            let hi = piece.hi.clone().min(span[1].clone());
            if lo < hi {
                total += density * (hi - lo);
            }
        }
        total
    }

    /// Leftmost `x` with `eval((within.lo, x)) = target`: the inverse of
    /// the piecewise-linear cumulative value function, resolved to the
    /// leftmost feasible point across zero-density spans.
    pub fn cut(&self, within: &Piece, target: &BigRational) -> Result<BigRational, SimError> {
        if target.is_negative() {
            return Err(SimError::InfeasibleCut {
                target: display_rational(target),
                available: display_rational(&self.eval(within)),
            });
        }
        let mut position = within.lo.clone();
        let mut remaining = target.clone();
        if remaining.is_zero() {
            return Ok(position);
        }
        for (span, density) in self.breakpoints.windows(2).zip(&self.densities) {
            let lo = position.clone().max(span[0].clone());
            let hi = within.hi.clone().min(span[1].clone());
            if lo >= hi {
                continue;
            }
            let mass = density * (&hi - &lo);
            if remaining > mass {
                remaining -= mass;
                position = hi;
            } else {
                // density > 0 here because remaining > 0 and mass >= remaining
                return Ok(lo + remaining / density);
            }
        }
        Err(SimError::InfeasibleCut {
            target: display_rational(target),
            available: display_rational(&self.eval(within)),
        })
    }
}

// JSON schema: {"breakpoints": ["p/q", ...], "densities": ["p/q", ...]}
#[derive(Serialize, Deserialize)]
struct MeasureJson {
    breakpoints: Vec<String>,
    densities: Vec<String>,
}

impl Serialize for ValuationMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MeasureJson {
            breakpoints: self.breakpoints.iter().map(display_rational).collect(),
            densities: self.densities.iter().map(display_rational).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ValuationMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = MeasureJson::deserialize(deserializer)?;
        let parse = |v: &[String]| -> Result<Vec<BigRational>, D::Error> {
            v.iter()
                .map(|s| parse_rational(s).map_err(D::Error::custom))
                .collect()
        };
        ValuationMeasure::new(parse(&json.breakpoints)?, parse(&json.densities)?)
            .map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Take,
    Keep,
}

/// One executed cut.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub ratio: (String, String),
    pub cutter: Player,
    /// Where the cut landed in `[0, 1]`.
    pub position: BigRational,
    /// The non-cutter's exact value of the cut piece.
    pub noncutter_value: BigRational,
    pub branch: Branch,
}

/// Full record of one protocol execution.
#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    pub steps: Vec<TraceStep>,
    pub alice_pieces: Vec<Piece>,
    pub bob_pieces: Vec<Piece>,
    pub alice_value: BigRational,
    pub bob_value: BigRational,
    pub alice_due: BigRational,
    pub bob_due: BigRational,
}

impl ExecutionTrace {
    /// The theorem under test: each player's exact value of their pieces
    /// reaches their due share.
    pub fn guarantee_holds(&self) -> bool {
        self.alice_value >= self.alice_due && self.bob_value >= self.bob_due
    }

    pub fn cuts_used(&self) -> u32 {
        self.steps.len() as u32
    }
}

fn ratio_to_rational<N: Nat>(n: &N) -> BigRational {
    let as_big: BigUint = n.clone().into();
    BigRational::from_integer(BigInt::from(as_big))
}

fn due_share<N: Nat>(ratio: &Ratio<N>) -> (BigRational, BigRational) {
    let a = ratio_to_rational(ratio.a());
    let b = ratio_to_rational(ratio.b());
    let s = &a + &b;
    (a / &s, b / s)
}

fn cutoff_fraction<N: Nat>(cutoff: &Cutoff<N>) -> BigRational {
    ratio_to_rational(cutoff.numer()) / ratio_to_rational(cutoff.denom())
}

/// Runs a protocol tree from the whole cake against the two players'
/// measures.
///
/// At each cut node the cutter cuts the leftmost piece worth the cutoff
/// fraction of their value of the current piece. The non-cutter takes that
/// piece iff they value it strictly above the same fraction of their own
/// value of the current piece (ties go to the cutter). In Case B the
/// declined piece goes to the cutter and play continues on the remainder;
/// in Case A the non-cutter takes the remainder instead and play continues
/// on the cut piece. Leaves allocate the whole remaining piece.
pub fn run_protocol<N: Nat>(
    tree: &ProtocolTree<N>,
    alice: &ValuationMeasure,
    bob: &ValuationMeasure,
) -> Result<ExecutionTrace, SimError> {
    let mut steps = Vec::new();
    let mut alice_pieces = Vec::new();
    let mut bob_pieces = Vec::new();
    let mut node = tree.root();
    let mut piece = Piece::whole();

    loop {
        match node {
            ProtocolNode::Leaf { winner, .. } => {
                match winner {
                    Player::Alice => alice_pieces.push(piece),
                    Player::Bob => bob_pieces.push(piece),
                }
                break;
            }
            ProtocolNode::Cut {
                ratio,
                cutter,
                cutoff,
                take,
                keep,
            } => {
                let cut = apply_cut(ratio, cutoff)
                    .map_err(|e| SimError::BadTree(format!("node {ratio}: {e}")))?;
                let fraction = cutoff_fraction(cutoff);
                let (cutter_measure, other_measure) = match cutter {
                    Player::Alice => (alice, bob),
                    Player::Bob => (bob, alice),
                };
                let target = &fraction * cutter_measure.eval(&piece);
                let position = cutter_measure.cut(&piece, &target)?;
                let cut_piece = Piece {
                    lo: piece.lo.clone(),
                    hi: position.clone(),
                };
                let rest = Piece {
                    lo: position.clone(),
                    hi: piece.hi.clone(),
                };
                let other_value = other_measure.eval(&cut_piece);
                let threshold = &fraction * other_measure.eval(&piece);
                let takes = other_value > threshold;

                steps.push(TraceStep {
                    ratio: (ratio.a().to_string(), ratio.b().to_string()),
                    cutter: *cutter,
                    position,
                    noncutter_value: other_value,
                    branch: if takes { Branch::Take } else { Branch::Keep },
                });

                let allocate = |player: Player, piece: Piece,
                                alice_pieces: &mut Vec<Piece>,
                                bob_pieces: &mut Vec<Piece>| {
                    match player {
                        Player::Alice => alice_pieces.push(piece),
                        Player::Bob => bob_pieces.push(piece),
                    }
                };

                if takes {
                    allocate(cutter.other(), cut_piece, &mut alice_pieces, &mut bob_pieces);
                    piece = rest;
                    node = take.as_ref();
                } else {
                    match cut.case {
                        CutCase::B => {
                            // cutter keeps the piece they cut
                            allocate(*cutter, cut_piece, &mut alice_pieces, &mut bob_pieces);
                            piece = rest;
                        }
                        CutCase::A => {
                            // non-cutter takes the remainder; play continues
                            // on the cut piece
                            allocate(cutter.other(), rest, &mut alice_pieces, &mut bob_pieces);
                            piece = cut_piece;
                        }
                    }
                    node = keep.as_ref();
                }
            }
        }
    }

    let (alice_due, bob_due) = due_share(tree.ratio());
    let alice_value = alice_pieces.iter().map(|p| alice.eval(p)).sum();
    let bob_value = bob_pieces.iter().map(|p| bob.eval(p)).sum();
    Ok(ExecutionTrace {
        steps,
        alice_pieces,
        bob_pieces,
        alice_value,
        bob_value,
        alice_due,
        bob_due,
    })
}

// Trace JSON with rationals rendered as "p/q".
#[derive(Serialize)]
struct StepJson<'a> {
    ratio: &'a (String, String),
    cutter: &'a str,
    position: String,
    noncutter_value: String,
    branch: &'a str,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    steps: Vec<StepJson<'a>>,
    alice_pieces: Vec<(String, String)>,
    bob_pieces: Vec<(String, String)>,
    alice_value: String,
    bob_value: String,
    alice_due: String,
    bob_due: String,
    guarantee_holds: bool,
}

pub fn trace_to_json(trace: &ExecutionTrace) -> String {
    let piece_pair =
        |p: &Piece| (display_rational(&p.lo), display_rational(&p.hi));
    let json = TraceJson {
        steps: trace
            .steps
            .iter()
            .map(|s| StepJson {
                ratio: &s.ratio,
                cutter: s.cutter.code(),
                position: display_rational(&s.position),
                noncutter_value: display_rational(&s.noncutter_value),
                branch: match s.branch {
                    Branch::Take => "take",
                    Branch::Keep => "keep",
                },
            })
            .collect(),
        alice_pieces: trace.alice_pieces.iter().map(piece_pair).collect(),
        bob_pieces: trace.bob_pieces.iter().map(piece_pair).collect(),
        alice_value: display_rational(&trace.alice_value),
        bob_value: display_rational(&trace.bob_value),
        alice_due: display_rational(&trace.alice_due),
        bob_due: display_rational(&trace.bob_due),
        guarantee_holds: trace.guarantee_holds(),
    };
    serde_json::to_string_pretty(&json).expect("trace serializes")
}
