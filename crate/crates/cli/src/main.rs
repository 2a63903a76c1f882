//! `cakecut`: exact minimum-cut protocols for dividing a cake between two
//! players in ratio (a : b).
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 on budget
//! exhaustion, 3 when a simulation violates the due-share guarantee.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;

use cakecut_core::bounds::{construction1, lower_bound_int, upper_bound_int};
use cakecut_core::num::Nat;
use cakecut_core::protocol::{
    build_near_half, tree_from_json, validate_tree, worst_case_depth, ProtocolTree, TreeFormat,
};
use cakecut_core::ratio::Ratio;
use cakecut_core::sim::{run_protocol, trace_to_json, ValuationMeasure};
use cakecut_core::solver::{level_sets, SearchBudget, SearchMiss, Searcher, SolverError};

const EXIT_BUDGET: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cakecut",
    version,
    about = "Exact minimum-cut protocols for unequal cake cutting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the minimum worst-case cut count f(a,b) and write a witness
    /// protocol tree
    Solve {
        /// Alice's entitlement (decimal, any size)
        a: String,
        /// Bob's entitlement (decimal, any size)
        b: String,
        /// Deepest witness to search for
        #[arg(long, default_value_t = 8)]
        max_depth: u32,
        /// Cap on the proportionality factor during operator inversion
        #[arg(long, default_value_t = 64)]
        max_scale: u32,
        /// Search node budget
        #[arg(long, default_value_t = 100_000_000)]
        max_nodes: u64,
        /// Where to write the witness tree
        #[arg(long, default_value = "witness.json")]
        witness: PathBuf,
    },
    /// Print lower bound, f if already known at small depth, and upper
    /// bound for one or more ratios
    Bounds {
        /// Pairs of entitlements: A B [A B ...]
        #[arg(required = true, num_args = 2..)]
        values: Vec<String>,
    },
    /// Build a protocol tree and print it
    Tree {
        a: String,
        b: String,
        #[arg(long, value_enum, default_value_t = Method::NearHalf)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = 8)]
        max_depth: u32,
        #[arg(long, default_value_t = 64)]
        max_scale: u32,
        #[arg(long, default_value_t = 100_000_000)]
        max_nodes: u64,
    },
    /// Generate the level table of all ratios achievable in at most N cuts
    Levels {
        n: u32,
        /// Output file (JSON lines, one record per ratio)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000_000)]
        max_nodes: u64,
    },
    /// Print the doubly-exponential squaring chain and its witness tree
    Construct { n: u32 },
    /// Execute a protocol tree against valuation measures and verify the
    /// due-share guarantee
    Simulate {
        /// Protocol tree JSON file
        #[arg(long)]
        tree: PathBuf,
        /// Alice's measure (JSON); requires --vb
        #[arg(long, requires = "vb")]
        va: Option<PathBuf>,
        /// Bob's measure (JSON); requires --va
        #[arg(long, requires = "va")]
        vb: Option<PathBuf>,
        /// Number of random measure pairs to fuzz with
        #[arg(long, default_value_t = 0)]
        fuzz: u64,
        /// Seed for the fuzzed measures
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time level-set generation and witness search on a fixed suite
    Bench,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    NearHalf,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

impl From<Format> for TreeFormat {
    fn from(f: Format) -> TreeFormat {
        match f {
            Format::Json => TreeFormat::Json,
            Format::Dot => TreeFormat::Dot,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors" with success status
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            a,
            b,
            max_depth,
            max_scale,
            max_nodes,
            witness,
        } => solve_cmd(&a, &b, max_depth, max_scale, max_nodes, &witness),
        Command::Bounds { values } => bounds_cmd(&values),
        Command::Tree {
            a,
            b,
            method,
            format,
            max_depth,
            max_scale,
            max_nodes,
        } => tree_cmd(&a, &b, method, format, max_depth, max_scale, max_nodes),
        Command::Levels { n, out, max_nodes } => levels_cmd(n, &out, max_nodes),
        Command::Construct { n } => construct_cmd(n),
        Command::Simulate {
            tree,
            va,
            vb,
            fuzz,
            seed,
        } => simulate_cmd(&tree, va.as_deref(), vb.as_deref(), fuzz, seed),
        Command::Bench => bench_cmd(),
    }
}

fn parse_entitlements(a: &str, b: &str) -> Result<(BigUint, BigUint)> {
    let parse = |s: &str| {
        BigUint::from_str(s).with_context(|| format!("{s:?} is not a nonnegative integer"))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a == BigUint::ZERO && b == BigUint::ZERO {
        bail!("(0,0) is not a valid entitlement ratio");
    }
    Ok((a, b))
}

/// Parsed ratio in a width lane wide enough for the solver's intermediate
/// products (operator inversion squares nothing beyond scale*sum, but
/// cutoff recovery multiplies component-sized values).
enum LaneRatio {
    Fixed(Ratio<u128>),
    Big(Ratio<BigUint>),
}

fn pick_lane(a: &BigUint, b: &BigUint) -> Result<LaneRatio> {
    let (sa, sb) = (a.to_string(), b.to_string());
    if a.bits() <= 56 && b.bits() <= 56 {
        Ok(LaneRatio::Fixed(
            Ratio::from_decimal(&sa, &sb).expect("fits u128"),
        ))
    } else {
        Ok(LaneRatio::Big(
            Ratio::from_decimal(&sa, &sb).expect("parsed above"),
        ))
    }
}

fn reduce_notice<N: Nat>(ratio: &Ratio<N>) -> Ratio<N> {
    let reduced = ratio.reduce();
    if &reduced != ratio {
        println!("note: {ratio} is not in lowest terms; solving for {reduced}");
    }
    reduced
}

struct SolveReport<N: Nat> {
    text: String,
    witness: ProtocolTree<N>,
    budget_hit: bool,
}

fn solve_ratio<N: Nat>(
    ratio: &Ratio<N>,
    max_depth: u32,
    max_scale: u32,
    max_nodes: u64,
) -> SolveReport<N> {
    let reduced = reduce_notice(ratio);
    let pretty = reduced.to_string();
    let lower = lower_bound_int(&reduced);
    let upper = upper_bound_int(&reduced);
    let near_half = build_near_half(&reduced);

    if reduced.is_leaf() {
        return SolveReport {
            text: format!("f{pretty} = 0"),
            witness: near_half,
            budget_hit: false,
        };
    }
    if u64::from(lower) >= upper {
        return SolveReport {
            text: format!("f{pretty} = {upper} (bounds meet; witness is cut-near-halves)"),
            witness: near_half,
            budget_hit: false,
        };
    }

    // depths >= the near-half depth are already certified; search below it
    let search_ceiling = u64::from(max_depth).min(upper - 1) as u32;
    let mut searcher: Searcher<N> = Searcher::new(SearchBudget {
        max_depth: search_ceiling,
        max_nodes,
        max_scale,
    });
    match searcher.search(&reduced) {
        Ok(tree) => {
            let depth = worst_case_depth(&tree);
            // failing at depth-1 was conclusive if the closure table covered it
            let exact = depth == lower || depth <= searcher.table_complete_level() + 1;
            let text = if exact {
                format!("f{pretty} = {depth}")
            } else {
                format!(
                    "f{pretty} <= {depth} (no shallower witness up to scale cap {max_scale})"
                )
            };
            SolveReport {
                text,
                witness: tree,
                budget_hit: false,
            }
        }
        Err(SearchMiss::ExhaustedUpToScale { .. }) => {
            if search_ceiling + 1 == upper as u32 {
                SolveReport {
                    text: format!(
                        "f{pretty} = {upper} (depths {lower}..{search_ceiling} exhausted \
                         modulo scale cap {max_scale}; witness is cut-near-halves)"
                    ),
                    witness: near_half,
                    budget_hit: false,
                }
            } else {
                SolveReport {
                    text: format!(
                        "{lower} <= f{pretty} <= {upper}: no witness within depth \
                         {search_ceiling} (modulo scale cap {max_scale}); \
                         witness file holds the cut-near-halves tree"
                    ),
                    witness: near_half,
                    budget_hit: false,
                }
            }
        }
        Err(SearchMiss::NodeBudget { max_nodes }) => SolveReport {
            text: format!(
                "{lower} <= f{pretty} <= {upper}: node budget {max_nodes} exhausted before \
                 the search finished; witness file holds the cut-near-halves tree"
            ),
            witness: near_half,
            budget_hit: true,
        },
    }
}

fn solve_cmd(
    a: &str,
    b: &str,
    max_depth: u32,
    max_scale: u32,
    max_nodes: u64,
    witness_path: &std::path::Path,
) -> Result<ExitCode> {
    let (a, b) = parse_entitlements(a, b)?;
    let report = match pick_lane(&a, &b)? {
        LaneRatio::Fixed(r) => {
            let rep = solve_ratio(&r, max_depth, max_scale, max_nodes);
            write_witness(&rep.witness, witness_path)?;
            (rep.text, rep.budget_hit)
        }
        LaneRatio::Big(r) => {
            let rep = solve_ratio(&r, max_depth, max_scale, max_nodes);
            write_witness(&rep.witness, witness_path)?;
            (rep.text, rep.budget_hit)
        }
    };
    println!("{}", report.0);
    println!("witness written to {}", witness_path.display());
    Ok(if report.1 {
        ExitCode::from(EXIT_BUDGET)
    } else {
        ExitCode::SUCCESS
    })
}

fn write_witness<N: Nat>(tree: &ProtocolTree<N>, path: &std::path::Path) -> Result<()> {
    let report = validate_tree(tree);
    anyhow::ensure!(report.is_valid(), "internal error: witness failed validation");
    fs::write(path, cakecut_core::protocol::tree_to_json(tree))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn bounds_cmd(values: &[String]) -> Result<ExitCode> {
    if values.len() % 2 != 0 {
        bail!("bounds expects pairs of entitlements: A B [A B ...]");
    }
    // f is reported when the ratio already sits in the cheap level-4 table
    let quick = level_sets::<u128>(4, 1_000_000).expect("level 4 is tiny");
    for pair in values.chunks(2) {
        let (a, b) = parse_entitlements(&pair[0], &pair[1])?;
        match pick_lane(&a, &b)? {
            LaneRatio::Fixed(r) => {
                let r = r.reduce();
                let known = quick
                    .f_of(&r.canonical_key())
                    .map_or_else(|| "?".to_owned(), |f| f.to_string());
                println!(
                    "{r} lower {} f {} upper {}",
                    lower_bound_int(&r),
                    known,
                    upper_bound_int(&r)
                );
            }
            LaneRatio::Big(r) => {
                let r = r.reduce();
                println!(
                    "{r} lower {} f ? upper {}",
                    lower_bound_int(&r),
                    upper_bound_int(&r)
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn tree_cmd(
    a: &str,
    b: &str,
    method: Method,
    format: Format,
    max_depth: u32,
    max_scale: u32,
    max_nodes: u64,
) -> Result<ExitCode> {
    let (a, b) = parse_entitlements(a, b)?;
    let (rendered, budget_hit) = match pick_lane(&a, &b)? {
        LaneRatio::Fixed(r) => render_tree(&r, method, format, max_depth, max_scale, max_nodes),
        LaneRatio::Big(r) => render_tree(&r, method, format, max_depth, max_scale, max_nodes),
    };
    print!("{rendered}");
    Ok(if budget_hit {
        ExitCode::from(EXIT_BUDGET)
    } else {
        ExitCode::SUCCESS
    })
}

fn render_tree<N: Nat>(
    ratio: &Ratio<N>,
    method: Method,
    format: Format,
    max_depth: u32,
    max_scale: u32,
    max_nodes: u64,
) -> (String, bool) {
    let reduced = reduce_notice(ratio);
    let (tree, budget_hit) = match method {
        Method::NearHalf => (build_near_half(&reduced), false),
        Method::Optimal => {
            let rep = solve_ratio(&reduced, max_depth, max_scale, max_nodes);
            eprintln!("{}", rep.text);
            (rep.witness, rep.budget_hit)
        }
    };
    (
        cakecut_core::protocol::export_tree(&tree, format.into()),
        budget_hit,
    )
}

fn levels_cmd(n: u32, out: &std::path::Path, max_nodes: u64) -> Result<ExitCode> {
    // level-n sums stay under 2^(2^n - 1): pick the narrowest safe lane
    let result = if n <= 5 {
        level_sets::<u64>(n, max_nodes).map(|t| (summarize_table(&t), t.to_jsonl()))
    } else if n == 6 {
        level_sets::<u128>(n, max_nodes).map(|t| (summarize_table(&t), t.to_jsonl()))
    } else {
        level_sets::<BigUint>(n, max_nodes).map(|t| (summarize_table(&t), t.to_jsonl()))
    };
    match result {
        Ok((summary, jsonl)) => {
            fs::write(out, jsonl).with_context(|| format!("writing {}", out.display()))?;
            print!("{summary}");
            println!("table written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(SolverError::LevelBudget {
            max_nodes,
            completed,
        }) => {
            eprintln!(
                "node budget {max_nodes} exhausted; only levels 0..={completed} complete \
                 (rerun with a larger --max-nodes)"
            );
            Ok(ExitCode::from(EXIT_BUDGET))
        }
        Err(e) => bail!(e.to_string()),
    }
}

fn summarize_table<N: Nat>(table: &cakecut_core::solver::LevelTable<N>) -> String {
    let mut out = String::new();
    for level in 0..=table.levels_complete() {
        writeln!(
            out,
            "level {level}: {} new ratios, max sum {}",
            table.keys_at_level(level).len(),
            table.max_sum_through(level)
        )
        .unwrap();
    }
    writeln!(out, "total {} ratios", table.len()).unwrap();
    out
}

fn construct_cmd(n: u32) -> Result<ExitCode> {
    anyhow::ensure!(n >= 1, "construct expects n >= 1");
    anyhow::ensure!(
        n <= 16,
        "chain sums square every step; n > 16 is past any practical use"
    );
    let chain = construction1::<BigUint>(n);
    for (i, item) in chain.items.iter().enumerate() {
        println!("n={} {item} sum {}", i + 1, item.sum());
    }
    let depth = worst_case_depth(&chain.witness);
    println!(
        "witness: depth {depth}, lower bound {}, f = {depth} exactly",
        lower_bound_int(chain.items.last().unwrap())
    );
    println!("{}", cakecut_core::protocol::tree_to_json(&chain.witness));
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(
    tree_path: &std::path::Path,
    va: Option<&std::path::Path>,
    vb: Option<&std::path::Path>,
    fuzz: u64,
    seed: u64,
) -> Result<ExitCode> {
    let tree_json = fs::read_to_string(tree_path)
        .with_context(|| format!("reading {}", tree_path.display()))?;
    let tree = tree_from_json::<BigUint>(&tree_json)?;
    let report = validate_tree(&tree);
    if !report.is_valid() {
        let first = report.first().expect("invalid report has a violation");
        bail!("tree failed validation at {}: {}", first.path, first.reason);
    }
    if va.is_none() && fuzz == 0 {
        bail!("nothing to do: pass --va/--vb, --fuzz, or both");
    }

    let mut violations = 0u64;
    if let (Some(va), Some(vb)) = (va, vb) {
        let load = |p: &std::path::Path| -> Result<ValuationMeasure> {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        };
        let trace = run_protocol(&tree, &load(va)?, &load(vb)?)?;
        println!("{}", trace_to_json(&trace));
        if trace.guarantee_holds() {
            println!("guarantee: PASS");
        } else {
            println!("guarantee: FAIL");
            violations += 1;
        }
    }

    if fuzz > 0 {
        let mut failures = Vec::new();
        for i in 0..fuzz {
            let alice = ValuationMeasure::random(seed + 2 * i, (i % 6 + 1) as usize);
            let bob = ValuationMeasure::random(seed + 2 * i + 1, ((i + 3) % 6 + 1) as usize);
            let trace = run_protocol(&tree, &alice, &bob)?;
            if !trace.guarantee_holds() {
                failures.push(i);
            }
        }
        violations += failures.len() as u64;
        println!(
            "fuzz: {}/{} runs satisfied the guarantee (seed {seed})",
            fuzz - failures.len() as u64,
            fuzz
        );
        for i in failures.iter().take(5) {
            println!("  violated at fuzz index {i}");
        }
    }

    Ok(if violations > 0 {
        ExitCode::from(EXIT_VIOLATION)
    } else {
        ExitCode::SUCCESS
    })
}

fn bench_cmd() -> Result<ExitCode> {
    let timed = |label: &str, f: &mut dyn FnMut() -> String| {
        let start = Instant::now();
        let result = f();
        eprintln!("{label}: {:?}", start.elapsed());
        println!("{result}");
    };

    timed("levels 4", &mut || {
        let table = level_sets::<u64>(4, 10_000_000).unwrap();
        format!("levels 4: {} ratios, max sum {}", table.len(), table.max_sum_through(4))
    });
    timed("solve 9 8", &mut || {
        let rep = solve_ratio(&Ratio::<u128>::of(9, 8), 5, 64, 100_000_000);
        rep.text
    });
    timed("solve 8463 57073", &mut || {
        let rep = solve_ratio(&Ratio::<u128>::of(8463, 57073), 6, 64, 100_000_000);
        rep.text
    });
    timed("construct 6", &mut || {
        let chain = construction1::<BigUint>(6);
        format!(
            "construct 6: last sum {}",
            chain.items.last().unwrap().sum()
        )
    });
    timed("near-half 58470565 72019008", &mut || {
        let tree = build_near_half(&Ratio::<u128>::new(58470565, 72019008).unwrap());
        format!("near-half giant: depth {}", worst_case_depth(&tree))
    });
    Ok(ExitCode::SUCCESS)
}
