//! Command-line front end: inspect channels, validate protocol trees, prune
//! measurement outcomes, generate seeded instances, and compare implemented
//! channels.
//!
//! Exit codes: 0 success, 1 validation or post-condition failure, 2 input
//! parse error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use locc_core::analysis::bounds;
use locc_core::channels::{channel_distance, Channel};
use locc_core::compress::{prune_tree, prune_tree_deterministic, PruneReport};
use locc_core::error::Error;
use locc_core::harness::{generate_tree_with, GenSpec, PartySchedule};
use locc_core::io;
use locc_core::trees::{implemented_kraus, validate, ItemReport, LoccTree};
use locc_core::Tolerances;

#[derive(Parser)]
#[command(
    name = "locc",
    version,
    about = "Model LOCC protocol trees over quantum channels, validate them, \
             and compress local measurements to their outcome bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Relative singular-value cutoff for rank decisions
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Eigenvalue floor for PSD checks
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    /// Frobenius/entrywise equality tolerance
    #[arg(long, global = true)]
    tol_eq: Option<f64>,
    /// Weight floor below which a rescaled subtree is dropped
    #[arg(long, global = true)]
    tol_zero: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print a channel's invariants (kappa, chi) and outcome bounds
    Info {
        /// Channel document (locc-channel/1)
        channel: PathBuf,
        /// Size of the smallest product Kraus representation, if known;
        /// adds the round lower bound
        #[arg(long)]
        np: Option<usize>,
        /// Also write the report as JSON (locc-bounds/1)
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a protocol tree against the structural conditions
    Validate {
        /// Tree document (locc-tree/1)
        tree: PathBuf,
        /// Also write the report as JSON (locc-validation/1)
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Remove linearly dependent measurement outcomes
    Prune {
        /// Tree document (locc-tree/1)
        tree: PathBuf,
        /// What the pruned tree must preserve
        #[arg(long, value_enum, default_value = "channel")]
        mode: ModeArg,
        /// Where to write the pruned tree
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the audit report as JSON (locc-prune-report/1)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a seeded random protocol tree
    Gen {
        /// Generation recipe (locc-gen/1) instead of the flags below
        #[arg(long, conflicts_with_all = ["dims", "rounds", "outcomes", "seed"])]
        config: Option<PathBuf>,
        /// Per-party dimensions, e.g. 2,2
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Tree depth in measurements
        #[arg(long)]
        rounds: Option<usize>,
        /// Outcomes per measurement: one value, or one per round
        #[arg(long, value_delimiter = ',')]
        outcomes: Option<Vec<usize>>,
        /// Acting-party schedule
        #[arg(long, value_enum, default_value = "round-robin")]
        schedule: ScheduleArg,
        /// Seed for the generation stream (mandatory without --config)
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the tree
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare the channels two documents implement (trees or channels)
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Preserve the implemented channel; at most kappa^2 outcomes
    Channel,
    /// Preserve a deterministic task; at most d_alpha^2 outcomes
    Deterministic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    RoundRobin,
    SeededRandom,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut tol = Tolerances::default();
    if let Some(v) = cli.tol_rank {
        tol.tol_rank = v;
    }
    if let Some(v) = cli.tol_psd {
        tol.tol_psd = v;
    }
    if let Some(v) = cli.tol_eq {
        tol.tol_eq = v;
    }
    if let Some(v) = cli.tol_zero {
        tol.tol_zero = v;
    }
    match run(cli.command, &tol) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 = validation/assertion failure, 2 = parse, 3 = numerics.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Json(_)
        | Error::Parse(_)
        | Error::UnsupportedVersion { .. }
        | Error::Io(_)
        | Error::MalformedTree(_)
        | Error::NotSquare { .. }
        | Error::NotHermitian { .. }
        | Error::CompletenessViolation { .. }
        | Error::DimensionMismatch(_)
        | Error::KappaMismatch { .. } => 2,
        Error::InvalidTree(_) | Error::BoundViolation(_) => 1,
        Error::SpanResidual { .. }
        | Error::FactorizationFailed { .. }
        | Error::DegenerateInstrument { .. }
        | Error::NumericalFailure(_) => 3,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    Ok(std::fs::read_to_string(path)?)
}

fn load_channel(path: &Path, tol: &Tolerances) -> Result<Channel, Error> {
    io::channel_from_json(&read(path)?, tol)
}

fn load_tree(path: &Path, tol: &Tolerances) -> Result<LoccTree, Error> {
    io::tree_from_json(&read(path)?, tol)
}

fn run(command: Command, tol: &Tolerances) -> Result<ExitCode, Error> {
    match command {
        Command::Info { channel, np, json } => cmd_info(&channel, np, json.as_deref(), tol),
        Command::Validate { tree, json } => cmd_validate(&tree, json.as_deref(), tol),
        Command::Prune {
            tree,
            mode,
            output,
            report,
        } => cmd_prune(&tree, mode, &output, report.as_deref(), tol),
        Command::Gen {
            config,
            dims,
            rounds,
            outcomes,
            schedule,
            seed,
            output,
        } => {
            let spec = match config {
                Some(path) => io::gen_spec_from_json(&read(&path)?)?,
                None => GenSpec {
                    dims: dims.ok_or_else(|| Error::Parse("--dims is required".into()))?,
                    rounds: rounds.ok_or_else(|| Error::Parse("--rounds is required".into()))?,
                    outcomes: outcomes
                        .ok_or_else(|| Error::Parse("--outcomes is required".into()))?,
                    party_schedule: match schedule {
                        ScheduleArg::RoundRobin => PartySchedule::RoundRobin,
                        ScheduleArg::SeededRandom => PartySchedule::SeededRandom,
                    },
                    seed: seed.ok_or_else(|| Error::Parse("--seed is required".into()))?,
                },
            };
            cmd_gen(&spec, &output, tol)
        }
        Command::Compare { a, b } => cmd_compare(&a, &b, tol),
    }
}

fn cmd_info(
    path: &Path,
    np: Option<usize>,
    json: Option<&Path>,
    tol: &Tolerances,
) -> Result<ExitCode, Error> {
    let channel = load_channel(path, tol)?;
    let rep = locc_core::channels::MinimalRep::from_channel(&channel, tol)?;
    let report = bounds(&rep, np, tol)?;
    println!("channel: {}", path.display());
    println!(
        "  dims            : {:?}  (D = {})",
        report.dims, report.total_dim
    );
    println!("  kraus rank kappa: {}", report.kappa);
    println!("  chi             : {}", report.chi);
    println!(
        "  extreme point   : {}",
        if report.is_extreme { "yes" } else { "no" }
    );
    println!(
        "  outcome bound   : {} (kappa^2, any measurement)",
        report.global_outcome_bound
    );
    for (party, (per, eff)) in report
        .per_party_outcome_bounds
        .iter()
        .zip(&report.effective_outcome_bounds)
        .enumerate()
    {
        println!(
            "  party {party} (d = {}) : per-party bound {per}, effective {eff}",
            report.dims[party]
        );
    }
    if let Some(rlb) = &report.round_lower_bound {
        println!(
            "  rounds >= {} (log {} / log {} = {:.4})",
            rlb.rounds,
            rlb.product_kraus_count,
            report.kappa * report.kappa,
            rlb.raw
        );
    }
    if let Some(json_path) = json {
        std::fs::write(json_path, io::bounds_to_json(&report))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn print_item(name: &str, item: &ItemReport) {
    let status = if item.passed { "pass" } else { "FAIL" };
    print!(
        "  {name:<26} {status}   max residual {:.3e}",
        item.max_residual
    );
    if !item.failures.is_empty() {
        let ids: Vec<String> = item
            .failures
            .iter()
            .take(6)
            .map(|f| f.node.to_string())
            .collect();
        print!("   offending nodes: {}", ids.join(", "));
        if item.failures.len() > 6 {
            print!(", ...");
        }
    }
    println!();
}

fn cmd_validate(path: &Path, json: Option<&Path>, tol: &Tolerances) -> Result<ExitCode, Error> {
    let tree = load_tree(path, tol)?;
    let report = validate(&tree, tol);
    println!(
        "tree: {} (kappa = {}, rounds = {}, leaves = {})",
        path.display(),
        tree.rep().kappa(),
        tree.round_count(),
        tree.leaves().len()
    );
    print_item("1  psd product labels", &report.item1_psd_product);
    print_item("2  root is identity", &report.item2_root_identity);
    print_item("3  children sum to parent", &report.item3_child_sums);
    print_item("4  shared rest factor", &report.item4_shared_factor);
    print_item("5a leaf labels rank one", &report.item5a_leaf_rank_one);
    print_item("6  leaves sum to root", &report.item6_leaf_sum);
    print_item("operator completeness", &report.operator_sums);
    println!("overall: {}", report.summary());
    if let Some(json_path) = json {
        std::fs::write(json_path, io::validation_to_json(&report))?;
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_prune_summary(report: &PruneReport) {
    println!("  removals          : {}", report.iterations);
    println!(
        "  dropped zero trees: {}",
        report.dropped_zero_subtrees.len()
    );
    println!("  max outcomes after: {}", report.max_outcomes_after);
    if let Some(r) = report.channel_residual {
        println!("  channel residual  : {r:.3e}");
    }
    if let Some(r) = report.isometry_residual {
        println!("  isometry residual : {r:.3e}");
    }
    let shrunk: Vec<String> = report
        .outcome_histogram
        .iter()
        .filter(|h| h.before != h.after)
        .map(|h| format!("{}: {} -> {}", h.node, h.before, h.after))
        .collect();
    if !shrunk.is_empty() {
        println!("  shrunk nodes      : {}", shrunk.join(", "));
    }
}

fn cmd_prune(
    path: &Path,
    mode: ModeArg,
    output: &Path,
    report_path: Option<&Path>,
    tol: &Tolerances,
) -> Result<ExitCode, Error> {
    let tree = load_tree(path, tol)?;
    let result = match mode {
        ModeArg::Channel => prune_tree(&tree, tol),
        ModeArg::Deterministic => prune_tree_deterministic(&tree, tol),
    };
    match result {
        Ok((pruned, report)) => {
            std::fs::write(output, io::tree_to_json(&pruned))?;
            println!("pruned tree written to {}", output.display());
            print_prune_summary(&report);
            if let Some(rp) = report_path {
                std::fs::write(rp, io::prune_report_to_json(&report))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        // pre- and post-condition failures carry their residuals in the message
        Err(
            e @ (Error::InvalidTree(_) | Error::BoundViolation(_) | Error::NumericalFailure(_)),
        ) => {
            eprintln!("prune failed: {e}");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e),
    }
}

fn cmd_gen(spec: &GenSpec, output: &Path, tol: &Tolerances) -> Result<ExitCode, Error> {
    let tree = generate_tree_with(spec, tol)?;
    std::fs::write(output, io::tree_to_json(&tree))?;
    println!(
        "generated tree written to {} (kappa = {}, rounds = {}, leaves = {})",
        output.display(),
        tree.rep().kappa(),
        tree.round_count(),
        tree.leaves().len()
    );
    Ok(ExitCode::SUCCESS)
}

fn channel_of(path: &Path, tol: &Tolerances) -> Result<Channel, Error> {
    match io::document_from_json(&read(path)?, tol)? {
        io::Document::Channel(c) => Ok(c),
        io::Document::Tree(t) => implemented_kraus(&t, tol),
    }
}

fn cmd_compare(a: &Path, b: &Path, tol: &Tolerances) -> Result<ExitCode, Error> {
    let ca = channel_of(a, tol)?;
    let cb = channel_of(b, tol)?;
    let distance = channel_distance(&ca, &cb)?;
    let same = distance <= tol.tol_eq;
    println!(
        "Choi distance: {distance:.6e}  ({})",
        if same { "same channel" } else { "different channels" }
    );
    Ok(if same {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
