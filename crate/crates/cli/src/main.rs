//! Command-line front end: validate and compile network files, run posterior
//! queries against the propagation engine or the enumeration reference,
//! generate random networks and drive benchmark sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate
//! inference.

use clg_lazy_cli::format;
use clg_lazy_cli::output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clg_lazy::algebra::AlgebraError;
use clg_lazy::bench::{self, BenchConfig};
use clg_lazy::engine::{self, EngineError};
use clg_lazy::jtree;
use clg_lazy::model::{validate_network, Evidence, VarId};
use clg_lazy::oracle;

use format::ParsedNetwork;
use output::TargetResult;

#[derive(Parser)]
#[command(
    name = "clg-lazy",
    version,
    about = "Exact belief update in conditional linear Gaussian networks",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the model constraints.
    Validate { file: PathBuf },
    /// Compile the strong junction tree; print it, or its statistics as CSV.
    Compile {
        file: PathBuf,
        /// Emit one CSV row: network,|X|,|C|,max_sC,total_sC
        #[arg(long)]
        stats: bool,
    },
    /// Posterior marginals via lazy propagation.
    Query(QueryArgs),
    /// Posterior marginals via exhaustive enumeration (same output schema).
    Oracle(QueryArgs),
    /// Generate a random network file.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        frac: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_parents: usize,
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep from a JSON configuration file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct QueryArgs {
    file: PathBuf,
    /// Comma-separated observations, for example: X=s1,Y2=1.5
    #[arg(long)]
    evidence: Vec<String>,
    /// Variables to report; all non-evidence variables when omitted.
    #[arg(long)]
    target: Vec<String>,
}

enum CliError {
    Usage(String),
    Data(String),
    Degenerate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Degenerate(m) => m,
        }
    }
}

fn engine_error(e: EngineError) -> CliError {
    match &e {
        EngineError::Algebra(AlgebraError::DegenerateEvidence { .. })
        | EngineError::Algebra(AlgebraError::DegenerateExchange { .. })
        | EngineError::ImpossibleEvidence => CliError::Degenerate(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn oracle_error(e: oracle::OracleError) -> CliError {
    match &e {
        oracle::OracleError::ImpossibleEvidence
        | oracle::OracleError::DegenerateObservation { .. } => CliError::Degenerate(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn main() -> ExitCode {
    // Behave like a well-mannered pipeline stage: die quietly on a closed
    // pipe instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load(path: &PathBuf) -> Result<ParsedNetwork, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    format::parse_network(&text).map_err(|e| CliError::Data(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { file } => {
            let parsed = load(&file)?;
            let report = validate_network(&parsed.network);
            if report.is_empty() {
                println!("ok");
                Ok(())
            } else {
                for v in &report {
                    match v.var() {
                        Some(id) => println!("{}: {}", v.code(), parsed.name_of(id)),
                        None => println!("{}", v.code()),
                    }
                }
                Err(CliError::Data(format!("{} violation(s)", report.len())))
            }
        }
        Command::Compile { file, stats } => {
            let parsed = load(&file)?;
            require_valid(&parsed)?;
            let tree = jtree::compile(&parsed.network);
            if stats {
                let s = jtree::tree_stats(&tree, &parsed.network);
                println!("network,|X|,|C|,max_sC,total_sC");
                println!(
                    "{},{},{},{},{}",
                    parsed.name,
                    parsed.network.var_count(),
                    s.clique_count,
                    s.max_clique_size,
                    s.total_size
                );
            } else {
                for c in &tree.cliques {
                    let members: Vec<&str> = c.members.iter().map(|&v| parsed.name_of(v)).collect();
                    let role = if c.id == tree.root { " (root)" } else { "" };
                    println!("clique {}{role}: {{{}}}", c.id, members.join(", "));
                }
                for s in &tree.separators {
                    let members: Vec<&str> = s.members.iter().map(|&v| parsed.name_of(v)).collect();
                    println!(
                        "separator {}: {{{}}} between {} and {}",
                        s.id,
                        members.join(", "),
                        s.child,
                        s.parent
                    );
                }
            }
            Ok(())
        }
        Command::Query(args) => {
            let parsed = load(&args.file)?;
            require_valid(&parsed)?;
            let evidence = parse_evidence(&parsed, &args.evidence)?;
            let targets = resolve_targets(&parsed, &args.target, &evidence)?;
            let tree = jtree::compile(&parsed.network);
            let mut state =
                engine::propagate(&tree, &parsed.network, &evidence).map_err(engine_error)?;
            let mut results = Vec::new();
            for &v in &targets {
                let r = if parsed.network.is_discrete(v) {
                    let probabilities = state.query_discrete(v).map_err(engine_error)?;
                    TargetResult::Discrete {
                        states: parsed.network.state_labels(v).to_vec(),
                        probabilities,
                    }
                } else {
                    let mix = state.query_continuous(v).map_err(engine_error)?;
                    output::from_mixture(&mix)
                };
                results.push((v, r));
            }
            print!("{}", output::render(&parsed, &evidence, &results));
            Ok(())
        }
        Command::Oracle(args) => {
            let parsed = load(&args.file)?;
            require_valid(&parsed)?;
            let evidence = parse_evidence(&parsed, &args.evidence)?;
            let targets = resolve_targets(&parsed, &args.target, &evidence)?;
            let joint = oracle::enumerate_joint(&parsed.network).map_err(oracle_error)?;
            let cond = oracle::condition(&joint, &evidence).map_err(oracle_error)?;
            let mut results = Vec::new();
            for &v in &targets {
                let r = match oracle::oracle_marginals(&cond, &parsed.network, v)
                    .map_err(oracle_error)?
                {
                    oracle::Marginal::Discrete(probabilities) => TargetResult::Discrete {
                        states: parsed.network.state_labels(v).to_vec(),
                        probabilities,
                    },
                    oracle::Marginal::Continuous(m) => output::from_marginal(&m),
                };
                results.push((v, r));
            }
            print!("{}", output::render(&parsed, &evidence, &results));
            Ok(())
        }
        Command::Gen {
            n,
            frac,
            seed,
            max_parents,
            out,
        } => {
            if !(0.0..=1.0).contains(&frac) {
                return Err(CliError::Usage(format!(
                    "--frac must lie in [0, 1], got {frac}"
                )));
            }
            let net = bench::generate_network(n, frac, seed, max_parents);
            let var_names: Vec<String> = net
                .all_vars()
                .map(|v| {
                    if net.is_discrete(v) {
                        format!("X{}", v.0)
                    } else {
                        format!("Y{}", v.0)
                    }
                })
                .collect();
            let index = var_names
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), VarId(i)))
                .collect();
            let parsed = ParsedNetwork {
                name: format!("net{n}-{frac}-{seed}"),
                network: net,
                var_names,
                index,
            };
            let text = format::serialize(&parsed);
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Bench { config, out_dir } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Data(format!("{}: {e}", config.display())))?;
            let mut cfg: BenchConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Data(e.to_string()))?;
            if let Ok(budget) = std::env::var("CLG_LAZY_MEM_BUDGET") {
                let bytes: u64 = budget
                    .parse()
                    .map_err(|_| CliError::Usage("CLG_LAZY_MEM_BUDGET must be bytes".into()))?;
                cfg.mem_budget = Some(bytes);
            }
            let records = bench::run_benchmark(&cfg);
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
            let runs_path = out_dir.join("runs.csv");
            let agg_path = out_dir.join("agg.csv");
            std::fs::write(&runs_path, bench::runs_csv(&records))
                .map_err(|e| CliError::Data(e.to_string()))?;
            std::fs::write(&agg_path, bench::agg_csv(&records))
                .map_err(|e| CliError::Data(e.to_string()))?;
            println!("{}", runs_path.display());
            println!("{}", agg_path.display());
            Ok(())
        }
    }
}

fn require_valid(parsed: &ParsedNetwork) -> Result<(), CliError> {
    let report = validate_network(&parsed.network);
    if report.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = report
        .iter()
        .map(|v| match v.var() {
            Some(id) => format!("{}: {}", v.code(), parsed.name_of(id)),
            None => v.code().to_string(),
        })
        .collect();
    Err(CliError::Data(format!(
        "invalid network: {}",
        lines.join("; ")
    )))
}

/// Observations are written NAME=state-label for discrete variables and
/// NAME=value for continuous ones; the kind comes from the file.
fn parse_evidence(parsed: &ParsedNetwork, specs: &[String]) -> Result<Evidence, CliError> {
    let mut ev = Evidence::empty();
    let mut seen = BTreeMap::new();
    for spec in specs.iter().flat_map(|s| s.split(',')) {
        let spec = spec.trim();
        if spec.is_empty() {
            continue;
        }
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("evidence `{spec}` is not NAME=VALUE")))?;
        let v = parsed
            .lookup(name)
            .ok_or_else(|| CliError::Data(format!("unknown variable {name}")))?;
        if seen.insert(v, ()).is_some() {
            return Err(CliError::Data(format!("{name} observed twice")));
        }
        if parsed.network.is_discrete(v) {
            let state = parsed
                .network
                .state_labels(v)
                .iter()
                .position(|l| l == value)
                .ok_or_else(|| {
                    CliError::Data(format!("unknown state `{value}` for variable {name}"))
                })?;
            ev.discrete.insert(v, state);
        } else {
            let y: f64 = value
                .parse()
                .map_err(|_| CliError::Data(format!("bad value `{value}` for variable {name}")))?;
            ev.continuous.insert(v, y);
        }
    }
    Ok(ev)
}

fn resolve_targets(
    parsed: &ParsedNetwork,
    names: &[String],
    evidence: &Evidence,
) -> Result<Vec<VarId>, CliError> {
    if names.is_empty() {
        return Ok(parsed
            .network
            .all_vars()
            .filter(|&v| !evidence.contains(v))
            .collect());
    }
    names
        .iter()
        .map(|n| {
            parsed
                .lookup(n)
                .ok_or_else(|| CliError::Data(format!("unknown variable {n}")))
        })
        .collect()
}
