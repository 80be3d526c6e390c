//! ncsec: analyze the intrinsic secrecy of random linear network coding.
//!
//! Subcommands:
//! - `gen-graph`: write a network topology (complete DAG or the butterfly)
//! - `analyze`: sample one code and report every relay's security level;
//!   the exit code is the verdict (0 secure, 2 some relay decodes fully)
//! - `experiment`: run a seeded claim suite and emit JSON + CSV
//! - `version`: print the tool version

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ncsec::experiments::{
    run_experiment, run_experiment_with_jobs, ClaimId, ExperimentConfig, SamplingMode,
};
use ncsec::galois::FieldContext;
use ncsec::netgraph::GraphFile;
use ncsec::rlnc::CodeInstance;
use ncsec::seclin::network_report;
use ncsec::{fixtures, Network};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "ncsec",
    version,
    about = "Security analysis of random linear network coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network topology file
    GenGraph(GenGraphArgs),
    /// Sample a code on a network and write its security report
    Analyze(AnalyzeArgs),
    /// Run one claim suite and write results as JSON and CSV
    Experiment(Box<ExperimentArgs>),
    /// Print the tool version
    Version,
}

#[derive(Args)]
struct GenGraphArgs {
    /// Complete acyclic directed graph on N nodes
    #[arg(long, value_name = "N", conflicts_with = "butterfly")]
    complete_dag: Option<usize>,
    /// The 7-node butterfly multicast network
    #[arg(long)]
    butterfly: bool,
    /// Seed for the random node labels
    #[arg(long, env = "NCSEC_SEED", default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Network topology file (mutually exclusive with --fixture)
    #[arg(long, value_name = "FILE", conflicts_with = "fixture")]
    graph: Option<PathBuf>,
    /// Pinned example code; `fig1` is the classic butterfly code
    #[arg(long, value_name = "NAME")]
    fixture: Option<String>,
    /// Number of source processes
    #[arg(short = 'k', long, default_value_t = 2)]
    k: usize,
    /// Field degree m (the field is GF(2^m))
    #[arg(short, long, default_value_t = 8)]
    m: u32,
    /// Reduction polynomial as a hex bitmask (default: documented table)
    #[arg(long)]
    poly: Option<String>,
    #[arg(long, env = "NCSEC_SEED", default_value_t = 0)]
    seed: u64,
    /// Report path (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "csv"], default_value = "json")]
    format: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file mirroring the experiment JSON schema; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Claim id: L2, L3, T1, L4, L5 or T2
    #[arg(long)]
    claim: Option<String>,
    /// Comma-separated field degrees, e.g. 1,2,4,8
    #[arg(long, value_name = "LIST")]
    m: Option<String>,
    /// Comma-separated rates K
    #[arg(long, value_name = "LIST")]
    k: Option<String>,
    /// Comma-separated complete-DAG sizes
    #[arg(long, value_name = "LIST")]
    n: Option<String>,
    /// Network topology file (L3)
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
    /// Product terms in the linear combination (L2)
    #[arg(long)]
    terms: Option<usize>,
    /// Observation count delta_in (T1)
    #[arg(long)]
    delta_in: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, env = "NCSEC_SEED")]
    seed: Option<u64>,
    /// Verdict threshold for high-probability checks
    #[arg(long)]
    threshold: Option<f64>,
    /// Force exact enumeration (errors when the state space is too large)
    #[arg(long, conflicts_with = "sampled")]
    exhaustive: bool,
    /// Force Monte Carlo sampling even when enumeration would be exact
    #[arg(long)]
    sampled: bool,
    /// Worker threads (default: one per CPU)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output stem; writes <out>.json and <out>.csv
    #[arg(short, long, default_value = "ncsec_experiment")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenGraph(args) => cmd_gen_graph(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Version => {
            println!("ncsec {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_gen_graph(args: &GenGraphArgs) -> Result<ExitCode> {
    let net = match (args.complete_dag, args.butterfly) {
        (Some(n), false) => Network::complete_dag(n, args.seed)?,
        (None, true) => fixtures::butterfly_network(),
        (None, false) => bail!("choose a generator: --complete-dag N or --butterfly"),
        (Some(_), true) => unreachable!("clap enforces exclusivity"),
    };
    let mut json = serde_json::to_string_pretty(&net.to_graph_file())?;
    json.push('\n');
    write_or_print(args.out.as_deref(), &json)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_field(m: u32, poly: Option<&str>) -> Result<FieldContext> {
    match poly {
        None => Ok(FieldContext::new(m)?),
        Some(s) => {
            let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"));
            let value = digits
                .and_then(|d| u32::from_str_radix(d, 16).ok())
                .or_else(|| s.parse().ok())
                .ok_or_else(|| anyhow!("cannot parse polynomial {s:?}"))?;
            Ok(FieldContext::with_poly(m, value)?)
        }
    }
}

fn load_network(path: &Path) -> Result<Network> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GraphFile = serde_json::from_str(&text).context("parsing graph file")?;
    Ok(Network::from_graph_file(file)?)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let ctx = parse_field(args.m, args.poly.as_deref())?;
    let code = match (args.fixture.as_deref(), args.graph.as_deref()) {
        (Some("fig1"), None) => fixtures::fig1_code(ctx),
        (Some(other), None) => bail!("unknown fixture {other:?} (available: fig1)"),
        (None, Some(path)) => {
            let net = load_network(path)?;
            let min_cut = net.feasible_rate();
            if args.k > min_cut {
                eprintln!(
                    "error: K={} is infeasible: the network min-cut is {min_cut}",
                    args.k
                );
                return Ok(ExitCode::from(1));
            }
            CodeInstance::sample(&net, args.k, ctx, args.seed)?
        }
        (None, None) => bail!("provide a network with --graph FILE or pick --fixture fig1"),
        (Some(_), Some(_)) => unreachable!("clap enforces exclusivity"),
    };
    let report = network_report(&code);
    let rendered = match args.format.as_str() {
        "csv" => {
            let mut s = format!(
                "# ncsec {}\n# field m={} poly {:#x}\n# k {}\n# seed {}\n",
                env!("CARGO_PKG_VERSION"),
                ctx.m(),
                ctx.reduction_poly(),
                report.k,
                report.seed
            );
            s.push_str(&report.to_csv());
            s
        }
        _ => report.to_json(),
    };
    write_or_print(args.out.as_deref(), &rendered)?;
    match report.is_secure() {
        Some(true) => Ok(ExitCode::SUCCESS),
        Some(false) => Ok(ExitCode::from(2)),
        None => {
            eprintln!("note: network has no intermediate nodes; nothing to eavesdrop");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| anyhow!("cannot parse {what} entry {p:?}"))
        })
        .collect()
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    let mut config = match (&args.config, &args.claim) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text).context("parsing config file")?
        }
        (None, Some(claim)) => {
            let claim = ClaimId::from_str(claim).map_err(|e| anyhow!(e))?;
            ExperimentConfig::new(claim)
        }
        (None, None) => bail!("provide --config FILE or --claim ID"),
    };
    if let Some(ref claim) = args.claim {
        config.claim = ClaimId::from_str(claim).map_err(|e| anyhow!(e))?;
    }
    if let Some(ref m) = args.m {
        config.m = parse_list(m, "m")?;
    }
    if let Some(ref k) = args.k {
        config.k = parse_list(k, "k")?;
    }
    if let Some(ref n) = args.n {
        config.n = parse_list(n, "n")?;
    }
    if let Some(ref path) = args.graph {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.graph = Some(serde_json::from_str(&text).context("parsing graph file")?);
    }
    if let Some(terms) = args.terms {
        config.terms = terms;
    }
    if let Some(delta_in) = args.delta_in {
        config.delta_in = Some(delta_in);
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threshold) = args.threshold {
        config.threshold = threshold;
    }
    if args.exhaustive {
        config.mode = SamplingMode::Exhaustive;
    } else if args.sampled {
        config.mode = SamplingMode::Sampled;
    }

    let result = match args.jobs {
        Some(jobs) => run_experiment_with_jobs(&config, jobs)?,
        None => run_experiment(&config)?,
    };

    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&json_path, result.to_json())
        .with_context(|| format!("writing {}", json_path.display()))?;
    std::fs::write(&csv_path, result.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;

    for check in &result.checks {
        println!(
            "{} {}: {}",
            result.claim,
            check.name,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    println!(
        "{} overall: {} ({} cells, seed {}, {} ms) -> {}, {}",
        result.claim,
        if result.pass { "pass" } else { "FAIL" },
        result.cells.len(),
        result.seed,
        result.wall_clock_ms,
        json_path.display(),
        csv_path.display()
    );
    Ok(if result.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
