use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relu_regions::attacks::{AttackConfig, Targets};
use relu_regions::Network;
use relu_regions_cli::commands::{self, Method, Options, WarmMode};
use relu_regions_cli::dataset::{load_dataset, Dataset};
use relu_regions_cli::report::Report;
use relu_regions_cli::{CliError, CliResult};

/// Minimum-norm adversarial perturbations for ReLU classifiers.
#[derive(Parser)]
#[command(name = "relu-regions-attack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DeepFool warm start, boundary refinement and rLR-QP on every point.
    Attack(Common),
    /// Compare attacks against the exact pattern-enumeration oracle.
    CompareOracle {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of oracle,rlrqp,deepfool.
        #[arg(long, default_value = "oracle,rlrqp,deepfool")]
        methods: String,
        /// Maximum number of activation patterns the oracle may enumerate.
        #[arg(long, default_value_t = 1 << 20)]
        oracle_budget: u64,
    },
    /// Re-apply rLR-QP, each round starting from the previous result.
    Iterate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
    },
    /// Print the shape of a network.
    InspectNet {
        /// Network JSON document.
        #[arg(long)]
        net: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Network JSON document.
    #[arg(long)]
    net: PathBuf,
    /// Dataset: CSV rows `label,x1,...,xd`, or IDX images with --labels.
    #[arg(long)]
    data: PathBuf,
    /// IDX label file paired with an IDX image file in --data.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n1: usize,
    #[arg(long, default_value_t = 10)]
    n2: usize,
    #[arg(long, default_value_t = 5)]
    n3: usize,
    #[arg(long, default_value_t = 3)]
    n4: usize,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Base seed; point i is attacked with seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// all, warm (class of the warm start), auto (all for one hidden layer,
    /// warm otherwise) or a comma-separated class list.
    #[arg(long, default_value = "all")]
    targets: String,
    /// Input box `lo,hi` applied to every coordinate, or `none`.
    #[arg(long = "box", default_value = "0,1")]
    bounds: String,
    /// deepfool, none or file.
    #[arg(long, default_value = "deepfool")]
    warm_start: String,
    /// CSV of perturbations, one row per point, for --warm-start file.
    #[arg(long)]
    warm_file: Option<PathBuf>,
    /// Bisection steps when moving the DeepFool point onto the boundary.
    #[arg(long, default_value_t = 40)]
    refine_iters: usize,
    /// Worker threads for processing points.
    #[arg(long, env = "RELU_REGIONS_WORKERS")]
    workers: Option<usize>,
}

fn parse_box(text: &str) -> CliResult<Option<(f64, f64)>> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts[..] {
        [lo, hi] => match (lo.parse::<f64>(), hi.parse::<f64>()) {
            (Ok(lo), Ok(hi)) if lo < hi && lo.is_finite() && hi.is_finite() => Ok(Some((lo, hi))),
            _ => Err(CliError::Usage(format!("bad --box {text:?}"))),
        },
        _ => Err(CliError::Usage(format!(
            "--box expects lo,hi or none, got {text:?}"
        ))),
    }
}

fn parse_targets(text: &str, net: &Network) -> CliResult<Targets> {
    Ok(match text {
        "all" => Targets::All,
        "warm" => Targets::WarmStartClass,
        "auto" => Targets::for_depth(net.depth()),
        list => Targets::Explicit(
            list.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("bad --targets {text:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?,
        ),
    })
}

fn load_network(path: &Path) -> CliResult<Network> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Network::from_json(&text).map_err(|e| CliError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn prepare(common: &Common) -> CliResult<(Network, Dataset, Options)> {
    let net = load_network(&common.net)?;
    let range = parse_box(&common.bounds)?;
    let data = load_dataset(&common.data, common.labels.as_deref(), range)?;
    let attack = AttackConfig {
        n1: common.n1,
        n2: common.n2,
        n3: common.n3,
        n4: common.n4,
        alpha: common.alpha,
        targets: parse_targets(&common.targets, &net)?,
        bounds: range
            .map(|(lo, hi)| relu_regions::BoxConstraint::uniform(net.input_dim(), lo, hi))
            .transpose()?,
        seed: common.seed,
        ..AttackConfig::default()
    };
    attack.validate()?;
    let mut opts = Options::new(attack);
    opts.refine_iters = common.refine_iters;
    opts.workers = common.workers;
    opts.warm = match (common.warm_start.as_str(), &common.warm_file) {
        ("deepfool", None) => WarmMode::DeepFool,
        ("none", None) => WarmMode::None,
        ("file", Some(path)) => WarmMode::Given(commands::load_warm_file(path)?),
        ("file", None) => {
            return Err(CliError::Usage(
                "--warm-start file needs --warm-file".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(CliError::Usage(
                "--warm-file needs --warm-start file".into(),
            ))
        }
        (other, None) => return Err(CliError::Usage(format!("unknown --warm-start {other:?}"))),
    };
    Ok((net, data, opts))
}

fn emit(report: &Report, out: Option<&Path>) -> CliResult<()> {
    let text = report.to_csv()?;
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    let (report, out) = match cli.command {
        Command::InspectNet { net } => {
            print!("{}", commands::inspect_net(&load_network(&net)?));
            return Ok(true);
        }
        Command::Attack(common) => {
            let (net, data, opts) = prepare(&common)?;
            (
                commands::attack(&net, &data, &common.data, &opts)?,
                common.out,
            )
        }
        Command::CompareOracle {
            common,
            methods,
            oracle_budget,
        } => {
            let methods = Method::parse_list(&methods)?;
            let (net, data, opts) = prepare(&common)?;
            let report = commands::compare_oracle(
                &net,
                &data,
                &common.data,
                &opts,
                &methods,
                oracle_budget,
            )?;
            (report, common.out)
        }
        Command::Iterate { common, rounds } => {
            let (net, data, opts) = prepare(&common)?;
            (
                commands::iterate(&net, &data, &common.data, &opts, rounds)?,
                common.out,
            )
        }
    };
    emit(&report, out.as_deref())?;
    let errors = report
        .values("error")
        .map_or(0, |v| v.iter().filter(|e| !e.is_empty()).count());
    if errors > 0 {
        log::error!("{errors} point(s) could not be processed; see the error column");
    }
    Ok(errors == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
