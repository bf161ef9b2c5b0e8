//! `fie` command-line tool: fit anchors, export node embeddings, run the KL
//! simulation and evaluate embeddings with logistic regression.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fie_core::formats::{self, fmt_f64};
use fie_core::{
    embed_graph, evaluate, fit_model, run_simulation, train_logreg, EstepConfig, FieError, KMeansConfig, LayerConfig,
    LogRegConfig, Metrics, Nonlinearity, Result, SimConfig,
};

#[derive(Parser)]
#[command(name = "fie", version, about = "Fisher information embeddings for graph nodes")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn per-layer anchors with k-means and write a model directory.
    Fit(FitArgs),
    /// Embed every node with a fitted model and write a CSV.
    Embed(EmbedArgs),
    /// Compare embedding distances with KL divergences on synthetic mixtures.
    SimulateKl(SimulateArgs),
    /// Train logistic regression on embeddings and report accuracies as JSON.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstepArg {
    Softmax,
    Ot,
    Uot,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonlinearityArg {
    Identity,
    Relu,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Components per layer; a single value applies to every layer.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    components: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    em_iters: usize,
    #[arg(long, value_enum, default_value = "softmax")]
    estep: EstepArg,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Row-marginal penalty for `uot`; omitted means exact row marginals.
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    tau2: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    include_self: bool,
    #[arg(long, value_enum, default_value = "identity")]
    nonlinearity: NonlinearityArg,
    #[arg(long, default_value_t = 300_000)]
    sample_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    max_sinkhorn_iters: usize,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Drop the raw-feature block from the output.
    #[arg(long)]
    skip_input_block: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long)]
    out: PathBuf,
    /// Recorded in the output; training itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> FieError {
    FieError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(msg: impl Into<String>) -> FieError {
    FieError::InvalidArgument(msg.into())
}

fn layer_configs(args: &FitArgs) -> Result<Vec<LayerConfig>> {
    if args.layers == 0 {
        return Err(invalid("--layers must be at least 1"));
    }
    let components = match args.components.len() {
        1 => vec![args.components[0]; args.layers],
        n if n == args.layers => args.components.clone(),
        n => {
            return Err(invalid(format!(
                "--components lists {n} values for {} layers",
                args.layers
            )))
        }
    };
    let tau1 = args.tau1.unwrap_or(f64::INFINITY);
    let estep = EstepConfig {
        max_sinkhorn_iters: args.max_sinkhorn_iters,
        ..match args.estep {
            EstepArg::Softmax => EstepConfig::softmax(),
            EstepArg::Ot => EstepConfig::balanced_ot(args.epsilon),
            EstepArg::Uot => EstepConfig::unbalanced_ot(args.epsilon, tau1, args.tau2),
        }
    };
    estep.validate()?;
    let nonlinearity = match args.nonlinearity {
        NonlinearityArg::Identity => Nonlinearity::Identity,
        NonlinearityArg::Relu => Nonlinearity::Relu,
    };
    Ok(components
        .into_iter()
        .map(|p| LayerConfig {
            components: p,
            em_iters: args.em_iters,
            estep,
            include_self: args.include_self,
            nonlinearity,
        })
        .collect())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let cfgs = layer_configs(args)?;
    let graph = formats::load_graph(&args.edges, &args.features)?;
    let km = KMeansConfig {
        sample_cap: args.sample_cap,
        seed: args.seed,
        restarts: args.restarts,
        ..KMeansConfig::default()
    };
    let outcome = fit_model(&graph, &cfgs, &km)?;
    for (layer, warning) in &outcome.warnings {
        eprintln!("warning: layer {layer}: {warning}");
    }
    formats::save_model(&args.out, &outcome.model, Some(&km), &outcome.layer_inertia)?;
    for (t, inertia) in outcome.layer_inertia.iter().enumerate() {
        println!("layer {} inertia {}", t + 1, fmt_f64(*inertia));
    }
    Ok(())
}

fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    let model = formats::load_model(&args.model)?;
    let graph = formats::load_graph(&args.edges, &args.features)?;
    let result = embed_graph(&graph, &model)?;
    if !result.unconverged.is_empty() {
        eprintln!(
            "warning: {} node embeddings hit the Sinkhorn iteration cap",
            result.unconverged.len()
        );
    }
    let embeddings = if args.skip_input_block {
        result.embeddings.without_input_block()
    } else {
        result.embeddings
    };
    formats::write_matrix_csv(&args.out, embeddings.matrix())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let cfg: SimConfig = serde_json::from_str(&text).map_err(|e| FieError::Parse {
        path: args.config.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let records = run_simulation(&cfg)?;
    let mut buf = Vec::new();
    fie_core::sim::write_sim_csv(&records, &mut buf).map_err(|e| io_err(&args.out, e))?;
    fs::write(&args.out, buf).map_err(|e| io_err(&args.out, e))
}

#[derive(Serialize)]
struct EvalConfigRecord {
    l2: f64,
    max_iters: usize,
    tol: f64,
    seed: u64,
    num_classes: usize,
    embedding_dim: usize,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    metrics: Metrics,
    config: EvalConfigRecord,
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let x = formats::read_matrix_csv(&args.embeddings)?;
    if x.rows() == 0 {
        return Err(invalid(format!("{} has no rows", args.embeddings.display())));
    }
    let labels = formats::read_labels(&args.labels, x.rows())?;
    let split = formats::read_splits(&args.splits, labels)?;
    let cfg = LogRegConfig {
        l2: args.l2,
        max_iters: args.max_iters,
        tol: args.tol,
        ..LogRegConfig::default()
    };
    let model = train_logreg(&x, &split, &cfg)?;
    let metrics = evaluate(&x, &split, &model)?;
    let report = EvalReport {
        metrics,
        config: EvalConfigRecord {
            l2: args.l2,
            max_iters: args.max_iters,
            tol: args.tol,
            seed: args.seed,
            num_classes: model.num_classes(),
            embedding_dim: x.cols(),
        },
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    fs::write(&args.out, json).map_err(|e| io_err(&args.out, e))?;
    if let Some(acc) = report.metrics.test_acc {
        println!("test_acc {acc:.4}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Embed(a) => cmd_embed(a),
        Command::SimulateKl(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
