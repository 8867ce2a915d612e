//! `blankreg` command-line tool.
//!
//! Exit status: 0 on success, 1 on a domain error (infeasible alignment,
//! malformed input file, failed gradient check), 2 on a usage error.

mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use blankreg::format::format_number;
use blankreg::loss::ctc_loss_with_graph;
use blankreg::skip::{write_sweep_csv, REFERENCE_BETAS};
use blankreg::topology::format_symbols;
use blankreg::toy::{
    compare_variants, generate_corpus, report_for, train, write_curves_csv, write_loss_csv,
    write_report_csv, ExperimentConfig, TrainConfig, VariantSpec,
};
use blankreg::{
    build_topology, build_training_graph, collapse_ctc, ctc_loss, enumerate_alignments,
    grad_check, log_softmax, sweep_thresholds, DenseGrid, Fst, LabelSequence, Matrix,
    TopologyVariant,
};

use output::{emit, Staged};

#[derive(Parser)]
#[command(name = "blankreg", version, about = "CTC topologies with blank regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topology graphs.
    #[command(subcommand)]
    Topo(TopoCommand),
    /// CTC loss of a transcript against a log-probability grid.
    Loss(LossArgs),
    /// Lists every alignment of a transcript over a number of frames.
    Align(AlignArgs),
    /// Compares analytic logit gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Blank-frame skipping metrics.
    #[command(subcommand)]
    Skip(SkipCommand),
    /// Trains one variant on the synthetic corpus.
    TrainToy(TrainToyArgs),
    /// Trains and evaluates every variant listed in the config.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum TopoCommand {
    /// Writes the topology, or the training graph when labels are given.
    Build(TopoBuildArgs),
}

#[derive(Subcommand)]
enum SkipCommand {
    /// Reduction ratio of a probability matrix whose column 0 is blank.
    Analyze(SkipAnalyzeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Standard,
    Soft,
    Hard,
}

#[derive(Args)]
struct VariantArgs {
    #[arg(long, value_enum, default_value_t = Kind::Standard)]
    variant: Kind,
    /// Self-loop penalty of the soft variant.
    #[arg(long)]
    lambda: Option<f64>,
    /// Repeat bound of the hard variant.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct TopoBuildArgs {
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long)]
    vocab: usize,
    /// Comma-separated transcript, ids or letters (`A` = 1).
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LossArgs {
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long, required_unless_present = "graph")]
    labels: Option<String>,
    /// Log-probability matrix, `T C` header then `T` rows.
    #[arg(long)]
    grid: PathBuf,
    /// Training graph in text form, used instead of building one.
    #[arg(long, conflicts_with_all = ["labels", "variant", "lambda", "k"])]
    graph: Option<PathBuf>,
    /// Also print the gradient with respect to the logits.
    #[arg(long)]
    grad: bool,
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long)]
    labels: String,
    #[arg(long)]
    frames: usize,
    /// Defaults to the largest token in the transcript.
    #[arg(long)]
    vocab: Option<usize>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long)]
    labels: String,
    /// Logit matrix, `T C` header then `T` rows.
    #[arg(long)]
    logits: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct SkipAnalyzeArgs {
    #[arg(long)]
    probs: PathBuf,
    #[arg(long, conflicts_with = "sweep")]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    /// Transcript length; defaults to the greedy decode of the matrix.
    #[arg(long)]
    tokens: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainToyArgs {
    #[command(flatten)]
    variant: VariantArgs,
    /// Skip frames above this blank probability once warmup is over.
    #[arg(long)]
    skip_beta: Option<f64>,
    /// Experiment config in JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<blankreg::Error> for Failure {
    fn from(e: blankreg::Error) -> Self {
        Failure::Domain(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::ValueValidation, msg).exit(),
        Err(Failure::Domain(e)) => {
            let line = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Topo(TopoCommand::Build(a)) => topo_build(a),
        Command::Loss(a) => loss(a),
        Command::Align(a) => align(a),
        Command::GradCheck(a) => grad_check_cmd(a),
        Command::Skip(SkipCommand::Analyze(a)) => skip_analyze(a),
        Command::TrainToy(a) => train_toy(a),
        Command::Compare(a) => compare(a),
    }
}

impl VariantArgs {
    fn resolve(&self) -> CliResult<TopologyVariant> {
        let variant = match (self.variant, self.lambda, self.k) {
            (Kind::Standard, None, None) => TopologyVariant::Standard,
            (Kind::Soft, Some(lambda), None) => TopologyVariant::Soft { lambda },
            (Kind::Hard, None, Some(k)) => TopologyVariant::Hard { k },
            (Kind::Soft, None, _) => return usage("--variant soft requires --lambda"),
            (Kind::Hard, _, None) => return usage("--variant hard requires --k"),
            (_, Some(_), _) => return usage("--lambda only applies to --variant soft"),
            (_, _, Some(_)) => return usage("--k only applies to --variant hard"),
        };
        if let Err(e) = variant.validate() {
            return usage(e.to_string());
        }
        Ok(variant)
    }
}

fn parse_labels(csv: &str, vocab: usize) -> CliResult<LabelSequence> {
    LabelSequence::parse(csv, vocab).or_else(|e| usage(format!("--labels: {e}")))
}

fn read_matrix(path: &Path) -> anyhow::Result<Matrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Matrix::from_text(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn read_grid(path: &Path) -> anyhow::Result<DenseGrid> {
    DenseGrid::new(read_matrix(path)?).with_context(|| format!("reading {}", path.display()))
}

fn topo_build(a: TopoBuildArgs) -> CliResult<()> {
    let variant = a.variant.resolve()?;
    if a.vocab == 0 {
        return usage("--vocab must be positive");
    }
    let fst = match &a.labels {
        Some(csv) => build_training_graph(&parse_labels(csv, a.vocab)?, a.vocab, variant)?,
        None => build_topology(a.vocab, variant)?,
    };
    emit(a.out.as_deref(), &fst.to_text())?;
    Ok(())
}

fn loss(a: LossArgs) -> CliResult<()> {
    let grid = read_grid(&a.grid)?;
    let result = match &a.graph {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let graph = Fst::from_text(BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()))?;
            let labels = LabelSequence::new(Vec::new(), grid.vocab_size())?;
            ctc_loss_with_graph(&graph, &labels, &grid, TopologyVariant::Standard)?
        }
        None => {
            let variant = a.variant.resolve()?;
            let labels = parse_labels(a.labels.as_deref().unwrap_or_default(), grid.vocab_size())?;
            ctc_loss(&labels, &grid, variant)?
        }
    };
    let mut text = format!("{}\n", format_number(result.loss));
    if a.grad {
        text.push_str(&result.grad_logits.to_text());
    }
    emit(None, &text)?;
    Ok(())
}

fn align(a: AlignArgs) -> CliResult<()> {
    let variant = a.variant.resolve()?;
    let probe = parse_labels(&a.labels, usize::MAX)?;
    let vocab = a
        .vocab
        .unwrap_or_else(|| probe.tokens().iter().copied().max().unwrap_or(1));
    let labels = parse_labels(&a.labels, vocab)?;
    let alignments = enumerate_alignments(&labels, a.frames, variant)?;
    if alignments.is_empty() {
        return Err(blankreg::Error::InfeasibleAlignment {
            frames: a.frames,
            labels: labels.len(),
            variant,
        }
        .into());
    }
    let mut text = String::new();
    for path in alignments {
        text.push_str(&format_symbols(&path));
        text.push('\n');
    }
    emit(None, &text)?;
    Ok(())
}

fn grad_check_cmd(a: GradCheckArgs) -> CliResult<()> {
    let variant = a.variant.resolve()?;
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return usage("--epsilon must be positive");
    }
    let logits = read_matrix(&a.logits)?;
    if logits.cols() < 2 {
        return Err(anyhow::anyhow!("logit matrix needs at least two columns").into());
    }
    let labels = parse_labels(&a.labels, logits.cols() - 1)?;
    // Validates finiteness before the probes run.
    log_softmax(&logits)?;
    let worst = grad_check(&labels, &logits, variant, a.epsilon)?;
    emit(None, &format!("{}\n", format_number(worst)))?;
    if worst.is_nan() || worst >= a.tolerance {
        return Err(anyhow::anyhow!(
            "gradient check failed: relative error {} exceeds {}",
            format_number(worst),
            format_number(a.tolerance)
        )
        .into());
    }
    Ok(())
}

fn skip_analyze(a: SkipAnalyzeArgs) -> CliResult<()> {
    let betas = match (a.beta, &a.sweep) {
        (Some(b), _) => vec![b],
        (None, Some(list)) if !list.is_empty() => list.clone(),
        _ => REFERENCE_BETAS.to_vec(),
    };
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return usage(format!("threshold {b} outside (0, 1)"));
    }
    let probs = read_matrix(&a.probs)?;
    let blank: Vec<f64> = (0..probs.rows()).map(|t| probs.get(t, 0)).collect();
    let tokens = match a.tokens {
        Some(n) => n,
        None => {
            if probs.cols() < 2 {
                bail_domain("probability matrix needs a token column to infer --tokens")?;
            }
            let path: Vec<usize> = (0..probs.rows())
                .map(|t| {
                    let row = probs.row(t);
                    (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
                })
                .collect();
            collapse_ctc(&path).len()
        }
    };
    let rows = sweep_thresholds(&[blank], &[tokens], &betas)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("csv output is utf-8"))?;
    Ok(())
}

fn bail_domain(msg: &str) -> CliResult<()> {
    Err(Failure::Domain(anyhow::anyhow!(msg.to_string())))
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    let config = match path {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("reading {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Err(e) = config.validate() {
        return usage(format!("config: {e}"));
    }
    Ok(config)
}

fn config_json(config: &ExperimentConfig) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(config)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> blankreg::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn train_toy(a: TrainToyArgs) -> CliResult<()> {
    let variant = a.variant.resolve()?;
    if let Some(b) = a.skip_beta {
        if !(b > 0.0 && b < 1.0) {
            return usage("--skip-beta must lie in (0, 1)");
        }
    }
    let mut config = load_config(a.config.as_deref())?;
    let spec = VariantSpec::new(&variant.to_string(), variant, a.skip_beta);
    config.variants = vec![spec.clone()];

    let train_corpus = generate_corpus(&config.corpus)?;
    let eval_corpus = generate_corpus(&config.eval_corpus_config())?;
    let train_config = TrainConfig {
        skip_beta: a.skip_beta,
        ..config.train.clone()
    };
    let run = train(&train_corpus, variant, &train_config)?;
    let report = report_for(&spec, &run, &eval_corpus, &config)?;
    let reports = [report];

    let mut staged = Staged::default();
    let dir = &a.out;
    staged.add(dir.join("report.csv"), csv_bytes(|b| write_report_csv(&reports, b))?);
    staged.add(dir.join("curves.csv"), csv_bytes(|b| write_curves_csv(&reports, b))?);
    staged.add(
        dir.join("losses.csv"),
        csv_bytes(|b| write_loss_csv(&[spec.name.as_str()], std::slice::from_ref(&run), b))?,
    );
    staged.add(dir.join("model.txt"), run.model.to_matrix().to_text().into_bytes());
    staged.add(dir.join("config.json"), config_json(&config)?);
    staged.commit()?;
    print_summary(&reports);
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult<()> {
    let config = load_config(a.config.as_deref())?;
    if config.variants.len() < 2 {
        return usage("config must list at least two variants");
    }
    let mut names: Vec<&str> = config.variants.iter().map(|v| v.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return usage("variant names must be unique");
    }

    let train_corpus = generate_corpus(&config.corpus)?;
    let eval_corpus = generate_corpus(&config.eval_corpus_config())?;
    let cmp = compare_variants(&train_corpus, &eval_corpus, &config.variants, &config)?;
    let names: Vec<&str> = config.variants.iter().map(|v| v.name.as_str()).collect();

    let mut staged = Staged::default();
    let dir = &a.out;
    staged.add(dir.join("report.csv"), csv_bytes(|b| write_report_csv(&cmp.reports, b))?);
    staged.add(dir.join("curves.csv"), csv_bytes(|b| write_curves_csv(&cmp.reports, b))?);
    staged.add(dir.join("losses.csv"), csv_bytes(|b| write_loss_csv(&names, &cmp.runs, b))?);
    for (name, run) in names.iter().zip(&cmp.runs) {
        staged.add(
            dir.join(format!("model-{name}.txt")),
            run.model.to_matrix().to_text().into_bytes(),
        );
    }
    staged.add(dir.join("config.json"), config_json(&config)?);
    staged.commit()?;
    print_summary(&cmp.reports);
    Ok(())
}

fn print_summary(reports: &[blankreg::toy::ExperimentReport]) {
    for r in reports {
        println!(
            "{} ratio {} gamma_max {} ter {} loss {}",
            r.name,
            format_number(r.reduction_ratio),
            format_number(r.gamma_max),
            format_number(r.token_error_rate),
            format_number(r.final_loss)
        );
    }
}
