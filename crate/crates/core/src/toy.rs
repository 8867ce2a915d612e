//! Synthetic training harness.
//!
//! Utterances are sequences of tokens, each held for a few frames of a
//! token-specific mean vector plus Gaussian noise. A linear frame classifier
//! over a small window of neighbouring frames is trained with the CTC loss
//! under a chosen topology, then evaluated for blank-frame reduction ratio and
//! greedy-decoding token error rate.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_number;
use crate::fst::Fst;
use crate::grid::{DenseGrid, Matrix};
use crate::loss::{ctc_loss_with_graph, greedy_decode, log_softmax};
use crate::skip::{classify_blank_frames, gamma_max, sweep_thresholds, SweepRow, REFERENCE_BETAS};
use crate::topology::{build_training_graph, LabelSequence, TopologyVariant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub vocab_size: usize,
    pub feature_dim: usize,
    /// Mean frames per token; each token lasts `stretch - 1 ..= stretch + 1`.
    pub stretch: usize,
    pub noise: f64,
    pub utterances: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Never draw the same token twice in a row.
    pub distinct_adjacent: bool,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            vocab_size: 5,
            feature_dim: 16,
            stretch: 4,
            noise: 0.2,
            utterances: 200,
            min_tokens: 3,
            max_tokens: 8,
            distinct_adjacent: true,
            seed: 7,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.vocab_size < 2 {
            return fail("vocab_size must be at least 2");
        }
        if self.feature_dim < self.vocab_size + 1 {
            return fail("feature_dim must be at least vocab_size + 1");
        }
        if self.stretch < 2 {
            return fail("stretch must be at least 2");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return fail("noise must be finite and non-negative");
        }
        if self.utterances == 0 {
            return fail("need at least one utterance");
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return fail("token range must satisfy 1 <= min_tokens <= max_tokens");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    /// `T x D` features.
    pub features: Matrix,
    pub labels: LabelSequence,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub utterances: Vec<Utterance>,
    pub config: CorpusConfig,
}

impl SyntheticCorpus {
    pub fn total_frames(&self) -> usize {
        self.utterances.iter().map(Utterance::frames).sum()
    }

    pub fn total_tokens(&self) -> usize {
        self.utterances.iter().map(|u| u.labels.len()).sum()
    }

    /// `1 - sum U / sum T` over the corpus.
    pub fn gamma_max(&self) -> f64 {
        gamma_max(self.total_tokens(), self.total_frames()).expect("every token owns a frame")
    }

    pub fn max_frames(&self) -> usize {
        self.utterances.iter().map(Utterance::frames).max().unwrap_or(0)
    }
}

/// Mean feature vector of a token: the unit vector on axis `token`. Axis 0 is
/// left unused so the means stay orthonormal for any `D >= V + 1`.
fn token_mean(token: usize, dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    m[token] = 1.0;
    m
}

/// Draws a corpus. The same config always gives the same corpus.
pub fn generate_corpus(config: &CorpusConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise).map_err(Error::invalid)?;
    let mut utterances = Vec::with_capacity(config.utterances);
    for _ in 0..config.utterances {
        let count = rng.gen_range(config.min_tokens..=config.max_tokens);
        let mut tokens = Vec::with_capacity(count);
        while tokens.len() < count {
            let tok = rng.gen_range(1..=config.vocab_size);
            if config.distinct_adjacent && tokens.last() == Some(&tok) {
                continue;
            }
            tokens.push(tok);
        }
        let mut data = Vec::new();
        for &tok in &tokens {
            let duration = rng.gen_range(config.stretch - 1..=config.stretch + 1);
            let mean = token_mean(tok, config.feature_dim);
            for _ in 0..duration {
                data.extend(mean.iter().map(|m| m + noise.sample(&mut rng)));
            }
        }
        let frames = data.len() / config.feature_dim;
        utterances.push(Utterance {
            features: Matrix::from_vec(frames, config.feature_dim, data)?,
            labels: LabelSequence::new(tokens, config.vocab_size)?,
        });
    }
    Ok(SyntheticCorpus {
        utterances,
        config: config.clone(),
    })
}

/// Linear classifier over a window of `2 * context + 1` frames centred on
/// the current one, zero-padded at the edges. `context = 0` is a plain
/// per-frame model.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub context: usize,
    pub feature_dim: usize,
    /// `(2 * context + 1) * D` rows by `V + 1` columns.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub step_size: f64,
    pub steps_taken: usize,
}

impl ToyModel {
    pub fn zeros(feature_dim: usize, vocab_size: usize, context: usize, step_size: f64) -> Self {
        ToyModel {
            context,
            feature_dim,
            weights: Matrix::zeros((2 * context + 1) * feature_dim, vocab_size + 1),
            bias: vec![0.0; vocab_size + 1],
            step_size,
            steps_taken: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    /// Stacks each frame with its neighbours.
    pub fn window(&self, features: &Matrix) -> Matrix {
        stack_context(features, self.context)
    }

    fn logits_from_window(&self, inputs: &Matrix) -> Matrix {
        let classes = self.classes();
        let mut out = Matrix::zeros(inputs.rows(), classes);
        for t in 0..inputs.rows() {
            let row = out.row_mut(t);
            row.copy_from_slice(&self.bias);
            for (i, &x) in inputs.row(t).iter().enumerate() {
                if x != 0.0 {
                    for (o, w) in row.iter_mut().zip(self.weights.row(i)) {
                        *o += x * w;
                    }
                }
            }
        }
        out
    }

    pub fn logits(&self, features: &Matrix) -> Matrix {
        self.logits_from_window(&self.window(features))
    }

    pub fn log_probs(&self, features: &Matrix) -> Result<DenseGrid> {
        log_softmax(&self.logits(features))
    }

    pub fn blank_probs(&self, features: &Matrix) -> Result<Vec<f64>> {
        let grid = self.log_probs(features)?;
        Ok((0..grid.frames()).map(|t| grid.get(t, 0).exp()).collect())
    }

    fn is_finite(&self) -> bool {
        self.weights.data().iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Text form: the weight matrix with the bias appended as a last row.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = self.weights.data().to_vec();
        data.extend(&self.bias);
        Matrix::from_vec(self.weights.rows() + 1, self.classes(), data)
            .expect("shape follows from the weights")
    }
}

fn stack_context(features: &Matrix, context: usize) -> Matrix {
    let (frames, dim) = (features.rows(), features.cols());
    let width = 2 * context + 1;
    let mut out = Matrix::zeros(frames, width * dim);
    for t in 0..frames {
        let row = out.row_mut(t);
        for w in 0..width {
            let src = t as isize + w as isize - context as isize;
            if src >= 0 && (src as usize) < frames {
                row[w * dim..(w + 1) * dim].copy_from_slice(features.row(src as usize));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Frames the model already calls blank with probability above this are
    /// left out of the loss once warmup is over.
    pub skip_beta: Option<f64>,
    /// Fraction of `steps` trained without skipping.
    pub warmup_fraction: f64,
    /// Neighbouring frames seen on each side. With `0` every frame of a
    /// token segment looks alike and the model cannot place a single spike.
    pub context: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            step_size: 0.5,
            skip_beta: None,
            warmup_fraction: 0.1,
            context: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid("step_size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid("warmup_fraction must lie in [0, 1]"));
        }
        if let Some(beta) = self.skip_beta {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::invalid("skip_beta must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// First step at which skipping may apply.
    pub fn warmup_steps(&self) -> usize {
        (self.warmup_fraction * self.steps as f64).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub model: ToyModel,
    /// Mean utterance loss before each update.
    pub losses: Vec<f64>,
    /// Frames left out of the loss at each step.
    pub skipped_frames: Vec<usize>,
}

struct Prepared {
    inputs: Matrix,
    graph: Fst,
    labels: LabelSequence,
}

struct StepResult {
    loss: f64,
    frames: usize,
    skipped: usize,
    grad_weights: Matrix,
    grad_bias: Vec<f64>,
}

/// Plain gradient descent on the mean utterance CTC loss.
///
/// The model starts at zero. Per-utterance work runs in parallel but is summed
/// in corpus order, so a run is bit-for-bit reproducible.
pub fn train(
    corpus: &SyntheticCorpus,
    variant: TopologyVariant,
    config: &TrainConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    variant.validate()?;
    let vocab = corpus.config.vocab_size;
    let mut model = ToyModel::zeros(corpus.config.feature_dim, vocab, config.context, config.step_size);

    let prepared = corpus
        .utterances
        .iter()
        .map(|u| {
            let graph = build_training_graph(&u.labels, vocab, variant)?;
            if graph.is_empty() || u.frames() < u.labels.min_frames() {
                return Err(Error::InfeasibleAlignment {
                    frames: u.frames(),
                    labels: u.labels.len(),
                    variant,
                });
            }
            Ok(Prepared {
                inputs: model.window(&u.features),
                graph,
                labels: u.labels.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let warmup = config.warmup_steps();
    let mut losses = Vec::with_capacity(config.steps);
    let mut skipped_frames = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let skip_beta = config.skip_beta.filter(|_| step >= warmup);
        let results = prepared
            .par_iter()
            .map(|p| utterance_step(&model, p, variant, skip_beta))
            .collect::<Result<Vec<_>>>()?;

        let mut grad_weights = Matrix::zeros(model.weights.rows(), model.weights.cols());
        let mut grad_bias = vec![0.0; model.classes()];
        let (mut loss, mut frames, mut skipped) = (0.0, 0usize, 0usize);
        for r in &results {
            loss += r.loss;
            frames += r.frames;
            skipped += r.skipped;
            for (g, x) in grad_weights.data_mut().iter_mut().zip(r.grad_weights.data()) {
                *g += x;
            }
            for (g, x) in grad_bias.iter_mut().zip(&r.grad_bias) {
                *g += x;
            }
        }
        let _ = frames;
        let objective = loss / results.len() as f64;
        if !objective.is_finite() {
            return Err(Error::Diverged { step, loss: objective });
        }
        losses.push(objective);
        skipped_frames.push(skipped);

        let scale = config.step_size / results.len() as f64;
        for (w, g) in model.weights.data_mut().iter_mut().zip(grad_weights.data()) {
            *w -= scale * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad_bias) {
            *b -= scale * g;
        }
        model.steps_taken += 1;
        if !model.is_finite() {
            return Err(Error::Diverged { step, loss: objective });
        }
    }
    Ok(TrainingRun {
        model,
        losses,
        skipped_frames,
    })
}

fn utterance_step(
    model: &ToyModel,
    prepared: &Prepared,
    variant: TopologyVariant,
    skip_beta: Option<f64>,
) -> Result<StepResult> {
    let logits = model.logits_from_window(&prepared.inputs);
    let grid = log_softmax(&logits)?;
    let frames = grid.frames();

    // Indices of the frames that stay in the loss.
    let kept: Vec<usize> = match skip_beta {
        Some(beta) => {
            let blank: Vec<f64> = (0..frames).map(|t| grid.get(t, 0).exp()).collect();
            let mask = classify_blank_frames(&blank, beta)?;
            let kept: Vec<usize> = (0..frames).filter(|&t| !mask.skip[t]).collect();
            if kept.len() >= prepared.labels.min_frames() && !kept.is_empty() {
                kept
            } else {
                (0..frames).collect()
            }
        }
        None => (0..frames).collect(),
    };

    let (loss, grad_logits) = if kept.len() == frames {
        let r = ctc_loss_with_graph(&prepared.graph, &prepared.labels, &grid, variant)?;
        (r.loss, r.grad_logits)
    } else {
        let mut data = Vec::with_capacity(kept.len() * grid.columns());
        for &t in &kept {
            data.extend_from_slice(grid.row(t));
        }
        let reduced = DenseGrid::new(Matrix::from_vec(kept.len(), grid.columns(), data)?)?;
        match ctc_loss_with_graph(&prepared.graph, &prepared.labels, &reduced, variant) {
            Ok(r) => {
                let mut full = Matrix::zeros(frames, grid.columns());
                for (i, &t) in kept.iter().enumerate() {
                    full.row_mut(t).copy_from_slice(r.grad_logits.row(i));
                }
                (r.loss, full)
            }
            Err(Error::InfeasibleAlignment { .. }) => {
                let r = ctc_loss_with_graph(&prepared.graph, &prepared.labels, &grid, variant)?;
                return Ok(finish(model, prepared, r.loss, frames, 0, &r.grad_logits));
            }
            Err(e) => return Err(e),
        }
    };
    Ok(finish(model, prepared, loss, frames, frames - kept.len(), &grad_logits))
}

fn finish(
    model: &ToyModel,
    prepared: &Prepared,
    loss: f64,
    frames: usize,
    skipped: usize,
    grad_logits: &Matrix,
) -> StepResult {
    let classes = model.classes();
    let mut grad_weights = Matrix::zeros(model.weights.rows(), classes);
    let mut grad_bias = vec![0.0; classes];
    for t in 0..frames {
        let g = grad_logits.row(t);
        for (b, x) in grad_bias.iter_mut().zip(g) {
            *b += x;
        }
        for (i, &x) in prepared.inputs.row(t).iter().enumerate() {
            if x != 0.0 {
                for (w, gk) in grad_weights.row_mut(i).iter_mut().zip(g) {
                    *w += x * gk;
                }
            }
        }
    }
    StepResult {
        loss,
        frames,
        skipped,
        grad_weights,
        grad_bias,
    }
}

/// Levenshtein distance between token sequences.
pub fn edit_distance(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub variant: TopologyVariant,
    pub skip_beta: Option<f64>,
    pub final_loss: f64,
    /// Corpus reduction ratio at each decoding threshold.
    pub sweep: Vec<SweepRow>,
    /// Decoding threshold of the headline ratio.
    pub beta: f64,
    pub reduction_ratio: f64,
    /// Frames left for the joiner at the headline threshold.
    pub retained_frames: usize,
    pub token_error_rate: f64,
    pub gamma_max: f64,
}

/// Measures a model on a corpus: reduction ratio at every threshold in
/// `betas` (the headline ratio is at `beta`), and greedy token error rate.
pub fn evaluate(
    model: &ToyModel,
    corpus: &SyntheticCorpus,
    betas: &[f64],
    beta: f64,
) -> Result<(Vec<SweepRow>, f64, usize, f64)> {
    let mut blank_sets = Vec::with_capacity(corpus.utterances.len());
    let mut errors = 0usize;
    for u in &corpus.utterances {
        let grid = model.log_probs(&u.features)?;
        blank_sets.push((0..grid.frames()).map(|t| grid.get(t, 0).exp()).collect::<Vec<f64>>());
        errors += edit_distance(greedy_decode(&grid).tokens(), u.labels.tokens());
    }
    let counts: Vec<usize> = corpus.utterances.iter().map(|u| u.labels.len()).collect();
    let sweep = sweep_thresholds(&blank_sets, &counts, betas)?;
    let headline = sweep_thresholds(&blank_sets, &counts, &[beta])?[0];
    let retained = corpus.total_frames() - (headline.ratio * corpus.total_frames() as f64).round() as usize;
    let ter = errors as f64 / corpus.total_tokens() as f64;
    Ok((sweep, headline.ratio, retained, ter))
}

/// One row of a comparison: a topology plus optional training-time skipping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    pub variant: TopologyVariant,
    #[serde(default)]
    pub skip_beta: Option<f64>,
}

impl VariantSpec {
    pub fn new(name: &str, variant: TopologyVariant, skip_beta: Option<f64>) -> Self {
        VariantSpec {
            name: name.to_string(),
            variant,
            skip_beta,
        }
    }
}

/// Configuration of a full experiment: data, training, and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusConfig,
    pub eval_utterances: usize,
    pub train: TrainConfig,
    pub betas: Vec<f64>,
    pub beta: f64,
    pub variants: Vec<VariantSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusConfig::default(),
            eval_utterances: 50,
            train: TrainConfig::default(),
            betas: REFERENCE_BETAS.to_vec(),
            beta: 0.9,
            variants: reference_variants(),
        }
    }
}

/// The five rows compared by default: thresholded standard CTC, two soft
/// penalties, and two hard bounds.
pub fn reference_variants() -> Vec<VariantSpec> {
    vec![
        VariantSpec::new("standard+skip", TopologyVariant::Standard, Some(0.85)),
        VariantSpec::new("soft-0.04", TopologyVariant::Soft { lambda: 0.04 }, None),
        VariantSpec::new("soft-5", TopologyVariant::Soft { lambda: 5.0 }, None),
        VariantSpec::new("hard-2", TopologyVariant::Hard { k: 2 }, None),
        VariantSpec::new("hard-1", TopologyVariant::Hard { k: 1 }, None),
    ]
}

impl ExperimentConfig {
    /// The held-out corpus: same generator settings, different seed.
    pub fn eval_corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            utterances: self.eval_utterances,
            seed: self.corpus.seed.wrapping_add(0x5eed),
            ..self.corpus.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.train.validate()?;
        if self.eval_utterances == 0 {
            return Err(Error::invalid("eval_utterances must be positive"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) || self.betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::invalid("thresholds must lie in (0, 1)"));
        }
        for v in &self.variants {
            v.variant.validate()?;
        }
        Ok(())
    }
}

/// Output of [`compare_variants`]: one report and one training run per
/// variant, in input order.
pub struct Comparison {
    pub reports: Vec<ExperimentReport>,
    pub runs: Vec<TrainingRun>,
}

/// Trains every variant on the same data from the same initialization and
/// evaluates each on the held-out corpus.
pub fn compare_variants(
    train_corpus: &SyntheticCorpus,
    eval_corpus: &SyntheticCorpus,
    variants: &[VariantSpec],
    config: &ExperimentConfig,
) -> Result<Comparison> {
    if variants.len() < 2 {
        return Err(Error::invalid("comparison needs at least two variants"));
    }
    let mut reports = Vec::with_capacity(variants.len());
    let mut runs = Vec::with_capacity(variants.len());
    for spec in variants {
        let train_config = TrainConfig {
            skip_beta: spec.skip_beta,
            ..config.train.clone()
        };
        let run = train(train_corpus, spec.variant, &train_config)?;
        reports.push(report_for(spec, &run, eval_corpus, config)?);
        runs.push(run);
    }
    Ok(Comparison { reports, runs })
}

pub fn report_for(
    spec: &VariantSpec,
    run: &TrainingRun,
    eval_corpus: &SyntheticCorpus,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let (sweep, ratio, retained, ter) = evaluate(&run.model, eval_corpus, &config.betas, config.beta)?;
    Ok(ExperimentReport {
        name: spec.name.clone(),
        variant: spec.variant,
        skip_beta: spec.skip_beta,
        final_loss: run.losses.last().copied().unwrap_or(f64::NAN),
        sweep,
        beta: config.beta,
        reduction_ratio: ratio,
        retained_frames: retained,
        token_error_rate: ter,
        gamma_max: eval_corpus.gamma_max(),
    })
}

fn variant_fields(v: &TopologyVariant) -> [String; 3] {
    match *v {
        TopologyVariant::Standard => ["standard".into(), String::new(), String::new()],
        TopologyVariant::Soft { lambda } => ["soft".into(), format_number(lambda), String::new()],
        TopologyVariant::Hard { k } => ["hard".into(), String::new(), k.to_string()],
    }
}

/// Table-style CSV, one row per variant.
pub fn write_report_csv<W: Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "variant",
        "lambda",
        "k",
        "skip_beta",
        "final_loss",
        "token_error_rate",
        "beta",
        "reduction_ratio",
        "gamma_max",
        "retained_frames",
    ])?;
    for r in reports {
        let [kind, lambda, k] = variant_fields(&r.variant);
        w.write_record([
            r.name.clone(),
            kind,
            lambda,
            k,
            r.skip_beta.map(format_number).unwrap_or_default(),
            format_number(r.final_loss),
            format_number(r.token_error_rate),
            format_number(r.beta),
            format_number(r.reduction_ratio),
            format_number(r.gamma_max),
            r.retained_frames.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Threshold sweep curves: `method,beta,ratio,gamma_max`.
pub fn write_curves_csv<W: Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "beta", "ratio", "gamma_max"])?;
    for r in reports {
        for row in &r.sweep {
            w.write_record([
                r.name.clone(),
                format_number(row.beta),
                format_number(row.ratio),
                format_number(row.gamma_max),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loss curves: `method,step,loss,skipped_frames`.
pub fn write_loss_csv<W: Write>(names: &[&str], runs: &[TrainingRun], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "step", "loss", "skipped_frames"])?;
    for (name, run) in names.iter().zip(runs) {
        for (step, (loss, skipped)) in run.losses.iter().zip(&run.skipped_frames).enumerate() {
            w.write_record([
                name.to_string(),
                step.to_string(),
                format_number(*loss),
                skipped.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
