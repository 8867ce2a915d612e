//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use blankreg::skip::{LIBRISPEECH_GAMMA_MAX, REFERENCE_BETAS};
use blankreg::toy::{
    compare_variants, generate_corpus, reference_variants, train, Comparison, CorpusConfig,
    ExperimentConfig, ExperimentReport, TrainConfig, VariantSpec,
};
use blankreg::{
    brute_force_loss, build_training_graph, ctc_loss, ctc_loss_alpha, enumerate_alignments,
    gamma_max, grad_check, intersect_dense, log_softmax, DenseGrid, Error, LabelSequence, Matrix,
    TopologyVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_VARIANTS: [TopologyVariant; 5] = [
    TopologyVariant::Standard,
    TopologyVariant::Soft { lambda: 0.05 },
    TopologyVariant::Soft { lambda: 5.0 },
    TopologyVariant::Hard { k: 1 },
    TopologyVariant::Hard { k: 2 },
];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_logits(rng: &mut ChaCha8Rng, frames: usize, cols: usize) -> Matrix {
    let data = (0..frames * cols).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Matrix::from_vec(frames, cols, data).unwrap()
}

fn random_labels(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> LabelSequence {
    let tokens = (0..len).map(|_| rng.gen_range(1..=vocab)).collect();
    LabelSequence::new(tokens, vocab).unwrap()
}

fn all_label_sequences(max_len: usize, vocab: usize) -> Vec<LabelSequence> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| {
                (1..=vocab).map(move |t| {
                    let mut n = s.clone();
                    n.push(t);
                    n
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out.into_iter().map(|t| LabelSequence::new(t, vocab).unwrap()).collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut compared, mut infeasible) = (0usize, 0usize);
    for vocab in 1..=3 {
        for labels in all_label_sequences(3, vocab) {
            for variant in ORACLE_VARIANTS {
                let graph = build_training_graph(&labels, vocab, variant).map_err(|e| e.to_string())?;
                for frames in 1..=6 {
                    let grid = log_softmax(&random_logits(&mut rng, frames, vocab + 1)).unwrap();
                    let lattice = intersect_dense(&graph, &grid).map_err(|e| e.to_string())?;
                    let got: BTreeSet<Vec<usize>> =
                        lattice.enumerate_paths().into_iter().map(|(p, _)| p).collect();
                    let want: BTreeSet<Vec<usize>> = enumerate_alignments(&labels, frames, variant)
                        .map_err(|e| e.to_string())?
                        .into_iter()
                        .collect();
                    check(got == want, || {
                        format!("path sets differ for {:?} T={frames} {variant}", labels.tokens())
                    })?;
                    let fast = ctc_loss(&labels, &grid, variant);
                    let slow = brute_force_loss(&labels, &grid, variant);
                    match (fast, slow) {
                        (Ok(f), Ok(s)) => {
                            check((f.loss - s).abs() < 1e-9, || {
                                format!(
                                    "{:?} T={frames} {variant}: lattice {} vs brute force {s}",
                                    labels.tokens(),
                                    f.loss
                                )
                            })?;
                            compared += 1;
                        }
                        (Err(Error::InfeasibleAlignment { .. }), Err(Error::InfeasibleAlignment { .. })) => {
                            infeasible += 1;
                        }
                        (f, s) => {
                            return Err(format!(
                                "{:?} T={frames} {variant}: disagreement on feasibility ({:?} vs {:?})",
                                labels.tokens(),
                                f.map(|r| r.loss),
                                s
                            ))
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{compared} losses within 1e-9, {infeasible} infeasible cases agree"))
}

fn alpha_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let vocab = rng.gen_range(1..=10);
        let len = rng.gen_range(0..=8);
        let labels = random_labels(&mut rng, len, vocab);
        let frames = rng.gen_range(labels.min_frames().max(1)..=20);
        let grid = log_softmax(&random_logits(&mut rng, frames, vocab + 1)).unwrap();
        let lattice = ctc_loss(&labels, &grid, TopologyVariant::Standard).map_err(|e| format!("instance {i}: {e}"))?;
        let alpha = ctc_loss_alpha(&labels, &grid).map_err(|e| format!("instance {i}: {e}"))?;
        let diff = (lattice.loss - alpha).abs();
        worst = worst.max(diff);
        check(diff < 1e-9, || format!("instance {i}: lattice {} vs alpha {alpha}", lattice.loss))?;
    }
    Ok(format!("200 instances, max |diff| = {worst:.3e}"))
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for variant in ORACLE_VARIANTS {
        let mut done = 0;
        while done < 50 {
            let vocab = rng.gen_range(1..=4);
            let len = rng.gen_range(1..=3);
            let labels = random_labels(&mut rng, len, vocab);
            let frames = rng.gen_range(labels.min_frames()..=labels.min_frames() + 5);
            let logits = random_logits(&mut rng, frames, vocab + 1);
            match grad_check(&labels, &logits, variant, 1e-5) {
                Ok(err) => {
                    worst = worst.max(err);
                    check(err < 1e-4, || format!("{variant}: relative error {err:.3e}"))?;
                    done += 1;
                }
                // Hard bounds can rule out short grids; draw again.
                Err(Error::InfeasibleAlignment { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    Ok(format!("50 instances x 5 variants, max relative error {worst:.3e}"))
}

fn closed_forms() -> Outcome {
    let labels = LabelSequence::parse("A,B", 2).unwrap();
    let grid = DenseGrid::uniform(3, 2).unwrap();
    let cases = [
        (TopologyVariant::Standard, -(5.0f64 / 27.0).ln()),
        (TopologyVariant::Soft { lambda: 0.05 }, -((3.0 + 2.0 * (-0.05f64).exp()) / 27.0).ln()),
        (TopologyVariant::Hard { k: 1 }, 9f64.ln()),
    ];
    let mut parts = Vec::new();
    for (variant, want) in cases {
        let got = ctc_loss(&labels, &grid, variant).map_err(|e| e.to_string())?.loss;
        check((got - want).abs() < 1e-9, || format!("{variant}: {got} vs {want}"))?;
        parts.push(format!("{variant} {got:.9}"));
    }
    Ok(parts.join(", "))
}

fn gamma_max_formula() -> Outcome {
    let g = gamma_max(5, 20).map_err(|e| e.to_string())?;
    check(g == 0.75, || format!("gamma_max(5, 20) = {g}"))?;
    Ok(format!(
        "gamma_max(5, 20) = {g}; reference corpus constant {LIBRISPEECH_GAMMA_MAX} kept for documentation only"
    ))
}

fn ratio_of<'a>(reports: &'a [ExperimentReport], name: &str) -> &'a ExperimentReport {
    reports.iter().find(|r| r.name == name).expect("variant present")
}

fn table_ordering(cmp: &Comparison) -> Outcome {
    let r = |n| ratio_of(&cmp.reports, n).reduction_ratio;
    let gmax = cmp.reports[0].gamma_max;
    let (std_skip, soft_small, soft_big, hard2, hard1) =
        (r("standard+skip"), r("soft-0.04"), r("soft-5"), r("hard-2"), r("hard-1"));
    let summary = format!(
        "standard+skip {std_skip:.4}, soft-0.04 {soft_small:.4}, soft-5 {soft_big:.4}, hard-2 {hard2:.4}, \
         hard-1 {hard1:.4}, gamma_max {gmax:.4}"
    );
    check(std_skip < hard2 && hard2 < hard1, || format!("hard ordering fails: {summary}"))?;
    check(soft_small < soft_big, || format!("soft ordering fails: {summary}"))?;
    check((hard1 - gmax).abs() <= 0.05, || format!("hard-1 not within 0.05 of gamma_max: {summary}"))?;
    check((soft_big - gmax).abs() <= 0.05, || format!("soft-5 not within 0.05 of gamma_max: {summary}"))?;
    Ok(summary)
}

fn curves_monotone(reports: &[&ExperimentReport]) -> Outcome {
    for r in reports {
        let betas: Vec<f64> = r.sweep.iter().map(|s| s.beta).collect();
        check(betas == REFERENCE_BETAS, || format!("{}: unexpected sweep grid {betas:?}", r.name))?;
        for w in r.sweep.windows(2) {
            check(w[1].ratio <= w[0].ratio, || {
                format!("{}: ratio rises from {} to {} at beta {}", r.name, w[0].ratio, w[1].ratio, w[1].beta)
            })?;
        }
    }
    Ok(format!("{} curves non-increasing over {:?}", reports.len(), REFERENCE_BETAS))
}

fn quality_preserved(cmp: &Comparison) -> Outcome {
    let ter = |n| ratio_of(&cmp.reports, n).token_error_rate;
    let (standard, soft, hard) = (ter("standard"), ter("soft-0.04"), ter("hard-2"));
    let summary = format!("noiseless TER: standard {standard}, soft-0.04 {soft}, hard-2 {hard}");
    check(standard == 0.0 && soft == 0.0 && hard == 0.0, || summary.clone())?;
    Ok(summary)
}

fn identity_degeneracies() -> Outcome {
    let corpus = generate_corpus(&CorpusConfig::default()).map_err(|e| e.to_string())?;
    let config = TrainConfig { steps: 100, ..TrainConfig::default() };
    let run = |v| train(&corpus, v, &config).map_err(|e| e.to_string());
    let standard = run(TopologyVariant::Standard)?;
    let soft = run(TopologyVariant::Soft { lambda: 0.0 })?;
    let k = corpus.max_frames();
    let hard = run(TopologyVariant::Hard { k })?;
    let mut worst: f64 = 0.0;
    for (name, other) in [("soft(0)", &soft), ("hard(T_max)", &hard)] {
        check(other.losses.len() == standard.losses.len(), || format!("{name}: curve length differs"))?;
        for (step, (a, b)) in standard.losses.iter().zip(&other.losses).enumerate() {
            let d = (a - b).abs();
            worst = worst.max(d);
            check(d <= 1e-9, || format!("{name} step {step}: {a} vs {b}"))?;
        }
    }
    Ok(format!("100-step curves, K = T_max = {k}, max |diff| = {worst:.3e}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_blankreg"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = ExperimentConfig {
        corpus: CorpusConfig { utterances: 30, seed: 99, ..CorpusConfig::default() },
        eval_utterances: 15,
        train: TrainConfig { steps: 60, ..TrainConfig::default() },
        ..ExperimentConfig::default()
    };
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, serde_json::to_vec_pretty(&config).unwrap()).map_err(|e| e.to_string())?;
    let cfg = config_path.to_str().unwrap();

    let mut compared = 0;
    for (sub, extra) in [
        ("compare", vec![]),
        ("train-toy", vec!["--variant", "soft", "--lambda", "5", "--skip-beta", "0.9"]),
    ] {
        let mut outputs = Vec::new();
        for attempt in ["a", "b"] {
            let out = dir.path().join(format!("{sub}-{attempt}"));
            let mut args = vec![sub, "--config", cfg, "--out", out.to_str().unwrap()];
            args.extend(&extra);
            run_cli(&args)?;
            outputs.push(csv_files(&out));
        }
        check(outputs[0].len() >= 3, || format!("{sub}: expected three CSV files"))?;
        for (a, b) in outputs[0].iter().zip(&outputs[1]) {
            check(a == b, || format!("{sub}: {} differs between runs", a.0))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files byte-identical across reruns"))
}

/// Trains the variants on the reference config; also returns the wall time.
fn reference_comparison(noise: f64, variants: Vec<VariantSpec>) -> Result<(Comparison, f64), String> {
    let start = Instant::now();
    let mut config = ExperimentConfig::default();
    config.corpus.noise = noise;
    let train_corpus = generate_corpus(&config.corpus).map_err(|e| e.to_string())?;
    let eval_corpus = generate_corpus(&config.eval_corpus_config()).map_err(|e| e.to_string())?;
    let cmp = compare_variants(&train_corpus, &eval_corpus, &variants, &config).map_err(|e| e.to_string())?;
    Ok((cmp, start.elapsed().as_secs_f64()))
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL criterion {id:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
}

fn main() -> ExitCode {
    // Honour `cargo test -- <filter>` style invocations that target other tests.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let mut suite = Suite { failures: 0 };
    suite.run(1, "oracle equivalence", oracle_equivalence);
    suite.run(2, "alpha recursion equivalence", alpha_equivalence);
    suite.run(3, "gradient correctness", gradient_correctness);
    suite.run(4, "closed-form losses", closed_forms);
    suite.run(5, "gamma_max formula", gamma_max_formula);

    let noisy = reference_comparison(0.2, reference_variants());
    suite.run(6, "reduction ratio ordering", || {
        let (cmp, secs) = noisy.as_ref().map_err(Clone::clone)?;
        table_ordering(cmp).map(|d| format!("{d}; trained in {secs:.0}s"))
    });

    let noiseless = reference_comparison(
        0.0,
        vec![
            VariantSpec::new("standard", TopologyVariant::Standard, None),
            VariantSpec::new("soft-0.04", TopologyVariant::Soft { lambda: 0.04 }, None),
            VariantSpec::new("hard-2", TopologyVariant::Hard { k: 2 }, None),
        ],
    );
    suite.run(7, "threshold curves non-increasing", || {
        let (a, _) = noisy.as_ref().map_err(Clone::clone)?;
        let (b, _) = noiseless.as_ref().map_err(Clone::clone)?;
        curves_monotone(&a.reports.iter().chain(&b.reports).collect::<Vec<_>>())
    });
    suite.run(8, "quality preserved on noiseless data", || {
        let (cmp, secs) = noiseless.as_ref().map_err(Clone::clone)?;
        quality_preserved(cmp).map(|d| format!("{d}; trained in {secs:.0}s"))
    });
    suite.run(9, "identity degeneracies", identity_degeneracies);
    suite.run(10, "CLI determinism", cli_determinism);

    if suite.failures == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 10 criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
