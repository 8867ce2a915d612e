#![allow(dead_code)]

use blankreg::{log_softmax, DenseGrid, LabelSequence, Matrix, TopologyVariant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const VARIANTS: [TopologyVariant; 5] = [
    TopologyVariant::Standard,
    TopologyVariant::Soft { lambda: 0.05 },
    TopologyVariant::Soft { lambda: 5.0 },
    TopologyVariant::Hard { k: 1 },
    TopologyVariant::Hard { k: 2 },
];

pub fn random_logits(rng: &mut ChaCha8Rng, frames: usize, cols: usize) -> Matrix {
    let data = (0..frames * cols).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Matrix::from_vec(frames, cols, data).unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng, frames: usize, vocab: usize) -> DenseGrid {
    log_softmax(&random_logits(rng, frames, vocab + 1)).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> LabelSequence {
    let tokens = (0..len).map(|_| rng.gen_range(1..=vocab)).collect();
    LabelSequence::new(tokens, vocab).unwrap()
}

/// Every label sequence of length `0..=max_len` over `1..=vocab`.
pub fn all_label_sequences(max_len: usize, vocab: usize) -> Vec<LabelSequence> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for tok in 1..=vocab {
                let mut s: Vec<usize> = seq.clone();
                s.push(tok);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.into_iter()
        .map(|t| LabelSequence::new(t, vocab).unwrap())
        .collect()
}

pub fn uniform(frames: usize, vocab: usize) -> DenseGrid {
    DenseGrid::uniform(frames, vocab).unwrap()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
