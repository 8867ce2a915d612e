//! CTC negative log-likelihood and its gradient.
//!
//! [`ctc_loss`] runs forward-backward over the lattice of the training graph,
//! so it works for every topology variant. [`ctc_loss_alpha`] is the textbook
//! recursion over the blank-interleaved label sequence (standard topology
//! only) and [`brute_force_loss`] sums over enumerated alignments; both exist
//! to cross-check the lattice route.

use crate::error::{Error, Result};
use crate::fst::Fst;
use crate::grid::{DenseGrid, Matrix};
use crate::lattice::{intersect_dense, posteriors_with_total, ArcFrame};
use crate::topology::{
    build_training_graph, collapse_ctc, count_repeats, enumerate_alignments, LabelSequence,
    TopologyVariant,
};
use crate::weight::{log_add, log_sum_exp};

/// Row-wise log-softmax, shifted by the row maximum.
pub fn log_softmax(logits: &Matrix) -> Result<DenseGrid> {
    if logits.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    let mut out = logits.clone();
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= log_norm;
        }
    }
    DenseGrid::new(out)
}

#[derive(Clone, Debug)]
pub struct LossResult {
    /// `-ln p(labels | grid)`, penalties included for the soft variant.
    pub loss: f64,
    /// Gradient of `loss` with respect to the logits the grid was
    /// log-softmaxed from: `softmax - occupancy`.
    pub grad_logits: Matrix,
    /// Expected count of each symbol at each frame over valid alignments.
    pub occupancy: Matrix,
}

/// CTC loss of `labels` against `grid` under `variant`.
pub fn ctc_loss(
    labels: &LabelSequence,
    grid: &DenseGrid,
    variant: TopologyVariant,
) -> Result<LossResult> {
    let graph = build_training_graph(labels, grid.vocab_size(), variant)?;
    ctc_loss_with_graph(&graph, labels, grid, variant)
}

/// [`ctc_loss`] on logits: applies [`log_softmax`] first.
pub fn ctc_loss_from_logits(
    labels: &LabelSequence,
    logits: &Matrix,
    variant: TopologyVariant,
) -> Result<LossResult> {
    ctc_loss(labels, &log_softmax(logits)?, variant)
}

/// [`ctc_loss`] with a training graph built ahead of time, so repeated
/// evaluations on one utterance skip the composition.
pub fn ctc_loss_with_graph(
    graph: &Fst,
    labels: &LabelSequence,
    grid: &DenseGrid,
    variant: TopologyVariant,
) -> Result<LossResult> {
    let lat = intersect_dense(graph, grid)?;
    if lat.is_empty() {
        return Err(Error::InfeasibleAlignment {
            frames: grid.frames(),
            labels: labels.len(),
            variant,
        });
    }
    let (post, total) = posteriors_with_total(&lat)?;

    let (frames, cols) = (grid.frames(), grid.columns());
    let mut occupancy = Matrix::zeros(frames, cols);
    for (id, p) in post.iter().enumerate() {
        if let ArcFrame::Frame(t) = lat.frame_of_arc(id) {
            let k = lat.fst().arc(id).ilabel as usize;
            occupancy.set(t, k, occupancy.get(t, k) + p);
        }
    }

    let mut grad_logits = Matrix::zeros(frames, cols);
    for t in 0..frames {
        let row = grid.row(t);
        let log_norm = log_sum_exp(row.iter().copied());
        for (k, &v) in row.iter().enumerate() {
            grad_logits.set(t, k, (v - log_norm).exp() - occupancy.get(t, k));
        }
    }

    Ok(LossResult {
        loss: -total,
        grad_logits,
        occupancy,
    })
}

/// Standard-topology CTC loss by the alpha recursion over the `2U + 1`
/// blank-interleaved states.
pub fn ctc_loss_alpha(labels: &LabelSequence, grid: &DenseGrid) -> Result<f64> {
    if labels.tokens().iter().any(|&t| t > grid.vocab_size()) {
        return Err(Error::invalid("label outside grid columns"));
    }
    let mut extended = vec![0usize; 2 * labels.len() + 1];
    for (u, &tok) in labels.tokens().iter().enumerate() {
        extended[2 * u + 1] = tok;
    }
    let states = extended.len();
    let ninf = f64::NEG_INFINITY;

    let mut alpha = vec![ninf; states];
    alpha[0] = grid.get(0, 0);
    if states > 1 {
        alpha[1] = grid.get(0, extended[1]);
    }
    for t in 1..grid.frames() {
        let mut next = vec![ninf; states];
        for s in 0..states {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_add(acc, alpha[s - 1]);
            }
            if s >= 2 && extended[s] != 0 && extended[s] != extended[s - 2] {
                acc = log_add(acc, alpha[s - 2]);
            }
            next[s] = acc + grid.get(t, extended[s]);
        }
        alpha = next;
    }

    let total = if states > 1 {
        log_add(alpha[states - 1], alpha[states - 2])
    } else {
        alpha[0]
    };
    if total == ninf {
        return Err(Error::InfeasibleAlignment {
            frames: grid.frames(),
            labels: labels.len(),
            variant: TopologyVariant::Standard,
        });
    }
    Ok(-total)
}

/// Loss by explicit summation over [`enumerate_alignments`]. Soft paths lose
/// `lambda` per repeated frame. Subject to the enumeration size limits.
pub fn brute_force_loss(
    labels: &LabelSequence,
    grid: &DenseGrid,
    variant: TopologyVariant,
) -> Result<f64> {
    if labels.vocab_size() != grid.vocab_size() {
        return Err(Error::invalid(format!(
            "label vocabulary {} does not match grid vocabulary {}",
            labels.vocab_size(),
            grid.vocab_size()
        )));
    }
    let penalty = match variant {
        TopologyVariant::Soft { lambda } => lambda,
        _ => 0.0,
    };
    let alignments = enumerate_alignments(labels, grid.frames(), variant)?;
    if alignments.is_empty() {
        return Err(Error::InfeasibleAlignment {
            frames: grid.frames(),
            labels: labels.len(),
            variant,
        });
    }
    let scores = alignments.iter().map(|path| {
        let acoustic: f64 = path.iter().enumerate().map(|(t, &k)| grid.get(t, k)).sum();
        acoustic - penalty * count_repeats(path) as f64
    });
    Ok(-log_sum_exp(scores))
}

/// Largest relative disagreement between the analytic logit gradient and
/// central finite differences with step `epsilon`, measured as
/// `|analytic - numeric| / (|numeric| + 1e-8)`.
pub fn grad_check(
    labels: &LabelSequence,
    logits: &Matrix,
    variant: TopologyVariant,
    epsilon: f64,
) -> Result<f64> {
    let graph = build_training_graph(labels, logits.cols().saturating_sub(1), variant)?;
    let loss_at = |m: &Matrix| -> Result<LossResult> {
        ctc_loss_with_graph(&graph, labels, &log_softmax(m)?, variant)
    };
    let analytic = loss_at(logits)?.grad_logits;
    let mut probe = logits.clone();
    let mut worst: f64 = 0.0;
    for i in 0..probe.data().len() {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + epsilon;
        let up = loss_at(&probe)?.loss;
        probe.data_mut()[i] = original - epsilon;
        let down = loss_at(&probe)?.loss;
        probe.data_mut()[i] = original;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = (analytic.data()[i] - numeric).abs() / (numeric.abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Per-frame argmax (lowest column on ties) followed by the CTC collapse.
pub fn greedy_decode(grid: &DenseGrid) -> LabelSequence {
    let path: Vec<usize> = (0..grid.frames()).map(|t| argmax(grid.row(t))).collect();
    LabelSequence::new(collapse_ctc(&path), grid.vocab_size())
        .expect("argmax columns are within the vocabulary")
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}
