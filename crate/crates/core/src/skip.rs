//! Blank-frame skipping.
//!
//! A frame whose blank probability exceeds the threshold is treated as a blank
//! frame and dropped before the transducer joiner. The frame reduction ratio
//! is the fraction of frames dropped; it can never exceed
//! `gamma_max = 1 - S / T` for `S` output tokens over `T` frames, since every
//! token needs at least one kept frame.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::format_number;

/// Decoding thresholds swept in the reference experiments.
pub const REFERENCE_BETAS: [f64; 6] = [0.8, 0.85, 0.9, 0.95, 0.99, 0.999];

/// `gamma_max` reported for the LibriSpeech test sets (78.61%). Kept for
/// reference only; nothing here computes it.
pub const LIBRISPEECH_GAMMA_MAX: f64 = 0.7861;

#[derive(Clone, Debug, PartialEq)]
pub struct SkipMask {
    /// `true` marks a discarded frame.
    pub skip: Vec<bool>,
    pub threshold: f64,
}

impl SkipMask {
    pub fn skipped(&self) -> usize {
        self.skip.iter().filter(|&&s| s).count()
    }

    /// `|skipped| / T`, zero for an empty mask.
    pub fn reduction_ratio(&self) -> f64 {
        if self.skip.is_empty() {
            return 0.0;
        }
        self.skipped() as f64 / self.skip.len() as f64
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold must lie in (0, 1), got {beta}")))
    }
}

/// Marks frame `t` for skipping when `blank_probs[t] > beta` (strictly).
pub fn classify_blank_frames(blank_probs: &[f64], beta: f64) -> Result<SkipMask> {
    check_beta(beta)?;
    if let Some(p) = blank_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("blank probability {p} outside [0, 1]")));
    }
    Ok(SkipMask {
        skip: blank_probs.iter().map(|&p| p > beta).collect(),
        threshold: beta,
    })
}

/// Keeps the unskipped frames in order, each paired with its original index.
pub fn apply_skip<'a, F>(frames: &'a [F], mask: &SkipMask) -> Result<Vec<(usize, &'a F)>> {
    if frames.len() != mask.skip.len() {
        return Err(Error::invalid(format!(
            "{} frames but mask covers {}",
            frames.len(),
            mask.skip.len()
        )));
    }
    Ok(frames
        .iter()
        .enumerate()
        .filter(|(t, _)| !mask.skip[*t])
        .collect())
}

/// `1 - tokens / frames`.
pub fn gamma_max(tokens: usize, frames: usize) -> Result<f64> {
    if frames == 0 {
        return Err(Error::invalid("frame count must be positive"));
    }
    if tokens > frames {
        return Err(Error::invalid(format!(
            "token count {tokens} exceeds frame count {frames}"
        )));
    }
    Ok(1.0 - tokens as f64 / frames as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    /// Corpus ratio: total skipped frames over total frames.
    pub ratio: f64,
    pub gamma_max: f64,
}

/// Corpus-level reduction ratio at each threshold. Ratios are frame-weighted
/// (`sum skipped / sum T`) and `gamma_max` uses the summed token and frame
/// counts.
pub fn sweep_thresholds(
    blank_prob_sets: &[Vec<f64>],
    label_counts: &[usize],
    betas: &[f64],
) -> Result<Vec<SweepRow>> {
    if blank_prob_sets.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    if blank_prob_sets.len() != label_counts.len() {
        return Err(Error::invalid(format!(
            "{} utterances but {} label counts",
            blank_prob_sets.len(),
            label_counts.len()
        )));
    }
    let total_frames: usize = blank_prob_sets.iter().map(Vec::len).sum();
    let total_tokens: usize = label_counts.iter().sum();
    let gmax = gamma_max(total_tokens, total_frames)?;
    betas
        .iter()
        .map(|&beta| {
            let mut skipped = 0;
            for probs in blank_prob_sets {
                skipped += classify_blank_frames(probs, beta)?.skipped();
            }
            Ok(SweepRow {
                beta,
                ratio: skipped as f64 / total_frames as f64,
                gamma_max: gmax,
            })
        })
        .collect()
}

/// Writes `beta,ratio,gamma_max` rows with a header.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "ratio", "gamma_max"])?;
    for r in rows {
        w.write_record([
            format_number(r.beta),
            format_number(r.ratio),
            format_number(r.gamma_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}
