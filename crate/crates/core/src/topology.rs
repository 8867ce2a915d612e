//! CTC topologies and per-utterance training graphs.
//!
//! The topology `H` maps frame-level symbol strings to label strings: it
//! accepts blanks and repeated tokens and emits each token once. Composing it
//! with the linear acceptor of a transcript gives the training graph `HL`,
//! whose paths are the valid alignments of that transcript.
//!
//! Three variants are supported. [`TopologyVariant::Standard`] is plain CTC.
//! [`TopologyVariant::Soft`] adds a score of `-lambda` on every non-blank
//! self-loop, so each extra frame spent repeating a token costs `lambda`.
//! [`TopologyVariant::Hard`] unrolls each token into `k` states so that no
//! more than `k` consecutive frames can carry the same token.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fst::{compose, Arc, Fst, Label, BLANK, EPSILON, TERMINAL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologyVariant {
    Standard,
    Soft { lambda: f64 },
    Hard { k: usize },
}

impl TopologyVariant {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TopologyVariant::Standard => Ok(()),
            TopologyVariant::Soft { lambda } if lambda.is_finite() && lambda >= 0.0 => Ok(()),
            TopologyVariant::Soft { lambda } => Err(Error::invalid(format!(
                "soft penalty must be finite and non-negative, got {lambda}"
            ))),
            TopologyVariant::Hard { k } if k >= 1 => Ok(()),
            TopologyVariant::Hard { .. } => Err(Error::invalid("hard bound k must be at least 1")),
        }
    }

    /// Score added for one traversal of a non-blank self-loop.
    fn self_loop_weight(&self) -> f64 {
        match *self {
            TopologyVariant::Soft { lambda } => -lambda,
            _ => 0.0,
        }
    }
}

impl fmt::Display for TopologyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyVariant::Standard => write!(f, "standard"),
            TopologyVariant::Soft { lambda } => write!(f, "soft(lambda={lambda})"),
            TopologyVariant::Hard { k } => write!(f, "hard(k={k})"),
        }
    }
}

/// A transcript: token ids in `1..=vocab_size`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSequence {
    tokens: Vec<usize>,
    vocab_size: usize,
}

impl LabelSequence {
    pub fn new(tokens: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if let Some(&bad) = tokens.iter().find(|&&t| t == 0 || t > vocab_size) {
            return Err(Error::invalid(format!(
                "token {bad} outside vocabulary 1..={vocab_size}"
            )));
        }
        Ok(LabelSequence { tokens, vocab_size })
    }

    /// Parses a comma-separated list of tokens. Each entry is either a
    /// positive integer id or a letter, `A` being token 1.
    pub fn parse(csv: &str, vocab_size: usize) -> Result<Self> {
        let tokens = csv
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(parse_symbol)
            .collect::<Result<Vec<_>>>()?;
        LabelSequence::new(tokens, vocab_size)
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Fewest frames any alignment needs: one per token plus one blank
    /// between each pair of equal neighbours.
    pub fn min_frames(&self) -> usize {
        self.len() + self.tokens.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

fn parse_symbol(s: &str) -> Result<usize> {
    if let Ok(id) = s.parse::<usize>() {
        return Ok(id);
    }
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Ok(c as usize - 'A' as usize + 1),
        _ => Err(Error::invalid(format!("cannot parse token `{s}`"))),
    }
}

/// Renders a symbol string: `-` for blank, letters for tokens up to 26, ids
/// separated by spaces otherwise.
pub fn format_symbols(symbols: &[usize]) -> String {
    if symbols.iter().all(|&s| s <= 26) {
        symbols
            .iter()
            .map(|&s| if s == 0 { '-' } else { (b'A' + (s - 1) as u8) as char })
            .collect()
    } else {
        symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Builds the topology transducer over input `{blank, 1..=V}` and output
/// `{eps, 1..=V}`. The blank state is the start state and every state may
/// terminate.
pub fn build_topology(vocab_size: usize, variant: TopologyVariant) -> Result<Fst> {
    if vocab_size == 0 {
        return Err(Error::invalid("vocabulary must hold at least one token"));
    }
    variant.validate()?;
    let depth = match variant {
        TopologyVariant::Hard { k } => k,
        _ => 1,
    };
    let self_loops = !matches!(variant, TopologyVariant::Hard { .. });
    let loop_weight = variant.self_loop_weight();

    let mut h = Fst::new(vocab_size, vocab_size);
    let blank = h.add_state();
    // token j at repeat depth i (both 1-based) lives at 1 + (j-1)*depth + (i-1)
    for _ in 0..vocab_size * depth {
        h.add_state();
    }
    let fin = h.add_state();
    h.set_start(blank);
    h.set_final(fin);
    let state = |token: usize, depth_index: usize| 1 + (token - 1) * depth + (depth_index - 1);

    let mut sources = vec![(blank, None)];
    for j in 1..=vocab_size {
        for i in 1..=depth {
            sources.push((state(j, i), Some((j, i))));
        }
    }

    for (s, position) in sources {
        h.add_arc(Arc::new(s, blank, BLANK, EPSILON, 0.0));
        for j in 1..=vocab_size {
            let label = j as Label;
            match position {
                Some((current, i)) if current == j => {
                    if self_loops {
                        h.add_arc(Arc::new(s, s, label, EPSILON, loop_weight));
                    } else if i < depth {
                        h.add_arc(Arc::new(s, state(j, i + 1), label, EPSILON, 0.0));
                    }
                }
                _ => {
                    h.add_arc(Arc::new(s, state(j, 1), label, label, 0.0));
                }
            }
        }
        h.add_arc(Arc::new(s, fin, TERMINAL, EPSILON, 0.0));
    }
    Ok(h)
}

/// The linear acceptor of the transcript: `U + 1` chained states and a
/// terminal arc into the final state, all weights zero.
pub fn build_linear_graph(labels: &LabelSequence) -> Fst {
    linear_graph(labels.tokens(), labels.vocab_size())
}

fn linear_graph(tokens: &[usize], vocab_size: usize) -> Fst {
    let mut l = Fst::new(vocab_size, vocab_size);
    let mut prev = l.add_state();
    l.set_start(prev);
    for &t in tokens {
        let s = l.add_state();
        l.add_arc(Arc::new(prev, s, t as Label, t as Label, 0.0));
        prev = s;
    }
    let fin = l.add_state();
    l.add_arc(Arc::new(prev, fin, TERMINAL, EPSILON, 0.0));
    l.set_final(fin);
    l
}

/// `connect(compose(H, L))` for one transcript.
pub fn build_training_graph(
    labels: &LabelSequence,
    vocab_size: usize,
    variant: TopologyVariant,
) -> Result<Fst> {
    if let Some(&bad) = labels.tokens().iter().find(|&&t| t > vocab_size) {
        return Err(Error::invalid(format!(
            "token {bad} outside vocabulary 1..={vocab_size}"
        )));
    }
    let h = build_topology(vocab_size, variant)?;
    compose(&h, &linear_graph(labels.tokens(), vocab_size))
}

/// CTC collapse: merge adjacent duplicates, then drop blanks.
pub fn collapse_ctc(alignment: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &s in alignment {
        if prev != Some(s) && s != 0 {
            out.push(s);
        }
        prev = Some(s);
    }
    out
}

/// Transducer collapse: drop blanks, keep duplicates.
pub fn collapse_transducer(alignment: &[usize]) -> Vec<usize> {
    alignment.iter().copied().filter(|&s| s != 0).collect()
}

/// Longest run of one repeated non-blank symbol.
pub fn max_nonblank_run(alignment: &[usize]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = 0;
    for &s in alignment {
        run = if s != 0 && s == prev { run + 1 } else { usize::from(s != 0) };
        prev = s;
        best = best.max(run);
    }
    best
}

/// Number of frames that repeat the preceding non-blank symbol, i.e. the sum
/// over non-blank runs of `run length - 1`.
pub fn count_repeats(alignment: &[usize]) -> usize {
    alignment
        .windows(2)
        .filter(|w| w[0] != 0 && w[0] == w[1])
        .count()
}

pub const MAX_ENUMERATION_FRAMES: usize = 12;
pub const MAX_ENUMERATION_VOCAB: usize = 4;

/// Every length-`frames` string over `{blank} ∪ 1..=V` that collapses to
/// `labels`, further restricted by the run-length bound for
/// [`TopologyVariant::Hard`]. Soft penalties do not remove strings.
///
/// This is a brute-force reference: strings are generated symbol by symbol
/// and a prefix is abandoned only once its collapse stops being a prefix of
/// the transcript. Results come out in lexicographic order.
pub fn enumerate_alignments(
    labels: &LabelSequence,
    frames: usize,
    variant: TopologyVariant,
) -> Result<Vec<Vec<usize>>> {
    variant.validate()?;
    if frames > MAX_ENUMERATION_FRAMES || labels.vocab_size() > MAX_ENUMERATION_VOCAB {
        return Err(Error::TooLarge(format!(
            "enumeration limited to T <= {MAX_ENUMERATION_FRAMES} and V <= {MAX_ENUMERATION_VOCAB}, \
             got T = {frames}, V = {}",
            labels.vocab_size()
        )));
    }
    let max_run = match variant {
        TopologyVariant::Hard { k } => k,
        _ => usize::MAX,
    };
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(frames);
    extend(labels, frames, max_run, &mut prefix, &mut out);
    Ok(out)
}

fn extend(
    labels: &LabelSequence,
    frames: usize,
    max_run: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let collapsed = collapse_ctc(prefix);
    if !labels.tokens().starts_with(&collapsed) {
        return;
    }
    if prefix.len() == frames {
        if collapsed == labels.tokens() && max_nonblank_run(prefix) <= max_run {
            out.push(prefix.clone());
        }
        return;
    }
    for s in 0..=labels.vocab_size() {
        prefix.push(s);
        extend(labels, frames, max_run, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DenseGrid;
    use crate::lattice::intersect_dense;

    const A: usize = 1;
    const B: usize = 2;

    fn labels(tokens: &[usize], v: usize) -> LabelSequence {
        LabelSequence::new(tokens.to_vec(), v).unwrap()
    }

    fn lattice_strings(graph: &Fst, frames: usize, v: usize) -> Vec<(Vec<usize>, f64)> {
        let grid = DenseGrid::new(crate::grid::Matrix::zeros(frames, v + 1)).unwrap();
        let mut paths = intersect_dense(graph, &grid).unwrap().enumerate_paths();
        paths.sort_by(|a, b| a.0.cmp(&b.0));
        paths
    }

    fn strings(paths: &[(Vec<usize>, f64)]) -> Vec<Vec<usize>> {
        paths.iter().map(|p| p.0.clone()).collect()
    }

    #[test]
    fn collapse_maps() {
        assert_eq!(collapse_ctc(&[A, A, 0, B]), vec![A, B]);
        assert_eq!(collapse_ctc(&[0, 0, 0]), Vec::<usize>::new());
        assert_eq!(collapse_ctc(&[A, 0, A]), vec![A, A]);
        assert_eq!(collapse_transducer(&[A, 0, A]), vec![A, A]);
        assert_eq!(collapse_transducer(&[A, A, 0]), vec![A, A]);
        assert_eq!(collapse_transducer(&[0]), Vec::<usize>::new());
    }

    #[test]
    fn run_statistics() {
        assert_eq!(max_nonblank_run(&[A, A, 0, B, B, B]), 3);
        assert_eq!(max_nonblank_run(&[0, 0]), 0);
        assert_eq!(count_repeats(&[A, A, 0, B, B, B]), 3);
        assert_eq!(count_repeats(&[A, 0, A]), 0);
    }

    #[test]
    fn enumerate_small_cases() {
        let ab = labels(&[A, B], 2);
        let all = enumerate_alignments(&ab, 3, TopologyVariant::Standard).unwrap();
        assert_eq!(
            all,
            vec![vec![0, A, B], vec![A, 0, B], vec![A, A, B], vec![A, B, 0], vec![A, B, B]]
        );
        assert_eq!(
            enumerate_alignments(&ab, 2, TopologyVariant::Standard).unwrap(),
            vec![vec![A, B]]
        );
        assert!(enumerate_alignments(&ab, 1, TopologyVariant::Standard)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn enumerate_guard() {
        let ab = labels(&[A, B], 2);
        assert!(matches!(
            enumerate_alignments(&ab, 13, TopologyVariant::Standard),
            Err(Error::TooLarge(_))
        ));
        let big = labels(&[A], 5);
        assert!(enumerate_alignments(&big, 3, TopologyVariant::Standard).is_err());
    }

    #[test]
    fn standard_ab_at_three_frames() {
        let g = build_training_graph(&labels(&[A, B], 2), 2, TopologyVariant::Standard).unwrap();
        let paths = lattice_strings(&g, 3, 2);
        assert_eq!(
            strings(&paths),
            vec![vec![0, A, B], vec![A, 0, B], vec![A, A, B], vec![A, B, 0], vec![A, B, B]]
        );
    }

    #[test]
    fn soft_penalizes_repeats_only() {
        let variant = TopologyVariant::Soft { lambda: 0.05 };
        let g = build_training_graph(&labels(&[A, B], 2), 2, variant).unwrap();
        for (path, score) in lattice_strings(&g, 3, 2) {
            let expected = if path == [A, A, B] || path == [A, B, B] { -0.05 } else { 0.0 };
            assert!((score - expected).abs() < 1e-15, "{path:?} {score}");
        }
    }

    #[test]
    fn hard_one_forbids_repeats() {
        let g = build_training_graph(&labels(&[A, B], 2), 2, TopologyVariant::Hard { k: 1 }).unwrap();
        assert_eq!(
            strings(&lattice_strings(&g, 3, 2)),
            vec![vec![0, A, B], vec![A, 0, B], vec![A, B, 0]]
        );
    }

    #[test]
    fn hard_two_at_four_frames() {
        let g = build_training_graph(&labels(&[A, B], 2), 2, TopologyVariant::Hard { k: 2 }).unwrap();
        let found = strings(&lattice_strings(&g, 4, 2));
        assert!(found.contains(&vec![A, A, B, B]));
        assert!(!found.contains(&vec![A, A, A, B]));
        assert!(!found.contains(&vec![A, B, B, B]));
    }

    #[test]
    fn repeated_label_needs_blank() {
        let g = build_training_graph(&labels(&[A, A], 2), 2, TopologyVariant::Standard).unwrap();
        assert_eq!(strings(&lattice_strings(&g, 3, 2)), vec![vec![A, 0, A]]);
        assert!(lattice_strings(&g, 2, 2).is_empty());
    }

    #[test]
    fn hard_one_repeated_label_at_two_frames_is_empty() {
        let g = build_training_graph(&labels(&[A, A], 2), 2, TopologyVariant::Hard { k: 1 }).unwrap();
        let grid = DenseGrid::uniform(2, 2).unwrap();
        assert!(intersect_dense(&g, &grid).unwrap().is_empty());
        assert!(enumerate_alignments(&labels(&[A, A], 2), 2, TopologyVariant::Hard { k: 1 })
            .unwrap()
            .is_empty());
    }

    #[test]
    fn hard_one_hl_for_ab_has_figure_shape() {
        // blank-start, A, blank-after-A, B, blank-after-B, final
        let g = build_training_graph(&labels(&[A, B], 2), 2, TopologyVariant::Hard { k: 1 }).unwrap();
        assert_eq!(g.num_states(), 6);
        let self_loops: Vec<_> = g.arcs().iter().filter(|a| a.src == a.dst).collect();
        assert_eq!(self_loops.len(), 3);
        assert!(self_loops.iter().all(|a| a.ilabel == BLANK));
        assert!(g.arcs().iter().all(|a| a.weight == 0.0));
    }

    #[test]
    fn empty_transcript_accepts_only_blanks() {
        let g = build_training_graph(&labels(&[], 2), 2, TopologyVariant::Standard).unwrap();
        assert_eq!(strings(&lattice_strings(&g, 3, 2)), vec![vec![0, 0, 0]]);
        let l = build_linear_graph(&labels(&[], 2));
        assert_eq!((l.num_states(), l.num_arcs()), (2, 1));
    }

    #[test]
    fn linear_graph_shape() {
        let l = build_linear_graph(&labels(&[A, A], 2));
        assert_eq!(l.num_states(), 4);
        let labels: Vec<_> = l.arcs().iter().map(|a| a.ilabel).collect();
        assert_eq!(labels, vec![1, 1, TERMINAL]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(LabelSequence::new(vec![3], 2).is_err());
        assert!(LabelSequence::new(vec![0], 2).is_err());
        assert!(build_topology(0, TopologyVariant::Standard).is_err());
        assert!(build_topology(2, TopologyVariant::Soft { lambda: -1.0 }).is_err());
        assert!(build_topology(2, TopologyVariant::Hard { k: 0 }).is_err());
        assert!(build_training_graph(&labels(&[2], 2), 1, TopologyVariant::Standard).is_err());
    }

    #[test]
    fn parse_labels() {
        assert_eq!(LabelSequence::parse("A,B", 2).unwrap().tokens(), &[1, 2]);
        assert_eq!(LabelSequence::parse("3, 1", 3).unwrap().tokens(), &[3, 1]);
        assert!(LabelSequence::parse("", 2).unwrap().is_empty());
        assert!(LabelSequence::parse("a", 2).is_err());
        assert!(LabelSequence::parse("C", 2).is_err());
        assert_eq!(format_symbols(&[0, 1, 2]), "-AB");
    }

    #[test]
    fn min_frames_counts_forced_blanks() {
        assert_eq!(labels(&[A, A, B], 2).min_frames(), 4);
        assert_eq!(labels(&[], 2).min_frames(), 0);
    }
}
