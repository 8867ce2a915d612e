//! Frame-indexed lattices: the intersection of a training graph with a dense
//! score grid, and the dynamic programs run over them.

use crate::error::{Error, Result};
use crate::fst::{Arc, ArcId, Fst, StateId, TERMINAL};
use crate::grid::DenseGrid;
use crate::weight::Semiring;

/// Which frame an arc consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcFrame {
    Frame(usize),
    /// The sentinel step into the final state after the last frame.
    Terminal,
}

/// An acyclic FST whose arcs each consume one grid frame, except the terminal
/// arcs entering the final state.
///
/// States are numbered in frame order, so increasing state id is a
/// topological order.
#[derive(Clone, Debug)]
pub struct Lattice {
    fst: Fst,
    frame_of_arc: Vec<ArcFrame>,
    frames: usize,
}

impl Lattice {
    pub fn fst(&self) -> &Fst {
        &self.fst
    }

    pub fn is_empty(&self) -> bool {
        self.fst.is_empty()
    }

    /// Number of grid frames every path consumes.
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_of_arc(&self, id: ArcId) -> ArcFrame {
        self.frame_of_arc[id]
    }

    /// Grid column scored by the arc, `None` for terminal arcs.
    pub fn symbol_of_arc(&self, id: ArcId) -> Option<usize> {
        match self.frame_of_arc[id] {
            ArcFrame::Frame(_) => Some(self.fst.arc(id).ilabel as usize),
            ArcFrame::Terminal => None,
        }
    }

    /// Every start-to-final path as (per-frame symbols, path score). The count
    /// grows exponentially with the frame count; meant for small lattices.
    pub fn enumerate_paths(&self) -> Vec<(Vec<usize>, f64)> {
        let mut paths = Vec::new();
        if self.is_empty() {
            return paths;
        }
        let mut symbols = Vec::with_capacity(self.frames);
        self.walk(self.fst.start(), 0.0, &mut symbols, &mut paths);
        paths
    }

    fn walk(&self, s: StateId, score: f64, symbols: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
        if s == self.fst.final_state() {
            out.push((symbols.clone(), score));
            return;
        }
        for &id in self.fst.out_arcs(s) {
            let arc = self.fst.arc(id);
            let pushed = self.symbol_of_arc(id).map(|k| symbols.push(k)).is_some();
            self.walk(arc.dst, score + arc.weight, symbols, out);
            if pushed {
                symbols.pop();
            }
        }
    }
}

/// Intersects `graph` with the dense grid.
///
/// Lattice states are (graph state, frame) pairs. An arc at frame `t` carries
/// the graph arc weight plus `grid[t][ilabel]`; after frame `T - 1` one
/// terminal step consumes the sentinel and enters the final state. The result
/// is connected, and is empty when the graph has no path of exactly `T`
/// frames.
pub fn intersect_dense(graph: &Fst, grid: &DenseGrid) -> Result<Lattice> {
    let frames = grid.frames();
    let empty = || Lattice {
        fst: Fst::empty(),
        frame_of_arc: Vec::new(),
        frames,
    };
    if graph.is_empty() {
        return Ok(empty());
    }
    if let Some(a) = graph
        .arcs()
        .iter()
        .find(|a| a.ilabel != TERMINAL && (a.ilabel < 0 || a.ilabel as usize > grid.vocab_size()))
    {
        return Err(Error::invalid(format!(
            "graph input label {} outside grid columns 0..={}",
            a.ilabel,
            grid.vocab_size()
        )));
    }

    let n = graph.num_states();
    let slot = |t: usize, q: StateId| t * n + q;

    // Forward reachability of (state, frame) pairs.
    let mut live = vec![false; n * (frames + 1)];
    live[slot(0, graph.start())] = true;
    for t in 0..frames {
        for q in 0..n {
            if !live[slot(t, q)] {
                continue;
            }
            for &id in graph.out_arcs(q) {
                let a = graph.arc(id);
                if a.ilabel != TERMINAL {
                    live[slot(t + 1, a.dst)] = true;
                }
            }
        }
    }
    // Keep only pairs that can still finish after exactly `frames` steps.
    for q in 0..n {
        let terminates = graph.out_arcs(q).iter().any(|&id| graph.arc(id).ilabel == TERMINAL);
        live[slot(frames, q)] &= terminates;
    }
    for t in (0..frames).rev() {
        for q in 0..n {
            if live[slot(t, q)] {
                live[slot(t, q)] = graph.out_arcs(q).iter().any(|&id| {
                    let a = graph.arc(id);
                    a.ilabel != TERMINAL && live[slot(t + 1, a.dst)]
                });
            }
        }
    }
    if !live[slot(0, graph.start())] {
        return Ok(empty());
    }

    let mut state_of = vec![usize::MAX; n * (frames + 1)];
    let mut lat = Fst::new(grid.vocab_size(), graph.output_vocab());
    for (i, &alive) in live.iter().enumerate() {
        if alive {
            state_of[i] = lat.add_state();
        }
    }
    let fin = lat.add_state();
    lat.set_start(state_of[slot(0, graph.start())]);
    lat.set_final(fin);

    let mut frame_of_arc = Vec::new();
    for t in 0..=frames {
        for q in 0..n {
            let src = state_of[slot(t, q)];
            if src == usize::MAX {
                continue;
            }
            for &id in graph.out_arcs(q) {
                let a = graph.arc(id);
                if a.ilabel == TERMINAL {
                    if t == frames {
                        lat.add_arc(Arc::new(src, fin, TERMINAL, a.olabel, a.weight));
                        frame_of_arc.push(ArcFrame::Terminal);
                    }
                } else if t < frames && state_of[slot(t + 1, a.dst)] != usize::MAX {
                    lat.add_arc(Arc::new(
                        src,
                        state_of[slot(t + 1, a.dst)],
                        a.ilabel,
                        a.olabel,
                        a.weight + grid.get(t, a.ilabel as usize),
                    ));
                    frame_of_arc.push(ArcFrame::Frame(t));
                }
            }
        }
    }
    Ok(Lattice {
        fst: lat,
        frame_of_arc,
        frames,
    })
}

/// Semiring sum over all paths from the start to each state.
/// `scores[start] = 0`; unreachable states hold `-inf`.
pub fn forward_scores(lat: &Lattice, semiring: Semiring) -> Vec<f64> {
    let fst = &lat.fst;
    let n = fst.num_states();
    let mut alpha = vec![semiring.zero(); n];
    if fst.is_empty() {
        return alpha;
    }
    // Incoming arcs grouped by destination.
    let mut offsets = vec![0usize; n + 1];
    for a in fst.arcs() {
        offsets[a.dst + 1] += 1;
    }
    for s in 0..n {
        offsets[s + 1] += offsets[s];
    }
    let mut fill = offsets.clone();
    let mut incoming = vec![0usize; fst.num_arcs()];
    for (id, a) in fst.arcs().iter().enumerate() {
        incoming[fill[a.dst]] = id;
        fill[a.dst] += 1;
    }

    let mut terms = Vec::new();
    for s in 0..n {
        if s == fst.start() {
            alpha[s] = 0.0;
            continue;
        }
        terms.clear();
        for &id in &incoming[offsets[s]..offsets[s + 1]] {
            let a = fst.arc(id);
            debug_assert!(a.src < s, "lattice states out of topological order");
            terms.push(alpha[a.src] + a.weight);
        }
        alpha[s] = combine(semiring, &terms);
    }
    alpha
}

/// Semiring sum over all paths from each state to the final state.
pub fn backward_scores(lat: &Lattice, semiring: Semiring) -> Vec<f64> {
    let fst = &lat.fst;
    let mut beta = vec![semiring.zero(); fst.num_states()];
    if fst.is_empty() {
        return beta;
    }
    let mut terms = Vec::new();
    for s in (0..fst.num_states()).rev() {
        if s == fst.final_state() {
            beta[s] = 0.0;
            continue;
        }
        terms.clear();
        for &id in fst.out_arcs(s) {
            let a = fst.arc(id);
            terms.push(a.weight + beta[a.dst]);
        }
        beta[s] = combine(semiring, &terms);
    }
    beta
}

fn combine(semiring: Semiring, terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match semiring {
        Semiring::Tropical => max,
        Semiring::Log if max == f64::NEG_INFINITY => max,
        Semiring::Log => max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln(),
    }
}

/// Total score of the lattice: `forward[final]`, `-inf` when empty.
pub fn total_score(lat: &Lattice, semiring: Semiring) -> f64 {
    if lat.is_empty() {
        return f64::NEG_INFINITY;
    }
    forward_scores(lat, semiring)[lat.fst.final_state()]
}

/// The highest-scoring path.
#[derive(Clone, Debug, PartialEq)]
pub struct BestPath {
    /// Grid column chosen at each frame; length `T`.
    pub alignment: Vec<usize>,
    pub score: f64,
    pub arcs: Vec<ArcId>,
}

/// Viterbi best path. Equal-score candidates resolve to the incoming arc with
/// the lowest id.
pub fn best_path(lat: &Lattice) -> Result<BestPath> {
    let fst = &lat.fst;
    if fst.is_empty() {
        return Err(Error::NoPath);
    }
    let n = fst.num_states();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut back = vec![usize::MAX; n];
    best[fst.start()] = 0.0;
    for s in 0..n {
        if best[s] == f64::NEG_INFINITY {
            continue;
        }
        for &id in fst.out_arcs(s) {
            let a = fst.arc(id);
            let cand = best[s] + a.weight;
            if cand > best[a.dst] || (cand == best[a.dst] && id < back[a.dst]) {
                best[a.dst] = cand;
                back[a.dst] = id;
            }
        }
    }

    let mut arcs = Vec::with_capacity(lat.frames + 1);
    let mut s = fst.final_state();
    while s != fst.start() {
        let id = back[s];
        arcs.push(id);
        s = fst.arc(id).src;
    }
    arcs.reverse();
    let alignment = arcs.iter().filter_map(|&id| lat.symbol_of_arc(id)).collect();
    Ok(BestPath {
        alignment,
        score: best[fst.final_state()],
        arcs,
    })
}

/// Posterior probability of every arc:
/// `exp(forward[src] + weight + backward[dst] - total)`, indexed by arc id.
pub fn arc_posteriors(lat: &Lattice) -> Result<Vec<f64>> {
    posteriors_with_total(lat).map(|(post, _)| post)
}

/// Arc posteriors together with the log-semiring total score.
pub(crate) fn posteriors_with_total(lat: &Lattice) -> Result<(Vec<f64>, f64)> {
    let fst = &lat.fst;
    if fst.is_empty() {
        return Err(Error::NoPath);
    }
    let alpha = forward_scores(lat, Semiring::Log);
    let beta = backward_scores(lat, Semiring::Log);
    let total = alpha[fst.final_state()];
    let post = fst
        .arcs()
        .iter()
        .map(|a| (alpha[a.src] + a.weight + beta[a.dst] - total).exp())
        .collect();
    Ok((post, total))
}
