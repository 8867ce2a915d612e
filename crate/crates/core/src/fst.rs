//! Weighted finite-state transducers with a single super-final state.
//!
//! Every accepting path ends with an arc carrying the terminal sentinel
//! [`TERMINAL`] on its input side and entering the one final state. Label `0`
//! is blank on the input side and epsilon on the output side; `1..=V` are
//! vocabulary tokens.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::format::format_number;

pub type StateId = usize;
pub type ArcId = usize;
pub type Label = i32;

/// Input label of arcs entering the final state.
pub const TERMINAL: Label = -1;
/// Blank on the input side.
pub const BLANK: Label = 0;
/// Epsilon on the output side.
pub const EPSILON: Label = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub src: StateId,
    pub dst: StateId,
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: f64,
}

impl Arc {
    pub fn new(src: StateId, dst: StateId, ilabel: Label, olabel: Label, weight: f64) -> Self {
        Arc {
            src,
            dst,
            ilabel,
            olabel,
            weight,
        }
    }
}

/// A mutable weighted transducer.
///
/// `input_vocab` and `output_vocab` are the largest non-blank symbol ids of the
/// two sides; composition requires the left output vocabulary to equal the
/// right input vocabulary.
#[derive(Clone, Debug, Default)]
pub struct Fst {
    arcs: Vec<Arc>,
    out: Vec<Vec<ArcId>>,
    start: StateId,
    final_state: StateId,
    input_vocab: usize,
    output_vocab: usize,
}

impl Fst {
    pub fn new(input_vocab: usize, output_vocab: usize) -> Self {
        Fst {
            input_vocab,
            output_vocab,
            ..Fst::default()
        }
    }

    /// The FST with no states, accepting nothing.
    pub fn empty() -> Self {
        Fst::default()
    }

    pub fn add_state(&mut self) -> StateId {
        self.out.push(Vec::new());
        self.out.len() - 1
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!(s < self.num_states(), "start state {s} out of range");
        self.start = s;
    }

    pub fn set_final(&mut self, s: StateId) {
        assert!(s < self.num_states(), "final state {s} out of range");
        self.final_state = s;
    }

    pub fn add_arc(&mut self, arc: Arc) -> ArcId {
        assert!(
            arc.src < self.num_states() && arc.dst < self.num_states(),
            "arc {arc:?} references a missing state"
        );
        let id = self.arcs.len();
        self.out[arc.src].push(id);
        self.arcs.push(arc);
        id
    }

    pub fn num_states(&self) -> usize {
        self.out.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn final_state(&self) -> StateId {
        self.final_state
    }

    pub fn input_vocab(&self) -> usize {
        self.input_vocab
    }

    pub fn output_vocab(&self) -> usize {
        self.output_vocab
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Arc ids leaving `s`, in insertion order.
    pub fn out_arcs(&self, s: StateId) -> &[ArcId] {
        &self.out[s]
    }

    /// Checks the structural invariants: labels in range, the terminal
    /// sentinel only on arcs entering the final state, and no arcs leaving it.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        if !self.out[self.final_state].is_empty() {
            return Err(Error::invalid("final state has outgoing arcs"));
        }
        for a in &self.arcs {
            if a.ilabel == TERMINAL {
                if a.dst != self.final_state {
                    return Err(Error::invalid(format!(
                        "terminal arc {} -> {} does not enter the final state",
                        a.src, a.dst
                    )));
                }
            } else if a.ilabel < 0 || a.ilabel as usize > self.input_vocab {
                return Err(Error::invalid(format!("input label {} out of range", a.ilabel)));
            }
            if a.olabel < 0 || a.olabel as usize > self.output_vocab {
                return Err(Error::invalid(format!("output label {} out of range", a.olabel)));
            }
            if !a.weight.is_finite() {
                return Err(Error::invalid(format!("non-finite weight on arc {} -> {}", a.src, a.dst)));
            }
        }
        Ok(())
    }

    /// Kahn ordering of the states, or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<StateId>> {
        let n = self.num_states();
        let mut indegree = vec![0usize; n];
        for a in &self.arcs {
            indegree[a.dst] += 1;
        }
        let mut queue: VecDeque<StateId> = (0..n).filter(|&s| indegree[s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = queue.pop_front() {
            order.push(s);
            for &id in &self.out[s] {
                let d = self.arcs[id].dst;
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    queue.push_back(d);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Trims to the states lying on some start-to-final path and also returns,
    /// for every kept arc, its id in `self`.
    pub(crate) fn connect_with_map(&self) -> (Fst, Vec<ArcId>) {
        if self.is_empty() {
            return (Fst::empty(), Vec::new());
        }
        let n = self.num_states();
        let mut accessible = vec![false; n];
        let mut stack = vec![self.start];
        accessible[self.start] = true;
        while let Some(s) = stack.pop() {
            for &id in &self.out[s] {
                let d = self.arcs[id].dst;
                if !accessible[d] {
                    accessible[d] = true;
                    stack.push(d);
                }
            }
        }

        let mut incoming: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for a in &self.arcs {
            incoming[a.dst].push(a.src);
        }
        let mut coaccessible = vec![false; n];
        let mut stack = vec![self.final_state];
        coaccessible[self.final_state] = true;
        while let Some(s) = stack.pop() {
            for &p in &incoming[s] {
                if !coaccessible[p] {
                    coaccessible[p] = true;
                    stack.push(p);
                }
            }
        }

        if !(accessible[self.final_state] && coaccessible[self.start]) {
            return (Fst::empty(), Vec::new());
        }

        let mut remap = vec![usize::MAX; n];
        let mut trimmed = Fst::new(self.input_vocab, self.output_vocab);
        for s in 0..n {
            if accessible[s] && coaccessible[s] {
                remap[s] = trimmed.add_state();
            }
        }
        trimmed.set_start(remap[self.start]);
        trimmed.set_final(remap[self.final_state]);
        let mut kept = Vec::new();
        for (id, a) in self.arcs.iter().enumerate() {
            if remap[a.src] != usize::MAX && remap[a.dst] != usize::MAX {
                trimmed.add_arc(Arc { src: remap[a.src], dst: remap[a.dst], ..*a });
                kept.push(id);
            }
        }
        (trimmed, kept)
    }

    /// Writes the text form: one `src dst ilabel olabel weight` line per arc,
    /// arcs of the start state first, then a line holding the final state.
    pub fn to_text(&self) -> String {
        let mut text = String::new();
        if self.is_empty() {
            return text;
        }
        let order = std::iter::once(self.start).chain((0..self.num_states()).filter(|&s| s != self.start));
        for s in order {
            for &id in &self.out[s] {
                let a = &self.arcs[id];
                let _ = writeln!(
                    text,
                    "{} {} {} {} {}",
                    a.src,
                    a.dst,
                    a.ilabel,
                    a.olabel,
                    format_number(a.weight)
                );
            }
        }
        let _ = writeln!(text, "{}", self.final_state);
        text
    }

    /// Parses the text form. The start state is the source of the first arc;
    /// vocabularies are the largest labels seen on each side.
    pub fn from_text<R: BufRead>(reader: R) -> Result<Fst> {
        let mut arcs = Vec::new();
        let mut final_state = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let lineno = i + 1;
            match fields.len() {
                0 => continue,
                1 => {
                    if final_state.is_some() {
                        return Err(Error::parse(lineno, "more than one final state"));
                    }
                    let s = fields[0]
                        .parse::<StateId>()
                        .map_err(|e| Error::parse(lineno, e))?;
                    final_state = Some(s);
                }
                5 => {
                    if final_state.is_some() {
                        return Err(Error::parse(lineno, "arc after the final-state line"));
                    }
                    let state = |f: &str| f.parse::<StateId>().map_err(|e| Error::parse(lineno, e));
                    let label = |f: &str| f.parse::<Label>().map_err(|e| Error::parse(lineno, e));
                    let weight = fields[4]
                        .parse::<f64>()
                        .map_err(|e| Error::parse(lineno, e))?;
                    arcs.push(Arc::new(
                        state(fields[0])?,
                        state(fields[1])?,
                        label(fields[2])?,
                        label(fields[3])?,
                        weight,
                    ));
                }
                n => return Err(Error::parse(lineno, format!("expected 1 or 5 fields, found {n}"))),
            }
        }
        let Some(final_state) = final_state else {
            if arcs.is_empty() {
                return Ok(Fst::empty());
            }
            return Err(Error::parse(0, "missing final-state line"));
        };
        let num_states = arcs
            .iter()
            .flat_map(|a| [a.src, a.dst])
            .chain([final_state])
            .max()
            .unwrap_or(0)
            + 1;
        let input_vocab = arcs.iter().map(|a| a.ilabel.max(0) as usize).max().unwrap_or(0);
        let output_vocab = arcs.iter().map(|a| a.olabel.max(0) as usize).max().unwrap_or(0);
        let mut fst = Fst::new(input_vocab, output_vocab);
        for _ in 0..num_states {
            fst.add_state();
        }
        fst.set_start(arcs.first().map_or(final_state, |a| a.src));
        fst.set_final(final_state);
        for a in arcs {
            fst.add_arc(a);
        }
        fst.validate()?;
        Ok(fst)
    }
}

/// Removes states that are not on any start-to-final path, renumbering the
/// survivors densely in their original order. Returns [`Fst::empty`] when the
/// language is empty.
pub fn connect(fst: &Fst) -> Fst {
    fst.connect_with_map().0
}

/// Composes `a` with `b`, matching `a`'s output labels against `b`'s input
/// labels.
///
/// `b` must be epsilon-free on its input side (linear label graphs are). An
/// epsilon-output arc of `a` advances `a` alone. Terminal arcs pair with
/// terminal arcs, so the composed final state is the pair of final states.
/// The result is connected.
pub fn compose(a: &Fst, b: &Fst) -> Result<Fst> {
    if a.is_empty() || b.is_empty() {
        return Ok(Fst::empty());
    }
    if a.output_vocab != b.input_vocab {
        return Err(Error::invalid(format!(
            "alphabet mismatch: left output vocabulary {} vs right input vocabulary {}",
            a.output_vocab, b.input_vocab
        )));
    }
    if b.arcs.iter().any(|arc| arc.ilabel == EPSILON) {
        return Err(Error::invalid("right operand has epsilon input arcs"));
    }

    let mut out = Fst::new(a.input_vocab, b.output_vocab);
    let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut lookup = |pair: (StateId, StateId), out: &mut Fst, queue: &mut VecDeque<_>| {
        *ids.entry(pair).or_insert_with(|| {
            let id = out.add_state();
            queue.push_back((pair, id));
            id
        })
    };

    let start = lookup((a.start, b.start), &mut out, &mut queue);
    out.set_start(start);
    let final_pair = (a.final_state, b.final_state);
    let mut final_id = None;

    while let Some(((qa, qb), src)) = queue.pop_front() {
        if (qa, qb) == final_pair {
            final_id = Some(src);
        }
        for &ia in &a.out[qa] {
            let arc_a = a.arcs[ia];
            if arc_a.ilabel != TERMINAL && arc_a.olabel == EPSILON {
                let dst = lookup((arc_a.dst, qb), &mut out, &mut queue);
                out.add_arc(Arc::new(src, dst, arc_a.ilabel, EPSILON, arc_a.weight));
                continue;
            }
            for &ib in &b.out[qb] {
                let arc_b = b.arcs[ib];
                let matched = if arc_a.ilabel == TERMINAL {
                    arc_b.ilabel == TERMINAL
                } else {
                    arc_b.ilabel == arc_a.olabel
                };
                if matched {
                    let dst = lookup((arc_a.dst, arc_b.dst), &mut out, &mut queue);
                    out.add_arc(Arc::new(
                        src,
                        dst,
                        arc_a.ilabel,
                        arc_b.olabel,
                        arc_a.weight + arc_b.weight,
                    ));
                }
            }
        }
    }

    match final_id {
        Some(f) => {
            out.set_final(f);
            Ok(connect(&out))
        }
        None => Ok(Fst::empty()),
    }
}
