//! Deterministic, possibly partial Mealy machines.
//!
//! States, inputs and outputs are dense indices into per-machine label
//! tables. Two machines are compared through their labels, never through raw
//! indices.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

mod pack;
mod refine;

pub use pack::{build_reference_pack, ReferencePack, RefScope};
pub use refine::{minimize_restricted, separating_family, state_cover, SeparatingFamily};

pub type StateId = usize;
pub type InputId = usize;
pub type OutputId = usize;

/// An input word, as indices into some machine's (or learner's) input table.
pub type Word = Vec<InputId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MealyError {
    /// Two different transitions for the same (state, input).
    Nondeterministic { state: String, input: String },
    UnknownState(String),
    UnknownInput(String),
    /// A machine that must be complete is missing a transition.
    Incomplete { state: String, input: String },
    AlphabetMismatch,
    NoInitialState,
    /// `sep` was asked for a pair that is not apart.
    NotApart(StateId, StateId),
    /// `sep` was asked for states of different references.
    CrossScope(StateId, StateId),
}

impl fmt::Display for MealyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MealyError::Nondeterministic { state, input } => {
                write!(f, "nondeterministic transition from `{state}` on `{input}`")
            }
            MealyError::UnknownState(s) => write!(f, "unknown state `{s}`"),
            MealyError::UnknownInput(s) => write!(f, "unknown input `{s}`"),
            MealyError::Incomplete { state, input } => {
                write!(f, "machine is not complete: no transition from `{state}` on `{input}`")
            }
            MealyError::AlphabetMismatch => f.write_str("input alphabets differ"),
            MealyError::NoInitialState => f.write_str("machine has no initial state"),
            MealyError::NotApart(p, q) => write!(f, "states {p} and {q} are not apart"),
            MealyError::CrossScope(p, q) => {
                write!(f, "states {p} and {q} belong to different reference models")
            }
        }
    }
}

impl core::error::Error for MealyError {}

/// A deterministic Mealy machine whose transition and output functions share
/// one (possibly partial) domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MealyMachine {
    states: Vec<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    initial: StateId,
    // row-major: states x inputs
    table: Vec<Option<(StateId, OutputId)>>,
}

impl MealyMachine {
    /// Builds a machine from raw tables. `table` is row-major over
    /// `states.len() x inputs.len()`.
    pub fn from_parts(
        states: Vec<String>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        initial: StateId,
        table: Vec<Option<(StateId, OutputId)>>,
    ) -> Result<Self, MealyError> {
        if states.is_empty() || initial >= states.len() {
            return Err(MealyError::NoInitialState);
        }
        assert_eq!(table.len(), states.len() * inputs.len(), "table shape");
        for &(t, o) in table.iter().flatten() {
            if t >= states.len() {
                return Err(MealyError::UnknownState(t.to_string()));
            }
            assert!(o < outputs.len(), "output index out of range");
        }
        Ok(MealyMachine { states, inputs, outputs, initial, table })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn input_index(&self, label: &str) -> Option<InputId> {
        self.inputs.iter().position(|i| i == label)
    }

    pub fn state_index(&self, label: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == label)
    }

    #[inline]
    pub fn step(&self, q: StateId, i: InputId) -> Option<(StateId, OutputId)> {
        self.table[q * self.inputs.len() + i]
    }

    pub fn output_label(&self, o: OutputId) -> &str {
        &self.outputs[o]
    }

    /// Number of defined (state, input) pairs.
    pub fn num_transitions(&self) -> usize {
        self.table.iter().filter(|t| t.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.table.iter().all(Option::is_some)
    }

    /// Returns the first missing transition, if any.
    pub fn check_complete(&self) -> Result<(), MealyError> {
        for q in 0..self.num_states() {
            for i in 0..self.num_inputs() {
                if self.step(q, i).is_none() {
                    return Err(MealyError::Incomplete {
                        state: self.states[q].clone(),
                        input: self.inputs[i].clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Runs `word` from `q`; `None` at the first undefined step or input index
    /// outside the alphabet.
    pub fn walk(&self, q: StateId, word: &[InputId]) -> Option<(StateId, Vec<OutputId>)> {
        let mut cur = q;
        let mut outs = Vec::with_capacity(word.len());
        for &i in word {
            if i >= self.inputs.len() {
                return None;
            }
            let (t, o) = self.step(cur, i)?;
            outs.push(o);
            cur = t;
        }
        Some((cur, outs))
    }

    /// Like [`walk`](Self::walk) but over input labels; unknown labels are
    /// undefined steps.
    pub fn walk_labels<S: AsRef<str>>(
        &self,
        q: StateId,
        word: &[S],
    ) -> Option<(StateId, Vec<&str>)> {
        let mut cur = q;
        let mut outs = Vec::with_capacity(word.len());
        for sym in word {
            let i = self.input_index(sym.as_ref())?;
            let (t, o) = self.step(cur, i)?;
            outs.push(self.outputs[o].as_str());
            cur = t;
        }
        Some((cur, outs))
    }

    /// Final state only.
    pub fn target(&self, q: StateId, word: &[InputId]) -> Option<StateId> {
        let mut cur = q;
        for &i in word {
            cur = self.step(cur, i)?.0;
        }
        Some(cur)
    }

    pub fn word_labels(&self, word: &[InputId]) -> Vec<String> {
        word.iter().map(|&i| self.inputs[i].clone()).collect()
    }

    /// Restricts the machine to the inputs it shares with `keep`. State set is
    /// unchanged; input order follows `self`.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> MealyMachine {
        let kept: Vec<InputId> = (0..self.num_inputs())
            .filter(|&i| keep.iter().any(|k| k.as_ref() == self.inputs[i]))
            .collect();
        self.project(&kept)
    }

    /// Machine over exactly the listed inputs of `self` (in that order).
    fn project(&self, kept: &[InputId]) -> MealyMachine {
        let mut table = Vec::with_capacity(self.num_states() * kept.len());
        for q in 0..self.num_states() {
            for &i in kept {
                table.push(self.step(q, i));
            }
        }
        MealyMachine {
            states: self.states.clone(),
            inputs: kept.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: self.outputs.clone(),
            initial: self.initial,
            table,
        }
    }

    /// Re-indexes the machine over `alphabet`. Labels of `alphabet` missing
    /// from `self` become undefined inputs; inputs of `self` missing from
    /// `alphabet` are dropped.
    pub fn over_alphabet<S: AsRef<str>>(&self, alphabet: &[S]) -> MealyMachine {
        let map: Vec<Option<InputId>> =
            alphabet.iter().map(|a| self.input_index(a.as_ref())).collect();
        let mut table = Vec::with_capacity(self.num_states() * map.len());
        for q in 0..self.num_states() {
            for m in &map {
                table.push(m.and_then(|i| self.step(q, i)));
            }
        }
        MealyMachine {
            states: self.states.clone(),
            inputs: alphabet.iter().map(|a| a.as_ref().to_string()).collect(),
            outputs: self.outputs.clone(),
            initial: self.initial,
            table,
        }
    }

    /// Reorders the input table. Inputs named in `order` come first in that
    /// order, the rest follow lexicographically.
    pub fn with_input_order<S: AsRef<str>>(&self, order: &[S]) -> MealyMachine {
        let mut labels: Vec<String> = Vec::new();
        for o in order {
            if self.input_index(o.as_ref()).is_some() && !labels.iter().any(|l| l == o.as_ref()) {
                labels.push(o.as_ref().to_string());
            }
        }
        let mut rest: Vec<String> =
            self.inputs.iter().filter(|i| !labels.contains(i)).cloned().collect();
        rest.sort();
        labels.extend(rest);
        self.over_alphabet(&labels)
    }

    /// Inputs sorted lexicographically (the default input order).
    pub fn with_sorted_inputs(&self) -> MealyMachine {
        let none: [&str; 0] = [];
        self.with_input_order(&none)
    }

    pub fn with_initial(&self, q: StateId) -> MealyMachine {
        let mut m = self.clone();
        m.initial = q;
        m
    }

    /// States reachable from the initial state, in BFS order over inputs.
    pub fn reachable_states(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut head = 0;
        while head < order.len() {
            let q = order[head];
            head += 1;
            for i in 0..self.num_inputs() {
                if let Some((t, _)) = self.step(q, i) {
                    if !seen[t] {
                        seen[t] = true;
                        order.push(t);
                    }
                }
            }
        }
        order
    }

    /// The reachable part; states renumbered in BFS order (initial first).
    pub fn reachable_part(&self) -> MealyMachine {
        let order = self.reachable_states();
        if order.len() == self.num_states() && self.initial == 0 {
            let mut ident = true;
            for (k, &q) in order.iter().enumerate() {
                ident &= k == q;
            }
            if ident {
                return self.clone();
            }
        }
        let mut remap = vec![usize::MAX; self.num_states()];
        for (k, &q) in order.iter().enumerate() {
            remap[q] = k;
        }
        let k = self.num_inputs();
        let mut table = Vec::with_capacity(order.len() * k);
        for &q in &order {
            for i in 0..k {
                table.push(self.step(q, i).map(|(t, o)| (remap[t], o)));
            }
        }
        MealyMachine {
            states: order.iter().map(|&q| self.states[q].clone()).collect(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            initial: 0,
            table,
        }
    }

    /// Drops output labels that no transition uses.
    pub fn compact_outputs(&self) -> MealyMachine {
        let mut used = vec![false; self.outputs.len()];
        for &(_, o) in self.table.iter().flatten() {
            used[o] = true;
        }
        let mut remap = vec![usize::MAX; self.outputs.len()];
        let mut outputs = Vec::new();
        for (o, u) in used.iter().enumerate() {
            if *u {
                remap[o] = outputs.len();
                outputs.push(self.outputs[o].clone());
            }
        }
        MealyMachine {
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            outputs,
            initial: self.initial,
            table: self.table.iter().map(|t| t.map(|(s, o)| (s, remap[o]))).collect(),
        }
    }

    /// All transitions as label tuples `(from, input, output, to)`.
    pub fn transitions(&self) -> impl Iterator<Item = (&str, &str, &str, &str)> + '_ {
        (0..self.num_states()).flat_map(move |q| {
            (0..self.num_inputs()).filter_map(move |i| {
                self.step(q, i).map(|(t, o)| {
                    (
                        self.states[q].as_str(),
                        self.inputs[i].as_str(),
                        self.outputs[o].as_str(),
                        self.states[t].as_str(),
                    )
                })
            })
        })
    }
}

/// Incremental construction from labelled transitions.
#[derive(Debug, Default, Clone)]
pub struct MealyBuilder {
    states: Vec<String>,
    state_idx: BTreeMap<String, StateId>,
    inputs: Vec<String>,
    input_idx: BTreeMap<String, InputId>,
    outputs: Vec<String>,
    output_idx: BTreeMap<String, OutputId>,
    edges: BTreeMap<(StateId, InputId), (StateId, OutputId)>,
    initial: Option<StateId>,
}

impl MealyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(&s) = self.state_idx.get(name) {
            return s;
        }
        let s = self.states.len();
        self.states.push(name.to_string());
        self.state_idx.insert(name.to_string(), s);
        s
    }

    pub fn input(&mut self, name: &str) -> InputId {
        if let Some(&i) = self.input_idx.get(name) {
            return i;
        }
        let i = self.inputs.len();
        self.inputs.push(name.to_string());
        self.input_idx.insert(name.to_string(), i);
        i
    }

    pub fn output(&mut self, name: &str) -> OutputId {
        if let Some(&o) = self.output_idx.get(name) {
            return o;
        }
        let o = self.outputs.len();
        self.outputs.push(name.to_string());
        self.output_idx.insert(name.to_string(), o);
        o
    }

    pub fn initial(&mut self, name: &str) -> &mut Self {
        let s = self.state(name);
        self.initial = Some(s);
        self
    }

    /// Adds `from --input/output--> to`. Re-adding an identical edge is a
    /// no-op; a conflicting one is an error.
    pub fn edge(
        &mut self,
        from: &str,
        input: &str,
        output: &str,
        to: &str,
    ) -> Result<&mut Self, MealyError> {
        let f = self.state(from);
        let t = self.state(to);
        let i = self.input(input);
        let o = self.output(output);
        match self.edges.get(&(f, i)) {
            Some(&existing) if existing != (t, o) => {
                return Err(MealyError::Nondeterministic {
                    state: from.to_string(),
                    input: input.to_string(),
                })
            }
            _ => {
                self.edges.insert((f, i), (t, o));
            }
        }
        Ok(self)
    }

    /// Uses the first declared state when no initial state was set.
    pub fn build(&self) -> Result<MealyMachine, MealyError> {
        let initial = match self.initial {
            Some(q) => q,
            None if !self.states.is_empty() => 0,
            None => return Err(MealyError::NoInitialState),
        };
        let k = self.inputs.len();
        let mut table = vec![None; self.states.len() * k];
        for (&(f, i), &v) in &self.edges {
            table[f * k + i] = Some(v);
        }
        MealyMachine::from_parts(
            self.states.clone(),
            self.inputs.clone(),
            self.outputs.clone(),
            initial,
            table,
        )
    }
}

/// Outcome of an equivalence check between two complete machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    /// A shortest distinguishing word, indexed over the first machine's inputs.
    Counterexample(Word),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Maps every input of `a` to the equally-labelled input of `b`.
fn input_map(a: &MealyMachine, b: &MealyMachine) -> Vec<Option<InputId>> {
    a.inputs.iter().map(|l| b.input_index(l)).collect()
}

/// `out_map[o]` is the output of `b` with the same label as output `o` of `a`.
pub(crate) fn output_map(a: &MealyMachine, b: &MealyMachine) -> Vec<Option<OutputId>> {
    a.outputs.iter().map(|l| b.outputs.iter().position(|m| m == l)).collect()
}

/// Breadth-first search over the product of two complete machines over the
/// same input alphabet; returns a shortest word on which the output words
/// differ.
pub fn language_equivalent(
    m1: &MealyMachine,
    m2: &MealyMachine,
) -> Result<Equivalence, MealyError> {
    if m1.num_inputs() != m2.num_inputs() {
        return Err(MealyError::AlphabetMismatch);
    }
    let imap = input_map(m1, m2);
    if imap.iter().any(Option::is_none) {
        return Err(MealyError::AlphabetMismatch);
    }
    m1.check_complete()?;
    m2.check_complete()?;
    let omap = output_map(m1, m2);
    let n2 = m2.num_states();
    let mut pred: Vec<Option<(usize, InputId)>> = vec![None; m1.num_states() * n2];
    let mut seen = vec![false; m1.num_states() * n2];
    let start = m1.initial * n2 + m2.initial;
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        let (p, q) = (cur / n2, cur % n2);
        for (i, j) in imap.iter().enumerate() {
            let (p2, o1) = m1.step(p, i).expect("complete");
            let (q2, o2) = m2.step(q, j.unwrap()).expect("complete");
            if omap[o1] != Some(o2) {
                let mut word = vec![i];
                let mut at = cur;
                while let Some((prev, j)) = pred[at] {
                    word.push(j);
                    at = prev;
                }
                word.reverse();
                return Ok(Equivalence::Counterexample(word));
            }
            let next = p2 * n2 + q2;
            if !seen[next] {
                seen[next] = true;
                pred[next] = Some((cur, i));
                queue.push_back(next);
            }
        }
    }
    Ok(Equivalence::Equivalent)
}

/// Total apartness between `p` of `m1` and `q` of `m2` over their common
/// inputs: a word on which the outputs differ, or after which exactly one side
/// is undefined. The witness is indexed over `m1`'s inputs and is shortest.
pub fn total_apart(m1: &MealyMachine, p: StateId, m2: &MealyMachine, q: StateId) -> Option<Word> {
    let common: Vec<(InputId, InputId)> = input_map(m1, m2)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let omap = output_map(m1, m2);
    let n2 = m2.num_states();
    let mut pred: BTreeMap<usize, (usize, InputId)> = BTreeMap::new();
    let start = p * n2 + q;
    let mut seen = BTreeMap::from([(start, ())]);
    let mut queue = VecDeque::from([start]);
    let rebuild = |pred: &BTreeMap<usize, (usize, InputId)>, mut at: usize, last: InputId| {
        let mut word = vec![last];
        while let Some(&(prev, j)) = pred.get(&at) {
            word.push(j);
            at = prev;
        }
        word.reverse();
        word
    };
    while let Some(cur) = queue.pop_front() {
        let (a, b) = (cur / n2, cur % n2);
        for &(i, j) in &common {
            match (m1.step(a, i), m2.step(b, j)) {
                (None, None) => {}
                (Some(_), None) | (None, Some(_)) => return Some(rebuild(&pred, cur, i)),
                (Some((a2, o1)), Some((b2, o2))) => {
                    if omap[o1] != Some(o2) {
                        return Some(rebuild(&pred, cur, i));
                    }
                    let next = a2 * n2 + b2;
                    if seen.insert(next, ()).is_none() {
                        pred.insert(next, (cur, i));
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    None
}

/// Plain apartness between states of two partial machines over their common
/// inputs (only commonly defined words count). Shortest witness over `m1`'s
/// inputs.
pub fn apart_states(m1: &MealyMachine, p: StateId, m2: &MealyMachine, q: StateId) -> Option<Word> {
    let common: Vec<(InputId, InputId)> = input_map(m1, m2)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let omap = output_map(m1, m2);
    let n2 = m2.num_states();
    let start = p * n2 + q;
    let mut pred: BTreeMap<usize, (usize, InputId)> = BTreeMap::new();
    let mut seen = BTreeMap::from([(start, ())]);
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        let (a, b) = (cur / n2, cur % n2);
        for &(i, j) in &common {
            if let (Some((a2, o1)), Some((b2, o2))) = (m1.step(a, i), m2.step(b, j)) {
                if omap[o1] != Some(o2) {
                    let mut word = vec![i];
                    let mut at = cur;
                    while let Some(&(prev, k)) = pred.get(&at) {
                        word.push(k);
                        at = prev;
                    }
                    word.reverse();
                    return Some(word);
                }
                let next = a2 * n2 + b2;
                if seen.insert(next, ()).is_none() {
                    pred.insert(next, (cur, i));
                    queue.push_back(next);
                }
            }
        }
    }
    None
}

/// Disjoint union of machines over a shared alphabet; state `s` of machine
/// `k` becomes `offsets[k] + s`. The initial state is the first machine's.
pub(crate) fn disjoint_union(machines: &[MealyMachine]) -> (MealyMachine, Vec<usize>) {
    let inputs = machines[0].inputs.clone();
    let mut outputs: Vec<String> = Vec::new();
    let mut states = Vec::new();
    let mut table = Vec::new();
    let mut offsets = Vec::new();
    for (k, m) in machines.iter().enumerate() {
        debug_assert_eq!(m.inputs, inputs);
        let omap: Vec<OutputId> = m
            .outputs
            .iter()
            .map(|l| match outputs.iter().position(|x| x == l) {
                Some(o) => o,
                None => {
                    outputs.push(l.clone());
                    outputs.len() - 1
                }
            })
            .collect();
        let off = states.len();
        offsets.push(off);
        for q in 0..m.num_states() {
            states.push(alloc::format!("r{k}:{}", m.states[q]));
            for i in 0..inputs.len() {
                table.push(m.step(q, i).map(|(t, o)| (t + off, omap[o])));
            }
        }
    }
    let initial = 0;
    (MealyMachine { states, inputs, outputs, initial, table }, offsets)
}
