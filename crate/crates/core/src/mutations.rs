//! Seeded mutation operators that derive a changed SUL from a model.
//!
//! Every operator works on complete machines and returns a complete machine
//! trimmed to its reachable part. Sub-mutations of the composite operators
//! draw from one RNG stream, so a spec plus an input machine fixes the result.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mealy::{language_equivalent, MealyError, MealyMachine, OutputId, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MutationOp {
    /// New initial state reached by a fresh symbol.
    NewInitial,
    /// Random initial state other than the current one.
    ChangeInitial,
    AddState,
    RemoveState,
    /// Redirect one transition so that the language changes.
    DivertTransition,
    ChangeOutput,
    RemoveSymbol,
    /// Attach a heavily mutated copy behind the model.
    Append,
    /// Attach the model behind a heavily mutated copy.
    Prepend,
    /// Add state, remove state, divert, change output.
    Several,
    /// [`MutationOp::ChangeInitial`] followed by [`MutationOp::Several`].
    SeveralNewInitial,
    /// Divert and change output, three times each.
    ManyTransitions,
    /// [`MutationOp::Several`] three times.
    Many,
    /// Dummy initial state choosing between the model and a mutated copy.
    Union,
}

impl MutationOp {
    pub const ALL: [MutationOp; 14] = [
        MutationOp::NewInitial,
        MutationOp::ChangeInitial,
        MutationOp::AddState,
        MutationOp::RemoveState,
        MutationOp::DivertTransition,
        MutationOp::ChangeOutput,
        MutationOp::RemoveSymbol,
        MutationOp::Append,
        MutationOp::Prepend,
        MutationOp::Several,
        MutationOp::SeveralNewInitial,
        MutationOp::ManyTransitions,
        MutationOp::Many,
        MutationOp::Union,
    ];

    /// 1-based operator number.
    pub fn number(self) -> usize {
        MutationOp::ALL.iter().position(|&o| o == self).unwrap() + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        n.checked_sub(1).and_then(|k| MutationOp::ALL.get(k).copied())
    }

    pub fn id(self) -> String {
        format!("mut{}", self.number())
    }
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mut{}", self.number())
    }
}

impl FromStr for MutationOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let digits = t.strip_prefix("mut").unwrap_or(&t);
        digits
            .parse::<usize>()
            .ok()
            .and_then(MutationOp::from_number)
            .ok_or_else(|| format!("unknown mutation `{s}` (expected mut1..mut14)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationSpec {
    pub op: MutationOp,
    pub seed: u64,
    /// Host state the copy is attached at (append/prepend). Defaults to a
    /// state farthest from the initial state.
    pub attach_index: Option<usize>,
    /// Redraws allowed when diverting a transition keeps the language.
    pub max_attempts: usize,
}

impl MutationSpec {
    pub fn new(op: MutationOp, seed: u64) -> Self {
        MutationSpec { op, seed, attach_index: None, max_attempts: DEFAULT_MAX_ATTEMPTS }
    }

    pub fn with_attach_index(mut self, n: usize) -> Self {
        self.attach_index = Some(n);
        self
    }
}

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MutationError {
    Mealy(MealyError),
    TooFewStates,
    TooFewInputs,
    /// Changing an output needs a second output symbol.
    TooFewOutputs,
    AttachIndexOutOfRange { index: usize, states: usize },
    /// Every diverted transition tried left the language unchanged.
    Exhausted(usize),
}

impl fmt::Display for MutationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationError::Mealy(e) => write!(f, "{e}"),
            MutationError::TooFewStates => f.write_str("removing a state needs at least two states"),
            MutationError::TooFewInputs => f.write_str("removing a symbol needs at least two inputs"),
            MutationError::TooFewOutputs => f.write_str("changing an output needs at least two outputs"),
            MutationError::AttachIndexOutOfRange { index, states } => {
                write!(f, "attach index {index} out of range for {states} states")
            }
            MutationError::Exhausted(n) => {
                write!(f, "no language-changing transition diversion found after {n} attempts")
            }
        }
    }
}

impl core::error::Error for MutationError {}

impl From<MealyError> for MutationError {
    fn from(e: MealyError) -> Self {
        MutationError::Mealy(e)
    }
}

/// Applies `spec` to the complete machine `m`.
pub fn mutate(m: &MealyMachine, spec: MutationSpec) -> Result<MealyMachine, MutationError> {
    m.check_complete()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out = apply(&Table::of(m), spec, &mut rng)?.into_machine()?;
    debug_assert!(out.is_complete());
    Ok(out)
}

/// A complete machine opened up for editing.
#[derive(Debug, Clone)]
struct Table {
    states: Vec<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    initial: StateId,
    delta: Vec<Vec<(StateId, OutputId)>>,
}

impl Table {
    fn of(m: &MealyMachine) -> Self {
        let delta = (0..m.num_states())
            .map(|q| (0..m.num_inputs()).map(|i| m.step(q, i).expect("complete")).collect())
            .collect();
        Table {
            states: m.states().to_vec(),
            inputs: m.inputs().to_vec(),
            outputs: m.outputs().to_vec(),
            initial: m.initial(),
            delta,
        }
    }

    fn into_machine(self) -> Result<MealyMachine, MealyError> {
        Ok(self.reachable()?.compact_outputs())
    }

    fn reachable(self) -> Result<MealyMachine, MealyError> {
        let table = self.delta.into_iter().flatten().map(Some).collect();
        Ok(MealyMachine::from_parts(self.states, self.inputs, self.outputs, self.initial, table)?
            .reachable_part())
    }

    /// Drops unreachable states but keeps the output alphabet.
    fn trimmed(self) -> Result<Table, MealyError> {
        Ok(Table::of(&self.reachable()?))
    }

    fn n(&self) -> usize {
        self.states.len()
    }

    fn k(&self) -> usize {
        self.inputs.len()
    }

    fn fresh_state(&self, base: &str) -> String {
        fresh_name(&self.states, base)
    }

    fn output_id(&mut self, label: &str) -> OutputId {
        match self.outputs.iter().position(|o| o == label) {
            Some(o) => o,
            None => {
                self.outputs.push(label.to_string());
                self.outputs.len() - 1
            }
        }
    }

    /// Appends `other`'s states (same alphabet) and returns their offset.
    fn absorb(&mut self, other: &Table) -> usize {
        let off = self.n();
        let omap: Vec<OutputId> = other.outputs.iter().map(|l| self.output_id(l)).collect();
        for (q, name) in other.states.iter().enumerate() {
            let mut label = format!("{name}'");
            while self.states.contains(&label) {
                label.push('\'');
            }
            self.states.push(label);
            self.delta.push(other.delta[q].iter().map(|&(t, o)| (t + off, omap[o])).collect());
        }
        off
    }
}

fn fresh_name(taken: &[String], base: &str) -> String {
    if !taken.iter().any(|s| s == base) {
        return base.to_string();
    }
    (0..).map(|k| format!("{base}_{k}")).find(|c| !taken.contains(c)).unwrap()
}

fn apply(t: &Table, spec: MutationSpec, rng: &mut ChaCha8Rng) -> Result<Table, MutationError> {
    use MutationOp::*;
    let sub = |op| MutationSpec { op, ..spec };
    // composites mutate the reachable part left by the previous step
    let then = |acc: Table, op, rng: &mut ChaCha8Rng| apply(&acc.trimmed()?, sub(op), rng);
    Ok(match spec.op {
        NewInitial => new_initial(t),
        ChangeInitial => {
            let mut out = t.clone();
            if t.n() > 1 {
                let q = rng.gen_range(0..t.n() - 1);
                out.initial = if q >= t.initial { q + 1 } else { q };
            }
            out
        }
        AddState => add_state(t, rng),
        RemoveState => remove_state(t, rng)?,
        DivertTransition => divert(t, spec.max_attempts, rng)?,
        ChangeOutput => change_output(t, rng)?,
        RemoveSymbol => {
            if t.k() < 2 {
                return Err(MutationError::TooFewInputs);
            }
            let drop = rng.gen_range(0..t.k());
            let mut out = t.clone();
            out.inputs.remove(drop);
            for row in &mut out.delta {
                row.remove(drop);
            }
            out
        }
        Append => {
            let q = attach_index(t, spec.attach_index)?;
            let copy = apply(t, sub(Many), rng)?;
            attach(t, q, &copy, rng)
        }
        Prepend => {
            let copy = apply(t, sub(Many), rng)?;
            let q = attach_index(&copy, spec.attach_index)?;
            attach(&copy, q, t, rng)
        }
        Several => [AddState, RemoveState, DivertTransition, ChangeOutput]
            .into_iter()
            .try_fold(t.clone(), |acc, op| then(acc, op, rng))?,
        SeveralNewInitial => {
            let moved = apply(t, sub(ChangeInitial), rng)?;
            then(moved, Several, rng)?
        }
        ManyTransitions => [DivertTransition, ChangeOutput]
            .into_iter()
            .cycle()
            .take(6)
            .try_fold(t.clone(), |acc, op| then(acc, op, rng))?,
        Many => (0..3).try_fold(t.clone(), |acc, _| then(acc, Several, rng))?,
        Union => {
            let copy = apply(t, sub(Many), rng)?;
            union(t, &copy)
        }
    })
}

/// Prepends a dummy state. `entries[j]` is the target of the j-th fresh
/// symbol; every other state loops on the fresh symbols with the output of
/// the first input at `entries[0]`.
fn with_dummy(t: &Table, entries: &[StateId]) -> Table {
    let mut out = t.clone();
    let first = entries[0];
    let loop_out = t.delta[first][0].1;
    let mut fresh = Vec::new();
    for j in 0..entries.len() {
        let name = fresh_name(&out.inputs, &format!("fresh_{j}"));
        out.inputs.push(name.clone());
        fresh.push(name);
    }
    for (q, row) in out.delta.iter_mut().enumerate() {
        row.extend(core::iter::repeat_n((q, loop_out), entries.len()));
    }
    let dummy = out.n();
    out.states.push(out.fresh_state("dummy"));
    let mut row: Vec<(StateId, OutputId)> = t.delta[first].iter().map(|&(_, o)| (dummy, o)).collect();
    row.extend(entries.iter().map(|&e| (e, loop_out)));
    out.delta.push(row);
    out.initial = dummy;
    out
}

fn new_initial(t: &Table) -> Table {
    with_dummy(t, &[t.initial])
}

fn union(t: &Table, copy: &Table) -> Table {
    let mut joined = t.clone();
    let off = joined.absorb(copy);
    with_dummy(&joined, &[t.initial, copy.initial + off])
}

fn add_state(t: &Table, rng: &mut ChaCha8Rng) -> Table {
    let mut out = t.clone();
    let q = out.n();
    let name = out.fresh_state(&format!("s{q}"));
    out.states.push(name);
    let from = rng.gen_range(0..t.n());
    let via = rng.gen_range(0..t.k());
    out.delta[from][via].0 = q;
    let row = (0..t.k())
        .map(|i| {
            let p = rng.gen_range(0..t.n());
            let o = if rng.gen_bool(0.8) { t.delta[p][i].1 } else { rng.gen_range(0..t.outputs.len()) };
            (p, o)
        })
        .collect();
    out.delta.push(row);
    out
}

fn remove_state(t: &Table, rng: &mut ChaCha8Rng) -> Result<Table, MutationError> {
    if t.n() < 2 {
        return Err(MutationError::TooFewStates);
    }
    let mut victim = rng.gen_range(0..t.n() - 1);
    if victim >= t.initial {
        victim += 1;
    }
    let mut out = t.clone();
    for p in 0..t.n() {
        for i in 0..t.k() {
            let (dst, o) = t.delta[p][i];
            if dst == victim {
                let next = t.delta[victim][i].0;
                out.delta[p][i] = (if next == victim { p } else { next }, o);
            }
        }
    }
    out.states.remove(victim);
    out.delta.remove(victim);
    let shift = |s: StateId| if s > victim { s - 1 } else { s };
    for row in &mut out.delta {
        for e in row.iter_mut() {
            e.0 = shift(e.0);
        }
    }
    out.initial = shift(out.initial);
    Ok(out)
}

/// Diverts one transition of `t`, redrawing from `t` until the language
/// changes.
fn divert(t: &Table, max_attempts: usize, rng: &mut ChaCha8Rng) -> Result<Table, MutationError> {
    let original = t.clone().into_machine()?;
    for _ in 0..max_attempts {
        let q = rng.gen_range(0..t.n());
        let target = rng.gen_range(0..t.n());
        let i = rng.gen_range(0..t.k());
        if t.delta[q][i].0 == target {
            continue;
        }
        let mut out = t.clone();
        out.delta[q][i].0 = target;
        let m = out.clone().into_machine()?;
        if !language_equivalent(&original, &m)?.is_equivalent() {
            return Ok(out);
        }
    }
    Err(MutationError::Exhausted(max_attempts))
}

fn change_output(t: &Table, rng: &mut ChaCha8Rng) -> Result<Table, MutationError> {
    if t.outputs.len() < 2 {
        return Err(MutationError::TooFewOutputs);
    }
    let q = rng.gen_range(0..t.n());
    let i = rng.gen_range(0..t.k());
    let old = t.delta[q][i].1;
    let mut o = rng.gen_range(0..t.outputs.len() - 1);
    if o >= old {
        o += 1;
    }
    let mut out = t.clone();
    out.delta[q][i].1 = o;
    Ok(out)
}

fn attach_index(host: &Table, index: Option<usize>) -> Result<StateId, MutationError> {
    match index {
        Some(n) if n < host.n() => Ok(n),
        Some(n) => Err(MutationError::AttachIndexOutOfRange { index: n, states: host.n() }),
        None => Ok(farthest(host)),
    }
}

/// The reachable state with the greatest BFS distance from the initial state;
/// ties go to the lowest index.
fn farthest(t: &Table) -> StateId {
    let mut dist = vec![usize::MAX; t.n()];
    dist[t.initial] = 0;
    let mut queue = alloc::collections::VecDeque::from([t.initial]);
    let mut best = t.initial;
    while let Some(q) = queue.pop_front() {
        if dist[q] > dist[best] || (dist[q] == dist[best] && q < best) {
            best = q;
        }
        for &(s, _) in &t.delta[q] {
            if dist[s] == usize::MAX {
                dist[s] = dist[q] + 1;
                queue.push_back(s);
            }
        }
    }
    best
}

/// Redirects a random input of `host`'s state `q` to `guest`'s initial state.
fn attach(host: &Table, q: StateId, guest: &Table, rng: &mut ChaCha8Rng) -> Table {
    let mut out = host.clone();
    let off = out.absorb(guest);
    let i = rng.gen_range(0..host.k());
    out.delta[q][i].0 = guest.initial + off;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mealy::{minimize_restricted, MealyBuilder};

    fn ring(n: usize) -> MealyMachine {
        let mut b = MealyBuilder::new();
        b.initial("c0");
        for s in 0..n {
            let out = if s == n - 1 { "1" } else { "0" };
            b.edge(&format!("c{s}"), "a", out, &format!("c{}", (s + 1) % n)).unwrap();
            b.edge(&format!("c{s}"), "b", "0", "c0").unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn every_operator_yields_complete_machine() {
        let m = crate::gen::random_machine(crate::gen::GenParams::new(8, 3, 3), 11);
        for op in MutationOp::ALL {
            for seed in 0..5 {
                let out = mutate(&m, MutationSpec::new(op, seed)).unwrap_or_else(|e| panic!("{op} {seed}: {e}"));
                assert!(out.is_complete(), "{op} seed {seed}");
                assert_eq!(out, mutate(&m, MutationSpec::new(op, seed)).unwrap());
            }
        }
    }

    #[test]
    fn ids_round_trip() {
        for op in MutationOp::ALL {
            assert_eq!(op.id().parse::<MutationOp>().unwrap(), op);
        }
        assert!("mut15".parse::<MutationOp>().is_err());
    }

    #[test]
    fn new_initial_adds_one_fresh_symbol() {
        let m = ring(3);
        let out = mutate(&m, MutationSpec::new(MutationOp::NewInitial, 0)).unwrap();
        assert_eq!(out.num_states(), 4);
        assert_eq!(out.inputs(), ["a", "b", "fresh_0"]);
        let f = out.input_index("fresh_0").unwrap();
        let a = out.input_index("a").unwrap();
        // dummy mirrors the old initial state's outputs and loops on them
        let d = out.initial();
        assert_eq!(out.step(d, a).unwrap().0, d);
        let (q0, _) = out.step(d, f).unwrap();
        assert_eq!(out.states()[q0], "c0");
        let (t, o) = out.step(q0, f).unwrap();
        assert_eq!((t, out.output_label(o)), (q0, "0"));
    }

    #[test]
    fn change_output_is_detected() {
        let m = ring(5);
        for seed in 0..10 {
            let out = mutate(&m, MutationSpec::new(MutationOp::ChangeOutput, seed)).unwrap();
            let eq = language_equivalent(&m, &out).unwrap();
            let crate::mealy::Equivalence::Counterexample(w) = eq else { panic!("equivalent") };
            let (a, b) = (m.walk_labels(m.initial(), &m.word_labels(&w)), out.walk_labels(out.initial(), &out.word_labels(&w)));
            let (a, b) = (a.unwrap().1, b.unwrap().1);
            assert_ne!(a.last(), b.last());
            assert_eq!(a[..a.len() - 1], b[..b.len() - 1]);
        }
    }

    #[test]
    fn divert_changes_language() {
        let m = ring(5);
        for seed in 0..10 {
            let out = mutate(&m, MutationSpec::new(MutationOp::DivertTransition, seed)).unwrap();
            assert!(!language_equivalent(&m, &out).unwrap().is_equivalent());
        }
    }

    #[test]
    fn divert_exhausts_on_single_state() {
        let mut b = MealyBuilder::new();
        b.edge("s", "a", "0", "s").unwrap();
        let m = b.build().unwrap();
        let spec = MutationSpec { max_attempts: 20, ..MutationSpec::new(MutationOp::DivertTransition, 1) };
        assert_eq!(mutate(&m, spec), Err(MutationError::Exhausted(20)));
    }

    #[test]
    fn remove_symbol_is_a_restriction() {
        let m = ring(4);
        let out = mutate(&m, MutationSpec::new(MutationOp::RemoveSymbol, 3)).unwrap();
        assert_eq!(out.num_inputs(), 1);
        let r = m.restrict(out.inputs()).reachable_part();
        assert!(language_equivalent(&r, &out).unwrap().is_equivalent());
    }

    #[test]
    fn append_stays_within_combined_size() {
        let m = crate::gen::random_machine(crate::gen::GenParams::new(6, 2, 3), 5);
        for seed in 0..5 {
            let many = mutate(&m, MutationSpec::new(MutationOp::Many, seed)).unwrap();
            let app = mutate(&m, MutationSpec::new(MutationOp::Append, seed)).unwrap();
            let labels: Vec<&str> = app.inputs().iter().map(|s| s.as_str()).collect();
            let min = minimize_restricted(&app, &labels).unwrap().0;
            assert!(min.num_states() <= m.num_states() + many.num_states());
        }
    }

    #[test]
    fn attach_index_is_checked() {
        let m = ring(3);
        let spec = MutationSpec::new(MutationOp::Append, 0).with_attach_index(3);
        assert_eq!(mutate(&m, spec), Err(MutationError::AttachIndexOutOfRange { index: 3, states: 3 }));
    }

    #[test]
    fn union_has_two_fresh_symbols() {
        let m = crate::gen::random_machine(crate::gen::GenParams::new(6, 2, 3), 2);
        let mut ok = 0;
        for seed in 0..10 {
            // tiny machines may collapse to a state no diversion can change
            let Ok(out) = mutate(&m, MutationSpec::new(MutationOp::Union, seed)) else { continue };
            assert!(out.input_index("fresh_0").is_some() && out.input_index("fresh_1").is_some());
            ok += 1;
        }
        assert!(ok > 5);
    }

    #[test]
    fn change_initial_on_ring_keeps_states() {
        let m = ring(7);
        let out = mutate(&m, MutationSpec::new(MutationOp::ChangeInitial, 4)).unwrap();
        assert_eq!(out.num_states(), 7);
    }
}
