//! Per-run precomputation over the reference models.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;

use super::refine::{family_from, quotient, sort_shortlex, state_cover, Refinement, SeparatingFamily};
use super::{disjoint_union, InputId, MealyError, MealyMachine, StateId, Word};

/// One reference model inside the merged machine.
#[derive(Debug, Clone)]
pub struct RefScope {
    /// First merged state of this reference.
    pub offset: usize,
    /// Number of equivalence classes after restriction and minimization.
    pub len: usize,
    /// Merged id of this reference's initial state.
    pub initial: StateId,
    /// `inputs[i]` iff SUL input `i` belongs to the reference alphabet.
    pub inputs: Vec<bool>,
    /// Access sequences in BFS order, over SUL input indices.
    pub cover: Vec<(Word, StateId)>,
}

impl RefScope {
    pub fn contains(&self, p: StateId) -> bool {
        p >= self.offset && p < self.offset + self.len
    }
}

/// References restricted to the SUL alphabet, minimized and merged into one
/// partial machine indexed like the SUL's inputs.
///
/// The separator table covers every total-apart pair of the merged machine.
/// Callers that need same-reference separators (rebuilding) pick their pairs
/// inside one scope.
#[derive(Debug, Clone)]
pub struct ReferencePack {
    machine: MealyMachine,
    scopes: Vec<RefScope>,
    scope_of: Vec<usize>,
    cover: Vec<Word>,
    cover_set: HashSet<Word>,
    family: SeparatingFamily,
    sep: Vec<Option<Word>>,
}

/// Builds the pack for `refs` against the SUL alphabet `sul_inputs` (whose
/// order is the input order used for covers and separator tie-breaking).
pub fn build_reference_pack<S: AsRef<str>>(
    refs: &[MealyMachine],
    sul_inputs: &[S],
) -> Result<ReferencePack, MealyError> {
    let alphabet: Vec<String> = sul_inputs.iter().map(|s| String::from(s.as_ref())).collect();
    if refs.is_empty() {
        return Ok(ReferencePack::empty(&alphabet));
    }
    let mut minimized = Vec::with_capacity(refs.len());
    for r in refs {
        r.check_complete()?;
        let restricted = r.restrict(&alphabet).reachable_part();
        let (q, _) = quotient(&restricted);
        minimized.push(q.reachable_part().over_alphabet(&alphabet).compact_outputs());
    }
    let (machine, offsets) = disjoint_union(&minimized);
    let mut scopes = Vec::with_capacity(refs.len());
    let mut scope_of = vec![0; machine.num_states()];
    for (j, m) in minimized.iter().enumerate() {
        let off = offsets[j];
        for s in scope_of.iter_mut().skip(off).take(m.num_states()) {
            *s = j;
        }
        let inputs = (0..alphabet.len())
            .map(|i| refs[j].input_index(&alphabet[i]).is_some())
            .collect();
        let cover = state_cover(m).into_iter().map(|(w, q)| (w, q + off)).collect();
        scopes.push(RefScope { offset: off, len: m.num_states(), initial: m.initial() + off, inputs, cover });
    }
    let mut cover: Vec<Word> = Vec::new();
    for s in &scopes {
        for (w, _) in &s.cover {
            for k in 0..=w.len() {
                cover.push(w[..k].to_vec());
            }
        }
    }
    sort_shortlex(&mut cover);
    let cover_set = cover.iter().cloned().collect();
    let refinement = Refinement::new(&machine);
    let family = family_from(&machine, &refinement);
    let n = machine.num_states();
    let mut sep = vec![None; n * n];
    for p in 0..n {
        for q in p + 1..n {
            if let Some(w) = refinement.separator(&machine, p, q) {
                sep[p * n + q] = Some(w.clone());
                sep[q * n + p] = Some(w);
            }
        }
    }
    Ok(ReferencePack { machine, scopes, scope_of, cover, cover_set, family, sep })
}

impl ReferencePack {
    /// A pack without references; every adaptive rule is inapplicable.
    pub fn empty<S: AsRef<str>>(sul_inputs: &[S]) -> Self {
        let machine = MealyMachine {
            states: Vec::new(),
            inputs: sul_inputs.iter().map(|s| String::from(s.as_ref())).collect(),
            outputs: Vec::new(),
            initial: 0,
            table: Vec::new(),
        };
        ReferencePack {
            machine,
            scopes: Vec::new(),
            scope_of: Vec::new(),
            cover: Vec::new(),
            cover_set: HashSet::new(),
            family: SeparatingFamily::empty(),
            sep: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    /// The merged reference machine over the SUL alphabet.
    pub fn machine(&self) -> &MealyMachine {
        &self.machine
    }

    pub fn num_states(&self) -> usize {
        self.scope_of.len()
    }

    /// Total number of reference equivalence classes (the `o` of the bounds).
    pub fn class_count(&self) -> usize {
        self.num_states()
    }

    pub fn scopes(&self) -> &[RefScope] {
        &self.scopes
    }

    pub fn scope_of(&self, p: StateId) -> usize {
        self.scope_of[p]
    }

    #[inline]
    pub fn step(&self, p: StateId, i: InputId) -> Option<(StateId, usize)> {
        self.machine.step(p, i)
    }

    /// State reached by `w` from the initial state of reference `scope`.
    pub fn reach(&self, scope: usize, w: &[InputId]) -> Option<StateId> {
        self.machine.target(self.scopes[scope].initial, w)
    }

    /// Union of the reference covers, prefix-closed, shortlex order.
    pub fn cover(&self) -> &[Word] {
        &self.cover
    }

    pub fn in_cover(&self, w: &[InputId]) -> bool {
        self.cover_set.contains(w)
    }

    pub fn identifiers(&self, p: StateId) -> &[Word] {
        self.family.identifiers(p)
    }

    pub fn family(&self) -> &SeparatingFamily {
        &self.family
    }

    /// The memoized separator of `p` and `q`: the shortest, then
    /// lexicographically least, element of `W_p ∩ W_q` that separates them.
    pub fn sep(&self, p: StateId, q: StateId) -> Result<&Word, MealyError> {
        self.sep_opt(p, q).ok_or(MealyError::NotApart(p, q))
    }

    /// Like [`sep`](Self::sep) but insisting on a same-reference pair.
    pub fn sep_same_scope(&self, p: StateId, q: StateId) -> Result<&Word, MealyError> {
        if self.scope_of[p] != self.scope_of[q] {
            return Err(MealyError::CrossScope(p, q));
        }
        self.sep(p, q)
    }

    #[inline]
    pub fn sep_opt(&self, p: StateId, q: StateId) -> Option<&Word> {
        self.sep[p * self.num_states() + q].as_ref()
    }
}

impl SeparatingFamily {
    fn empty() -> Self {
        SeparatingFamily::from_words(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{total_apart, MealyBuilder};
    use super::*;

    fn chain() -> MealyMachine {
        let mut b = MealyBuilder::new();
        b.initial("q0");
        b.edge("q0", "a", "0", "q1").unwrap();
        b.edge("q1", "a", "0", "q2").unwrap();
        b.edge("q2", "a", "1", "q2").unwrap();
        b.edge("q0", "b", "0", "q0").unwrap();
        b.edge("q1", "b", "0", "q0").unwrap();
        b.edge("q2", "b", "0", "q0").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn empty_pack() {
        let p = build_reference_pack(&[], &["a"]).unwrap();
        assert!(p.is_empty());
        assert!(p.cover().is_empty());
        assert_eq!(p.num_states(), 0);
    }

    #[test]
    fn self_pack_cover_counts_classes() {
        let m = chain();
        let p = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        assert_eq!(p.cover().len(), 3);
        assert!(p.in_cover(&[0, 0]));
        let dup = build_reference_pack(&[m.clone(), m.clone()], m.inputs()).unwrap();
        assert_eq!(dup.cover(), p.cover());
    }

    #[test]
    fn sep_is_symmetric_and_separates() {
        let m = chain();
        let p = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    assert!(p.sep(a, b).is_err());
                    continue;
                }
                let w = p.sep(a, b).unwrap();
                assert_eq!(w, p.sep(b, a).unwrap());
                assert!(p.identifiers(a).contains(w) && p.identifiers(b).contains(w));
                let (_, oa) = p.machine().walk(a, w).unwrap();
                let (_, ob) = p.machine().walk(b, w).unwrap();
                assert_ne!(oa, ob);
            }
        }
    }

    #[test]
    fn references_with_different_alphabets_are_total_apart() {
        let mut b1 = MealyBuilder::new();
        b1.edge("x", "a", "0", "x").unwrap();
        b1.edge("x", "b", "0", "x").unwrap();
        let mut b2 = MealyBuilder::new();
        b2.edge("y", "a", "0", "y").unwrap();
        let (r1, r2) = (b1.build().unwrap(), b2.build().unwrap());
        let p = build_reference_pack(&[r1, r2], &["a", "b", "c"]).unwrap();
        assert_eq!(p.num_states(), 2);
        assert_ne!(p.scope_of(0), p.scope_of(1));
        assert_eq!(p.sep(0, 1).unwrap(), &vec![1]);
        assert!(p.sep_same_scope(0, 1).is_err());
        assert_eq!(total_apart(p.machine(), 0, p.machine(), 1), Some(vec![1]));
        assert_eq!(p.scopes()[1].inputs, vec![true, false, false]);
    }
}
