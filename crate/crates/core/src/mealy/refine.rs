//! Moore-style partition refinement with recorded rounds.
//!
//! Keeping the class of every state after every round lets us read off, for
//! any pair, the length of its shortest separator (the first round in which
//! the pair splits) and rebuild the lexicographically least one.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{MealyError, MealyMachine, StateId, Word};

const BOTTOM: usize = usize::MAX;

/// Refinement history of one machine. Undefined inputs are treated as the
/// pseudo-output ⊥, so split rounds describe total apartness; on complete
/// machines that coincides with plain apartness.
#[derive(Debug, Clone)]
pub(crate) struct Refinement {
    // rounds[k][q]: class of q after k rounds; rounds[0] is the trivial partition
    rounds: Vec<Vec<usize>>,
}

impl Refinement {
    pub(crate) fn new(m: &MealyMachine) -> Self {
        let n = m.num_states();
        let k = m.num_inputs();
        let mut rounds = vec![vec![0usize; n]];
        let mut count = usize::from(n > 0);
        loop {
            let prev = rounds.last().unwrap();
            let mut ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut next = Vec::with_capacity(n);
            for q in 0..n {
                let mut sig = Vec::with_capacity(1 + 2 * k);
                sig.push(prev[q]);
                for i in 0..k {
                    match m.step(q, i) {
                        Some((t, o)) => {
                            sig.push(o);
                            sig.push(prev[t]);
                        }
                        None => {
                            sig.push(BOTTOM);
                            sig.push(BOTTOM);
                        }
                    }
                }
                let fresh = ids.len();
                next.push(*ids.entry(sig).or_insert(fresh));
            }
            let new_count = ids.len();
            rounds.push(next);
            if new_count == count {
                // the last two rounds describe the same partition
                rounds.pop();
                break;
            }
            count = new_count;
        }
        Refinement { rounds }
    }

    /// Final class of each state.
    pub(crate) fn classes(&self) -> &[usize] {
        self.rounds.last().unwrap()
    }

    pub(crate) fn num_classes(&self) -> usize {
        self.classes().iter().copied().max().map_or(0, |c| c + 1)
    }

    /// First round in which `p` and `q` fall into different classes.
    pub(crate) fn split_round(&self, p: StateId, q: StateId) -> Option<usize> {
        (1..self.rounds.len()).find(|&k| self.rounds[k][p] != self.rounds[k][q])
    }

    /// The lexicographically least among the shortest (total) separators of
    /// `p` and `q`, or `None` if they are not (total-)apart.
    pub(crate) fn separator(&self, m: &MealyMachine, p: StateId, q: StateId) -> Option<Word> {
        let mut k = self.split_round(p, q)?;
        let (mut a, mut b) = (p, q);
        let mut word = Vec::with_capacity(k);
        loop {
            if k == 1 {
                let i = (0..m.num_inputs())
                    .find(|&i| {
                        let (x, y) = (m.step(a, i), m.step(b, i));
                        x.map(|t| t.1) != y.map(|t| t.1)
                    })
                    .expect("pair split in round 1 differs on some input");
                word.push(i);
                return Some(word);
            }
            let prev = &self.rounds[k - 1];
            let (i, ta, tb) = (0..m.num_inputs())
                .find_map(|i| match (m.step(a, i), m.step(b, i)) {
                    (Some((ta, _)), Some((tb, _))) if prev[ta] != prev[tb] => Some((i, ta, tb)),
                    _ => None,
                })
                .expect("pair split in round k has successors split in round k-1");
            word.push(i);
            a = ta;
            b = tb;
            k -= 1;
        }
    }
}

/// Per-state identifier sets. `W_p` holds the canonical separator of `p` and
/// every state it is (total-)apart from, so any apart pair shares at least
/// that separator.
#[derive(Debug, Clone)]
pub struct SeparatingFamily {
    words: Vec<Vec<Word>>,
}

impl SeparatingFamily {
    pub(crate) fn from_words(words: Vec<Vec<Word>>) -> Self {
        SeparatingFamily { words }
    }

    pub fn identifiers(&self, q: StateId) -> &[Word] {
        &self.words[q]
    }

    pub fn num_states(&self) -> usize {
        self.words.len()
    }

    /// Union of all identifiers, shortlex sorted.
    pub fn union(&self) -> Vec<Word> {
        let mut all: Vec<Word> = self.words.iter().flatten().cloned().collect();
        sort_shortlex(&mut all);
        all
    }
}

pub(crate) fn sort_shortlex(words: &mut Vec<Word>) {
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    words.dedup();
}

/// Separating family of `m`. With `total = false` the machine must be
/// complete; with `total = true` undefined inputs count as an observation.
pub fn separating_family(m: &MealyMachine, total: bool) -> Result<SeparatingFamily, MealyError> {
    if !total {
        m.check_complete()?;
    }
    let refinement = Refinement::new(m);
    Ok(family_from(m, &refinement))
}

pub(crate) fn family_from(m: &MealyMachine, refinement: &Refinement) -> SeparatingFamily {
    let n = m.num_states();
    let mut words = vec![Vec::new(); n];
    for p in 0..n {
        for q in p + 1..n {
            if let Some(w) = refinement.separator(m, p, q) {
                words[p].push(w.clone());
                words[q].push(w);
            }
        }
    }
    for w in &mut words {
        sort_shortlex(w);
    }
    SeparatingFamily { words }
}

/// Quotient of `m` restricted to `keep` by language equivalence, with the map
/// from original states to quotient states. Quotient states are numbered by
/// first occurrence and named after their first member.
pub fn minimize_restricted<S: AsRef<str>>(
    m: &MealyMachine,
    keep: &[S],
) -> Result<(MealyMachine, Vec<StateId>), MealyError> {
    let r = m.restrict(keep);
    r.check_complete()?;
    Ok(quotient(&r))
}

pub(crate) fn quotient(r: &MealyMachine) -> (MealyMachine, Vec<StateId>) {
    let refinement = Refinement::new(r);
    let classes = refinement.classes();
    let mut rep: Vec<StateId> = Vec::new();
    let mut renum = vec![usize::MAX; refinement.num_classes()];
    let mut class_map = vec![0; r.num_states()];
    for (q, &c) in classes.iter().enumerate() {
        if renum[c] == usize::MAX {
            renum[c] = rep.len();
            rep.push(q);
        }
        class_map[q] = renum[c];
    }
    let k = r.num_inputs();
    let mut table = Vec::with_capacity(rep.len() * k);
    for &q in &rep {
        for i in 0..k {
            table.push(r.step(q, i).map(|(t, o)| (class_map[t], o)));
        }
    }
    let machine = MealyMachine::from_parts(
        rep.iter().map(|&q| r.states()[q].clone()).collect(),
        r.inputs().to_vec(),
        r.outputs().to_vec(),
        class_map[r.initial()],
        table,
    )
    .expect("quotient of a valid machine is valid");
    (machine, class_map)
}

/// Breadth-first access sequences in input-index order: one shortest word per
/// reachable state, prefix-closed. Listed in BFS (shortlex) order.
pub fn state_cover(m: &MealyMachine) -> Vec<(Word, StateId)> {
    let mut seen = vec![false; m.num_states()];
    seen[m.initial()] = true;
    let mut cover = vec![(Word::new(), m.initial())];
    let mut head = 0;
    while head < cover.len() {
        let (w, q) = cover[head].clone();
        head += 1;
        for i in 0..m.num_inputs() {
            if let Some((t, _)) = m.step(q, i) {
                if !seen[t] {
                    seen[t] = true;
                    let mut wi = w.clone();
                    wi.push(i);
                    cover.push((wi, t));
                }
            }
        }
    }
    cover
}

#[cfg(test)]
mod tests {
    use super::super::{apart_states, total_apart, MealyBuilder};
    use super::*;

    fn chain3() -> MealyMachine {
        let mut b = MealyBuilder::new();
        b.initial("q0");
        b.edge("q0", "a", "0", "q1").unwrap();
        b.edge("q1", "a", "0", "q2").unwrap();
        b.edge("q2", "a", "1", "q2").unwrap();
        b.build().unwrap()
    }

    #[test]
    fn chain_is_minimal_and_separators_match_bfs() {
        let m = chain3();
        let (q, map) = minimize_restricted(&m, m.inputs()).unwrap();
        assert_eq!(q.num_states(), 3);
        assert_eq!(map, vec![0, 1, 2]);
        let r = Refinement::new(&m);
        for p in 0..3 {
            for s in 0..3 {
                let bfs = apart_states(&m, p, &m, s);
                let ours = r.separator(&m, p, s);
                assert_eq!(bfs.map(|w| w.len()), ours.as_ref().map(Vec::len));
            }
        }
        assert_eq!(r.separator(&m, 0, 1), Some(vec![0, 0]));
    }

    #[test]
    fn duplicate_state_merges() {
        let mut b = MealyBuilder::new();
        b.initial("a");
        b.edge("a", "x", "0", "b").unwrap();
        b.edge("b", "x", "1", "c").unwrap();
        b.edge("c", "x", "1", "c").unwrap();
        let m = b.build().unwrap();
        let (q, map) = minimize_restricted(&m, m.inputs()).unwrap();
        assert_eq!(q.num_states(), m.num_states() - 1);
        assert_eq!(map[1], map[2]);
        let (qq, _) = minimize_restricted(&q, q.inputs()).unwrap();
        assert_eq!(qq, q);
    }

    #[test]
    fn one_state_machine() {
        let mut b = MealyBuilder::new();
        b.edge("s", "a", "0", "s").unwrap();
        let m = b.build().unwrap();
        let (q, _) = minimize_restricted(&m, m.inputs()).unwrap();
        assert_eq!(q.num_states(), 1);
        assert_eq!(state_cover(&m), vec![(vec![], 0)]);
        let fam = separating_family(&m, false).unwrap();
        assert!(fam.identifiers(0).is_empty());
    }

    #[test]
    fn incomplete_restriction_rejected() {
        let mut b = MealyBuilder::new();
        b.edge("s", "a", "0", "t").unwrap();
        b.edge("t", "b", "0", "s").unwrap();
        let m = b.build().unwrap();
        assert!(matches!(minimize_restricted(&m, &["a"]), Err(MealyError::Incomplete { .. })));
        assert!(separating_family(&m, false).is_err());
        assert!(separating_family(&m, true).is_ok());
    }

    #[test]
    fn chain_cover() {
        let m = chain3();
        let words: Vec<Word> = state_cover(&m).into_iter().map(|(w, _)| w).collect();
        assert_eq!(words, vec![vec![], vec![0], vec![0, 0]]);
    }

    #[test]
    fn total_family_exercises_asymmetric_input() {
        let mut b = MealyBuilder::new();
        b.edge("x", "a", "0", "x").unwrap();
        b.edge("x", "b", "0", "x").unwrap();
        b.edge("y", "a", "0", "y").unwrap();
        let m = b.build().unwrap();
        let fam = separating_family(&m, true).unwrap();
        let shared: Vec<&Word> =
            fam.identifiers(0).iter().filter(|w| fam.identifiers(1).contains(w)).collect();
        assert_eq!(shared, vec![&vec![1]]);
        assert_eq!(total_apart(&m, 0, &m, 1), Some(vec![1]));
    }
}
