//! Observation trees: the prefix tree of everything learned from the SUL.
//!
//! Output ids stored in the tree are the learner's interned ids. The learner
//! seeds its interner with the reference pack's output labels, so a tree id
//! and a reference id denote the same label whenever both exist; the
//! tree-vs-reference functions rely on that.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use hashbrown::HashMap;

use crate::mealy::{InputId, MealyMachine, OutputId, StateId, Word};

pub type NodeId = usize;

#[derive(Debug, Clone)]
struct Node {
    parent: Option<(NodeId, InputId)>,
    children: Vec<Option<(OutputId, NodeId)>>,
    depth: usize,
    // number of nodes in the subtree; grows monotonically and serves as a
    // change stamp for cached negative results
    size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// The SUL answered differently for a word already in the tree.
    OutputConflict { word: Word, expected: OutputId, got: OutputId },
    LengthMismatch,
    /// Folding requires an adequate tree.
    NotFoldable(&'static str),
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::OutputConflict { word, expected, got } => write!(
                f,
                "nondeterministic SUL: word {word:?} previously answered {expected}, now {got}"
            ),
            TreeError::LengthMismatch => f.write_str("input and output words differ in length"),
            TreeError::NotFoldable(why) => write!(f, "cannot fold tree: {why}"),
        }
    }
}

impl core::error::Error for TreeError {}

/// Classification of a frontier node against the basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrontierStatus {
    Isolated,
    Identified(NodeId),
    /// Two or more basis candidates remain (listed in basis order).
    Undetermined(Vec<NodeId>),
}

#[derive(Debug, Clone, Copy)]
enum Cached {
    Apart(usize), // index into the witness arena
    NotApart(usize, usize),
}

#[derive(Debug, Default)]
struct ApartCache {
    pairs: HashMap<(NodeId, NodeId), Cached>,
    refs: HashMap<(NodeId, StateId), Cached>,
    witnesses: Vec<Word>,
}

/// Folded hypothesis: a complete machine whose state `s` stands for basis
/// node `basis[s]`.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub machine: MealyMachine,
    pub basis: Vec<NodeId>,
}

impl Hypothesis {
    pub fn state_of(&self, node: NodeId) -> Option<StateId> {
        self.basis.iter().position(|&b| b == node)
    }

    pub fn num_states(&self) -> usize {
        self.machine.num_states()
    }
}

#[derive(Debug)]
pub struct ObservationTree {
    k: usize,
    nodes: Vec<Node>,
    basis: Vec<NodeId>,
    in_basis: Vec<bool>,
    cache: RefCell<ApartCache>,
}

impl Clone for ObservationTree {
    fn clone(&self) -> Self {
        ObservationTree {
            k: self.k,
            nodes: self.nodes.clone(),
            basis: self.basis.clone(),
            in_basis: self.in_basis.clone(),
            cache: RefCell::new(ApartCache::default()),
        }
    }
}

impl ObservationTree {
    /// A tree containing only the root, which forms the basis.
    pub fn new(num_inputs: usize) -> Self {
        ObservationTree {
            k: num_inputs,
            nodes: vec![Node { parent: None, children: vec![None; num_inputs], depth: 0, size: 1 }],
            basis: vec![0],
            in_basis: vec![true],
            cache: RefCell::new(ApartCache::default()),
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn num_inputs(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    #[inline]
    pub fn child(&self, q: NodeId, i: InputId) -> Option<(OutputId, NodeId)> {
        self.nodes[q].children[i]
    }

    pub fn parent(&self, q: NodeId) -> Option<(NodeId, InputId)> {
        self.nodes[q].parent
    }

    pub fn depth(&self, q: NodeId) -> usize {
        self.nodes[q].depth
    }

    /// `δᵀ(q, w)`.
    pub fn get(&self, q: NodeId, w: &[InputId]) -> Option<NodeId> {
        let mut cur = q;
        for &i in w {
            cur = self.child(cur, i)?.1;
        }
        Some(cur)
    }

    /// `λᵀ(q, w)` if `w` is defined from `q`.
    pub fn outputs(&self, q: NodeId, w: &[InputId]) -> Option<Vec<OutputId>> {
        let mut cur = q;
        let mut outs = Vec::with_capacity(w.len());
        for &i in w {
            let (o, t) = self.child(cur, i)?;
            outs.push(o);
            cur = t;
        }
        Some(outs)
    }

    /// The unique word from the root to `q`.
    pub fn access(&self, q: NodeId) -> Word {
        let mut w = Vec::with_capacity(self.nodes[q].depth);
        let mut cur = q;
        while let Some((p, i)) = self.nodes[cur].parent {
            w.push(i);
            cur = p;
        }
        w.reverse();
        w
    }

    /// Stores an observation; returns the node reached by `w`.
    pub fn add_word(&mut self, w: &[InputId], outs: &[OutputId]) -> Result<NodeId, TreeError> {
        if w.len() != outs.len() {
            return Err(TreeError::LengthMismatch);
        }
        let mut cur = 0;
        for (pos, (&i, &o)) in w.iter().zip(outs).enumerate() {
            cur = match self.nodes[cur].children[i] {
                Some((old, next)) => {
                    if old != o {
                        return Err(TreeError::OutputConflict {
                            word: w[..=pos].to_vec(),
                            expected: old,
                            got: o,
                        });
                    }
                    next
                }
                None => self.push_child(cur, i, o),
            };
        }
        Ok(cur)
    }

    fn push_child(&mut self, parent: NodeId, i: InputId, o: OutputId) -> NodeId {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(Node { parent: Some((parent, i)), children: vec![None; self.k], depth, size: 1 });
        self.nodes[parent].children[i] = Some((o, id));
        self.in_basis.push(false);
        let mut cur = Some(parent);
        while let Some(p) = cur {
            self.nodes[p].size += 1;
            cur = self.nodes[p].parent.map(|(pp, _)| pp);
        }
        id
    }

    pub fn basis(&self) -> &[NodeId] {
        &self.basis
    }

    pub fn is_basis(&self, q: NodeId) -> bool {
        self.in_basis[q]
    }

    /// Moves a frontier node into the basis.
    pub fn promote(&mut self, r: NodeId) {
        debug_assert!(self.is_frontier(r));
        self.in_basis[r] = true;
        self.basis.push(r);
    }

    pub fn is_frontier(&self, r: NodeId) -> bool {
        !self.in_basis[r] && self.nodes[r].parent.is_some_and(|(p, _)| self.in_basis[p])
    }

    /// Immediate non-basis successors of basis nodes, by node id.
    pub fn frontier(&self) -> Vec<NodeId> {
        let mut f: Vec<NodeId> = self
            .basis
            .iter()
            .flat_map(|&b| self.nodes[b].children.iter().flatten().map(|&(_, t)| t))
            .filter(|&t| !self.in_basis[t])
            .collect();
        f.sort_unstable();
        f
    }

    /// A shortest witness of `q # q′`, if any.
    pub fn apart(&self, q: NodeId, q2: NodeId) -> Option<Word> {
        if q == q2 {
            return None;
        }
        let key = if q < q2 { (q, q2) } else { (q2, q) };
        let stamp = (self.nodes[key.0].size, self.nodes[key.1].size);
        {
            let cache = self.cache.borrow();
            match cache.pairs.get(&key) {
                Some(&Cached::Apart(idx)) => return Some(cache.witnesses[idx].clone()),
                Some(&Cached::NotApart(a, b)) if (a, b) == stamp => return None,
                _ => {}
            }
        }
        let found = self.search_apart(key.0, key.1);
        let mut cache = self.cache.borrow_mut();
        let entry = match &found {
            Some(w) => {
                cache.witnesses.push(w.clone());
                Cached::Apart(cache.witnesses.len() - 1)
            }
            None => Cached::NotApart(stamp.0, stamp.1),
        };
        cache.pairs.insert(key, entry);
        found
    }

    pub fn is_apart(&self, q: NodeId, q2: NodeId) -> bool {
        self.apart(q, q2).is_some()
    }

    fn search_apart(&self, q: NodeId, q2: NodeId) -> Option<Word> {
        // BFS in shortlex order over commonly defined suffixes; each entry
        // keeps the index of its predecessor to rebuild the witness
        let mut queue: Vec<(NodeId, NodeId, usize, InputId)> = vec![(q, q2, usize::MAX, 0)];
        let mut head = 0;
        while head < queue.len() {
            let (a, b, _, _) = queue[head];
            for i in 0..self.k {
                if let (Some((oa, ta)), Some((ob, tb))) = (self.child(a, i), self.child(b, i)) {
                    if oa != ob {
                        let mut w = vec![i];
                        let mut at = head;
                        while queue[at].2 != usize::MAX {
                            w.push(queue[at].3);
                            at = queue[at].2;
                        }
                        w.reverse();
                        return Some(w);
                    }
                    queue.push((ta, tb, head, i));
                }
            }
            head += 1;
        }
        None
    }

    /// A shortest word defined from `q` in the tree and from `p` in `reference`
    /// on which their outputs differ. Output ids are assumed shared (see the
    /// module docs).
    pub fn apart_ref(&self, q: NodeId, reference: &MealyMachine, p: StateId) -> Option<Word> {
        let stamp = self.nodes[q].size;
        {
            let cache = self.cache.borrow();
            match cache.refs.get(&(q, p)) {
                Some(&Cached::Apart(idx)) => return Some(cache.witnesses[idx].clone()),
                Some(&Cached::NotApart(a, _)) if a == stamp => return None,
                _ => {}
            }
        }
        let found = self.search_apart_ref(q, reference, p);
        let mut cache = self.cache.borrow_mut();
        let entry = match &found {
            Some(w) => {
                cache.witnesses.push(w.clone());
                Cached::Apart(cache.witnesses.len() - 1)
            }
            None => Cached::NotApart(stamp, 0),
        };
        cache.refs.insert((q, p), entry);
        found
    }

    fn search_apart_ref(&self, q: NodeId, r: &MealyMachine, p: StateId) -> Option<Word> {
        let k = self.k.min(r.num_inputs());
        let mut queue: Vec<(NodeId, StateId, usize, InputId)> = vec![(q, p, usize::MAX, 0)];
        let mut head = 0;
        while head < queue.len() {
            let (a, b, _, _) = queue[head];
            for i in 0..k {
                if let (Some((oa, ta)), Some((tb, ob))) = (self.child(a, i), r.step(b, i)) {
                    if oa != ob {
                        let mut w = vec![i];
                        let mut at = head;
                        while queue[at].2 != usize::MAX {
                            w.push(queue[at].3);
                            at = queue[at].2;
                        }
                        w.reverse();
                        return Some(w);
                    }
                    queue.push((ta, tb, head, i));
                }
            }
            head += 1;
        }
        None
    }

    /// Basis nodes not apart from `r`, in basis order.
    pub fn candidates(&self, r: NodeId) -> Vec<NodeId> {
        self.basis.iter().copied().filter(|&b| !self.is_apart(r, b)).collect()
    }

    pub fn frontier_status(&self, r: NodeId) -> FrontierStatus {
        let c = self.candidates(r);
        match c.len() {
            0 => FrontierStatus::Isolated,
            1 => FrontierStatus::Identified(c[0]),
            _ => FrontierStatus::Undetermined(c),
        }
    }

    /// Status of every frontier node, by node id.
    pub fn frontier_statuses(&self) -> Vec<(NodeId, FrontierStatus)> {
        self.frontier().into_iter().map(|r| (r, self.frontier_status(r))).collect()
    }

    pub fn basis_complete(&self) -> bool {
        self.basis.iter().all(|&b| self.nodes[b].children.iter().all(Option::is_some))
    }

    /// All basis inputs defined and all frontier nodes identified.
    pub fn is_adequate(&self) -> bool {
        self.basis_complete()
            && self
                .frontier()
                .into_iter()
                .all(|r| matches!(self.frontier_status(r), FrontierStatus::Identified(_)))
    }

    /// Folds the tree into a complete hypothesis. States are named after the
    /// basis nodes' access words.
    pub fn fold_hypothesis(
        &self,
        input_labels: &[String],
        output_labels: &[String],
    ) -> Result<Hypothesis, TreeError> {
        if !self.basis_complete() {
            return Err(TreeError::NotFoldable("a basis state has an undefined input"));
        }
        let n = self.basis.len();
        let mut index = HashMap::with_capacity(n);
        for (s, &b) in self.basis.iter().enumerate() {
            index.insert(b, s);
        }
        let mut table = Vec::with_capacity(n * self.k);
        for &b in &self.basis {
            for i in 0..self.k {
                let (o, t) = self.child(b, i).expect("basis complete");
                let target = match index.get(&t) {
                    Some(&s) => s,
                    None => match self.frontier_status(t) {
                        FrontierStatus::Identified(q) => index[&q],
                        _ => return Err(TreeError::NotFoldable("a frontier state is not identified")),
                    },
                };
                table.push(Some((target, o)));
            }
        }
        let states = self
            .basis
            .iter()
            .map(|&b| {
                let mut name = String::from("s");
                for (pos, i) in self.access(b).iter().enumerate() {
                    if pos > 0 {
                        name.push('.');
                    }
                    name.push_str(&alloc::format!("{i}"));
                }
                name
            })
            .collect();
        let machine = MealyMachine::from_parts(
            states,
            input_labels.to_vec(),
            output_labels.to_vec(),
            0,
            table,
        )
        .map_err(|_| TreeError::NotFoldable("invalid hypothesis"))?;
        Ok(Hypothesis { machine, basis: self.basis.clone() })
    }

    /// A shortest word stored in the tree on which `h` disagrees with it.
    pub fn check_consistency(&self, h: &Hypothesis) -> Option<Word> {
        let m = &h.machine;
        let mut queue = VecDeque::from([(0usize, m.initial())]);
        while let Some((q, s)) = queue.pop_front() {
            for i in 0..self.k {
                if let Some((o, t)) = self.child(q, i) {
                    let (s2, ho) = m.step(s, i)?;
                    if ho != o {
                        let mut w = self.access(q);
                        w.push(i);
                        return Some(w);
                    }
                    queue.push_back((t, s2));
                }
            }
        }
        None
    }

    /// Every stored word ending in a leaf, with its outputs.
    pub fn leaves(&self) -> Vec<(Word, Vec<OutputId>)> {
        (0..self.nodes.len())
            .filter(|&q| self.nodes[q].children.iter().all(Option::is_none))
            .map(|q| {
                let w = self.access(q);
                let outs = self.outputs(0, &w).expect("stored word");
                (w, outs)
            })
            .collect()
    }

    /// Re-checks every cached apartness witness against the tree.
    pub fn validate_witnesses(&self) -> bool {
        let cache = self.cache.borrow();
        cache.pairs.iter().all(|(&(a, b), c)| match *c {
            Cached::Apart(idx) => {
                let w = &cache.witnesses[idx];
                match (self.outputs(a, w), self.outputs(b, w)) {
                    (Some(x), Some(y)) => x != y,
                    _ => false,
                }
            }
            Cached::NotApart(..) => true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn add_word_basics() {
        let mut t = ObservationTree::new(2);
        assert_eq!(t.add_word(&[], &[]).unwrap(), t.root());
        let n = t.add_word(&[0, 1], &[0, 1]).unwrap();
        let before = t.len();
        let a = t.add_word(&[0], &[0]).unwrap();
        assert_eq!(t.len(), before);
        assert_eq!(t.get(a, &[1]), Some(n));
        assert!(matches!(t.add_word(&[0, 1], &[0, 0]), Err(TreeError::OutputConflict { .. })));
        assert_eq!(t.access(n), vec![0, 1]);
    }

    #[test]
    fn apartness_after_two_queries() {
        // inputs a=0, b=1, c=2; OQs cc -> 0 1 and cac -> 0 0 0
        let mut t = ObservationTree::new(3);
        t.add_word(&[2, 2], &[0, 1]).unwrap();
        t.add_word(&[2, 0, 2], &[0, 0, 0]).unwrap();
        let c = t.get(0, &[2]).unwrap();
        let ca = t.get(0, &[2, 0]).unwrap();
        assert_eq!(t.apart(c, ca), Some(vec![2]));
        assert_eq!(t.apart(ca, c), Some(vec![2]));
        assert_eq!(t.apart(c, c), None);
        assert!(t.validate_witnesses());
    }

    #[test]
    fn negative_cache_is_refreshed() {
        let mut t = ObservationTree::new(1);
        t.add_word(&[0], &[0]).unwrap();
        let a = t.get(0, &[0]).unwrap();
        assert_eq!(t.apart(0, a), None);
        t.add_word(&[0, 0], &[0, 1]).unwrap();
        assert_eq!(t.apart(0, a), Some(vec![0]));
    }

    #[test]
    fn single_basis_identifies_everything() {
        let mut t = ObservationTree::new(2);
        t.add_word(&[0], &[0]).unwrap();
        t.add_word(&[1], &[1]).unwrap();
        for (_, s) in t.frontier_statuses() {
            assert_eq!(s, FrontierStatus::Identified(0));
        }
        assert!(t.is_adequate());
        let h = t.fold_hypothesis(&labels(2), &labels(2)).unwrap();
        assert_eq!(h.num_states(), 1);
        assert_eq!(h.machine.step(0, 1), Some((0, 1)));
        assert_eq!(t.check_consistency(&h), None);
    }

    #[test]
    fn consistency_finds_contradiction() {
        let mut t = ObservationTree::new(1);
        t.add_word(&[0, 0], &[0, 1]).unwrap();
        let mut b = crate::mealy::MealyBuilder::new();
        b.edge("s", "0", "0", "s").unwrap();
        b.output("1");
        let h = Hypothesis { machine: b.build().unwrap(), basis: vec![0] };
        assert_eq!(t.check_consistency(&h), Some(vec![0, 0]));
        let empty = ObservationTree::new(1);
        assert_eq!(empty.check_consistency(&h), None);
    }

    #[test]
    fn apart_ref_cases() {
        let mut b = crate::mealy::MealyBuilder::new();
        b.edge("p", "a", "0", "p").unwrap();
        b.output("1");
        let r = b.build().unwrap();
        let t = ObservationTree::new(1);
        assert_eq!(t.apart_ref(0, &r, 0), None);
        let mut t = ObservationTree::new(1);
        t.add_word(&[0], &[1]).unwrap();
        assert_eq!(t.apart_ref(0, &r, 0), Some(vec![0]));
    }
}
