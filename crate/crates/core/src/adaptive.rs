//! Reference-guided rules: rebuilding, prioritized promotion, (approximate)
//! state matching, and the AL# schedule that orders them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use hashbrown::HashMap;

use crate::learner::{LearnError, Learner, LearnerConfig, Rule, RunResult, Step};
use crate::mealy::{InputId, MealyMachine, ReferencePack, StateId, Word};
use crate::obstree::{NodeId, ObservationTree};
use crate::oracle::EqOracle;

/// Which rule groups a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ablation {
    /// Plain L#.
    LSharp,
    /// Rebuilding and prioritized promotion.
    R,
    /// Exact matching rules MS, MR, PS.
    Exact,
    /// Approximate matching rules AMS, AMR, APS.
    Approx,
    RExact,
    /// Rebuilding followed by approximate matching (AL#).
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 6] =
        [Ablation::LSharp, Ablation::R, Ablation::Exact, Ablation::Approx, Ablation::RExact, Ablation::Full];

    pub fn id(self) -> &'static str {
        match self {
            Ablation::LSharp => "lsharp",
            Ablation::R => "R",
            Ablation::Exact => "exact",
            Ablation::Approx => "approx",
            Ablation::RExact => "R+exact",
            Ablation::Full => "full",
        }
    }

    pub fn rebuilds(self) -> bool {
        matches!(self, Ablation::R | Ablation::RExact | Ablation::Full)
    }

    pub fn match_mode(self) -> Option<MatchMode> {
        match self {
            Ablation::Exact | Ablation::RExact => Some(MatchMode::Exact),
            Ablation::Approx | Ablation::Full => Some(MatchMode::Approximate),
            Ablation::LSharp | Ablation::R => None,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Ablation {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim();
        Ablation::ALL
            .into_iter()
            .find(|a| a.id().eq_ignore_ascii_case(norm))
            .or(match norm.to_ascii_lowercase().as_str() {
                "alsharp" | "al#" => Some(Ablation::Full),
                "l#" => Some(Ablation::LSharp),
                _ => None,
            })
            .ok_or_else(|| alloc::format!("unknown algorithm `{s}`"))
    }
}

/// Exact matching (`mdeg = 1`) or approximate matching (argmax of `mdeg`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    Exact,
    Approximate,
}

/// Agreement counts of one basis node against every reference state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRow {
    pub node: NodeId,
    /// `|WI(q)|` per reference: defined transitions below `q` reachable over
    /// that reference's alphabet.
    pub den: Vec<u64>,
    /// Agreeing pairs per reference state.
    pub num: Vec<u64>,
}

/// Matching degrees between basis nodes and reference states, maintained
/// incrementally as the tree grows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchTable {
    rows: Vec<MatchRow>,
    index: HashMap<NodeId, usize>,
    processed: usize,
}

impl MatchTable {
    /// The table recomputed from nothing.
    pub fn from_scratch(tree: &ObservationTree, pack: &ReferencePack) -> Self {
        let mut t = MatchTable::default();
        t.update(tree, pack);
        t
    }

    /// Brings the table up to date with the tree: new observations are added
    /// to existing rows, new basis nodes get fresh rows.
    pub fn update(&mut self, tree: &ObservationTree, pack: &ReferencePack) {
        if pack.is_empty() {
            return;
        }
        let scopes = pack.scopes();
        let machine = pack.machine();
        for y in self.processed.max(1)..tree.len() {
            let Some((x, i)) = tree.parent(y) else { continue };
            if self.rows.is_empty() {
                break;
            }
            let out = tree.child(x, i).expect("edge exists").0;
            let access = tree.access(x);
            // ancestors of x, root first
            let mut chain = Vec::with_capacity(access.len() + 1);
            let mut cur = tree.root();
            chain.push(cur);
            for &a in &access {
                cur = tree.child(cur, a).unwrap().1;
                chain.push(cur);
            }
            for row in &mut self.rows {
                let d = tree.depth(row.node);
                if d > access.len() || chain[d] != row.node {
                    continue;
                }
                let path = &access[d..];
                for (j, s) in scopes.iter().enumerate() {
                    if !s.inputs[i] || !path.iter().all(|&a| s.inputs[a]) {
                        continue;
                    }
                    row.den[j] += 1;
                    for p in s.offset..s.offset + s.len {
                        let at = machine.target(p, path).expect("complete over its alphabet");
                        if machine.step(at, i).map(|t| t.1) == Some(out) {
                            row.num[p] += 1;
                        }
                    }
                }
            }
        }
        for &b in &tree.basis()[self.rows.len()..] {
            self.index.insert(b, self.rows.len());
            self.rows.push(scratch_row(tree, pack, b));
        }
        self.processed = tree.len();
    }

    pub fn rows(&self) -> &[MatchRow] {
        &self.rows
    }

    pub fn row(&self, q: NodeId) -> Option<&MatchRow> {
        self.index.get(&q).map(|&k| &self.rows[k])
    }

    /// `mdeg(q,p)` as a fraction; an empty `WI(q)` gives `1/1`.
    pub fn mdeg(&self, pack: &ReferencePack, q: NodeId, p: StateId) -> (u64, u64) {
        let row = self.row(q).expect("basis node has a row");
        fraction(row, pack, p)
    }

    /// Reference states matched with basis node `q`, ascending.
    pub fn matched(&self, pack: &ReferencePack, q: NodeId, mode: MatchMode) -> Vec<StateId> {
        let row = self.row(q).expect("basis node has a row");
        let n = pack.num_states();
        match mode {
            MatchMode::Exact => (0..n)
                .filter(|&p| {
                    let (a, b) = fraction(row, pack, p);
                    a == b
                })
                .collect(),
            MatchMode::Approximate => {
                let mut best: Vec<StateId> = Vec::new();
                let mut best_f = (0u64, 1u64);
                for p in 0..n {
                    let f = fraction(row, pack, p);
                    let cmp = (f.0 as u128 * best_f.1 as u128).cmp(&(best_f.0 as u128 * f.1 as u128));
                    if best.is_empty() || cmp == core::cmp::Ordering::Greater {
                        best.clear();
                        best.push(p);
                        best_f = f;
                    } else if cmp == core::cmp::Ordering::Equal {
                        best.push(p);
                    }
                }
                best
            }
        }
    }
}

fn fraction(row: &MatchRow, pack: &ReferencePack, p: StateId) -> (u64, u64) {
    let den = row.den[pack.scope_of(p)];
    if den == 0 {
        (1, 1)
    } else {
        (row.num[p], den)
    }
}

fn scratch_row(tree: &ObservationTree, pack: &ReferencePack, q: NodeId) -> MatchRow {
    let machine = pack.machine();
    let mut den = vec![0; pack.scopes().len()];
    let mut num = vec![0; pack.num_states()];
    for (j, s) in pack.scopes().iter().enumerate() {
        let start: Vec<StateId> = (s.offset..s.offset + s.len).collect();
        let mut stack = vec![(q, start)];
        while let Some((x, states)) = stack.pop() {
            for i in 0..tree.num_inputs() {
                if !s.inputs[i] {
                    continue;
                }
                let Some((o, y)) = tree.child(x, i) else { continue };
                den[j] += 1;
                let mut next = Vec::with_capacity(states.len());
                for (idx, &st) in states.iter().enumerate() {
                    let (t, ro) = machine.step(st, i).expect("complete over its alphabet");
                    if ro == o {
                        num[s.offset + idx] += 1;
                    }
                    next.push(t);
                }
                stack.push((y, next));
            }
        }
    }
    MatchRow { node: q, den, num }
}

/// `mdeg(q,p)` straight from the definition, for one tree node and one
/// reference state over `alphabet` (a mask over tree inputs).
pub fn mdeg_direct(
    tree: &ObservationTree,
    q: NodeId,
    reference: &MealyMachine,
    p: StateId,
    alphabet: &[bool],
) -> (u64, u64) {
    let (mut num, mut den) = (0, 0);
    let mut stack = vec![(q, p)];
    while let Some((x, s)) = stack.pop() {
        for (i, &ok) in alphabet.iter().enumerate() {
            if !ok {
                continue;
            }
            let Some((o, y)) = tree.child(x, i) else { continue };
            let Some((t, ro)) = reference.step(s, i) else { continue };
            den += 1;
            if ro == o {
                num += 1;
            }
            stack.push((y, t));
        }
    }
    if den == 0 {
        (1, 1)
    } else {
        (num, den)
    }
}

/// Learns `sul` with the rule groups of `ablation`, guided by `pack`.
pub fn run_alsharp(
    sul: &MealyMachine,
    pack: &ReferencePack,
    oracle: EqOracle,
    ablation: Ablation,
    config: LearnerConfig,
) -> Result<RunResult, LearnError> {
    drive(sul, pack, oracle, ablation, config)
}

pub(crate) fn drive(
    sul: &MealyMachine,
    pack: &ReferencePack,
    oracle: EqOracle,
    ablation: Ablation,
    config: LearnerConfig,
) -> Result<RunResult, LearnError> {
    Learner::new(sul, pack, oracle, config)?.run(ablation)
}

impl<'a> Learner<'a> {
    /// Runs rebuilding (when the ablation has it) and then the main loop until
    /// the teacher accepts.
    pub fn run(mut self, ablation: Ablation) -> Result<RunResult, LearnError> {
        let mut phase1 = None;
        if ablation.rebuilds() {
            while self.phase1_step()? {}
            phase1 = Some(self.tree.basis().len());
        }
        let (ps, mr, ms) = match ablation.match_mode() {
            Some(MatchMode::Exact) => (
                Some(Rule::PrioritizedSeparation),
                Some(Rule::MatchRefinement),
                Some(Rule::MatchSeparation),
            ),
            Some(MatchMode::Approximate) => (
                Some(Rule::ApproxPrioritizedSeparation),
                Some(Rule::ApproxMatchRefinement),
                Some(Rule::ApproxMatchSeparation),
            ),
            None => (None, None, None),
        };
        let before: Vec<Rule> = [Some(Rule::Extension), ps, Some(Rule::Separation), Some(Rule::Promotion)]
            .into_iter()
            .flatten()
            .collect();
        let after: Vec<Rule> = [mr, ms].into_iter().flatten().collect();
        loop {
            if let Step::Applied(_) = self.step_rules(&before)? {
                continue;
            }
            if !self.tree.is_adequate() {
                return Err(LearnError::Invariant(alloc::string::String::from(
                    "no rule applicable to an inadequate tree",
                )));
            }
            if let Step::Applied(_) = self.step_rules(&after)? {
                continue;
            }
            match self.try_rule(Rule::Equivalence)? {
                Step::Done(h) => return Ok(self.finish(h, phase1)),
                Step::Applied(_) => continue,
                Step::Inapplicable => {
                    return Err(LearnError::Invariant(alloc::string::String::from(
                        "equivalence rule inapplicable on an adequate tree",
                    )))
                }
            }
        }
    }

    pub(crate) fn refresh_matches(&mut self) {
        self.matches.update(&self.tree, self.pack);
    }

    /// The current matching table (refreshed first).
    pub fn match_table(&mut self) -> &MatchTable {
        self.refresh_matches();
        &self.matches
    }

    pub(crate) fn try_adaptive(&mut self, rule: Rule) -> Result<bool, LearnError> {
        if self.pack.is_empty() {
            return Ok(false);
        }
        match rule {
            Rule::PrioritizedPromotion => match self.find_prioritized_promotion() {
                Some(r) => self.rule_prioritized_promotion(r).map(|_| true),
                None => Ok(false),
            },
            Rule::Rebuilding => match self.find_rebuilding() {
                Some((q, q2, i, scope)) => self.rule_rebuilding(q, q2, i, scope).map(|_| true),
                None => Ok(false),
            },
            Rule::MatchSeparation | Rule::ApproxMatchSeparation => {
                let mode = mode_of(rule);
                match self.find_match_separation(mode) {
                    Some((q, i, p, q2)) => self.rule_match_separation(q, i, p, q2, mode).map(|_| true),
                    None => Ok(false),
                }
            }
            Rule::MatchRefinement | Rule::ApproxMatchRefinement => {
                let mode = mode_of(rule);
                match self.find_match_refinement(mode) {
                    Some((q, p, p2)) => self.rule_match_refinement(q, p, p2, mode).map(|_| true),
                    None => Ok(false),
                }
            }
            Rule::PrioritizedSeparation | Rule::ApproxPrioritizedSeparation => {
                let mode = mode_of(rule);
                match self.find_prioritized_separation(mode) {
                    Some((r, q, q2, sigma)) => {
                        self.rule_prioritized_separation(r, q, q2, &sigma, mode).map(|_| true)
                    }
                    None => Ok(false),
                }
            }
            _ => Ok(false),
        }
    }

    // ---- rebuilding and prioritized promotion ----

    /// One rebuilding-phase step: scanning cover words in shortlex order,
    /// prioritized promotion is tried before rebuilding for each word.
    pub fn phase1_step(&mut self) -> Result<bool, LearnError> {
        let pack = self.pack;
        for w in pack.cover() {
            if let Some(r) = self.tree.get(self.tree.root(), w) {
                if self.tree.is_frontier(r) && self.is_isolated(r) {
                    self.rule_prioritized_promotion(r)?;
                    return Ok(true);
                }
            }
            if let Some((q, q2, i, scope)) = self.rebuilding_at(w) {
                self.rule_rebuilding(q, q2, i, scope)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn find_prioritized_promotion(&self) -> Option<NodeId> {
        self.pack.cover().iter().find_map(|w| {
            let r = self.tree.get(self.tree.root(), w)?;
            (self.tree.is_frontier(r) && self.is_isolated(r)).then_some(r)
        })
    }

    pub fn rule_prioritized_promotion(&mut self, r: NodeId) -> Result<(), LearnError> {
        if !self.tree.is_frontier(r)
            || !self.is_isolated(r)
            || !self.pack.in_cover(&self.tree.access(r))
        {
            return Err(LearnError::Precondition(
                Rule::PrioritizedPromotion,
                "r is not an isolated frontier state with a cover access word",
            ));
        }
        self.tree.promote(r);
        self.record(Rule::PrioritizedPromotion, &[r], true)
    }

    pub fn find_rebuilding(&self) -> Option<(NodeId, NodeId, InputId, usize)> {
        self.pack.cover().iter().find_map(|w| self.rebuilding_at(w))
    }

    /// Rebuilding parameters for the cover word `w = access(q)·i`, if any.
    fn rebuilding_at(&self, w: &[InputId]) -> Option<(NodeId, NodeId, InputId, usize)> {
        let (&i, prefix) = w.split_last()?;
        let q = self.tree.get(self.tree.root(), prefix)?;
        if !self.tree.is_basis(q) {
            return None;
        }
        let t = self.tree.child(q, i).map(|c| c.1);
        if t.is_some_and(|t| self.tree.is_basis(t)) {
            return None;
        }
        for &q2 in self.tree.basis() {
            if t.is_some_and(|t| self.tree.is_apart(q2, t)) {
                continue;
            }
            let acc2 = self.tree.access(q2);
            if !self.pack.in_cover(&acc2) {
                continue;
            }
            for scope in 0..self.pack.scopes().len() {
                if let Some(sigma) = self.rebuild_separator(scope, w, &acc2) {
                    let undefined = t.and_then(|t| self.tree.get(t, sigma)).is_none()
                        || self.tree.get(q2, sigma).is_none();
                    if undefined {
                        return Some((q, q2, i, scope));
                    }
                }
            }
        }
        None
    }

    fn rebuild_separator(&self, scope: usize, w: &[InputId], acc2: &[InputId]) -> Option<&'a Word> {
        let pack: &'a ReferencePack = self.pack;
        let p = pack.reach(scope, w)?;
        let p2 = pack.reach(scope, acc2)?;
        pack.sep_opt(p, p2)
    }

    pub fn rule_rebuilding(
        &mut self,
        q: NodeId,
        q2: NodeId,
        i: InputId,
        scope: usize,
    ) -> Result<(), LearnError> {
        let fail = |why| Err(LearnError::Precondition(Rule::Rebuilding, why));
        if !self.tree.is_basis(q) || !self.tree.is_basis(q2) {
            return fail("q or q′ is not a basis state");
        }
        let t = self.tree.child(q, i).map(|c| c.1);
        if t.is_some_and(|t| self.tree.is_basis(t) || self.tree.is_apart(q2, t)) {
            return fail("δᵀ(q,i) is in the basis or apart from q′");
        }
        let mut w = self.tree.access(q);
        w.push(i);
        let acc2 = self.tree.access(q2);
        if !self.pack.in_cover(&w) || !self.pack.in_cover(&acc2) {
            return fail("access words are not in the reference cover");
        }
        let Some(sigma) = self.rebuild_separator(scope, &w, &acc2) else {
            return fail("no reference separator");
        };
        let undefined = t.and_then(|t| self.tree.get(t, sigma)).is_none()
            || self.tree.get(q2, sigma).is_none();
        if !undefined {
            return fail("both separator traces are already defined");
        }
        let mut w1 = w.clone();
        w1.extend_from_slice(sigma);
        let mut w2 = acc2;
        w2.extend_from_slice(sigma);
        self.oq(&w1)?;
        self.oq(&w2)?;
        let r = self.tree.child(q, i).expect("queried").1;
        let ok = self.tree.get(r, sigma).is_some() && self.tree.get(q2, sigma).is_some();
        self.postcondition(Rule::Rebuilding, ok)?;
        self.record(Rule::Rebuilding, &[q, q2], true)
    }

    // ---- matching rules ----

    fn matched_any(&self, mode: MatchMode) -> Vec<bool> {
        let mut any = vec![false; self.pack.num_states()];
        for &b in self.tree.basis() {
            for p in self.matches.matched(self.pack, b, mode) {
                any[p] = true;
            }
        }
        any
    }

    pub fn find_match_separation(&mut self, mode: MatchMode) -> Option<(NodeId, InputId, StateId, NodeId)> {
        self.refresh_matches();
        let any = self.matched_any(mode);
        let reference = self.pack.machine();
        for &q in self.tree.basis() {
            let matched = self.matches.matched(self.pack, q, mode);
            for i in 0..self.tree.num_inputs() {
                let Some((_, r)) = self.tree.child(q, i) else { continue };
                if !self.tree.is_frontier(r) {
                    continue;
                }
                for &p in &matched {
                    let Some((p2, _)) = self.pack.step(p, i) else { continue };
                    if any[p2] || self.tree.apart_ref(r, reference, p2).is_some() {
                        continue;
                    }
                    for &q2 in self.tree.basis() {
                        if !self.tree.is_apart(r, q2) && self.tree.apart_ref(q2, reference, p2).is_some() {
                            return Some((q, i, p, q2));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn rule_match_separation(
        &mut self,
        q: NodeId,
        i: InputId,
        p: StateId,
        q2: NodeId,
        mode: MatchMode,
    ) -> Result<(), LearnError> {
        let rule = match mode {
            MatchMode::Exact => Rule::MatchSeparation,
            MatchMode::Approximate => Rule::ApproxMatchSeparation,
        };
        let fail = |why| Err(LearnError::Precondition(rule, why));
        self.refresh_matches();
        let Some((_, r)) = self.tree.child(q, i).filter(|&(_, r)| self.tree.is_frontier(r)) else {
            return fail("δᵀ(q,i) is not a frontier state");
        };
        if !self.matches.matched(self.pack, q, mode).contains(&p) {
            return fail("p does not match q");
        }
        let Some((p2, _)) = self.pack.step(p, i) else { return fail("δᴿ(p,i) is undefined") };
        if self.matched_any(mode)[p2] {
            return fail("δᴿ(p,i) matches a basis state");
        }
        let reference = self.pack.machine();
        if self.tree.is_apart(r, q2) || self.tree.apart_ref(r, reference, p2).is_some() {
            return fail("r is already apart from q′ or from δᴿ(p,i)");
        }
        let Some(sigma) = self.tree.apart_ref(q2, reference, p2) else {
            return fail("q′ and δᴿ(p,i) are not apart");
        };
        let mut w = self.tree.access(q);
        w.push(i);
        w.extend_from_slice(&sigma);
        self.oq(&w)?;
        let ok = self.tree.is_apart(r, q2) || self.tree.apart_ref(r, reference, p2).is_some();
        self.postcondition(rule, ok)?;
        self.record(rule, &[q, r, q2], true)
    }

    pub fn find_match_refinement(&mut self, mode: MatchMode) -> Option<(NodeId, StateId, StateId)> {
        self.refresh_matches();
        for &q in self.tree.basis() {
            let m = self.matches.matched(self.pack, q, mode);
            for a in 0..m.len() {
                for b in a + 1..m.len() {
                    if let Some(sigma) = self.pack.sep_opt(m[a], m[b]) {
                        if self.tree.get(q, sigma).is_none() {
                            return Some((q, m[a], m[b]));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn rule_match_refinement(
        &mut self,
        q: NodeId,
        p: StateId,
        p2: StateId,
        mode: MatchMode,
    ) -> Result<(), LearnError> {
        let rule = match mode {
            MatchMode::Exact => Rule::MatchRefinement,
            MatchMode::Approximate => Rule::ApproxMatchRefinement,
        };
        let fail = |why| Err(LearnError::Precondition(rule, why));
        self.refresh_matches();
        let m = self.matches.matched(self.pack, q, mode);
        if !m.contains(&p) || !m.contains(&p2) {
            return fail("q does not match both reference states");
        }
        let pack: &'a ReferencePack = self.pack;
        let Some(sigma) = pack.sep_opt(p, p2) else { return fail("p and p′ are not apart") };
        if self.tree.get(q, sigma).is_some() {
            return fail("δᵀ(q,σ) is already defined");
        }
        let mut w = self.tree.access(q);
        w.extend_from_slice(sigma);
        self.oq(&w)?;
        let mut ok = self.tree.get(q, sigma).is_some();
        let reference = pack.machine();
        if mode == MatchMode::Exact && reference.walk(p, sigma).is_some() && reference.walk(p2, sigma).is_some() {
            self.refresh_matches();
            let m = self.matches.matched(pack, q, mode);
            ok &= !(m.contains(&p) && m.contains(&p2));
        }
        self.postcondition(rule, ok)?;
        self.record(rule, &[q], true)
    }

    /// Identifiers of the reference states reached by `i` from states matched
    /// with `q`, shortlex sorted.
    fn prioritized_identifiers(&self, q: NodeId, i: InputId, mode: MatchMode) -> Vec<&'a Word> {
        let pack: &'a ReferencePack = self.pack;
        let mut out: Vec<&'a Word> = Vec::new();
        for p in self.matches.matched(pack, q, mode) {
            if let Some((p2, _)) = pack.step(p, i) {
                out.extend(pack.identifiers(p2).iter());
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out.dedup();
        out
    }

    pub fn find_prioritized_separation(
        &mut self,
        mode: MatchMode,
    ) -> Option<(NodeId, NodeId, NodeId, Word)> {
        self.refresh_matches();
        for r in self.tree.frontier() {
            let cands = self.tree.candidates(r);
            if cands.len() < 2 {
                continue;
            }
            let (q, i) = self.tree.parent(r).expect("frontier has a parent");
            for sigma in self.prioritized_identifiers(q, i, mode) {
                for a in 0..cands.len() {
                    let Some(oa) = self.tree.outputs(cands[a], sigma) else { continue };
                    for &cb in &cands[a + 1..] {
                        if self.tree.outputs(cb, sigma).is_some_and(|ob| ob != oa) {
                            return Some((r, cands[a], cb, sigma.clone()));
                        }
                    }
                }
            }
        }
        None
    }

    pub fn rule_prioritized_separation(
        &mut self,
        r: NodeId,
        q: NodeId,
        q2: NodeId,
        sigma: &[InputId],
        mode: MatchMode,
    ) -> Result<(), LearnError> {
        let rule = match mode {
            MatchMode::Exact => Rule::PrioritizedSeparation,
            MatchMode::Approximate => Rule::ApproxPrioritizedSeparation,
        };
        let fail = |why| Err(LearnError::Precondition(rule, why));
        if !self.tree.is_frontier(r) || self.tree.is_apart(r, q) || self.tree.is_apart(r, q2) {
            return fail("r is not a frontier state undecided between q and q′");
        }
        match (self.tree.outputs(q, sigma), self.tree.outputs(q2, sigma)) {
            (Some(a), Some(b)) if a != b => {}
            _ => return fail("σ does not separate q and q′"),
        }
        self.refresh_matches();
        let (parent, i) = self.tree.parent(r).expect("frontier has a parent");
        if !self.prioritized_identifiers(parent, i, mode).iter().any(|w| w.as_slice() == sigma) {
            return fail("σ is not an identifier of a matched reference successor");
        }
        let mut w = self.tree.access(r);
        w.extend_from_slice(sigma);
        self.oq(&w)?;
        self.postcondition(rule, self.tree.is_apart(r, q) || self.tree.is_apart(r, q2))?;
        self.record(rule, &[r, q, q2], true)
    }
}

fn mode_of(rule: Rule) -> MatchMode {
    match rule {
        Rule::ApproxMatchSeparation | Rule::ApproxMatchRefinement | Rule::ApproxPrioritizedSeparation => {
            MatchMode::Approximate
        }
        _ => MatchMode::Exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mealy::{build_reference_pack, language_equivalent, MealyBuilder};

    fn counter(n: usize) -> MealyMachine {
        let mut b = MealyBuilder::new();
        b.initial("c0");
        for s in 0..n {
            let out = if s == n - 1 { "1" } else { "0" };
            b.edge(&alloc::format!("c{s}"), "inc", out, &alloc::format!("c{}", (s + 1) % n)).unwrap();
            b.edge(&alloc::format!("c{s}"), "rst", "0", "c0").unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn fresh_root_matches_everything() {
        let m = counter(4);
        let pack = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        let tree = ObservationTree::new(2);
        let t = MatchTable::from_scratch(&tree, &pack);
        assert_eq!(t.mdeg(&pack, 0, 2), (1, 1));
        assert_eq!(t.matched(&pack, 0, MatchMode::Approximate), vec![0, 1, 2, 3]);
        assert_eq!(t.matched(&pack, 0, MatchMode::Exact), vec![0, 1, 2, 3]);
    }

    #[test]
    fn self_reference_rebuilds_whole_basis() {
        let m = counter(6);
        let pack = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        let cfg = LearnerConfig { track_norm: true, check_invariants: true, log_events: true, ..Default::default() };
        let res = run_alsharp(&m, &pack, EqOracle::Perfect, Ablation::Full, cfg).unwrap();
        assert_eq!(res.phase1_basis, Some(6));
        assert_eq!(res.metrics.eq_count, 1);
        assert!(language_equivalent(&res.hypothesis.machine, &m).unwrap().is_equivalent());
        assert!(res.norm_trace.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_ablation_converges() {
        let m = counter(5);
        let pack = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        for a in Ablation::ALL {
            let cfg = LearnerConfig { track_norm: true, check_invariants: true, ..Default::default() };
            let res = run_alsharp(&m, &pack, EqOracle::Perfect, a, cfg).unwrap();
            assert_eq!(res.metrics.learned_states, 5, "{a}");
        }
    }

    #[test]
    fn incremental_table_equals_scratch() {
        let m = counter(4);
        let pack = build_reference_pack(core::slice::from_ref(&m), m.inputs()).unwrap();
        let mut l = Learner::new(&m, &pack, EqOracle::Perfect, LearnerConfig::default()).unwrap();
        for _ in 0..20 {
            if !matches!(l.step_rules(&[Rule::Extension, Rule::ApproxMatchRefinement, Rule::Promotion]).unwrap(), Step::Applied(_)) {
                break;
            }
            let inc = l.match_table().clone();
            let scratch = MatchTable::from_scratch(l.tree(), &pack);
            assert_eq!(inc.rows(), scratch.rows());
        }
    }

    #[test]
    fn ablation_ids_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.id().parse::<Ablation>().unwrap(), a);
        }
    }
}
