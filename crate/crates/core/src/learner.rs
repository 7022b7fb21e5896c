//! The L# rules, counterexample processing and the learner state shared with
//! the adaptive rules.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::adaptive::{drive, Ablation, MatchTable};
use crate::mealy::{InputId, MealyError, MealyMachine, OutputId, ReferencePack, Word};
use crate::norm::compute_norm;
use crate::obstree::{FrontierStatus, Hypothesis, NodeId, ObservationTree, TreeError};
use crate::oracle::{EqOracle, EqState, OracleError, RunMetrics, Teacher};

/// Every rule the learner can apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Extension,
    Separation,
    Promotion,
    Equivalence,
    Rebuilding,
    PrioritizedPromotion,
    MatchSeparation,
    MatchRefinement,
    PrioritizedSeparation,
    ApproxMatchSeparation,
    ApproxMatchRefinement,
    ApproxPrioritizedSeparation,
}

impl Rule {
    pub const ALL: [Rule; 12] = [
        Rule::Extension,
        Rule::Separation,
        Rule::Promotion,
        Rule::Equivalence,
        Rule::Rebuilding,
        Rule::PrioritizedPromotion,
        Rule::MatchSeparation,
        Rule::MatchRefinement,
        Rule::PrioritizedSeparation,
        Rule::ApproxMatchSeparation,
        Rule::ApproxMatchRefinement,
        Rule::ApproxPrioritizedSeparation,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Rule::Extension => "Ex",
            Rule::Separation => "S",
            Rule::Promotion => "P",
            Rule::Equivalence => "Eq",
            Rule::Rebuilding => "R",
            Rule::PrioritizedPromotion => "PP",
            Rule::MatchSeparation => "MS",
            Rule::MatchRefinement => "MR",
            Rule::PrioritizedSeparation => "PS",
            Rule::ApproxMatchSeparation => "AMS",
            Rule::ApproxMatchRefinement => "AMR",
            Rule::ApproxPrioritizedSeparation => "APS",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| alloc::format!("unknown rule `{s}`"))
    }
}

/// One rule application: the nodes it was applied to and the output queries
/// it posed (including those answered from the tree).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub rule: Rule,
    pub nodes: Vec<NodeId>,
    pub queries: Vec<Word>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnerConfig {
    /// Abort after this many rule applications.
    pub step_cap: u64,
    /// Record the norm after every rule application.
    pub track_norm: bool,
    pub log_events: bool,
    /// Fail as soon as a rule postcondition or the norm increase is violated.
    pub check_invariants: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { step_cap: 1_000_000, track_norm: false, log_events: false, check_invariants: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LearnError {
    Tree(TreeError),
    Oracle(OracleError),
    Mealy(MealyError),
    /// The step cap was reached before the teacher accepted.
    StepCap(u64),
    /// A rule was applied outside its precondition.
    Precondition(Rule, &'static str),
    Invariant(String),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::Tree(e) => write!(f, "{e}"),
            LearnError::Oracle(e) => write!(f, "{e}"),
            LearnError::Mealy(e) => write!(f, "{e}"),
            LearnError::StepCap(n) => write!(f, "no convergence within {n} rule applications"),
            LearnError::Precondition(r, why) => write!(f, "rule {r} not applicable: {why}"),
            LearnError::Invariant(why) => write!(f, "invariant violated: {why}"),
        }
    }
}

impl core::error::Error for LearnError {}

impl From<TreeError> for LearnError {
    fn from(e: TreeError) -> Self {
        LearnError::Tree(e)
    }
}

impl From<OracleError> for LearnError {
    fn from(e: OracleError) -> Self {
        LearnError::Oracle(e)
    }
}

impl From<MealyError> for LearnError {
    fn from(e: MealyError) -> Self {
        LearnError::Mealy(e)
    }
}

/// Result of trying the equivalence rule.
#[derive(Debug, Clone)]
pub enum EqOutcome {
    /// The teacher accepted this hypothesis.
    Done(Hypothesis),
    /// A counterexample was processed.
    Continue,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub hypothesis: Hypothesis,
    pub metrics: RunMetrics,
    pub events: Vec<Event>,
    /// Norm before the first rule and after every non-final application.
    pub norm_trace: Vec<u64>,
    /// Basis size when rebuilding finished, for ablations that rebuild.
    pub phase1_basis: Option<usize>,
    /// The observation tree at acceptance.
    pub tree: ObservationTree,
}

/// Learner state for one run.
pub struct Learner<'a> {
    pub(crate) teacher: Teacher<'a>,
    eq: EqState,
    pub(crate) pack: &'a ReferencePack,
    pub(crate) tree: ObservationTree,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
    sul_out: Vec<Option<OutputId>>,
    pub(crate) config: LearnerConfig,
    events: Vec<Event>,
    norm_trace: Vec<u64>,
    steps: u64,
    pending: Vec<Word>,
    pub(crate) matches: MatchTable,
}

impl<'a> Learner<'a> {
    /// `pack` must have been built against `sul.inputs()`.
    pub fn new(
        sul: &'a MealyMachine,
        pack: &'a ReferencePack,
        oracle: EqOracle,
        config: LearnerConfig,
    ) -> Result<Self, LearnError> {
        sul.check_complete()?;
        if pack.machine().inputs() != sul.inputs() {
            return Err(LearnError::Mealy(MealyError::AlphabetMismatch));
        }
        let mut l = Learner {
            teacher: Teacher::new(sul),
            eq: EqState::new(oracle),
            pack,
            tree: ObservationTree::new(sul.num_inputs()),
            input_labels: sul.inputs().to_vec(),
            output_labels: pack.machine().outputs().to_vec(),
            sul_out: vec![None; sul.outputs().len()],
            config,
            events: Vec::new(),
            norm_trace: Vec::new(),
            steps: 0,
            pending: Vec::new(),
            matches: MatchTable::default(),
        };
        if config.track_norm {
            let n = compute_norm(&l.tree, l.pack);
            l.norm_trace.push(n);
        }
        Ok(l)
    }

    pub fn tree(&self) -> &ObservationTree {
        &self.tree
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.teacher.metrics
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn norm_trace(&self) -> &[u64] {
        &self.norm_trace
    }

    pub fn pack(&self) -> &ReferencePack {
        self.pack
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    fn intern(&mut self, o: OutputId) -> OutputId {
        if let Some(id) = self.sul_out[o] {
            return id;
        }
        let label = self.teacher.output_label(o);
        let id = match self.output_labels.iter().position(|l| l == label) {
            Some(id) => id,
            None => {
                self.output_labels.push(String::from(label));
                self.output_labels.len() - 1
            }
        };
        self.sul_out[o] = Some(id);
        id
    }

    /// Output query through the tree: words already stored cost nothing.
    pub(crate) fn oq(&mut self, w: &[InputId]) -> Result<NodeId, LearnError> {
        if self.config.log_events {
            self.pending.push(w.to_vec());
        }
        if let Some(n) = self.tree.get(self.tree.root(), w) {
            return Ok(n);
        }
        let outs = self.teacher.output_query(w)?;
        let outs: Vec<OutputId> = outs.into_iter().map(|o| self.intern(o)).collect();
        Ok(self.tree.add_word(w, &outs)?)
    }

    /// Bookkeeping after a rule application.
    pub(crate) fn record(&mut self, rule: Rule, nodes: &[NodeId], track: bool) -> Result<(), LearnError> {
        *self.teacher.metrics.rule_applications.entry(rule).or_insert(0) += 1;
        self.steps += 1;
        let queries = core::mem::take(&mut self.pending);
        if self.config.log_events {
            self.events.push(Event { rule, nodes: nodes.to_vec(), queries });
        }
        if track && self.config.track_norm {
            let n = compute_norm(&self.tree, self.pack);
            let prev = *self.norm_trace.last().unwrap();
            self.norm_trace.push(n);
            if self.config.check_invariants && n <= prev {
                return Err(LearnError::Invariant(alloc::format!(
                    "norm did not increase after {rule}: {prev} -> {n}"
                )));
            }
        }
        if self.steps >= self.config.step_cap {
            return Err(LearnError::StepCap(self.steps));
        }
        Ok(())
    }

    pub(crate) fn postcondition(&self, rule: Rule, ok: bool) -> Result<(), LearnError> {
        if self.config.check_invariants && !ok {
            return Err(LearnError::Invariant(alloc::format!("postcondition of {rule} violated")));
        }
        Ok(())
    }

    // ---- extension ----

    pub fn find_extension(&self) -> Option<(NodeId, InputId)> {
        let k = self.tree.num_inputs();
        self.tree
            .basis()
            .iter()
            .find_map(|&q| (0..k).find(|&i| self.tree.child(q, i).is_none()).map(|i| (q, i)))
    }

    pub fn rule_extension(&mut self, q: NodeId, i: InputId) -> Result<(), LearnError> {
        if !self.tree.is_basis(q) || self.tree.child(q, i).is_some() {
            return Err(LearnError::Precondition(Rule::Extension, "δᵀ(q,i) is defined"));
        }
        let mut w = self.tree.access(q);
        w.push(i);
        self.oq(&w)?;
        self.record(Rule::Extension, &[q], true)
    }

    // ---- separation ----

    pub fn find_separation(&self) -> Option<(NodeId, NodeId, NodeId)> {
        self.tree.frontier().into_iter().find_map(|r| {
            let c = self.tree.candidates(r);
            (c.len() >= 2).then(|| (r, c[0], c[1]))
        })
    }

    pub fn rule_separation(&mut self, r: NodeId, q: NodeId, q2: NodeId) -> Result<(), LearnError> {
        if q == q2 || self.tree.is_apart(r, q) || self.tree.is_apart(r, q2) {
            return Err(LearnError::Precondition(Rule::Separation, "r is apart from q or q′"));
        }
        let sigma = self
            .tree
            .apart(q, q2)
            .ok_or(LearnError::Precondition(Rule::Separation, "q and q′ are not apart"))?;
        let mut w = self.tree.access(r);
        w.extend_from_slice(&sigma);
        self.oq(&w)?;
        self.postcondition(Rule::Separation, self.tree.is_apart(r, q) || self.tree.is_apart(r, q2))?;
        self.record(Rule::Separation, &[r, q, q2], true)
    }

    // ---- promotion ----

    pub fn find_promotion(&self) -> Option<NodeId> {
        self.tree.frontier().into_iter().find(|&r| self.is_isolated(r))
    }

    pub(crate) fn is_isolated(&self, r: NodeId) -> bool {
        self.tree.basis().iter().all(|&b| self.tree.is_apart(r, b))
    }

    pub fn rule_promotion(&mut self, r: NodeId) -> Result<(), LearnError> {
        if !self.tree.is_frontier(r) || !self.is_isolated(r) {
            return Err(LearnError::Precondition(Rule::Promotion, "r is not an isolated frontier state"));
        }
        self.tree.promote(r);
        self.record(Rule::Promotion, &[r], true)
    }

    // ---- equivalence ----

    pub fn hypothesis(&self) -> Result<Hypothesis, LearnError> {
        Ok(self.tree.fold_hypothesis(&self.input_labels, &self.output_labels)?)
    }

    pub fn rule_equivalence(&mut self) -> Result<EqOutcome, LearnError> {
        if !self.tree.is_adequate() {
            return Err(LearnError::Precondition(Rule::Equivalence, "tree is not adequate"));
        }
        let h = self.hypothesis()?;
        let rho = match self.tree.check_consistency(&h) {
            Some(rho) => rho,
            None => match self.eq.query(&mut self.teacher, &h.machine)? {
                None => {
                    self.teacher.metrics.learned_states = h.num_states();
                    self.record(Rule::Equivalence, &[], false)?;
                    return Ok(EqOutcome::Done(h));
                }
                Some((w, outs)) => {
                    let outs: Vec<OutputId> = outs.into_iter().map(|o| self.intern(o)).collect();
                    self.tree.add_word(&w, &outs)?;
                    w
                }
            },
        };
        let sigma = self.shortest_disagreeing_prefix(&h, &rho).ok_or_else(|| {
            LearnError::Invariant(String::from("counterexample shows no hypothesis/tree disagreement"))
        })?;
        self.proc_counterexample(&h, &sigma)?;
        let isolated = self.find_promotion().is_some();
        self.postcondition(Rule::Equivalence, isolated)?;
        self.record(Rule::Equivalence, &[], true)?;
        Ok(EqOutcome::Continue)
    }

    /// Shortest prefix σ of a stored word with `δᴴ(σ) # δᵀ(σ)`.
    pub fn shortest_disagreeing_prefix(&self, h: &Hypothesis, rho: &[InputId]) -> Option<Word> {
        let m = &h.machine;
        let mut s = m.initial();
        let mut node = self.tree.root();
        for len in 0..=rho.len() {
            if self.tree.is_apart(h.basis[s], node) {
                return Some(rho[..len].to_vec());
            }
            if len == rho.len() {
                break;
            }
            s = m.step(s, rho[len])?.0;
            node = self.tree.child(node, rho[len])?.1;
        }
        None
    }

    /// Narrows the disagreement `δᴴ(σ) # δᵀ(σ)` down to a frontier state by
    /// binary search, one output query per halving.
    pub fn proc_counterexample(&mut self, h: &Hypothesis, sigma: &[InputId]) -> Result<(), LearnError> {
        let m = &h.machine;
        let mut sigma: Word = sigma.to_vec();
        loop {
            let q = h.basis[m.target(m.initial(), &sigma).expect("complete")];
            let r = self.tree.get(self.tree.root(), &sigma).ok_or(LearnError::Precondition(
                Rule::Equivalence,
                "counterexample prefix is not in the tree",
            ))?;
            if self.tree.is_basis(r) || self.tree.is_frontier(r) {
                return Ok(());
            }
            let eta = self.tree.apart(q, r).ok_or(LearnError::Precondition(
                Rule::Equivalence,
                "hypothesis and tree states are not apart",
            ))?;
            // length of the prefix reaching the frontier
            let mut node = self.tree.root();
            let mut rho_len = 0;
            while self.tree.is_basis(node) {
                node = self.tree.child(node, sigma[rho_len]).expect("stored").1;
                rho_len += 1;
            }
            let h_mid = (rho_len + sigma.len()) / 2;
            let (s1, s2) = sigma.split_at(h_mid);
            let q1 = h.basis[m.target(m.initial(), s1).expect("complete")];
            let mut w = self.tree.access(q1);
            w.extend_from_slice(s2);
            let split = w.len();
            w.extend_from_slice(&eta);
            self.oq(&w)?;
            let x = self.tree.get(self.tree.root(), &w[..split]).expect("just queried");
            sigma = if self.tree.is_apart(q, x) { w[..split].to_vec() } else { s1.to_vec() };
        }
    }

    /// Tries `rule` with its first applicable parameters. Returns whether it
    /// was applied; the equivalence rule reports acceptance separately.
    pub fn try_rule(&mut self, rule: Rule) -> Result<Step, LearnError> {
        let applied = match rule {
            Rule::Extension => match self.find_extension() {
                Some((q, i)) => self.rule_extension(q, i).map(|_| true)?,
                None => false,
            },
            Rule::Separation => match self.find_separation() {
                Some((r, q, q2)) => self.rule_separation(r, q, q2).map(|_| true)?,
                None => false,
            },
            Rule::Promotion => match self.find_promotion() {
                Some(r) => self.rule_promotion(r).map(|_| true)?,
                None => false,
            },
            Rule::Equivalence => {
                if !self.tree.is_adequate() {
                    false
                } else {
                    match self.rule_equivalence()? {
                        EqOutcome::Done(h) => return Ok(Step::Done(h)),
                        EqOutcome::Continue => true,
                    }
                }
            }
            other => self.try_adaptive(other)?,
        };
        Ok(if applied { Step::Applied(rule) } else { Step::Inapplicable })
    }

    /// Applies the first applicable rule of `rules`.
    pub fn step_rules(&mut self, rules: &[Rule]) -> Result<Step, LearnError> {
        for &r in rules {
            match self.try_rule(r)? {
                Step::Inapplicable => continue,
                s => return Ok(s),
            }
        }
        Ok(Step::Inapplicable)
    }

    pub(crate) fn finish(self, hypothesis: Hypothesis, phase1_basis: Option<usize>) -> RunResult {
        RunResult {
            hypothesis,
            metrics: self.teacher.metrics,
            events: self.events,
            norm_trace: self.norm_trace,
            phase1_basis,
            tree: self.tree,
        }
    }

    /// Frontier statuses, for diagnostics.
    pub fn frontier_statuses(&self) -> Vec<(NodeId, FrontierStatus)> {
        self.tree.frontier_statuses()
    }
}

/// Outcome of one scheduling step.
#[derive(Debug, Clone)]
pub enum Step {
    Applied(Rule),
    Done(Hypothesis),
    Inapplicable,
}

/// Plain L#: the adaptive loop with every adaptive rule disabled.
pub fn run_lsharp(
    sul: &MealyMachine,
    oracle: EqOracle,
    config: LearnerConfig,
) -> Result<RunResult, LearnError> {
    let pack = ReferencePack::empty(sul.inputs());
    drive(sul, &pack, oracle, Ablation::LSharp, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mealy::{language_equivalent, MealyBuilder};

    fn one_state(k: usize) -> MealyMachine {
        let mut b = MealyBuilder::new();
        for i in 0..k {
            b.edge("s", &alloc::format!("i{i}"), "0", "s").unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn one_state_sul_needs_k_extensions_and_one_eq() {
        let m = one_state(3);
        let res = run_lsharp(&m, EqOracle::Perfect, LearnerConfig::default()).unwrap();
        assert_eq!(res.metrics.oq_count, 3);
        assert_eq!(res.metrics.eq_count, 1);
        assert_eq!(res.metrics.rule_count(Rule::Extension), 3);
        assert_eq!(res.hypothesis.num_states(), 1);
    }

    #[test]
    fn learns_a_counter() {
        let mut b = MealyBuilder::new();
        for s in 0..5 {
            let out = if s == 4 { "1" } else { "0" };
            b.edge(&alloc::format!("c{s}"), "inc", out, &alloc::format!("c{}", (s + 1) % 5)).unwrap();
            b.edge(&alloc::format!("c{s}"), "rst", "0", "c0").unwrap();
        }
        b.initial("c0");
        let m = b.build().unwrap();
        let cfg = LearnerConfig { track_norm: true, check_invariants: true, ..Default::default() };
        let res = run_lsharp(&m, EqOracle::Perfect, cfg).unwrap();
        assert!(language_equivalent(&res.hypothesis.machine, &m).unwrap().is_equivalent());
        assert_eq!(res.metrics.learned_states, 5);
        assert!(res.metrics.eq_count <= 5);
        assert!(res.norm_trace.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rule_ids_round_trip() {
        for r in Rule::ALL {
            assert_eq!(r.id().parse::<Rule>().unwrap(), r);
        }
    }
}
