//! Simulated teacher: output queries against a known SUL and equivalence
//! queries by random Wp testing or exact product search.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::learner::Rule;
use crate::mealy::{
    language_equivalent, output_map, separating_family, state_cover, Equivalence, InputId,
    MealyMachine, OutputId, Word,
};

/// Query counters of one learning run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub oq_count: u64,
    pub eq_count: u64,
    pub input_symbols_oq: u64,
    pub input_symbols_eq: u64,
    pub rule_applications: BTreeMap<Rule, u64>,
    pub learned_states: usize,
}

impl RunMetrics {
    pub fn total_inputs(&self) -> u64 {
        self.input_symbols_oq + self.input_symbols_eq
    }

    pub fn rule_count(&self, r: Rule) -> u64 {
        self.rule_applications.get(&r).copied().unwrap_or(0)
    }

    pub fn total_rule_applications(&self) -> u64 {
        self.rule_applications.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// An input index outside the SUL alphabet.
    UnknownInput(InputId),
    /// The hypothesis does not share the SUL alphabet.
    AlphabetMismatch,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::UnknownInput(i) => write!(f, "input index {i} is not in the SUL alphabet"),
            OracleError::AlphabetMismatch => f.write_str("hypothesis alphabet differs from the SUL"),
        }
    }
}

impl core::error::Error for OracleError {}

/// Answers output queries on a complete SUL and keeps the run's counters.
#[derive(Debug, Clone)]
pub struct Teacher<'a> {
    sul: &'a MealyMachine,
    pub metrics: RunMetrics,
}

impl<'a> Teacher<'a> {
    pub fn new(sul: &'a MealyMachine) -> Self {
        Teacher { sul, metrics: RunMetrics::default() }
    }

    pub fn sul(&self) -> &'a MealyMachine {
        self.sul
    }

    /// `λ(q₀, w)` as SUL output ids. Costs one query and `|w|` symbols.
    pub fn output_query(&mut self, w: &[InputId]) -> Result<Vec<OutputId>, OracleError> {
        if let Some(&bad) = w.iter().find(|&&i| i >= self.sul.num_inputs()) {
            return Err(OracleError::UnknownInput(bad));
        }
        self.metrics.oq_count += 1;
        self.metrics.input_symbols_oq += w.len() as u64;
        Ok(self.sul.walk(self.sul.initial(), w).expect("SUL is complete").1)
    }

    pub fn output_label(&self, o: OutputId) -> &str {
        self.sul.output_label(o)
    }
}

/// Random Wp testing parameters.
///
/// A test is `access · middle · suffix`: the access word of a uniformly chosen
/// hypothesis state, a middle part of at least `minimal_size` random symbols
/// that keeps growing while a uniform draw exceeds `1/(random_length+1)`, and
/// a suffix drawn with equal odds from the reached state's identifiers or from
/// the union of all identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WpParams {
    pub minimal_size: usize,
    pub random_length: usize,
    /// Maximum number of tests per equivalence query. `None` (the default)
    /// keeps testing until a counterexample is found, after first checking
    /// exactly that one exists, so an equivalent hypothesis is accepted at no
    /// cost and runs are compared on the work spent finding the SUL.
    pub bound: Option<u64>,
    pub seed: u64,
}

impl Default for WpParams {
    fn default() -> Self {
        WpParams { minimal_size: 3, random_length: 3, bound: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqOracle {
    /// Shortest counterexample by product search; charges its length.
    Perfect,
    RandomWp(WpParams),
}

/// Stateful equivalence oracle; the RNG persists across queries of one run.
#[derive(Debug, Clone)]
pub(crate) struct EqState {
    kind: EqOracle,
    rng: ChaCha8Rng,
}

/// An equivalence query's answer: `None` for yes, or a counterexample with the
/// SUL's outputs on it.
pub(crate) type EqAnswer = Option<(Word, Vec<OutputId>)>;

impl EqState {
    pub(crate) fn new(kind: EqOracle) -> Self {
        let seed = match kind {
            EqOracle::Perfect => 0,
            EqOracle::RandomWp(p) => p.seed,
        };
        EqState { kind, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub(crate) fn query(
        &mut self,
        teacher: &mut Teacher<'_>,
        h: &MealyMachine,
    ) -> Result<EqAnswer, OracleError> {
        teacher.metrics.eq_count += 1;
        let sul = teacher.sul;
        if h.inputs() != sul.inputs() {
            return Err(OracleError::AlphabetMismatch);
        }
        match self.kind {
            EqOracle::Perfect => {
                match language_equivalent(h, sul).map_err(|_| OracleError::AlphabetMismatch)? {
                    Equivalence::Equivalent => Ok(None),
                    Equivalence::Counterexample(w) => {
                        teacher.metrics.input_symbols_eq += w.len() as u64;
                        let outs = sul.walk(sul.initial(), &w).expect("complete").1;
                        Ok(Some((w, outs)))
                    }
                }
            }
            EqOracle::RandomWp(params) => self.random_wp(teacher, h, params),
        }
    }

    fn random_wp(
        &mut self,
        teacher: &mut Teacher<'_>,
        h: &MealyMachine,
        params: WpParams,
    ) -> Result<EqAnswer, OracleError> {
        let sul = teacher.sul;
        if params.bound.is_none()
            && language_equivalent(h, sul).map_err(|_| OracleError::AlphabetMismatch)?.is_equivalent()
        {
            return Ok(None);
        }
        let k = h.num_inputs();
        if k == 0 {
            return Ok(None);
        }
        let cover = state_cover(h);
        let family = separating_family(h, false).map_err(|_| OracleError::AlphabetMismatch)?;
        let global = family.union();
        // sul output id -> hypothesis output id, by label
        let omap = output_map(sul, h);
        let mut tests: u64 = 0;
        let mut word: Word = Vec::new();
        loop {
            if params.bound.is_some_and(|b| tests >= b) {
                return Ok(None);
            }
            tests += 1;
            word.clear();
            let (access, _) = &cover[self.rng.gen_range(0..cover.len())];
            word.extend_from_slice(access);
            let mut size = params.minimal_size;
            let stop = 1.0 / (params.random_length as f64 + 1.0);
            while size > 0 || self.rng.gen::<f64>() > stop {
                word.push(self.rng.gen_range(0..k));
                size = size.saturating_sub(1);
            }
            let reached = h.target(h.initial(), &word).expect("hypothesis is complete");
            let local = family.identifiers(reached);
            let pool = if self.rng.gen::<bool>() { local } else { &global[..] };
            if !pool.is_empty() {
                let suffix = &pool[self.rng.gen_range(0..pool.len())];
                word.extend_from_slice(suffix);
            }
            teacher.metrics.input_symbols_eq += word.len() as u64;
            let sul_out = sul.walk(sul.initial(), &word).expect("complete").1;
            let hyp_out = h.walk(h.initial(), &word).expect("complete").1;
            if let Some(pos) = (0..word.len()).find(|&j| omap[sul_out[j]] != Some(hyp_out[j])) {
                word.truncate(pos + 1);
                let outs = sul_out[..=pos].to_vec();
                return Ok(Some((word, outs)));
            }
        }
    }
}
