//! Seeded random Mealy machines for tests and benchmarks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mealy::{minimize_restricted, MealyMachine, OutputId, StateId};

/// Shape of a generated machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Every state reaches every other state.
    pub strongly_connected: bool,
    /// Redraw until no two states are equivalent (bounded retries).
    pub minimal: bool,
}

impl GenParams {
    pub fn new(states: usize, inputs: usize, outputs: usize) -> Self {
        GenParams { states, inputs, outputs, strongly_connected: true, minimal: true }
    }
}

/// A complete machine with states `s0..`, inputs `a, b, ..` and outputs
/// `o0..`, initial state `s0`.
///
/// Strong connectivity comes from a random Hamiltonian cycle laid over the
/// transition table before the remaining entries are drawn. If no minimal
/// machine turns up within 64 draws, the last draw is returned.
pub fn random_machine(params: GenParams, seed: u64) -> MealyMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_machine_with(params, &mut rng)
}

pub fn random_machine_with<R: Rng>(params: GenParams, rng: &mut R) -> MealyMachine {
    let GenParams { states: n, inputs: k, outputs: o, .. } = params;
    assert!(n >= 1 && k >= 1 && o >= 1, "empty machine shape");
    let mut last = None;
    for _ in 0..64 {
        let m = draw(params, rng);
        if !params.minimal || is_minimal(&m) {
            return m;
        }
        last = Some(m);
    }
    last.expect("at least one draw")
}

fn draw<R: Rng>(params: GenParams, rng: &mut R) -> MealyMachine {
    let GenParams { states: n, inputs: k, outputs: o, .. } = params;
    let mut table: Vec<Option<(StateId, OutputId)>> = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        table.push(Some((rng.gen_range(0..n), rng.gen_range(0..o))));
    }
    if params.strongly_connected && n > 1 {
        let mut order: Vec<StateId> = (1..n).collect();
        order.shuffle(rng);
        order.insert(0, 0);
        for w in 0..n {
            let (from, to) = (order[w], order[(w + 1) % n]);
            let i = rng.gen_range(0..k);
            table[from * k + i] = Some((to, table[from * k + i].unwrap().1));
        }
    }
    MealyMachine::from_parts(
        (0..n).map(|q| format!("s{q}")).collect(),
        input_labels(k),
        (0..o).map(|x| format!("o{x}")).collect(),
        0,
        table,
    )
    .expect("well-formed table")
}

/// `a, b, .., z, i26, i27, ..`
pub fn input_labels(k: usize) -> Vec<String> {
    (0..k)
        .map(|i| if i < 26 { String::from((b'a' + i as u8) as char) } else { format!("i{i}") })
        .collect()
}

fn is_minimal(m: &MealyMachine) -> bool {
    let min = minimize_restricted(m, m.inputs()).expect("complete");
    min.0.num_states() == m.reachable_states().len()
}

/// A random partial machine: each transition is defined with probability
/// `density`. Used to exercise total apartness.
pub fn random_partial(n: usize, k: usize, o: usize, density: f64, seed: u64) -> MealyMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = (0..n * k)
        .map(|_| rng.gen_bool(density).then(|| (rng.gen_range(0..n), rng.gen_range(0..o))))
        .collect();
    MealyMachine::from_parts(
        (0..n).map(|q| format!("s{q}")).collect(),
        input_labels(k),
        (0..o).map(|x| format!("o{x}")).collect(),
        0,
        table,
    )
    .expect("well-formed table")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_machines_have_the_requested_shape() {
        for seed in 0..20 {
            let p = GenParams::new(12, 3, 2);
            let m = random_machine(p, seed);
            assert!(m.is_complete());
            assert_eq!(m.num_states(), 12);
            assert_eq!(m.reachable_states().len(), 12);
            assert!(is_minimal(&m), "seed {seed}");
            for q in 0..12 {
                assert_eq!(m.with_initial(q).reachable_states().len(), 12);
            }
            assert_eq!(m, random_machine(p, seed));
        }
    }
}
