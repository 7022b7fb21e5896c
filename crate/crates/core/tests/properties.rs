use std::collections::{HashSet, VecDeque};

use alsharp_core::adaptive::mdeg_direct;
use alsharp_core::gen::{random_machine, random_partial, GenParams};
use alsharp_core::mealy::{minimize_restricted, separating_family};
use alsharp_core::{
    build_reference_pack, language_equivalent, InputId, MatchTable, MealyMachine, NodeId,
    ObservationTree, StateId, Word,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shortest word separating `p` and `q`, found by BFS over state pairs. With
/// `total`, a word defined on exactly one side also separates.
fn brute_separator(m: &MealyMachine, p: StateId, q: StateId, total: bool) -> Option<usize> {
    let mut seen = HashSet::from([(p, q)]);
    let mut queue = VecDeque::from([((p, q), 0usize)]);
    while let Some(((a, b), d)) = queue.pop_front() {
        for i in 0..m.num_inputs() {
            match (m.step(a, i), m.step(b, i)) {
                (Some((x, o1)), Some((y, o2))) => {
                    if o1 != o2 {
                        return Some(d + 1);
                    }
                    if seen.insert((x, y)) {
                        queue.push_back(((x, y), d + 1));
                    }
                }
                (None, None) => {}
                _ if total => return Some(d + 1),
                _ => {}
            }
        }
    }
    None
}

fn separates(m: &MealyMachine, p: StateId, q: StateId, w: &[InputId], total: bool) -> bool {
    // first position where the two runs differ in output or definedness
    let (mut a, mut b) = (Some(p), Some(q));
    for &i in w {
        match (a.and_then(|s| m.step(s, i)), b.and_then(|s| m.step(s, i))) {
            (Some((x, o1)), Some((y, o2))) => {
                if o1 != o2 {
                    return true;
                }
                (a, b) = (Some(x), Some(y));
            }
            (None, None) => return false,
            _ => return total,
        }
    }
    false
}

/// A tree of random walks through `m`, with a few frontier nodes promoted.
fn tree_from(m: &MealyMachine, seed: u64, words: usize, max_len: usize) -> ObservationTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = ObservationTree::new(m.num_inputs());
    for _ in 0..words {
        let len = rng.gen_range(1..=max_len);
        let w: Word = (0..len).map(|_| rng.gen_range(0..m.num_inputs())).collect();
        let (_, outs) = m.walk(m.initial(), &w).unwrap();
        t.add_word(&w, &outs).unwrap();
    }
    for _ in 0..3 {
        let f = t.frontier();
        if f.is_empty() {
            break;
        }
        let r = f[rng.gen_range(0..f.len())];
        t.promote(r);
    }
    t
}

/// Every word of length at most `depth` over `k` inputs.
fn all_words(k: usize, depth: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..depth {
        layer = layer
            .iter()
            .flat_map(|w: &Word| (0..k).map(move |i| [w.as_slice(), &[i]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn tree_depth(t: &ObservationTree) -> usize {
    (0..t.len()).map(|q| t.depth(q)).max().unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_apartness_matches_brute_force(seed in 0u64..10_000) {
        let m = random_machine(GenParams::new(4, 2, 2), seed);
        let t = tree_from(&m, seed, 12, 6);
        let words = all_words(2, tree_depth(&t));
        let nodes: Vec<NodeId> = (0..t.len()).step_by(3).collect();
        for &q in &nodes {
            for &r in &nodes {
                let shortest = words
                    .iter()
                    .filter(|w| match (t.outputs(q, w), t.outputs(r, w)) {
                        (Some(a), Some(b)) => a != b,
                        _ => false,
                    })
                    .map(|w| w.len())
                    .min();
                let got = t.apart(q, r);
                prop_assert_eq!(got.as_ref().map(|w| w.len()), shortest);
                if let Some(w) = got {
                    prop_assert_ne!(t.outputs(q, &w), t.outputs(r, &w));
                }
            }
        }
    }

    #[test]
    fn quotient_is_equivalent_and_minimal(n in 2usize..12, k in 1usize..4, o in 1usize..4, seed in 0u64..10_000) {
        let mut p = GenParams::new(n, k, o);
        p.minimal = false;
        let m = random_machine(p, seed);
        let (q, map) = minimize_restricted(&m, m.inputs()).unwrap();
        prop_assert!(language_equivalent(&m, &q).unwrap().is_equivalent());
        for a in 0..n {
            for b in 0..n {
                let same = brute_separator(&m, a, b, false).is_none();
                prop_assert_eq!(map[a] == map[b], same);
            }
        }
    }

    #[test]
    fn match_table_agrees_with_definition(seed in 0u64..10_000) {
        let sul = random_machine(GenParams::new(5, 3, 2), seed);
        let mut r1 = random_machine(GenParams::new(3, 3, 2), seed + 1);
        r1 = r1.restrict(&sul.inputs()[..2]);
        let r2 = random_machine(GenParams::new(4, 3, 2), seed + 2);
        let pack = build_reference_pack(&[r1, r2], sul.inputs()).unwrap();
        let t = tree_from(&sul, seed, 15, 5);
        let table = MatchTable::from_scratch(&t, &pack);
        for &q in t.basis() {
            for p in 0..pack.num_states() {
                let scope = &pack.scopes()[pack.scope_of(p)];
                let (a, b) = table.mdeg(&pack, q, p);
                let (c, d) = mdeg_direct(&t, q, pack.machine(), p, &scope.inputs);
                prop_assert_eq!(a * d, b * c);
            }
        }
    }
}

#[test]
fn separating_family_against_bfs() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GenParams::new(rng.gen_range(2..=10), rng.gen_range(2..=4), rng.gen_range(2..=4));
        let m = random_machine(p, seed);
        let fam = separating_family(&m, false).unwrap();
        check_family(&m, &fam, false);
    }
    for seed in 0..50 {
        let m = random_partial(8, 3, 3, 0.7, seed);
        let fam = separating_family(&m, true).unwrap();
        check_family(&m, &fam, true);
    }
}

fn check_family(m: &MealyMachine, fam: &alsharp_core::mealy::SeparatingFamily, total: bool) {
    let n = m.num_states();
    for p in 0..n {
        for q in p + 1..n {
            let Some(len) = brute_separator(m, p, q, total) else { continue };
            let shared: Vec<&Word> =
                fam.identifiers(p).iter().filter(|w| fam.identifiers(q).contains(w)).collect();
            let best = shared.iter().filter(|w| separates(m, p, q, w, total)).map(|w| w.len()).min();
            assert_eq!(best, Some(len), "states {p},{q}");
        }
    }
}

/// A node whose subtree agrees everywhere with a reference state is never
/// apart from it, and a node apart from it never agrees everywhere.
#[test]
fn full_match_excludes_apartness() {
    let mut checked = 0;
    let mut full = 0;
    for seed in 0..1000u64 {
        let sul = random_machine(GenParams::new(3, 2, 2), seed);
        // references close to the SUL give both outcomes
        let reference = if seed % 2 == 0 { sul.clone() } else { random_machine(GenParams::new(3, 2, 2), seed / 2) };
        let pack = build_reference_pack(&[reference], sul.inputs()).unwrap();
        let t = tree_from(&sul, seed, 6, 4);
        let q = t.basis()[seed as usize % t.basis().len()];
        for p in 0..pack.num_states() {
            let (a, b) = mdeg_direct(&t, q, pack.machine(), p, &pack.scopes()[0].inputs);
            let apart = t.apart_ref(q, pack.machine(), p).is_some();
            assert_eq!(a == b, !apart, "seed {seed}");
            full += usize::from(a == b);
            checked += 1;
        }
    }
    assert!(full > 0 && full < checked);
}
