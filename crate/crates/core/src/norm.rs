//! The progress measure that every rule application increases, and its upper
//! bound in terms of the SUL and the references.

use crate::mealy::ReferencePack;
use crate::obstree::ObservationTree;

/// Summands of the norm, kept apart for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormParts {
    /// `|B|(|B|+1)`
    pub basis: u64,
    /// defined basis transitions
    pub defined: u64,
    /// apart basis/frontier pairs
    pub apart_bf: u64,
    /// `(q,p,p′)` with `δᵀ(q, sep(p,p′))` defined
    pub sep_applied: u64,
    /// `(B ∪ F) × Q^R` apart pairs
    pub apart_ref: u64,
    /// basis/frontier pairs carrying the separator of their reference images
    pub rebuilt: u64,
}

impl NormParts {
    pub fn total(&self) -> u64 {
        self.basis + self.defined + self.apart_bf + self.sep_applied + self.apart_ref + self.rebuilt
    }
}

pub fn compute_norm(tree: &ObservationTree, pack: &ReferencePack) -> u64 {
    norm_parts(tree, pack).total()
}

/// With several references the last summand is summed per reference: a
/// basis/frontier pair counts once for every reference in which both access
/// words are defined and lead to apart states whose separator is defined
/// from both nodes. With one reference this is the single-reference summand.
pub fn norm_parts(tree: &ObservationTree, pack: &ReferencePack) -> NormParts {
    let basis = tree.basis();
    let frontier = tree.frontier();
    let b = basis.len() as u64;
    let k = tree.num_inputs();
    let mut parts = NormParts { basis: b * (b + 1), ..NormParts::default() };
    for &q in basis {
        parts.defined += (0..k).filter(|&i| tree.child(q, i).is_some()).count() as u64;
        for &r in &frontier {
            if tree.is_apart(q, r) {
                parts.apart_bf += 1;
            }
        }
    }
    if pack.is_empty() {
        return parts;
    }
    let n = pack.num_states();
    for &q in basis {
        for p in 0..n {
            for p2 in 0..n {
                if let Some(sigma) = pack.sep_opt(p, p2) {
                    if tree.get(q, sigma).is_some() {
                        parts.sep_applied += 1;
                    }
                }
            }
        }
    }
    let r_machine = pack.machine();
    for &q in basis.iter().chain(frontier.iter()) {
        for p in 0..n {
            if tree.apart_ref(q, r_machine, p).is_some() {
                parts.apart_ref += 1;
            }
        }
    }
    for scope in 0..pack.scopes().len() {
        for &q in basis {
            let Some(p) = pack.reach(scope, &tree.access(q)) else { continue };
            for &r in &frontier {
                let Some(p2) = pack.reach(scope, &tree.access(r)) else { continue };
                if let Some(sigma) = pack.sep_opt(p, p2) {
                    if tree.get(q, sigma).is_some() && tree.get(r, sigma).is_some() {
                        parts.rebuilt += 1;
                    }
                }
            }
        }
    }
    parts
}

/// `n(n+1) + kn + (n−1)(kn+1) + no² + (kn+1)o + n(kn+1)`.
pub fn norm_bound(n: u64, k: u64, o: u64) -> u64 {
    n * (n + 1) + k * n + (n.saturating_sub(1)) * (k * n + 1) + n * o * o + (k * n + 1) * o + n * (k * n + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tree_empty_pack() {
        let t = ObservationTree::new(2);
        let p = ReferencePack::empty(&["a", "b"]);
        assert_eq!(compute_norm(&t, &p), 2);
    }

    #[test]
    fn extension_increases_norm() {
        let mut t = ObservationTree::new(2);
        let p = ReferencePack::empty(&["a", "b"]);
        let before = compute_norm(&t, &p);
        t.add_word(&[0], &[0]).unwrap();
        assert!(compute_norm(&t, &p) > before);
    }

    #[test]
    fn bound_formula() {
        // n=1, k=1, o=0: 2 + 1 + 0 + 0 + 0 + 2
        assert_eq!(norm_bound(1, 1, 0), 5);
        assert_eq!(norm_bound(2, 2, 1), 6 + 4 + 5 + 2 + 5 + 10);
    }
}
