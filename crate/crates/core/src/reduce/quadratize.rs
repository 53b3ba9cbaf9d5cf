use std::collections::{BTreeMap, HashMap};

use super::BinaryPolynomial;
use crate::error::{Error, Result};
use crate::lattice::HeavyHexGraph;

/// Auxiliary binary standing in for the product `x_i x_j` of `pair`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxVar {
    pub aux: usize,
    pub pair: (usize, usize),
    /// Sum of `|c|` over the cubic terms rewritten through this auxiliary.
    pub substituted_weight: f64,
}

/// Quadratic binary program equivalent to a cubic one at its optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratizedModel {
    pub base: BinaryPolynomial,
    pub aux_map: Vec<AuxVar>,
    pub penalty_weight: f64,
    pub original_n: usize,
}

/// Rosenberg order reduction, substituting the lexicographically smallest
/// pair of every cubic monomial.
pub fn quadratize(poly: &BinaryPolynomial, penalty_weight: f64) -> Result<QuadratizedModel> {
    reduce(poly, penalty_weight, |t| (t[0], t[1]))
}

/// Rosenberg order reduction that substitutes the two `V3` endpoints of each
/// lattice triple. Monomials not found in the graph's `w_set` fall back to
/// the lexicographically smallest pair.
pub fn quadratize_on_lattice(
    poly: &BinaryPolynomial,
    penalty_weight: f64,
    graph: &HeavyHexGraph,
) -> Result<QuadratizedModel> {
    let roles: HashMap<[usize; 3], (usize, usize)> = graph
        .w_set
        .iter()
        .map(|w| {
            let mut key = [w.center, w.n1, w.n2];
            key.sort_unstable();
            (key, (w.n1.min(w.n2), w.n1.max(w.n2)))
        })
        .collect();
    reduce(poly, penalty_weight, |t| {
        roles.get(&[t[0], t[1], t[2]]).copied().unwrap_or((t[0], t[1]))
    })
}

fn reduce<F>(poly: &BinaryPolynomial, penalty_weight: f64, choose: F) -> Result<QuadratizedModel>
where
    F: Fn(&[usize]) -> (usize, usize),
{
    poly.check_order()?;
    if !(penalty_weight > 0.0 && penalty_weight.is_finite()) {
        return Err(Error::InvalidPenalty(penalty_weight));
    }
    let n = poly.n_vars;
    let mut aux_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut aux_map: Vec<AuxVar> = Vec::new();
    let mut rewritten: Vec<(Vec<usize>, f64)> = Vec::new();

    for (term, &c) in &poly.terms {
        if term.len() < 3 {
            rewritten.push((term.clone(), c));
            continue;
        }
        let (p, q) = choose(term);
        let rest = *term
            .iter()
            .find(|&&v| v != p && v != q)
            .expect("cubic monomial has three distinct variables");
        let a = *aux_of.entry((p, q)).or_insert_with(|| {
            aux_map.push(AuxVar {
                aux: n + aux_map.len(),
                pair: (p, q),
                substituted_weight: 0.0,
            });
            n + aux_map.len() - 1
        });
        aux_map[a - n].substituted_weight += c.abs();
        rewritten.push((vec![a, rest], c));
    }

    let mut base = BinaryPolynomial::new(n + aux_map.len());
    for (term, c) in rewritten {
        base.add_term(&term, c);
    }
    // P * (x_p x_q - 2 x_p a - 2 x_q a + 3 a) is 0 iff a = x_p x_q, else >= P
    for av in &aux_map {
        let (p, q) = av.pair;
        base.add_term(&[p, q], penalty_weight);
        base.add_term(&[p, av.aux], -2.0 * penalty_weight);
        base.add_term(&[q, av.aux], -2.0 * penalty_weight);
        base.add_term(&[av.aux], 3.0 * penalty_weight);
    }
    base.prune();

    Ok(QuadratizedModel {
        base,
        aux_map,
        penalty_weight,
        original_n: n,
    })
}

impl QuadratizedModel {
    pub fn aux_count(&self) -> usize {
        self.aux_map.len()
    }

    /// Whether the penalty strictly dominates every substituted coefficient,
    /// the condition under which the reduced minimum equals the original.
    pub fn penalty_sufficient(&self) -> bool {
        self.aux_map
            .iter()
            .all(|a| self.penalty_weight > a.substituted_weight)
    }

    /// Extend an original assignment with consistent auxiliaries.
    pub fn lift_assignment(&self, x: &[u8]) -> Vec<u8> {
        assert_eq!(x.len(), self.original_n);
        let mut full = x.to_vec();
        full.extend(self.aux_map.iter().map(|a| x[a.pair.0] & x[a.pair.1]));
        full
    }

    /// Every auxiliary equals the product it replaces.
    pub fn aux_consistent(&self, full: &[u8]) -> bool {
        self.aux_map
            .iter()
            .all(|a| full[a.aux] == full[a.pair.0] & full[a.pair.1])
    }

    /// Restrict a full assignment to the original variables.
    pub fn back_map<'a>(&self, full: &'a [u8]) -> &'a [u8] {
        &full[..self.original_n]
    }
}
