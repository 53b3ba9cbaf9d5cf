//! Solver-ready reformulations of spin polynomials.
//!
//! Spins are first mapped to binaries through `z = 2x - 1`. Cubic binary
//! monomials are then either order-reduced with penalised auxiliaries
//! ([`quadratize`]) or lifted into product variables with linear
//! inequalities ([`lift_to_lp`]).

mod lift;
mod lp_format;
mod quadratize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinVector};

pub use lift::{lift_to_lp, lift_to_lp_with, LinearConstraint, LinearProgramModel, LpVar, Sense, VarKind};
pub use lp_format::{export_lp_file, parse_lp, write_lp, write_qp};
pub use quadratize::{quadratize, quadratize_on_lattice, AuxVar, QuadratizedModel};

/// Multilinear polynomial over binary variables, at most cubic.
///
/// Monomials are sorted variable lists; the empty list holds the constant.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BinaryPolynomial {
    pub n_vars: usize,
    pub terms: BTreeMap<Vec<usize>, f64>,
}

impl BinaryPolynomial {
    pub fn new(n_vars: usize) -> Self {
        BinaryPolynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    /// Add `coef * prod(vars)`; duplicated variables collapse (`x^2 = x`).
    pub fn add_term(&mut self, vars: &[usize], coef: f64) {
        let mut key = vars.to_vec();
        key.sort_unstable();
        key.dedup();
        assert!(key.iter().all(|&v| v < self.n_vars), "variable out of range");
        *self.terms.entry(key).or_insert(0.0) += coef;
    }

    /// Drop exact-zero coefficients left behind by cancellation.
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    pub fn offset(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub fn value(&self, x: &[u8]) -> f64 {
        assert_eq!(x.len(), self.n_vars);
        self.terms
            .iter()
            .filter(|(k, _)| k.iter().all(|&v| x[v] == 1))
            .map(|(_, c)| c)
            .sum()
    }

    pub(crate) fn check_order(&self) -> Result<()> {
        match self.max_order() {
            o if o > 3 => Err(Error::OrderTooHigh(o)),
            _ => Ok(()),
        }
    }
}

/// Substitute `z_i = 2 x_i - 1` into every term and expand.
pub fn spin_to_binary(model: &IsingModel) -> BinaryPolynomial {
    let mut poly = BinaryPolynomial::new(model.n);
    let mut expand = |vars: &[usize], c: f64| {
        // prod (2 x_v - 1) = sum over subsets S of 2^|S| (-1)^(k - |S|) x_S
        let k = vars.len();
        for mask in 0u32..(1 << k) {
            let subset: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| vars[b]).collect();
            let sign = if (k - subset.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
            poly.add_term(&subset, c * sign * (1u64 << subset.len()) as f64);
        }
    };
    for (&i, &c) in &model.linear {
        expand(&[i], c);
    }
    for (&(i, j), &c) in &model.quadratic {
        expand(&[i, j], c);
    }
    for (&(i, j, k), &c) in &model.cubic {
        expand(&[i, j, k], c);
    }
    poly.prune();
    poly
}

/// Map a binary assignment to spins: `1 -> +1`, `0 -> -1`.
pub fn solution_to_spins(assignment: &[f64]) -> Result<SpinVector> {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &v)| match binary_value(v) {
            Some(1) => Ok(1),
            Some(_) => Ok(-1),
            None => Err(Error::NonBinary {
                var: format!("x{i}"),
                value: v,
            }),
        })
        .collect::<Result<Vec<i8>>>()
        .map(SpinVector::new)?
}

/// Solver output rounds to 0/1 when within `1e-6`.
fn binary_value(v: f64) -> Option<u8> {
    if (v - 1.0).abs() <= 1e-6 {
        Some(1)
    } else if v.abs() <= 1e-6 {
        Some(0)
    } else {
        None
    }
}

/// Solution file written by an external solver wrapper:
/// `{"objective": real, "assignment": {"x3": 1, ...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSolution {
    pub objective: f64,
    pub assignment: BTreeMap<String, f64>,
}

impl SolverSolution {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("solver solution", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serialization is infallible")
    }

    /// Build a solution for the first `x.len()` original variables.
    pub fn from_binary(objective: f64, x: &[u8]) -> Self {
        SolverSolution {
            objective,
            assignment: x
                .iter()
                .enumerate()
                .map(|(i, &v)| (format!("x{i}"), v as f64))
                .collect(),
        }
    }

    /// Values of `x0 .. x{n-1}`; auxiliary and product entries are ignored.
    pub fn original_assignment(&self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                let name = format!("x{i}");
                self.assignment
                    .get(&name)
                    .copied()
                    .ok_or_else(|| Error::parse("solver solution", format!("missing {name}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_model() -> IsingModel {
        let mut m = IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0)
            .add_quadratic(1, 2, -1.0)
            .add_cubic(1, 0, 2, 1.0);
        m
    }

    #[test]
    fn single_linear_term() {
        let mut m = IsingModel::new(1);
        m.add_linear(0, 1.0);
        let p = spin_to_binary(&m);
        assert_eq!(p.terms, BTreeMap::from([(vec![], -1.0), (vec![0], 2.0)]));
    }

    #[test]
    fn single_quadratic_term() {
        let mut m = IsingModel::new(2);
        m.add_quadratic(0, 1, 1.0);
        let p = spin_to_binary(&m);
        let want = BTreeMap::from([
            (vec![], 1.0),
            (vec![0], -2.0),
            (vec![1], -2.0),
            (vec![0, 1], 4.0),
        ]);
        assert_eq!(p.terms, want);
    }

    #[test]
    fn path_model_equivalence_all_assignments() {
        let m = path_model();
        let p = spin_to_binary(&m);
        assert_eq!(p.max_order(), 3);
        for bits in 0..8u8 {
            let x: Vec<u8> = (0..3).map(|i| bits >> i & 1).collect();
            let z = solution_to_spins(&x.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
            assert_eq!(p.value(&x), m.evaluate(&z).unwrap());
        }
    }

    #[test]
    fn spin_mapping() {
        let s = |v: &[f64]| solution_to_spins(v).unwrap().into_inner();
        assert_eq!(s(&[1.0, 1.0, 1.0]), vec![1, 1, 1]);
        assert_eq!(s(&[0.0, 0.0]), vec![-1, -1]);
        assert_eq!(s(&[1.0, 0.0, 1.0]), vec![1, -1, 1]);
        assert_eq!(s(&[0.9999999, 1e-9]), vec![1, -1]);
        assert!(matches!(solution_to_spins(&[0.5]), Err(Error::NonBinary { .. })));
    }

    #[test]
    fn solution_json() {
        let sol = SolverSolution::from_json(r#"{"objective": -3, "assignment": {"x0": 0, "x1": 0, "x2": 0, "y0_1": 0}}"#).unwrap();
        assert_eq!(sol.original_assignment(3).unwrap(), vec![0.0; 3]);
        assert!(sol.original_assignment(4).is_err());
        assert!(SolverSolution::from_json(r#"{"assignment": {}}"#).is_err());
    }
}
