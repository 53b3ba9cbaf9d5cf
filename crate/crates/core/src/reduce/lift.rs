use std::collections::BTreeMap;
use std::fmt;

use super::BinaryPolynomial;
use crate::error::{Error, Result};

/// Variable of the lifted program. Names follow `x{i}`, `y{i}_{j}`,
/// `w{i}_{j}_{k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LpVar {
    X(usize),
    Y(usize, usize),
    W(usize, usize, usize),
}

impl LpVar {
    pub fn factors(&self) -> Vec<usize> {
        match *self {
            LpVar::X(i) => vec![i],
            LpVar::Y(i, j) => vec![i, j],
            LpVar::W(i, j, k) => vec![i, j, k],
        }
    }

    pub fn is_product(&self) -> bool {
        !matches!(self, LpVar::X(_))
    }

    pub fn parse(name: &str) -> Option<Self> {
        let (head, rest) = name.split_at_checked(1)?;
        let ids: Vec<usize> = rest
            .split('_')
            .map(|s| {
                // reject signs and leading zeros so names round-trip exactly
                if s.is_empty() || (s.len() > 1 && s.starts_with('0')) || !s.bytes().all(|b| b.is_ascii_digit()) {
                    None
                } else {
                    s.parse().ok()
                }
            })
            .collect::<Option<_>>()?;
        match (head, ids.as_slice()) {
            ("x", &[i]) => Some(LpVar::X(i)),
            ("y", &[i, j]) if i < j => Some(LpVar::Y(i, j)),
            ("w", &[i, j, k]) if i < j && j < k => Some(LpVar::W(i, j, k)),
            _ => None,
        }
    }
}

impl fmt::Display for LpVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpVar::X(i) => write!(f, "x{i}"),
            LpVar::Y(i, j) => write!(f, "y{i}_{j}"),
            LpVar::W(i, j, k) => write!(f, "w{i}_{j}_{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(LpVar, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn satisfied(&self, value: impl Fn(LpVar) -> f64, tol: f64) -> bool {
        let lhs: f64 = self.terms.iter().map(|&(v, c)| c * value(v)).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Ge => lhs >= self.rhs - tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// Binary linear program whose product variables are pinned to their
/// monomials by valid inequalities whenever the `x` variables are binary.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgramModel {
    pub n_vars: usize,
    pub objective: BTreeMap<LpVar, f64>,
    pub offset: f64,
    pub constraints: Vec<LinearConstraint>,
    pub var_kinds: BTreeMap<LpVar, VarKind>,
    /// Bounds of non-binary variables.
    pub bounds: BTreeMap<LpVar, (f64, f64)>,
    pub product_map: BTreeMap<LpVar, Vec<usize>>,
}

/// Lift with continuous product variables in `[0, 1]`.
pub fn lift_to_lp(poly: &BinaryPolynomial) -> Result<LinearProgramModel> {
    lift_to_lp_with(poly, false)
}

/// Lift; `binary_products` declares product variables binary instead of
/// continuous.
pub fn lift_to_lp_with(poly: &BinaryPolynomial, binary_products: bool) -> Result<LinearProgramModel> {
    poly.check_order()?;
    let mut lp = LinearProgramModel {
        n_vars: poly.n_vars,
        objective: BTreeMap::new(),
        offset: poly.offset(),
        constraints: Vec::new(),
        var_kinds: (0..poly.n_vars).map(|i| (LpVar::X(i), VarKind::Binary)).collect(),
        bounds: BTreeMap::new(),
        product_map: BTreeMap::new(),
    };
    for (term, &c) in &poly.terms {
        let var = match term.as_slice() {
            [] => continue,
            &[i] => LpVar::X(i),
            &[i, j] => LpVar::Y(i, j),
            &[i, j, k] => LpVar::W(i, j, k),
            other => return Err(Error::OrderTooHigh(other.len())),
        };
        *lp.objective.entry(var).or_insert(0.0) += c;
        if var.is_product() && !lp.product_map.contains_key(&var) {
            lp.add_product(var, binary_products);
        }
    }
    Ok(lp)
}

impl LinearProgramModel {
    fn add_product(&mut self, var: LpVar, binary: bool) {
        let factors = var.factors();
        // v <= x_f for every factor
        for &f in &factors {
            let name = format!("c{}", self.constraints.len());
            self.constraints.push(LinearConstraint {
                name,
                terms: vec![(var, 1.0), (LpVar::X(f), -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
        // v >= sum x_f - (k - 1)
        let mut terms = vec![(var, 1.0)];
        terms.extend(factors.iter().map(|&f| (LpVar::X(f), -1.0)));
        let name = format!("c{}", self.constraints.len());
        self.constraints.push(LinearConstraint {
            name,
            terms,
            sense: Sense::Ge,
            rhs: -(factors.len() as f64 - 1.0),
        });
        if binary {
            self.var_kinds.insert(var, VarKind::Binary);
        } else {
            self.var_kinds.insert(var, VarKind::Continuous);
            self.bounds.insert(var, (0.0, 1.0));
        }
        self.product_map.insert(var, factors);
    }

    pub fn product_count(&self) -> usize {
        self.product_map.len()
    }

    /// Variable values with every product set to its monomial.
    pub fn tight_values(&self, x: &[u8]) -> BTreeMap<LpVar, f64> {
        assert_eq!(x.len(), self.n_vars);
        let mut values: BTreeMap<LpVar, f64> = (0..self.n_vars)
            .map(|i| (LpVar::X(i), x[i] as f64))
            .collect();
        for (&var, factors) in &self.product_map {
            let on = factors.iter().all(|&f| x[f] == 1);
            values.insert(var, if on { 1.0 } else { 0.0 });
        }
        values
    }

    pub fn objective_value(&self, values: &BTreeMap<LpVar, f64>) -> f64 {
        self.offset
            + self
                .objective
                .iter()
                .map(|(v, c)| c * values.get(v).copied().unwrap_or(0.0))
                .sum::<f64>()
    }

    pub fn is_feasible(&self, values: &BTreeMap<LpVar, f64>, tol: f64) -> bool {
        let value = |v: LpVar| values.get(&v).copied().unwrap_or(0.0);
        let in_bounds = self.var_kinds.keys().all(|&v| {
            let (lo, hi) = self.bounds.get(&v).copied().unwrap_or((0.0, 1.0));
            value(v) >= lo - tol && value(v) <= hi + tol
        });
        in_bounds && self.constraints.iter().all(|c| c.satisfied(value, tol))
    }

    /// Read the objective back as a polynomial through the product map.
    pub fn to_polynomial(&self) -> BinaryPolynomial {
        let mut poly = BinaryPolynomial::new(self.n_vars);
        if self.offset != 0.0 {
            poly.add_term(&[], self.offset);
        }
        for (var, &c) in &self.objective {
            let factors = match self.product_map.get(var) {
                Some(f) => f.clone(),
                None => var.factors(),
            };
            poly.add_term(&factors, c);
        }
        poly
    }

    /// Every declared variable referenced by a constraint or the objective.
    pub fn references_declared_only(&self) -> bool {
        let declared = |v: &LpVar| self.var_kinds.contains_key(v);
        self.objective.keys().all(declared)
            && self
                .constraints
                .iter()
                .all(|c| c.terms.iter().all(|(v, _)| declared(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IsingModel;
    use crate::reduce::spin_to_binary;

    #[test]
    fn linear_only() {
        let mut p = BinaryPolynomial::new(3);
        p.add_term(&[0], 2.0);
        p.add_term(&[2], -1.0);
        p.add_term(&[], 4.0);
        let lp = lift_to_lp(&p).unwrap();
        assert!(lp.constraints.is_empty());
        assert_eq!(lp.product_count(), 0);
        assert_eq!(lp.offset, 4.0);
    }

    #[test]
    fn one_quadratic_monomial() {
        let mut p = BinaryPolynomial::new(2);
        p.add_term(&[0, 1], 3.0);
        let lp = lift_to_lp(&p).unwrap();
        assert_eq!(lp.constraints.len(), 3);
        assert_eq!(lp.bounds[&LpVar::Y(0, 1)], (0.0, 1.0));
    }

    #[test]
    fn cubic_monomial_has_four_constraints() {
        let mut p = BinaryPolynomial::new(3);
        p.add_term(&[0, 1, 2], 1.0);
        let lp = lift_to_lp(&p).unwrap();
        assert_eq!(lp.constraints.len(), 4);
        assert!(lp.references_declared_only());
    }

    #[test]
    fn path_model_optimum_by_enumeration() {
        let mut m = IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0)
            .add_quadratic(1, 2, -1.0)
            .add_cubic(1, 0, 2, 1.0);
        let p = spin_to_binary(&m);
        let lp = lift_to_lp(&p).unwrap();
        let mut best = f64::INFINITY;
        for bits in 0..8u8 {
            let x: Vec<u8> = (0..3).map(|i| bits >> i & 1).collect();
            let vals = lp.tight_values(&x);
            assert!(lp.is_feasible(&vals, 0.0));
            let obj = lp.objective_value(&vals);
            assert_eq!(obj, p.value(&x));
            best = best.min(obj);
        }
        assert_eq!(best, -3.0);
    }

    #[test]
    fn products_are_forced_on_binary_points() {
        let mut p = BinaryPolynomial::new(3);
        p.add_term(&[0, 1, 2], 1.0);
        p.add_term(&[0, 1], 1.0);
        let lp = lift_to_lp(&p).unwrap();
        for bits in 0..8u8 {
            let x: Vec<u8> = (0..3).map(|i| bits >> i & 1).collect();
            let tight = lp.tight_values(&x);
            for var in lp.product_map.keys() {
                let mut off = tight.clone();
                let v = off.get_mut(var).unwrap();
                *v = 1.0 - *v;
                assert!(!lp.is_feasible(&off, 1e-9));
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for v in [LpVar::X(0), LpVar::X(17), LpVar::Y(3, 12), LpVar::W(1, 2, 30)] {
            assert_eq!(LpVar::parse(&v.to_string()), Some(v));
        }
        for bad in ["x", "x01", "y2_1", "w1_2", "z3", "x-1", "y1__2"] {
            assert_eq!(LpVar::parse(bad), None, "{bad}");
        }
    }
}
