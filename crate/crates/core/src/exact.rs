//! Exhaustive ground truth for desk-scale instances.
//!
//! Spin models are enumerated in Gray-code order so each step flips a single
//! spin and costs one local-field evaluation. Larger instances take their
//! optimum from an external solver certificate instead.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{magnetization, IsingModel, Provenance, SpectrumBounds, SpinVector};
use crate::reduce::{solution_to_spins, BinaryPolynomial, QuadratizedModel, SolverSolution};

/// Largest spin count accepted by [`brute_force`].
pub const MAX_BRUTE_FORCE_VARS: usize = 30;
/// Cap on stored minimizers; `degeneracy_count` keeps the true total.
pub const MAX_STORED_MINIMIZERS: usize = 1 << 16;
/// Claimed and re-evaluated certificate energies may differ by this much.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub c_min: f64,
    /// Unknown for ingested certificates, which only certify the minimum.
    pub c_max: Option<f64>,
    /// Sorted; the first entry is the designated minimizer.
    pub minimizers: Vec<SpinVector>,
    pub provenance: Provenance,
    pub degeneracy_count: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    c_min: f64,
    c_max: Option<f64>,
    provenance: Provenance,
    degeneracy_count: Option<u64>,
    minimizer: Option<SpinVector>,
}

impl GroundTruth {
    pub fn designated(&self) -> Option<&SpinVector> {
        self.minimizers.first()
    }

    pub fn bounds(&self) -> Result<SpectrumBounds> {
        let c_max = self
            .c_max
            .ok_or_else(|| Error::Mismatch("ground truth has no maximum energy".into()))?;
        Ok(SpectrumBounds {
            c_min: self.c_min,
            c_max,
            provenance: self.provenance,
        })
    }

    /// File form keeps only the designated minimizer.
    pub fn to_json(&self) -> String {
        let file = GroundTruthFile {
            c_min: self.c_min,
            c_max: self.c_max,
            provenance: self.provenance,
            degeneracy_count: self.degeneracy_count,
            minimizer: self.designated().cloned(),
        };
        serde_json::to_string_pretty(&file).expect("ground truth serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GroundTruthFile = serde_json::from_str(text)?;
        if let Some(max) = f.c_max {
            if max < f.c_min {
                return Err(Error::parse("ground truth", "c_max below c_min"));
            }
        }
        Ok(GroundTruth {
            c_min: f.c_min,
            c_max: f.c_max,
            minimizers: f.minimizer.into_iter().collect(),
            provenance: f.provenance,
            degeneracy_count: f.degeneracy_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Certificate assignment `x = (z + 1) / 2` for the designated minimizer.
    pub fn to_certificate(&self) -> Option<SolverSolution> {
        let z = self.designated()?;
        let x: Vec<u8> = z.as_slice().iter().map(|&s| u8::from(s > 0)).collect();
        Some(SolverSolution::from_binary(self.c_min, &x))
    }
}

struct Partial {
    min: f64,
    max: f64,
    best: Vec<i8>,
    minimizers: Vec<Vec<i8>>,
    count: u64,
}

/// Gray-code walk over the low `free` spins with the rest fixed by `prefix`.
fn walk(model: &IsingModel, n: usize, free: usize, prefix: u64, enumerate_all: bool) -> Partial {
    let compiled = model.compile();
    let mut z: Vec<i8> = (0..n)
        .map(|i| {
            if i >= free && prefix >> (i - free) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect();
    let mut e = compiled.energy(&z);
    let tol = 1e-9 * model.coefficients().map(f64::abs).sum::<f64>().max(1.0);
    let mut p = Partial {
        min: e,
        max: e,
        best: z.clone(),
        minimizers: if enumerate_all { vec![z.clone()] } else { Vec::new() },
        count: 1,
    };
    for step in 1u64..(1u64 << free) {
        let i = step.trailing_zeros() as usize;
        e += compiled.flip_delta(i, &z);
        z[i] = -z[i];
        if e > p.max {
            p.max = e;
        }
        if e < p.min - tol {
            p.min = e;
            p.best.copy_from_slice(&z);
            p.count = 1;
            if enumerate_all {
                p.minimizers.clear();
                p.minimizers.push(z.clone());
            }
        } else if e <= p.min + tol {
            p.count += 1;
            if z < p.best {
                p.best.copy_from_slice(&z);
            }
            if enumerate_all && p.minimizers.len() < MAX_STORED_MINIMIZERS {
                p.minimizers.push(z.clone());
            }
        }
    }
    p
}

/// Exact minimum and maximum over all `2^n` spin vectors.
///
/// With `enumerate_all`, every minimizer is listed (up to
/// [`MAX_STORED_MINIMIZERS`]) and counted.
pub fn brute_force(model: &IsingModel, enumerate_all: bool) -> Result<GroundTruth> {
    let n = model.n;
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::TooManyVariables {
            n,
            limit: MAX_BRUTE_FORCE_VARS,
        });
    }
    if n == 0 {
        let e = model.evaluate(&SpinVector::new(vec![])?)?;
        return Ok(GroundTruth {
            c_min: e,
            c_max: Some(e),
            minimizers: vec![SpinVector::new(vec![])?],
            provenance: Provenance::BruteForce,
            degeneracy_count: enumerate_all.then_some(1),
        });
    }
    // fix the top spins per lane; 2^fixed lanes
    let fixed = if n > 16 { 4.min(n) } else { 0 };
    let free = n - fixed;
    let parts: Vec<Partial> = (0..1u64 << fixed)
        .into_par_iter()
        .map(|prefix| walk(model, n, free, prefix, enumerate_all))
        .collect();

    let tol = 1e-9 * model.coefficients().map(f64::abs).sum::<f64>().max(1.0);
    let c_min = parts.iter().map(|p| p.min).fold(f64::INFINITY, f64::min);
    let c_max = parts.iter().map(|p| p.max).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<&Partial> = parts.iter().filter(|p| p.min <= c_min + tol).collect();
    let count: u64 = winners.iter().map(|p| p.count).sum();
    let mut minimizers: Vec<Vec<i8>> = if enumerate_all {
        winners.iter().flat_map(|p| p.minimizers.iter().cloned()).collect()
    } else {
        winners.iter().map(|p| p.best.clone()).collect()
    };
    minimizers.sort_unstable();
    if !enumerate_all {
        minimizers.truncate(1);
    }
    minimizers.truncate(MAX_STORED_MINIMIZERS);
    Ok(GroundTruth {
        c_min,
        c_max: Some(c_max),
        minimizers: minimizers.into_iter().map(SpinVector::from_raw).collect(),
        provenance: Provenance::BruteForce,
        degeneracy_count: enumerate_all.then_some(count),
    })
}

/// Take the optimum from an external solver's binary solution.
///
/// The assignment is mapped to spins and re-evaluated; a claimed objective
/// off by more than [`CERTIFICATE_TOLERANCE`] is refused.
pub fn ingest_certificate(model: &IsingModel, solution: &SolverSolution) -> Result<GroundTruth> {
    let x = solution.original_assignment(model.n)?;
    let z = solution_to_spins(&x)?;
    let energy = model.evaluate(&z)?;
    if !solution.objective.is_finite() || (solution.objective - energy).abs() > CERTIFICATE_TOLERANCE {
        return Err(Error::ObjectiveMismatch {
            claimed: solution.objective,
            actual: energy,
        });
    }
    Ok(GroundTruth {
        c_min: energy,
        c_max: None,
        minimizers: vec![z],
        provenance: Provenance::ExternalSolver,
        degeneracy_count: None,
    })
}

pub fn ingest_certificate_file(model: &IsingModel, path: impl AsRef<Path>) -> Result<GroundTruth> {
    ingest_certificate(model, &SolverSolution::from_json(&fs::read_to_string(path)?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationRow {
    pub n: usize,
    /// Magnetization of the designated minimizer.
    pub magnetization: f64,
    /// Range over all enumerated minimizers, when available.
    pub min_over_ground_states: Option<f64>,
    pub max_over_ground_states: Option<f64>,
    pub degeneracy_count: Option<u64>,
}

/// One row per instance: designated-minimizer magnetization plus its range
/// over the enumerated ground states when the truth carries them.
pub fn ground_state_magnetization_study(
    models: &[IsingModel],
    truths: &[GroundTruth],
) -> Result<Vec<MagnetizationRow>> {
    if models.len() != truths.len() {
        return Err(Error::Mismatch(format!(
            "{} models but {} ground truths",
            models.len(),
            truths.len()
        )));
    }
    models
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(idx, (model, truth))| {
            let z = truth
                .designated()
                .ok_or_else(|| Error::Mismatch(format!("instance {idx} has no minimizer")))?;
            if z.len() != model.n {
                return Err(Error::DimensionMismatch {
                    expected: model.n,
                    got: z.len(),
                });
            }
            let (lo, hi) = if truth.degeneracy_count.is_some() {
                let mags: Vec<f64> = truth.minimizers.iter().map(magnetization).collect::<Result<_>>()?;
                (
                    Some(mags.iter().copied().fold(f64::INFINITY, f64::min)),
                    Some(mags.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                )
            } else {
                (None, None)
            };
            Ok(MagnetizationRow {
                n: model.n,
                magnetization: magnetization(z)?,
                min_over_ground_states: lo,
                max_over_ground_states: hi,
                degeneracy_count: truth.degeneracy_count,
            })
        })
        .collect()
}

/// Per-variable incidence of a binary polynomial for Gray-code walks.
struct BinaryIncidence {
    offset: f64,
    // for variable i: (other factors, coefficient)
    terms: Vec<Vec<(Vec<usize>, f64)>>,
}

impl BinaryIncidence {
    fn new(poly: &BinaryPolynomial, n: usize) -> Self {
        let mut terms = vec![Vec::new(); n];
        let mut offset = 0.0;
        for (vars, &c) in &poly.terms {
            if vars.is_empty() {
                offset += c;
            }
            for &v in vars {
                if v < n {
                    let others: Vec<usize> = vars.iter().copied().filter(|&u| u != v).collect();
                    terms[v].push((others, c));
                }
            }
        }
        BinaryIncidence { offset, terms }
    }

    /// Change in value when `x_i` goes from 0 to 1.
    #[inline]
    fn gain(&self, i: usize, x: &[u8]) -> f64 {
        self.terms[i]
            .iter()
            .filter(|(others, _)| others.iter().all(|&u| x[u] == 1))
            .map(|(_, c)| c)
            .sum()
    }
}

/// Exhaustive minimum of a binary polynomial and its lexicographically
/// first minimizer (in Gray-code visiting order ties keep the first seen).
pub fn binary_minimum(poly: &BinaryPolynomial) -> Result<(f64, Vec<u8>)> {
    let n = poly.n_vars;
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::TooManyVariables {
            n,
            limit: MAX_BRUTE_FORCE_VARS,
        });
    }
    let inc = BinaryIncidence::new(poly, n);
    let mut x = vec![0u8; n];
    let mut value = inc.offset;
    let mut best = (value, x.clone());
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let g = inc.gain(i, &x);
        if x[i] == 0 {
            value += g;
            x[i] = 1;
        } else {
            value -= g;
            x[i] = 0;
        }
        if value < best.0 {
            best = (value, x.clone());
        }
    }
    Ok(best)
}

/// Exact minimum of a quadratized program over all original and auxiliary
/// assignments.
///
/// Original variables are enumerated exhaustively. When no two auxiliaries
/// share a term, each auxiliary enters linearly given the originals, so its
/// optimal value is read off the sign of its coefficient; otherwise the
/// auxiliaries are enumerated too.
pub fn quadratized_minimum(q: &QuadratizedModel) -> Result<(f64, Vec<u8>)> {
    let n = q.original_n;
    let total = q.base.n_vars;
    let aux_coupled = q
        .base
        .terms
        .keys()
        .any(|k| k.iter().filter(|&&v| v >= n).count() > 1);
    if aux_coupled || total == n {
        return binary_minimum(&q.base);
    }
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::TooManyVariables {
            n,
            limit: MAX_BRUTE_FORCE_VARS,
        });
    }
    let m = total - n;
    // x-only part and per-auxiliary linear forms h_a + sum_v J_av x_v
    let mut x_part = BinaryPolynomial::new(n);
    let mut aux_const = vec![0.0; m];
    let mut aux_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, &c) in &q.base.terms {
        match k.iter().position(|&v| v >= n) {
            None => x_part.add_term(k, c),
            Some(pos) => {
                let a = k[pos] - n;
                match k.len() {
                    1 => aux_const[a] += c,
                    2 => aux_links[k[1 - pos]].push((a, c)),
                    _ => unreachable!("quadratized base has order <= 2"),
                }
            }
        }
    }
    let inc = BinaryIncidence::new(&x_part, n);
    let mut x = vec![0u8; n];
    let mut value = inc.offset;
    let mut field = aux_const.clone();
    let score = |value: f64, field: &[f64]| value + field.iter().map(|&f| f.min(0.0)).sum::<f64>();
    let mut best = (score(value, &field), x.clone(), field.clone());
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let g = inc.gain(i, &x);
        let sign = if x[i] == 0 { 1.0 } else { -1.0 };
        value += sign * g;
        x[i] ^= 1;
        for &(a, c) in &aux_links[i] {
            field[a] += sign * c;
        }
        let s = score(value, &field);
        if s < best.0 {
            best = (s, x.clone(), field.clone());
        }
    }
    let (v, x, field) = best;
    let mut full = x.clone();
    for (a, f) in field.iter().enumerate() {
        let (p, r) = q.aux_map[a].pair;
        let product = x[p] & x[r];
        // ties keep the consistent value
        full.push(if *f < 0.0 || (*f == 0.0 && product == 1) { 1 } else { 0 });
    }
    Ok((v, full))
}

/// Energies along the Gray-code walk used by [`brute_force`], as
/// `(state bits, energy)` with bit `i` set meaning `z_i = +1`.
pub fn gray_code_energies(model: &IsingModel) -> Result<Vec<(u64, f64)>> {
    let n = model.n;
    if n > MAX_LAW_VARS {
        return Err(Error::TooManyVariables { n, limit: MAX_LAW_VARS });
    }
    let compiled = model.compile();
    let mut z = vec![-1i8; n];
    let mut bits = 0u64;
    let mut e = compiled.energy(&z);
    let mut out = Vec::with_capacity(1 << n);
    out.push((bits, e));
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        e += compiled.flip_delta(i, &z);
        z[i] = -z[i];
        bits ^= 1 << i;
        out.push((bits, e));
    }
    Ok(out)
}

/// Largest model accepted by [`metropolis_law`].
pub const MAX_LAW_VARS: usize = 16;

/// Exact state distribution of the sequential-sweep Metropolis chain after
/// the whole schedule, from a uniform start. Index bit `i` set means
/// `z_i = +1`.
pub fn metropolis_law(model: &IsingModel, schedule: &crate::anneal::AnnealSchedule) -> Result<Vec<f64>> {
    let n = model.n;
    if n > MAX_LAW_VARS {
        return Err(Error::TooManyVariables { n, limit: MAX_LAW_VARS });
    }
    let states = 1usize << n;
    let energy: Vec<f64> = (0..states)
        .map(|b| {
            let z = (0..n).map(|i| if b >> i & 1 == 1 { 1 } else { -1 }).collect();
            model.evaluate(&SpinVector::from_raw(z))
        })
        .collect::<Result<_>>()?;
    let mut law = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    for &beta in schedule.betas() {
        for i in 0..n {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (s, &mass) in law.iter().enumerate() {
                let t = s ^ (1 << i);
                let d = energy[t] - energy[s];
                let accept = if d <= 0.0 { 1.0 } else { (-beta * d).exp() };
                next[t] += mass * accept;
                next[s] += mass * (1.0 - accept);
            }
            std::mem::swap(&mut law, &mut next);
        }
    }
    Ok(law)
}

/// Probability mass of [`metropolis_law`] on states at or below `threshold`.
pub fn metropolis_success_probability(
    model: &IsingModel,
    schedule: &crate::anneal::AnnealSchedule,
    threshold: f64,
) -> Result<f64> {
    let law = metropolis_law(model, schedule)?;
    let n = model.n;
    let mut p = 0.0;
    for (b, mass) in law.iter().enumerate() {
        let z = (0..n).map(|i| if b >> i & 1 == 1 { 1 } else { -1 }).collect();
        if model.evaluate(&SpinVector::from_raw(z))? <= threshold {
            p += mass;
        }
    }
    Ok(p)
}
