//! Sparse spin polynomials with linear, quadratic and cubic terms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::HeavyHexGraph;
use crate::rng::{derive_seed, hash_words, keyed_u64, CounterRng};

/// Ising cost function over `n` spins.
///
/// Keys are canonical: pairs as `(i, j)` with `i < j`, triples sorted
/// ascending. For lattice-generated models the role of each triple member
/// (centre versus neighbour) is recoverable from the graph's `w_set`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IsingModel {
    pub n: usize,
    pub linear: BTreeMap<usize, f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub cubic: BTreeMap<(usize, usize, usize), f64>,
    pub graph_digest: Option<String>,
    pub seed: Option<u64>,
}

/// Spin configuration with entries in `{+1, -1}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinVector(Vec<i8>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BruteForce,
    ExternalSolver,
}

/// Global minimum and maximum of a cost function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBounds {
    pub c_min: f64,
    pub c_max: f64,
    pub provenance: Provenance,
}

fn canonical_pair(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn canonical_triple(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let mut t = [i, j, k];
    t.sort_unstable();
    (t[0], t[1], t[2])
}

#[inline]
fn coin(seed: u64, identity: &[u64]) -> f64 {
    if keyed_u64(seed, hash_words(identity)) >> 63 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Random `±1` instance on a heavy-hex graph.
///
/// Each coefficient is an independent fair coin addressed by the identity
/// of its term, so iteration order never affects the drawn values.
pub fn generate_instance(graph: &HeavyHexGraph, include_cubic: bool, seed: u64) -> IsingModel {
    let linear = graph
        .nodes()
        .map(|v| (v, coin(seed, &[1, v as u64])))
        .collect();
    let quadratic = graph
        .edges
        .iter()
        .map(|&(u, v)| ((u, v), coin(seed, &[2, u as u64, v as u64])))
        .collect();
    let cubic = if include_cubic {
        graph
            .w_set
            .iter()
            .map(|w| {
                let key = canonical_triple(w.center, w.n1, w.n2);
                let c = coin(seed, &[3, key.0 as u64, key.1 as u64, key.2 as u64]);
                (key, c)
            })
            .collect()
    } else {
        BTreeMap::new()
    };
    IsingModel {
        n: graph.n,
        linear,
        quadratic,
        cubic,
        graph_digest: Some(graph.digest()),
        seed: Some(seed),
    }
}

impl SpinVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad as i64));
        }
        Ok(SpinVector(values))
    }

    pub fn from_i64(values: &[i64]) -> Result<Self> {
        values
            .iter()
            .map(|&s| match s {
                1 => Ok(1),
                -1 => Ok(-1),
                other => Err(Error::InvalidSpin(other)),
            })
            .collect::<Result<Vec<i8>>>()
            .map(SpinVector)
    }

    pub fn filled(n: usize, spin: i8) -> Self {
        assert!(spin == 1 || spin == -1);
        SpinVector(vec![spin; n])
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = CounterRng::new(seed);
        SpinVector((0..n).map(|_| rng.next_spin()).collect())
    }

    pub(crate) fn from_raw(values: Vec<i8>) -> Self {
        debug_assert!(values.iter().all(|&s| s == 1 || s == -1));
        SpinVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn flipped(&self) -> Self {
        SpinVector(self.0.iter().map(|s| -s).collect())
    }

    /// `+-` string, one character per spin.
    pub fn to_sign_string(&self) -> String {
        self.0.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
    }

    pub fn from_sign_string(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::parse("spin string", format!("unexpected character {c:?}"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(SpinVector)
    }
}

impl Serialize for SpinVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<i64>::deserialize(d)?;
        SpinVector::from_i64(&raw).map_err(serde::de::Error::custom)
    }
}

impl IsingModel {
    pub fn new(n: usize) -> Self {
        IsingModel {
            n,
            ..Default::default()
        }
    }

    /// Add to a linear coefficient.
    pub fn add_linear(&mut self, i: usize, c: f64) -> &mut Self {
        assert!(i < self.n, "variable {i} out of range");
        *self.linear.entry(i).or_insert(0.0) += c;
        self
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) -> &mut Self {
        assert!(i != j && i < self.n && j < self.n, "bad pair ({i}, {j})");
        *self.quadratic.entry(canonical_pair(i, j)).or_insert(0.0) += c;
        self
    }

    pub fn add_cubic(&mut self, i: usize, j: usize, k: usize, c: f64) -> &mut Self {
        let key = canonical_triple(i, j, k);
        assert!(
            key.0 != key.1 && key.1 != key.2 && key.2 < self.n,
            "bad triple ({i}, {j}, {k})"
        );
        *self.cubic.entry(key).or_insert(0.0) += c;
        self
    }

    pub fn term_counts(&self) -> (usize, usize, usize) {
        (self.linear.len(), self.quadratic.len(), self.cubic.len())
    }

    /// Iterate every coefficient regardless of order.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.linear
            .values()
            .chain(self.quadratic.values())
            .chain(self.cubic.values())
            .copied()
    }

    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.linear.values_mut().for_each(|c| *c = -*c);
        m.quadratic.values_mut().for_each(|c| *c = -*c);
        m.cubic.values_mut().for_each(|c| *c = -*c);
        m
    }

    /// Cost of a spin configuration.
    pub fn evaluate(&self, z: &SpinVector) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: z.len(),
            });
        }
        Ok(self.evaluate_raw(z.as_slice()))
    }

    pub(crate) fn evaluate_raw(&self, z: &[i8]) -> f64 {
        let s = |i: usize| z[i] as f64;
        let mut e = 0.0;
        for (&i, &c) in &self.linear {
            e += c * s(i);
        }
        for (&(i, j), &c) in &self.quadratic {
            e += c * s(i) * s(j);
        }
        for (&(i, j, k), &c) in &self.cubic {
            e += c * s(i) * s(j) * s(k);
        }
        e
    }

    pub fn compile(&self) -> CompiledModel {
        CompiledModel::new(self)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            cubic: self.cubic.iter().map(|(&(i, j, k), &c)| (i, j, k, c)).collect(),
            graph_digest: self.graph_digest.clone(),
            linear: self.linear.iter().map(|(&i, &c)| (i, c)).collect(),
            n: self.n,
            quadratic: self.quadratic.iter().map(|(&(i, j), &c)| (i, j, c)).collect(),
            seed: self.seed,
            version: 1,
        };
        serde_json::to_string(&file).expect("instance serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::parse(
                "instance file",
                format!("unsupported version {}", file.version),
            ));
        }
        let n = file.n;
        let range = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(Error::parse("instance file", format!("index {i} out of range")))
            }
        };
        let mut m = IsingModel::new(n);
        m.graph_digest = file.graph_digest;
        m.seed = file.seed;
        for (i, c) in file.linear {
            range(i)?;
            if m.linear.insert(i, c).is_some() {
                return Err(Error::parse("instance file", format!("duplicate linear {i}")));
            }
        }
        for (i, j, c) in file.quadratic {
            range(i)?;
            range(j)?;
            if i == j || m.quadratic.insert(canonical_pair(i, j), c).is_some() {
                return Err(Error::parse("instance file", format!("bad pair ({i}, {j})")));
            }
        }
        for (i, j, k, c) in file.cubic {
            range(i)?;
            range(j)?;
            range(k)?;
            let key = canonical_triple(i, j, k);
            if key.0 == key.1 || key.1 == key.2 || m.cubic.insert(key, c).is_some() {
                return Err(Error::parse(
                    "instance file",
                    format!("bad triple ({i}, {j}, {k})"),
                ));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

// Field order is alphabetical so the file has sorted keys.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default)]
    cubic: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    graph_digest: Option<String>,
    #[serde(default)]
    linear: Vec<(usize, f64)>,
    n: usize,
    #[serde(default)]
    quadratic: Vec<(usize, usize, f64)>,
    #[serde(default)]
    seed: Option<u64>,
    version: u32,
}

/// Per-variable incidence lists in compressed row form.
///
/// `field(i)` is the coefficient multiplying `z_i` in the cost function,
/// so flipping `z_i` changes the energy by `-2 z_i field(i)`.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    n: usize,
    linear: Vec<f64>,
    pair_start: Vec<u32>,
    pair_other: Vec<u32>,
    pair_coef: Vec<f64>,
    tri_start: Vec<u32>,
    tri_other: Vec<[u32; 2]>,
    tri_coef: Vec<f64>,
}

impl CompiledModel {
    pub fn new(model: &IsingModel) -> Self {
        let n = model.n;
        let mut linear = vec![0.0; n];
        for (&i, &c) in &model.linear {
            linear[i] += c;
        }
        let mut pairs: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &c) in &model.quadratic {
            pairs[i].push((j as u32, c));
            pairs[j].push((i as u32, c));
        }
        let mut tris: Vec<Vec<([u32; 2], f64)>> = vec![Vec::new(); n];
        for (&(i, j, k), &c) in &model.cubic {
            let (i, j, k) = (i as u32, j as u32, k as u32);
            tris[i as usize].push(([j, k], c));
            tris[j as usize].push(([i, k], c));
            tris[k as usize].push(([i, j], c));
        }
        let mut cm = CompiledModel {
            n,
            linear,
            pair_start: Vec::with_capacity(n + 1),
            pair_other: Vec::new(),
            pair_coef: Vec::new(),
            tri_start: Vec::with_capacity(n + 1),
            tri_other: Vec::new(),
            tri_coef: Vec::new(),
        };
        cm.pair_start.push(0);
        cm.tri_start.push(0);
        for i in 0..n {
            for &(j, c) in &pairs[i] {
                cm.pair_other.push(j);
                cm.pair_coef.push(c);
            }
            cm.pair_start.push(cm.pair_other.len() as u32);
            for &(jk, c) in &tris[i] {
                cm.tri_other.push(jk);
                cm.tri_coef.push(c);
            }
            cm.tri_start.push(cm.tri_other.len() as u32);
        }
        cm
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficient of `z_i` given the other spins.
    #[inline]
    pub fn field(&self, i: usize, z: &[i8]) -> f64 {
        let mut f = self.linear[i];
        let (a, b) = (self.pair_start[i] as usize, self.pair_start[i + 1] as usize);
        for (&j, &c) in self.pair_other[a..b].iter().zip(&self.pair_coef[a..b]) {
            f += c * z[j as usize] as f64;
        }
        let (a, b) = (self.tri_start[i] as usize, self.tri_start[i + 1] as usize);
        for (&[j, k], &c) in self.tri_other[a..b].iter().zip(&self.tri_coef[a..b]) {
            f += c * (z[j as usize] * z[k as usize]) as f64;
        }
        f
    }

    /// Energy change from flipping spin `i`.
    #[inline]
    pub fn flip_delta(&self, i: usize, z: &[i8]) -> f64 {
        -2.0 * z[i] as f64 * self.field(i, z)
    }

    /// `|d_i| + sum |d_ij| + sum |d_ijk|` over the terms touching `i`.
    pub fn incident_weight(&self, i: usize) -> f64 {
        let (a, b) = (self.pair_start[i] as usize, self.pair_start[i + 1] as usize);
        let (c, d) = (self.tri_start[i] as usize, self.tri_start[i + 1] as usize);
        self.linear[i].abs()
            + self.pair_coef[a..b].iter().map(|c| c.abs()).sum::<f64>()
            + self.tri_coef[c..d].iter().map(|c| c.abs()).sum::<f64>()
    }

    /// Full energy, each term counted once.
    pub fn energy(&self, z: &[i8]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n {
            let s = z[i] as f64;
            e += self.linear[i] * s;
            let (a, b) = (self.pair_start[i] as usize, self.pair_start[i + 1] as usize);
            for (&j, &c) in self.pair_other[a..b].iter().zip(&self.pair_coef[a..b]) {
                if (j as usize) > i {
                    e += c * s * z[j as usize] as f64;
                }
            }
            let (a, b) = (self.tri_start[i] as usize, self.tri_start[i + 1] as usize);
            for (&[j, k], &c) in self.tri_other[a..b].iter().zip(&self.tri_coef[a..b]) {
                if (j as usize) > i && (k as usize) > i {
                    e += c * s * (z[j as usize] * z[k as usize]) as f64;
                }
            }
        }
        e
    }
}

/// Normalised score `(c_max - energy) / (c_max - c_min)`; 1 at the optimum.
pub fn approximation_ratio(energy: f64, bounds: &SpectrumBounds) -> Result<f64> {
    if !(bounds.c_max > bounds.c_min) {
        return Err(Error::DegenerateSpectrum {
            c_min: bounds.c_min,
            c_max: bounds.c_max,
        });
    }
    Ok((bounds.c_max - energy) / (bounds.c_max - bounds.c_min))
}

/// Energies of `count` uniformly random spin vectors.
pub fn random_sample_energies(model: &IsingModel, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::TooFew {
            what: "sample count",
            min: 1,
            got: 0,
        });
    }
    let compiled = model.compile();
    let mut z = vec![0i8; model.n];
    Ok((0..count)
        .map(|s| {
            let mut rng = CounterRng::new(derive_seed(seed, &[s as u64]));
            z.iter_mut().for_each(|v| *v = rng.next_spin());
            compiled.energy(&z)
        })
        .collect())
}

/// Mean spin value.
pub fn magnetization(z: &SpinVector) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::EmptySpins);
    }
    Ok(z.0.iter().map(|&s| s as f64).sum::<f64>() / z.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    /// Path 0 - 1 - 2 with centre 1: J(1,0) = J(1,2) = -1, cubic +1.
    fn path_model() -> IsingModel {
        let mut m = IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0)
            .add_quadratic(1, 2, -1.0)
            .add_cubic(1, 0, 2, 1.0);
        m
    }

    fn spins(v: &[i8]) -> SpinVector {
        SpinVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn path_model_energies() {
        let m = path_model();
        assert_eq!(m.evaluate(&spins(&[1, 1, 1])).unwrap(), -1.0);
        assert_eq!(m.evaluate(&spins(&[-1, -1, -1])).unwrap(), -3.0);
        // exhaustive: (-1,-1,-1) is the unique minimum
        let mut energies = Vec::new();
        for bits in 0..8u32 {
            let z: Vec<i8> = (0..3).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            energies.push((m.evaluate(&spins(&z)).unwrap(), z));
        }
        energies.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(energies[0], (-3.0, vec![-1, -1, -1]));
        assert!(energies[1].0 > -3.0);
    }

    #[test]
    fn zero_model_is_flat() {
        let m = IsingModel::new(4);
        for seed in 0..10 {
            assert_eq!(m.evaluate(&SpinVector::random(4, seed)).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = path_model();
        assert!(matches!(
            m.evaluate(&spins(&[1, 1])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn invalid_spin_rejected() {
        assert!(matches!(SpinVector::new(vec![1, 0]), Err(Error::InvalidSpin(0))));
    }

    #[test]
    fn generation_counts_and_determinism() {
        let g = build_lattice(1, 1).unwrap();
        let a = generate_instance(&g, true, 99);
        assert_eq!(a.term_counts(), (12, 12, 6));
        assert_eq!(a.to_json(), generate_instance(&g, true, 99).to_json());
        let q = generate_instance(&g, false, 99);
        assert_eq!(q.term_counts(), (12, 12, 0));
        assert!(a.coefficients().all(|c| c == 1.0 || c == -1.0));
        // same seed, same term identities: quadratic part shared
        assert_eq!(a.quadratic, q.quadratic);
    }

    #[test]
    fn approximation_ratio_endpoints() {
        let b = SpectrumBounds {
            c_min: -3.0,
            c_max: 3.0,
            provenance: Provenance::BruteForce,
        };
        assert_eq!(approximation_ratio(-3.0, &b).unwrap(), 1.0);
        assert_eq!(approximation_ratio(3.0, &b).unwrap(), 0.0);
        assert_eq!(approximation_ratio(0.0, &b).unwrap(), 0.5);
        let flat = SpectrumBounds { c_max: -3.0, ..b };
        assert!(matches!(
            approximation_ratio(0.0, &flat),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn random_energies() {
        assert!(random_sample_energies(&IsingModel::new(5), 100, 1)
            .unwrap()
            .iter()
            .all(|&e| e == 0.0));
        assert!(random_sample_energies(&path_model(), 0, 1).is_err());

        let e = random_sample_energies(&path_model(), 100_000, 17).unwrap();
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
        assert_eq!(e, random_sample_energies(&path_model(), 100_000, 17).unwrap());
    }

    #[test]
    fn magnetization_values() {
        assert_eq!(magnetization(&SpinVector::filled(5, 1)).unwrap(), 1.0);
        assert_eq!(magnetization(&SpinVector::filled(5, -1)).unwrap(), -1.0);
        assert_eq!(magnetization(&spins(&[-1, -1, -1])).unwrap(), -1.0);
        assert!(matches!(
            magnetization(&SpinVector::new(vec![]).unwrap()),
            Err(Error::EmptySpins)
        ));
    }

    #[test]
    fn compiled_energy_matches_evaluate() {
        let g = build_lattice(2, 2).unwrap();
        let m = generate_instance(&g, true, 5);
        let c = m.compile();
        for seed in 0..50 {
            let z = SpinVector::random(m.n, seed);
            assert_eq!(c.energy(z.as_slice()), m.evaluate(&z).unwrap());
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let g = build_lattice(1, 2).unwrap();
        let m = generate_instance(&g, true, 3);
        let text = m.to_json();
        assert!(text.starts_with(r#"{"cubic":[["#));
        let back = IsingModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn instance_json_rejects_bad_indices() {
        let text = r#"{"version":1,"n":2,"linear":[[5,1.0]]}"#;
        assert!(IsingModel::from_json(text).is_err());
        let text = r#"{"version":1,"n":2,"quadratic":[[0,1,1],[1,0,2]]}"#;
        assert!(IsingModel::from_json(text).is_err());
    }
}
