//! Simulated annealing with single-spin Metropolis updates.
//!
//! One sweep visits every variable once in index order at a fixed inverse
//! temperature. A read starts from a uniform random configuration and runs
//! one sweep per entry of the schedule.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompiledModel, IsingModel, SpinVector};
use crate::rng::{derive_seed, CounterRng};

/// Reads per annealing run in the reference protocol.
pub const DEFAULT_NUM_READS: usize = 50_000;
/// Sweep counts used in the reference protocol.
pub const PROTOCOL_SWEEPS: [usize; 2] = [100, 1000];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Geometric,
    Constant,
    Custom,
}

/// Inverse temperatures, one per sweep, nondecreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnealSchedule {
    beta_values: Vec<f64>,
    kind: ScheduleKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInfo {
    pub kind: ScheduleKind,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl AnnealSchedule {
    pub fn geometric(beta_min: f64, beta_max: f64, sweeps: usize) -> Result<Self> {
        if sweeps < 2 {
            return Err(Error::InvalidSchedule(format!("geometric schedule needs at least 2 sweeps, got {sweeps}")));
        }
        if !(beta_min > 0.0 && beta_min.is_finite() && beta_max.is_finite() && beta_max >= beta_min) {
            return Err(Error::InvalidSchedule(format!("bad beta range [{beta_min}, {beta_max}]")));
        }
        let ratio = beta_max / beta_min;
        let last = (sweeps - 1) as f64;
        let mut beta_values: Vec<f64> = (0..sweeps)
            .map(|t| beta_min * ratio.powf(t as f64 / last))
            .collect();
        beta_values[0] = beta_min;
        beta_values[sweeps - 1] = beta_max;
        Ok(AnnealSchedule {
            beta_values,
            kind: ScheduleKind::Geometric,
        })
    }

    pub fn constant(beta: f64, sweeps: usize) -> Result<Self> {
        let mut s = Self::from_values(vec![beta; sweeps])?;
        s.kind = ScheduleKind::Constant;
        Ok(s)
    }

    pub fn from_values(beta_values: Vec<f64>) -> Result<Self> {
        if beta_values.is_empty() {
            return Err(Error::InvalidSchedule("empty schedule".into()));
        }
        if beta_values.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidSchedule("betas must be positive and finite".into()));
        }
        if beta_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSchedule("betas must be nondecreasing".into()));
        }
        Ok(AnnealSchedule {
            beta_values,
            kind: ScheduleKind::Custom,
        })
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta_values
    }

    pub fn sweeps(&self) -> usize {
        self.beta_values.len()
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_values[0]
    }

    pub fn beta_max(&self) -> f64 {
        *self.beta_values.last().unwrap()
    }

    pub fn info(&self) -> ScheduleInfo {
        ScheduleInfo {
            kind: self.kind,
            sweeps: self.sweeps(),
            beta_min: self.beta_min(),
            beta_max: self.beta_max(),
        }
    }
}

/// Geometric schedule scaled to the model's energy landscape.
///
/// At the hot end the costliest single flip is accepted half the time
/// (`beta_min = ln 2 / dE_hot`, with `dE_hot` twice the largest per-variable
/// incident weight). At the cold end the cheapest nonzero flip is accepted
/// one time in a hundred (`beta_max = ln 100 / dE_cold`, with `dE_cold`
/// twice the smallest nonzero coefficient magnitude).
pub fn default_schedule(model: &IsingModel, sweeps: usize) -> Result<AnnealSchedule> {
    let (beta_min, beta_max) = default_beta_range(model)?;
    AnnealSchedule::geometric(beta_min, beta_max, sweeps)
}

pub fn default_beta_range(model: &IsingModel) -> Result<(f64, f64)> {
    let compiled = model.compile();
    let hot = 2.0 * (0..model.n).map(|i| compiled.incident_weight(i)).fold(0.0, f64::max);
    let cold = 2.0
        * model
            .coefficients()
            .map(f64::abs)
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);
    if !(hot > 0.0) || !cold.is_finite() {
        return Err(Error::NoEnergyScale);
    }
    Ok((2f64.ln() / hot, 100f64.ln() / cold))
}

/// Metropolis single-spin-flip engine bound to one model.
#[derive(Clone, Debug)]
pub struct Annealer {
    compiled: CompiledModel,
}

impl Annealer {
    pub fn new(model: &IsingModel) -> Self {
        Annealer {
            compiled: model.compile(),
        }
    }

    pub fn compiled(&self) -> &CompiledModel {
        &self.compiled
    }

    /// One sequential pass over all variables at inverse temperature `beta`.
    /// Returns the energy change.
    #[inline]
    pub fn sweep(&self, z: &mut [i8], beta: f64, rng: &mut CounterRng) -> f64 {
        let mut delta_total = 0.0;
        for i in 0..z.len() {
            let delta = self.compiled.flip_delta(i, z);
            if delta <= 0.0 || rng.next_f64() < (-beta * delta).exp() {
                z[i] = -z[i];
                delta_total += delta;
            }
        }
        delta_total
    }

    /// Run the whole schedule from a random start; returns final state and
    /// energy.
    pub fn anneal_once(&self, schedule: &AnnealSchedule, seed: u64) -> (Vec<i8>, f64) {
        let mut rng = CounterRng::new(seed);
        let mut z: Vec<i8> = (0..self.compiled.n()).map(|_| rng.next_spin()).collect();
        for &beta in schedule.betas() {
            self.sweep(&mut z, beta, &mut rng);
        }
        let e = self.compiled.energy(&z);
        (z, e)
    }
}

/// One read of the annealer: independent random start, full schedule.
pub fn anneal_once(model: &IsingModel, schedule: &AnnealSchedule, seed: u64) -> (SpinVector, f64) {
    let (z, e) = Annealer::new(model).anneal_once(schedule, seed);
    (SpinVector::from_raw(z), e)
}

/// Seed of read `r` in a run seeded with `seed`.
pub fn read_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, &[r as u64])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SampleMode {
    /// Reads run one after another on the calling thread.
    #[default]
    Sequential,
    /// Reads spread over the rayon pool; CPU time is summed over lanes.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// One entry per distinct spin vector.
    #[default]
    ByState,
    /// One entry per distinct energy, keeping the lexicographically
    /// smallest state seen at that energy. Bounded memory for huge runs.
    ByEnergy,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SampleOptions {
    pub mode: SampleMode,
    pub aggregation: Aggregation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub spins: SpinVector,
    pub energy: f64,
    pub multiplicity: usize,
}

/// Aggregated output of a sampling run, sorted by (energy, spins).
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub num_reads: usize,
    pub cpu_time_seconds: f64,
    pub seed: u64,
    pub schedule: ScheduleInfo,
    pub parallel: bool,
}

/// Sidecar metadata written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSetMeta {
    pub num_reads: usize,
    pub cpu_time_seconds: f64,
    pub schedule: ScheduleInfo,
    pub seed: u64,
    pub parallel: bool,
}

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_time() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: clock_gettime only writes into the provided timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "CLOCK_THREAD_CPUTIME_ID unavailable");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Default)]
struct Tally {
    by_state: HashMap<Vec<i8>, (f64, usize)>,
    by_energy: HashMap<u64, (Vec<i8>, usize)>,
    cpu: f64,
}

impl Tally {
    fn add(&mut self, agg: Aggregation, z: Vec<i8>, e: f64) {
        match agg {
            Aggregation::ByState => self.by_state.entry(z).or_insert((e, 0)).1 += 1,
            Aggregation::ByEnergy => {
                let slot = self.by_energy.entry(e.to_bits()).or_insert_with(|| (z.clone(), 0));
                if z < slot.0 {
                    slot.0 = z;
                }
                slot.1 += 1;
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (z, (e, m)) in other.by_state {
            self.by_state.entry(z).or_insert((e, 0)).1 += m;
        }
        for (bits, (z, m)) in other.by_energy {
            let slot = self.by_energy.entry(bits).or_insert_with(|| (z.clone(), 0));
            if z < slot.0 {
                slot.0 = z;
            }
            slot.1 += m;
        }
        self.cpu += other.cpu;
        self
    }

    fn into_samples(self) -> Vec<Sample> {
        let mut out: Vec<Sample> = self
            .by_state
            .into_iter()
            .map(|(z, (e, m))| (z, e, m))
            .chain(self.by_energy.into_iter().map(|(bits, (z, m))| (z, f64::from_bits(bits), m)))
            .map(|(z, energy, multiplicity)| Sample {
                spins: SpinVector::from_raw(z),
                energy,
                multiplicity,
            })
            .collect();
        out.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.spins.cmp(&b.spins)));
        out
    }
}

const LANE_CHUNK: usize = 64;

/// `num_reads` independent reads, sequential, aggregated by state.
pub fn sample(model: &IsingModel, schedule: &AnnealSchedule, num_reads: usize, seed: u64) -> Result<SampleSet> {
    sample_with(model, schedule, num_reads, seed, SampleOptions::default())
}

pub fn sample_with(
    model: &IsingModel,
    schedule: &AnnealSchedule,
    num_reads: usize,
    seed: u64,
    options: SampleOptions,
) -> Result<SampleSet> {
    if num_reads == 0 {
        return Err(Error::TooFew {
            what: "num_reads",
            min: 1,
            got: 0,
        });
    }
    let annealer = Annealer::new(model);
    let agg = options.aggregation;
    let run_range = |reads: std::ops::Range<usize>| {
        let start = thread_cpu_time();
        let mut t = Tally::default();
        for r in reads {
            let (z, e) = annealer.anneal_once(schedule, read_seed(seed, r));
            t.add(agg, z, e);
        }
        t.cpu = thread_cpu_time() - start;
        t
    };
    let tally = match options.mode {
        SampleMode::Sequential => run_range(0..num_reads),
        SampleMode::Parallel => (0..num_reads.div_ceil(LANE_CHUNK))
            .into_par_iter()
            .map(|c| run_range(c * LANE_CHUNK..((c + 1) * LANE_CHUNK).min(num_reads)))
            .reduce(Tally::default, Tally::merge),
    };
    let cpu_time_seconds = tally.cpu.max(1e-9);
    Ok(SampleSet {
        samples: tally.into_samples(),
        num_reads,
        cpu_time_seconds,
        seed,
        schedule: schedule.info(),
        parallel: options.mode == SampleMode::Parallel,
    })
}

impl SampleSet {
    /// Assemble a set from precomputed samples; `num_reads` is the total
    /// multiplicity.
    pub fn from_samples(mut samples: Vec<Sample>, cpu_time_seconds: f64, seed: u64, schedule: ScheduleInfo) -> Self {
        samples.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.spins.cmp(&b.spins)));
        SampleSet {
            num_reads: samples.iter().map(|s| s.multiplicity).sum(),
            samples,
            cpu_time_seconds,
            seed,
            schedule,
            parallel: false,
        }
    }

    pub fn lowest_energy(&self) -> f64 {
        self.samples.first().map_or(f64::INFINITY, |s| s.energy)
    }

    pub fn lowest(&self) -> Option<&Sample> {
        self.samples.first()
    }

    /// Number of reads with energy at most `threshold`.
    pub fn count_at_or_below(&self, threshold: f64) -> usize {
        self.samples
            .iter()
            .filter(|s| s.energy <= threshold)
            .map(|s| s.multiplicity)
            .sum()
    }

    /// Energy of each read, expanded by multiplicity (sorted).
    pub fn energies(&self) -> Vec<f64> {
        self.samples
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.energy, s.multiplicity))
            .collect()
    }

    pub fn meta(&self) -> SampleSetMeta {
        SampleSetMeta {
            num_reads: self.num_reads,
            cpu_time_seconds: self.cpu_time_seconds,
            schedule: self.schedule.clone(),
            seed: self.seed,
            parallel: self.parallel,
        }
    }

    /// CSV body: `energy,multiplicity,spins` with spins as a `+`/`-` string.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,multiplicity,spins\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.energy, s.multiplicity, s.spins.to_sign_string()));
        }
        out
    }

    /// Write `<stem>.csv` and `<stem>.json`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        fs::write(stem.with_extension("csv"), self.to_csv())?;
        fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let meta: SampleSetMeta = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        Self::from_parts(&fs::read_to_string(stem.with_extension("csv"))?, meta)
    }

    pub fn from_parts(csv: &str, meta: SampleSetMeta) -> Result<Self> {
        let mut lines = csv.lines();
        if lines.next() != Some("energy,multiplicity,spins") {
            return Err(Error::parse("sample CSV", "missing header"));
        }
        let mut samples = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let mut cols = line.split(',');
            let (Some(e), Some(m), Some(z), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse("sample CSV", format!("bad row {line:?}")));
            };
            samples.push(Sample {
                energy: e.parse().map_err(|_| Error::parse("sample CSV", format!("bad energy {e:?}")))?,
                multiplicity: m.parse().map_err(|_| Error::parse("sample CSV", format!("bad multiplicity {m:?}")))?,
                spins: SpinVector::from_sign_string(z)?,
            });
        }
        let total: usize = samples.iter().map(|s| s.multiplicity).sum();
        if total != meta.num_reads {
            return Err(Error::Mismatch(format!("multiplicities sum to {total}, sidecar says {}", meta.num_reads)));
        }
        Ok(SampleSet {
            samples,
            num_reads: meta.num_reads,
            cpu_time_seconds: meta.cpu_time_seconds,
            seed: meta.seed,
            schedule: meta.schedule,
            parallel: meta.parallel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::model::generate_instance;

    fn path_model() -> IsingModel {
        let mut m = IsingModel::new(3);
        m.add_quadratic(1, 0, -1.0)
            .add_quadratic(1, 2, -1.0)
            .add_cubic(1, 0, 2, 1.0);
        m
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn default_range_for_unit_coefficients() {
        // variable 0: |d_0| + two couplings + two cubic terms = 5
        let mut m = IsingModel::new(4);
        m.add_linear(0, 1.0)
            .add_quadratic(0, 1, -1.0)
            .add_quadratic(0, 2, 1.0)
            .add_cubic(0, 1, 2, -1.0)
            .add_cubic(0, 2, 3, 1.0);
        let s = default_schedule(&m, 100).unwrap();
        assert!((s.beta_min() - 2f64.ln() / 10.0).abs() < 1e-15);
        assert!((s.beta_min() - 0.0693).abs() < 1e-4);
        assert!((s.beta_max() - 100f64.ln() / 2.0).abs() < 1e-15);
        assert!((s.beta_max() - 2.3026).abs() < 1e-4);
        assert_eq!(s.sweeps(), 100);
        assert!(s.betas().windows(2).all(|w| w[0] <= w[1]));
        // geometric: constant ratio between consecutive betas
        let r = s.betas()[1] / s.betas()[0];
        for w in s.betas().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(default_schedule(&IsingModel::new(3), 10), Err(Error::NoEnergyScale)));
        assert!(default_schedule(&path_model(), 1).is_err());
        assert!(AnnealSchedule::from_values(vec![1.0, 0.5]).is_err());
        assert!(AnnealSchedule::constant(0.0, 3).is_err());
    }

    #[test]
    fn flat_landscape_accepts_everything() {
        let m = IsingModel::new(6);
        let s = AnnealSchedule::constant(1.0, 3).unwrap();
        let a = Annealer::new(&m);
        let mut rng = CounterRng::new(1);
        let mut z = vec![1i8; 6];
        a.sweep(&mut z, 1.0, &mut rng);
        assert_eq!(z, vec![-1i8; 6]);
        let (z, e) = anneal_once(&m, &s, 4);
        assert_eq!(e, 0.0);
        assert_eq!(z.len(), 6);
    }

    #[test]
    fn incremental_delta_matches_reevaluation() {
        let g = build_lattice(2, 2).unwrap();
        let m = generate_instance(&g, true, 8);
        let c = m.compile();
        let mut rng = CounterRng::new(77);
        for _ in 0..10_000 {
            let z = SpinVector::random(m.n, rng.next());
            let i = (rng.next() % m.n as u64) as usize;
            let mut flipped = z.clone().into_inner();
            flipped[i] = -flipped[i];
            let direct = m.evaluate(&SpinVector::new(flipped).unwrap()).unwrap() - m.evaluate(&z).unwrap();
            assert_eq!(c.flip_delta(i, z.as_slice()), direct);
        }
    }

    #[test]
    fn sweep_energy_bookkeeping() {
        let g = build_lattice(2, 3).unwrap();
        let m = generate_instance(&g, true, 2);
        let a = Annealer::new(&m);
        let mut rng = CounterRng::new(5);
        let mut z: Vec<i8> = (0..m.n).map(|_| rng.next_spin()).collect();
        let mut e = a.compiled().energy(&z);
        for t in 0..200 {
            e += a.sweep(&mut z, 0.01 * t as f64 + 0.05, &mut rng);
            assert_eq!(e, a.compiled().energy(&z));
        }
    }

    #[test]
    fn single_spin_matches_exact_two_state_chain() {
        // d_1 = +1: z = -1 has energy -1. The chain's law is propagated
        // exactly along the schedule and compared with 10^4 seeded reads.
        let mut m = IsingModel::new(1);
        m.add_linear(0, 1.0);
        let s = default_schedule(&m, 1000).unwrap();
        let mut p_up = 0.5;
        for &b in s.betas() {
            // from +1 the flip lowers energy; from -1 accepted w.p. e^{-2b}
            p_up = (1.0 - p_up) * (-2.0 * b).exp();
        }
        let reads = 10_000;
        let down = (0..reads)
            .filter(|&r| anneal_once(&m, &s, read_seed(11, r)).0.as_slice()[0] == -1)
            .count() as f64
            / reads as f64;
        let p_down = 1.0 - p_up;
        let sigma = (p_down * (1.0 - p_down) / reads as f64).sqrt();
        assert!((down - p_down).abs() < 4.0 * sigma, "empirical {down}, exact {p_down}");
        assert!(p_down > 0.985);
    }

    #[test]
    fn path_model_matches_exact_chain() {
        let m = path_model();
        let s = default_schedule(&m, 100).unwrap();
        let reads = 4000;
        let set = sample(&m, &s, reads, 3).unwrap();
        assert_eq!(set.samples.iter().map(|s| s.multiplicity).sum::<usize>(), reads);
        assert_eq!(set.lowest_energy(), -3.0);
        assert!(set.cpu_time_seconds > 0.0);
        let p = set.count_at_or_below(-3.0 + 1e-9) as f64 / reads as f64;
        let exact = crate::exact::metropolis_success_probability(&m, &s, -3.0 + 1e-9).unwrap();
        let sigma = (exact * (1.0 - exact) / reads as f64).sqrt();
        assert!((p - exact).abs() < 4.0 * sigma, "empirical {p}, exact {exact}");
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let g = build_lattice(1, 2).unwrap();
        let m = generate_instance(&g, false, 21);
        let s = default_schedule(&m, 50).unwrap();
        let a = sample(&m, &s, 300, 9).unwrap();
        let b = sample(&m, &s, 300, 9).unwrap();
        let par = sample_with(&m, &s, 300, 9, SampleOptions { mode: SampleMode::Parallel, ..Default::default() }).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples, par.samples);
        for smp in &a.samples {
            assert_eq!(smp.energy, m.evaluate(&smp.spins).unwrap());
        }
        let by_energy = sample_with(&m, &s, 300, 9, SampleOptions { aggregation: Aggregation::ByEnergy, ..Default::default() }).unwrap();
        assert_eq!(by_energy.energies(), a.energies());
    }

    #[test]
    fn zero_reads_rejected() {
        let s = default_schedule(&path_model(), 10).unwrap();
        assert!(sample(&path_model(), &s, 0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = path_model();
        let s = default_schedule(&m, 20).unwrap();
        let set = sample(&m, &s, 50, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("run");
        set.save(&stem).unwrap();
        let text = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
        assert!(text.starts_with("energy,multiplicity,spins\n-3,"));
        assert_eq!(SampleSet::load(&stem).unwrap(), set);
    }
}
