//! Batch pipeline behind the `hexanneal` binary: instance generation, SA
//! sweeps with TTS, and size-indexed reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hexanneal::analysis::{select_best_fit, BestFit, Tts, DEFAULT_CONFIDENCE};
use hexanneal::anneal::{default_schedule, SampleMode, SampleOptions, DEFAULT_NUM_READS};
use hexanneal::exact::MAX_BRUTE_FORCE_VARS;
use hexanneal::rng::hash_words;
use hexanneal::{
    brute_force, build_lattice_for_target, compute_tts, generate_instance, sample_with, GroundTruth, IsingModel,
    Provenance,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target_sizes: Vec<usize>,
    pub instances_per_size: usize,
    pub include_cubic: bool,
    pub sweeps: usize,
    pub num_reads: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub parallel: bool,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            target_sizes: vec![100],
            instances_per_size: 10,
            include_cubic: false,
            sweeps: 100,
            num_reads: DEFAULT_NUM_READS,
            master_seed: 0,
            output_dir: PathBuf::from("runs"),
            confidence: DEFAULT_CONFIDENCE,
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.target_sizes.is_empty(), "at least one target size is required");
        ensure!(
            self.target_sizes.windows(2).all(|w| w[0] < w[1]),
            "target sizes must be strictly ascending, got {:?}",
            self.target_sizes
        );
        ensure!(
            self.target_sizes[0] >= 12,
            "target sizes must be at least 12 (one hexagon)"
        );
        ensure!(self.instances_per_size > 0, "instances_per_size must be positive");
        ensure!(self.sweeps >= 2, "sweeps must be at least 2");
        ensure!(self.num_reads > 0, "num_reads must be positive");
        ensure!(
            self.confidence > 0.0 && self.confidence < 1.0,
            "confidence must lie in (0, 1)"
        );
        Ok(())
    }

    pub fn config_path(dir: &Path) -> PathBuf {
        dir.join("config.json")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = Self::config_path(dir);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.output_dir = dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir)?;
        write_atomic(&Self::config_path(&self.output_dir), &serde_json::to_string_pretty(self)?)
    }

    pub fn instances_dir(&self) -> PathBuf {
        self.output_dir.join("instances")
    }

    pub fn truth_dir(&self) -> PathBuf {
        self.output_dir.join("truth")
    }

    pub fn samples_dir(&self) -> PathBuf {
        self.output_dir.join("samples")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.output_dir.join("results")
    }

    /// Every (size, replicate) pair of the sweep, in deterministic order.
    pub fn jobs(&self) -> Vec<InstanceId> {
        self.target_sizes
            .iter()
            .flat_map(|&size| (0..self.instances_per_size).map(move |replicate| InstanceId { size, replicate }))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct InstanceId {
    pub size: usize,
    pub replicate: usize,
}

impl InstanceId {
    pub fn name(&self) -> String {
        format!("s{}_r{}", self.size, self.replicate)
    }

    /// Seed of this instance; independent of every other size and replicate.
    pub fn seed(&self, master_seed: u64) -> u64 {
        hash_words(&[master_seed, self.size as u64, self.replicate as u64])
    }
}

/// Write through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn graph_path(cfg: &ExperimentConfig, size: usize) -> PathBuf {
    cfg.instances_dir().join(format!("s{size}.graph.json"))
}

pub fn instance_path(cfg: &ExperimentConfig, id: InstanceId) -> PathBuf {
    cfg.instances_dir().join(format!("{}.json", id.name()))
}

pub fn truth_path(cfg: &ExperimentConfig, id: InstanceId) -> PathBuf {
    cfg.truth_dir().join(format!("{}.json", id.name()))
}

pub fn result_path(cfg: &ExperimentConfig, id: InstanceId) -> PathBuf {
    cfg.results_dir().join(format!("{}_sw{}.json", id.name(), cfg.sweeps))
}

/// Write the lattice and every replicate instance. Re-running rewrites the
/// same bytes.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(cfg.instances_dir())
        .with_context(|| format!("creating {}", cfg.instances_dir().display()))?;
    cfg.save()?;
    let mut written = Vec::new();
    for &size in &cfg.target_sizes {
        let graph = build_lattice_for_target(size)?;
        let gp = graph_path(cfg, size);
        write_atomic(&gp, &graph.to_json())?;
        written.push(gp);
        for replicate in 0..cfg.instances_per_size {
            let id = InstanceId { size, replicate };
            let model = generate_instance(&graph, cfg.include_cubic, id.seed(cfg.master_seed));
            let ip = instance_path(cfg, id);
            write_atomic(&ip, &model.to_json())?;
            written.push(ip);
        }
    }
    Ok(written)
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_UNAVAILABLE: &str = "tts: unavailable";
pub const PARALLEL_WARNING: &str = "cpu time summed over parallel lanes; not single-process time";

/// One results file per instance and sweep count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub size: usize,
    pub replicate: usize,
    pub n: usize,
    pub sweeps: usize,
    pub num_reads: usize,
    pub seed: u64,
    pub p: Option<f64>,
    pub tts_seconds: Option<Tts>,
    pub cpu_time_seconds: Option<f64>,
    pub lowest_energy: Option<f64>,
    pub c_min: Option<f64>,
    pub truth: Option<Provenance>,
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub status: String,
}

impl RunRecord {
    fn failed(cfg: &ExperimentConfig, id: InstanceId, message: String) -> Self {
        RunRecord {
            instance: id.name(),
            size: id.size,
            replicate: id.replicate,
            n: 0,
            sweeps: cfg.sweeps,
            num_reads: cfg.num_reads,
            seed: 0,
            p: None,
            tts_seconds: None,
            cpu_time_seconds: None,
            lowest_energy: None,
            c_min: None,
            truth: None,
            parallel: cfg.parallel,
            warning: None,
            status: format!("error: {message}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub unavailable: usize,
    pub failed: Vec<(String, String)>,
}

fn load_truth(cfg: &ExperimentConfig, id: InstanceId, model: &IsingModel) -> Result<Option<GroundTruth>> {
    let path = truth_path(cfg, id);
    if path.exists() {
        let truth = GroundTruth::load(&path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Some(truth));
    }
    if model.n <= MAX_BRUTE_FORCE_VARS {
        let truth = brute_force(model, false)?;
        fs::create_dir_all(cfg.truth_dir())?;
        write_atomic(&path, &truth.to_json())?;
        return Ok(Some(truth));
    }
    Ok(None)
}

fn run_one(cfg: &ExperimentConfig, id: InstanceId) -> Result<RunRecord> {
    let ip = instance_path(cfg, id);
    let model = IsingModel::load(&ip).with_context(|| format!("reading {}", ip.display()))?;
    let truth = load_truth(cfg, id, &model)?;
    let schedule = default_schedule(&model, cfg.sweeps)?;
    let seed = hash_words(&[id.seed(cfg.master_seed), cfg.sweeps as u64]);
    let options = SampleOptions {
        mode: if cfg.parallel { SampleMode::Parallel } else { SampleMode::Sequential },
        ..SampleOptions::default()
    };
    let set = sample_with(&model, &schedule, cfg.num_reads, seed, options)?;
    fs::create_dir_all(cfg.samples_dir())?;
    set.save(cfg.samples_dir().join(format!("{}_sw{}", id.name(), cfg.sweeps)))?;
    let mut record = RunRecord {
        instance: id.name(),
        size: id.size,
        replicate: id.replicate,
        n: model.n,
        sweeps: cfg.sweeps,
        num_reads: cfg.num_reads,
        seed,
        p: None,
        tts_seconds: None,
        cpu_time_seconds: Some(set.cpu_time_seconds),
        lowest_energy: Some(set.lowest_energy()),
        c_min: None,
        truth: None,
        parallel: cfg.parallel,
        warning: cfg.parallel.then(|| PARALLEL_WARNING.to_string()),
        status: STATUS_UNAVAILABLE.to_string(),
    };
    if let Some(truth) = truth {
        let tts = compute_tts(&set, &truth, cfg.confidence)?;
        record.p = Some(tts.success_rate);
        record.tts_seconds = Some(tts.tts_seconds);
        record.c_min = Some(truth.c_min);
        record.truth = Some(truth.provenance);
        record.status = STATUS_OK.to_string();
    }
    Ok(record)
}

fn completed(cfg: &ExperimentConfig, id: InstanceId) -> bool {
    let Ok(text) = fs::read_to_string(result_path(cfg, id)) else {
        return false;
    };
    match serde_json::from_str::<RunRecord>(&text) {
        Ok(r) => r.sweeps == cfg.sweeps && r.num_reads == cfg.num_reads && r.status == STATUS_OK,
        Err(_) => false,
    }
}

/// Sample every generated instance and write one results file each.
/// Finished instances are skipped; failures are recorded without stopping
/// the sweep.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(cfg.results_dir())?;
    let outcomes: Vec<(InstanceId, Option<Result<RunRecord>>)> = cfg
        .jobs()
        .into_par_iter()
        .map(|id| {
            if completed(cfg, id) {
                (id, None)
            } else {
                (id, Some(run_one(cfg, id)))
            }
        })
        .collect();
    let mut summary = RunSummary::default();
    for (id, outcome) in outcomes {
        match outcome {
            None => summary.skipped += 1,
            Some(Ok(record)) => {
                if record.status == STATUS_UNAVAILABLE {
                    summary.unavailable += 1;
                } else {
                    summary.completed += 1;
                }
                write_atomic(&result_path(cfg, id), &serde_json::to_string_pretty(&record)?)?;
            }
            Some(Err(e)) => {
                let message = format!("{e:#}");
                let record = RunRecord::failed(cfg, id, message.clone());
                write_atomic(&result_path(cfg, id), &serde_json::to_string_pretty(&record)?)?;
                summary.failed.push((id.name(), message));
            }
        }
    }
    let records = read_records(&cfg.results_dir(), cfg.sweeps)?;
    write_atomic(&table_path(&cfg.output_dir, cfg.sweeps), &results_table(&records))?;
    Ok(summary)
}

pub fn table_path(output_dir: &Path, sweeps: usize) -> PathBuf {
    output_dir.join(format!("results_sw{sweeps}.csv"))
}

/// One row per instance, ordered by size then replicate.
pub fn results_table(records: &[RunRecord]) -> String {
    let mut out = String::from("size,replicate,n,p,tts_seconds,cpu_time_seconds,status\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.size,
            r.replicate,
            r.n,
            fmt_opt(r.p),
            r.tts_seconds.map(|t| t.to_string()).unwrap_or_default(),
            fmt_opt(r.cpu_time_seconds),
            r.status.replace(',', ";")
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub size: usize,
    pub n: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub p_mean: Option<f64>,
    pub unsolved: usize,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sweeps: usize,
    pub rows: Vec<SizeRow>,
    /// `(n, mean TTS)` for sizes with at least one finite value.
    pub series: Vec<(f64, f64)>,
    pub fit: BestFit,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,n,mean,min,max,p_mean,unsolved,instances\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.size,
                r.n,
                fmt_opt(r.mean),
                fmt_opt(r.min),
                fmt_opt(r.max),
                fmt_opt(r.p_mean),
                r.unsolved,
                r.instances
            ));
        }
        out
    }
}

pub fn read_records(results_dir: &Path, sweeps: usize) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for entry in fs::read_dir(results_dir).with_context(|| format!("reading {}", results_dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&fs::read_to_string(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        if record.sweeps == sweeps {
            records.push(record);
        }
    }
    records.sort_by_key(|r| (r.size, r.replicate));
    Ok(records)
}

/// Per-size TTS summary and scaling fits over the mean series.
pub fn build_report(records: &[RunRecord], sweeps: usize) -> Result<Report> {
    let mut by_size: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_size.entry(r.size).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (&size, group) in &by_size {
        let finite: Vec<f64> = group
            .iter()
            .filter_map(|r| r.tts_seconds.and_then(Tts::seconds))
            .collect();
        let rates: Vec<f64> = group.iter().filter_map(|r| r.p).collect();
        let mean = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
        let n = group.iter().map(|r| r.n).max().unwrap_or(0);
        if let Some(m) = mean {
            series.push((n as f64, m));
        }
        rows.push(SizeRow {
            size,
            n,
            mean,
            min: finite.iter().copied().reduce(f64::min),
            max: finite.iter().copied().reduce(f64::max),
            p_mean: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
            unsolved: group.len() - finite.len(),
            instances: group.len(),
        });
    }
    if series.len() < 3 {
        bail!("report needs at least 3 sizes with finite mean TTS, found {}", series.len());
    }
    let fit = select_best_fit(&series)?;
    Ok(Report {
        sweeps,
        rows,
        series,
        fit,
    })
}

/// Summarise `results/` into `report_sw{sweeps}.csv` and `fit_sw{sweeps}.json`.
pub fn cmd_report(output_dir: &Path, sweeps: usize) -> Result<Report> {
    let records = read_records(&output_dir.join("results"), sweeps)?;
    let report = build_report(&records, sweeps)?;
    write_atomic(&output_dir.join(format!("report_sw{sweeps}.csv")), &report.to_csv())?;
    write_atomic(
        &output_dir.join(format!("fit_sw{sweeps}.json")),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// `size,time` rows with a header line.
pub fn parse_points(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (x, y) = line
            .split_once(',')
            .with_context(|| format!("line {}: expected size,time", no + 1))?;
        points.push((
            x.trim().parse().with_context(|| format!("line {}: bad size", no + 1))?,
            y.trim().parse().with_context(|| format!("line {}: bad time", no + 1))?,
        ));
    }
    Ok(points)
}
