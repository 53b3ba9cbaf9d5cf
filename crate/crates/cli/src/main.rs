use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hexanneal::analysis::DEFAULT_CONFIDENCE;
use hexanneal::anneal::DEFAULT_NUM_READS;
use hexanneal::exact::{ground_state_magnetization_study, ingest_certificate_file};
use hexanneal::model::random_sample_energies;
use hexanneal::reduce::{lift_to_lp_with, quadratize, quadratize_on_lattice, write_lp, write_qp};
use hexanneal::{
    brute_force, compute_tts, fit_scaling, histogram_approximation_ratios, select_best_fit, spin_to_binary,
    FitFamily, GroundTruth, HeavyHexGraph, IsingModel, SampleSet,
};
use hexanneal_cli::{cmd_generate, cmd_report, cmd_run, parse_points, write_atomic, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hexanneal", version, about = "Heavy-hex spin-glass benchmark pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for instance generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment directory.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    sweeps: Option<usize>,
    #[arg(long, global = true)]
    reads: Option<usize>,
    /// Include the geometrically local cubic terms.
    #[arg(long, global = true, overrides_with = "no_cubic")]
    cubic: bool,
    #[arg(long = "no-cubic", global = true)]
    no_cubic: bool,
    #[arg(long, global = true)]
    confidence: Option<f64>,
    /// Spread reads over threads; CPU time is summed over lanes.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write lattices and random instances for every size and replicate.
    Generate {
        /// Comma-separated target node counts.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        instances: usize,
    },
    /// Sample every generated instance and record TTS.
    Run,
    /// Write an instance as a CPLEX LP file.
    ExportLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Lift quadratic monomials too.
        #[arg(long)]
        binary_products: bool,
        /// Emit the quadratized binary program instead of the lifted LP.
        #[arg(long)]
        quadratized: bool,
        /// Penalty weight for --quadratized (default: n).
        #[arg(long)]
        penalty: Option<f64>,
        /// Lattice file for the quadratized substitution pairs.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Enumerate all states of a small instance.
    SolveExact {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Keep every minimizer rather than only the first.
        #[arg(long)]
        enumerate_all: bool,
    },
    /// Verify an external solver solution and store it as ground truth.
    IngestCert {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Time-to-solution of a stored sample set.
    Tts {
        /// Sample set path stem (without .csv).
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Fit scaling families to a `size,time` CSV.
    Fit {
        #[arg(long)]
        points: PathBuf,
        /// Fit a single family instead of selecting the best.
        #[arg(long)]
        family: Option<FitFamily>,
    },
    /// Summarise results into a per-size table and fits.
    Report,
    /// Histogram of approximation ratios of uniformly random states.
    RandomDist {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Global {
    fn cubic(&self) -> Option<bool> {
        match (self.cubic, self.no_cubic) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.sweeps {
            cfg.sweeps = s;
        }
        if let Some(r) = self.reads {
            cfg.num_reads = r;
        }
        if let Some(c) = self.confidence {
            cfg.confidence = c;
        }
        if self.parallel {
            cfg.parallel = true;
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_model(path: &Path) -> Result<IsingModel> {
    IsingModel::load(path).with_context(|| format!("reading instance {}", path.display()))
}

fn load_truth(path: &Path) -> Result<GroundTruth> {
    GroundTruth::load(path).with_context(|| format!("reading ground truth {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Generate { sizes, instances } => {
            let mut cfg = ExperimentConfig {
                target_sizes: sizes.clone(),
                instances_per_size: *instances,
                include_cubic: g.cubic().unwrap_or(false),
                sweeps: 100,
                num_reads: DEFAULT_NUM_READS,
                master_seed: g.seed.unwrap_or(0),
                output_dir: g.out.clone(),
                confidence: DEFAULT_CONFIDENCE,
                parallel: false,
            };
            g.apply(&mut cfg);
            let written = cmd_generate(&cfg)?;
            println!("wrote {} files under {}", written.len(), cfg.instances_dir().display());
        }
        Command::Run => {
            let mut cfg = ExperimentConfig::load(&g.out)?;
            if g.seed.is_some_and(|s| s != cfg.master_seed) || g.cubic().is_some_and(|c| c != cfg.include_cubic) {
                bail!("--seed and --cubic are fixed at generate time; regenerate to change them");
            }
            g.apply(&mut cfg);
            cfg.validate()?;
            let summary = cmd_run(&cfg)?;
            println!(
                "completed {}, skipped {}, tts unavailable {}, failed {}",
                summary.completed,
                summary.skipped,
                summary.unavailable,
                summary.failed.len()
            );
            for (name, err) in &summary.failed {
                eprintln!("{name}: {err}");
            }
            if cfg.parallel {
                eprintln!("warning: {}", hexanneal_cli::PARALLEL_WARNING);
            }
        }
        Command::ExportLp {
            instance,
            output,
            binary_products,
            quadratized,
            penalty,
            graph,
        } => {
            let model = load_model(instance)?;
            let poly = spin_to_binary(&model);
            let text = if *quadratized {
                let weight = penalty.unwrap_or(model.n as f64);
                let q = match graph {
                    Some(p) => quadratize_on_lattice(&poly, weight, &HeavyHexGraph::from_json(&fs::read_to_string(p)?)?)?,
                    None => quadratize(&poly, weight)?,
                };
                if !q.penalty_sufficient() {
                    eprintln!("warning: penalty {weight} does not exceed the largest cubic coefficient");
                }
                write_qp(&q)
            } else {
                write_lp(&lift_to_lp_with(&poly, *binary_products)?)
            };
            write_atomic(output, &text)?;
            println!("wrote {}", output.display());
        }
        Command::SolveExact {
            instance,
            output,
            enumerate_all,
        } => {
            let model = load_model(instance)?;
            let truth = brute_force(&model, *enumerate_all)?;
            let rows = ground_state_magnetization_study(std::slice::from_ref(&model), std::slice::from_ref(&truth))?;
            print_json(&serde_json::json!({
                "c_min": truth.c_min,
                "c_max": truth.c_max,
                "degeneracy_count": truth.degeneracy_count,
                "minimizer": truth.designated().map(|z| z.to_sign_string()),
                "magnetization": rows[0],
            }))?;
            if let Some(path) = output {
                truth.save(path)?;
            }
        }
        Command::IngestCert { instance, cert, output } => {
            let model = load_model(instance)?;
            let truth = ingest_certificate_file(&model, cert)?;
            truth.save(output)?;
            println!("certified c_min = {}", truth.c_min);
        }
        Command::Tts { samples, truth } => {
            let set = SampleSet::load(samples).with_context(|| format!("reading samples {}", samples.display()))?;
            let truth = load_truth(truth)?;
            let result = compute_tts(&set, &truth, g.confidence.unwrap_or(DEFAULT_CONFIDENCE))?;
            print_json(&result)?;
        }
        Command::Fit { points, family } => {
            let text = fs::read_to_string(points).with_context(|| format!("reading {}", points.display()))?;
            let pts = parse_points(&text)?;
            match family {
                Some(f) => print_json(&fit_scaling(&pts, *f)?)?,
                None => print_json(&select_best_fit(&pts)?)?,
            }
        }
        Command::Report => {
            let sweeps = match g.sweeps {
                Some(s) => s,
                None => ExperimentConfig::load(&g.out)?.sweeps,
            };
            let report = cmd_report(&g.out, sweeps)?;
            print!("{}", report.to_csv());
            println!("best fit: {}", report.fit.best);
        }
        Command::RandomDist {
            instance,
            truth,
            samples,
            bins,
            output,
        } => {
            let model = load_model(instance)?;
            let truth = load_truth(truth)?;
            let bounds = truth.bounds()?;
            let energies = random_sample_energies(&model, *samples, g.seed.unwrap_or(0))?;
            let hist = histogram_approximation_ratios(&energies, &bounds, *bins)?;
            match output {
                Some(path) => write_atomic(path, &hist.to_csv())?,
                None => print!("{}", hist.to_csv()),
            }
        }
    }
    Ok(())
}
