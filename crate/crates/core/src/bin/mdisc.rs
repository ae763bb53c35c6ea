use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use manifold_disc::cmd::{error_counts, LabeledCloud, MultiSampleSet};
use manifold_disc::geometry::{Manifold, PointCloud, Projector, SampleSet};
use manifold_disc::harness::{
    closest_sample_share, registration_metrics, repetition_dataset, run_experiment, AlgorithmSpec,
    Context, ExperimentConfig,
};
use manifold_disc::io::{fmt_num, read_cloud, read_sample_sets, write_cloud, write_sample_sets};
use manifold_disc::{Error, Result};

/// Manifold discretization experiments.
#[derive(Parser)]
#[command(name = "mdisc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train and test clouds of one repetition.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for train.csv and test.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
    },
    /// Discretize all manifolds with one algorithm.
    Discretize {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        config: PathBuf,
        /// Samples per manifold.
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
    },
    /// Registration error and classification rate of a sample-set file.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Full experiment; CSV files go to the configured output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Closest-sample share of several sample-set files.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(required = true, num_args = 2..)]
        samples: Vec<PathBuf>,
    },
}

fn load(path: &Path) -> Result<(ExperimentConfig, PathBuf, Vec<Manifold>)> {
    let (cfg, base) = ExperimentConfig::load(path)?;
    let manifolds = cfg.build_manifolds(&base)?;
    Ok((cfg, base, manifolds))
}

fn algorithm(cfg: &ExperimentConfig, name: &str) -> Result<AlgorithmSpec> {
    if let Some(a) = cfg.algorithms.iter().find(|a| a.name() == name) {
        return Ok(a.clone());
    }
    serde_json::from_value(serde_json::json!({ "name": name }))
        .map_err(|_| Error::Config(format!("unknown algorithm {name:?}")))
}

fn read_sets(path: &Path, manifolds: &[Manifold]) -> Result<Vec<SampleSet>> {
    let sets = read_sample_sets(File::open(path)?, manifolds)?;
    // order by manifold so positions match class labels
    let mut out = Vec::with_capacity(manifolds.len());
    for m in manifolds {
        match sets.iter().find(|s| s.manifold_id == m.id()) {
            Some(s) => out.push(s.clone()),
            None => {
                return Err(Error::Parse(format!(
                    "{}: no samples for manifold {}",
                    path.display(),
                    m.id()
                )))
            }
        }
    }
    Ok(out)
}

fn oracles(cfg: &ExperimentConfig, manifolds: &[Manifold]) -> Result<Vec<Projector>> {
    manifolds
        .iter()
        .map(|m| Projector::new(m, &cfg.projection.oracle_for(m), cfg.projection.refine))
        .collect()
}

fn class_points(test: &PointCloud, m: usize) -> Result<PointCloud> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::Parse("test cloud needs labels".into()))?;
    let idx: Vec<usize> = (0..test.len()).filter(|&p| labels[p] == m).collect();
    Ok(test.subset(&idx))
}

fn dataset(config: &Path, out: &Path, rep: usize) -> Result<()> {
    let (cfg, _, manifolds) = load(config)?;
    let data = repetition_dataset(&cfg, &manifolds, rep)?;
    std::fs::create_dir_all(out)?;
    write_cloud(File::create(out.join("train.csv"))?, data.train.points())?;
    write_cloud(File::create(out.join("test.csv"))?, data.test.points())?;
    Ok(())
}

fn discretize(algo: &str, config: &Path, n: usize, out: &Path, rep: usize) -> Result<()> {
    let (cfg, _, manifolds) = load(config)?;
    let spec = algorithm(&cfg, algo)?;
    if spec.is_joint() && manifolds.len() < 2 {
        return Err(Error::Config(format!(
            "{algo} needs at least two manifolds"
        )));
    }
    let working = manifolds
        .iter()
        .map(|m| Projector::new(m, &cfg.projection.working_for(m), cfg.projection.refine))
        .collect::<Result<Vec<_>>>()?;
    let data = repetition_dataset(&cfg, &manifolds, rep)?;
    let ctx = Context::new(&cfg, &manifolds, &working, &data.train, rep);
    let remd = ctx.remd_sets(n).map_err(|e| e.to_string());
    let (sets, _) = ctx.run_algorithm(&spec, n, &remd).map_err(Error::Usage)?;
    write_sample_sets(File::create(out)?, &sets)
}

fn evaluate(config: &Path, samples: &Path, test: &Path) -> Result<()> {
    let (cfg, _, manifolds) = load(config)?;
    let sets = read_sets(samples, &manifolds)?;
    let test = read_cloud(File::open(test)?)?;
    let oracles = oracles(&cfg, &manifolds)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "manifold,samples,registration_error")?;
    for (m, set) in sets.iter().enumerate() {
        let pts = class_points(&test, m)?;
        if pts.is_empty() {
            continue;
        }
        let (mean, _) = registration_metrics(&oracles[m], set, &pts)?;
        writeln!(out, "{m},{},{}", set.len(), fmt_num(mean))?;
    }
    if sets.len() >= 2 {
        let cloud = LabeledCloud::from_cloud(test)?;
        let c = error_counts(&MultiSampleSet::new(sets)?, &cloud)?;
        let eps = c.misclassified as f64 / c.total as f64;
        let rate = 100.0 * (c.total - c.misclassified) as f64 / c.total as f64;
        writeln!(out, "classification_rate,{}", fmt_num(rate))?;
        writeln!(out, "test_error,{}", fmt_num(eps))?;
    }
    Ok(())
}

fn compare(config: &Path, test: &Path, files: &[PathBuf]) -> Result<()> {
    let (_, _, manifolds) = load(config)?;
    let test = read_cloud(File::open(test)?)?;
    let all = files
        .iter()
        .map(|f| read_sets(f, &manifolds))
        .collect::<Result<Vec<_>>>()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "method,manifold,closest_share")?;
    for m in 0..manifolds.len() {
        let pts = class_points(&test, m)?;
        if pts.is_empty() {
            continue;
        }
        let sets: Vec<&SampleSet> = all.iter().map(|s| &s[m]).collect();
        let shares = closest_sample_share(&sets, &pts)?;
        for (f, p) in files.iter().zip(&shares.percent) {
            writeln!(out, "{},{m},{}", f.display(), fmt_num(*p))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Dataset {
            config,
            out,
            repetition,
        } => dataset(config, out, *repetition),
        Command::Discretize {
            algo,
            config,
            budget,
            out,
            repetition,
        } => discretize(algo, config, *budget, out, *repetition),
        Command::Evaluate {
            config,
            samples,
            test,
        } => evaluate(config, samples, test),
        Command::Run { config } => ExperimentConfig::load(config).and_then(|(cfg, base)| {
            run_experiment(&cfg, &base)?;
            println!("{}", base.join(&cfg.output_dir).display());
            Ok(())
        }),
        Command::Compare {
            config,
            test,
            samples,
        } => compare(config, test, samples),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdisc: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
