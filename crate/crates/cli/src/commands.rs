//! Subcommand definitions and dispatch.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use densiwae::data::{sample_latent, seeds::derive_seed};
use densiwae::kde::{robust_kde_experiment, RobustKdeConfig};
use densiwae::networks::save_mlp;
use densiwae::stats::{cramer_test, ff_test, CramerMethod, TestResult, DEFAULT_EIGEN_DRAWS, DEFAULT_PERMUTATIONS};
use densiwae::training::{train_wae, write_metrics_csv};
use densiwae::Dataset;

use crate::config::{parse_contamination_law, parse_latent, KvConfig};
use crate::contamination::{emit_contamination_plots, run_contamination_study, write_contamination_csv, ContaminationStudy};
use crate::error::{CliError, CliResult};
use crate::plot::{emit_plots, PlotKind};
use crate::rate::fit_rate;
use crate::setup::{wae_config, DatasetSpec};
use crate::sweep::{read_sweep_csv, run_sweep, SweepConfig};

/// Environment variable consulted when `--workers` is absent.
pub const WORKERS_ENV: &str = "DENSIWAE_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "densiwae", version, about = "Wasserstein autoencoder density-estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; falls back to DENSIWAE_WORKERS, then to the number
    /// of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset to `data.csv`.
    GenData(Common),
    /// Train one WAE; writes `metrics.csv` and checkpoints.
    Train(Common),
    /// Sample-size sweep; writes `sweep.csv`, `timings.csv`, `failures.csv`.
    Sweep(Common),
    /// Log-log fit of a sweep column against n.
    RateFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "latent_mmd")]
        column: String,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// SVG plots of a sweep CSV.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        csv: PathBuf,
        /// `losses` or `corrected`.
        #[arg(long, default_value = "losses")]
        kind: PlotKind,
    },
    /// Contamination study; writes `contamination.csv` and plots.
    Contaminate(Common),
    /// Robust-KDE rate experiment; writes `robust_kde.csv`.
    RobustKde(Common),
    /// Two-sample tests between two CSV samples; writes `tests.csv`.
    Test2s {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
}

impl Common {
    fn kv(&self) -> CliResult<KvConfig> {
        match &self.config {
            Some(p) => KvConfig::load(p),
            None => Ok(KvConfig::default()),
        }
    }

    fn master_seed(&self, kv: &KvConfig) -> CliResult<u64> {
        let from_file = kv.get_or("seed", 1u64)?;
        Ok(self.seed.unwrap_or(from_file))
    }

    fn out_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

/// `--workers`, then `DENSIWAE_WORKERS`, then the available parallelism.
pub fn resolve_workers(flag: Option<usize>) -> CliResult<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{} must be a positive integer, got `{}`", WORKERS_ENV, v)))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(CliError::config("worker count must be >= 1"));
    }
    Ok(n)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(c) => gen_data(&c),
        Command::Train(c) => train(&c),
        Command::Sweep(c) => sweep(&c),
        Command::RateFit {
            common,
            csv,
            column,
            n_min,
            n_max,
        } => {
            let range = match (n_min, n_max) {
                (None, None) => None,
                (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(usize::MAX))),
            };
            let fit = fit_rate(open(&csv)?, &column, range)?;
            let out = common.out_dir()?.join("rate_fit.csv");
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(["column", "slope", "intercept", "slope_se", "n_min", "n_max", "excluded"])?;
            w.write_record([
                column.clone(),
                fit.slope.to_string(),
                fit.intercept.to_string(),
                fit.slope_se.to_string(),
                fit.n_range.0.to_string(),
                fit.n_range.1.to_string(),
                fit.excluded.to_string(),
            ])?;
            w.flush().map_err(|e| CliError::io(&out, e))?;
            println!(
                "{}: slope {:.4} ± {:.4} over n in [{}, {}] ({} rows excluded)",
                column, fit.slope, fit.slope_se, fit.n_range.0, fit.n_range.1, fit.excluded
            );
            Ok(())
        }
        Command::Plot { common, csv, kind } => {
            let records = read_sweep_csv(open(&csv)?)?;
            for p in emit_plots(&records, kind, common.out_dir()?)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Contaminate(c) => contamination(&c),
        Command::RobustKde(c) => robust_kde(&c),
        Command::Test2s { common, x, y } => test2s(&common, &x, &y),
    }
}

/// Keys: `generator` (`five_gaussian` or `latent`), `n`, plus `latent` and
/// `latent_dim` for latent draws.
fn gen_data(c: &Common) -> CliResult<()> {
    let kv = c.kv()?;
    let seed = c.master_seed(&kv)?;
    let n = kv.get_or("n", 10_000usize)?;
    let ds = match kv.get_or("generator", "five_gaussian".to_string())?.as_str() {
        "five_gaussian" => densiwae::data::sample_five_gaussian(n, seed)?,
        "latent" => {
            let k = kv.get_or("latent_dim", 2usize)?;
            let law = parse_latent(&kv.get_or("latent", "gaussian".to_string())?, k)?;
            sample_latent(&law, n, seed)?
        }
        other => return Err(CliError::config(format!("unknown generator `{}`", other))),
    };
    kv.finish()?;
    let path = c.out_dir()?.join("data.csv");
    ds.write_csv(create(&path)?)?;
    println!("wrote {} rows to {}", ds.n(), path.display());
    Ok(())
}

fn load_data(kv: &KvConfig) -> CliResult<(DatasetSpec, Dataset)> {
    let spec = DatasetSpec::from_config(kv)?;
    let data = spec.load()?;
    Ok((spec, data))
}

/// Dataset keys, training keys and optional `n` (uniform subsample size).
fn train(c: &Common) -> CliResult<()> {
    let kv = c.kv()?;
    let seed = c.master_seed(&kv)?;
    let (spec, data) = load_data(&kv)?;
    let cfg = wae_config(&kv, seed, spec.is_mnist())?;
    let data = match kv.get::<usize>("n")? {
        Some(n) => data.subsample(n, derive_seed(seed, "subsample", &[]))?,
        None => data,
    };
    kv.finish()?;
    let (state, records) = train_wae(&cfg, &data)?;
    let out = c.out_dir()?;
    write_metrics_csv(create(&out.join("metrics.csv"))?, &records)?;
    save_mlp(&state.encoder, create(&out.join("encoder.ckpt"))?)?;
    save_mlp(&state.decoder, create(&out.join("decoder.ckpt"))?)?;
    if let Some(last) = records.last() {
        println!(
            "epoch {}: latent_mmd {:.5} latent_js {:.5} recon_w1 {:.5}",
            last.epoch, last.latent_mmd, last.latent_js, last.recon_w1
        );
    }
    Ok(())
}

/// Sweep keys on top of dataset and training keys: `n_grid`, `runs`.
pub fn sweep_config(kv: &KvConfig, c: &Common, mnist: bool) -> CliResult<SweepConfig> {
    let seed = c.master_seed(kv)?;
    Ok(SweepConfig {
        wae: wae_config(kv, seed, mnist)?,
        n_grid: kv.list("n_grid")?.unwrap_or_else(|| vec![1000, 3000, 5000, 10_000]),
        runs: kv.get_or("runs", 5usize)?,
        seed,
        out_dir: Some(c.out.clone()),
        workers: resolve_workers(c.workers)?,
    })
}

fn sweep(c: &Common) -> CliResult<()> {
    let kv = c.kv()?;
    let (spec, data) = load_data(&kv)?;
    let cfg = sweep_config(&kv, c, spec.is_mnist())?;
    kv.finish()?;
    let out = run_sweep(&cfg, &data)?;
    println!("{} cells completed, {} failed", out.records.len(), out.failures.len());
    for f in &out.failures {
        eprintln!("cell n={} run={} failed: {}", f.n, f.run, f.message);
    }
    Ok(())
}

/// Keys: `laws`, `fractions`, `levels` (comma lists), `n`, `runs`,
/// `epsilon_pairs`, plus dataset and training keys.
fn contamination(c: &Common) -> CliResult<()> {
    let kv = c.kv()?;
    let seed = c.master_seed(&kv)?;
    let (spec, data) = load_data(&kv)?;
    let laws = match kv.raw("laws") {
        Some(s) => s.split(',').map(parse_contamination_law).collect::<CliResult<Vec<_>>>()?,
        None => vec![densiwae::ContaminationLaw::Cauchy],
    };
    let study = ContaminationStudy {
        wae: wae_config(&kv, seed, spec.is_mnist())?,
        laws,
        fractions: kv.list("fractions")?.unwrap_or_else(|| vec![0.0, 0.1, 0.5]),
        levels: kv.list("levels")?.unwrap_or_else(|| vec![0.2]),
        n: kv.get_or("n", 1000usize)?,
        runs: kv.get_or("runs", 1usize)?,
        seed,
        workers: resolve_workers(c.workers)?,
        epsilon_pairs: kv.get_or("epsilon_pairs", 2000usize)?,
    };
    kv.finish()?;
    let out = run_contamination_study(&study, &data)?;
    let dir = c.out_dir()?;
    write_contamination_csv(create(&dir.join("contamination.csv"))?, &out.rows)?;
    if !out.rows.is_empty() {
        emit_contamination_plots(&out.rows, dir)?;
    }
    println!("{} cells completed, {} failed", out.rows.len(), out.failures.len());
    for f in &out.failures {
        eprintln!("cell run={} failed: {}", f.run, f.message);
    }
    Ok(())
}

/// Keys: `n_grid`, `reps`, `smoothness`, `law` (absent for clean data),
/// `fraction`, `level`, `epsilon`, `epsilon_pairs`.
fn robust_kde(c: &Common) -> CliResult<()> {
    let kv = c.kv()?;
    let seed = c.master_seed(&kv)?;
    let mut cfg = RobustKdeConfig::clean_1d(
        kv.list("n_grid")?.unwrap_or_else(|| vec![500, 1000, 2000, 4000, 8000, 16_000, 32_000]),
        kv.get_or("reps", 50usize)?,
        seed,
    );
    cfg.smoothness = kv.get_or("smoothness", cfg.smoothness)?;
    cfg.law = kv.raw("law").map(parse_contamination_law).transpose()?;
    cfg.fraction = kv.get_or("fraction", 0.0)?;
    cfg.level = kv.get_or("level", 0.0)?;
    cfg.epsilon = kv.get_or("epsilon", 0.0)?;
    cfg.epsilon_pairs = kv.get_or("epsilon_pairs", 0usize)?;
    kv.finish()?;
    let workers = resolve_workers(c.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {}", e)))?;
    let table = pool.install(|| robust_kde_experiment(&cfg))?;
    let path = c.out_dir()?.join("robust_kde.csv");
    table.write_csv(create(&path)?)?;
    println!(
        "slope {:.4} ± {:.4}; upper-half slope {:.4}",
        table.fit_all.slope, table.fit_all.slope_se, table.fit_top_half.slope
    );
    Ok(())
}

/// Keys: `n_perm`, `n_boot`, `eigen_draws`.
fn test2s(c: &Common, x: &Path, y: &Path) -> CliResult<()> {
    let kv = c.kv()?;
    let seed = c.master_seed(&kv)?;
    let n_perm = kv.get_or("n_perm", DEFAULT_PERMUTATIONS)?;
    let n_boot = kv.get_or("n_boot", DEFAULT_PERMUTATIONS)?;
    let draws = kv.get_or("eigen_draws", DEFAULT_EIGEN_DRAWS)?;
    kv.finish()?;
    let xs = Dataset::read_csv(open(x)?, "x")?;
    let ys = Dataset::read_csv(open(y)?, "y")?;
    let results: Vec<TestResult> = vec![
        ff_test(xs.matrix(), ys.matrix(), n_perm, derive_seed(seed, "ff", &[]))?,
        cramer_test(xs.matrix(), ys.matrix(), CramerMethod::MonteCarlo, n_boot, derive_seed(seed, "cramer", &[]))?,
        cramer_test(xs.matrix(), ys.matrix(), CramerMethod::Eigenvalue, draws, derive_seed(seed, "cramer", &[]))?,
    ];
    let path = c.out_dir()?.join("tests.csv");
    TestResult::write_csv(&results, create(&path)?)?;
    for r in &results {
        println!("{} ({}): statistic {:.6}, p = {:.4}", r.test, r.method, r.statistic, r.p_value);
    }
    Ok(())
}
