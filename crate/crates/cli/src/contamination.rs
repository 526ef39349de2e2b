//! Training on contaminated data, scored against the clean data.

use std::io::Write;
use std::path::{Path, PathBuf};

use densiwae::data::seeds::derive_seed;
use densiwae::data::{contaminate, wasserstein_epsilon};
use densiwae::divergences::{w1_exact_capped, Metric};
use densiwae::training::{evaluate, train_wae};
use densiwae::{ContaminationLaw, ContaminationSpec, Dataset, WaeConfig};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::plot::{render_svg, Series};
use crate::sweep::CellFailure;

pub const CONTAMINATION_CSV_HEADER: [&str; 14] = [
    "law",
    "fraction",
    "level",
    "n",
    "run",
    "seed",
    "recon_w1",
    "recon_mse",
    "latent_mmd",
    "latent_js",
    "latent_tv",
    "epsilon_w1",
    "epsilon_coupling",
    "pair_distance",
];

#[derive(Clone, Debug)]
pub struct ContaminationStudy {
    pub wae: WaeConfig,
    pub laws: Vec<ContaminationLaw>,
    pub fractions: Vec<f64>,
    pub levels: Vec<f64>,
    /// Subsample size drawn from the clean dataset.
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    pub workers: usize,
    /// Pairs for the Monte-Carlo `E‖X - Y‖`.
    pub epsilon_pairs: usize,
}

/// One trained cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ContaminationRow {
    pub law: String,
    pub fraction: f64,
    pub level: f64,
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    /// Against the clean subsample.
    pub recon_w1: f64,
    pub recon_mse: f64,
    pub latent_mmd: f64,
    pub latent_js: f64,
    pub latent_tv: f64,
    /// Exact `W1` between clean and contaminated subsample (capped).
    pub epsilon_w1: f64,
    /// Mean displacement `‖x_i - x'_i‖` of the identity coupling; an upper
    /// bound on the transport distance.
    pub epsilon_coupling: f64,
    /// Monte-Carlo `E‖X - X'‖` over independent rows.
    pub pair_distance: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ContaminationOutcome {
    pub rows: Vec<ContaminationRow>,
    pub failures: Vec<CellFailure>,
}

impl ContaminationStudy {
    pub fn validate(&self, data: &Dataset) -> CliResult<()> {
        if self.laws.is_empty() || self.fractions.is_empty() || self.levels.is_empty() {
            return Err(CliError::config("contamination grid must list at least one law, fraction and level"));
        }
        if self.runs == 0 || self.workers == 0 || self.epsilon_pairs == 0 {
            return Err(CliError::config("runs, workers and epsilon pairs must be >= 1"));
        }
        if self.n == 0 || self.n > data.n() {
            return Err(CliError::config(format!("n must lie in [1, {}]", data.n())));
        }
        for law in &self.laws {
            for &fraction in &self.fractions {
                for &level in &self.levels {
                    ContaminationSpec {
                        fraction,
                        level,
                        law: law.clone(),
                        seed: 0,
                    }
                    .validate(data.dim())?;
                }
            }
        }
        self.wae.validate(data.dim())?;
        Ok(())
    }

    /// Training seed of run `run`; shared by every contamination cell and
    /// equal to the sweep's cell seed for the same `(n, run)`.
    pub fn train_seed(&self, run: usize) -> u64 {
        derive_seed(self.seed, "cell", &[self.n as u64, run as u64])
    }

    fn cells(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.laws.len() {
            for f in 0..self.fractions.len() {
                for v in 0..self.levels.len() {
                    for r in 0..self.runs {
                        out.push((l, f, v, r));
                    }
                }
            }
        }
        out
    }

    fn run_cell(&self, data: &Dataset, (l, f, v, run): (usize, usize, usize, usize)) -> CliResult<ContaminationRow> {
        let seed = self.train_seed(run);
        let clean = data.subsample(self.n, derive_seed(seed, "subsample", &[]))?;
        let spec = ContaminationSpec {
            fraction: self.fractions[f],
            level: self.levels[v],
            law: self.laws[l].clone(),
            seed: derive_seed(self.seed, "contaminate", &[l as u64, f as u64, v as u64, run as u64]),
        };
        let dirty = contaminate(&clean, &spec)?;
        let wae = WaeConfig {
            seed,
            ..self.wae.clone()
        };
        let (state, _) = train_wae(&wae, &dirty)?;
        let m = evaluate(&state, &clean, &wae)?;
        let eps = w1_exact_capped(
            clean.matrix(),
            dirty.matrix(),
            Metric::L2,
            self.wae.eval_cap,
            derive_seed(seed, "eval_subsample", &[]),
        )?;
        let coupling = (0..clean.n())
            .map(|i| clean.row(i).iter().zip(dirty.row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum::<f64>()
            / clean.n() as f64;
        let pairs = wasserstein_epsilon(&clean, &dirty, self.epsilon_pairs, derive_seed(seed, "pairs", &[]))?;
        Ok(ContaminationRow {
            law: spec.law.tag(),
            fraction: spec.fraction,
            level: spec.level,
            n: self.n,
            run,
            seed,
            recon_w1: m.recon_w1,
            recon_mse: m.recon_mse,
            latent_mmd: m.latent_mmd,
            latent_js: m.latent_js,
            latent_tv: m.latent_tv,
            epsilon_w1: eps.value,
            epsilon_coupling: coupling,
            pair_distance: pairs.value,
        })
    }
}

/// Trains one WAE per `(law, fraction, level, run)` cell in parallel.
pub fn run_contamination_study(study: &ContaminationStudy, data: &Dataset) -> CliResult<ContaminationOutcome> {
    study.validate(data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(study.workers)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {}", e)))?;
    let cells = study.cells();
    let results: Vec<_> = pool.install(|| cells.par_iter().map(|&c| (c, study.run_cell(data, c))).collect());
    let mut out = ContaminationOutcome::default();
    for ((_, _, _, run), r) in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) => out.failures.push(CellFailure {
                n: study.n,
                run,
                seed: study.train_seed(run),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }
    Ok(out)
}

pub fn write_contamination_csv<W: Write>(w: W, rows: &[ContaminationRow]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CONTAMINATION_CSV_HEADER)?;
    let f = |v: f64| format!("{:.10e}", v);
    for r in rows {
        wtr.write_record([
            r.law.clone(),
            r.fraction.to_string(),
            r.level.to_string(),
            r.n.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            f(r.recon_w1),
            f(r.recon_mse),
            f(r.latent_mmd),
            f(r.latent_js),
            f(r.latent_tv),
            f(r.epsilon_w1),
            f(r.epsilon_coupling),
            f(r.pair_distance),
        ])?;
    }
    wtr.flush().map_err(|e| CliError::io("contamination csv", e))?;
    Ok(())
}

/// One plot per `(law, level)`: clean-data `recon_w1` against the corrupted
/// fraction.
pub fn emit_contamination_plots(rows: &[ContaminationRow], out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(CliError::config("no contamination rows to plot"));
    }
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.law && k.1 == r.level) {
            keys.push((r.law.clone(), r.level));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut paths = Vec::new();
    for (law, level) in keys {
        let mut fractions: Vec<f64> = rows.iter().filter(|r| r.law == law && r.level == level).map(|r| r.fraction).collect();
        fractions.sort_by(f64::total_cmp);
        fractions.dedup();
        let points = fractions
            .iter()
            .map(|&fr| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.law == law && r.level == level && r.fraction == fr)
                    .map(|r| r.recon_w1)
                    .collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let sd = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (fr, mean, sd)
            })
            .collect();
        let s = Series {
            title: format!("recon_w1 {} level {}", law, level),
            x_label: "fraction".into(),
            log_x: false,
            points,
        };
        let safe: String = law.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        let path = out_dir.join(format!("contamination_{}_level_{}.svg", safe, level));
        std::fs::write(&path, render_svg(&s)?).map_err(|e| CliError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
