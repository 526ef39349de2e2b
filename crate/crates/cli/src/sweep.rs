//! Sample-size sweeps: one fresh WAE per `(n, run)` cell.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use densiwae::data::seeds::derive_seed;
use densiwae::training::train_wae;
use densiwae::{Dataset, MetricRecord, WaeConfig};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Columns of the sweep CSV. The corrected columns are derived from the raw
/// losses on write.
pub const SWEEP_CSV_HEADER: [&str; 14] = [
    "n",
    "run",
    "seed",
    "latent_mmd",
    "latent_js",
    "latent_tv",
    "recon_w1",
    "recon_mse",
    "mmd_x_n",
    "mmd_x_sqrt_n",
    "js_x_n",
    "js_x_sqrt_n",
    "tv_x_n",
    "tv_x_sqrt_n",
];

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Template; its seed is replaced per cell.
    pub wae: WaeConfig,
    pub n_grid: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
}

impl SweepConfig {
    pub fn validate(&self, data: &Dataset) -> CliResult<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config("n grid must be non-empty and strictly increasing"));
        }
        if self.runs == 0 {
            return Err(CliError::config("runs must be >= 1"));
        }
        if self.workers == 0 {
            return Err(CliError::config("workers must be >= 1"));
        }
        let largest = *self.n_grid.last().unwrap();
        if self.n_grid[0] == 0 || largest > data.n() {
            return Err(CliError::config(format!(
                "n grid must lie in [1, {}] for this dataset, got up to {}",
                data.n(),
                largest
            )));
        }
        self.wae.validate(data.dim())?;
        Ok(())
    }

    /// Seed of cell `(n, run)`; it drives the subsample and the training run.
    pub fn cell_seed(&self, n: usize, run: usize) -> u64 {
        derive_seed(self.seed, "cell", &[n as u64, run as u64])
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.n_grid.iter().flat_map(|&n| (0..self.runs).map(move |r| (n, r))).collect()
    }
}

/// Final losses of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    pub latent_mmd: f64,
    pub latent_js: f64,
    pub latent_tv: f64,
    pub recon_w1: f64,
    pub recon_mse: f64,
    pub seconds: f64,
}

impl SweepRecord {
    pub fn from_metric(n: usize, run: usize, seed: u64, m: &MetricRecord, seconds: f64) -> Self {
        SweepRecord {
            n,
            run,
            seed,
            latent_mmd: m.latent_mmd,
            latent_js: m.latent_js,
            latent_tv: m.latent_tv,
            recon_w1: m.recon_w1,
            recon_mse: m.recon_mse,
            seconds,
        }
    }

    pub fn times_n(&self, loss: f64) -> f64 {
        loss * self.n as f64
    }

    pub fn times_sqrt_n(&self, loss: f64) -> f64 {
        loss * (self.n as f64).sqrt()
    }

    fn csv_fields(&self) -> [String; 14] {
        let f = |v: f64| format!("{:.10e}", v);
        [
            self.n.to_string(),
            self.run.to_string(),
            self.seed.to_string(),
            f(self.latent_mmd),
            f(self.latent_js),
            f(self.latent_tv),
            f(self.recon_w1),
            f(self.recon_mse),
            f(self.times_n(self.latent_mmd)),
            f(self.times_sqrt_n(self.latent_mmd)),
            f(self.times_n(self.latent_js)),
            f(self.times_sqrt_n(self.latent_js)),
            f(self.times_n(self.latent_tv)),
            f(self.times_sqrt_n(self.latent_tv)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    /// Sorted by `(n, run)`.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
}

/// Trains one cell: a fresh WAE on a uniform subsample of size `n`.
pub fn run_cell(config: &SweepConfig, data: &Dataset, n: usize, run: usize) -> Result<SweepRecord, CellFailure> {
    let seed = config.cell_seed(n, run);
    let started = Instant::now();
    let result = (|| -> CliResult<MetricRecord> {
        let sub = data.subsample(n, derive_seed(seed, "subsample", &[]))?;
        let wae = WaeConfig {
            seed,
            ..config.wae.clone()
        };
        let (_, records) = train_wae(&wae, &sub)?;
        records.last().copied().ok_or_else(|| CliError::config("training produced no metric record"))
    })();
    match result {
        Ok(m) => Ok(SweepRecord::from_metric(n, run, seed, &m, started.elapsed().as_secs_f64())),
        Err(e) => Err(CellFailure {
            n,
            run,
            seed,
            message: e.to_string(),
            exit_code: e.exit_code(),
        }),
    }
}

/// Runs every cell on a pool of `config.workers` threads. Failed cells are
/// collected rather than aborting the sweep.
pub fn run_sweep(config: &SweepConfig, data: &Dataset) -> CliResult<SweepOutcome> {
    config.validate(data)?;
    let cells = config.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {}", e)))?;
    let results: Vec<Result<SweepRecord, CellFailure>> =
        pool.install(|| cells.par_iter().map(|&(n, run)| run_cell(config, data, n, run)).collect());
    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(f) => out.failures.push(f),
        }
    }
    if let Some(dir) = &config.out_dir {
        write_outputs(dir, &out)?;
    }
    Ok(out)
}

/// `sweep.csv`, `timings.csv` and `failures.csv` under `dir`. Timings live
/// apart so that `sweep.csv` is byte-identical across reruns.
pub fn write_outputs(dir: &std::path::Path, out: &SweepOutcome) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))
    };
    write_sweep_csv(create("sweep.csv")?, &out.records)?;
    let mut t = csv::Writer::from_writer(create("timings.csv")?);
    t.write_record(["n", "run", "seconds"])?;
    for r in &out.records {
        t.write_record([r.n.to_string(), r.run.to_string(), format!("{:.3}", r.seconds)])?;
    }
    t.flush().map_err(|e| CliError::io(dir.join("timings.csv"), e))?;
    let mut f = csv::Writer::from_writer(create("failures.csv")?);
    f.write_record(["n", "run", "seed", "exit_code", "error"])?;
    for c in &out.failures {
        f.write_record([c.n.to_string(), c.run.to_string(), c.seed.to_string(), c.exit_code.to_string(), c.message.clone()])?;
    }
    f.flush().map_err(|e| CliError::io(dir.join("failures.csv"), e))?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, records: &[SweepRecord]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SWEEP_CSV_HEADER)?;
    for r in records {
        wtr.write_record(r.csv_fields())?;
    }
    wtr.flush().map_err(|e| CliError::io("sweep csv", e))?;
    Ok(())
}

/// Reads the raw columns of a sweep CSV; corrected columns are recomputed
/// rather than trusted. `seconds` is 0.
pub fn read_sweep_csv<R: Read>(r: R) -> CliResult<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("sweep csv lacks column `{}`", name)))
    };
    let idx = [
        col("n")?,
        col("run")?,
        col("seed")?,
        col("latent_mmd")?,
        col("latent_js")?,
        col("latent_tv")?,
        col("recon_w1")?,
        col("recon_mse")?,
    ];
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let num = |i: usize| -> CliResult<f64> {
            row[idx[i]].trim().parse().map_err(|_| CliError::config(format!("bad number `{}`", &row[idx[i]])))
        };
        let int = |i: usize| -> CliResult<u64> {
            row[idx[i]].trim().parse().map_err(|_| CliError::config(format!("bad integer `{}`", &row[idx[i]])))
        };
        out.push(SweepRecord {
            n: int(0)? as usize,
            run: int(1)? as usize,
            seed: int(2)?,
            latent_mmd: num(3)?,
            latent_js: num(4)?,
            latent_tv: num(5)?,
            recon_w1: num(6)?,
            recon_mse: num(7)?,
            seconds: 0.0,
        });
    }
    Ok(out)
}

/// Per-n mean and sample standard deviation of `column(record)`.
pub fn summarize(records: &[SweepRecord], column: impl Fn(&SweepRecord) -> f64) -> Vec<(usize, f64, f64, usize)> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let v: Vec<f64> = records.iter().filter(|r| r.n == n).map(&column).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            (n, mean, sd, v.len())
        })
        .collect()
}

/// Spearman rank correlation; ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, run: usize, mmd: f64) -> SweepRecord {
        SweepRecord {
            n,
            run,
            seed: 1,
            latent_mmd: mmd,
            latent_js: 2.0 * mmd,
            latent_tv: 0.5,
            recon_w1: 0.1,
            recon_mse: 0.01,
            seconds: 1.5,
        }
    }

    #[test]
    fn csv_roundtrip_recomputes_corrections() {
        let recs = vec![record(100, 0, 0.25), record(400, 1, 0.125)];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &recs).unwrap();
        let back = read_sweep_csv(&buf[..]).unwrap();
        assert_eq!(back[1].latent_mmd, 0.125);
        assert_eq!(back[1].times_sqrt_n(back[1].latent_mmd), 2.5);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,run,seed,latent_mmd"));
        assert!(text.lines().nth(1).unwrap().contains("2.5000000000e1"));
    }

    #[test]
    fn summaries_and_ranks() {
        let recs = vec![record(10, 0, 1.0), record(10, 1, 3.0), record(20, 0, 1.0)];
        let s = summarize(&recs, |r| r.latent_mmd);
        assert_eq!(s[0], (10, 2.0, 2f64.sqrt(), 2));
        assert_eq!(s[1], (20, 1.0, 0.0, 1));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]) - 0.9486832980505138).abs() < 1e-12);
    }
}
