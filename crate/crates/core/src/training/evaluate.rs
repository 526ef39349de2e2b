use std::io::Write;

use rand::seq::index;

use crate::autodiff::Tensor;
use crate::data::seeds::{self, derive_seed};
use crate::data::Dataset;
use crate::divergences::{hist_js, hist_tv, mmd_biased, w1_exact, HistogramGrid, KernelSpec, Metric};
use crate::error::{Error, Result};

use super::config::WaeConfig;
use super::train::WaeState;

pub const METRICS_CSV_HEADER: [&str; 7] = ["epoch", "latent_mmd", "latent_js", "latent_tv", "recon_w1", "recon_mse", "seconds"];

/// Realized losses of a WAE after some epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub latent_mmd: f64,
    /// Histogram plug-in JS on a pooled grid.
    pub latent_js: f64,
    pub latent_tv: f64,
    /// Exact `W1` between a capped subsample of inputs and their
    /// reconstructions.
    pub recon_w1: f64,
    /// Mean squared reconstruction error per coordinate.
    pub recon_mse: f64,
    /// Wall time since training started.
    pub seconds: f64,
}

impl MetricRecord {
    pub fn is_finite(&self) -> bool {
        [self.latent_mmd, self.latent_js, self.latent_tv, self.recon_w1, self.recon_mse]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn latent(&self, metric: LatentMetric) -> f64 {
        match metric {
            LatentMetric::Mmd => self.latent_mmd,
            LatentMetric::Js => self.latent_js,
            LatentMetric::Tv => self.latent_tv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentMetric {
    Mmd,
    Js,
    Tv,
}

impl LatentMetric {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmd" => Some(LatentMetric::Mmd),
            "js" => Some(LatentMetric::Js),
            "tv" => Some(LatentMetric::Tv),
            _ => None,
        }
    }
}

/// `(mmd, js, tv)` between an encoded sample and a prior sample.
pub fn latent_metrics(encoded: &Tensor, prior: &Tensor, kernel: &KernelSpec, bins: usize) -> Result<(f64, f64, f64)> {
    let mmd = mmd_biased(encoded, prior, kernel)?;
    let grid = HistogramGrid::pooled(encoded, prior, bins)?;
    Ok((mmd, hist_js(encoded, prior, &grid)?, hist_tv(encoded, prior, &grid)?))
}

/// `(w1, mse)` between inputs and reconstructions; `W1` uses the same
/// `cap`-row subsample of both.
pub fn reconstruction_metrics(inputs: &Tensor, recon: &Tensor, cap: usize, seed: u64) -> Result<(f64, f64)> {
    let mse = inputs.zip_map(recon, |a, b| (a - b) * (a - b)).mean();
    let n = inputs.rows();
    let (x, y) = if n > cap {
        let mut idx = index::sample(&mut seeds::rng(seed), n, cap).into_vec();
        idx.sort_unstable();
        (inputs.select_rows(&idx), recon.select_rows(&idx))
    } else {
        (inputs.clone(), recon.clone())
    };
    Ok((w1_exact(&x, &y, Metric::L2)?, mse))
}

/// Metrics of `state` on the whole of `data` against a prior draw of the
/// same size. The prior draw and the `W1` subsample depend only on the
/// seed, so records at different epochs are comparable.
pub fn evaluate(state: &WaeState, data: &Dataset, config: &WaeConfig) -> Result<MetricRecord> {
    let x = data.matrix();
    let z = state.encoder.forward(x)?;
    let xh = state.decoder.forward(&z)?;
    if !z.is_finite() || !xh.is_finite() {
        return Err(Error::numerical(format!("non-finite codes or reconstructions at epoch {}", state.epoch)));
    }
    let prior = config
        .latent
        .draw(x.rows(), &mut seeds::rng(derive_seed(config.seed, "eval_prior", &[])))?;
    let (latent_mmd, latent_js, latent_tv) = latent_metrics(&z, &prior, &config.metric_kernel(), config.hist_bins)?;
    let (recon_w1, recon_mse) =
        reconstruction_metrics(x, &xh, config.eval_cap, derive_seed(config.seed, "eval_subsample", &[]))?;
    Ok(MetricRecord {
        epoch: state.epoch,
        latent_mmd,
        latent_js,
        latent_tv,
        recon_w1,
        recon_mse,
        seconds: 0.0,
    })
}

/// True iff the chosen latent loss of `record` is at most `t`.
pub fn check_constraint(record: &MetricRecord, t: f64, metric: LatentMetric) -> bool {
    record.latent(metric) <= t
}

pub fn write_metrics_csv<W: Write>(w: W, records: &[MetricRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.epoch.to_string(),
            r.latent_mmd.to_string(),
            r.latent_js.to_string(),
            r.latent_tv.to_string(),
            r.recon_w1.to_string(),
            r.recon_mse.to_string(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    out.flush()?;
    Ok(())
}
