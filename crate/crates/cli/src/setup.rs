//! Datasets and training configurations built from config keys.

use std::path::PathBuf;

use densiwae::data::{load_mnist_idx, sample_five_gaussian, FIVE_GAUSSIAN_FULL_N};
use densiwae::training::Divergence;
use densiwae::{Activation, Dataset, MlpSpec, OptimizerConfig, WaeConfig};

use crate::config::{parse_kernel, parse_latent, KvConfig};
use crate::error::{CliError, CliResult};

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    /// Full Five-Gaussian collection of `n` points; sweeps subsample it.
    FiveGaussian { n: usize, seed: u64 },
    Mnist { images: PathBuf, labels: PathBuf, limit: Option<usize> },
    Csv { path: PathBuf },
}

impl DatasetSpec {
    /// Keys: `dataset` (`five_gaussian`, `mnist`, `csv`), `dataset_n`,
    /// `dataset_seed`, `mnist_images`, `mnist_labels`, `dataset_limit`,
    /// `csv_path`.
    pub fn from_config(kv: &KvConfig) -> CliResult<Self> {
        let kind = kv.get_or("dataset", "five_gaussian".to_string())?;
        match kind.as_str() {
            "five_gaussian" => Ok(DatasetSpec::FiveGaussian {
                n: kv.get_or("dataset_n", FIVE_GAUSSIAN_FULL_N)?,
                seed: kv.get_or("dataset_seed", 1u64)?,
            }),
            "mnist" => Ok(DatasetSpec::Mnist {
                images: required(kv, "mnist_images")?,
                labels: required(kv, "mnist_labels")?,
                limit: kv.get("dataset_limit")?,
            }),
            "csv" => Ok(DatasetSpec::Csv {
                path: required(kv, "csv_path")?,
            }),
            other => Err(CliError::config(format!("unknown dataset `{}`", other))),
        }
    }

    pub fn load(&self) -> CliResult<Dataset> {
        match self {
            DatasetSpec::FiveGaussian { n, seed } => Ok(sample_five_gaussian(*n, *seed)?),
            DatasetSpec::Mnist { images, labels, limit } => {
                let ds = load_mnist_idx(images, labels)?;
                Ok(match limit {
                    Some(l) => ds.head(*l),
                    None => ds,
                })
            }
            DatasetSpec::Csv { path } => {
                let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                Ok(Dataset::read_csv(f, "csv")?)
            }
        }
    }

    pub fn is_mnist(&self) -> bool {
        matches!(self, DatasetSpec::Mnist { .. })
    }
}

fn required(kv: &KvConfig, key: &str) -> CliResult<PathBuf> {
    kv.get::<PathBuf>(key)?.ok_or_else(|| CliError::config(format!("missing key `{}`", key)))
}

pub fn parse_activation(s: &str) -> CliResult<Activation> {
    Ok(match s {
        "relu" => Activation::Relu,
        "groupsort" | "oplu" => Activation::GroupSort(2),
        "sigmoid" => Activation::Sigmoid,
        "tanh" => Activation::Tanh,
        "linear" => Activation::Linear,
        _ => match s.strip_prefix("groupsort").and_then(|g| g.parse().ok()) {
            Some(g) => Activation::GroupSort(g),
            None => return Err(CliError::config(format!("unknown activation `{}`", s))),
        },
    })
}

/// Training configuration from config keys.
///
/// Keys: `divergence` (`mmd`/`gan`), `kernel`, `latent`, `latent_dim`,
/// `lambda`, `batch_size`, `epochs`, `lr`, `optimizer` (`adam`/`sgd`),
/// `hidden`, `architecture` (`five_gaussian`/`mnist`), `eval_interval`,
/// `eval_cap`, `hist_bins`, `eval_kernel`, `lipschitz_bound`, `tolerance`.
pub fn wae_config(kv: &KvConfig, seed: u64, mnist: bool) -> CliResult<WaeConfig> {
    let arch = kv.get_or("architecture", if mnist { "mnist" } else { "five_gaussian" }.to_string())?;
    let default_k = if arch == "mnist" { 64 } else { 2 };
    let k = kv.get_or("latent_dim", default_k)?;
    let latent = parse_latent(&kv.get_or("latent", "gaussian".to_string())?, k)?;
    let mut cfg = match kv.get_or("divergence", "mmd".to_string())?.as_str() {
        "mmd" => WaeConfig::mmd(latent, seed),
        "gan" => WaeConfig::gan(latent, seed),
        other => return Err(CliError::config(format!("unknown divergence `{}`", other))),
    };
    if let Some(k) = kv.raw("kernel") {
        if cfg.divergence == Divergence::Gan {
            return Err(CliError::config("`kernel` applies only to divergence = mmd"));
        }
        cfg.divergence = Divergence::Mmd(parse_kernel(k)?);
    }
    if let Some(k) = kv.raw("eval_kernel") {
        cfg.eval_kernel = Some(parse_kernel(k)?);
    }
    cfg.lambda = kv.get_or("lambda", cfg.lambda)?;
    cfg.batch_size = kv.get_or("batch_size", cfg.batch_size)?;
    cfg.epochs = kv.get_or("epochs", cfg.epochs)?;
    let lr = kv.get_or("lr", cfg.optimizer.lr)?;
    cfg.optimizer = match kv.get_or("optimizer", "adam".to_string())?.as_str() {
        "adam" => OptimizerConfig::adam(lr),
        "sgd" => OptimizerConfig::sgd(lr),
        other => return Err(CliError::config(format!("unknown optimizer `{}`", other))),
    };
    if let Some(h) = kv.raw("hidden") {
        cfg.hidden = parse_activation(h)?;
    }
    match arch.as_str() {
        "five_gaussian" => {}
        "mnist" => {
            if k != 64 {
                return Err(CliError::config("the mnist architecture has latent_dim = 64"));
            }
            let mut enc = MlpSpec::mnist_encoder();
            enc.output = densiwae::OutputTransform::for_latent(&cfg.latent);
            cfg.encoder = Some(enc);
            cfg.decoder = Some(MlpSpec::mnist_decoder());
        }
        other => return Err(CliError::config(format!("unknown architecture `{}`", other))),
    }
    cfg.eval_interval = kv.get_or("eval_interval", cfg.eval_interval)?;
    cfg.eval_cap = kv.get_or("eval_cap", cfg.eval_cap)?;
    cfg.hist_bins = kv.get_or("hist_bins", cfg.hist_bins)?;
    cfg.lipschitz_bound = kv.get("lipschitz_bound")?;
    cfg.tolerance = kv.get_or("tolerance", cfg.tolerance)?;
    Ok(cfg)
}
