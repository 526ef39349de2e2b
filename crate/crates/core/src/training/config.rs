use crate::autodiff::OptimizerConfig;
use crate::data::LatentLawSpec;
use crate::divergences::KernelSpec;
use crate::error::{Error, Result};
use crate::networks::{Activation, MlpSpec};

/// Latent penalty `Ω` of the WAE objective.
#[derive(Clone, Debug, PartialEq)]
pub enum Divergence {
    /// Biased MMD between the encoded batch and a fresh prior batch.
    Mmd(KernelSpec),
    /// Adversarial Jensen-Shannon surrogate with a discriminator.
    Gan,
}

impl Divergence {
    pub fn tag(&self) -> &'static str {
        match self {
            Divergence::Mmd(_) => "mmd",
            Divergence::Gan => "gan",
        }
    }
}

/// Kernel used for latent MMD when none is configured: Gaussian with
/// bandwidth `√k`.
pub fn default_kernel(k: usize) -> KernelSpec {
    KernelSpec::Gaussian {
        bandwidth: (k.max(1) as f64).sqrt(),
    }
}

/// Hyperparameters of one WAE training run.
#[derive(Clone, Debug, PartialEq)]
pub struct WaeConfig {
    /// Lagrange weight `λ` of the latent penalty.
    pub lambda: f64,
    pub divergence: Divergence,
    pub latent: LatentLawSpec,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    /// Hidden activation of the default encoder and decoder.
    pub hidden: Activation,
    /// Architecture overrides; `None` selects the Five-Gaussian networks.
    pub encoder: Option<MlpSpec>,
    pub decoder: Option<MlpSpec>,
    /// Epoch spacing of metric records; 0 records only epoch 1 and the
    /// final epoch.
    pub eval_interval: usize,
    /// Subsample cap for the exact reconstruction `W1`.
    pub eval_cap: usize,
    pub hist_bins: usize,
    /// Kernel for the reported latent MMD; defaults to the training kernel
    /// or [`default_kernel`].
    pub eval_kernel: Option<KernelSpec>,
    /// Optional `ℓ2 -> ℓ∞` / `ℓ∞` projection of the encoder after each step.
    pub lipschitz_bound: Option<f64>,
    pub seed: u64,
    /// Tolerance `t` of the constrained form.
    pub tolerance: f64,
}

impl WaeConfig {
    /// WAE-MMD with the given prior, `λ = 0.2` and desk-scale defaults.
    pub fn mmd(latent: LatentLawSpec, seed: u64) -> Self {
        let kernel = default_kernel(latent.dim());
        WaeConfig {
            lambda: 0.2,
            divergence: Divergence::Mmd(kernel),
            latent,
            batch_size: 256,
            epochs: 200,
            optimizer: OptimizerConfig::adam(1e-3),
            hidden: Activation::Relu,
            encoder: None,
            decoder: None,
            eval_interval: 0,
            eval_cap: 1000,
            hist_bins: crate::divergences::DEFAULT_BINS,
            eval_kernel: None,
            lipschitz_bound: None,
            seed,
            tolerance: f64::INFINITY,
        }
    }

    pub fn gan(latent: LatentLawSpec, seed: u64) -> Self {
        WaeConfig {
            divergence: Divergence::Gan,
            ..WaeConfig::mmd(latent, seed)
        }
    }

    pub fn encoder_spec(&self, input_dim: usize) -> MlpSpec {
        self.encoder.clone().unwrap_or_else(|| {
            let mut s = MlpSpec::five_gaussian_encoder(&self.latent, self.hidden);
            s.widths[0] = input_dim;
            s
        })
    }

    pub fn decoder_spec(&self, input_dim: usize) -> MlpSpec {
        self.decoder.clone().unwrap_or_else(|| {
            let mut s = MlpSpec::five_gaussian_decoder(self.latent.dim(), self.hidden);
            *s.widths.last_mut().unwrap() = input_dim;
            s
        })
    }

    pub fn metric_kernel(&self) -> KernelSpec {
        if let Some(k) = &self.eval_kernel {
            return k.clone();
        }
        match &self.divergence {
            Divergence::Mmd(k) => k.clone(),
            Divergence::Gan => default_kernel(self.latent.dim()),
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be >= 1"));
        }
        if self.eval_cap == 0 || self.hist_bins == 0 {
            return Err(Error::invalid("evaluation cap and histogram bins must be >= 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("tolerance t must be >= 0"));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        self.latent.validate()?;
        let (enc, dec) = (self.encoder_spec(input_dim), self.decoder_spec(input_dim));
        enc.validate()?;
        dec.validate()?;
        let k = self.latent.dim();
        if enc.input_width() != input_dim || dec.output_width() != input_dim {
            return Err(Error::shape("WaeConfig", format!("data dimension {}", input_dim), format!("encoder in {}, decoder out {}", enc.input_width(), dec.output_width())));
        }
        if enc.output_width() != k || dec.input_width() != k {
            return Err(Error::shape("WaeConfig", format!("latent dimension {}", k), format!("encoder out {}, decoder in {}", enc.output_width(), dec.input_width())));
        }
        if let Divergence::Mmd(kernel) = &self.divergence {
            match kernel.base() {
                KernelSpec::Gaussian { .. } | KernelSpec::Energy { .. } => {}
                other => {
                    return Err(Error::invalid(format!(
                        "training supports gaussian and energy kernels, got {}",
                        other.tag()
                    )))
                }
            }
        }
        Ok(())
    }
}
