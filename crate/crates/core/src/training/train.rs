use std::time::Instant;

use rand::seq::SliceRandom;

use crate::autodiff::{OptimizerState, Tape, Tensor, Var};
use crate::data::seeds::{self, derive_seed};
use crate::data::Dataset;
use crate::divergences::KernelSpec;
use crate::error::{Error, Result};
use crate::networks::{collect_grads, constrain_lipschitz, Mlp, MlpSpec};

use super::config::{Divergence, WaeConfig};
use super::evaluate::{evaluate, MetricRecord};

/// Networks and optimizer state of a WAE.
#[derive(Clone, Debug)]
pub struct WaeState {
    pub encoder: Mlp,
    pub decoder: Mlp,
    /// Present iff the divergence is adversarial.
    pub discriminator: Option<Mlp>,
    pub enc_opt: OptimizerState,
    pub dec_opt: OptimizerState,
    pub disc_opt: Option<OptimizerState>,
    /// Completed epochs.
    pub epoch: usize,
    /// Mean training objective per completed epoch.
    pub loss_trace: Vec<f64>,
}

impl WaeState {
    /// Fresh networks for `config` on `input_dim`-dimensional data.
    pub fn new(config: &WaeConfig, input_dim: usize) -> Result<Self> {
        config.validate(input_dim)?;
        let encoder = Mlp::build(config.encoder_spec(input_dim), derive_seed(config.seed, "encoder", &[]))?;
        let decoder = Mlp::build(config.decoder_spec(input_dim), derive_seed(config.seed, "decoder", &[]))?;
        let discriminator = match config.divergence {
            Divergence::Gan => Some(Mlp::build(
                MlpSpec::discriminator(config.latent.dim()),
                derive_seed(config.seed, "discriminator", &[]),
            )?),
            Divergence::Mmd(_) => None,
        };
        Ok(Self::from_networks(config, encoder, decoder, discriminator))
    }

    pub fn from_networks(config: &WaeConfig, encoder: Mlp, decoder: Mlp, discriminator: Option<Mlp>) -> Self {
        let enc_opt = OptimizerState::new(config.optimizer, &encoder.params());
        let dec_opt = OptimizerState::new(config.optimizer, &decoder.params());
        let disc_opt = discriminator
            .as_ref()
            .map(|d| OptimizerState::new(config.optimizer, &d.params()));
        WaeState {
            encoder,
            decoder,
            discriminator,
            enc_opt,
            dec_opt,
            disc_opt,
            epoch: 0,
            loss_trace: Vec::new(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.spec().output_width()
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        self.decoder.forward(&self.encoder.forward(x)?)
    }
}

/// Value and parameter gradients of the WAE-MMD objective on one batch.
#[derive(Clone, Debug)]
pub struct WaeObjective {
    pub total: f64,
    pub recon: f64,
    pub latent: f64,
    pub encoder_grads: Vec<Tensor>,
    pub decoder_grads: Vec<Tensor>,
}

/// Biased MMD between `z` (on the tape) and the constant sample `prior`.
///
/// The prior-prior term is folded in as a constant. Energy kernels use the
/// distance form `2 E‖z - p‖^{2α} - E‖z - z′‖^{2α} - E‖p - p′‖^{2α}`.
pub(crate) fn mmd_on_tape(tape: &mut Tape, z: Var, prior: &Tensor, kernel: &KernelSpec) -> Result<Var> {
    let p = tape.leaf(prior.clone());
    let pp = crate::autodiff::pairwise_sq_dist(prior, prior)?;
    let dzz = tape.pairwise_sq_dist(z, z)?;
    let dzp = tape.pairwise_sq_dist(z, p)?;
    let mmd_sq = match kernel.base() {
        KernelSpec::Gaussian { bandwidth } => {
            let c = -1.0 / (2.0 * bandwidth * bandwidth);
            let kpp = pp.map(|d| (c * d).exp()).mean();
            let szz = tape.scale(dzz, c);
            let kzz = tape.exp(szz);
            let mzz = tape.mean(kzz);
            let szp = tape.scale(dzp, c);
            let kzp = tape.exp(szp);
            let mzp = tape.mean(kzp);
            let cross = tape.scale(mzp, -2.0);
            let s = tape.add(mzz, cross)?;
            tape.shift(s, kpp)
        }
        KernelSpec::Energy { alpha } => {
            let a = *alpha;
            let epp = pp.map(|d| d.powf(a)).mean();
            let ezz = tape.pow(dzz, a);
            let mzz = tape.mean(ezz);
            let ezp = tape.pow(dzp, a);
            let mzp = tape.mean(ezp);
            let cross = tape.scale(mzp, 2.0);
            let s = tape.sub(cross, mzz)?;
            tape.shift(s, -epp)
        }
        other => {
            return Err(Error::invalid(format!(
                "no differentiable MMD for kernel {}",
                other.tag()
            )))
        }
    };
    Ok(tape.sqrt(mmd_sq))
}

/// Mean per-sample `‖x - x̂‖` on the tape.
fn recon_on_tape(tape: &mut Tape, x: Var, xh: Var) -> Result<Var> {
    let diff = tape.sub(x, xh)?;
    let norms = tape.row_norm(diff);
    Ok(tape.mean(norms))
}

/// `mean ‖x - D(E(x))‖ + λ MMD(E(x), prior)` and its gradients.
///
/// With `λ = 0` the latent term is not evaluated and reported as 0.
pub fn wae_mmd_objective(
    encoder: &Mlp,
    decoder: &Mlp,
    x: &Tensor,
    prior: &Tensor,
    kernel: &KernelSpec,
    lambda: f64,
) -> Result<WaeObjective> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let (z, enc_vars) = encoder.forward_tape(&mut tape, xv)?;
    let (xh, dec_vars) = decoder.forward_tape(&mut tape, z)?;
    let recon = recon_on_tape(&mut tape, xv, xh)?;
    let (total, latent) = if lambda > 0.0 {
        let latent = mmd_on_tape(&mut tape, z, prior, kernel)?;
        let weighted = tape.scale(latent, lambda);
        (tape.add(recon, weighted)?, Some(latent))
    } else {
        (recon, None)
    };
    let grads = tape.backward(total)?;
    Ok(WaeObjective {
        total: tape.value(total).data()[0],
        recon: tape.value(recon).data()[0],
        latent: latent.map(|l| tape.value(l).data()[0]).unwrap_or(0.0),
        encoder_grads: collect_grads(&grads, &enc_vars, encoder),
        decoder_grads: collect_grads(&grads, &dec_vars, decoder),
    })
}

/// One discriminator step: logistic loss with prior draws as the positive
/// class and the (detached) codes as the negative class.
fn discriminator_step(disc: &mut Mlp, opt: &mut OptimizerState, z: &Tensor, prior: &Tensor) -> Result<f64> {
    let both = prior.vstack(z)?;
    let signs: Vec<f64> = (0..both.rows()).map(|i| if i < prior.rows() { -1.0 } else { 1.0 }).collect();
    let mut tape = Tape::new();
    let input = tape.leaf(both);
    let (logits, vars) = disc.forward_tape(&mut tape, input)?;
    let s = tape.leaf(Tensor::matrix(signs.len(), 1, signs));
    let signed = tape.mul(logits, s)?;
    let sp = tape.softplus(signed);
    let loss = tape.mean(sp);
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Ok(value);
    }
    let grads = tape.backward(loss)?;
    let g = collect_grads(&grads, &vars, disc);
    opt.step(&mut disc.params_mut(), &g)?;
    Ok(value)
}

/// Autoencoder step of WAE-GAN with the non-saturating encoder loss
/// `mean softplus(-T(E(x)))`.
fn gan_autoencoder_step(state: &mut WaeState, x: &Tensor, lambda: f64) -> Result<(f64, f64, f64)> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let (z, enc_vars) = state.encoder.forward_tape(&mut tape, xv)?;
    let (xh, dec_vars) = state.decoder.forward_tape(&mut tape, z)?;
    let recon = recon_on_tape(&mut tape, xv, xh)?;
    let (total, latent) = if lambda > 0.0 {
        let disc = state.discriminator.as_ref().expect("gan state has a discriminator");
        let (logits, _) = disc.forward_tape(&mut tape, z)?;
        let neg = tape.scale(logits, -1.0);
        let sp = tape.softplus(neg);
        let latent = tape.mean(sp);
        let weighted = tape.scale(latent, lambda);
        (tape.add(recon, weighted)?, Some(latent))
    } else {
        (recon, None)
    };
    let value = tape.value(total).data()[0];
    let r = tape.value(recon).data()[0];
    let l = latent.map(|l| tape.value(l).data()[0]).unwrap_or(0.0);
    if !value.is_finite() {
        return Ok((value, r, l));
    }
    let grads = tape.backward(total)?;
    let ge = collect_grads(&grads, &enc_vars, &state.encoder);
    let gd = collect_grads(&grads, &dec_vars, &state.decoder);
    state.enc_opt.step(&mut state.encoder.params_mut(), &ge)?;
    state.dec_opt.step(&mut state.decoder.params_mut(), &gd)?;
    Ok((value, r, l))
}

fn numerical_abort(state: &WaeState, epoch: usize, step: usize, what: &str, value: f64) -> Error {
    let tail: Vec<String> = state
        .loss_trace
        .iter()
        .rev()
        .take(5)
        .rev()
        .map(|v| format!("{:.6}", v))
        .collect();
    Error::numerical(format!(
        "{} became {} at epoch {} step {}; recent epoch losses [{}]",
        what,
        value,
        epoch,
        step,
        tail.join(", ")
    ))
}

/// Runs `config.epochs` further epochs on `state`, returning the metric
/// records emitted along the way.
pub fn train_epochs(config: &WaeConfig, data: &Dataset, state: &mut WaeState) -> Result<Vec<MetricRecord>> {
    config.validate(data.dim())?;
    if state.discriminator.is_some() != matches!(config.divergence, Divergence::Gan) {
        return Err(Error::invalid("discriminator must be present exactly for the gan divergence"));
    }
    let start = Instant::now();
    let n = data.n();
    let x_all = data.matrix();
    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::new();
    let first = state.epoch + 1;
    let last = state.epoch + config.epochs;

    for epoch in first..=last {
        let mut rng = seeds::rng(derive_seed(config.seed, "epoch", &[epoch as u64]));
        order.shuffle(&mut rng);
        let (mut sum, mut steps) = (0.0, 0usize);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let xb = x_all.select_rows(chunk);
            let prior = config.latent.draw(chunk.len(), &mut rng)?;
            let total = match &config.divergence {
                Divergence::Mmd(kernel) => {
                    let obj = wae_mmd_objective(&state.encoder, &state.decoder, &xb, &prior, kernel, config.lambda)?;
                    if !obj.total.is_finite() {
                        return Err(numerical_abort(state, epoch, step, "WAE-MMD objective", obj.total));
                    }
                    state.enc_opt.step(&mut state.encoder.params_mut(), &obj.encoder_grads)?;
                    state.dec_opt.step(&mut state.decoder.params_mut(), &obj.decoder_grads)?;
                    obj.total
                }
                Divergence::Gan => {
                    if config.lambda > 0.0 {
                        let z = state.encoder.forward(&xb)?;
                        let disc = state.discriminator.as_mut().expect("checked above");
                        let opt = state.disc_opt.as_mut().expect("checked above");
                        let d = discriminator_step(disc, opt, &z, &prior)?;
                        if !d.is_finite() {
                            return Err(numerical_abort(state, epoch, step, "discriminator loss", d));
                        }
                    }
                    let (total, _, _) = gan_autoencoder_step(state, &xb, config.lambda)?;
                    if !total.is_finite() {
                        return Err(numerical_abort(state, epoch, step, "WAE-GAN objective", total));
                    }
                    total
                }
            };
            if let Some(bound) = config.lipschitz_bound {
                state.encoder = constrain_lipschitz(&state.encoder, bound)?;
            }
            sum += total;
            steps += 1;
        }
        state.epoch = epoch;
        state.loss_trace.push(sum / steps as f64);

        let due = epoch == first
            || epoch == last
            || (config.eval_interval > 0 && epoch % config.eval_interval == 0);
        if due {
            let mut rec = evaluate(state, data, config)?;
            rec.seconds = start.elapsed().as_secs_f64();
            records.push(rec);
        }
    }
    Ok(records)
}

/// Trains a fresh WAE; see [`train_epochs`].
pub fn train_wae(config: &WaeConfig, data: &Dataset) -> Result<(WaeState, Vec<MetricRecord>)> {
    let mut state = WaeState::new(config, data.dim())?;
    let records = train_epochs(config, data, &mut state)?;
    Ok((state, records))
}
