use rand::Rng as _;

use crate::autodiff::{groupsort_forward, linear_forward, relu, sigmoid, softplus, Gradients, Tape, Tensor, Var};
use crate::data::seeds;
use crate::data::LatentLawSpec;
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Sort consecutive groups of this size in descending order. Size 2 is
    /// the OPLU activation.
    GroupSort(usize),
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub(crate) fn code(self) -> (u8, u32) {
        match self {
            Activation::Relu => (0, 0),
            Activation::GroupSort(g) => (1, g as u32),
            Activation::Sigmoid => (2, 0),
            Activation::Tanh => (3, 0),
            Activation::Linear => (4, 0),
        }
    }

    pub(crate) fn from_code(code: u8, param: u32) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::GroupSort(param as usize),
            2 => Activation::Sigmoid,
            3 => Activation::Tanh,
            4 => Activation::Linear,
            _ => return None,
        })
    }

    fn apply(self, x: Tensor) -> Result<Tensor> {
        Ok(match self {
            Activation::Relu => x.map(relu),
            Activation::GroupSort(g) => groupsort_forward(&x, g)?.0,
            Activation::Sigmoid => x.map(sigmoid),
            Activation::Tanh => x.map(f64::tanh),
            Activation::Linear => x,
        })
    }

    fn apply_tape(self, tape: &mut Tape, x: Var) -> Result<Var> {
        Ok(match self {
            Activation::Relu => tape.relu(x),
            Activation::GroupSort(g) => tape.groupsort(x, g)?,
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Linear => x,
        })
    }
}

/// Map applied after the last affine layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputTransform {
    Identity,
    /// `lo + (hi - lo) * sigmoid(x)`.
    AffineRescale { lo: f64, hi: f64 },
    Softplus,
}

impl OutputTransform {
    /// Rescaling that spans the support of a latent law.
    pub fn for_latent(law: &LatentLawSpec) -> Self {
        match law {
            LatentLawSpec::Gaussian { .. } => OutputTransform::Identity,
            LatentLawSpec::BetaMarginals { .. } => OutputTransform::AffineRescale { lo: 0.0, hi: 1.0 },
            LatentLawSpec::ExpMarginals { .. } => OutputTransform::Softplus,
        }
    }

    fn apply(self, x: Tensor) -> Tensor {
        match self {
            OutputTransform::Identity => x,
            OutputTransform::AffineRescale { lo, hi } => x.map(|v| (hi - lo) * sigmoid(v) + lo),
            OutputTransform::Softplus => x.map(softplus),
        }
    }

    fn apply_tape(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            OutputTransform::Identity => x,
            OutputTransform::AffineRescale { lo, hi } => {
                let s = tape.sigmoid(x);
                let s = tape.scale(s, hi - lo);
                tape.shift(s, lo)
            }
            OutputTransform::Softplus => tape.softplus(x),
        }
    }
}

/// Architecture of a feed-forward network: `widths = [N_0, ..., N_{L+1}]`
/// and one activation per hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub output: OutputTransform,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: OutputTransform) -> Self {
        let n_hidden = widths.len().saturating_sub(2);
        MlpSpec {
            widths,
            activations: vec![hidden; n_hidden],
            output,
        }
    }

    /// Four affine layers `3 -> 32 -> 32 -> 32 -> k`, output rescaled to the
    /// latent support.
    pub fn five_gaussian_encoder(latent: &LatentLawSpec, hidden: Activation) -> Self {
        MlpSpec::new(vec![3, 32, 32, 32, latent.dim()], hidden, OutputTransform::for_latent(latent))
    }

    pub fn five_gaussian_decoder(k: usize, hidden: Activation) -> Self {
        MlpSpec::new(vec![k, 32, 32, 32, 3], hidden, OutputTransform::Identity)
    }

    /// `784 -> 512 -> 256 -> 128 -> 64`.
    pub fn mnist_encoder() -> Self {
        MlpSpec::new(vec![784, 512, 256, 128, 64], Activation::Relu, OutputTransform::Identity)
    }

    /// Mirror of the encoder with pixel outputs in `[0, 1]`.
    pub fn mnist_decoder() -> Self {
        MlpSpec::new(
            vec![64, 128, 256, 512, 784],
            Activation::Relu,
            OutputTransform::AffineRescale { lo: 0.0, hi: 1.0 },
        )
    }

    /// Three hidden ReLU layers of width 64 producing one logit.
    pub fn discriminator(k: usize) -> Self {
        MlpSpec::new(vec![k, 64, 64, 64, 1], Activation::Relu, OutputTransform::Identity)
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// Maximum layer width `W`.
    pub fn width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 widths, got {:?}", self.widths)));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid(format!("zero width in {:?}", self.widths)));
        }
        if self.activations.len() != self.widths.len() - 2 {
            return Err(Error::invalid(format!(
                "{} hidden layers but {} activations",
                self.widths.len() - 2,
                self.activations.len()
            )));
        }
        for (i, act) in self.activations.iter().enumerate() {
            if let Activation::GroupSort(g) = *act {
                let w = self.widths[i + 1];
                if g == 0 || w % g != 0 {
                    return Err(Error::invalid(format!(
                        "groupsort grouping {} does not divide hidden width {}",
                        g, w
                    )));
                }
            }
        }
        if let OutputTransform::AffineRescale { lo, hi } = self.output {
            if !(hi > lo) {
                return Err(Error::invalid(format!("affine rescale needs hi > lo, got [{}, {}]", lo, hi)));
            }
        }
        Ok(())
    }
}

/// A feed-forward network `A_L ∘ σ ∘ ... ∘ σ ∘ A_0` followed by an output
/// transform, with `A_i(y) = M_i y + b_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl Mlp {
    /// Random initialization: He-uniform for layers feeding a ReLU,
    /// Xavier-uniform otherwise, zero biases.
    pub fn build(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seeds::rng(seed);
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        for i in 0..spec.depth() {
            let (fan_in, fan_out) = (spec.widths[i], spec.widths[i + 1]);
            let feeds_relu = spec.activations.get(i) == Some(&Activation::Relu);
            let limit = if feeds_relu {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            weights.push(Tensor::matrix(fan_out, fan_in, data));
            biases.push(Tensor::zeros(&[fan_out]));
        }
        Ok(Mlp { spec, weights, biases })
    }

    pub fn from_parts(spec: MlpSpec, weights: Vec<Tensor>, biases: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.depth() || biases.len() != spec.depth() {
            return Err(Error::shape(
                "Mlp::from_parts",
                format!("{} layers", spec.depth()),
                format!("{} weights, {} biases", weights.len(), biases.len()),
            ));
        }
        for i in 0..spec.depth() {
            let (fan_in, fan_out) = (spec.widths[i], spec.widths[i + 1]);
            if weights[i].shape() != [fan_out, fan_in] {
                return Err(Error::shape(
                    "Mlp::from_parts",
                    format!("M_{} of shape [{}, {}]", i, fan_out, fan_in),
                    format!("{:?}", weights[i].shape()),
                ));
            }
            if biases[i].len() != fan_out {
                return Err(Error::shape(
                    "Mlp::from_parts",
                    format!("b_{} of length {}", i, fan_out),
                    biases[i].len(),
                ));
            }
        }
        let biases = biases
            .into_iter()
            .map(|b| {
                let n = b.len();
                b.reshape(vec![n])
            })
            .collect::<Result<_>>()?;
        Ok(Mlp { spec, weights, biases })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Tensor] {
        &mut self.weights
    }

    /// Parameters in the order `[M_0, b_0, M_1, b_1, ...]`.
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.spec.input_width() {
            return Err(Error::shape(
                "Mlp::forward",
                format!("batch of width {}", self.spec.input_width()),
                format!("shape {:?}", x.shape()),
            ));
        }
        Ok(())
    }

    /// Row-wise evaluation of the network on an `n x N_0` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let last = self.spec.depth() - 1;
        let mut h = linear_forward(batch, &self.weights[0], &self.biases[0])?;
        for i in 0..last {
            h = self.spec.activations[i].apply(h)?;
            h = linear_forward(&h, &self.weights[i + 1], &self.biases[i + 1])?;
        }
        Ok(self.spec.output.apply(h))
    }

    /// Records the forward pass on `tape`; returns the output and the
    /// parameter leaves in [`Mlp::params`] order.
    pub fn forward_tape(&self, tape: &mut Tape, x: Var) -> Result<(Var, Vec<Var>)> {
        self.check_input(tape.value(x))?;
        let mut vars = Vec::with_capacity(2 * self.spec.depth());
        let mut h = x;
        for i in 0..self.spec.depth() {
            let w = tape.leaf(self.weights[i].clone());
            let b = tape.leaf(self.biases[i].clone());
            vars.push(w);
            vars.push(b);
            h = tape.linear(h, w, b)?;
            if i + 1 < self.spec.depth() {
                h = self.spec.activations[i].apply_tape(tape, h)?;
            }
        }
        Ok((self.spec.output.apply_tape(tape, h), vars))
    }
}

/// Gradients for `vars` (as returned by [`Mlp::forward_tape`]), zero where
/// the loss does not depend on a parameter.
pub fn collect_grads(grads: &Gradients, vars: &[Var], mlp: &Mlp) -> Vec<Tensor> {
    vars.iter().zip(mlp.params()).map(|(&v, p)| grads.get_or_zeros(v, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_net() -> Mlp {
        // 2 -> 2 (relu) -> 1
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Relu, OutputTransform::Identity);
        Mlp::from_parts(
            spec,
            vec![
                Tensor::matrix(2, 2, vec![1.0, -1.0, 0.5, 2.0]),
                Tensor::matrix(1, 2, vec![3.0, -1.0]),
            ],
            vec![Tensor::from_rows(&[[0.1, -0.2]]).unwrap(), Tensor::scalar(0.5)],
        )
        .unwrap()
    }

    #[test]
    fn identity_network_is_identity() {
        let spec = MlpSpec::new(vec![3, 3], Activation::Linear, OutputTransform::Identity);
        let net = Mlp::from_parts(spec, vec![Tensor::identity(3)], vec![Tensor::zeros(&[3])]).unwrap();
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn single_relu_layer_is_ramp() {
        let spec = MlpSpec::new(vec![2, 2, 2], Activation::Relu, OutputTransform::Identity);
        let net = Mlp::from_parts(
            spec,
            vec![Tensor::identity(2), Tensor::identity(2)],
            vec![Tensor::zeros(&[2]), Tensor::zeros(&[2])],
        )
        .unwrap();
        let y = net.forward(&Tensor::matrix(1, 2, vec![-1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn hand_computed_two_layer_net() {
        // x = (1, 2): M0 x + b0 = (1 - 2 + 0.1, 0.5 + 4 - 0.2) = (-0.9, 4.3)
        // relu -> (0, 4.3); M1 h + b1 = 3*0 - 4.3 + 0.5 = -3.8
        let y = hand_net().forward(&Tensor::matrix(1, 2, vec![1.0, 2.0])).unwrap();
        assert!((y.data()[0] + 3.8).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let err = hand_net().forward(&Tensor::matrix(1, 3, vec![0.0; 3])).unwrap_err();
        assert!(err.to_string().contains("width 2"));
    }

    #[test]
    fn tape_and_plain_forward_agree_bitwise() {
        let spec = MlpSpec::new(
            vec![3, 8, 6, 2],
            Activation::GroupSort(2),
            OutputTransform::AffineRescale { lo: -1.0, hi: 2.0 },
        );
        let net = Mlp::build(spec, 4).unwrap();
        let x = Tensor::matrix(2, 3, vec![0.3, -1.2, 2.0, 1.0, 0.0, -0.5]);
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (y, _) = net.forward_tape(&mut tape, xv).unwrap();
        assert_eq!(tape.value(y), &net.forward(&x).unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3], Activation::Relu, OutputTransform::Identity).validate().is_err());
        assert!(MlpSpec::new(vec![3, 5, 2], Activation::GroupSort(2), OutputTransform::Identity)
            .validate()
            .is_err());
        assert!(MlpSpec::new(vec![3, 6, 2], Activation::GroupSort(2), OutputTransform::Identity)
            .validate()
            .is_ok());
    }

    #[test]
    fn reference_architectures() {
        let enc = MlpSpec::five_gaussian_encoder(&LatentLawSpec::gaussian(2), Activation::Relu);
        assert_eq!(enc.widths, vec![3, 32, 32, 32, 2]);
        assert_eq!(enc.depth(), 4);
        assert_eq!(&MlpSpec::mnist_encoder().widths[1..], &[512, 256, 128, 64]);
        let gs = MlpSpec::five_gaussian_encoder(&LatentLawSpec::gaussian(2), Activation::GroupSort(2));
        assert!(Mlp::build(gs, 1).is_ok());
    }
}
