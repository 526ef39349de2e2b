use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl OptimizerConfig {
    pub const DEFAULT_CLIP: f64 = 10.0;

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            ..OptimizerConfig::adam(lr)
        }
    }

    pub fn with_clip(mut self, clip: Option<f64>) -> Self {
        self.clip_norm = clip;
        self
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(1e-3)
    }
}

/// First-order optimizer state for one parameter list.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &[&Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let (first, second) = match config.kind {
            OptimizerKind::Adam => (zeros(), zeros()),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        OptimizerState {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "optimizer step",
                format!("{} gradients", params.len()),
                format!("{} gradients", grads.len()),
            ));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "optimizer step",
                    format!("parameter {} shape {:?}", k, p.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite gradient for parameter {} at step {}",
                    k,
                    self.step + 1
                )));
            }
        }
        if self.config.kind == OptimizerKind::Adam && self.first.len() != params.len() {
            return Err(Error::shape(
                "optimizer step",
                format!("{} parameters", self.first.len()),
                format!("{} parameters", params.len()),
            ));
        }

        let scale = match self.config.clip_norm {
            Some(clip) => {
                let norm = grads.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
                if norm > clip {
                    clip / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        self.step += 1;
        let c = self.config;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= c.lr * scale * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bias1 = 1.0 - c.beta1.powi(t);
                let bias2 = 1.0 - c.beta2.powi(t);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = self.first[k].data_mut();
                    let v = self.second[k].data_mut();
                    for (((w, gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        let gv = scale * gv;
                        *mv = c.beta1 * *mv + (1.0 - c.beta1) * gv;
                        *vv = c.beta2 * *vv + (1.0 - c.beta2) * gv * gv;
                        let mhat = *mv / bias1;
                        let vhat = *vv / bias2;
                        *w -= c.lr * mhat / (vhat.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::matrix(1, 3, vec![0.5, -1.0, 2.0]);
        let before = w.clone();
        for cfg in [OptimizerConfig::adam(0.1), OptimizerConfig::sgd(0.1)] {
            let mut st = OptimizerState::new(cfg, &[&w]);
            st.step(&mut [&mut w], &[Tensor::zeros(&[1, 3])]).unwrap();
            assert_eq!(w, before);
        }
    }

    #[test]
    fn adam_first_step_on_square() {
        // f(w) = w^2 at w = 1: g = 2, m = 0.2, v = 0.004,
        // mhat = 2, vhat = 4, w' = 1 - 0.1 * 2 / (2 + 1e-8)
        let mut w = Tensor::scalar(1.0);
        let mut st = OptimizerState::new(OptimizerConfig::adam(0.1), &[&w]);
        st.step(&mut [&mut w], &[Tensor::scalar(2.0)]).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((w.data()[0] - expected).abs() < 1e-15);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut w = Tensor::scalar(1.0);
        let mut st = OptimizerState::new(OptimizerConfig::sgd(0.5), &[&w]);
        st.step(&mut [&mut w], &[Tensor::scalar(2.0)]).unwrap();
        assert_eq!(w.data()[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut w = Tensor::scalar(1.0);
        let mut st = OptimizerState::new(OptimizerConfig::adam(0.1), &[&w]);
        let err = st.step(&mut [&mut w], &[Tensor::scalar(f64::NAN)]).unwrap_err();
        assert!(err.is_numerical());
        assert_eq!(w.data()[0], 1.0);
    }

    #[test]
    fn clipping_bounds_update_norm() {
        let mut w = Tensor::matrix(1, 2, vec![0.0, 0.0]);
        let mut st = OptimizerState::new(OptimizerConfig::sgd(1.0).with_clip(Some(10.0)), &[&w]);
        st.step(&mut [&mut w], &[Tensor::matrix(1, 2, vec![30.0, 40.0])]).unwrap();
        assert!((w.norm() - 10.0).abs() < 1e-12);
    }
}
