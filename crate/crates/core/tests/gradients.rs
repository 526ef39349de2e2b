//! Reverse-mode gradients against central finite differences.

use densiwae::autodiff::Tape;
use densiwae::data::seeds;
use densiwae::divergences::KernelSpec;
use densiwae::networks::{collect_grads, Activation, Mlp, MlpSpec, OutputTransform};
use densiwae::training::wae_mmd_objective;
use densiwae::Tensor;
use rand::Rng as _;

const STEP: f64 = 1e-6;

fn uniform(shape: &[usize], rng: &mut seeds::Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(a.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to every entry of `params`.
fn numeric_grads(params: &mut [Tensor], f: &dyn Fn(&[Tensor]) -> f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for p in 0..params.len() {
        let mut g = Vec::with_capacity(params[p].len());
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            params[p].data_mut()[i] = orig + STEP;
            let up = f(params);
            params[p].data_mut()[i] = orig - STEP;
            let down = f(params);
            params[p].data_mut()[i] = orig;
            g.push((up - down) / (2.0 * STEP));
        }
        out.push(g);
    }
    out
}

fn with_params(mlp: &Mlp, params: &[Tensor]) -> Mlp {
    let mut m = mlp.clone();
    for (dst, src) in m.params_mut().into_iter().zip(params) {
        *dst = src.clone();
    }
    m
}

fn smooth_activation(i: u64) -> Activation {
    match i % 4 {
        0 => Activation::Tanh,
        1 => Activation::Sigmoid,
        2 => Activation::Relu,
        _ => Activation::GroupSort(2),
    }
}

#[test]
fn network_gradients_match_finite_differences() {
    for cfg in 0..24u64 {
        let mut rng = seeds::rng(cfg);
        let din = rng.random_range(1..=4usize);
        let hidden = 2 * rng.random_range(1..=3usize);
        let dout = rng.random_range(1..=3usize);
        let output = match cfg % 3 {
            0 => OutputTransform::Identity,
            1 => OutputTransform::Softplus,
            _ => OutputTransform::AffineRescale { lo: -1.0, hi: 2.0 },
        };
        let spec = MlpSpec::new(vec![din, hidden, hidden, dout], smooth_activation(cfg), output);
        // random biases keep ReLU pre-activations away from the kink at 0
        let built = Mlp::build(spec, 100 + cfg).unwrap();
        let params: Vec<Tensor> = built.params().iter().map(|p| uniform(p.shape(), &mut rng)).collect();
        let net = with_params(&built, &params);
        let x = uniform(&[5, din], &mut rng);
        let weights = uniform(&[5, dout], &mut rng);

        let loss_of = |params: &[Tensor]| -> f64 {
            let out = with_params(&net, params).forward(&x).unwrap();
            out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
        };

        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (y, vars) = net.forward_tape(&mut tape, xv).unwrap();
        let w = tape.leaf(weights.clone());
        let prod = tape.mul(y, w).unwrap();
        let loss = tape.sum(prod);
        let grads = tape.backward(loss).unwrap();
        let analytic = collect_grads(&grads, &vars, &net);

        let mut params: Vec<Tensor> = net.params().into_iter().cloned().collect();
        let numeric = numeric_grads(&mut params, &loss_of);
        for (a, n) in analytic.iter().zip(&numeric) {
            let e = rel_err(a.data(), n);
            assert!(e < 1e-4, "config {}: relative error {:e}", cfg, e);
        }
    }
}

#[test]
fn wae_objective_gradients_match_finite_differences() {
    for cfg in 0..20u64 {
        let mut rng = seeds::rng(1000 + cfg);
        let d = rng.random_range(2..=4usize);
        let k = rng.random_range(1..=3usize);
        let h = rng.random_range(3..=6usize);
        let act = if cfg % 2 == 0 { Activation::Tanh } else { Activation::Sigmoid };
        let enc = Mlp::build(MlpSpec::new(vec![d, h, k], act, OutputTransform::Identity), cfg).unwrap();
        let dec = Mlp::build(MlpSpec::new(vec![k, h, d], act, OutputTransform::Identity), cfg + 50).unwrap();
        let x = uniform(&[6, d], &mut rng);
        let prior = uniform(&[6, k], &mut rng);
        let kernel = if cfg % 3 == 2 {
            KernelSpec::energy(0.5).unwrap()
        } else {
            KernelSpec::gaussian(rng.random_range(0.5..2.0)).unwrap()
        };
        let lambda = [0.0, 0.2, 0.8, 3.0][cfg as usize % 4];

        let obj = wae_mmd_objective(&enc, &dec, &x, &prior, &kernel, lambda).unwrap();
        let ne = enc.params().len();
        let mut params: Vec<Tensor> = enc.params().into_iter().chain(dec.params()).cloned().collect();
        let loss_of = |p: &[Tensor]| -> f64 {
            let e = with_params(&enc, &p[..ne]);
            let dd = with_params(&dec, &p[ne..]);
            wae_mmd_objective(&e, &dd, &x, &prior, &kernel, lambda).unwrap().total
        };
        let numeric = numeric_grads(&mut params, &loss_of);
        let analytic: Vec<&Tensor> = obj.encoder_grads.iter().chain(&obj.decoder_grads).collect();
        for (a, n) in analytic.iter().zip(&numeric) {
            let e = rel_err(a.data(), n);
            assert!(e < 1e-4, "config {} (lambda {}): relative error {:e}", cfg, lambda, e);
        }
    }
}

#[test]
fn primitive_gradients_match_finite_differences() {
    type Op = fn(&mut Tape, densiwae::Var) -> densiwae::Var;
    let ops: [(&str, Op); 8] = [
        ("tanh", |t, a| t.tanh(a)),
        ("sigmoid", |t, a| t.sigmoid(a)),
        ("softplus", |t, a| t.softplus(a)),
        ("exp", |t, a| t.exp(a)),
        ("row_norm", |t, a| t.row_norm(a)),
        ("row_sq_norm", |t, a| t.row_sq_norm(a)),
        ("pairwise", |t, a| t.pairwise_sq_dist(a, a).unwrap()),
        ("groupsort", |t, a| t.groupsort(a, 2).unwrap()),
    ];
    for (name, op) in ops {
        for seed in 0..5u64 {
            let mut rng = seeds::rng(seed);
            let x = uniform(&[3, 4], &mut rng);
            let eval = |x: &Tensor| -> (f64, Tensor) {
                let mut t = Tape::new();
                let a = t.leaf(x.clone());
                let y = op(&mut t, a);
                let s = t.sum(y);
                let g = t.backward(s).unwrap();
                (t.value(s).data()[0], g.get_or_zeros(a, x))
            };
            let (_, analytic) = eval(&x);
            let mut params = vec![x.clone()];
            let numeric = numeric_grads(&mut params, &|p| eval(&p[0]).0);
            let e = rel_err(analytic.data(), &numeric[0]);
            assert!(e < 1e-4, "{} seed {}: {:e}", name, seed, e);
        }
    }
}
