use densiwae::data::{seeds, GaussianMixture, LatentLawSpec};
use densiwae::divergences::{
    estimate_varsigma, hist_js, hist_tv, mmd_biased, scheffe_select, symmetrize, DensityCandidate, FiniteGroup,
    HistogramGrid, KernelSpec,
};
use densiwae::kde::{smoothed_tv_bound_check, verify_regularity, KdeEstimate, KdeKernel};
use densiwae::stats::loglog_fit;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn kde_integrates_to_one() {
    let s = LatentLawSpec::gaussian(1).draw(50, &mut seeds::rng(1)).unwrap();
    for kernel in [KdeKernel::Gaussian, KdeKernel::Uniform] {
        let kde = KdeEstimate::new(s.clone(), kernel, 0.3).unwrap();
        let (lo, hi, m) = (-8.0, 8.0, 32_001);
        let step = (hi - lo) / (m - 1) as f64;
        let total: f64 = (0..m).map(|i| kde.eval(&[lo + i as f64 * step]).unwrap() * step).sum();
        assert!((total - 1.0).abs() < 1e-3, "{:?}: {}", kernel, total);
    }
}

#[test]
fn gaussian_kernel_regularity_orders() {
    let r = verify_regularity(KdeKernel::Gaussian, 2, 2, 256).unwrap();
    assert!(r.holds(1e-6, 1e-8));
    assert!(!verify_regularity(KdeKernel::Gaussian, 1, 3, 4096).unwrap().holds(1e-6, 1e-8));
}

#[test]
fn smoothed_tv_inequality_on_random_instances() {
    for seed in 0..20u64 {
        let mut rng = seeds::rng(seed);
        let n = rng.random_range(3..20usize);
        let p: Vec<f64> = (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let q: Vec<f64> = (0..n).map(|_| 0.5 + 1.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let h = rng.random_range(0.1..1.0);
        let c = smoothed_tv_bound_check(&p, &q, KdeKernel::Gaussian, h, 4000).unwrap();
        assert!(c.holds(1e-3), "seed {}: {} > {}", seed, c.lhs, c.rhs);
    }
}

#[test]
fn scheffe_picks_the_generating_candidate() {
    let truth = GaussianMixture::standard(1);
    let shifted = GaussianMixture {
        components: vec![(1.0, vec![1.5], 1.0)],
    };
    let wide = GaussianMixture {
        components: vec![(1.0, vec![0.0], 3.0)],
    };
    for seed in 0..5u64 {
        let samples = truth.draw(400, &mut seeds::rng(seed));
        let cands: [&dyn DensityCandidate; 3] = [&shifted, &truth, &wide];
        let out = scheffe_select(&cands, &samples, 10_000, seed).unwrap();
        assert_eq!(out.winner, 1, "seed {}: {:?}", seed, out.discrepancies);
    }
}

#[test]
fn histogram_divergences_are_bounded() {
    let x = LatentLawSpec::gaussian(2).draw(300, &mut seeds::rng(3)).unwrap();
    let y = x.map(|v| v + 10.0);
    let grid = HistogramGrid::pooled(&x, &y, 20).unwrap();
    assert!((hist_tv(&x, &y, &grid).unwrap() - 1.0).abs() < 1e-12);
    assert!((hist_js(&x, &y, &grid).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn symmetrized_estimator_beats_plain_on_average() {
    let group = FiniteGroup::cyclic(4).unwrap();
    let kernel = KernelSpec::gaussian(1.0).unwrap();
    let n = 50;
    let (mut plain, mut sym) = (0.0, 0.0);
    for rep in 0..40u64 {
        let mut rng = seeds::rng(rep);
        let small = LatentLawSpec::gaussian(2).draw(n, &mut rng).unwrap();
        let big = LatentLawSpec::gaussian(2).draw(50 * n, &mut rng).unwrap();
        plain += mmd_biased(&small, &big, &kernel).unwrap();
        sym += mmd_biased(&symmetrize(&small, &group).unwrap(), &big, &kernel).unwrap();
    }
    assert!(sym <= plain, "{} > {}", sym, plain);
    let v = estimate_varsigma(&kernel, &group, 2000, 1).unwrap();
    assert!(v > 0.0 && v < 1.0);
}

#[test]
fn exact_power_laws_fit_exactly() {
    let n = [1000.0f64, 3000.0, 5000.0, 10_000.0];
    let y: Vec<f64> = n.iter().map(|v| 3.0 * v.powf(-0.5)).collect();
    let f = loglog_fit(&n, &y).unwrap();
    assert!((f.slope + 0.5).abs() < 1e-9);
    let flat = loglog_fit(&n, &[2.0; 4]).unwrap();
    assert!(flat.slope.abs() < 1e-12);
    let with_zero = loglog_fit(&n, &[1.0, 0.0, 0.5, 0.25]).unwrap();
    assert_eq!(with_zero.excluded, 1);
}

#[test]
fn noisy_power_law_slope() {
    let mut rng = seeds::rng(4);
    let n: Vec<f64> = (0..10).map(|i| 1000.0 * 2f64.powi(i)).collect();
    let y: Vec<f64> = n
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            2.0 * v.powf(-0.5) * (1.0 + 0.05 * e)
        })
        .collect();
    let f = loglog_fit(&n, &y).unwrap();
    assert!((f.slope + 0.5).abs() < 0.05, "{}", f.slope);
    assert!(f.slope_se > 0.0 && f.slope_se < 0.05);
}
