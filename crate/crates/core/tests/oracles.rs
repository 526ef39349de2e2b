//! Independent brute-force oracles for the exact solvers and estimators.

use densiwae::data::seeds;
use densiwae::divergences::{
    linear_assignment, mmd_sq_biased, mmd_sq_unbiased, transportation_simplex, w1_exact, w1_sinkhorn, KernelSpec,
    Metric,
};
use densiwae::stats::{cramer_test, CramerMethod};
use densiwae::Tensor;
use rand::Rng as _;

fn uniform(rows: usize, cols: usize, rng: &mut seeds::Rng) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Minimum over all permutations (Heap's algorithm) of the mean matched cost.
fn brute_force_w1(x: &Tensor, y: &Tensor) -> f64 {
    let n = x.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| (0..n).map(|i| dist(x.row(i), y.row(p[i]))).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

#[test]
fn w1_matches_permutation_brute_force() {
    for seed in 0..100u64 {
        let mut rng = seeds::rng(seed);
        let n = rng.random_range(1..=7usize);
        let d = rng.random_range(1..=3usize);
        let x = uniform(n, d, &mut rng);
        let y = uniform(n, d, &mut rng);
        let got = w1_exact(&x, &y, Metric::L2).unwrap();
        let want = brute_force_w1(&x, &y);
        assert!((got - want).abs() <= 1e-9, "seed {}: {} vs {}", seed, got, want);
    }
}

#[test]
fn assignment_matches_brute_force_on_integer_costs() {
    for seed in 0..30u64 {
        let mut rng = seeds::rng(1000 + seed);
        let n = rng.random_range(1..=6usize);
        let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0..20) as f64).collect();
        let (total, col_of) = linear_assignment(&cost, n).unwrap();
        let mut seen = vec![false; n];
        for &c in &col_of {
            assert!(!seen[c]);
            seen[c] = true;
        }
        let realized: f64 = (0..n).map(|i| cost[i * n + col_of[i]]).sum();
        assert_eq!(realized, total);
        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            best = best.min((0..n).map(|i| cost[i * n + p[i]]).sum());
        });
        assert_eq!(total, best, "n = {}", n);
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn unequal_sizes_match_replicated_assignment() {
    // n ≠ m equals the assignment problem on lcm-replicated point sets
    for seed in 0..20u64 {
        let mut rng = seeds::rng(500 + seed);
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(2..=4usize);
        let x = uniform(n, 2, &mut rng);
        let y = uniform(m, 2, &mut rng);
        let got = w1_exact(&x, &y, Metric::L2).unwrap();
        let l = n * m / gcd(n, m);
        let xr = Tensor::matrix(l, 2, (0..l).flat_map(|i| x.row(i / (l / n)).to_vec()).collect());
        let yr = Tensor::matrix(l, 2, (0..l).flat_map(|i| y.row(i / (l / m)).to_vec()).collect());
        let cost: Vec<f64> = (0..l).flat_map(|i| (0..l).map(|j| dist(xr.row(i), yr.row(j))).collect::<Vec<_>>()).collect();
        let (total, _) = linear_assignment(&cost, l).unwrap();
        assert!((got - total / l as f64).abs() < 1e-9, "seed {}", seed);
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn transportation_conserves_mass() {
    let a = [3i64, 1, 2];
    let b = [2i64, 4];
    let cost = [1.0, 2.0, 3.0, 1.0, 2.0, 2.0];
    let (total, flows) = transportation_simplex(&a, &b, &cost).unwrap();
    let mut row = [0i64; 3];
    let mut col = [0i64; 2];
    let mut realized = 0.0;
    for &(i, j, f) in &flows {
        row[i] += f;
        col[j] += f;
        realized += f as f64 * cost[i * 2 + j];
    }
    assert_eq!(row, a);
    assert_eq!(col, b);
    assert_eq!(realized, total);
    // source 0 fills sink 0; everything else goes to sink 1
    assert_eq!(total, 2.0 + 2.0 + 1.0 + 4.0);
}

#[test]
fn sinkhorn_approaches_exact_from_above() {
    let mut rng = seeds::rng(77);
    let x = uniform(30, 2, &mut rng);
    let y = uniform(30, 2, &mut rng);
    let exact = w1_exact(&x, &y, Metric::L2).unwrap();
    let s = w1_sinkhorn(&x, &y, 1e-3, 20_000, 1e-9).unwrap();
    assert!(s.converged);
    assert!(s.cost >= exact - 1e-9);
    assert!(s.cost - exact < 0.02, "{} vs {}", s.cost, exact);
}

fn naive_mmd(x: &Tensor, y: &Tensor, kernel: &KernelSpec, unbiased: bool) -> f64 {
    let term = |a: &Tensor, b: &Tensor, skip: bool| {
        let mut s = 0.0;
        let mut count = 0.0;
        for i in 0..a.rows() {
            for j in 0..b.rows() {
                if skip && i == j {
                    continue;
                }
                let k = kernel.eval(a.row(i), b.row(j));
                s += k;
                count += 1.0;
            }
        }
        s / count
    };
    term(x, x, unbiased) + term(y, y, unbiased) - 2.0 * term(x, y, false)
}

#[test]
fn mmd_matches_naive_double_sums() {
    let kernels = [
        KernelSpec::gaussian(1.0).unwrap(),
        KernelSpec::anisotropic(vec![0.5, 2.0]).unwrap(),
        KernelSpec::energy(0.5).unwrap(),
    ];
    for seed in 0..20u64 {
        let mut rng = seeds::rng(seed);
        let x = uniform(6, 2, &mut rng);
        let y = uniform(5, 2, &mut rng);
        for k in &kernels {
            let b = mmd_sq_biased(&x, &y, k).unwrap();
            let u = mmd_sq_unbiased(&x, &y, k).unwrap();
            assert!((b - naive_mmd(&x, &y, k, false)).abs() < 1e-12);
            assert!((u - naive_mmd(&x, &y, k, true)).abs() < 1e-12);
        }
    }
}

#[test]
fn cramer_statistic_is_scaled_energy_distance() {
    for seed in 0..20u64 {
        let mut rng = seeds::rng(300 + seed);
        let n = rng.random_range(5..12usize);
        let m = rng.random_range(5..12usize);
        let x = uniform(n, 2, &mut rng);
        let y = uniform(m, 2, &mut rng);
        let mean = |a: &Tensor, b: &Tensor| {
            let mut s = 0.0;
            for i in 0..a.rows() {
                for j in 0..b.rows() {
                    s += dist(a.row(i), b.row(j));
                }
            }
            s / (a.rows() * b.rows()) as f64
        };
        let energy = 2.0 * mean(&x, &y) - mean(&x, &x) - mean(&y, &y);
        let want = (n * m) as f64 / (n + m) as f64 * energy / 2.0;
        let got = cramer_test(&x, &y, CramerMethod::MonteCarlo, 9, 1).unwrap().statistic;
        assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
    }
}
