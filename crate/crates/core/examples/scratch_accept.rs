// Scratch checks for the contraction and brute-force acceptance regimes.

use fedhuber_core::central::{
    central_objective, prox_l2, solve_central, CentralConfig,
};
use fedhuber_core::huber::TaskDataset;
use fedhuber_core::local_iht::{local_iht_path, LocalFitConfig};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    // Criterion-5 regime: noiseless, i.i.d. normal design, n=200, p=50, s0=5.
    for eta in [0.4, 0.5, 0.6, 0.7] {
        let mut worst = (0.0f64, 0, 0); // (max ratio, seed, t)
        let mut slowest_len = 0usize;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let x = Array2::from_shape_fn((200, 50), |_| rng.sample::<f64, _>(StandardNormal));
            let mut beta = Array1::zeros(50);
            for (i, j) in [3usize, 11, 22, 37, 49].into_iter().enumerate() {
                beta[j] = 1.0 + 0.5 * i as f64;
            }
            let y = x.dot(&beta);
            let d = TaskDataset::new(x, y, 0).unwrap();
            let cfg = LocalFitConfig { eta, sigma: 3.0, s: 5, t_max: 200, tol: 0.0 };
            let path = local_iht_path(&d, &cfg, &Array1::zeros(50)).unwrap();
            let errors: Vec<f64> = path
                .iter()
                .map(|b| (b - &beta).mapv(|v| v * v).sum().sqrt())
                .collect();
            let mut prev = (&beta).mapv(|v| v * v).sum().sqrt();
            for (t, e) in errors.iter().enumerate() {
                if prev <= 1e-6 {
                    break;
                }
                let ratio = e / prev;
                if ratio > worst.0 {
                    worst = (ratio, seed as usize, t);
                }
                prev = *e;
                slowest_len = slowest_len.max(t);
            }
        }
        println!("c5 eta={eta}: worst ratio {:.4} (seed {} t {}), longest path to 1e-6: {}",
            worst.0, worst.1, worst.2, slowest_len);
    }

    // Criterion-3 regime: radial prox oracle margin.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = Array1::from_shape_fn(6, |_| rng.sample::<f64, _>(StandardNormal) * 2.0);
        let c = rng.random::<f64>() * 3.0;
        let got = prox_l2(&x, c).unwrap();
        let nx = x.mapv(|v| v * v).sum().sqrt();
        let objective = |t: f64| 0.5 * (t - nx) * (t - nx) + c * t;
        let (mut lo, mut hi) = (0.0, nx.max(1e-12));
        for _ in 0..300 {
            let third = (hi - lo) / 3.0;
            if objective(lo + third) < objective(hi - third) {
                hi -= third;
            } else {
                lo += third;
            }
        }
        let t_star = 0.5 * (lo + hi);
        let expected = if nx > 0.0 { &x * (t_star / nx) } else { x.clone() };
        worst = worst.max((&got - &expected).mapv(|v| v * v).sum().sqrt());
    }
    println!("c3: worst prox deviation {worst:.2e}");

    // Criterion-4 regime: brute force on 20 tiny instances.
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let inputs: Vec<Array1<f64>> = (0..3)
            .map(|_| Array1::from_shape_fn(2, |_| rng.sample::<f64, _>(StandardNormal) * 2.0))
            .collect();
        let lambda = 0.5;
        let cfg = CentralConfig {
            lambda,
            k: 2,
            eta1: 1.0,
            inner_iters: 400,
            tol: 1e-12,
            kmeans_restarts: 10,
            seed,
            ..CentralConfig::default()
        };
        let obj = |m: usize, v: &Array1<f64>| {
            (v - &inputs[m]).mapv(|u| u * u).sum()
        };
        let state = solve_central(&inputs, &cfg, None, Some(&obj)).unwrap();
        let achieved =
            central_objective(&inputs, &state.centers, &state.labels, &state.deltas, lambda);
        // Exhaustive labels, closed-form prox alternation.
        let mut best = f64::INFINITY;
        for code in 0..8 {
            let labels = [code & 1, (code >> 1) & 1, (code >> 2) & 1];
            let mut centers = vec![Array1::<f64>::zeros(2); 2];
            let mut deltas = vec![Array1::<f64>::zeros(2); 3];
            for _ in 0..20000 {
                for c in 0..2 {
                    let members: Vec<usize> = (0..3).filter(|&i| labels[i] == c).collect();
                    if members.is_empty() {
                        continue;
                    }
                    let mut mean = Array1::zeros(2);
                    for &i in &members {
                        mean += &(&inputs[i] - &deltas[i]);
                    }
                    centers[c] = mean / members.len() as f64;
                }
                let mut moved = 0.0f64;
                for i in 0..3 {
                    let target = &inputs[i] - &centers[labels[i]];
                    let next = prox_l2(&target, lambda).unwrap();
                    moved = moved.max((&next - &deltas[i]).mapv(|v| v * v).sum().sqrt());
                    deltas[i] = next;
                }
                if moved < 1e-13 {
                    break;
                }
            }
            best = best.min(central_objective(&inputs, &centers, &labels, &deltas, lambda));
        }
        worst_gap = worst_gap.max(achieved - best);
    }
    println!("c4: worst achieved-minus-bruteforce gap {worst_gap:.3e}");
}
