// Scratch calibration of pipeline defaults on the canonical scenarios.

use fedhuber_core::central::CentralConfig;
use fedhuber_core::federated::{
    federated_fit, pooled_ml_fit, standard_init, FederationConfig, Loss, Mode,
};
use fedhuber_core::local_iht::LocalFitConfig;
use fedhuber_core::metrics::{fp_fn, mse, rand_index};
use fedhuber_core::projection::SparsityBudget;
use fedhuber_core::simgen::{gen_setting, Noise, ScenarioConfig, Setting};
use rayon::prelude::*;
use std::time::Instant;

fn cfg_calibrated(seed: u64) -> FederationConfig {
    FederationConfig {
        rounds: 300,
        local: LocalFitConfig { eta: 0.01, sigma: 3.0, s: 3, t_max: 50, tol: 0.0 },
        central: CentralConfig {
            lambda: 0.5,
            k: 2,
            eta1: 0.01,
            seed: seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1),
            ..CentralConfig::default()
        },
        budget: SparsityBudget::new(3, 3).unwrap(),
        loss: Loss::Huber,
        mode: Mode::Adaptive,
        warm_start: true,
        l1_init_penalty: Some(0.5),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).cloned().unwrap_or_else(|| "c6".into());
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let start = Instant::now();

    match which.as_str() {
        // Criterion 6 regime: Setting 1 at (100, 100), M = 10.
        "c6" => {
            let rows: Vec<(f64, f64, f64, f64, f64)> = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let scen = ScenarioConfig::setting1(100, 100, 10, seed);
                    let (datasets, truth) = gen_setting(&scen).unwrap();
                    let cfg = cfg_calibrated(seed);
                    let init = standard_init(&datasets, &cfg).unwrap();
                    let local_mse = mse(&init, &truth.betas_true).unwrap();
                    let gp = federated_fit(&datasets, &cfg, &init).unwrap();
                    let oracle_cfg = FederationConfig {
                        mode: Mode::OracleLabels(truth.labels_true.clone()),
                        ..cfg.clone()
                    };
                    let oracle = federated_fit(&datasets, &oracle_cfg, &init).unwrap();
                    (
                        local_mse,
                        mse(&gp.estimates, &truth.betas_true).unwrap(),
                        mse(&oracle.estimates, &truth.betas_true).unwrap(),
                        rand_index(&gp.labels, &truth.labels_true).unwrap(),
                        if rand_index(&gp.labels, &truth.labels_true).unwrap() == 1.0 { 1.0 } else { 0.0 },
                    )
                })
                .collect();
            let k = seeds as f64;
            let local = rows.iter().map(|r| r.0).sum::<f64>() / k;
            let gp = rows.iter().map(|r| r.1).sum::<f64>() / k;
            let oracle = rows.iter().map(|r| r.2).sum::<f64>() / k;
            let ri = rows.iter().map(|r| r.3).sum::<f64>() / k;
            let exact = rows.iter().map(|r| r.4).sum::<f64>() / k;
            println!(
                "c6 ({seeds} seeds): local={local:.3} gp={gp:.3} oracle={oracle:.3} ri={ri:.3} exact_label_rate={exact:.2} | gp/local={:.3} gp/oracle={:.3} [{:.0}s]",
                gp / local, gp / oracle, start.elapsed().as_secs_f64()
            );
        }
        // Criterion 7 regime: Setting 2 at (100, 100) under Cauchy/Normal.
        "c7" => {
            for noise in [Noise::Cauchy, Noise::Normal] {
                let rows: Vec<(f64, f64)> = (0..seeds)
                    .into_par_iter()
                    .map(|seed| {
                        let scen = ScenarioConfig {
                            setting: Setting::S2,
                            noise,
                            ..ScenarioConfig::setting1(100, 100, 10, 40_000 + seed)
                        };
                        let (datasets, truth) = gen_setting(&scen).unwrap();
                        let cfg = cfg_calibrated(seed);
                        let init = standard_init(&datasets, &cfg).unwrap();
                        let gp = federated_fit(&datasets, &cfg, &init).unwrap();
                        let l2cfg = FederationConfig { loss: Loss::Squared, ..cfg.clone() };
                        let l2 = federated_fit(&datasets, &l2cfg, &init).unwrap();
                        (
                            mse(&gp.estimates, &truth.betas_true).unwrap(),
                            mse(&l2.estimates, &truth.betas_true).unwrap(),
                        )
                    })
                    .collect();
                let k = seeds as f64;
                let gp = rows.iter().map(|r| r.0).sum::<f64>() / k;
                let l2 = rows.iter().map(|r| r.1).sum::<f64>() / k;
                println!(
                    "c7 {noise:?} ({seeds} seeds): gp={gp:.3} l2={l2:.3} ratio={:.2} [{:.0}s]",
                    l2 / gp, start.elapsed().as_secs_f64()
                );
            }
        }
        // Criterion 8 regime: Setting 1 at (200, 100), support recovery.
        "c8" => {
            let hits: usize = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let scen = ScenarioConfig::setting1(200, 100, 10, 60_000 + seed);
                    let (datasets, truth) = gen_setting(&scen).unwrap();
                    let cfg = cfg_calibrated(seed);
                    let init = standard_init(&datasets, &cfg).unwrap();
                    let gp = federated_fit(&datasets, &cfg, &init).unwrap();
                    let (fp, fn_) = fp_fn(&gp.estimates, &truth.betas_true).unwrap();
                    usize::from(fp + fn_ == 0.0)
                })
                .sum();
            println!("c8: exact support in {hits}/{seeds} [{:.0}s]", start.elapsed().as_secs_f64());
        }
        // Criterion 9 regime: label recovery rate over many seeds.
        "c9" => {
            let hits: usize = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let scen = ScenarioConfig::setting1(100, 100, 10, 80_000 + seed);
                    let (datasets, truth) = gen_setting(&scen).unwrap();
                    let cfg = cfg_calibrated(seed);
                    let init = standard_init(&datasets, &cfg).unwrap();
                    let gp = federated_fit(&datasets, &cfg, &init).unwrap();
                    usize::from(rand_index(&gp.labels, &truth.labels_true).unwrap() == 1.0)
                })
                .sum();
            println!("c9: exact labels in {hits}/{seeds} [{:.0}s]", start.elapsed().as_secs_f64());
        }
        // Pooled baseline vs federated at (100, 300).
        "ml" => {
            let rows: Vec<(f64, f64)> = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let scen = ScenarioConfig::setting1(100, 300, 10, 50_000 + seed);
                    let (datasets, truth) = gen_setting(&scen).unwrap();
                    let cfg = cfg_calibrated(seed);
                    let init = standard_init(&datasets, &cfg).unwrap();
                    let gp = federated_fit(&datasets, &cfg, &init).unwrap();
                    let ml = pooled_ml_fit(&datasets, &cfg).unwrap();
                    (
                        mse(&gp.estimates, &truth.betas_true).unwrap(),
                        mse(&ml.estimates, &truth.betas_true).unwrap(),
                    )
                })
                .collect();
            let k = seeds as f64;
            let gp = rows.iter().map(|r| r.0).sum::<f64>() / k;
            let ml = rows.iter().map(|r| r.1).sum::<f64>() / k;
            println!(
                "ml ({seeds} seeds): gp={gp:.3} ml={ml:.3} ml/gp={:.3} [{:.0}s]",
                ml / gp, start.elapsed().as_secs_f64()
            );
        }
        other => eprintln!("unknown mode {other}"),
    }
}
