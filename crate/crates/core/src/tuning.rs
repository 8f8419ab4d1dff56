//! Hyperparameter selection.
//!
//! The step size is picked per task by exhaustive evaluation of the local
//! fit over a grid. Model structure `(K, s, q, lambda)` is picked by a
//! BIC-style criterion: training Huber loss plus `(log p / n)(c1 s + c2 K)`.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::federated::{federated_fit, standard_init, FederationConfig};
use crate::huber::{huber_objective, TaskDataset};
use crate::local_iht::{local_iht_fit, LocalFitConfig};
use crate::projection::SparsityBudget;

/// Candidate values and criterion weights.
#[derive(Debug, Clone)]
pub struct TuningGrid {
    pub k_values: Vec<usize>,
    pub s_values: Vec<usize>,
    /// Empty means `q = s` at every grid point.
    pub q_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// Weight on `s` in the complexity penalty.
    pub c1: f64,
    /// Weight on `K` in the complexity penalty.
    pub c2: f64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            k_values: vec![1, 2, 3],
            s_values: vec![3],
            q_values: vec![],
            lambda_values: vec![0.5, 1.0, 2.0, 4.0],
            eta_values: vec![0.003, 0.01, 0.03],
            c1: 1.0,
            c2: 1.5,
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy)]
pub struct TuningRow {
    pub k: usize,
    pub s: usize,
    pub q: usize,
    pub lambda: f64,
    pub criterion: f64,
}

/// Picks the step size minimizing the final training Huber objective of a
/// local fit; candidates that diverge are skipped, ties go to the smaller
/// step.
pub fn select_eta(d: &TaskDataset, grid: &TuningGrid, cfg: &LocalFitConfig) -> Result<f64> {
    if grid.eta_values.is_empty() {
        return Err(Error::Param("step-size grid is empty".into()));
    }
    let mut candidates = grid.eta_values.clone();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let zero = Array1::zeros(d.p());
    let mut best: Option<(f64, f64)> = None;
    for eta in candidates {
        let trial = LocalFitConfig { eta, ..*cfg };
        let fit = match local_iht_fit(d, &trial, &zero) {
            Ok(fit) => fit,
            Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        let objective = huber_objective(d, &fit, cfg.sigma)?;
        match best {
            Some((obj, _)) if obj <= objective => {}
            _ => best = Some((objective, eta)),
        }
    }
    best.map(|(_, eta)| eta)
        .ok_or_else(|| Error::Tuning("every step-size candidate diverged".into()))
}

/// The selection criterion: mean training Huber loss of the fitted
/// estimates plus `(log p / n)(c1 s + c2 k)`.
pub fn model_criterion(
    datasets: &[TaskDataset],
    estimates: &[Array1<f64>],
    sigma: f64,
    s: usize,
    k: usize,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if datasets.len() != estimates.len() || datasets.is_empty() {
        return Err(Error::Shape("one estimate per dataset required".into()));
    }
    let mut loss = 0.0;
    for (d, b) in datasets.iter().zip(estimates.iter()) {
        loss += huber_objective(d, b, sigma)?;
    }
    loss /= datasets.len() as f64;
    let n = datasets[0].n() as f64;
    let p = datasets[0].p() as f64;
    Ok(loss + (p.ln() / n) * (c1 * s as f64 + c2 * k as f64))
}

/// Evaluates every `(K, s, q, lambda)` grid point with a full federated fit
/// and returns the configuration minimizing [`model_criterion`], together
/// with the whole table. Grid order is lexicographic, which also breaks
/// ties.
pub fn select_model(
    datasets: &[TaskDataset],
    grid: &TuningGrid,
    template: &FederationConfig,
) -> Result<(FederationConfig, Vec<TuningRow>)> {
    if grid.k_values.is_empty() || grid.s_values.is_empty() || grid.lambda_values.is_empty() {
        return Err(Error::Param("tuning grid has an empty dimension".into()));
    }
    let mut table = Vec::new();
    let mut best: Option<(f64, FederationConfig)> = None;
    for &k in &grid.k_values {
        for &s in &grid.s_values {
            let q_candidates = if grid.q_values.is_empty() {
                vec![s]
            } else {
                grid.q_values.clone()
            };
            for q in q_candidates {
                for &lambda in &grid.lambda_values {
                    let mut cfg = template.clone();
                    cfg.central.k = k;
                    cfg.central.lambda = lambda;
                    cfg.local.s = s;
                    cfg.budget = SparsityBudget::new(s, q).map_err(|e| {
                        Error::Tuning(format!("grid point (k={k}, s={s}, q={q}, lambda={lambda}): {e}"))
                    })?;

                    let annotate = |e: Error| {
                        Error::Tuning(format!(
                            "grid point (k={k}, s={s}, q={q}, lambda={lambda}): {e}"
                        ))
                    };
                    let init = standard_init(datasets, &cfg).map_err(annotate)?;
                    let fit = federated_fit(datasets, &cfg, &init).map_err(annotate)?;
                    let criterion = model_criterion(
                        datasets,
                        &fit.estimates,
                        cfg.local.sigma,
                        s,
                        k,
                        grid.c1,
                        grid.c2,
                    )?;
                    table.push(TuningRow { k, s, q, lambda, criterion });
                    match &best {
                        Some((c, _)) if *c <= criterion => {}
                        _ => best = Some((criterion, cfg)),
                    }
                }
            }
        }
    }
    let (_, cfg) = best.expect("nonempty grid produced at least one row");
    Ok((cfg, table))
}
