//! Independent per-task sparse Huber regression: projected gradient descent
//! with a hard-thresholding step (IHT).

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::huber::{huber_gradient, huber_objective, TaskDataset};
use crate::projection::hard_threshold;

/// Objective values past this are treated as divergence of the iteration.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Settings for one local fit.
#[derive(Debug, Clone, Copy)]
pub struct LocalFitConfig {
    /// Gradient step size.
    pub eta: f64,
    /// Huber threshold.
    pub sigma: f64,
    /// Sparsity level of every iterate.
    pub s: usize,
    /// Iteration cap.
    pub t_max: usize,
    /// Early stop once consecutive iterates are closer than this in l2;
    /// zero disables early stopping.
    pub tol: f64,
}

impl LocalFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Param(format!("step size must be positive, got {}", self.eta)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Param(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.s < 1 {
            return Err(Error::Param("sparsity level must be at least 1".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Param("iteration cap must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::Param(format!("tolerance must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

fn check_divergence(d: &TaskDataset, beta: &Array1<f64>, sigma: f64, eta: f64) -> Result<f64> {
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { eta, objective: f64::INFINITY });
    }
    let obj = huber_objective(d, beta, sigma)?;
    if !obj.is_finite() || obj > DIVERGENCE_CAP {
        return Err(Error::Divergence { eta, objective: obj });
    }
    Ok(obj)
}

fn nnz(beta: &Array1<f64>) -> usize {
    beta.iter().filter(|v| **v != 0.0).count()
}

/// Runs the IHT iteration and returns every iterate (excluding `init`),
/// stopping early once consecutive iterates are within `cfg.tol`.
pub fn local_iht_path(
    d: &TaskDataset,
    cfg: &LocalFitConfig,
    init: &Array1<f64>,
) -> Result<Vec<Array1<f64>>> {
    cfg.validate()?;
    if init.len() != d.p() {
        return Err(Error::Shape(format!(
            "init length {} does not match p = {}",
            init.len(),
            d.p()
        )));
    }
    if cfg.s > d.p() {
        return Err(Error::Param(format!(
            "sparsity level s = {} exceeds p = {}",
            cfg.s,
            d.p()
        )));
    }
    if nnz(init) > cfg.s {
        return Err(Error::Param(format!(
            "init has {} nonzeros, more than s = {}",
            nnz(init),
            cfg.s
        )));
    }
    let mut path = Vec::new();
    let mut beta = init.clone();
    for _ in 0..cfg.t_max {
        let grad = huber_gradient(d, &beta, cfg.sigma)?;
        let mut descent = beta.clone();
        descent.scaled_add(-cfg.eta, &grad);
        let next = hard_threshold(&descent, cfg.s)?;
        check_divergence(d, &next, cfg.sigma, cfg.eta)?;
        let step = (&next - &beta).mapv(|v| v * v).sum().sqrt();
        beta = next;
        path.push(beta.clone());
        if step < cfg.tol {
            break;
        }
    }
    Ok(path)
}

/// Fits one task by IHT from `init` (at most `s` nonzeros) and returns the
/// final iterate. The output always has at most `s` nonzeros.
pub fn local_iht_fit(
    d: &TaskDataset,
    cfg: &LocalFitConfig,
    init: &Array1<f64>,
) -> Result<Array1<f64>> {
    let path = local_iht_path(d, cfg, init)?;
    Ok(path.into_iter().last().expect("t_max >= 1 yields an iterate"))
}

/// Largest eigenvalue of `(1/n) X'X` by power iteration; the Lipschitz
/// constant of both the squared and Huber gradients.
fn gradient_lipschitz(d: &TaskDataset) -> f64 {
    let p = d.p();
    let n = d.n() as f64;
    let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let xv = d.x().dot(&v);
        let mut w = Array1::zeros(p);
        for (row, &xi) in d.x().outer_iter().zip(xv.iter()) {
            w.scaled_add(xi, &row);
        }
        w /= n;
        let norm = w.mapv(|u| u * u).sum().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Optional initializer: approximately minimizes the l1-penalized Huber
/// objective `H_sigma(beta) + penalty * |beta|_1` by proximal gradient
/// (iterative soft thresholding) with step `1/L`.
pub fn l1_huber_init(
    d: &TaskDataset,
    sigma: f64,
    penalty: f64,
    iters: usize,
) -> Result<Array1<f64>> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::Param(format!("penalty must be nonnegative, got {penalty}")));
    }
    if iters < 1 {
        return Err(Error::Param("iteration count must be at least 1".into()));
    }
    let step = 1.0 / (gradient_lipschitz(d) * 1.01);
    let mut beta = Array1::zeros(d.p());
    for _ in 0..iters {
        let grad = huber_gradient(d, &beta, sigma)?;
        let mut next = beta.clone();
        next.scaled_add(-step, &grad);
        next.mapv_inplace(|v| soft_threshold(v, step * penalty));
        check_divergence(d, &next, sigma, step)?;
        beta = next;
    }
    Ok(beta)
}
