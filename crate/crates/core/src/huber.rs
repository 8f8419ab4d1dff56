//! Huber loss, per-task empirical objective, and its gradient.
//!
//! The loss is quadratic for residuals within `sigma` of zero and linear
//! beyond, which keeps the gradient bounded under heavy-tailed noise. The
//! gradient accumulates sample terms in index order so repeated runs are
//! bit-identical.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// One client's local data: an `n x p` design matrix and length-`n` response.
#[derive(Debug, Clone)]
pub struct TaskDataset {
    x: Array2<f64>,
    y: Array1<f64>,
    task_id: usize,
}

impl TaskDataset {
    /// Builds a dataset, rejecting empty shapes, non-finite entries, and a
    /// response whose length differs from the row count.
    pub fn new(x: Array2<f64>, y: Array1<f64>, task_id: usize) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Shape(format!(
                "design matrix must be at least 1x1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "response length {} does not match {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y, task_id })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    /// Splits rows into a leading training part and trailing test part.
    /// `test_rows` must leave at least one training row.
    pub fn split_tail(&self, test_rows: usize) -> Result<(TaskDataset, TaskDataset)> {
        let n = self.n();
        if test_rows == 0 || test_rows >= n {
            return Err(Error::Param(format!(
                "test split of {test_rows} rows invalid for n = {n}"
            )));
        }
        let cut = n - test_rows;
        let train = TaskDataset::new(
            self.x.slice(ndarray::s![..cut, ..]).to_owned(),
            self.y.slice(ndarray::s![..cut]).to_owned(),
            self.task_id,
        )?;
        let test = TaskDataset::new(
            self.x.slice(ndarray::s![cut.., ..]).to_owned(),
            self.y.slice(ndarray::s![cut..]).to_owned(),
            self.task_id,
        )?;
        Ok((train, test))
    }

    /// Reorders rows by the given index permutation.
    pub fn permuted_rows(&self, order: &[usize]) -> Result<TaskDataset> {
        if order.len() != self.n() {
            return Err(Error::Shape(format!(
                "permutation length {} does not match n = {}",
                order.len(),
                self.n()
            )));
        }
        let mut x = Array2::zeros((self.n(), self.p()));
        let mut y = Array1::zeros(self.n());
        for (dst, &src) in order.iter().enumerate() {
            if src >= self.n() {
                return Err(Error::Param(format!("row index {src} out of range")));
            }
            x.row_mut(dst).assign(&self.x.row(src));
            y[dst] = self.y[src];
        }
        TaskDataset::new(x, y, self.task_id)
    }
}

/// Robustification threshold; quadratic/linear crossover of the loss.
#[derive(Debug, Clone, Copy)]
pub struct HuberParams {
    pub sigma: f64,
}

impl HuberParams {
    pub fn new(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_dims(d: &TaskDataset, beta: &Array1<f64>) -> Result<()> {
    if beta.len() != d.p() {
        return Err(Error::Shape(format!(
            "coefficient length {} does not match p = {}",
            beta.len(),
            d.p()
        )));
    }
    Ok(())
}

#[inline]
fn huber_term(r: f64, sigma: f64) -> f64 {
    if r.abs() <= sigma {
        0.5 * r * r
    } else {
        sigma * r.abs() - 0.5 * sigma * sigma
    }
}

/// Pointwise Huber loss: `r^2/2` for `|r| <= sigma`, `sigma*|r| - sigma^2/2`
/// beyond.
pub fn huber_loss(r: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !r.is_finite() {
        return Err(Error::Domain(format!("residual must be finite, got {r}")));
    }
    Ok(huber_term(r, sigma))
}

/// Empirical Huber objective `(1/n) sum_i H_sigma(y_i - x_i' beta)`.
pub fn huber_objective(d: &TaskDataset, beta: &Array1<f64>, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(d, beta)?;
    let resid = d.y() - &d.x().dot(beta);
    let total: f64 = resid.iter().map(|&r| huber_term(r, sigma)).sum();
    Ok(total / d.n() as f64)
}

/// Squared-loss objective `(1/2n) sum_i (y_i - x_i' beta)^2`; the loss the
/// squared baseline substitutes for the Huber objective.
pub fn squared_objective(d: &TaskDataset, beta: &Array1<f64>) -> Result<f64> {
    check_dims(d, beta)?;
    let resid = d.y() - &d.x().dot(beta);
    let total: f64 = resid.iter().map(|&r| 0.5 * r * r).sum();
    Ok(total / d.n() as f64)
}

/// Gradient of [`huber_objective`]:
/// `-(1/n) sum_i psi_sigma(y_i - x_i' beta) x_i` with
/// `psi_sigma(r) = clamp(r, -sigma, sigma)`. Terms are accumulated in row
/// order; at the kink `psi_sigma(±sigma) = ±sigma`.
pub fn huber_gradient(d: &TaskDataset, beta: &Array1<f64>, sigma: f64) -> Result<Array1<f64>> {
    check_sigma(sigma)?;
    check_dims(d, beta)?;
    let resid = d.y() - &d.x().dot(beta);
    let mut grad = Array1::zeros(d.p());
    for (row, &r) in d.x().outer_iter().zip(resid.iter()) {
        grad.scaled_add(-r.clamp(-sigma, sigma), &row);
    }
    grad /= d.n() as f64;
    Ok(grad)
}

/// Gradient of the squared-loss objective `-(1/n) X' (y - X beta)`.
pub fn l2_gradient(d: &TaskDataset, beta: &Array1<f64>) -> Result<Array1<f64>> {
    check_dims(d, beta)?;
    let resid = d.y() - &d.x().dot(beta);
    let mut grad = Array1::zeros(d.p());
    for (row, &r) in d.x().outer_iter().zip(resid.iter()) {
        grad.scaled_add(-r, &row);
    }
    grad /= d.n() as f64;
    Ok(grad)
}
