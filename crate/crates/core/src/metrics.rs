//! Scoring of estimates against ground truth: mean squared error, average
//! support errors, and the Rand index of two labelings.

use ndarray::Array1;

use crate::error::{Error, Result};

/// One method's scores for one replication.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub method: String,
    pub replication: usize,
    pub mse: f64,
    pub fp: f64,
    pub fn_: f64,
    pub rand_index: f64,
}

fn check_pairs(estimates: &[Array1<f64>], truth: &[Array1<f64>]) -> Result<()> {
    if estimates.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} estimates vs {} truth vectors",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::Param("no tasks to score".into()));
    }
    for (e, t) in estimates.iter().zip(truth.iter()) {
        if e.len() != t.len() {
            return Err(Error::Shape("estimate and truth lengths differ".into()));
        }
    }
    Ok(())
}

/// `(1/M) sum_m |estimate_m - truth_m|_2^2`.
pub fn mse(estimates: &[Array1<f64>], truth: &[Array1<f64>]) -> Result<f64> {
    check_pairs(estimates, truth)?;
    let total: f64 = estimates
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| (e - t).mapv(|v| v * v).sum())
        .sum();
    Ok(total / estimates.len() as f64)
}

/// Average per-task false positives and false negatives of the supports.
/// Support membership is an exact nonzero test: the fits produce hard zeros.
pub fn fp_fn(estimates: &[Array1<f64>], truth: &[Array1<f64>]) -> Result<(f64, f64)> {
    check_pairs(estimates, truth)?;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (e, t) in estimates.iter().zip(truth.iter()) {
        for (ej, tj) in e.iter().zip(t.iter()) {
            match (*ej != 0.0, *tj != 0.0) {
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    let m = estimates.len() as f64;
    Ok((fp as f64 / m, fn_ as f64 / m))
}

/// Fraction of the C(M,2) task pairs on which the two labelings agree
/// (both same-cluster or both different-cluster).
pub fn rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::Shape(format!(
            "labelings cover {} vs {} tasks",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let m = labels_a.len();
    if m < 2 {
        return Err(Error::Param("Rand index needs at least two tasks".into()));
    }
    let mut agree = 0usize;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let same_a = labels_a[i] == labels_a[j];
            let same_b = labels_b[i] == labels_b[j];
            if same_a == same_b {
                agree += 1;
            }
            pairs += 1;
        }
    }
    Ok(agree as f64 / pairs as f64)
}
