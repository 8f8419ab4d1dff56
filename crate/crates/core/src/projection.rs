//! Sparsity-inducing projections.
//!
//! [`hard_threshold`] keeps the `s` largest-magnitude coordinates of one
//! vector; [`group_project`] ranks coordinates by the magnitude of the
//! within-group sum and keeps a common top-`q` support for every member.
//! Ties always resolve toward the smaller index, which makes both operators
//! deterministic.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Per-task sparsity `s` and group-support sparsity `q`, with `1 <= s <= q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityBudget {
    pub s: usize,
    pub q: usize,
}

impl SparsityBudget {
    pub fn new(s: usize, q: usize) -> Result<Self> {
        if s < 1 || q < s {
            return Err(Error::Param(format!(
                "sparsity budget requires 1 <= s <= q, got s = {s}, q = {q}"
            )));
        }
        Ok(Self { s, q })
    }
}

fn check_finite(alpha: &Array1<f64>) -> Result<()> {
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("projection input has non-finite entries".into()));
    }
    Ok(())
}

/// Indices of the `s` largest scores, magnitude descending, ties toward the
/// smaller index.
fn top_indices(scores: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    idx.truncate(s);
    idx
}

/// Keeps the `s` entries of `alpha` with the largest magnitudes and zeroes
/// the rest; this is the closest `s`-sparse vector in Euclidean distance.
pub fn hard_threshold(alpha: &Array1<f64>, s: usize) -> Result<Array1<f64>> {
    let p = alpha.len();
    if s < 1 || s > p {
        return Err(Error::Param(format!(
            "sparsity level s = {s} out of range for p = {p}"
        )));
    }
    check_finite(alpha)?;
    let mags: Vec<f64> = alpha.iter().map(|v| v.abs()).collect();
    let mut out = Array1::zeros(p);
    for j in top_indices(&mags, s) {
        out[j] = alpha[j];
    }
    Ok(out)
}

/// Projects every vector of a group onto a shared support: coordinates are
/// ranked by `|sum over the group|` and the top `q` are kept for all members.
pub fn group_project(alphas: &[Array1<f64>], q: usize) -> Result<Vec<Array1<f64>>> {
    let first = alphas
        .first()
        .ok_or_else(|| Error::Param("group projection requires a nonempty group".into()))?;
    let p = first.len();
    if q < 1 || q > p {
        return Err(Error::Param(format!(
            "group sparsity q = {q} out of range for p = {p}"
        )));
    }
    for a in alphas {
        if a.len() != p {
            return Err(Error::Shape(format!(
                "group member has length {} but expected {p}",
                a.len()
            )));
        }
        check_finite(a)?;
    }
    let mut scores = vec![0.0; p];
    for a in alphas {
        for (j, v) in a.iter().enumerate() {
            scores[j] += v;
        }
    }
    for v in &mut scores {
        *v = v.abs();
    }
    let support = top_indices(&scores, q);
    let out = alphas
        .iter()
        .map(|a| {
            let mut kept = Array1::zeros(p);
            for &j in &support {
                kept[j] = a[j];
            }
            kept
        })
        .collect();
    Ok(out)
}
