//! Server-side clustering and fusion solver.
//!
//! Given per-task anchor vectors, the server minimizes
//!
//! ```text
//!   sum_m  1/2 |theta_{z_m} + delta_m - beta_m|^2  +  lambda |delta_m|
//! ```
//!
//! over centers `theta`, labels `z`, and per-task offsets `delta`, by
//! alternating a center pass (cluster means), an assignment pass (nearest
//! center), and a proximal loop on the offsets. The objective never
//! increases across any pass.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Offset loop stops once consecutive iterates differ by less than this.
const PROX_TOL: f64 = 1e-8;

/// Callback giving task `m`'s local objective at a candidate vector; the
/// only view of client data the solver ever gets.
pub type ClientObjectives<'a> = &'a dyn Fn(usize, &Array1<f64>) -> f64;

/// Server-side view of the federation: anchors, fused estimates, labels,
/// centers, and offsets.
#[derive(Debug, Clone)]
pub struct FederationState {
    /// Anchor vectors the last solve was run against.
    pub beta: Vec<Array1<f64>>,
    /// Fused estimates `theta_{z_m} + delta_m`, before sparse projection.
    pub beta_tilde: Vec<Array1<f64>>,
    /// Group label of each task.
    pub labels: Vec<usize>,
    /// Group centers.
    pub centers: Vec<Array1<f64>>,
    /// Per-task offsets from the assigned center.
    pub deltas: Vec<Array1<f64>>,
}

impl FederationState {
    pub fn validate(&self, m: usize, p: usize, k: usize) -> Result<()> {
        if self.labels.len() != m || self.deltas.len() != m || self.beta.len() != m {
            return Err(Error::Shape(format!("state does not cover all {m} tasks")));
        }
        if self.centers.len() != k {
            return Err(Error::Shape(format!(
                "state has {} centers, expected {k}",
                self.centers.len()
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&z| z >= k) {
            return Err(Error::Param(format!("label {bad} out of range for k = {k}")));
        }
        for v in self.centers.iter().chain(self.deltas.iter()) {
            if v.len() != p {
                return Err(Error::Shape("state vector length differs from p".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric("state contains non-finite values".into()));
            }
        }
        Ok(())
    }
}

/// Settings for the central solve.
#[derive(Debug, Clone, Copy)]
pub struct CentralConfig {
    /// Fusion penalty weight; zero decouples the tasks.
    pub lambda: f64,
    /// Number of groups.
    pub k: usize,
    /// Proximal step size in (0, 1].
    pub eta1: f64,
    /// Cap on outer center/assign/offset iterations.
    pub inner_iters: usize,
    /// Cap on proximal iterations per offset update.
    pub prox_iters: usize,
    /// Stop once the objective changes by less than this across an outer
    /// iteration.
    pub tol: f64,
    /// k-means restarts for initialization.
    pub kmeans_restarts: usize,
    /// Seed for k-means.
    pub seed: u64,
}

impl Default for CentralConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            k: 1,
            eta1: 0.01,
            inner_iters: 100,
            prox_iters: 200,
            tol: 1e-6,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

impl CentralConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Param(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.k < 1 || self.k > m {
            return Err(Error::Param(format!("group count k = {} out of range for M = {m}", self.k)));
        }
        if !(self.eta1 > 0.0 && self.eta1 <= 1.0) {
            return Err(Error::Param(format!("eta1 must lie in (0, 1], got {}", self.eta1)));
        }
        if self.inner_iters < 1 || self.prox_iters < 1 || self.kmeans_restarts < 1 {
            return Err(Error::Param("iteration counts must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::Param(format!("tolerance must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Block soft-thresholding: `(1 - c/|x|)_+ x`; identity at `c = 0`, the zero
/// vector once `|x| <= c`.
pub fn prox_l2(x: &Array1<f64>, c: f64) -> Result<Array1<f64>> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Param(format!("threshold must be nonnegative, got {c}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("prox input has non-finite entries".into()));
    }
    if c == 0.0 {
        return Ok(x.clone());
    }
    let norm = x.mapv(|v| v * v).sum().sqrt();
    if norm <= c {
        Ok(Array1::zeros(x.len()))
    } else {
        Ok(x * (1.0 - c / norm))
    }
}

fn sq_dist(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` runs by
/// within-cluster sum of squares. Deterministic given `seed`.
pub fn kmeans(
    points: &[Array1<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<Array1<f64>>, Vec<usize>)> {
    let m = points.len();
    if m == 0 {
        return Err(Error::Param("k-means needs at least one point".into()));
    }
    if k < 1 || k > m {
        return Err(Error::Param(format!("k = {k} out of range for {m} points")));
    }
    if restarts < 1 {
        return Err(Error::Param("k-means needs at least one restart".into()));
    }
    let p = points[0].len();
    for pt in points {
        if pt.len() != p {
            return Err(Error::Shape("k-means points have mixed lengths".into()));
        }
        if pt.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("k-means point has non-finite entries".into()));
        }
    }

    let mut best: Option<(f64, Vec<Array1<f64>>, Vec<usize>)> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let (centers, labels, wcss) = lloyd_once(points, k, &mut rng);
        match &best {
            Some((w, _, _)) if *w <= wcss => {}
            _ => best = Some((wcss, centers, labels)),
        }
    }
    let (_, centers, labels) = best.unwrap();
    Ok((centers, labels))
}

fn lloyd_once(
    points: &[Array1<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Array1<f64>>, Vec<usize>, f64) {
    let m = points.len();
    // k-means++ seeding: first center uniform, the rest D^2-weighted.
    let mut centers: Vec<Array1<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..m)].clone());
    let mut d2: Vec<f64> = points.iter().map(|pt| sq_dist(pt, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if draw < w {
                    chosen = i;
                    break;
                }
                draw -= w;
            }
            chosen
        } else {
            // All points coincide with a center; any pick is equivalent.
            rng.random_range(0..m)
        };
        centers.push(points[next].clone());
        for (i, pt) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(pt, centers.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; m];
    for _ in 0..100 {
        let mut changed = false;
        for (i, pt) in points.iter().enumerate() {
            let mut best_k = 0;
            let mut best_d = sq_dist(pt, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(pt, center);
                if d < best_d {
                    best_d = d;
                    best_k = c;
                }
            }
            if labels[i] != best_k {
                labels[i] = best_k;
                changed = true;
            }
        }
        repair_empty_clusters(points, &mut labels, &centers, k);
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..m).filter(|&i| labels[i] == c).collect();
            let mut mean = Array1::zeros(points[0].len());
            for &i in &members {
                mean += &points[i];
            }
            mean /= members.len() as f64;
            *center = mean;
        }
        if !changed {
            break;
        }
    }
    let wcss: f64 = (0..m).map(|i| sq_dist(&points[i], &centers[labels[i]])).sum();
    (centers, labels, wcss)
}

/// Moves the point farthest from its own center into each empty cluster,
/// never draining a singleton cluster.
fn repair_empty_clusters(
    points: &[Array1<f64>],
    labels: &mut [usize],
    centers: &[Array1<f64>],
    k: usize,
) {
    for c in 0..k {
        if labels.iter().any(|&z| z == c) {
            continue;
        }
        let mut counts = vec![0usize; k];
        for &z in labels.iter() {
            counts[z] += 1;
        }
        let mut worst: Option<(f64, usize)> = None;
        for (i, pt) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(pt, &centers[labels[i]]);
            match worst {
                Some((w, _)) if w >= d => {}
                _ => worst = Some((d, i)),
            }
        }
        if let Some((_, i)) = worst {
            labels[i] = c;
        }
    }
}

/// Assigns each task the candidate center minimizing its local objective;
/// ties go to the smaller index.
pub fn init_assignment(
    candidate_centers: &[Array1<f64>],
    num_tasks: usize,
    client_objectives: ClientObjectives,
) -> Result<Vec<usize>> {
    if candidate_centers.is_empty() {
        return Err(Error::Param("need at least one candidate center".into()));
    }
    let mut labels = Vec::with_capacity(num_tasks);
    for m in 0..num_tasks {
        let mut best_k = 0;
        let mut best_val = client_objectives(m, &candidate_centers[0]);
        for (k, center) in candidate_centers.iter().enumerate().skip(1) {
            let val = client_objectives(m, center);
            if val < best_val {
                best_val = val;
                best_k = k;
            }
        }
        labels.push(best_k);
    }
    Ok(labels)
}

/// Value of the fusion objective at the given state.
pub fn central_objective(
    inputs: &[Array1<f64>],
    centers: &[Array1<f64>],
    labels: &[usize],
    deltas: &[Array1<f64>],
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for m in 0..inputs.len() {
        let misfit: f64 = inputs[m]
            .iter()
            .zip(centers[labels[m]].iter())
            .zip(deltas[m].iter())
            .map(|((b, t), d)| {
                let r = t + d - b;
                r * r
            })
            .sum();
        let dnorm = deltas[m].mapv(|v| v * v).sum().sqrt();
        total += 0.5 * misfit + lambda * dnorm;
    }
    total
}

/// Which pass a [`Checkpoint`] was taken after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePhase {
    /// State right after initialization.
    Init,
    /// After a center (mean) pass, including any empty-cluster repair.
    Theta,
    /// After an assignment pass.
    Assign,
    /// After the offset proximal loop; also the end of an outer iteration.
    Delta,
}

/// Snapshot of solver state after one pass; used to verify monotone descent
/// and the exact center/assignment conditions.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub phase: SolvePhase,
    pub objective: f64,
    pub labels: Vec<usize>,
    pub centers: Vec<Array1<f64>>,
    pub deltas: Vec<Array1<f64>>,
}

fn check_inputs(inputs: &[Array1<f64>]) -> Result<usize> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Param("central solve needs at least one task".into()))?;
    let p = first.len();
    for v in inputs {
        if v.len() != p {
            return Err(Error::Shape("input vectors have mixed lengths".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("input vector has non-finite entries".into()));
        }
    }
    Ok(p)
}

/// Center pass: each center becomes the mean of `inputs[m] - deltas[m]` over
/// its members. Empty clusters are repaired first by moving in the task
/// farthest from its own center.
fn theta_pass(
    inputs: &[Array1<f64>],
    labels: &mut [usize],
    deltas: &[Array1<f64>],
    centers: &mut [Array1<f64>],
    k: usize,
) {
    let m = inputs.len();
    loop {
        let empty = (0..k).find(|&c| !labels.iter().any(|&z| z == c));
        let Some(c) = empty else { break };
        let mut counts = vec![0usize; k];
        for &z in labels.iter() {
            counts[z] += 1;
        }
        let mut worst: Option<(f64, usize)> = None;
        for i in 0..m {
            if counts[labels[i]] < 2 {
                continue;
            }
            let mut d = 0.0;
            for j in 0..inputs[i].len() {
                let r = centers[labels[i]][j] + deltas[i][j] - inputs[i][j];
                d += r * r;
            }
            match worst {
                Some((w, _)) if w >= d => {}
                _ => worst = Some((d, i)),
            }
        }
        match worst {
            Some((_, i)) => labels[i] = c,
            None => break,
        }
    }
    for c in 0..k {
        let members: Vec<usize> = (0..m).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = Array1::zeros(inputs[0].len());
        for &i in &members {
            mean += &(&inputs[i] - &deltas[i]);
        }
        mean /= members.len() as f64;
        centers[c] = mean;
    }
}

/// Assignment pass: nearest center in the offset-shifted metric; ties go to
/// the smaller index.
fn z_pass(
    inputs: &[Array1<f64>],
    labels: &mut [usize],
    deltas: &[Array1<f64>],
    centers: &[Array1<f64>],
) {
    for m in 0..inputs.len() {
        let target = &inputs[m] - &deltas[m];
        let mut best_k = 0;
        let mut best_d = sq_dist(&target, &centers[0]);
        for (c, center) in centers.iter().enumerate().skip(1) {
            let d = sq_dist(&target, center);
            if d < best_d {
                best_d = d;
                best_k = c;
            }
        }
        labels[m] = best_k;
    }
}

/// Offset pass: proximal gradient on each task's offset subproblem. With
/// `lambda = 0` the prox is the identity and the minimizer is written out
/// directly.
fn delta_pass(
    inputs: &[Array1<f64>],
    labels: &[usize],
    deltas: &mut [Array1<f64>],
    centers: &[Array1<f64>],
    cfg: &CentralConfig,
) -> Result<()> {
    for m in 0..inputs.len() {
        if cfg.lambda == 0.0 {
            deltas[m] = &inputs[m] - &centers[labels[m]];
            continue;
        }
        let mut delta = deltas[m].clone();
        for _ in 0..cfg.prox_iters {
            let grad = &centers[labels[m]] + &delta - &inputs[m];
            let mut moved = delta.clone();
            moved.scaled_add(-cfg.eta1, &grad);
            let next = prox_l2(&moved, cfg.eta1 * cfg.lambda)?;
            let change = (&next - &delta).mapv(|v| v * v).sum().sqrt();
            delta = next;
            if change < PROX_TOL {
                break;
            }
        }
        deltas[m] = delta;
    }
    Ok(())
}

fn assemble_state(
    inputs: &[Array1<f64>],
    labels: Vec<usize>,
    centers: Vec<Array1<f64>>,
    deltas: Vec<Array1<f64>>,
    lambda: f64,
) -> FederationState {
    let beta_tilde = if lambda == 0.0 {
        // Offsets absorb everything; the fused estimates are the anchors.
        inputs.to_vec()
    } else {
        (0..inputs.len())
            .map(|m| &centers[labels[m]] + &deltas[m])
            .collect()
    };
    FederationState {
        beta: inputs.to_vec(),
        beta_tilde,
        labels,
        centers,
        deltas,
    }
}

/// [`solve_central`] with per-pass snapshots for descent verification.
pub fn solve_central_traced(
    inputs: &[Array1<f64>],
    cfg: &CentralConfig,
    warm: Option<&FederationState>,
    client_objectives: Option<ClientObjectives>,
) -> Result<(FederationState, Vec<Checkpoint>)> {
    let p = check_inputs(inputs)?;
    let m = inputs.len();
    cfg.validate(m)?;

    let (mut labels, mut centers, mut deltas) = match warm {
        Some(state) => {
            state.validate(m, p, cfg.k)?;
            (state.labels.clone(), state.centers.clone(), state.deltas.clone())
        }
        None => {
            let objectives = client_objectives.ok_or_else(|| {
                Error::Param("client objectives are required when no warm state is given".into())
            })?;
            let (candidates, _) = kmeans(inputs, cfg.k, cfg.kmeans_restarts, cfg.seed)?;
            let labels = init_assignment(&candidates, m, objectives)?;
            (labels, candidates, vec![Array1::zeros(p); m])
        }
    };

    let mut checkpoints = Vec::new();
    let mut snap = |phase: SolvePhase,
                    labels: &[usize],
                    centers: &[Array1<f64>],
                    deltas: &[Array1<f64>]|
     -> f64 {
        let objective = central_objective(inputs, centers, labels, deltas, cfg.lambda);
        checkpoints.push(Checkpoint {
            phase,
            objective,
            labels: labels.to_vec(),
            centers: centers.to_vec(),
            deltas: deltas.to_vec(),
        });
        objective
    };

    let mut prev = snap(SolvePhase::Init, &labels, &centers, &deltas);
    for _ in 0..cfg.inner_iters {
        theta_pass(inputs, &mut labels, &deltas, &mut centers, cfg.k);
        snap(SolvePhase::Theta, &labels, &centers, &deltas);
        z_pass(inputs, &mut labels, &deltas, &centers);
        snap(SolvePhase::Assign, &labels, &centers, &deltas);
        delta_pass(inputs, &labels, &mut deltas, &centers, cfg)?;
        let obj = snap(SolvePhase::Delta, &labels, &centers, &deltas);
        debug_assert!(
            obj <= prev + 1e-8 * (1.0 + prev.abs()),
            "objective increased: {prev} -> {obj}"
        );
        if (prev - obj).abs() < cfg.tol {
            break;
        }
        prev = obj;
    }

    Ok((assemble_state(inputs, labels, centers, deltas, cfg.lambda), checkpoints))
}

/// Alternating minimization of the fusion objective. Without a warm state,
/// k-means proposes candidate centers and each task picks the candidate
/// minimizing its own local objective; with a warm state those steps are
/// skipped and the previous labels/centers/offsets carry over.
pub fn solve_central(
    inputs: &[Array1<f64>],
    cfg: &CentralConfig,
    warm: Option<&FederationState>,
    client_objectives: Option<ClientObjectives>,
) -> Result<FederationState> {
    solve_central_traced(inputs, cfg, warm, client_objectives).map(|(state, _)| state)
}

/// [`solve_central`] with the group labels frozen to a given partition: no
/// assignment passes, no k-means, no label initialization.
pub fn solve_central_oracle(
    inputs: &[Array1<f64>],
    groups: &[usize],
    cfg: &CentralConfig,
) -> Result<FederationState> {
    let p = check_inputs(inputs)?;
    let m = inputs.len();
    cfg.validate(m)?;
    if groups.len() != m {
        return Err(Error::Param(format!(
            "partition covers {} tasks, expected {m}",
            groups.len()
        )));
    }
    for &z in groups {
        if z >= cfg.k {
            return Err(Error::Param(format!("group label {z} out of range for k = {}", cfg.k)));
        }
    }
    for c in 0..cfg.k {
        if !groups.iter().any(|&z| z == c) {
            return Err(Error::Param(format!("partition leaves group {c} empty")));
        }
    }

    let mut labels = groups.to_vec();
    let mut deltas = vec![Array1::zeros(p); m];
    let mut centers = vec![Array1::zeros(p); cfg.k];
    theta_pass(inputs, &mut labels, &deltas, &mut centers, cfg.k);

    let mut prev = central_objective(inputs, &centers, &labels, &deltas, cfg.lambda);
    for _ in 0..cfg.inner_iters {
        theta_pass(inputs, &mut labels, &deltas, &mut centers, cfg.k);
        delta_pass(inputs, &labels, &mut deltas, &centers, cfg)?;
        let obj = central_objective(inputs, &centers, &labels, &deltas, cfg.lambda);
        if (prev - obj).abs() < cfg.tol {
            break;
        }
        prev = obj;
    }
    debug_assert_eq!(labels, groups, "oracle labels must not move");
    Ok(assemble_state(inputs, labels, centers, deltas, cfg.lambda))
}
