//! Round-based federation over an explicit message boundary.
//!
//! Each synchronous round, every client evaluates its local gradient at the
//! current broadcast estimate and deposits a [`GradientMessage`]; the server
//! group-projects the descent vectors, runs the central fusion solve,
//! sparsifies, and answers with one [`ModelMessage`] per task. The server
//! only ever sees gradients and objective-value callbacks, never raw data.
//!
//! The message schema is stable: `task_id: u32`, `round: u32`, then a
//! length-`p` array of 64-bit floats, all little-endian in declared order
//! (see [`GradientMessage::encode`]), so a networked transport can replace
//! the in-process [`Mailbox`] without touching the algorithm.

use ndarray::Array1;
use rayon::prelude::*;

use crate::central::{
    solve_central, solve_central_oracle, CentralConfig, FederationState,
};
use crate::error::{Error, Result};
use crate::huber::{
    huber_gradient, huber_objective, l2_gradient, squared_objective, TaskDataset,
};
use crate::local_iht::{l1_huber_init, local_iht_fit, LocalFitConfig, DIVERGENCE_CAP};
use crate::projection::{group_project, hard_threshold, SparsityBudget};

/// Loss driving the local gradients and objective callbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Huber,
    Squared,
}

/// How group labels are obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    /// Labels are estimated by the central solver each round.
    Adaptive,
    /// Labels are frozen to a known partition.
    OracleLabels(Vec<usize>),
    /// Full-data-access baseline; dispatch through [`pooled_ml_fit`].
    PooledMl,
}

/// Settings for one federated run.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    /// Number of communication rounds.
    pub rounds: usize,
    /// Local gradient step and initialization settings.
    pub local: LocalFitConfig,
    /// Central solver settings.
    pub central: CentralConfig,
    /// Per-task and group sparsity.
    pub budget: SparsityBudget,
    pub loss: Loss,
    pub mode: Mode,
    /// Reuse the previous round's labels/centers/offsets. When false the
    /// label initialization (k-means plus client reassignment) reruns every
    /// round, costing an extra exchange each time.
    pub warm_start: bool,
    /// Optional l1-penalized warm start for the per-task fits produced by
    /// [`standard_init`]; `None` starts from zero.
    pub l1_init_penalty: Option<f64>,
}

/// Proximal iterations of the l1 initializer in [`standard_init`].
const L1_INIT_ITERS: usize = 1000;

/// The per-task initial estimates every method variant starts from:
/// an independent local IHT fit, optionally warm-started from a
/// hard-thresholded l1-penalized fit.
pub fn standard_init(
    datasets: &[TaskDataset],
    cfg: &FederationConfig,
) -> Result<Vec<Array1<f64>>> {
    datasets
        .par_iter()
        .map(|d| {
            let start = match cfg.l1_init_penalty {
                Some(penalty) => {
                    let dense = l1_huber_init(d, cfg.local.sigma, penalty, L1_INIT_ITERS)?;
                    hard_threshold(&dense, cfg.local.s)?
                }
                None => Array1::zeros(d.p()),
            };
            local_iht_fit(d, &cfg.local, &start)
        })
        .collect()
}

impl FederationConfig {
    fn validate(&self, m: usize, p: usize) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Param("need at least one round".into()));
        }
        self.local.validate()?;
        self.central.validate(m)?;
        if self.budget.s != self.local.s {
            return Err(Error::Param(format!(
                "budget s = {} disagrees with local fit s = {}",
                self.budget.s, self.local.s
            )));
        }
        if self.budget.q > p {
            return Err(Error::Param(format!(
                "group sparsity q = {} exceeds p = {p}",
                self.budget.q
            )));
        }
        if let Mode::OracleLabels(partition) = &self.mode {
            if partition.len() != m {
                return Err(Error::Param(format!(
                    "oracle partition covers {} tasks, expected {m}",
                    partition.len()
                )));
            }
        }
        if let Some(penalty) = self.l1_init_penalty {
            if !(penalty.is_finite() && penalty >= 0.0) {
                return Err(Error::Param(format!(
                    "l1 init penalty must be nonnegative, got {penalty}"
                )));
            }
        }
        Ok(())
    }
}

fn encode_message(task_id: u32, round: u32, payload: &Array1<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * payload.len());
    out.extend_from_slice(&task_id.to_le_bytes());
    out.extend_from_slice(&round.to_le_bytes());
    for v in payload.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_message(bytes: &[u8]) -> Result<(u32, u32, Array1<f64>)> {
    if bytes.len() < 8 || (bytes.len() - 8) % 8 != 0 {
        return Err(Error::Protocol(format!("malformed message of {} bytes", bytes.len())));
    }
    let task_id = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let round = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let payload = Array1::from_iter(
        bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
    );
    Ok((task_id, round, payload))
}

/// One task's gradient upload for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMessage {
    pub task_id: u32,
    pub round: u32,
    pub gradient: Array1<f64>,
}

impl GradientMessage {
    pub fn new(task_id: u32, round: u32, gradient: Array1<f64>) -> Result<Self> {
        if gradient.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient from task {task_id} has non-finite entries"
            )));
        }
        Ok(Self { task_id, round, gradient })
    }

    /// Little-endian wire form: `task_id`, `round`, then the payload floats.
    pub fn encode(&self) -> Vec<u8> {
        encode_message(self.task_id, self.round, &self.gradient)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (task_id, round, gradient) = decode_message(bytes)?;
        Self::new(task_id, round, gradient)
    }
}

/// The server's sparse model broadcast for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMessage {
    pub task_id: u32,
    pub round: u32,
    pub beta_hat: Array1<f64>,
}

impl ModelMessage {
    /// Rejects payloads with more than `s` nonzeros.
    pub fn new(task_id: u32, round: u32, beta_hat: Array1<f64>, s: usize) -> Result<Self> {
        let nnz = beta_hat.iter().filter(|v| **v != 0.0).count();
        if nnz > s {
            return Err(Error::Protocol(format!(
                "model for task {task_id} has {nnz} nonzeros, budget is {s}"
            )));
        }
        if beta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "model for task {task_id} has non-finite entries"
            )));
        }
        Ok(Self { task_id, round, beta_hat })
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_message(self.task_id, self.round, &self.beta_hat)
    }

    /// Decodes the wire form; the sparsity contract is re-checked against `s`.
    pub fn decode(bytes: &[u8], s: usize) -> Result<Self> {
        let (task_id, round, beta_hat) = decode_message(bytes)?;
        Self::new(task_id, round, beta_hat, s)
    }
}

/// Per-round in-process transport with a barrier semantic: the server can
/// only collect once every task has deposited for the round.
#[derive(Debug)]
pub struct Mailbox {
    slots: Vec<Option<GradientMessage>>,
}

impl Mailbox {
    pub fn new(num_tasks: usize) -> Self {
        Self { slots: vec![None; num_tasks] }
    }

    pub fn deposit(&mut self, msg: GradientMessage) -> Result<()> {
        let id = msg.task_id as usize;
        if id >= self.slots.len() {
            return Err(Error::Protocol(format!("task id {id} out of range")));
        }
        if self.slots[id].is_some() {
            return Err(Error::Protocol(format!("duplicate message from task {id}")));
        }
        self.slots[id] = Some(msg);
        Ok(())
    }

    /// Drains all messages in task-index order, failing if any task is
    /// missing or reported a different round.
    pub fn collect(&mut self, round: u32) -> Result<Vec<GradientMessage>> {
        let mut out = Vec::with_capacity(self.slots.len());
        for (id, slot) in self.slots.iter_mut().enumerate() {
            match slot.take() {
                Some(msg) if msg.round == round => out.push(msg),
                Some(msg) => {
                    return Err(Error::Protocol(format!(
                        "task {id} sent round {} while the server is on round {round}",
                        msg.round
                    )));
                }
                None => {
                    return Err(Error::Protocol(format!(
                        "missing message from task {id} in round {round}"
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// A simulated client: owns its data and current estimate, and exposes only
/// gradient and objective-value computations to the server side.
#[derive(Debug, Clone)]
pub struct SimClient {
    data: TaskDataset,
    sigma: f64,
    loss: Loss,
    beta_hat: Array1<f64>,
}

impl SimClient {
    pub fn new(data: TaskDataset, sigma: f64, loss: Loss, init: Array1<f64>) -> Self {
        Self { data, sigma, loss, beta_hat: init }
    }

    pub fn estimate(&self) -> &Array1<f64> {
        &self.beta_hat
    }

    /// Loss-matched local objective at a candidate vector.
    pub fn objective(&self, beta: &Array1<f64>) -> f64 {
        match self.loss {
            Loss::Huber => huber_objective(&self.data, beta, self.sigma).unwrap_or(f64::INFINITY),
            Loss::Squared => squared_objective(&self.data, beta).unwrap_or(f64::INFINITY),
        }
    }

    /// Huber training objective at the current estimate, for the run trace.
    pub fn trace_objective(&self) -> f64 {
        huber_objective(&self.data, &self.beta_hat, self.sigma).unwrap_or(f64::INFINITY)
    }

    pub fn gradient_message(&self, round: u32) -> Result<GradientMessage> {
        let grad = match self.loss {
            Loss::Huber => huber_gradient(&self.data, &self.beta_hat, self.sigma)?,
            Loss::Squared => l2_gradient(&self.data, &self.beta_hat)?,
        };
        GradientMessage::new(self.data.task_id() as u32, round, grad)
    }

    pub fn receive(&mut self, msg: ModelMessage) -> Result<()> {
        if msg.task_id as usize != self.data.task_id() {
            return Err(Error::Protocol(format!(
                "task {} received model addressed to {}",
                self.data.task_id(),
                msg.task_id
            )));
        }
        self.beta_hat = msg.beta_hat;
        Ok(())
    }
}

/// Objective and mean estimate movement after a round.
#[derive(Debug, Clone, Copy)]
pub struct RoundRecord {
    pub round: u32,
    /// Mean Huber training loss across tasks at the broadcast estimates.
    pub objective: f64,
    /// Mean l2 distance between consecutive broadcast estimates.
    pub step: f64,
}

/// Message tallies over a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageCounts {
    pub gradients_up: usize,
    pub models_down: usize,
    /// Candidate centers sent out by label initializations.
    pub init_centers_down: usize,
    /// Label replies received by label initializations.
    pub init_labels_up: usize,
}

/// Output of a federated or pooled run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimates: Vec<Array1<f64>>,
    pub labels: Vec<usize>,
    pub centers: Vec<Array1<f64>>,
    pub trace: Vec<RoundRecord>,
    pub counts: MessageCounts,
}

fn check_datasets(datasets: &[TaskDataset]) -> Result<(usize, usize)> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Param("need at least one task".into()))?;
    let p = first.p();
    for (i, d) in datasets.iter().enumerate() {
        if d.p() != p {
            return Err(Error::Shape(format!(
                "task {i} has p = {}, expected {p}",
                d.p()
            )));
        }
        if d.task_id() != i {
            return Err(Error::Param(format!(
                "task at position {i} carries id {}",
                d.task_id()
            )));
        }
    }
    Ok((datasets.len(), p))
}

fn mean_trace_objective(clients: &[SimClient]) -> f64 {
    clients.iter().map(|c| c.trace_objective()).sum::<f64>() / clients.len() as f64
}

/// Runs the full federated algorithm: per-round gradient upload, group
/// projection of the descent vectors, central fusion solve, sparse
/// projection, and model broadcast. Round-0 labels come from a central
/// solve on `init_betas`.
pub fn federated_fit(
    datasets: &[TaskDataset],
    cfg: &FederationConfig,
    init_betas: &[Array1<f64>],
) -> Result<FitResult> {
    let (m, p) = check_datasets(datasets)?;
    cfg.validate(m, p)?;
    if matches!(cfg.mode, Mode::PooledMl) {
        return Err(Error::Param(
            "pooled mode has full data access; call pooled_ml_fit instead".into(),
        ));
    }
    if init_betas.len() != m {
        return Err(Error::Param(format!(
            "{} initial estimates for {m} tasks",
            init_betas.len()
        )));
    }
    for (i, b) in init_betas.iter().enumerate() {
        if b.len() != p {
            return Err(Error::Shape(format!("initial estimate {i} has wrong length")));
        }
        let nnz = b.iter().filter(|v| **v != 0.0).count();
        if nnz > cfg.budget.s {
            return Err(Error::Param(format!(
                "initial estimate {i} has {nnz} nonzeros, budget is {}",
                cfg.budget.s
            )));
        }
    }

    let mut clients: Vec<SimClient> = datasets
        .iter()
        .zip(init_betas.iter())
        .map(|(d, b)| SimClient::new(d.clone(), cfg.local.sigma, cfg.loss, b.clone()))
        .collect();
    let mut counts = MessageCounts::default();

    let mut state = initial_state(init_betas, cfg, &clients, &mut counts)?;
    let mut server_betas: Vec<Array1<f64>> = init_betas.to_vec();
    let mut trace = vec![RoundRecord {
        round: 0,
        objective: mean_trace_objective(&clients),
        step: 0.0,
    }];

    for round in 1..=cfg.rounds as u32 {
        // Local update: every client reports its gradient at the current
        // broadcast estimate; the round barrier is the mailbox collect.
        let mut mailbox = Mailbox::new(m);
        let msgs: Vec<GradientMessage> = clients
            .par_iter()
            .map(|c| c.gradient_message(round))
            .collect::<Result<Vec<_>>>()?;
        for msg in msgs {
            mailbox.deposit(msg)?;
        }
        let grads = mailbox.collect(round)?;
        counts.gradients_up += m;

        // Group projection of the descent vectors under last round's labels.
        let mut projected: Vec<Array1<f64>> = vec![Array1::zeros(p); m];
        for k in 0..cfg.central.k {
            let members: Vec<usize> = (0..m).filter(|&i| state.labels[i] == k).collect();
            if members.is_empty() {
                continue;
            }
            let alphas: Vec<Array1<f64>> = members
                .iter()
                .map(|&i| {
                    let mut a = server_betas[i].clone();
                    a.scaled_add(-cfg.local.eta, &grads[i].gradient);
                    a
                })
                .collect();
            let kept = group_project(&alphas, cfg.budget.q)?;
            for (slot, &i) in members.iter().enumerate() {
                projected[i] = kept[slot].clone();
            }
        }

        state = next_state(&projected, cfg, &clients, Some(&state), &mut counts)?;

        // Sparse projection and broadcast.
        let mut step_total = 0.0;
        for i in 0..m {
            let bhat = hard_threshold(&state.beta_tilde[i], cfg.budget.s)?;
            let msg = ModelMessage::new(i as u32, round, bhat.clone(), cfg.budget.s)?;
            clients[i].receive(msg)?;
            counts.models_down += 1;
            step_total += (&bhat - &server_betas[i]).mapv(|v| v * v).sum().sqrt();
            server_betas[i] = bhat;
        }

        let objective = mean_trace_objective(&clients);
        if !objective.is_finite() || objective > DIVERGENCE_CAP {
            return Err(Error::Divergence { eta: cfg.local.eta, objective });
        }
        trace.push(RoundRecord { round, objective, step: step_total / m as f64 });
    }

    Ok(FitResult {
        estimates: server_betas,
        labels: state.labels,
        centers: state.centers,
        trace,
        counts,
    })
}

fn initial_state(
    anchors: &[Array1<f64>],
    cfg: &FederationConfig,
    clients: &[SimClient],
    counts: &mut MessageCounts,
) -> Result<FederationState> {
    match &cfg.mode {
        Mode::OracleLabels(partition) => solve_central_oracle(anchors, partition, &cfg.central),
        _ => {
            counts.init_centers_down += cfg.central.k;
            counts.init_labels_up += anchors.len();
            let objective = |m: usize, v: &Array1<f64>| clients[m].objective(v);
            solve_central(anchors, &cfg.central, None, Some(&objective))
        }
    }
}

fn next_state(
    anchors: &[Array1<f64>],
    cfg: &FederationConfig,
    clients: &[SimClient],
    warm: Option<&FederationState>,
    counts: &mut MessageCounts,
) -> Result<FederationState> {
    match &cfg.mode {
        Mode::OracleLabels(partition) => solve_central_oracle(anchors, partition, &cfg.central),
        _ if cfg.warm_start => {
            solve_central(anchors, &cfg.central, warm, None)
        }
        _ => initial_state(anchors, cfg, clients, counts),
    }
}

/// Full-data-access baseline: alternates one projected-gradient step per
/// task on its own objective with a central fusion solve whose centers are
/// hard-thresholded to the group budget. Tasks are initialized with
/// independent local fits from zero.
pub fn pooled_ml_fit(datasets: &[TaskDataset], cfg: &FederationConfig) -> Result<FitResult> {
    let (m, p) = check_datasets(datasets)?;
    cfg.validate(m, p)?;

    let mut betas = standard_init(datasets, cfg)?;

    let objective = |i: usize, v: &Array1<f64>| match cfg.loss {
        Loss::Huber => huber_objective(&datasets[i], v, cfg.local.sigma).unwrap_or(f64::INFINITY),
        Loss::Squared => squared_objective(&datasets[i], v).unwrap_or(f64::INFINITY),
    };
    let solve = |anchors: &[Array1<f64>], warm: Option<&FederationState>| match &cfg.mode {
        Mode::OracleLabels(partition) => solve_central_oracle(anchors, partition, &cfg.central),
        _ => match warm {
            Some(w) if cfg.warm_start => solve_central(anchors, &cfg.central, Some(w), None),
            _ => solve_central(anchors, &cfg.central, None, Some(&objective)),
        },
    };

    let mut state = solve(&betas, None)?;
    let trace_at = |betas: &[Array1<f64>], round: u32| -> Result<RoundRecord> {
        let mut total = 0.0;
        for (d, b) in datasets.iter().zip(betas.iter()) {
            total += huber_objective(d, b, cfg.local.sigma)?;
        }
        let objective = total / m as f64;
        if !objective.is_finite() || objective > DIVERGENCE_CAP {
            return Err(Error::Divergence { eta: cfg.local.eta, objective });
        }
        Ok(RoundRecord { round, objective, step: 0.0 })
    };
    let mut trace = vec![trace_at(&betas, 0)?];

    for round in 1..=cfg.rounds as u32 {
        for i in 0..m {
            let grad = match cfg.loss {
                Loss::Huber => huber_gradient(&datasets[i], &betas[i], cfg.local.sigma)?,
                Loss::Squared => l2_gradient(&datasets[i], &betas[i])?,
            };
            let mut descent = betas[i].clone();
            descent.scaled_add(-cfg.local.eta, &grad);
            betas[i] = hard_threshold(&descent, cfg.budget.s)?;
        }
        state = solve(&betas, Some(&state))?;
        for i in 0..m {
            betas[i] = hard_threshold(&state.beta_tilde[i], cfg.budget.s)?;
        }
        state.centers = state
            .centers
            .iter()
            .map(|c| hard_threshold(c, cfg.budget.q))
            .collect::<Result<_>>()?;
        trace.push(trace_at(&betas, round)?);
    }

    Ok(FitResult {
        estimates: betas,
        labels: state.labels,
        centers: state.centers,
        trace,
        counts: MessageCounts::default(),
    })
}
