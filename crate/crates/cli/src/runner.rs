//! Replication loop, metric rows, and CSV output.
//!
//! Rows are produced in (replication, method) order no matter how the worker
//! pool schedules them, and all floats are written in shortest round-trip
//! form, so a rerun with the same spec and seed yields byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fedhuber_core::federated::{
    federated_fit, pooled_ml_fit, standard_init, FederationConfig, FitResult, Loss, Mode,
};
use fedhuber_core::huber::{huber_objective, TaskDataset};
use fedhuber_core::metrics::{fp_fn, mse, rand_index};
use fedhuber_core::simgen::{gen_setting, load_csv_tasks, GroundTruth, ScenarioConfig};
use fedhuber_core::tuning::{select_eta, select_model};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::spec::{DataSource, ExperimentSpec, Method};
use crate::Failure;

/// One (replication, method) outcome. `None` metric fields mean "not
/// applicable" (no ground truth, no labels, no test split); failures are
/// recorded as NaN across the board.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: &'static str,
    pub replication: usize,
    pub mse: Option<f64>,
    pub fp: Option<f64>,
    pub fn_: Option<f64>,
    pub rand_index: Option<f64>,
    pub pe: Option<f64>,
    pub wall_ms: u128,
    pub failed: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train/test row split for held-out prediction error. The order is shuffled
/// with a replication-derived seed before the tail is held out.
fn split_tasks(
    tasks: &[TaskDataset],
    fraction: f64,
    rep_seed: u64,
) -> Result<(Vec<TaskDataset>, Option<Vec<TaskDataset>>), Failure> {
    if fraction == 0.0 {
        return Ok((tasks.to_vec(), None));
    }
    let mut train = Vec::with_capacity(tasks.len());
    let mut test = Vec::with_capacity(tasks.len());
    for task in tasks {
        let n = task.n();
        let held = ((fraction * n as f64).floor() as usize).max(1);
        if held >= n {
            return Err(Failure::usage(format!(
                "test_fraction {fraction} leaves no training rows for n = {n}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            rep_seed ^ 0x7E57_5EED ^ (task.task_id() as u64).wrapping_mul(0x1_0000_0001),
        ));
        order.shuffle(&mut rng);
        let shuffled = task.permuted_rows(&order).map_err(Failure::runtime_from)?;
        let (tr, te) = shuffled.split_tail(held).map_err(Failure::runtime_from)?;
        train.push(tr);
        test.push(te);
    }
    Ok((train, Some(test)))
}

fn method_config(
    template: &FederationConfig,
    method: Method,
    truth: Option<&GroundTruth>,
    rep_seed: u64,
) -> FederationConfig {
    let mut cfg = template.clone();
    cfg.central.seed = splitmix64(rep_seed);
    match method {
        Method::IhtLocal | Method::IhtGp | Method::IhtMl => {}
        Method::IhtL2 => cfg.loss = Loss::Squared,
        Method::Oracle => {
            cfg.mode = Mode::OracleLabels(
                truth.expect("oracle needs ground truth").labels_true.clone(),
            );
        }
    }
    cfg
}

struct FitOutput {
    estimates: Vec<Array1<f64>>,
    labels: Option<Vec<usize>>,
}

fn fit_method(
    method: Method,
    train: &[TaskDataset],
    cfg: &FederationConfig,
    init: &[Array1<f64>],
) -> fedhuber_core::Result<FitOutput> {
    match method {
        Method::IhtLocal => Ok(FitOutput { estimates: init.to_vec(), labels: None }),
        Method::IhtMl => {
            let FitResult { estimates, labels, .. } = pooled_ml_fit(train, cfg)?;
            Ok(FitOutput { estimates, labels: Some(labels) })
        }
        _ => {
            let FitResult { estimates, labels, .. } = federated_fit(train, cfg, init)?;
            Ok(FitOutput { estimates, labels: Some(labels) })
        }
    }
}

fn score_row(
    method: Method,
    replication: usize,
    fit: &FitOutput,
    truth: Option<&GroundTruth>,
    test: Option<&[TaskDataset]>,
    sigma: f64,
    wall_ms: u128,
) -> ResultRow {
    let mut row = ResultRow {
        method: method.name(),
        replication,
        mse: None,
        fp: None,
        fn_: None,
        rand_index: None,
        pe: None,
        wall_ms,
        failed: false,
    };
    if let Some(truth) = truth {
        row.mse = mse(&fit.estimates, &truth.betas_true).ok();
        if let Ok((fp, fn_)) = fp_fn(&fit.estimates, &truth.betas_true) {
            row.fp = Some(fp);
            row.fn_ = Some(fn_);
        }
        if let Some(labels) = &fit.labels {
            row.rand_index = rand_index(labels, &truth.labels_true).ok();
        }
    }
    if let Some(test) = test {
        let mut total = 0.0;
        let mut count = 0usize;
        for (d, b) in test.iter().zip(fit.estimates.iter()) {
            if let Ok(obj) = huber_objective(d, b, sigma) {
                total += obj;
                count += 1;
            }
        }
        if count > 0 {
            row.pe = Some(total / count as f64);
        }
    }
    row
}

fn failed_row(method: Method, replication: usize, wall_ms: u128) -> ResultRow {
    ResultRow {
        method: method.name(),
        replication,
        mse: Some(f64::NAN),
        fp: Some(f64::NAN),
        fn_: Some(f64::NAN),
        rand_index: Some(f64::NAN),
        pe: Some(f64::NAN),
        wall_ms,
        failed: true,
    }
}

/// Runs every (replication, method) cell of the spec. Replications run in a
/// worker pool; the returned rows are already in (replication, method) order.
pub fn run_block(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, Failure> {
    let csv_tasks = match &spec.data {
        DataSource::Csv(paths) => {
            Some(load_csv_tasks(paths).map_err(|e| Failure::usage(e.to_string()))?)
        }
        DataSource::Generated(_) => None,
    };

    let per_rep: Vec<Result<Vec<ResultRow>, Failure>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| run_replication(spec, rep, csv_tasks.as_deref()))
        .collect();

    let mut rows = Vec::with_capacity(spec.replications * spec.methods.len());
    for rep_rows in per_rep {
        rows.extend(rep_rows?);
    }
    for row in &rows {
        eprintln!(
            "rep {:3} {:>9}: {} ms{}",
            row.replication,
            row.method,
            row.wall_ms,
            if row.failed { "  (failed)" } else { "" }
        );
    }
    Ok(rows)
}

fn run_replication(
    spec: &ExperimentSpec,
    rep: usize,
    csv_tasks: Option<&[TaskDataset]>,
) -> Result<Vec<ResultRow>, Failure> {
    let rep_seed = spec.base_seed.wrapping_add(rep as u64);
    let (tasks, truth) = match &spec.data {
        DataSource::Generated(scenario) => {
            let cfg = ScenarioConfig { seed: rep_seed, ..*scenario };
            let (tasks, truth) = gen_setting(&cfg).map_err(|e| Failure::usage(e.to_string()))?;
            (tasks, Some(truth))
        }
        DataSource::Csv(_) => (csv_tasks.expect("loaded above").to_vec(), None),
    };
    let (train, test) = split_tasks(&tasks, spec.test_fraction, rep_seed)?;

    let init_start = Instant::now();
    let init_cfg = method_config(&spec.fed, Method::IhtGp, truth.as_ref(), rep_seed);
    let init = standard_init(&train, &init_cfg);
    let init_ms = init_start.elapsed().as_millis();

    let mut rows = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let start = Instant::now();
        let row = match &init {
            Err(_) => failed_row(method, rep, start.elapsed().as_millis()),
            Ok(init) => {
                let cfg = method_config(&spec.fed, method, truth.as_ref(), rep_seed);
                match fit_method(method, &train, &cfg, init) {
                    Ok(fit) => {
                        let wall = start.elapsed().as_millis()
                            + if method == Method::IhtLocal { init_ms } else { 0 };
                        score_row(
                            method,
                            rep,
                            &fit,
                            truth.as_ref(),
                            test.as_deref(),
                            spec.fed.local.sigma,
                            wall,
                        )
                    }
                    Err(_) => failed_row(method, rep, start.elapsed().as_millis()),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Mean and standard error of the present values; `None` when nothing is
/// present.
fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

const METRIC_NAMES: [&str; 5] = ["mse", "fp", "fn", "rand_index", "pe"];

fn metric_of(row: &ResultRow, idx: usize) -> Option<f64> {
    match idx {
        0 => row.mse,
        1 => row.fp,
        2 => row.fn_,
        3 => row.rand_index,
        _ => row.pe,
    }
}

fn summary_cells(rows: &[ResultRow], method: &str) -> Vec<String> {
    let mut cells = Vec::with_capacity(METRIC_NAMES.len() * 2);
    for idx in 0..METRIC_NAMES.len() {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| metric_of(r, idx))
            .collect();
        match mean_se(&values) {
            Some((mean, se)) => {
                cells.push(format!("{mean}"));
                cells.push(format!("{se}"));
            }
            None => {
                cells.push(String::new());
                cells.push(String::new());
            }
        }
    }
    cells
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn ensure_output_dir(spec: &ExperimentSpec) -> Result<(), Failure> {
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| {
        Failure::usage(format!(
            "cannot create output_dir {}: {e}",
            spec.output_dir.display()
        ))
    })
}

/// Runs the experiment and writes `rows.csv` (per replication) and
/// `summary.csv` (per-method mean and standard error). Returns the rows.csv
/// path and whether any fit failed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(PathBuf, bool), Failure> {
    ensure_output_dir(spec)?;
    let rows = run_block(spec)?;

    let mut rows_csv = String::from("method,replication,mse,fp,fn,rand_index,pe\n");
    for row in &rows {
        rows_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.method,
            row.replication,
            fmt_opt(row.mse),
            fmt_opt(row.fp),
            fmt_opt(row.fn_),
            fmt_opt(row.rand_index),
            fmt_opt(row.pe),
        ));
    }
    let rows_path = spec.output_dir.join("rows.csv");
    write_file(&rows_path, &rows_csv)?;

    let mut summary_csv = String::from(
        "method,mean_mse,se_mse,mean_fp,se_fp,mean_fn,se_fn,mean_rand_index,se_rand_index,mean_pe,se_pe\n",
    );
    for &method in &spec.methods {
        let cells = summary_cells(&rows, method.name());
        summary_csv.push_str(&format!("{},{}\n", method.name(), cells.join(",")));
    }
    write_file(&spec.output_dir.join("summary.csv"), &summary_csv)?;

    Ok((rows_path, rows.iter().any(|r| r.failed)))
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    H,
    Delta,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self, Failure> {
        match name {
            "h" => Ok(Self::H),
            "delta" => Ok(Self::Delta),
            other => Err(Failure::usage(format!(
                "unknown sweep parameter {other:?}; expected h or delta"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::H => "h",
            Self::Delta => "delta",
        }
    }
}

/// Reruns the whole block once per swept value and writes one summary row
/// per (value, method) to `sweep.csv`.
pub fn run_sweep(
    spec: &ExperimentSpec,
    param: SweepParam,
    values: &[f64],
) -> Result<(PathBuf, bool), Failure> {
    if values.is_empty() {
        return Err(Failure::usage("sweep needs at least one value".into()));
    }
    let scenario = match &spec.data {
        DataSource::Generated(s) => *s,
        DataSource::Csv(_) => {
            return Err(Failure::usage("sweeps need a generated scenario".into()))
        }
    };
    use fedhuber_core::simgen::Setting;
    match (param, scenario.setting) {
        (SweepParam::H, Setting::S3) | (SweepParam::Delta, Setting::S4) => {}
        (SweepParam::H, _) => {
            return Err(Failure::usage("sweeping h requires scenario = s3".into()))
        }
        (SweepParam::Delta, _) => {
            return Err(Failure::usage("sweeping delta requires scenario = s4".into()))
        }
    }
    for v in values {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Failure::usage(format!("swept values must be nonnegative, got {v}")));
        }
    }

    ensure_output_dir(spec)?;
    let mut csv = String::from(
        "param,value,method,mean_mse,se_mse,mean_fp,se_fp,mean_fn,se_fn,mean_rand_index,se_rand_index\n",
    );
    let mut any_failed = false;
    for &value in values {
        let mut point = spec.clone();
        let mut sc = scenario;
        match param {
            SweepParam::H => sc.h_scale = value,
            SweepParam::Delta => sc.delta_scale = value,
        }
        point.data = DataSource::Generated(sc);
        let rows = run_block(&point)?;
        any_failed |= rows.iter().any(|r| r.failed);
        for &method in &spec.methods {
            let cells = summary_cells(&rows, method.name());
            csv.push_str(&format!(
                "{},{},{},{}\n",
                param.name(),
                value,
                method.name(),
                cells[..8].join(","),
            ));
        }
    }
    let path = spec.output_dir.join("sweep.csv");
    write_file(&path, &csv)?;
    Ok((path, any_failed))
}

/// Selects the step size (per task, then the median) and the best
/// `(K, s, q, lambda)` by the selection criterion, writing the full
/// criterion table to `tuning.csv`.
pub fn run_tune(spec: &ExperimentSpec) -> Result<PathBuf, Failure> {
    ensure_output_dir(spec)?;
    let tasks = match &spec.data {
        DataSource::Generated(scenario) => {
            gen_setting(scenario).map_err(|e| Failure::usage(e.to_string()))?.0
        }
        DataSource::Csv(paths) => load_csv_tasks(paths).map_err(|e| Failure::usage(e.to_string()))?,
    };

    let mut etas = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let eta = select_eta(task, &spec.grid, &spec.fed.local)
            .map_err(|e| Failure::runtime(e.to_string()))?;
        eprintln!("task {:2}: eta = {eta}", task.task_id());
        etas.push(eta);
    }
    etas.sort_by(|a, b| a.partial_cmp(b).expect("finite etas"));
    let eta = etas[(etas.len() - 1) / 2];

    let mut template = spec.fed.clone();
    template.local.eta = eta;
    template.central.seed = splitmix64(spec.base_seed);
    let (best, table) =
        select_model(&tasks, &spec.grid, &template).map_err(|e| Failure::runtime(e.to_string()))?;

    let mut csv = String::from("k,s,q,lambda,criterion\n");
    for row in &table {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.k, row.s, row.q, row.lambda, row.criterion
        ));
    }
    let path = spec.output_dir.join("tuning.csv");
    write_file(&path, &csv)?;

    println!(
        "selected: eta = {eta}, k = {}, s = {}, q = {}, lambda = {}",
        best.central.k, best.budget.s, best.budget.q, best.central.lambda
    );
    Ok(path)
}
