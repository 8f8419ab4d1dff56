//! Experiment spec: a flat key = value file, with every key overridable from
//! the command line via `--set key=value`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fedhuber_core::central::CentralConfig;
use fedhuber_core::federated::{FederationConfig, Loss, Mode};
use fedhuber_core::local_iht::LocalFitConfig;
use fedhuber_core::projection::SparsityBudget;
use fedhuber_core::simgen::{Noise, ScenarioConfig, Setting};
use fedhuber_core::tuning::TuningGrid;

use crate::Failure;

/// Method variants the runner knows how to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    IhtLocal,
    IhtGp,
    IhtL2,
    IhtMl,
    Oracle,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self, Failure> {
        match name {
            "iht-local" => Ok(Self::IhtLocal),
            "iht-gp" => Ok(Self::IhtGp),
            "iht-l2" => Ok(Self::IhtL2),
            "iht-ml" => Ok(Self::IhtMl),
            "oracle" => Ok(Self::Oracle),
            other => Err(Failure::usage(format!(
                "unknown method {other:?}; expected iht-local, iht-gp, iht-l2, iht-ml, or oracle"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::IhtLocal => "iht-local",
            Self::IhtGp => "iht-gp",
            Self::IhtL2 => "iht-l2",
            Self::IhtMl => "iht-ml",
            Self::Oracle => "oracle",
        }
    }
}

/// Where the data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Synthetic scenario; the per-replication seed is filled in later.
    Generated(ScenarioConfig),
    /// One CSV file per task.
    Csv(Vec<PathBuf>),
}

/// Everything one `fedhuber` invocation needs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub test_fraction: f64,
    pub base_seed: u64,
    /// Method-independent template; per-method loss/mode are filled in by
    /// the runner.
    pub fed: FederationConfig,
    pub grid: TuningGrid,
}

fn parse_kv_line(line: &str, source: &str) -> Result<Option<(String, String)>, Failure> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let (key, value) = trimmed.split_once('=').ok_or_else(|| {
        Failure::usage(format!("{source}: expected key = value, got {trimmed:?}"))
    })?;
    let value = value.split('#').next().unwrap_or("");
    Ok(Some((key.trim().to_string(), value.trim().to_string())))
}

/// Reads the flat key = value document and applies `--set` overrides.
pub fn load_keys(path: &Path, sets: &[String]) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read spec {}: {e}", path.display())))?;
    let mut keys = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = parse_kv_line(line, &path.display().to_string())? {
            keys.insert(k, v);
        }
    }
    for set in sets {
        let (k, v) = parse_kv_line(set, "--set")?
            .ok_or_else(|| Failure::usage(format!("--set needs key=value, got {set:?}")))?;
        keys.insert(k, v);
    }
    Ok(keys)
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str()).filter(|s| !s.is_empty())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        match self.raw(key) {
            None => Ok(default),
            Some(text) => text
                .parse()
                .map_err(|_| Failure::usage(format!("key {key}: cannot parse {text:?}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, Failure> {
        match self.raw(key) {
            None => Ok(default),
            Some(text) => text
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| Failure::usage(format!("key {key}: cannot parse {item:?}")))
                })
                .collect(),
        }
    }
}

/// Known keys, used to reject typos instead of silently ignoring them.
const KNOWN_KEYS: &[&str] = &[
    "scenario", "csv_paths", "n", "p", "m", "noise", "h", "delta", "seed", "methods",
    "replications", "output_dir", "test_fraction", "sigma", "eta", "eta1", "s", "q", "k",
    "lambda", "rounds", "local_iters", "local_tol", "inner_iters", "prox_iters", "central_tol",
    "kmeans_restarts", "warm_start", "l1_penalty", "k_values", "s_values", "q_values",
    "lambda_values", "eta_values", "c1", "c2",
];

/// Builds the typed spec from the flat keys. `FEDHUBER_SEED` in the
/// environment overrides the base seed.
pub fn build_spec(keys: BTreeMap<String, String>) -> Result<ExperimentSpec, Failure> {
    for key in keys.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Failure::usage(format!("unknown spec key {key:?}")));
        }
    }
    let keys = Keys(keys);

    let mut base_seed: u64 = keys.parse("seed", 42)?;
    if let Ok(env_seed) = std::env::var("FEDHUBER_SEED") {
        base_seed = env_seed
            .parse()
            .map_err(|_| Failure::usage(format!("FEDHUBER_SEED: cannot parse {env_seed:?}")))?;
    }

    let scenario_name = keys.raw("scenario").unwrap_or("s1").to_string();
    let data = if scenario_name == "csv" {
        let paths: Vec<String> = keys.list("csv_paths", vec![])?;
        if paths.is_empty() {
            return Err(Failure::usage("scenario = csv requires csv_paths".into()));
        }
        DataSource::Csv(paths.into_iter().map(PathBuf::from).collect())
    } else {
        let setting = match scenario_name.as_str() {
            "s1" => Setting::S1,
            "s2" => Setting::S2,
            "s3" => Setting::S3,
            "s4" => Setting::S4,
            other => {
                return Err(Failure::usage(format!(
                    "unknown scenario {other:?}; expected s1, s2, s3, s4, or csv"
                )))
            }
        };
        let noise = match keys.raw("noise").unwrap_or("t") {
            "normal" => Noise::Normal,
            "t" => Noise::StudentT,
            "cauchy" => Noise::Cauchy,
            other => {
                return Err(Failure::usage(format!(
                    "unknown noise {other:?}; expected normal, t, or cauchy"
                )))
            }
        };
        DataSource::Generated(ScenarioConfig {
            setting,
            n: keys.parse("n", 100)?,
            p: keys.parse("p", 100)?,
            m: keys.parse("m", 10)?,
            noise,
            h_scale: keys.parse("h", 1.0)?,
            delta_scale: keys.parse("delta", 1.0)?,
            seed: base_seed,
        })
    };

    let method_names: Vec<String> =
        keys.list("methods", vec!["iht-local".into(), "iht-gp".into()])?;
    let mut methods = Vec::new();
    for name in &method_names {
        let method = Method::parse(name)?;
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    if methods.is_empty() {
        return Err(Failure::usage("at least one method is required".into()));
    }
    if methods.contains(&Method::Oracle) && matches!(data, DataSource::Csv(_)) {
        return Err(Failure::usage(
            "the oracle method needs ground-truth labels; it cannot run on CSV data".into(),
        ));
    }

    let replications: usize = keys.parse("replications", 20)?;
    if replications < 1 {
        return Err(Failure::usage("replications must be at least 1".into()));
    }
    let test_fraction: f64 = keys.parse("test_fraction", 0.0)?;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Failure::usage(format!(
            "test_fraction must lie in [0, 1), got {test_fraction}"
        )));
    }

    let s: usize = keys.parse("s", 3)?;
    let q: usize = keys.parse("q", s)?;
    let budget = SparsityBudget::new(s, q).map_err(|e| Failure::usage(e.to_string()))?;
    let l1_penalty: f64 = keys.parse("l1_penalty", 0.0)?;
    let fed = FederationConfig {
        rounds: keys.parse("rounds", 300)?,
        local: LocalFitConfig {
            eta: keys.parse("eta", 0.01)?,
            sigma: keys.parse("sigma", 3.0)?,
            s,
            t_max: keys.parse("local_iters", 50)?,
            tol: keys.parse("local_tol", 0.0)?,
        },
        central: CentralConfig {
            lambda: keys.parse("lambda", 0.5)?,
            k: keys.parse("k", 2)?,
            eta1: keys.parse("eta1", 0.01)?,
            inner_iters: keys.parse("inner_iters", 100)?,
            prox_iters: keys.parse("prox_iters", 200)?,
            tol: keys.parse("central_tol", 1e-6)?,
            kmeans_restarts: keys.parse("kmeans_restarts", 10)?,
            seed: 0, // per-replication, derived by the runner
        },
        budget,
        loss: Loss::Huber,
        mode: Mode::Adaptive,
        warm_start: keys.parse("warm_start", true)?,
        l1_init_penalty: if l1_penalty > 0.0 { Some(l1_penalty) } else { None },
    };

    let grid = TuningGrid {
        k_values: keys.list("k_values", vec![1, 2, 3])?,
        s_values: keys.list("s_values", vec![s])?,
        q_values: keys.list("q_values", vec![])?,
        lambda_values: keys.list("lambda_values", vec![0.25, 0.5, 1.0, 2.0])?,
        eta_values: keys.list("eta_values", vec![0.003, 0.01, 0.03])?,
        c1: keys.parse("c1", 1.0)?,
        c2: keys.parse("c2", 1.5)?,
    };

    Ok(ExperimentSpec {
        data,
        methods,
        replications,
        output_dir: PathBuf::from(keys.raw("output_dir").unwrap_or("out")),
        test_fraction,
        base_seed,
        fed,
        grid,
    })
}
