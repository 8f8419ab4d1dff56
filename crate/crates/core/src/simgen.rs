//! Synthetic scenario generation with ground truth, plus CSV ingestion for
//! real data.
//!
//! Every task draws from its own counter-based RNG stream, so the data of
//! task `m` does not depend on how many tasks exist or on evaluation order.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::huber::TaskDataset;

/// Which experiment family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Two groups with fixed centers, mild center perturbation, t(2) noise.
    S1,
    /// As S1 with a tighter perturbation and selectable noise law.
    S2,
    /// As S1 with the perturbation rescaled to an exact radius `h`.
    S3,
    /// As S1 with the centers scaled by `delta`.
    S4,
}

/// Error law for the responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// Standard normal.
    Normal,
    /// Student's t with 2 degrees of freedom (unscaled).
    StudentT,
    /// Cauchy with location 0 and scale 1.5.
    Cauchy,
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioConfig {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub noise: Noise,
    /// Within-group radius; used by S3 only.
    pub h_scale: f64,
    /// Center scale; used by S4 only.
    pub delta_scale: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Canonical S1 scenario: t(2) noise, 0.3-sd perturbation.
    pub fn setting1(n: usize, p: usize, m: usize, seed: u64) -> Self {
        Self {
            setting: Setting::S1,
            n,
            p,
            m,
            noise: Noise::StudentT,
            h_scale: 0.0,
            delta_scale: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m < 1 {
            return Err(Error::Param("n and M must be at least 1".into()));
        }
        if self.p < 3 {
            return Err(Error::Param(format!(
                "centers occupy the first 3 coordinates; p = {} is too small",
                self.p
            )));
        }
        if !(self.h_scale.is_finite() && self.h_scale >= 0.0) {
            return Err(Error::Param(format!("h must be nonnegative, got {}", self.h_scale)));
        }
        if !(self.delta_scale.is_finite() && self.delta_scale >= 0.0) {
            return Err(Error::Param(format!(
                "delta must be nonnegative, got {}",
                self.delta_scale
            )));
        }
        Ok(())
    }
}

/// True parameters behind a generated scenario.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub betas_true: Vec<Array1<f64>>,
    pub labels_true: Vec<usize>,
    pub centers_true: Vec<Array1<f64>>,
    /// Per-task sparsity of the truth.
    pub s0: usize,
    /// Size of the union support within each group.
    pub q0: usize,
    /// Realized within-group radius `max_m |beta_m - theta_{z_m}|`.
    pub h: f64,
    /// Realized minimal separation between distinct centers.
    pub delta: f64,
}

fn standard_normals(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.sample::<f64, _>(StandardNormal))
}

fn design_with_rng(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    // Row-wise: x_j = sqrt(0.3) z0 + sqrt(0.7) z_j gives unit variance and
    // 0.3 cross-correlation for every pair of columns.
    let shared = 0.3f64.sqrt();
    let own = 0.7f64.sqrt();
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let zj: f64 = rng.sample(StandardNormal);
            x[[i, j]] = shared * z0 + own * zj;
        }
    }
    x
}

/// Draws an `n x p` design with equicorrelated rows: unit variances and 0.3
/// covariance between distinct columns. Bit-identical for a fixed seed.
pub fn gen_design(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    design_with_rng(n, p, &mut rng)
}

fn noise_with_rng(noise: Noise, n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    match noise {
        Noise::Normal => standard_normals(rng, n),
        Noise::StudentT => {
            let t = StudentT::new(2.0).expect("valid dof");
            Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(t))
        }
        Noise::Cauchy => {
            let c = Cauchy::new(0.0, 1.5).expect("valid scale");
            Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(c))
        }
    }
}

fn base_centers(p: usize) -> Vec<Array1<f64>> {
    let mut c1 = Array1::zeros(p);
    c1[0] = 2.0;
    c1[1] = 3.0;
    c1[2] = 4.0;
    let mut c2 = Array1::zeros(p);
    c2[0] = -1.0;
    c2[1] = 2.0;
    c2[2] = 3.0;
    vec![c1, c2]
}

/// Generates the datasets and ground truth of a scenario. Group sizes split
/// 60/40 between the two centers.
pub fn gen_setting(cfg: &ScenarioConfig) -> Result<(Vec<TaskDataset>, GroundTruth)> {
    cfg.validate()?;
    let center_scale = match cfg.setting {
        Setting::S4 => cfg.delta_scale,
        _ => 1.0,
    };
    let centers_true: Vec<Array1<f64>> =
        base_centers(cfg.p).into_iter().map(|c| c * center_scale).collect();

    let group1 = if cfg.m == 1 {
        1
    } else {
        ((0.6 * cfg.m as f64).floor() as usize).clamp(1, cfg.m - 1)
    };
    let labels_true: Vec<usize> = (0..cfg.m).map(|m| usize::from(m >= group1)).collect();

    let perturb_sd = match cfg.setting {
        Setting::S2 => 0.1,
        _ => 0.3,
    };

    let mut datasets = Vec::with_capacity(cfg.m);
    let mut betas_true = Vec::with_capacity(cfg.m);
    let mut h_realized = 0.0f64;
    for m in 0..cfg.m {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(m as u64 + 1);

        // Perturbation on the first three coordinates, fixed draw order:
        // perturbation, then design, then noise.
        let mut head = standard_normals(&mut rng, 3) * perturb_sd;
        if cfg.setting == Setting::S3 {
            let mut norm = head.mapv(|v| v * v).sum().sqrt();
            while norm == 0.0 {
                head = standard_normals(&mut rng, 3) * perturb_sd;
                norm = head.mapv(|v| v * v).sum().sqrt();
            }
            head = head * (cfg.h_scale / norm);
        }
        let mut beta = centers_true[labels_true[m]].clone();
        for j in 0..3 {
            beta[j] += head[j];
        }

        let x = design_with_rng(cfg.n, cfg.p, &mut rng);
        let eps = noise_with_rng(cfg.noise, cfg.n, &mut rng);
        let y = x.dot(&beta) + eps;

        let dist = (&beta - &centers_true[labels_true[m]]).mapv(|v| v * v).sum().sqrt();
        h_realized = h_realized.max(dist);
        betas_true.push(beta);
        datasets.push(TaskDataset::new(x, y, m)?);
    }

    let delta = (&centers_true[0] - &centers_true[1]).mapv(|v| v * v).sum().sqrt();
    let truth = GroundTruth {
        betas_true,
        labels_true,
        centers_true,
        s0: 3,
        q0: 3,
        h: h_realized,
        delta,
    };
    Ok((datasets, truth))
}

/// Loads one dataset per CSV file. Each file needs a header row; the first
/// column is the response, the rest are covariates, and every file must
/// agree on the covariate count. `task_id` is the position in `paths`.
pub fn load_csv_tasks<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<TaskDataset>> {
    if paths.is_empty() {
        return Err(Error::Param("no CSV files given".into()));
    }
    let mut out = Vec::with_capacity(paths.len());
    let mut expected_p: Option<usize> = None;
    for (task_id, path) in paths.iter().enumerate() {
        let file = path.as_ref().display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path.as_ref())
            .map_err(|e| Error::Ingest { file: file.clone(), line: 1, msg: e.to_string() })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Ingest { file: file.clone(), line: 1, msg: e.to_string() })?;
        if headers.len() < 2 {
            return Err(Error::Ingest {
                file,
                line: 1,
                msg: format!("need a response and at least one covariate, got {} columns", headers.len()),
            });
        }
        let p = headers.len() - 1;
        if let Some(expected) = expected_p {
            if p != expected {
                return Err(Error::Ingest {
                    file,
                    line: 1,
                    msg: format!("file has {p} covariates but earlier files have {expected}"),
                });
            }
        } else {
            expected_p = Some(p);
        }

        let mut rows: Vec<f64> = Vec::new();
        let mut y: Vec<f64> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|pos| pos.line()).unwrap_or(0);
                Error::Ingest { file: file.clone(), line, msg: e.to_string() }
            })?;
            let line = record.position().map(|pos| pos.line()).unwrap_or(0);
            if record.len() != p + 1 {
                return Err(Error::Ingest {
                    file,
                    line,
                    msg: format!("expected {} fields, found {}", p + 1, record.len()),
                });
            }
            for (col, field) in record.iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| Error::Ingest {
                    file: file.clone(),
                    line,
                    msg: format!("non-numeric value {:?} in column {}", field, col + 1),
                })?;
                if col == 0 {
                    y.push(value);
                } else {
                    rows.push(value);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::Ingest { file, line: 1, msg: "file has no data rows".into() });
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, p), rows)
            .map_err(|e| Error::Ingest { file: file.clone(), line: 1, msg: e.to_string() })?;
        out.push(TaskDataset::new(x, Array1::from_vec(y), task_id)?);
    }
    Ok(out)
}

/// Writes one dataset in the layout [`load_csv_tasks`] reads. Floats use the
/// shortest representation that round-trips, so reload is bit-exact.
pub fn write_csv_task<P: AsRef<Path>>(d: &TaskDataset, path: P) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "y")?;
    for j in 1..=d.p() {
        write!(out, ",x{j}")?;
    }
    writeln!(out)?;
    for i in 0..d.n() {
        write!(out, "{}", d.y()[i])?;
        for j in 0..d.p() {
            write!(out, ",{}", d.x()[[i, j]])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn design_moments_match_target_covariance() {
        let x = gen_design(200_000, 3, 7);
        let n = x.nrows() as f64;
        let mean: Vec<f64> = (0..3).map(|j| x.column(j).sum() / n).collect();
        for a in 0..3 {
            for b in 0..3 {
                let mut cov = 0.0;
                for i in 0..x.nrows() {
                    cov += (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b]);
                }
                cov /= n - 1.0;
                let target = if a == b { 1.0 } else { 0.3 };
                assert!(
                    (cov - target).abs() < 0.02,
                    "cov[{a},{b}] = {cov}, want {target}"
                );
            }
        }
    }

    #[test]
    fn design_deterministic_for_fixed_seed() {
        assert_eq!(gen_design(17, 5, 99), gen_design(17, 5, 99));
    }

    #[test]
    fn single_column_design_has_unit_variance() {
        let x = gen_design(100_000, 1, 3);
        let n = x.nrows() as f64;
        let mean = x.column(0).sum() / n;
        let var = x.column(0).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn setting1_truth_structure() {
        let cfg = ScenarioConfig::setting1(20, 10, 10, 5);
        let (datasets, truth) = gen_setting(&cfg).unwrap();
        assert_eq!(datasets.len(), 10);
        assert_eq!(truth.s0, 3);
        assert_eq!(truth.labels_true, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
        assert!((truth.delta - 11f64.sqrt()).abs() < 1e-12);
        for (beta, &z) in truth.betas_true.iter().zip(truth.labels_true.iter()) {
            for j in 3..10 {
                assert_eq!(beta[j], 0.0);
            }
            // Perturbation is confined to the leading three coordinates.
            let tail_matches = (3..10).all(|j| beta[j] == truth.centers_true[z][j]);
            assert!(tail_matches);
        }
    }

    #[test]
    fn setting3_zero_radius_recovers_centers() {
        let cfg = ScenarioConfig {
            setting: Setting::S3,
            h_scale: 0.0,
            ..ScenarioConfig::setting1(10, 5, 6, 2)
        };
        let (_, truth) = gen_setting(&cfg).unwrap();
        for (beta, &z) in truth.betas_true.iter().zip(truth.labels_true.iter()) {
            assert_eq!(beta, &truth.centers_true[z]);
        }
        assert_eq!(truth.h, 0.0);
    }

    #[test]
    fn setting3_radius_is_exact() {
        let cfg = ScenarioConfig {
            setting: Setting::S3,
            h_scale: 1.7,
            ..ScenarioConfig::setting1(5, 6, 8, 11)
        };
        let (_, truth) = gen_setting(&cfg).unwrap();
        for (beta, &z) in truth.betas_true.iter().zip(truth.labels_true.iter()) {
            let d = (beta - &truth.centers_true[z]).mapv(|v| v * v).sum().sqrt();
            assert!((d - 1.7).abs() < 1e-12, "distance {d}");
        }
        assert!((truth.h - 1.7).abs() < 1e-12);
    }

    #[test]
    fn setting4_unit_delta_matches_setting1_moments() {
        // With delta = 1 and the same perturbation scale, S4 and S1 truths
        // follow the same law; compare first and second moments of the
        // leading coordinates over many draws.
        let mut means = [[0.0f64; 3]; 2];
        let mut vars = [[0.0f64; 3]; 2];
        let draws = 1000;
        for rep in 0..draws {
            let s1 = ScenarioConfig::setting1(1, 3, 2, 40_000 + rep);
            let s4 = ScenarioConfig {
                setting: Setting::S4,
                delta_scale: 1.0,
                ..ScenarioConfig::setting1(1, 3, 2, 80_000 + rep)
            };
            let (_, t1) = gen_setting(&s1).unwrap();
            let (_, t4) = gen_setting(&s4).unwrap();
            for j in 0..3 {
                means[0][j] += t1.betas_true[0][j];
                means[1][j] += t4.betas_true[0][j];
                vars[0][j] += t1.betas_true[0][j] * t1.betas_true[0][j];
                vars[1][j] += t4.betas_true[0][j] * t4.betas_true[0][j];
            }
        }
        for j in 0..3 {
            for s in 0..2 {
                means[s][j] /= draws as f64;
                vars[s][j] = vars[s][j] / draws as f64 - means[s][j] * means[s][j];
            }
            assert!((means[0][j] - means[1][j]).abs() < 0.05, "mean mismatch at {j}");
            assert!((vars[0][j] - vars[1][j]).abs() < 0.03, "var mismatch at {j}");
        }
    }

    #[test]
    fn perturbation_radius_mean_tracks_gaussian_norm() {
        // E|N(0, v^2 I_3)| = v * sqrt(2) * Gamma(2) / Gamma(1.5) ~ 1.5958 v.
        let mut total = 0.0;
        let reps = 400;
        for rep in 0..reps {
            let cfg = ScenarioConfig::setting1(1, 3, 1, 123_000 + rep);
            let (_, t) = gen_setting(&cfg).unwrap();
            total += t.h;
        }
        let mean = total / reps as f64;
        let expected = 0.3 * 1.5957691;
        assert!((mean - expected).abs() < 0.05, "mean {mean} vs {expected}");
    }

    #[test]
    fn student_t_noise_is_heavy_tailed() {
        // The median absolute value stays put while the empirical variance
        // keeps growing with the sample size.
        let draw = |count: usize, seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            noise_with_rng(Noise::StudentT, count, &mut rng).to_vec()
        };
        let small = draw(2_000, 1);
        let large = draw(200_000, 2);
        let mad = |v: &[f64]| {
            let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            a[a.len() / 2]
        };
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((mad(&small) - mad(&large)).abs() < 0.2);
        assert!(var(&large) > var(&small), "variance should keep growing");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::setting1(15, 8, 4, 77);
        let (d1, t1) = gen_setting(&cfg).unwrap();
        let (d2, t2) = gen_setting(&cfg).unwrap();
        for (a, b) in d1.iter().zip(d2.iter()) {
            assert_eq!(a.x(), b.x());
            assert_eq!(a.y(), b.y());
        }
        for (a, b) in t1.betas_true.iter().zip(t2.betas_true.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn task_data_does_not_depend_on_task_count() {
        // Substreams: task 0 draws identically whether M = 2 or M = 8.
        let small = gen_setting(&ScenarioConfig::setting1(10, 5, 2, 31)).unwrap();
        let large = gen_setting(&ScenarioConfig::setting1(10, 5, 8, 31)).unwrap();
        assert_eq!(small.0[0].x(), large.0[0].x());
        assert_eq!(small.0[0].y(), large.0[0].y());
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::setting1(12, 4, 2, 9);
        let (datasets, _) = gen_setting(&cfg).unwrap();
        let mut paths = Vec::new();
        for (i, d) in datasets.iter().enumerate() {
            let path = dir.path().join(format!("task{i}.csv"));
            write_csv_task(d, &path).unwrap();
            paths.push(path);
        }
        let reloaded = load_csv_tasks(&paths).unwrap();
        for (a, b) in datasets.iter().zip(reloaded.iter()) {
            assert_eq!(a.x(), b.x());
            assert_eq!(a.y(), b.y());
        }
    }

    #[test]
    fn csv_two_files_same_width() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for i in 0..2 {
            let path = dir.path().join(format!("t{i}.csv"));
            let mut f = std::fs::File::create(&path).unwrap();
            writeln!(f, "y,x1,x2,x3,x4").unwrap();
            writeln!(f, "1.0,0.1,0.2,0.3,0.4").unwrap();
            writeln!(f, "2.0,0.5,0.6,0.7,0.8").unwrap();
            paths.push(path);
        }
        let tasks = load_csv_tasks(&paths).unwrap();
        assert_eq!(tasks.len(), 2);
        assert!(tasks.iter().all(|t| t.p() == 4));
        assert_eq!(tasks[1].task_id(), 1);
    }

    #[test]
    fn csv_error_names_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "y,x1,x2").unwrap();
        for i in 0..5 {
            writeln!(f, "{i}.0,1.0,2.0").unwrap();
        }
        writeln!(f, "9.0,oops,2.0").unwrap(); // file line 7
        drop(f);
        match load_csv_tasks(&[&path]) {
            Err(Error::Ingest { line, msg, .. }) => {
                assert_eq!(line, 7, "reported line {line}: {msg}");
                assert!(msg.contains("oops"));
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "y,x1,x2").unwrap();
        writeln!(f, "1.0,2.0,3.0").unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        drop(f);
        assert!(matches!(load_csv_tasks(&[&path]), Err(Error::Ingest { .. })));
    }

    #[test]
    fn csv_rejects_mixed_widths_across_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        std::fs::write(&a, "y,x1,x2\n1.0,2.0,3.0\n").unwrap();
        std::fs::write(&b, "y,x1\n1.0,2.0\n").unwrap();
        assert!(matches!(load_csv_tasks(&[a, b]), Err(Error::Ingest { .. })));
    }
}
