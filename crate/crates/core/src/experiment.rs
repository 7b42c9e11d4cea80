//! Grid runner — methods × sizes × entity percentages × seeds — with an
//! idempotent manifest, per-run metric files, and t-interval summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{load_conll, Corpus};
use crate::evaluation::{evaluate_model, write_metrics_csv, MetricsRow};
use crate::losses::Method;
use crate::sampling::{sample_imbalanced, sample_partition, SampleSpec};
use crate::training::{splitmix64, train, TrainConfig};
use crate::{Error, Result};

fn default_sizes() -> Vec<usize> {
    vec![20, 50, 100, 200, 300, 400, 500]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

/// Optional per-grid overrides of [`TrainConfig`] fields. `method` and
/// `seed` are grid axes, never overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub batch_sentences: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub maml_m: Option<usize>,
    pub margin: Option<f64>,
    pub vocab_min_count: Option<usize>,
    pub word_dim: Option<usize>,
    pub case_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub window: Option<usize>,
    pub lr_primal: Option<f64>,
    pub lr_dual: Option<f64>,
    pub lr_decay: Option<f64>,
    pub momentum: Option<f64>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(batch_sentences);
        set!(max_epochs);
        set!(patience);
        set!(margin);
        set!(vocab_min_count);
        set!(word_dim);
        set!(case_dim);
        set!(hidden_dim);
        set!(window);
        set!(lr_primal);
        set!(lr_dual);
        set!(lr_decay);
        set!(momentum);
        if let Some(m) = self.maml_m {
            cfg.maml_m = Some(m);
        }
    }
}

/// The full grid: one training run per (method, size, entity_pct?, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub train_path: String,
    pub dev_path: String,
    pub test_path: String,
    pub methods: Vec<Method>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// When set, every run also constrains the subset's entity-token
    /// percentage to one of these targets.
    #[serde(default)]
    pub entity_pcts: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub overrides: TrainOverrides,
}

impl ExperimentSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config("sizes must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if matches!(&self.entity_pcts, Some(p) if p.is_empty()) {
            return Err(Error::Config("entity_pcts, when given, must be nonempty".into()));
        }
        Ok(())
    }

    fn plans(&self) -> Vec<RunPlan> {
        let pcts: Vec<Option<f64>> = match &self.entity_pcts {
            Some(ps) => ps.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut plans = Vec::new();
        for &method in &self.methods {
            for &size in &self.sizes {
                for &pct in &pcts {
                    for &seed in &self.seeds {
                        plans.push(RunPlan { method, size, pct, seed });
                    }
                }
            }
        }
        plans
    }
}

#[derive(Debug, Clone, Copy)]
struct RunPlan {
    method: Method,
    size: usize,
    pct: Option<f64>,
    seed: u64,
}

/// `{method}_s{size}_p{pct|none}_seed{seed}` — the per-run file stem and
/// manifest key.
pub fn run_id(method: Method, size: usize, pct: Option<f64>, seed: u64) -> String {
    let pct = match pct {
        Some(p) => format!("{p}"),
        None => "none".into(),
    };
    format!("{}_s{size}_p{pct}_seed{seed}", method.as_str())
}

/// The subset a run trains on. A pure function of (pool, size, pct, seed);
/// deliberately independent of the method so per-seed comparisons across
/// methods are paired on identical subsets.
pub fn grid_sample(pool: &Corpus, size: usize, pct: Option<f64>, seed: u64) -> Result<Corpus> {
    let mut s = splitmix64(seed);
    s = splitmix64(s ^ size as u64);
    if let Some(p) = pct {
        s = splitmix64(s ^ p.to_bits());
    }
    match pct {
        Some(p) => sample_imbalanced(pool, &SampleSpec::imbalanced(size, p, s)),
        None => sample_partition(pool, &SampleSpec::uniform(size, s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub status: RunStatus,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

type Manifest = BTreeMap<String, ManifestEntry>;

/// Tallies from one [`run_grid`] invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridOutcome {
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Serialize)]
struct RunKey<'a> {
    train_path: &'a str,
    dev_path: &'a str,
    test_path: &'a str,
    size: usize,
    entity_pct: Option<f64>,
    cfg: &'a TrainConfig,
}

fn config_hash(spec: &ExperimentSpec, plan: &RunPlan, cfg: &TrainConfig) -> String {
    let key = RunKey {
        train_path: &spec.train_path,
        dev_path: &spec.dev_path,
        test_path: &spec.test_path,
        size: plan.size,
        entity_pct: plan.pct,
        cfg,
    };
    let json = serde_json::to_string(&key).expect("run key serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn save_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), &json)
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(Manifest::new());
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolved_config(spec: &ExperimentSpec, plan: &RunPlan) -> TrainConfig {
    let mut cfg = TrainConfig::new(plan.method);
    spec.overrides.apply(&mut cfg);
    cfg.seed = plan.seed;
    cfg
}

fn execute(
    spec: &ExperimentSpec,
    plan: &RunPlan,
    pool: &Corpus,
    dev: &Corpus,
    test: &Corpus,
    cfg: &TrainConfig,
    csv_path: &Path,
) -> Result<()> {
    let subset = grid_sample(pool, plan.size, plan.pct, plan.seed)?;
    let (model, _log) = train(&subset, dev, cfg)?;
    let metrics = evaluate_model(&model, test)?;
    let row = MetricsRow {
        method: plan.method.as_str().into(),
        corpus: test.name.clone(),
        train_size: Some(plan.size),
        entity_pct: plan.pct,
        seed: Some(plan.seed),
        metrics,
    };
    let tmp = csv_path.with_extension("csv.tmp");
    write_metrics_csv(&tmp, std::slice::from_ref(&row))?;
    fs::rename(&tmp, csv_path)?;
    let _ = spec;
    Ok(())
}

/// Runs every cell of the grid, `jobs` runs at a time. Completed runs whose
/// config hash is unchanged are skipped; failures are recorded in the
/// manifest and the rest of the grid proceeds.
pub fn run_grid(spec: &ExperimentSpec, out: &Path, jobs: usize) -> Result<GridOutcome> {
    spec.validate()?;
    let pool = load_conll(&spec.train_path)?;
    let dev = load_conll(&spec.dev_path)?;
    let test = load_conll(&spec.test_path)?;
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir)?;

    let manifest = Mutex::new(load_manifest(out)?);
    let outcome = Mutex::new(GridOutcome::default());
    let plans = spec.plans();

    let pool_threads = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool_threads.install(|| {
        plans.par_iter().for_each(|plan| {
            let id = run_id(plan.method, plan.size, plan.pct, plan.seed);
            let cfg = resolved_config(spec, plan);
            let hash = config_hash(spec, plan, &cfg);
            let csv_path = runs_dir.join(format!("{id}.csv"));
            {
                let m = manifest.lock().unwrap();
                if let Some(entry) = m.get(&id) {
                    if entry.status == RunStatus::Done
                        && entry.config_hash == hash
                        && csv_path.exists()
                    {
                        outcome.lock().unwrap().skipped += 1;
                        return;
                    }
                }
            }
            let result = execute(spec, plan, &pool, &dev, &test, &cfg, &csv_path);
            let entry = match &result {
                Ok(()) => {
                    outcome.lock().unwrap().completed += 1;
                    ManifestEntry { status: RunStatus::Done, config_hash: hash, error: None }
                }
                Err(e) => {
                    outcome.lock().unwrap().failed += 1;
                    ManifestEntry {
                        status: RunStatus::Failed,
                        config_hash: hash,
                        error: Some(e.to_string()),
                    }
                }
            };
            let mut m = manifest.lock().unwrap();
            m.insert(id, entry);
            let _ = save_manifest(out, &m);
        });
    });

    save_manifest(out, &manifest.into_inner().unwrap())?;
    Ok(outcome.into_inner().unwrap())
}

/// One aggregated cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub train_size: Option<usize>,
    pub entity_pct: Option<f64>,
    pub n: usize,
    pub mean_f1: f64,
    /// Sample standard deviation (n−1); `None` below two runs.
    pub std_f1: Option<f64>,
    /// 95% Student-t half-width, t₀.₉₇₅,ₙ₋₁ · s/√n; `None` below two runs.
    pub ci95_half_width: Option<f64>,
}

/// Two-sided 95% Student-t quantile at `dof` degrees of freedom.
pub fn t_quantile_975(dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("valid dof")
        .inverse_cdf(0.975)
}

#[derive(Debug, Clone)]
struct RunRow {
    method: String,
    train_size: Option<usize>,
    entity_pct: Option<f64>,
    seed: Option<u64>,
    f1: f64,
}

fn read_run_rows(results: &Path) -> Result<Vec<RunRow>> {
    let runs_dir = results.join("runs");
    if !runs_dir.is_dir() {
        return Err(Error::Invalid(format!(
            "{} has no runs/ directory; not a results directory?",
            results.display()
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for path in paths {
        let mut rdr = csv::Reader::from_path(&path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (m, ts, ep, sd, f1) = match (
            col("method"),
            col("train_size"),
            col("entity_pct"),
            col("seed"),
            col("f1"),
        ) {
            (Some(m), Some(ts), Some(ep), Some(sd), Some(f1)) => (m, ts, ep, sd, f1),
            _ => {
                return Err(Error::Invalid(format!(
                    "{}: missing metrics columns",
                    path.display()
                )))
            }
        };
        for record in rdr.records() {
            let record = record?;
            let parse_opt = |i: usize| {
                let v = record.get(i).unwrap_or("");
                if v.is_empty() {
                    None
                } else {
                    v.parse::<f64>().ok()
                }
            };
            rows.push(RunRow {
                method: record.get(m).unwrap_or("").to_string(),
                train_size: parse_opt(ts).map(|v| v as usize),
                entity_pct: parse_opt(ep),
                seed: parse_opt(sd).map(|v| v as u64),
                f1: record.get(f1).unwrap_or("").parse().map_err(|_| {
                    Error::Invalid(format!("{}: unreadable f1 value", path.display()))
                })?,
            });
        }
    }
    Ok(rows)
}

/// Aggregates `runs/*.csv` into per-(method, size, pct) cells sorted by that
/// key. Cells with fewer than two runs keep their mean but carry no spread.
pub fn summarize(results: &Path) -> Result<Vec<SummaryRow>> {
    let rows = read_run_rows(results)?;
    let mut cells: BTreeMap<(String, Option<usize>, Option<u64>), Vec<f64>> = BTreeMap::new();
    let mut pcts: BTreeMap<Option<u64>, Option<f64>> = BTreeMap::new();
    for row in &rows {
        let key = (row.method.clone(), row.train_size, row.entity_pct.map(f64::to_bits));
        pcts.insert(row.entity_pct.map(f64::to_bits), row.entity_pct);
        cells.entry(key).or_default().push(row.f1);
    }
    let mut out = Vec::with_capacity(cells.len());
    for ((method, train_size, pct_bits), f1s) in cells {
        let n = f1s.len();
        let mean = f1s.iter().sum::<f64>() / n as f64;
        let (std, half) = if n >= 2 {
            let var = f1s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let std = var.sqrt();
            let half = t_quantile_975((n - 1) as f64) * std / (n as f64).sqrt();
            (Some(std), Some(half))
        } else {
            (None, None)
        };
        out.push(SummaryRow {
            method,
            train_size,
            entity_pct: pcts[&pct_bits],
            n,
            mean_f1: mean,
            std_f1: std,
            ci95_half_width: half,
        });
    }
    Ok(out)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_opt6(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Writes `summary.csv` (one row per cell, insufficient cells flagged) and a
/// plot-friendly long table `<stem>_long.csv` with one row per run.
pub fn write_summary(results: &Path, out_csv: &Path) -> Result<()> {
    let summary = summarize(results)?;
    let mut w = csv::Writer::from_path(out_csv)?;
    w.write_record([
        "method",
        "train_size",
        "entity_pct",
        "n",
        "mean_f1",
        "std_f1",
        "ci95_half_width",
        "flag",
    ])?;
    for row in &summary {
        w.write_record([
            row.method.clone(),
            fmt_opt(row.train_size),
            fmt_opt(row.entity_pct),
            row.n.to_string(),
            format!("{:.6}", row.mean_f1),
            fmt_opt6(row.std_f1),
            fmt_opt6(row.ci95_half_width),
            if row.n < 2 { "insufficient-runs" } else { "" }.to_string(),
        ])?;
    }
    w.flush()?;

    let mut rows = read_run_rows(results)?;
    rows.sort_by(|a, b| {
        (&a.method, a.train_size, a.entity_pct.map(f64::to_bits), a.seed).cmp(&(
            &b.method,
            b.train_size,
            b.entity_pct.map(f64::to_bits),
            b.seed,
        ))
    });
    let stem = out_csv
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("summary");
    let long_path = out_csv.with_file_name(format!("{stem}_long.csv"));
    let mut w = csv::Writer::from_path(&long_path)?;
    w.write_record(["method", "train_size", "entity_pct", "seed", "f1"])?;
    for row in rows {
        w.write_record([
            row.method.clone(),
            fmt_opt(row.train_size),
            fmt_opt(row.entity_pct),
            fmt_opt(row.seed),
            format!("{:.6}", row.f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}
