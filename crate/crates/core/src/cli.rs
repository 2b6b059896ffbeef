//! Config parsing, campaign execution and result files.
//!
//! Configs are plain `key = value` lines. A campaign expands the variant,
//! task and replication lists into one [`ExperimentConfig`] per run; every
//! run gets its own subdirectory holding the metrics log, final archive,
//! buffer dump, encoder checkpoint and a manifest that echoes the config.

use std::fmt::Debug;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::env::{self, RoverParams, TaskId};
use crate::error::{Error, Result};
use crate::evolution::{self, ExperimentConfig, RunOutput, Variant};
use crate::exec;
use crate::io::{self, ScoreRow};
use crate::tasks::{self, Projection};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const METRICS_FILE: &str = "metrics.csv";
pub const ARCHIVE_FILE: &str = "archive.csv";
pub const BUFFER_FILE: &str = "buffer.csv";
pub const ENCODER_FILE: &str = "encoder.ckpt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SCORES_FILE: &str = "scores.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one run, a function of its coordinates only.
pub fn run_seed(campaign_seed: u64, variant: Variant, task: TaskId, replication: usize) -> u64 {
    [variant.index() as u64, task.index() as u64, replication as u64]
        .into_iter()
        .fold(splitmix64(campaign_seed), |h, x| splitmix64(h ^ x))
}

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("line {} is not `key = value`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Debug,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("invalid value `{value}`: {e:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Debug,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(key, "empty list"));
    }
    Ok(items)
}

/// Sets one per-run field. Returns `false` for keys that are not run fields.
pub fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "variant" => cfg.variant = parse_value(key, value)?,
        "task" => cfg.task = parse_value(key, value)?,
        "env" => cfg.env = value.to_string(),
        "iterations" => cfg.iterations = parse_value(key, value)?,
        "batch_size" => cfg.batch_size = parse_value(key, value)?,
        "initial_population" => cfg.initial_population = parse_value(key, value)?,
        "target_size" => cfg.target_size = parse_value(key, value)?,
        "t_c" => cfg.t_c = parse_value(key, value)?,
        "t_task" => cfg.t_task = parse_value(key, value)?,
        "buffer_capacity" => cfg.buffer_capacity = parse_value(key, value)?,
        "k_rel" => cfg.k_rel = parse_value(key, value)?,
        "k_nov" => cfg.k_nov = parse_value(key, value)?,
        "epsilon" => cfg.epsilon = parse_value(key, value)?,
        "csc_gain" => cfg.csc_gain = parse_value(key, value)?,
        "eta_m" => cfg.eta_m = parse_value(key, value)?,
        "mutation_rate" => cfg.mutation_rate = parse_value(key, value)?,
        "latent_dim" => cfg.latent_dim = parse_value(key, value)?,
        "encoder_hidden" => cfg.encoder_hidden = parse_value(key, value)?,
        "encoder_epochs" => cfg.encoder_epochs = parse_value(key, value)?,
        "encoder_batch_size" => cfg.encoder_batch_size = parse_value(key, value)?,
        "encoder_learning_rate" => cfg.encoder_learning_rate = parse_value(key, value)?,
        "seed" => cfg.seed = parse_value(key, value)?,
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        _ => return Ok(false),
    }
    Ok(true)
}

/// Every run field in a fixed order, floats in round-trip form.
pub fn config_pairs(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let f = io::fmt_f64;
    vec![
        ("variant", cfg.variant.name().to_string()),
        ("task", cfg.task.name().to_string()),
        ("env", cfg.env.clone()),
        ("iterations", cfg.iterations.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("initial_population", cfg.initial_population.to_string()),
        ("target_size", cfg.target_size.to_string()),
        ("t_c", cfg.t_c.to_string()),
        ("t_task", cfg.t_task.to_string()),
        ("buffer_capacity", cfg.buffer_capacity.to_string()),
        ("k_rel", cfg.k_rel.to_string()),
        ("k_nov", cfg.k_nov.to_string()),
        ("epsilon", f(cfg.epsilon)),
        ("csc_gain", f(cfg.csc_gain)),
        ("eta_m", f(cfg.eta_m)),
        ("mutation_rate", f(cfg.mutation_rate)),
        ("latent_dim", cfg.latent_dim.to_string()),
        ("encoder_hidden", cfg.encoder_hidden.to_string()),
        ("encoder_epochs", cfg.encoder_epochs.to_string()),
        ("encoder_batch_size", cfg.encoder_batch_size.to_string()),
        ("encoder_learning_rate", f(cfg.encoder_learning_rate)),
        ("seed", cfg.seed.to_string()),
        ("out_dir", cfg.out_dir.display().to_string()),
    ]
}

/// Command-line layer applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub desk: bool,
    pub variants: Option<Vec<Variant>>,
    pub tasks: Option<Vec<TaskId>>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    /// Extra `key=value` pairs, applied after the file.
    pub set: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub replication: usize,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub out: PathBuf,
    pub runs: Vec<RunSpec>,
}

pub fn run_dir_name(variant: Variant, task: TaskId, replication: usize) -> String {
    format!("{}_{}_rep{}", variant.name(), task.name(), replication)
}

/// Builds a campaign from config text plus the flag layer. Defaults apply to
/// every unset key; `desk` swaps in the desk-scale preset before the file
/// and flags are applied.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<Campaign> {
    let mut pairs = parse_pairs(text)?;
    pairs.extend(overrides.set.iter().cloned());

    let mut desk = overrides.desk;
    let mut variants = Variant::ALL.to_vec();
    let mut task_list = vec![TaskId::Forward];
    let mut reps = 1usize;
    let mut out = PathBuf::from("runs");
    let mut campaign_seed = 0u64;
    let mut run_keys = Vec::new();
    for (k, v) in pairs {
        match k.as_str() {
            "desk" => desk |= parse_value::<bool>(&k, &v)?,
            "variants" | "variant" => variants = parse_list(&k, &v)?,
            "tasks" | "task" => task_list = parse_list(&k, &v)?,
            "reps" => reps = parse_value(&k, &v)?,
            "out" | "out_dir" => out = PathBuf::from(v),
            "seed" => campaign_seed = parse_value(&k, &v)?,
            _ => run_keys.push((k, v)),
        }
    }
    if let Some(v) = &overrides.variants {
        variants = v.clone();
    }
    if let Some(t) = &overrides.tasks {
        task_list = t.clone();
    }
    if let Some(r) = overrides.reps {
        reps = r;
    }
    if let Some(o) = &overrides.out {
        out = o.clone();
    }
    if reps == 0 {
        return Err(Error::config("reps", "must be at least 1"));
    }

    let mut runs = Vec::new();
    for &variant in &variants {
        for &task in &task_list {
            for replication in 0..reps {
                let mut cfg = if desk {
                    ExperimentConfig::desk(variant, task)
                } else {
                    ExperimentConfig::new(variant, task)
                };
                for (k, v) in &run_keys {
                    if !apply_key(&mut cfg, k, v)? {
                        return Err(Error::config(k.as_str(), "unknown key"));
                    }
                }
                cfg.seed = run_seed(campaign_seed, variant, task, replication);
                cfg.out_dir = out.join(run_dir_name(variant, task, replication));
                cfg.validate()?;
                runs.push(RunSpec { replication, config: cfg });
            }
        }
    }
    Ok(Campaign { out, runs })
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<Campaign> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, overrides)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub replication: usize,
    pub version: String,
    pub wall_time_ms: u128,
    /// `None` when the run succeeded.
    pub error: Option<String>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("version={}\n", self.version));
        s.push_str(&format!("replication={}\n", self.replication));
        match &self.error {
            None => s.push_str("status=ok\n"),
            Some(e) => {
                s.push_str("status=failed\n");
                s.push_str(&format!("error={}\n", e.replace(['\n', '#'], " ")));
            }
        }
        s.push_str(&format!("wall_time_ms={}\n", self.wall_time_ms));
        for (k, v) in config_pairs(&self.config) {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let find = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let need = |key: &str| find(key).ok_or_else(|| Error::config(key, "missing from manifest"));
        let variant = parse_value("variant", need("variant")?)?;
        let task = parse_value("task", need("task")?)?;
        let mut config = ExperimentConfig::new(variant, task);
        let mut m = Manifest {
            config: config.clone(),
            replication: 0,
            version: String::new(),
            wall_time_ms: 0,
            error: None,
        };
        for (k, v) in &pairs {
            match k.as_str() {
                "version" => m.version = v.clone(),
                "replication" => m.replication = parse_value(k, v)?,
                "wall_time_ms" => m.wall_time_ms = parse_value(k, v)?,
                "status" => {
                    if v != "ok" && m.error.is_none() {
                        m.error = Some(String::new());
                    }
                }
                "error" => m.error = Some(v.clone()),
                _ => {
                    if !apply_key(&mut config, k, v)? {
                        return Err(Error::config(k.as_str(), "unknown key"));
                    }
                }
            }
        }
        m.config = config;
        Ok(m)
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Writes the five per-run artifacts into `cfg.out_dir`.
pub fn write_run(output: &RunOutput, params: &RoverParams, manifest: &Manifest) -> Result<()> {
    let dir = &output.config.out_dir;
    fs::create_dir_all(dir)?;
    io::write_metrics(&dir.join(METRICS_FILE), &output.log)?;
    io::write_archive(&dir.join(ARCHIVE_FILE), &output.container, params.genotype_dim())?;
    io::write_buffer(&dir.join(BUFFER_FILE), &output.buffer, output.container.dim())?;
    io::write_atomic(&dir.join(ENCODER_FILE), output.encoder.to_checkpoint().as_bytes())?;
    io::write_atomic(&dir.join(MANIFEST_FILE), manifest.render().as_bytes())
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub spec: RunSpec,
    pub error: Option<String>,
    pub scores: Vec<ScoreRow>,
}

#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub runs: Vec<RunReport>,
}

impl CampaignReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures() > 0)
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "run panicked".to_string())
}

fn execute_run(spec: &RunSpec, params: &RoverParams) -> RunReport {
    let start = Instant::now();
    let cfg = &spec.config;
    log::info!("starting {} seed {}", cfg.out_dir.display(), cfg.seed);
    let result = panic::catch_unwind(AssertUnwindSafe(|| evolution::run_experiment(cfg, params)))
        .unwrap_or_else(|p| Err(Error::config("run", panic_message(p))));
    let mut manifest = Manifest {
        config: cfg.clone(),
        replication: spec.replication,
        version: VERSION.to_string(),
        wall_time_ms: 0,
        error: None,
    };
    let (error, scores) = match result {
        Ok(output) => {
            manifest.wall_time_ms = start.elapsed().as_millis();
            let scores = output
                .log
                .rows
                .iter()
                .filter(|r| r.task_score.is_some())
                .map(|r| ScoreRow {
                    replication: spec.replication,
                    variant: cfg.variant.name().to_string(),
                    task: cfg.task.name().to_string(),
                    iteration: r.iteration,
                    task_score: r.task_score,
                    container_score: r.container_score,
                })
                .collect();
            match write_run(&output, params, &manifest) {
                Ok(()) => (None, scores),
                Err(e) => (Some(e.to_string()), Vec::new()),
            }
        }
        Err(e) => (Some(e.to_string()), Vec::new()),
    };
    if let Some(e) = &error {
        log::error!("run {} failed: {e}", cfg.out_dir.display());
        manifest.error = Some(e.clone());
        manifest.wall_time_ms = start.elapsed().as_millis();
        let written = fs::create_dir_all(&cfg.out_dir)
            .map_err(Error::from)
            .and_then(|_| io::write_atomic(&cfg.out_dir.join(MANIFEST_FILE), manifest.render().as_bytes()));
        if let Err(w) = written {
            log::error!("could not record failure manifest: {w}");
        }
    }
    RunReport {
        spec: spec.clone(),
        error,
        scores,
    }
}

/// Runs every config, `jobs` at a time, and writes the campaign score table.
/// Failed runs are recorded and do not stop the others.
pub fn run_campaign(campaign: &Campaign, params: &RoverParams, jobs: usize) -> Result<CampaignReport> {
    fs::create_dir_all(&campaign.out)?;
    let runs = exec::map_with_threads(&campaign.runs, jobs.max(1), |spec| execute_run(spec, params));
    let scores: Vec<ScoreRow> = runs.iter().flat_map(|r| r.scores.iter().cloned()).collect();
    io::write_scores(&campaign.out.join(SCORES_FILE), &scores)?;
    Ok(CampaignReport { runs })
}

/// Run directories under `root` holding a manifest, sorted by name.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn task_projection(task: TaskId) -> Projection {
    match task {
        TaskId::Navigation => Projection::FinalPosition,
        TaskId::Forward => Projection::DutyFactor,
        TaskId::HalfTurn => Projection::Heading,
    }
}

/// Recomputes coverage-per-minimum-fitness curves for every successful run
/// under `root` by replaying the archived genotypes, and writes them to
/// `root/coverage.csv`. Returns the rows written.
pub fn recompute_coverage(
    root: &Path,
    params: &RoverParams,
    resolution: usize,
    steps: usize,
) -> Result<Vec<(String, String, f64, f64)>> {
    if resolution == 0 {
        return Err(Error::config("coverage-grid", "must be at least 1"));
    }
    let mut rows = Vec::new();
    for dir in find_runs(root)? {
        let manifest = Manifest::parse(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if !manifest.succeeded() {
            log::warn!("skipping failed run {}", dir.display());
            continue;
        }
        let task = manifest.config.task;
        let records = io::read_archive(&dir.join(ARCHIVE_FILE))?;
        let replayed = exec::map(&records, |r| env::rollout(params, &r.genotype));
        let projection = task_projection(task);
        let mut points = Vec::with_capacity(records.len());
        for res in replayed {
            let (_, summary) = res?;
            points.push((projection.project(&summary), env::fitness(task, &summary)));
        }
        let (lo, hi) = task.fitness_range(params);
        let curve = tasks::coverage_per_min_fitness(
            points.iter().map(|(p, f)| (p.as_slice(), *f)),
            &projection.grid(resolution),
            &tasks::default_f_mins(lo, hi, steps),
        );
        let run = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for (f, c) in curve {
            rows.push((run.clone(), manifest.config.variant.name().to_string(), f, c));
        }
    }
    io::write_coverage(&root.join(COVERAGE_FILE), &rows)?;
    Ok(rows)
}
