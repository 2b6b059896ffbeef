//! Variation operators, variant wiring and the main quality-diversity loop.
//!
//! Every variant shares the same loop: uniform selection from the container,
//! polynomial mutation, parallel evaluation on the rover, and serialized
//! insertion. Variants differ in where descriptors come from, whether the
//! archive compares fitness, and whether a task solver feeds a relevance
//! buffer that distorts the archive metric.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::archive::{self, AddOutcome, Container, ContainerParams, Individual};
use crate::encoder::{self, Encoder, TrainParams};
use crate::env::{self, EnvSummary, RoverParams, SensoryData, TaskId};
use crate::error::{Error, Result};
use crate::exec;
use crate::relevance::{self, DistanceMetric, RelevanceBuffer, NEUTRAL_RELEVANCE};
use crate::tasks::{self, NavigationSettings};

const GENE_LO: f64 = -1.0;
const GENE_HI: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Ruda,
    Aurora,
    RMes,
    Mes,
    HandCoded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescriptorSource {
    /// Latent code of the autoencoder.
    Latent,
    /// Time-average of each sensory channel.
    MeanStreams,
    /// The task's hand-coded descriptor.
    HandCoded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantSpec {
    pub descriptor: DescriptorSource,
    pub uses_relevance: bool,
    pub uses_fitness: bool,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Ruda,
        Variant::Aurora,
        Variant::RMes,
        Variant::Mes,
        Variant::HandCoded,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ruda => "RUDA",
            Variant::Aurora => "AURORA",
            Variant::RMes => "R-MeS",
            Variant::Mes => "MeS",
            Variant::HandCoded => "HC",
        }
    }

    pub fn spec(self) -> VariantSpec {
        use DescriptorSource::*;
        let (descriptor, uses_relevance, uses_fitness) = match self {
            Variant::Ruda => (Latent, true, false),
            Variant::Aurora => (Latent, false, true),
            Variant::RMes => (MeanStreams, true, false),
            Variant::Mes => (MeanStreams, false, true),
            Variant::HandCoded => (HandCoded, false, true),
        };
        VariantSpec {
            descriptor,
            uses_relevance,
            uses_fitness,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ruda" => Ok(Variant::Ruda),
            "aurora" => Ok(Variant::Aurora),
            "rmes" => Ok(Variant::RMes),
            "mes" => Ok(Variant::Mes),
            "hc" | "handcoded" => Ok(Variant::HandCoded),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

/// Full hyperparameter record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub task: TaskId,
    pub env: String,
    pub iterations: u64,
    pub batch_size: usize,
    pub initial_population: usize,
    pub target_size: usize,
    /// Container rebuild period.
    pub t_c: u64,
    /// Task solver period.
    pub t_task: u64,
    pub buffer_capacity: usize,
    pub k_rel: usize,
    pub k_nov: usize,
    pub epsilon: f64,
    pub csc_gain: f64,
    pub eta_m: f64,
    pub mutation_rate: f64,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub encoder_epochs: usize,
    pub encoder_batch_size: usize,
    pub encoder_learning_rate: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Default target size: 1500 for navigation, 5000 otherwise.
pub fn default_target_size(task: TaskId) -> usize {
    match task {
        TaskId::Navigation => 1500,
        TaskId::Forward | TaskId::HalfTurn => 5000,
    }
}

pub const DESK_ITERATIONS: u64 = 2000;
pub const DESK_TARGET_SIZE: usize = 500;

impl ExperimentConfig {
    pub fn new(variant: Variant, task: TaskId) -> Self {
        Self {
            variant,
            task,
            env: "rover".to_string(),
            iterations: 15_000,
            batch_size: 64,
            initial_population: 100,
            target_size: default_target_size(task),
            t_c: 10,
            t_task: 10,
            buffer_capacity: relevance::DEFAULT_BUFFER_CAPACITY,
            k_rel: relevance::DEFAULT_K_REL,
            k_nov: archive::DEFAULT_K_NOV,
            epsilon: archive::DEFAULT_EPSILON,
            csc_gain: archive::DEFAULT_CSC_GAIN,
            eta_m: 10.0,
            mutation_rate: 0.3,
            latent_dim: encoder::DEFAULT_LATENT_DIM,
            encoder_hidden: encoder::DEFAULT_HIDDEN,
            encoder_epochs: encoder::DEFAULT_EPOCHS,
            encoder_batch_size: encoder::DEFAULT_BATCH_SIZE,
            encoder_learning_rate: encoder::DEFAULT_LEARNING_RATE,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }

    /// Desk-scale preset: 2000 iterations, target size 500.
    pub fn desk(variant: Variant, task: TaskId) -> Self {
        Self {
            iterations: DESK_ITERATIONS,
            target_size: DESK_TARGET_SIZE,
            ..Self::new(variant, task)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(Error::config(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("t_c", self.t_c)?;
        positive("t_task", self.t_task)?;
        positive("batch_size", self.batch_size as u64)?;
        positive("initial_population", self.initial_population as u64)?;
        positive("target_size", self.target_size as u64)?;
        positive("buffer_capacity", self.buffer_capacity as u64)?;
        positive("k_rel", self.k_rel as u64)?;
        positive("k_nov", self.k_nov as u64)?;
        positive("latent_dim", self.latent_dim as u64)?;
        positive("encoder_hidden", self.encoder_hidden as u64)?;
        positive("encoder_batch_size", self.encoder_batch_size as u64)?;
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return Err(Error::config("mutation_rate", "must lie in (0, 1]"));
        }
        if !(self.eta_m > 0.0 && self.eta_m.is_finite()) {
            return Err(Error::config("eta_m", "must be positive"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", "must lie in [0, 1)"));
        }
        if !(self.csc_gain > 0.0 && self.csc_gain.is_finite()) {
            return Err(Error::config("csc_gain", "must be positive"));
        }
        if !(self.encoder_learning_rate > 0.0 && self.encoder_learning_rate.is_finite()) {
            return Err(Error::config("encoder_learning_rate", "must be positive"));
        }
        if self.env != "rover" {
            return Err(Error::config("env", format!("unknown environment `{}`", self.env)));
        }
        Ok(())
    }

    fn train_params(&self) -> TrainParams {
        TrainParams {
            epochs: self.encoder_epochs,
            batch_size: self.encoder_batch_size,
            learning_rate: self.encoder_learning_rate,
        }
    }

    /// Descriptor dimension of the configured variant.
    pub fn descriptor_dim(&self, params: &RoverParams) -> usize {
        match self.variant.spec().descriptor {
            DescriptorSource::Latent => self.latent_dim,
            DescriptorSource::MeanStreams => params.channels(),
            DescriptorSource::HandCoded => 2,
        }
    }
}

/// Offset of a polynomial mutation for a uniform draw `u` in [0, 1).
pub fn polynomial_delta(u: f64, eta_m: f64) -> f64 {
    let power = 1.0 / (eta_m + 1.0);
    if u < 0.5 {
        (2.0 * u).powf(power) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(power)
    }
}

/// Mutates each gene with probability `rate` by a polynomial offset scaled to
/// the gene range, clamping back into [-1, 1].
pub fn polynomial_mutation<R: Rng>(genotype: &[f64], eta_m: f64, rate: f64, rng: &mut R) -> Vec<f64> {
    genotype
        .iter()
        .map(|&x| {
            if rng.gen::<f64>() < rate {
                let delta = polynomial_delta(rng.gen::<f64>(), eta_m);
                (x + (GENE_HI - GENE_LO) * delta).clamp(GENE_LO, GENE_HI)
            } else {
                x
            }
        })
        .collect()
}

/// Draws `n` members uniformly with replacement.
pub fn select_uniform<'a, R: Rng>(container: &'a Container, n: usize, rng: &mut R) -> Result<Vec<&'a Individual>> {
    if container.is_empty() {
        return Err(Error::EmptyContainer);
    }
    let members = container.members();
    Ok((0..n).map(|_| &members[rng.gen_range(0..members.len())]).collect())
}

pub fn compute_descriptor(
    spec: VariantSpec,
    task: TaskId,
    enc: &Encoder,
    sensory: &SensoryData,
    summary: &EnvSummary,
) -> Result<Vec<f64>> {
    match spec.descriptor {
        DescriptorSource::Latent => enc.encode(sensory),
        DescriptorSource::MeanStreams => Ok(sensory.channel_means()),
        DescriptorSource::HandCoded => Ok(env::hand_coded_bd(task, summary)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub container_size: usize,
    pub d_min: f64,
    pub mean_fitness: Option<f64>,
    pub qd_score: f64,
    pub task_score: Option<f64>,
    pub container_score: f64,
    pub encoder_update: bool,
    pub task_solve: bool,
    pub wall_time_ms: u128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
    /// Individuals whose evaluation failed and were dropped.
    pub discarded: usize,
    /// Encoder phases abandoned after a non-finite loss.
    pub aborted_encoder_phases: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub container: Container,
    pub buffer: RelevanceBuffer,
    pub encoder: Encoder,
    pub log: MetricsLog,
}

struct Evaluator<'a> {
    config: &'a ExperimentConfig,
    params: &'a RoverParams,
    spec: VariantSpec,
}

struct Evaluated {
    sensory: SensoryData,
    summary: EnvSummary,
    descriptor: Vec<f64>,
    fitness: f64,
    relevance: f64,
}

impl Evaluator<'_> {
    fn evaluate(&self, genotype: &[f64], enc: &Encoder, buffer: &RelevanceBuffer) -> Result<Evaluated> {
        let (sensory, summary) = env::rollout(self.params, genotype)?;
        let descriptor = compute_descriptor(self.spec, self.config.task, enc, &sensory, &summary)?;
        let fitness = env::fitness(self.config.task, &summary);
        let relevance = if self.spec.uses_relevance {
            buffer.relevance_score(&descriptor, self.config.k_rel)
        } else {
            NEUTRAL_RELEVANCE
        };
        Ok(Evaluated {
            sensory,
            summary,
            descriptor,
            fitness,
            relevance,
        })
    }

    /// Evaluates a batch in parallel against fixed encoder and buffer
    /// snapshots. Failed evaluations come back as `None`.
    fn evaluate_batch(
        &self,
        batch: Vec<(Vec<f64>, Option<u64>)>,
        enc: &Encoder,
        buffer: &RelevanceBuffer,
        next_id: &mut u64,
        log: &mut MetricsLog,
    ) -> Vec<Individual> {
        let results = exec::map(&batch, |(g, _)| self.evaluate(g, enc, buffer));
        let mut out = Vec::with_capacity(batch.len());
        for ((genotype, parent), res) in batch.into_iter().zip(results) {
            let id = *next_id;
            *next_id += 1;
            match res {
                Ok(e) => out.push(Individual {
                    id,
                    parent,
                    genotype,
                    sensory: e.sensory,
                    summary: e.summary,
                    descriptor: e.descriptor,
                    fitness: e.fitness,
                    relevance: e.relevance,
                }),
                Err(err) => {
                    log::warn!("evaluation of individual {id} failed: {err}");
                    log.discarded += 1;
                }
            }
        }
        out
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains the encoder on the container's sensory data, then refreshes every
/// descriptor that depends on it and rebuilds the container.
fn encoder_phase<R: Rng>(
    config: &ExperimentConfig,
    enc: &mut Encoder,
    container: &mut Container,
    buffer: &mut RelevanceBuffer,
    rng: &mut R,
    log: &mut MetricsLog,
) -> Result<()> {
    let data: Vec<&SensoryData> = container.members().iter().map(|m| &m.sensory).collect();
    let report = enc.train(&data, config.train_params(), rng)?;
    if report.aborted {
        log.aborted_encoder_phases += 1;
        return Ok(());
    }
    encoder::reencode_members(enc, container)?;
    if config.variant.spec().uses_relevance {
        buffer.refresh_descriptors(|s| enc.encode(s).expect("buffer entries share the input shape"));
        buffer.refresh_relevances(container, config.k_rel);
    }
    container.manage_size(true);
    Ok(())
}

/// Runs one experiment to completion.
pub fn run_experiment(config: &ExperimentConfig, params: &RoverParams) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let spec = config.variant.spec();
    let mut rng = rng_stream(config.seed, 0);
    let mut enc_rng = rng_stream(config.seed, 1);
    let mut solver_rng = rng_stream(config.seed, 2);
    let goals = tasks::navigation_goals(config.seed, NavigationSettings::default().goal_count, NavigationSettings::default().goal_spacing);
    let nav = NavigationSettings::default();
    let fitness_floor = config.task.fitness_range(params).0;
    let latent = spec.descriptor == DescriptorSource::Latent;

    let (channels, steps) = (params.channels(), params.samples());
    let mut enc = Encoder::new(channels, steps, config.encoder_hidden, config.latent_dim, &mut enc_rng);
    let mut buffer = RelevanceBuffer::new(config.buffer_capacity);
    let mut log = MetricsLog::default();
    let evaluator = Evaluator { config, params, spec };
    let mut next_id = 0u64;

    let metric = if spec.uses_relevance {
        DistanceMetric::relevance_weighted(config.k_rel)
    } else {
        DistanceMetric::euclidean()
    };
    let container_params = ContainerParams {
        target_size: config.target_size,
        epsilon: config.epsilon,
        k_nov: config.k_nov,
        uses_fitness: spec.uses_fitness,
        csc_gain: config.csc_gain,
        ..ContainerParams::default()
    };

    // Bootstrap: the random initial batch is iteration 0. Latent variants
    // train the encoder on it before computing descriptors.
    let initial: Vec<(Vec<f64>, Option<u64>)> = (0..config.initial_population)
        .map(|_| {
            let g = (0..params.genotype_dim()).map(|_| rng.gen_range(GENE_LO..=GENE_HI)).collect();
            (g, None)
        })
        .collect();
    if latent {
        let rollouts = exec::map(&initial, |(g, _)| env::rollout(params, g));
        let data: Vec<&SensoryData> = rollouts.iter().filter_map(|r| r.as_ref().ok()).map(|(s, _)| s).collect();
        let report = enc.train(&data, config.train_params(), &mut enc_rng)?;
        if report.aborted {
            log.aborted_encoder_phases += 1;
        }
    }
    let first = evaluator.evaluate_batch(initial, &enc, &buffer, &mut next_id, &mut log);
    let d_min = archive::initial_d_min(first.iter().map(|i| i.descriptor.as_slice()));
    let mut container = Container::new(config.descriptor_dim(params), d_min, metric, container_params);
    for ind in first {
        container.try_add(ind)?;
    }

    let record = |container: &Container,
                  iteration: u64,
                  task_score: Option<f64>,
                  encoder_update: bool,
                  task_solve: bool| MetricsRow {
        iteration,
        container_size: container.len(),
        d_min: container.d_min(),
        mean_fitness: container.mean_fitness(),
        qd_score: container.qd_score(fitness_floor),
        task_score,
        container_score: tasks::container_score(config.task, container),
        encoder_update,
        task_solve,
        wall_time_ms: start.elapsed().as_millis(),
    };
    log.rows.push(record(&container, 0, None, latent, false));

    for iter in 1..=config.iterations {
        // QD iteration
        let parents = select_uniform(&container, config.batch_size, &mut rng)?;
        let children: Vec<(Vec<f64>, Option<u64>)> = parents
            .iter()
            .map(|p| {
                let g = polynomial_mutation(&p.genotype, config.eta_m, config.mutation_rate, &mut rng);
                (g, Some(p.id))
            })
            .collect();
        let offspring = evaluator.evaluate_batch(children, &enc, &buffer, &mut next_id, &mut log);
        for child in offspring {
            let _: AddOutcome = container.try_add(child)?;
        }

        let encoder_update = latent && encoder::update_due(iter);
        if encoder_update {
            encoder_phase(config, &mut enc, &mut container, &mut buffer, &mut enc_rng, &mut log)?;
        }

        container.manage_size(iter % config.t_c == 0);

        let mut task_solve = false;
        let mut task_score = None;
        if iter % config.t_task == 0 {
            if spec.uses_relevance {
                let useful = tasks::run_solver(config.task, &container, &nav, &mut solver_rng)?;
                buffer.push_relevant(useful);
                buffer.refresh_relevances(&mut container, config.k_rel);
                task_solve = true;
            }
            task_score = tasks::task_score(config.task, &container, &goals, &nav);
        }
        log.rows.push(record(&container, iter, task_score, encoder_update, task_solve));
    }

    Ok(RunOutput {
        config: config.clone(),
        container,
        buffer,
        encoder: enc,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn variant_table() {
        let rows: Vec<(DescriptorSource, bool, bool)> = Variant::ALL
            .iter()
            .map(|v| {
                let s = v.spec();
                (s.descriptor, s.uses_relevance, s.uses_fitness)
            })
            .collect();
        use DescriptorSource::*;
        assert_eq!(
            rows,
            vec![
                (Latent, true, false),
                (Latent, false, true),
                (MeanStreams, true, false),
                (MeanStreams, false, true),
                (HandCoded, false, true),
            ]
        );
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn mutation_edge_cases() {
        let g: Vec<f64> = (0..20).map(|i| i as f64 / 10.0 - 1.0).collect();
        let mut r = rng();
        assert_eq!(polynomial_mutation(&g, 10.0, 0.0, &mut r), g);
        assert_eq!(polynomial_delta(0.5, 10.0), 0.0);
        assert_eq!(polynomial_delta(0.0, 10.0), -1.0);
        for _ in 0..200 {
            let m = polynomial_mutation(&g, 10.0, 1.0, &mut r);
            assert!(m.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn selection() {
        use crate::archive::test_support::individual;
        let mut c = Container::new(2, 1.0, DistanceMetric::euclidean(), ContainerParams::default());
        let mut r = rng();
        assert!(matches!(select_uniform(&c, 3, &mut r), Err(Error::EmptyContainer)));
        c.try_add(individual(4, &[0.0, 0.0])).unwrap();
        let picks = select_uniform(&c, 3, &mut r).unwrap();
        assert_eq!(picks.iter().map(|m| m.id).collect::<Vec<_>>(), vec![4, 4, 4]);
        assert!(select_uniform(&c, 0, &mut r).unwrap().is_empty());
    }

    #[test]
    fn selection_is_uniform() {
        use crate::archive::test_support::individual;
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut c = Container::new(1, 0.5, DistanceMetric::euclidean(), ContainerParams::default());
        for i in 0..100 {
            c.try_add(individual(i, &[i as f64])).unwrap();
        }
        let mut r = rng();
        let draws = 100_000;
        let mut counts = [0usize; 100];
        for m in select_uniform(&c, draws, &mut r).unwrap() {
            counts[m.id as usize] += 1;
        }
        let expected = draws as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn descriptors_by_source() {
        let p = RoverParams::default();
        let mut r = rng();
        let enc = Encoder::new(6, 30, 8, 10, &mut r);
        let constant = SensoryData::constant(6, 30, 0.25);
        let s = EnvSummary { x: 1.5, y: -0.5, ..EnvSummary::STATIONARY };
        let mes = compute_descriptor(Variant::Mes.spec(), TaskId::Forward, &enc, &constant, &s).unwrap();
        assert_eq!(mes, vec![0.25; 6]);
        assert_eq!(mes.len(), p.channels());
        let hc = compute_descriptor(Variant::HandCoded.spec(), TaskId::Navigation, &enc, &constant, &s).unwrap();
        assert_eq!(hc, vec![1.5, -0.5]);
        let lat = compute_descriptor(Variant::Ruda.spec(), TaskId::Forward, &enc, &constant, &s).unwrap();
        assert_eq!(lat.len(), 10);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::desk(Variant::Ruda, TaskId::Forward);
        assert!(c.validate().is_ok());
        c.mutation_rate = 1.5;
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "mutation_rate"));
        let mut c = ExperimentConfig::desk(Variant::Ruda, TaskId::Forward);
        c.t_task = 0;
        assert!(c.validate().is_err());
    }

    fn tiny(variant: Variant, task: TaskId, iterations: u64) -> ExperimentConfig {
        ExperimentConfig {
            iterations,
            batch_size: 16,
            initial_population: 30,
            target_size: 40,
            encoder_epochs: 3,
            encoder_hidden: 8,
            seed: 9,
            ..ExperimentConfig::new(variant, task)
        }
    }

    #[test]
    fn zero_iterations_keeps_bootstrap() {
        let p = RoverParams::default();
        let out = run_experiment(&tiny(Variant::Mes, TaskId::Forward, 0), &p).unwrap();
        assert_eq!(out.log.rows.len(), 1);
        assert!(out.container.len() <= 30 && !out.container.is_empty());
        assert!(out.container.members().iter().all(|m| m.id < 30 && m.parent.is_none()));
    }

    #[test]
    fn aurora_never_solves() {
        let p = RoverParams::default();
        let out = run_experiment(&tiny(Variant::Aurora, TaskId::Forward, 35), &p).unwrap();
        assert!(out.buffer.is_empty());
        assert!(out.log.rows.iter().all(|r| !r.task_solve));
        assert_eq!(out.container.metric(), DistanceMetric::euclidean());
        assert!(out.container.members().iter().all(|m| m.relevance == 1.0));
    }

    #[test]
    fn ruda_solves_every_t_task() {
        let p = RoverParams::default();
        let out = run_experiment(&tiny(Variant::Ruda, TaskId::Forward, 35), &p).unwrap();
        let solves: Vec<u64> = out.log.rows.iter().filter(|r| r.task_solve).map(|r| r.iteration).collect();
        assert_eq!(solves, vec![10, 20, 30]);
        let updates: Vec<u64> = out.log.rows.iter().filter(|r| r.encoder_update).map(|r| r.iteration).collect();
        assert_eq!(updates, vec![0, 10, 30]);
        assert_eq!(out.buffer.len(), 30);
        for m in out.container.members() {
            assert_eq!(m.descriptor.len(), 10);
            assert!(m.parent.is_none_or(|p| p < m.id));
            assert!((relevance::RELEVANCE_MIN..=relevance::RELEVANCE_MAX).contains(&m.relevance));
            assert!(m.genotype.iter().all(|g| (-1.0..=1.0).contains(g)));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = RoverParams::default();
        for (variant, task) in [(Variant::RMes, TaskId::Navigation), (Variant::Ruda, TaskId::HalfTurn), (Variant::HandCoded, TaskId::Forward)] {
            let cfg = tiny(variant, task, 25);
            let a = run_experiment(&cfg, &p).unwrap();
            let b = run_experiment(&cfg, &p).unwrap();
            let key = |o: &RunOutput| {
                o.container
                    .sorted_by_id()
                    .iter()
                    .map(|m| (m.id, m.descriptor.iter().map(|d| d.to_bits()).collect::<Vec<_>>(), m.fitness.to_bits()))
                    .collect::<Vec<_>>()
            };
            assert_eq!(key(&a), key(&b));
        }
    }
}
