//! Downstream tasks: solvers that pick relevant individuals out of a
//! container, the task and container scores, and grid-coverage metrics.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::archive::{Container, Individual};
use crate::env::{wrap_angle, EnvSummary, TaskId};
use crate::error::{Error, Result};
use crate::relevance::euclidean;

/// Number of individuals returned by the ranking solvers.
pub const TOP_K: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavigationSettings {
    pub tolerance: f64,
    pub max_actions: usize,
    pub goal_count: usize,
    /// Distance between successive scoring goals.
    pub goal_spacing: f64,
    /// Distance of the random goal used when the solver feeds the buffer.
    pub solve_distance: f64,
}

impl Default for NavigationSettings {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            max_actions: 20,
            goal_count: 50,
            goal_spacing: 2.0,
            solve_distance: 2.0 * 5.0 / 7.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    /// Pose reached by executing a behaviour whose episode, started at the
    /// origin facing +x, ended at `step`.
    pub fn then(&self, step: &EnvSummary) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * step.x - s * step.y,
            y: self.y + s * step.x + c * step.y,
            theta: wrap_angle(self.theta + step.theta),
        }
    }

    fn distance_to(&self, goal: (f64, f64)) -> f64 {
        ((self.x - goal.0).powi(2) + (self.y - goal.1).powi(2)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NavigationResult<'a> {
    pub actions: Vec<&'a Individual>,
    pub reached: bool,
    pub end: Pose,
}

/// Greedy repertoire chaining: repeatedly executes the member whose
/// displacement brings the rover closest to `goal`, until within
/// `tolerance` or `max_actions` were spent.
pub fn solve_navigation_from<'a>(
    container: &'a Container,
    start: Pose,
    goal: (f64, f64),
    tolerance: f64,
    max_actions: usize,
) -> Result<NavigationResult<'a>> {
    if container.is_empty() {
        return Err(Error::EmptyContainer);
    }
    let mut pose = start;
    let mut actions = Vec::new();
    while pose.distance_to(goal) >= tolerance && actions.len() < max_actions {
        let mut best: Option<(&Individual, Pose, f64)> = None;
        for m in container.members() {
            let next = pose.then(&m.summary);
            let d = next.distance_to(goal);
            let better = match best {
                None => true,
                Some((b, _, bd)) => d < bd || (d == bd && m.id < b.id),
            };
            if better {
                best = Some((m, next, d));
            }
        }
        let (m, next, _) = best.expect("container is non-empty");
        actions.push(m);
        pose = next;
    }
    Ok(NavigationResult {
        reached: pose.distance_to(goal) < tolerance,
        actions,
        end: pose,
    })
}

pub fn solve_navigation(
    container: &Container,
    goal: (f64, f64),
    tolerance: f64,
    max_actions: usize,
) -> Result<NavigationResult<'_>> {
    solve_navigation_from(container, Pose::default(), goal, tolerance, max_actions)
}

/// Successive scoring goals, each `spacing` away from the previous one in a
/// random direction, starting from the origin.
pub fn navigation_goals(seed: u64, count: usize, spacing: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e61_765f_676f_616c);
    let mut at = (0.0, 0.0);
    (0..count)
        .map(|_| {
            let phi = rng.gen_range(-PI..PI);
            at = (at.0 + spacing * phi.cos(), at.1 + spacing * phi.sin());
            at
        })
        .collect()
}

/// Negated mean number of actions needed to visit `goals` in order, an
/// unreached goal costing `max_actions`.
pub fn navigation_task_score(
    container: &Container,
    goals: &[(f64, f64)],
    tolerance: f64,
    max_actions: usize,
) -> Result<f64> {
    if goals.is_empty() {
        return Ok(0.0);
    }
    let mut pose = Pose::default();
    let mut total = 0usize;
    for &goal in goals {
        let res = solve_navigation_from(container, pose, goal, tolerance, max_actions)?;
        total += if res.reached { res.actions.len() } else { max_actions };
        pose = res.end;
    }
    Ok(-(total as f64) / goals.len() as f64)
}

fn top_by_key<F>(container: &Container, key: F) -> Vec<&Individual>
where
    F: Fn(&Individual) -> f64,
{
    let mut ranked: Vec<(&Individual, f64)> = container.members().iter().map(|m| (m, key(m))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
    ranked.into_iter().take(TOP_K).map(|(m, _)| m).collect()
}

pub fn half_turn_key(summary: &EnvSummary) -> f64 {
    -wrap_angle(summary.theta - PI).abs()
}

/// The members reaching the furthest along +x.
pub fn solve_top_displacement(container: &Container) -> Vec<&Individual> {
    top_by_key(container, |m| m.summary.x)
}

/// The members whose final heading is closest to pi.
pub fn solve_half_turn(container: &Container) -> Vec<&Individual> {
    top_by_key(container, |m| half_turn_key(&m.summary))
}

/// Runs the solver of `task` and returns the individuals it used. The
/// navigation solver heads for a random goal drawn from `rng`.
pub fn run_solver<'a, R: Rng>(
    task: TaskId,
    container: &'a Container,
    nav: &NavigationSettings,
    rng: &mut R,
) -> Result<Vec<&'a Individual>> {
    match task {
        TaskId::Forward => Ok(solve_top_displacement(container)),
        TaskId::HalfTurn => Ok(solve_half_turn(container)),
        TaskId::Navigation => {
            let phi = rng.gen_range(-PI..PI);
            let goal = (nav.solve_distance * phi.cos(), nav.solve_distance * phi.sin());
            Ok(solve_navigation(container, goal, nav.tolerance, nav.max_actions)?.actions)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub relevant_ids: Vec<u64>,
    pub task_score: Option<f64>,
    pub container_score: f64,
}

/// Grid over a projected descriptor space.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, resolution: usize) -> Self {
        Self::rect((lo, hi), (lo, hi), resolution)
    }

    pub fn rect(x: (f64, f64), y: (f64, f64), resolution: usize) -> Self {
        Self {
            lo: vec![x.0, y.0],
            hi: vec![x.1, y.1],
            resolution: vec![resolution, resolution],
        }
    }

    pub fn cells(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Flat cell index; points outside the bounds land in the edge cells.
    pub fn cell(&self, point: &[f64]) -> usize {
        let mut idx = 0;
        for d in 0..self.resolution.len() {
            let res = self.resolution[d];
            let t = (point[d] - self.lo[d]) / (self.hi[d] - self.lo[d]);
            let i = ((t * res as f64).floor().max(0.0) as usize).min(res - 1);
            idx = idx * res + i;
        }
        idx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    pub spec: GridSpec,
    pub counts: Vec<u32>,
    pub best_fitness: Vec<f64>,
}

impl CoverageGrid {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.cells();
        Self {
            spec,
            counts: vec![0; n],
            best_fitness: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn insert(&mut self, point: &[f64], fitness: f64) {
        let c = self.spec.cell(point);
        self.counts[c] += 1;
        self.best_fitness[c] = self.best_fitness[c].max(fitness);
    }

    pub fn coverage(&self) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 / self.counts.len() as f64
    }

    /// Fraction of cells holding at least one point with fitness > `f_min`.
    pub fn coverage_above(&self, f_min: f64) -> f64 {
        let n = self
            .counts
            .iter()
            .zip(&self.best_fitness)
            .filter(|(&c, &f)| c > 0 && f > f_min)
            .count();
        n as f64 / self.counts.len() as f64
    }
}

/// Hand-coded spaces containers can be projected into for diversity analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// (duty-factor analogue, mean |turn rate|)
    DutyFactor,
    /// (x_T, y_T)
    FinalPosition,
    /// (sin theta_T, cos theta_T)
    Heading,
}

impl Projection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "duty" | "duty-factor" => Ok(Projection::DutyFactor),
            "position" | "final-position" => Ok(Projection::FinalPosition),
            "heading" => Ok(Projection::Heading),
            other => Err(Error::config("projection", format!("unknown projection `{other}`"))),
        }
    }

    pub fn project(self, s: &EnvSummary) -> [f64; 2] {
        match self {
            Projection::DutyFactor => [s.duty, s.mean_abs_turn],
            Projection::FinalPosition => [s.x, s.y],
            Projection::Heading => [s.theta.sin(), s.theta.cos()],
        }
    }

    pub fn grid(self, resolution: usize) -> GridSpec {
        match self {
            Projection::DutyFactor => GridSpec::rect((0.0, 1.0), (0.0, PI), resolution),
            Projection::FinalPosition => GridSpec::square(-3.0, 3.0, resolution),
            Projection::Heading => GridSpec::square(-1.0, 1.0, resolution),
        }
    }
}

/// Coverage of `(point, fitness)` pairs above each threshold.
pub fn coverage_per_min_fitness<'a, I>(points: I, spec: &GridSpec, f_mins: &[f64]) -> Vec<(f64, f64)>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut grid = CoverageGrid::new(spec.clone());
    for (p, f) in points {
        grid.insert(p, f);
    }
    f_mins.iter().map(|&f| (f, grid.coverage_above(f))).collect()
}

pub fn container_coverage_per_min_fitness(
    container: &Container,
    projection: Projection,
    resolution: usize,
    f_mins: &[f64],
) -> Vec<(f64, f64)> {
    let pts: Vec<([f64; 2], f64)> = container
        .members()
        .iter()
        .map(|m| (projection.project(&m.summary), m.fitness))
        .collect();
    coverage_per_min_fitness(
        pts.iter().map(|(p, f)| (p.as_slice(), *f)),
        &projection.grid(resolution),
        f_mins,
    )
}

/// `-inf` followed by `steps + 1` evenly spaced thresholds over the task's
/// fitness range.
pub fn default_f_mins(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    std::iter::once(f64::NEG_INFINITY)
        .chain((0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64))
        .collect()
}

/// Final-position grid used by the navigation container score.
pub fn navigation_grid() -> GridSpec {
    GridSpec::square(-3.0, 3.0, 50)
}

pub fn container_score(task: TaskId, container: &Container) -> f64 {
    if container.is_empty() {
        log::debug!("container score of an empty container reported as 0");
        return 0.0;
    }
    let n = container.len() as f64;
    match task {
        TaskId::Navigation => {
            let mut grid = CoverageGrid::new(navigation_grid());
            for m in container.members() {
                grid.insert(&[m.summary.x, m.summary.y], m.fitness);
            }
            grid.coverage()
        }
        TaskId::Forward => container.members().iter().map(|m| m.summary.x).sum::<f64>() / n,
        TaskId::HalfTurn => {
            container.members().iter().map(|m| half_turn_key(&m.summary)).sum::<f64>() / n
        }
    }
}

/// Task score; `None` for an empty container.
pub fn task_score(
    task: TaskId,
    container: &Container,
    goals: &[(f64, f64)],
    nav: &NavigationSettings,
) -> Option<f64> {
    if container.is_empty() {
        log::debug!("task score undefined on an empty container");
        return None;
    }
    let best = |key: &dyn Fn(&Individual) -> f64| {
        container.members().iter().map(key).fold(f64::NEG_INFINITY, f64::max)
    };
    match task {
        TaskId::Navigation => {
            navigation_task_score(container, goals, nav.tolerance, nav.max_actions).ok()
        }
        TaskId::Forward => Some(best(&|m| m.summary.x)),
        TaskId::HalfTurn => Some(best(&|m| half_turn_key(&m.summary))),
    }
}

/// Euclidean distance from each point to its nearest reference point.
pub fn nearest_reference_distances(points: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            reference
                .iter()
                .map(|r| euclidean(p, r))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Linear-interpolated percentile, `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Fraction of `distances` at most `radius`.
pub fn fraction_within(distances: &[f64], radius: f64) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.iter().filter(|&&d| d <= radius).count() as f64 / distances.len() as f64
}
