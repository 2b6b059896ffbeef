//! Unstructured archive.
//!
//! Candidates farther than `d_min` from their nearest member (under the
//! container's possibly directional metric) are added; closer candidates may
//! replace that nearest member when they epsilon-dominate it on novelty and,
//! for variants that have one, fitness. `d_min` is steered so that the
//! archive hovers around a target size, and the archive is periodically
//! rebuilt from scratch under the current threshold.

use std::cmp::Ordering;

use crate::env::{EnvSummary, SensoryData};
use crate::error::{Error, Result};
use crate::exec;
use crate::relevance::{mean_of_smallest, DistanceMetric};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_K_NOV: usize = 15;
pub const DEFAULT_CSC_GAIN: f64 = 0.1;
pub const D_MIN_LO: f64 = 1e-6;
pub const D_MIN_HI: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: u64,
    /// Id of the individual this one was mutated from; `None` for the
    /// random initial batch.
    pub parent: Option<u64>,
    pub genotype: Vec<f64>,
    pub sensory: SensoryData,
    pub summary: EnvSummary,
    pub descriptor: Vec<f64>,
    pub fitness: f64,
    pub relevance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    Replaced(u64),
    Rejected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContainerParams {
    pub target_size: usize,
    pub epsilon: f64,
    pub k_nov: usize,
    /// When false the fitness clause of the dominance test is dropped.
    pub uses_fitness: bool,
    pub csc_gain: f64,
    pub d_min_bounds: (f64, f64),
}

impl Default for ContainerParams {
    fn default() -> Self {
        Self {
            target_size: 500,
            epsilon: DEFAULT_EPSILON,
            k_nov: DEFAULT_K_NOV,
            uses_fitness: true,
            csc_gain: DEFAULT_CSC_GAIN,
            d_min_bounds: (D_MIN_LO, D_MIN_HI),
        }
    }
}

/// `new` is within epsilon of `old` (relative, sign-safe).
fn within_epsilon(new: f64, old: f64, epsilon: f64) -> bool {
    if old.is_infinite() {
        new >= old
    } else {
        new >= old - epsilon * old.abs()
    }
}

/// Epsilon-dominance of `(novelty, fitness)` pairs. With `uses_fitness`
/// false only novelty is compared.
pub fn epsilon_dominates(
    new: (f64, f64),
    old: (f64, f64),
    epsilon: f64,
    uses_fitness: bool,
) -> bool {
    let (new_nov, new_fit) = new;
    let (old_nov, old_fit) = old;
    if !within_epsilon(new_nov, old_nov, epsilon) {
        return false;
    }
    if !uses_fitness {
        return new_nov > old_nov;
    }
    within_epsilon(new_fit, old_fit, epsilon) && (new_nov > old_nov || new_fit > old_fit)
}

/// Initial threshold: a tenth of the diagonal of the descriptors' bounding box.
pub fn initial_d_min<'a, I>(descriptors: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for d in descriptors {
        if lo.is_empty() {
            lo = d.to_vec();
            hi = d.to_vec();
            continue;
        }
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(d) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    let diag = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (h - l) * (h - l))
        .sum::<f64>()
        .sqrt();
    (0.1 * diag).clamp(D_MIN_LO, D_MIN_HI)
}

#[derive(Clone, Debug)]
pub struct Container {
    dim: usize,
    members: Vec<Individual>,
    d_min: f64,
    metric: DistanceMetric,
    params: ContainerParams,
}

impl Container {
    pub fn new(dim: usize, d_min: f64, metric: DistanceMetric, params: ContainerParams) -> Self {
        let (lo, hi) = params.d_min_bounds;
        Self {
            dim,
            members: Vec::new(),
            d_min: d_min.clamp(lo, hi),
            metric,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn params(&self) -> &ContainerParams {
        &self.params
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn get(&self, id: u64) -> Option<&Individual> {
        self.members.iter().find(|m| m.id == id)
    }

    /// Members sorted by id.
    pub fn sorted_by_id(&self) -> Vec<&Individual> {
        let mut v: Vec<&Individual> = self.members.iter().collect();
        v.sort_by_key(|m| m.id);
        v
    }

    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.members.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        ids
    }

    pub(crate) fn set_relevances(&mut self, scores: &[f64]) {
        debug_assert_eq!(scores.len(), self.members.len());
        for (m, &r) in self.members.iter_mut().zip(scores) {
            m.relevance = r;
        }
    }

    /// Replaces every member's descriptor in order. Dimension changes
    /// are rejected.
    pub(crate) fn update_descriptors(&mut self, new: Vec<Vec<f64>>) -> Result<()> {
        if let Some(bad) = new.iter().find(|d| d.len() != self.dim) {
            return Err(Error::Dimension {
                expected: self.dim,
                got: bad.len(),
            });
        }
        for (m, d) in self.members.iter_mut().zip(new) {
            m.descriptor = d;
        }
        Ok(())
    }

    fn distances_from(&self, descriptor: &[f64], relevance: f64) -> Vec<f64> {
        let metric = self.metric;
        exec::map(&self.members, |m| metric.eval(descriptor, relevance, &m.descriptor))
    }

    /// The `n` members closest to `descriptor` as seen from a point of the
    /// given relevance. Ties go to the lower id.
    pub fn nearest(&self, descriptor: &[f64], relevance: f64, n: usize) -> Vec<&Individual> {
        let dists = self.distances_from(descriptor, relevance);
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_by(|&a, &b| {
            dists[a]
                .total_cmp(&dists[b])
                .then(self.members[a].id.cmp(&self.members[b].id))
        });
        order.into_iter().take(n).map(|i| &self.members[i]).collect()
    }

    /// Index and distance of the nearest member (ties to lower id).
    fn nearest_index(&self, descriptor: &[f64], relevance: f64) -> Option<(usize, f64)> {
        let dists = self.distances_from(descriptor, relevance);
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in dists.iter().enumerate() {
            best = match best {
                None => Some((i, d)),
                Some((j, bd)) => match d.total_cmp(&bd) {
                    Ordering::Less => Some((i, d)),
                    Ordering::Equal if self.members[i].id < self.members[j].id => Some((i, d)),
                    _ => Some((j, bd)),
                },
            };
        }
        best
    }

    fn novelty_from(&self, descriptor: &[f64], relevance: f64, exclude: Option<u64>, k: usize) -> f64 {
        let metric = self.metric;
        let dists: Vec<f64> = self
            .members
            .iter()
            .filter(|m| Some(m.id) != exclude)
            .map(|m| metric.eval(descriptor, relevance, &m.descriptor))
            .collect();
        mean_of_smallest(dists, k).unwrap_or(f64::INFINITY)
    }

    /// Mean metric distance from `subject` to its `k_nov` nearest members,
    /// excluding `subject` itself. Returns `+inf` when no other member exists.
    pub fn novelty(&self, subject: &Individual, k_nov: usize) -> f64 {
        self.novelty_from(&subject.descriptor, subject.relevance, Some(subject.id), k_nov)
    }

    pub fn try_add(&mut self, candidate: Individual) -> Result<AddOutcome> {
        if candidate.descriptor.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: candidate.descriptor.len(),
            });
        }
        let Some((idx, dist)) = self.nearest_index(&candidate.descriptor, candidate.relevance)
        else {
            self.members.push(candidate);
            return Ok(AddOutcome::Added);
        };
        if dist > self.d_min {
            self.members.push(candidate);
            return Ok(AddOutcome::Added);
        }

        let k = self.params.k_nov;
        let incumbent = &self.members[idx];
        let new_nov = self.novelty_from(&candidate.descriptor, candidate.relevance, None, k);
        let old_nov = self.novelty(incumbent, k);
        if epsilon_dominates(
            (new_nov, candidate.fitness),
            (old_nov, incumbent.fitness),
            self.params.epsilon,
            self.params.uses_fitness,
        ) {
            let old_id = incumbent.id;
            self.members[idx] = candidate;
            Ok(AddOutcome::Replaced(old_id))
        } else {
            Ok(AddOutcome::Rejected)
        }
    }

    /// Proportional adjustment of `d_min` toward the target size, followed by
    /// a full rebuild when `period_elapsed`.
    pub fn manage_size(&mut self, period_elapsed: bool) {
        let target = self.params.target_size as f64;
        let error = (self.members.len() as f64 - target) / target;
        let (lo, hi) = self.params.d_min_bounds;
        self.d_min = (self.d_min * (1.0 + self.params.csc_gain * error)).clamp(lo, hi);
        if period_elapsed {
            self.rebuild();
        }
    }

    /// Removes every member and re-inserts them under the current `d_min`,
    /// most novel first.
    pub fn rebuild(&mut self) {
        let k = self.params.k_nov;
        let novelties: Vec<f64> = {
            let this = &*self;
            exec::map(&this.members, |m| this.novelty(m, k))
        };
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_by(|&a, &b| {
            novelties[b]
                .total_cmp(&novelties[a])
                .then(self.members[a].id.cmp(&self.members[b].id))
        });
        let mut old: Vec<Option<Individual>> =
            std::mem::take(&mut self.members).into_iter().map(Some).collect();
        for i in order {
            let ind = old[i].take().expect("each index visited once");
            // dimensions were validated on first insertion
            let _ = self.try_add(ind);
        }
    }

    /// Sum of `fitness - floor` over members.
    pub fn qd_score(&self, floor: f64) -> f64 {
        self.members.iter().map(|m| m.fitness - floor).sum()
    }

    pub fn mean_fitness(&self) -> Option<f64> {
        if self.members.is_empty() {
            None
        } else {
            Some(self.members.iter().map(|m| m.fitness).sum::<f64>() / self.members.len() as f64)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn container(d_min: f64) -> Container {
        Container::new(2, d_min, DistanceMetric::euclidean(), ContainerParams::default())
    }

    #[test]
    fn try_add_examples() {
        let mut c = container(1.0);
        assert_eq!(c.try_add(individual(0, &[0.0, 0.0])).unwrap(), AddOutcome::Added);
        assert_eq!(c.try_add(individual(1, &[2.0, 0.0])).unwrap(), AddOutcome::Added);
        assert_eq!(c.len(), 2);
        let err = c.try_add(individual(2, &[1.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, got: 1 }));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn replacement_on_equal_novelty_and_better_fitness() {
        assert!(epsilon_dominates((0.5, 2.0), (0.5, 1.0), 0.05, true));

        // member n at origin, neighbour m at (-0.5, 0); with k_nov = 1 the
        // candidate at (0.5, 0) and n both have novelty 0.5
        let params = ContainerParams {
            k_nov: 1,
            ..ContainerParams::default()
        };
        let mut c = Container::new(2, 1.0, DistanceMetric::euclidean(), params);
        c.try_add(with_fitness(individual(0, &[0.0, 0.0]), 1.0)).unwrap();
        c.members.push(with_fitness(individual(1, &[-0.5, 0.0]), 1.0));
        let cand = with_fitness(individual(2, &[0.5, 0.0]), 2.0);
        assert_eq!(c.novelty(c.get(0).unwrap(), 1), 0.5);
        assert_eq!(c.try_add(cand).unwrap(), AddOutcome::Replaced(0));
        assert_eq!(c.ids(), vec![1, 2]);

        let weaker = with_fitness(individual(3, &[0.45, 0.0]), 0.5);
        assert_eq!(c.try_add(weaker).unwrap(), AddOutcome::Rejected);
    }

    #[test]
    fn novelty_examples() {
        let mut c = container(0.1);
        c.try_add(individual(0, &[0.0, 0.0])).unwrap();
        assert_eq!(c.novelty(&individual(9, &[3.0, 0.0]), 15), 3.0);
        assert_eq!(c.novelty(c.get(0).unwrap(), 15), f64::INFINITY);
        c.try_add(individual(1, &[1.0, 0.0])).unwrap();
        c.try_add(individual(2, &[10.0, 0.0])).unwrap();
        assert_eq!(c.novelty(&individual(9, &[0.5, 0.0]), 2), 0.5);
    }

    #[test]
    fn nearest_examples() {
        let mut c = container(0.1);
        for (i, x) in [0.0, 1.0, 2.0].iter().enumerate() {
            c.try_add(individual(i as u64, &[*x, 0.0])).unwrap();
        }
        let n = c.nearest(&[0.9, 0.0], 1.0, 1);
        assert_eq!(n[0].id, 1);
        let all: Vec<u64> = c.nearest(&[2.1, 0.0], 1.0, 10).iter().map(|m| m.id).collect();
        assert_eq!(all, vec![2, 1, 0]);
        let tie: Vec<u64> = c.nearest(&[0.5, 0.0], 1.0, 2).iter().map(|m| m.id).collect();
        assert_eq!(tie, vec![0, 1]);
        assert!(container(1.0).nearest(&[0.0, 0.0], 1.0, 3).is_empty());
    }

    #[test]
    fn csc_law() {
        let params = ContainerParams {
            target_size: 500,
            ..ContainerParams::default()
        };
        let mut c = Container::new(2, 1.0, DistanceMetric::euclidean(), params);
        for i in 0..500 {
            c.members.push(individual(i, &[i as f64, 0.0]));
        }
        c.manage_size(false);
        assert_eq!(c.d_min(), 1.0);
        for i in 500..600 {
            c.members.push(individual(i, &[i as f64, 0.0]));
        }
        c.manage_size(false);
        assert!((c.d_min() - 1.02).abs() < 1e-12);
    }

    #[test]
    fn rebuild_keeps_separated_members() {
        let params = ContainerParams {
            target_size: 3,
            ..ContainerParams::default()
        };
        let mut c = Container::new(2, 1.0, DistanceMetric::euclidean(), params);
        for (i, p) in [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]].iter().enumerate() {
            c.try_add(individual(i as u64, p)).unwrap();
        }
        c.manage_size(true);
        assert_eq!(c.ids(), vec![0, 1, 2]);

        let mut single = container(1.0);
        single.try_add(individual(7, &[0.0, 0.0])).unwrap();
        single.rebuild();
        assert_eq!(single.ids(), vec![7]);
    }

    #[test]
    fn initial_threshold() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![1.0, 4.0]];
        let d = initial_d_min(pts.iter().map(|p| p.as_slice()));
        assert!((d - 0.5).abs() < 1e-12);
        assert_eq!(initial_d_min(std::iter::once(&[1.0, 1.0][..])), D_MIN_LO);
    }

    /// Uniform random candidates in a box: the size settles within 20% of
    /// the target after a burn-in of 50 rebuild periods.
    #[test]
    fn size_control_converges() {
        let target = 200;
        let period = 10;
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = ContainerParams {
                target_size: target,
                ..ContainerParams::default()
            };
            let mut c = Container::new(2, 0.5, DistanceMetric::euclidean(), params);
            let mut id = 0;
            for iter in 1..=(100 * period) {
                for _ in 0..32 {
                    let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    c.try_add(individual(id, &p)).unwrap();
                    id += 1;
                }
                c.manage_size(iter % period == 0);
                if iter > 50 * period {
                    let n = c.len() as f64;
                    assert!(
                        (0.8 * target as f64..=1.2 * target as f64).contains(&n),
                        "seed {seed} iter {iter}: size {n}"
                    );
                }
            }
        }
    }

    fn brute_novelty(points: &[(Vec<f64>, f64)], subject: usize, k: usize, metric: DistanceMetric) -> f64 {
        let (sd, sr) = &points[subject];
        let mut all: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != subject)
            .map(|(_, (d, _))| metric.eval(sd, *sr, d))
            .collect();
        if all.is_empty() {
            return f64::INFINITY;
        }
        all.sort_by(f64::total_cmp);
        let k = k.min(all.len());
        all[..k].iter().sum::<f64>() / k as f64
    }

    fn arb_points() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
        prop::collection::vec(
            (prop::collection::vec(-5.0f64..5.0, 3), 0.01f64..10.0),
            1..60,
        )
    }

    proptest! {
        #[test]
        fn novelty_matches_brute_force(points in arb_points(), k in 1usize..20) {
            let metric = DistanceMetric::relevance_weighted(15);
            let mut c = Container::new(3, 1.0, metric, ContainerParams::default());
            for (i, (d, r)) in points.iter().enumerate() {
                let mut ind = individual(i as u64, d);
                ind.relevance = *r;
                c.members.push(ind);
            }
            for i in 0..points.len() {
                let m = c.get(i as u64).unwrap();
                prop_assert_eq!(c.novelty(m, k).to_bits(), brute_novelty(&points, i, k, metric).to_bits());
            }
        }

        #[test]
        fn zero_epsilon_is_strict_dominance(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let strict = a >= c && b >= d && (a > c || b > d);
            prop_assert_eq!(epsilon_dominates((a, b), (c, d), 0.0, true), strict);
            prop_assert_eq!(epsilon_dominates((a, b), (c, d), 0.0, false), a > c);
        }

        #[test]
        fn insertion_is_deterministic(points in arb_points(), d_min in 0.1f64..3.0) {
            let run = || {
                let mut c = Container::new(3, d_min, DistanceMetric::relevance_weighted(15), ContainerParams::default());
                let outcomes: Vec<AddOutcome> = points
                    .iter()
                    .enumerate()
                    .map(|(i, (d, r))| {
                        let mut ind = with_fitness(individual(i as u64, d), d[0]);
                        ind.relevance = *r;
                        c.try_add(ind).unwrap()
                    })
                    .collect();
                (outcomes, c.ids())
            };
            prop_assert_eq!(run(), run());
        }

        #[test]
        fn fitness_ignored_without_fitness_clause(points in arb_points(), seed in 0u64..1000) {
            let params = ContainerParams { uses_fitness: false, ..ContainerParams::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = |fit: &mut dyn FnMut() -> f64| {
                let mut c = Container::new(3, 1.0, DistanceMetric::euclidean(), params);
                let outcomes: Vec<AddOutcome> = points
                    .iter()
                    .enumerate()
                    .map(|(i, (d, _))| c.try_add(with_fitness(individual(i as u64, d), fit())).unwrap())
                    .collect();
                c.manage_size(true);
                (outcomes, c.ids())
            };
            let base = run(&mut || 0.0);
            let fuzzed = run(&mut || rng.gen_range(-1e3..1e3));
            prop_assert_eq!(base, fuzzed);
        }

        #[test]
        fn reinsertion_reproduces_member_set(points in arb_points(), d_min in 0.1f64..3.0) {
            let params = ContainerParams { target_size: 10, ..ContainerParams::default() };
            let mut c = Container::new(3, d_min, DistanceMetric::relevance_weighted(15), params);
            for (i, (d, r)) in points.iter().enumerate() {
                let mut ind = individual(i as u64, d);
                ind.relevance = *r;
                c.try_add(ind).unwrap();
            }
            c.rebuild();
            let mut again = Container::new(3, c.d_min(), c.metric(), params);
            for m in c.members() {
                again.try_add(m.clone()).unwrap();
            }
            prop_assert_eq!(again.ids(), c.ids());
        }
    }
}
