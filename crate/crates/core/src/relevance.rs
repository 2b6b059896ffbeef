//! Task relevance: a circular buffer of individuals picked by a task solver,
//! the inverse-mean-distance relevance score derived from it, and the
//! directional metric that scales distances by the relevance of the point of
//! view.

use crate::archive::{Container, Individual};
use crate::env::SensoryData;
use crate::error::{Error, Result};
use crate::exec;

pub const DEFAULT_BUFFER_CAPACITY: usize = 200;
pub const DEFAULT_K_REL: usize = 15;
pub const RELEVANCE_MIN: f64 = 1e-3;
pub const RELEVANCE_MAX: f64 = 1e3;
/// Score used while the buffer is empty.
pub const NEUTRAL_RELEVANCE: f64 = 1.0;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Mean of the `k` smallest values, summed in ascending order.
pub(crate) fn mean_of_smallest(mut values: Vec<f64>, k: usize) -> Option<f64> {
    let k = k.min(values.len());
    if k == 0 {
        return None;
    }
    if k < values.len() {
        values.select_nth_unstable_by(k - 1, f64::total_cmp);
        values.truncate(k);
    }
    values.sort_unstable_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricMode {
    Euclidean,
    RelevanceWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceMetric {
    pub mode: MetricMode,
    pub k_rel: usize,
}

impl DistanceMetric {
    pub fn euclidean() -> Self {
        Self {
            mode: MetricMode::Euclidean,
            k_rel: DEFAULT_K_REL,
        }
    }

    pub fn relevance_weighted(k_rel: usize) -> Self {
        Self {
            mode: MetricMode::RelevanceWeighted,
            k_rel,
        }
    }

    /// Distance seen from `from_descriptor` whose relevance is `from_relevance`.
    /// The weight only depends on the first argument.
    #[inline]
    pub fn eval(&self, from_descriptor: &[f64], from_relevance: f64, to: &[f64]) -> f64 {
        let d = euclidean(from_descriptor, to);
        match self.mode {
            MetricMode::Euclidean => d,
            MetricMode::RelevanceWeighted => from_relevance * d,
        }
    }

    pub fn distance(&self, from: &Individual, to_descriptor: &[f64]) -> Result<f64> {
        if from.descriptor.len() != to_descriptor.len() {
            return Err(Error::Dimension {
                expected: from.descriptor.len(),
                got: to_descriptor.len(),
            });
        }
        Ok(self.eval(&from.descriptor, from.relevance, to_descriptor))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BufferEntry {
    /// Position in the overall push sequence.
    pub push_index: u64,
    pub id: u64,
    pub descriptor: Vec<f64>,
    pub genotype: Vec<f64>,
    pub sensory: SensoryData,
}

#[derive(Clone, Debug)]
pub struct RelevanceBuffer {
    capacity: usize,
    entries: Vec<BufferEntry>,
    write_cursor: usize,
    pushes: u64,
}

impl RelevanceBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            write_cursor: 0,
            pushes: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &BufferEntry> {
        let (newer, older) = if self.entries.len() < self.capacity {
            (&self.entries[..], &self.entries[..0])
        } else {
            let (a, b) = self.entries.split_at(self.write_cursor);
            (a, b)
        };
        older.iter().chain(newer.iter())
    }

    /// Appends every individual, overwriting the oldest entries when full.
    /// The same individual may be pushed any number of times.
    pub fn push_relevant<'a, I>(&mut self, individuals: I)
    where
        I: IntoIterator<Item = &'a Individual>,
    {
        for ind in individuals {
            let entry = BufferEntry {
                push_index: self.pushes,
                id: ind.id,
                descriptor: ind.descriptor.clone(),
                genotype: ind.genotype.clone(),
                sensory: ind.sensory.clone(),
            };
            self.pushes += 1;
            if self.entries.len() < self.capacity {
                self.entries.push(entry);
            } else {
                self.entries[self.write_cursor] = entry;
            }
            self.write_cursor = (self.write_cursor + 1) % self.capacity;
        }
    }

    /// Recomputes stored descriptors from the stored sensory data, e.g. after
    /// the encoder changed.
    pub fn refresh_descriptors<F>(&mut self, describe: F)
    where
        F: Fn(&SensoryData) -> Vec<f64>,
    {
        for entry in &mut self.entries {
            entry.descriptor = describe(&entry.sensory);
        }
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &[f64]> {
        self.iter_ordered().map(|e| e.descriptor.as_slice())
    }

    /// Relevance of a descriptor: the inverse of the mean Euclidean distance
    /// to its `k_rel` nearest buffer entries, clamped to
    /// `[RELEVANCE_MIN, RELEVANCE_MAX]`.
    pub fn relevance_score(&self, descriptor: &[f64], k_rel: usize) -> f64 {
        let distances: Vec<f64> = self
            .entries
            .iter()
            .map(|e| euclidean(&e.descriptor, descriptor))
            .collect();
        match mean_of_smallest(distances, k_rel) {
            None => NEUTRAL_RELEVANCE,
            Some(mean) => (1.0 / mean).clamp(RELEVANCE_MIN, RELEVANCE_MAX),
        }
    }

    /// Reassigns the relevance of every container member from the current
    /// buffer contents.
    pub fn refresh_relevances(&self, container: &mut Container, k_rel: usize) {
        let scores = exec::map(container.members(), |m| {
            self.relevance_score(&m.descriptor, k_rel)
        });
        container.set_relevances(&scores);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::test_support::individual;

    fn buffer_of(points: &[&[f64]]) -> RelevanceBuffer {
        let mut b = RelevanceBuffer::new(DEFAULT_BUFFER_CAPACITY);
        let inds: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, p)| individual(i as u64, p))
            .collect();
        b.push_relevant(&inds);
        b
    }

    #[test]
    fn relevance_examples() {
        let b = buffer_of(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(b.relevance_score(&[0.5, 0.0], 2), 2.0);
        let coincident = buffer_of(&[&[0.3, 0.3], &[0.3, 0.3]]);
        assert_eq!(coincident.relevance_score(&[0.3, 0.3], 2), RELEVANCE_MAX);
        assert_eq!(
            RelevanceBuffer::new(5).relevance_score(&[1.0, 2.0], 15),
            NEUTRAL_RELEVANCE
        );
    }

    #[test]
    fn reduced_neighbour_set_uses_all_entries() {
        let b = buffer_of(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let q = [0.0, 0.0];
        // brute force: distances 0, 3, 4 -> mean 7/3
        let expected = 1.0 / ((0.0 + 3.0 + 4.0) / 3.0);
        assert_eq!(b.relevance_score(&q, 15), expected);
    }

    #[test]
    fn distance_examples() {
        let mut a = individual(0, &[0.0, 0.0]);
        let m = DistanceMetric::relevance_weighted(15);
        a.relevance = 1.0;
        assert_eq!(m.distance(&a, &[3.0, 4.0]).unwrap(), 5.0);
        a.relevance = 2.0;
        assert_eq!(m.distance(&a, &[0.5, 0.0]).unwrap(), 1.0);
        assert_eq!(m.distance(&a, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(DistanceMetric::euclidean().distance(&a, &[0.5, 0.0]).unwrap(), 0.5);
        assert!(m.distance(&a, &[1.0]).is_err());
    }

    #[test]
    fn circular_overwrite() {
        let mut b = RelevanceBuffer::new(3);
        let inds: Vec<_> = (0..5).map(|i| individual(i, &[i as f64])).collect();
        b.push_relevant(&inds);
        let ids: Vec<u64> = b.iter_ordered().map(|e| e.id).collect();
        assert_eq!(ids, vec![2, 3, 4]);
        b.push_relevant(&[]);
        assert_eq!(b.len(), 3);
        b.push_relevant([&inds[0], &inds[0]]);
        let ids: Vec<u64> = b.iter_ordered().map(|e| e.id).collect();
        assert_eq!(ids, vec![4, 0, 0]);
        let push_idx: Vec<u64> = b.iter_ordered().map(|e| e.push_index).collect();
        assert_eq!(push_idx, vec![4, 5, 6]);
    }

    #[test]
    fn refresh_examples() {
        use crate::archive::{Container, ContainerParams};
        let mut c = Container::new(2, 1.0, DistanceMetric::relevance_weighted(15), ContainerParams::default());
        c.try_add(individual(0, &[0.0, 1.0])).unwrap();
        c.try_add(individual(1, &[0.0, -1.0])).unwrap();
        c.try_add(individual(2, &[5.0, 5.0])).unwrap();

        let empty = RelevanceBuffer::new(10);
        empty.refresh_relevances(&mut c, 15);
        assert!(c.members().iter().all(|m| m.relevance == 1.0));

        let b = buffer_of(&[&[0.0, 0.0]]);
        b.refresh_relevances(&mut c, 15);
        let rel = |id| c.get(id).unwrap().relevance;
        assert_eq!(rel(0), 1.0);
        assert_eq!(rel(0), rel(1));
        assert!(rel(2) < 1.0);
    }
}
