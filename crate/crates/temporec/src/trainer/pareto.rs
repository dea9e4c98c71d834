//! Pareto-set bookkeeping over metric vectors where larger is better.
//! Equal vectors do not dominate each other, so duplicates coexist; this
//! matches brute-force non-dominated filtering over the full history.

use crate::error::{Error, Result};

/// True iff `a` is at least `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return Ok(false);
        }
        if x > y {
            strict = true;
        }
    }
    Ok(strict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoEntry<T> {
    pub metrics: Vec<f64>,
    pub epoch: usize,
    pub payload: T,
}

/// Incrementally maintained set of mutually non-dominated entries, kept in
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet<T> {
    entries: Vec<ParetoEntry<T>>,
}

impl<T> Default for ParetoSet<T> {
    fn default() -> Self {
        ParetoSet {
            entries: Vec::new(),
        }
    }
}

impl<T> ParetoSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ParetoEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert unless dominated; evict everything the newcomer dominates.
    /// Returns whether the entry was kept.
    pub fn insert(&mut self, entry: ParetoEntry<T>) -> Result<bool> {
        for existing in &self.entries {
            if dominates(&existing.metrics, &entry.metrics)? {
                return Ok(false);
            }
        }
        let mut keep = Vec::with_capacity(self.entries.len() + 1);
        for existing in self.entries.drain(..) {
            if !dominates(&entry.metrics, &existing.metrics)? {
                keep.push(existing);
            }
        }
        keep.push(entry);
        self.entries = keep;
        Ok(true)
    }

    /// The entry maximizing one metric component, ties resolved toward the
    /// earliest insertion.
    pub fn best_by(&self, metric_index: usize) -> Option<&ParetoEntry<T>> {
        self.entries.iter().reduce(|best, e| {
            if e.metrics[metric_index] > best.metrics[metric_index] {
                e
            } else {
                best
            }
        })
    }
}

/// Brute-force non-dominated filter over a full history, for checking the
/// incremental set.
pub fn non_dominated_filter(history: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (i, candidate) in history.iter().enumerate() {
        let mut keep = true;
        for (j, other) in history.iter().enumerate() {
            if i != j && dominates(other, candidate)? {
                keep = false;
                break;
            }
        }
        if keep {
            out.push(candidate.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn dominance_is_componentwise_and_strict() {
        assert!(dominates(&[0.13, 0.47], &[0.11, 0.23]).unwrap());
        assert!(!dominates(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(!dominates(&[0.0, 1.0], &[1.0, 0.0]).unwrap());
        assert!(!dominates(&[0.5, 0.5], &[0.5, 0.5]).unwrap());
        assert!(dominates(&[0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn dominated_insert_leaves_set_unchanged() {
        let mut set: ParetoSet<()> = ParetoSet::new();
        set.insert(ParetoEntry {
            metrics: vec![0.5, 0.5],
            epoch: 1,
            payload: (),
        })
        .unwrap();
        let kept = set
            .insert(ParetoEntry {
                metrics: vec![0.4, 0.4],
                epoch: 2,
                payload: (),
            })
            .unwrap();
        assert!(!kept);
        assert_eq!(set.len(), 1);
        assert_eq!(set.entries()[0].epoch, 1);
    }

    #[test]
    fn dominating_insert_evicts_everything_it_dominates() {
        let mut set: ParetoSet<()> = ParetoSet::new();
        for (e, m) in [
            (1, vec![0.3, 0.6]),
            (2, vec![0.5, 0.4]),
            (3, vec![0.1, 0.9]),
        ]
        .into_iter()
        {
            set.insert(ParetoEntry {
                metrics: m,
                epoch: e,
                payload: (),
            })
            .unwrap();
        }
        assert_eq!(set.len(), 3);
        set.insert(ParetoEntry {
            metrics: vec![0.5, 0.6],
            epoch: 4,
            payload: (),
        })
        .unwrap();
        // evicts (0.3,0.6) and (0.5,0.4); (0.1,0.9) survives
        assert_eq!(set.len(), 2);
        let epochs: Vec<usize> = set.entries().iter().map(|e| e.epoch).collect();
        assert_eq!(epochs, vec![3, 4]);
    }

    #[test]
    fn equal_vectors_coexist() {
        let mut set: ParetoSet<()> = ParetoSet::new();
        for e in 1..=2 {
            assert!(set
                .insert(ParetoEntry {
                    metrics: vec![0.5, 0.5],
                    epoch: e,
                    payload: (),
                })
                .unwrap());
        }
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn incremental_set_matches_brute_force() {
        let mut rng = crate::seeds::rng(11, "pareto-test", 0);
        for n_metrics in [2usize, 3] {
            for _ in 0..100 {
                let history: Vec<Vec<f64>> = (0..rng.gen_range(1..40))
                    .map(|_| {
                        (0..n_metrics)
                            .map(|_| (rng.gen_range(0..8) as f64) / 8.0)
                            .collect()
                    })
                    .collect();
                let mut set: ParetoSet<usize> = ParetoSet::new();
                for (e, m) in history.iter().enumerate() {
                    set.insert(ParetoEntry {
                        metrics: m.clone(),
                        epoch: e,
                        payload: e,
                    })
                    .unwrap();
                }
                let mut incremental: Vec<Vec<f64>> =
                    set.entries().iter().map(|e| e.metrics.clone()).collect();
                let mut brute = non_dominated_filter(&history).unwrap();
                let key = |v: &Vec<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
                incremental.sort_by_key(key);
                brute.sort_by_key(key);
                assert_eq!(incremental, brute);
            }
        }
    }

    #[test]
    fn best_by_prefers_the_highest_component() {
        let mut set: ParetoSet<char> = ParetoSet::new();
        for (m, p) in [(vec![0.6, 0.2], 'a'), (vec![0.3, 0.9], 'b')] {
            set.insert(ParetoEntry {
                metrics: m,
                epoch: 0,
                payload: p,
            })
            .unwrap();
        }
        assert_eq!(set.best_by(0).unwrap().payload, 'a');
        assert_eq!(set.best_by(1).unwrap().payload, 'b');
    }
}
