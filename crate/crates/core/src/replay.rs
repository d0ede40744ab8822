//! Bounded FIFO replay pool shared by the forward and reset learners.

use std::collections::VecDeque;

use rand::Rng;

use crate::mdp::{PolicyRole, SimRng, Transition};

pub const DEFAULT_CAPACITY: usize = 100_000;

#[derive(Clone, Debug)]
struct Entry {
    transition: Transition,
    mask: Vec<bool>,
}

/// Replay pool with per-member bootstrap inclusion masks.
///
/// Mask bits are drawn once at insertion and never touched again.
#[derive(Clone, Debug)]
pub struct ReplayPool {
    entries: VecDeque<Entry>,
    capacity: usize,
    members: usize,
    p_mask: f64,
    // number of live entries with each member's bit set
    included: Vec<usize>,
    fallbacks: u64,
}

impl ReplayPool {
    pub fn new(capacity: usize, members: usize, p_mask: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        assert!(members > 0, "ensemble needs at least one member");
        assert!((0.0..=1.0).contains(&p_mask), "p_mask must be in [0, 1]");
        ReplayPool {
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            members,
            p_mask,
            included: vec![0; members],
            fallbacks: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> usize {
        self.members
    }

    /// Number of times a sample fell back to the whole pool.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn insert(&mut self, transition: Transition, rng: &mut SimRng) {
        if self.entries.len() == self.capacity {
            if let Some(old) = self.entries.pop_front() {
                for (k, bit) in old.mask.iter().enumerate() {
                    if *bit {
                        self.included[k] -= 1;
                    }
                }
            }
        }
        let mask: Vec<bool> = (0..self.members)
            .map(|_| rng.random_bool(self.p_mask))
            .collect();
        for (k, bit) in mask.iter().enumerate() {
            if *bit {
                self.included[k] += 1;
            }
        }
        self.entries.push_back(Entry { transition, mask });
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.entries.get(index).map(|e| &e.transition)
    }

    pub fn mask(&self, index: usize) -> Option<&[bool]> {
        self.entries.get(index).map(|e| e.mask.as_slice())
    }

    /// Most recently inserted transition together with its mask.
    pub fn latest(&self) -> Option<(&Transition, &[bool])> {
        self.entries
            .back()
            .map(|e| (&e.transition, e.mask.as_slice()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter().map(|e| &e.transition)
    }

    /// Uniform sample with replacement from the transitions included for
    /// `member`. Falls back to the whole pool when that subset is empty.
    pub fn sample(
        &mut self,
        member: usize,
        batch_size: usize,
        rng: &mut SimRng,
    ) -> Vec<Transition> {
        let mut out = Vec::with_capacity(batch_size);
        self.sample_into(member, None, batch_size, rng, &mut out);
        out
    }

    /// Like [`ReplayPool::sample`], optionally restricted to one source
    /// policy. Appends to `out`. Returns nothing if the restricted subset
    /// is empty.
    pub fn sample_into(
        &mut self,
        member: usize,
        source: Option<PolicyRole>,
        batch_size: usize,
        rng: &mut SimRng,
        out: &mut Vec<Transition>,
    ) {
        assert!(!self.entries.is_empty(), "cannot sample from an empty pool");
        assert!(member < self.members, "member index out of range");
        let n = self.entries.len();
        let use_mask = self.included[member] > 0;
        if !use_mask {
            self.fallbacks += 1;
            log::warn!("ensemble member {member} has no included transitions; sampling the whole pool");
        }
        let eligible = |e: &Entry| {
            (!use_mask || e.mask[member]) && source.is_none_or(|s| e.transition.source == s)
        };
        if source.is_none() {
            // Rejection sampling; the expected number of draws is 1 / p_mask.
            for _ in 0..batch_size {
                loop {
                    let e = &self.entries[rng.random_range(0..n)];
                    if eligible(e) {
                        out.push(e.transition);
                        break;
                    }
                }
            }
            return;
        }
        let candidates: Vec<usize> = (0..n).filter(|&i| eligible(&self.entries[i])).collect();
        if candidates.is_empty() {
            return;
        }
        for _ in 0..batch_size {
            let i = candidates[rng.random_range(0..candidates.len())];
            out.push(self.entries[i].transition);
        }
    }
}
