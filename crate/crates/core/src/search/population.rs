use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::arch::ArchConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub id: u64,
    pub arch: ArchConfig,
    pub valid_nll: f64,
}

/// Bounded FIFO of the most recent successful evaluations.
#[derive(Clone, Debug)]
pub struct Population {
    capacity: usize,
    members: VecDeque<Member>,
}

impl Population {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            members: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity
    }

    /// Appends `m`, evicting and returning the oldest member when at capacity.
    pub fn push(&mut self, m: Member) -> Option<Member> {
        self.members.push_back(m);
        if self.members.len() > self.capacity {
            self.members.pop_front()
        } else {
            None
        }
    }

    /// Oldest first.
    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.members.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Member> {
        self.members.get(i)
    }
}

/// Tournament of `sample_size` members drawn without replacement; lowest NLL wins,
/// ties go to the most recent.
pub fn select_parent<'a, R: Rng + ?Sized>(pop: &'a Population, sample_size: usize, rng: &mut R) -> Result<&'a Member> {
    if !pop.is_full() {
        return Err(Error::Contract(format!(
            "tournament needs a full population ({} of {})",
            pop.len(),
            pop.capacity
        )));
    }
    if sample_size == 0 || sample_size > pop.len() {
        return Err(Error::Contract(format!("sample size {sample_size} outside 1..={}", pop.len())));
    }
    let mut best: Option<usize> = None;
    for i in index::sample(rng, pop.len(), sample_size) {
        let better = match best {
            None => true,
            Some(b) => {
                let (ci, cb) = (pop.members[i].valid_nll, pop.members[b].valid_nll);
                ci < cb || (ci == cb && i > b)
            }
        };
        if better {
            best = Some(i);
        }
    }
    Ok(&pop.members[best.expect("sample_size >= 1")])
}
