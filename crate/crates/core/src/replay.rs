//! Experience replay with per-ensemble-member bootstrap membership.
//!
//! Each experience is stored once in a shared ring; membership of member `k`
//! is a queue of sequence numbers, so K member buffers cost little more than
//! a single shared buffer. Eviction is FIFO: overwritten sequence numbers
//! become invalid and are pruned lazily from the front of each queue.

use std::collections::VecDeque;

use rand::Rng;

/// One replay tuple. `terminal` marks proper terminal transitions (goal or
/// collision); timeout-final transitions are never added by the trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f32>,
    pub terminal: bool,
}

#[derive(Debug)]
pub struct BootstrapBuffer {
    store: Vec<Experience>,
    capacity: usize,
    next_seq: u64,
    members: Vec<VecDeque<u64>>,
    p_add: f64,
}

impl BootstrapBuffer {
    /// `members >= 1`; `p_add` is the independent per-member membership
    /// probability (1.0 for a single shared buffer).
    pub fn new(capacity: usize, members: usize, p_add: f64) -> BootstrapBuffer {
        assert!(members >= 1, "at least one member buffer");
        assert!(capacity >= 1);
        BootstrapBuffer {
            store: Vec::new(),
            capacity,
            next_seq: 0,
            members: vec![VecDeque::new(); members],
            p_add,
        }
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Total experiences ever written.
    pub fn written(&self) -> u64 {
        self.next_seq
    }

    /// Newest sequence number currently stored, if any.
    pub fn newest_seq(&self) -> Option<u64> {
        self.next_seq.checked_sub(1)
    }

    fn oldest_live(&self) -> u64 {
        self.next_seq.saturating_sub(self.capacity as u64)
    }

    /// Registers `exp` in each member buffer with probability `p_add`. One
    /// uniform draw per member is consumed from `rng` regardless of outcome.
    pub fn add<R: Rng>(&mut self, exp: Experience, rng: &mut R) {
        debug_assert_eq!(exp.state.len(), exp.next_state.len());
        let mut any = false;
        let seq = self.next_seq;
        for member in &mut self.members {
            if rng.gen::<f64>() < self.p_add {
                member.push_back(seq);
                any = true;
            }
        }
        if !any {
            return;
        }
        let slot = (seq % self.capacity as u64) as usize;
        if slot < self.store.len() {
            self.store[slot] = exp;
        } else {
            // Slots are filled in order before the ring wraps.
            debug_assert_eq!(slot, self.store.len());
            self.store.push(exp);
        }
        self.next_seq += 1;
        let oldest = self.oldest_live();
        for member in &mut self.members {
            while member.front().is_some_and(|&s| s < oldest) {
                member.pop_front();
            }
        }
    }

    /// Live entries registered for member `k`.
    pub fn len(&self, k: usize) -> usize {
        let oldest = self.oldest_live();
        let m = &self.members[k];
        m.iter().filter(|&&s| s >= oldest).count()
    }

    pub fn is_empty(&self, k: usize) -> bool {
        self.len(k) == 0
    }

    /// Uniform sample with replacement from member `k`'s live entries.
    /// Returns `None` (not ready) while the member buffer is empty.
    pub fn sample<R: Rng>(&self, k: usize, batch: usize, rng: &mut R) -> Option<Vec<&Experience>> {
        let oldest = self.oldest_live();
        let m = &self.members[k];
        // Front entries may be stale until the next add prunes them.
        let start = m.partition_point(|&s| s < oldest);
        let live = m.len() - start;
        if live == 0 {
            return None;
        }
        let mut out = Vec::with_capacity(batch);
        for _ in 0..batch {
            let seq = m[start + rng.gen_range(0..live)];
            out.push(&self.store[(seq % self.capacity as u64) as usize]);
        }
        Some(out)
    }
}
