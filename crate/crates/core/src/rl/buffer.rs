//! FIFO-bounded replay buffer with uniform sampling.

use ndarray::{Array1, Array2};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Terminal state: no bootstrapping from `next_obs`.
    pub done: bool,
    /// Episode cut by the skill budget; still bootstraps.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 where the transition ended the episode by termination.
    pub dones: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            obs: vec![0.0; capacity * obs_dim],
            actions: vec![0.0; capacity * act_dim],
            rewards: vec![0.0; capacity],
            next_obs: vec![0.0; capacity * obs_dim],
            dones: vec![0.0; capacity],
            len: 0,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts a transition, overwriting the oldest one when full.
    pub fn push(&mut self, t: &Transition) {
        assert_eq!(t.obs.len(), self.obs_dim);
        assert_eq!(t.action.len(), self.act_dim);
        let i = self.head;
        self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.obs);
        self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.next_obs);
        self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.action);
        self.rewards[i] = t.reward;
        self.dones[i] = if t.done { 1.0 } else { 0.0 };
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Slot index of the `k`-th oldest stored transition.
    pub fn slot(&self, k: usize) -> usize {
        (self.head + self.capacity - self.len + k) % self.capacity
    }

    pub fn reward_at(&self, slot: usize) -> f64 {
        self.rewards[slot]
    }

    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(self.len > 0, "cannot sample an empty buffer");
        (0..n).map(|_| self.slot(rng.gen_range(0..self.len))).collect()
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Batch {
        let idx = self.sample_indices(n, rng);
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let n = idx.len();
        let (od, ad) = (self.obs_dim, self.act_dim);
        let rows = |src: &[f64], d: usize| Array2::from_shape_fn((n, d), |(r, c)| src[idx[r] * d + c]);
        Batch {
            obs: rows(&self.obs, od),
            actions: rows(&self.actions, ad),
            rewards: Array1::from_shape_fn(n, |r| self.rewards[idx[r]]),
            next_obs: rows(&self.next_obs, od),
            dones: Array1::from_shape_fn(n, |r| self.dones[idx[r]]),
        }
    }
}
