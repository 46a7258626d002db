//! Twin delayed deep deterministic policy gradient.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::buffer::Batch;
use super::nn::{Activation, Adam, Mlp};
use super::{concat_cols, critic_target_min, mse_grad, Losses, RlError};

#[derive(Debug, Clone, PartialEq)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub policy_delay: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub explore_noise: f64,
    pub hidden: Vec<usize>,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            gamma: 0.99,
            tau: 0.005,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            explore_noise: 0.1,
            hidden: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Td3 {
    pub cfg: Td3Config,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    updates: usize,
}

impl Td3 {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, cfg: Td3Config, rng: &mut R) -> Self {
        let mut a_sizes = vec![obs_dim];
        a_sizes.extend_from_slice(&cfg.hidden);
        a_sizes.push(act_dim);
        let mut q_sizes = vec![obs_dim + act_dim];
        q_sizes.extend_from_slice(&cfg.hidden);
        q_sizes.push(1);
        let actor = Mlp::new(&a_sizes, Activation::Relu, Activation::Tanh, rng);
        let q1 = Mlp::new(&q_sizes, Activation::Relu, Activation::Identity, rng);
        let q2 = Mlp::new(&q_sizes, Activation::Relu, Activation::Identity, rng);
        Td3 {
            actor_opt: Adam::new(&actor, cfg.lr_actor),
            q1_opt: Adam::new(&q1, cfg.lr_critic),
            q2_opt: Adam::new(&q2, cfg.lr_critic),
            actor_target: actor.clone(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            obs_dim,
            act_dim,
            cfg,
            updates: 0,
        }
    }

    pub fn act<R: Rng>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row vector");
        let out = self.actor.forward(x);
        let noise = Normal::new(0.0, self.cfg.explore_noise.max(0.0)).expect("finite std");
        out.row(0)
            .iter()
            .map(|&a| {
                if deterministic {
                    a
                } else {
                    (a + noise.sample(rng)).clamp(-1.0, 1.0)
                }
            })
            .collect()
    }

    pub fn update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<Losses, RlError> {
        let n = batch.obs.nrows() as f64;
        let noise = Normal::new(0.0, self.cfg.target_noise.max(0.0)).expect("finite std");
        let clip = self.cfg.noise_clip;
        let mut next_a = self.actor_target.forward(batch.next_obs.view());
        next_a.mapv_inplace(|a| (a + noise.sample(rng).clamp(-clip, clip)).clamp(-1.0, 1.0));
        let next_in = concat_cols(&batch.next_obs, &next_a);
        let q_next = critic_target_min(&self.q1_target, &self.q2_target, &next_in);
        let y = ndarray::Zip::from(&batch.rewards)
            .and(&batch.dones)
            .and(&q_next)
            .map_collect(|&r, &d, &q| r + self.cfg.gamma * (1.0 - d) * q);

        let sa = concat_cols(&batch.obs, &batch.actions);
        let c1 = self.q1.forward_cached(sa.view());
        let c2 = self.q2.forward_cached(sa.view());
        let (l1, g1out) = mse_grad(c1.output(), &y);
        let (l2, g2out) = mse_grad(c2.output(), &y);
        let (g1, _) = self.q1.backward(&c1, &g1out);
        let (g2, _) = self.q2.backward(&c2, &g2out);

        let update_actor = (self.updates + 1) % self.cfg.policy_delay.max(1) == 0;
        let mut actor_step = None;
        if update_actor {
            let ac = self.actor.forward_cached(batch.obs.view());
            let a = ac.output().clone();
            let qc = self.q1.forward_cached(concat_cols(&batch.obs, &a).view());
            let loss = -qc.output().mean().unwrap_or(0.0);
            let ones = Array2::from_elem((a.nrows(), 1), 1.0);
            let (_, gin) = self.q1.backward(&qc, &ones);
            let dq_da = gin.slice(s![.., self.obs_dim..]).to_owned();
            // The tanh derivative is applied inside the actor's backward pass.
            let gout = dq_da.mapv(|g| -g / n);
            let (ga, _) = self.actor.backward(&ac, &gout);
            actor_step = Some((ga, loss));
        }

        let losses = Losses {
            critic: l1 + l2,
            actor: actor_step.as_ref().map(|(_, l)| *l),
            alpha: None,
            entropy: None,
        };
        let finite = losses.is_finite()
            && g1.is_finite()
            && g2.is_finite()
            && actor_step.as_ref().map_or(true, |(g, _)| g.is_finite());
        if !finite {
            return Err(RlError::Divergence(format!(
                "non-finite TD3 update: critic {:.3e}, actor {:?}",
                losses.critic, losses.actor
            )));
        }

        self.updates += 1;
        self.q1_opt.step(&mut self.q1, &g1);
        self.q2_opt.step(&mut self.q2, &g2);
        if let Some((ga, _)) = actor_step {
            self.actor_opt.step(&mut self.actor, &ga);
            self.actor_target.soft_update(&self.actor, self.cfg.tau);
            self.q1_target.soft_update(&self.q1, self.cfg.tau);
            self.q2_target.soft_update(&self.q2, self.cfg.tau);
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::buffer::{ReplayBuffer, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch() -> Batch {
        let mut buf = ReplayBuffer::new(4, 2, 1);
        buf.push(&Transition {
            obs: vec![0.5, -0.5],
            action: vec![0.2],
            reward: -1.0,
            next_obs: vec![0.0, 0.0],
            done: true,
            truncated: false,
        });
        buf.gather(&[0; 32])
    }

    #[test]
    fn policy_updates_are_delayed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut td3 = Td3::new(2, 1, Td3Config::default(), &mut rng);
        let b = batch();
        let actor0 = td3.actor.clone();
        let l = td3.update(&b, &mut rng).unwrap();
        assert!(l.actor.is_none());
        assert_eq!(td3.actor, actor0);
        let l = td3.update(&b, &mut rng).unwrap();
        assert!(l.actor.is_some());
        assert_ne!(td3.actor, actor0);
    }

    #[test]
    fn critic_loss_falls_on_fixed_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut td3 = Td3::new(2, 1, Td3Config::default(), &mut rng);
        let b = batch();
        let losses: Vec<f64> = (0..50).map(|_| td3.update(&b, &mut rng).unwrap().critic).collect();
        assert!(losses[49] < 0.5 * losses[0], "{} -> {}", losses[0], losses[49]);
        let rising = losses.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rising <= 2, "critic loss rose {rising} times");
    }

    #[test]
    fn exploration_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let td3 = Td3::new(3, 4, Td3Config::default(), &mut rng);
        for _ in 0..200 {
            assert!(td3.act(&[5.0, -5.0, 1.0], false, &mut rng).iter().all(|a| a.abs() <= 1.0));
        }
    }
}
