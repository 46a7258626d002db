//! Soft actor-critic with twin critics and automatic temperature tuning.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::buffer::Batch;
use super::nn::{Activation, Adam, Cache, Grads, Mlp, ScalarAdam};
use super::{concat_cols, critic_target_min, mse_grad, Losses, RlError};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    /// Defaults to `-dim(action)` when `None`.
    pub target_entropy: Option<f64>,
    pub init_alpha: f64,
    pub hidden: Vec<usize>,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.99,
            tau: 0.005,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            target_entropy: None,
            init_alpha: 1.0,
            hidden: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub cfg: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    alpha_opt: ScalarAdam,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Reparameterized squashed-Gaussian sample of a batch.
struct PolicySample {
    actions: Array2<f64>,
    log_prob: Array1<f64>,
    eps: Array2<f64>,
    std: Array2<f64>,
    /// 1 where the log-std was inside its bounds.
    ls_mask: Array2<f64>,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

impl Sac {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, cfg: SacConfig, rng: &mut R) -> Self {
        let actor = Mlp::new(&sizes(obs_dim, &cfg.hidden, 2 * act_dim), Activation::Relu, Activation::Identity, rng);
        let qs = sizes(obs_dim + act_dim, &cfg.hidden, 1);
        let q1 = Mlp::new(&qs, Activation::Relu, Activation::Identity, rng);
        let q2 = Mlp::new(&qs, Activation::Relu, Activation::Identity, rng);
        Sac {
            actor_opt: Adam::new(&actor, cfg.lr_actor),
            q1_opt: Adam::new(&q1, cfg.lr_critic),
            q2_opt: Adam::new(&q2, cfg.lr_critic),
            alpha_opt: ScalarAdam::new(cfg.lr_alpha),
            log_alpha: cfg.init_alpha.ln(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            obs_dim,
            act_dim,
            cfg,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    fn target_entropy(&self) -> f64 {
        self.cfg.target_entropy.unwrap_or(-(self.act_dim as f64))
    }

    pub fn act<R: Rng>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("row vector");
        let out = self.actor.forward(x);
        let d = self.act_dim;
        (0..d)
            .map(|i| {
                let mu = out[[0, i]];
                if deterministic {
                    mu.tanh()
                } else {
                    let std = out[[0, d + i]].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                    let e: f64 = rng.sample(StandardNormal);
                    (mu + std * e).tanh()
                }
            })
            .collect()
    }

    fn sample_policy<R: Rng>(&self, out: &Array2<f64>, rng: &mut R) -> PolicySample {
        let (n, d) = (out.nrows(), self.act_dim);
        let mut actions = Array2::zeros((n, d));
        let mut eps = Array2::zeros((n, d));
        let mut std = Array2::zeros((n, d));
        let mut ls_mask = Array2::zeros((n, d));
        let mut log_prob = Array1::zeros(n);
        for r in 0..n {
            let mut lp = 0.0;
            for i in 0..d {
                let mu = out[[r, i]];
                let raw = out[[r, d + i]];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let sd = ls.exp();
                let e: f64 = rng.sample(StandardNormal);
                let u = mu + sd * e;
                let a = u.tanh();
                // log(1 - tanh(u)^2) in a numerically stable form.
                let log_det = 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u));
                lp += -0.5 * e * e - ls - HALF_LN_2PI - log_det;
                actions[[r, i]] = a;
                eps[[r, i]] = e;
                std[[r, i]] = sd;
                ls_mask[[r, i]] = if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) { 1.0 } else { 0.0 };
            }
            log_prob[r] = lp;
        }
        PolicySample {
            actions,
            log_prob,
            eps,
            std,
            ls_mask,
        }
    }

    pub fn update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<Losses, RlError> {
        let n = batch.obs.nrows() as f64;
        let alpha = self.alpha();

        // Critic targets.
        let next_out = self.actor.forward(batch.next_obs.view());
        let next = self.sample_policy(&next_out, rng);
        let next_in = concat_cols(&batch.next_obs, &next.actions);
        let q_next = critic_target_min(&self.q1_target, &self.q2_target, &next_in);
        let y: Array1<f64> = ndarray::Zip::from(&batch.rewards)
            .and(&batch.dones)
            .and(&q_next)
            .and(&next.log_prob)
            .map_collect(|&r, &done, &q, &lp| r + self.cfg.gamma * (1.0 - done) * (q - alpha * lp));

        let sa = concat_cols(&batch.obs, &batch.actions);
        let c1 = self.q1.forward_cached(sa.view());
        let c2 = self.q2.forward_cached(sa.view());
        let (l1, g1out) = mse_grad(c1.output(), &y);
        let (l2, g2out) = mse_grad(c2.output(), &y);
        let (g1, _) = self.q1.backward(&c1, &g1out);
        let (g2, _) = self.q2.backward(&c2, &g2out);

        // Actor through the reparameterized sample.
        let actor_cache = self.actor.forward_cached(batch.obs.view());
        let pol = self.sample_policy(actor_cache.output(), rng);
        let (actor_grads, actor_loss, _) = self.actor_grads(batch, &actor_cache, &pol, alpha, n);

        let mean_lp = pol.log_prob.mean().unwrap_or(0.0);
        let alpha_grad = -(mean_lp + self.target_entropy());
        let alpha_loss = -self.log_alpha * (mean_lp + self.target_entropy());

        let losses = Losses {
            critic: l1 + l2,
            actor: Some(actor_loss),
            alpha: Some(alpha_loss),
            entropy: Some(-mean_lp),
        };
        let finite = losses.is_finite()
            && g1.is_finite()
            && g2.is_finite()
            && actor_grads.is_finite()
            && alpha_grad.is_finite();
        if !finite {
            return Err(RlError::Divergence(format!(
                "non-finite SAC update: critic {:.3e}, actor {:.3e}, alpha {:.3e}, log_alpha {:.3e}",
                losses.critic, actor_loss, alpha_loss, self.log_alpha
            )));
        }

        self.q1_opt.step(&mut self.q1, &g1);
        self.q2_opt.step(&mut self.q2, &g2);
        self.actor_opt.step(&mut self.actor, &actor_grads);
        self.alpha_opt.step(&mut self.log_alpha, alpha_grad);
        self.q1_target.soft_update(&self.q1, self.cfg.tau);
        self.q2_target.soft_update(&self.q2, self.cfg.tau);
        Ok(losses)
    }

    fn actor_grads(
        &self,
        batch: &Batch,
        cache: &Cache,
        pol: &PolicySample,
        alpha: f64,
        n: f64,
    ) -> (Grads, f64, Array2<f64>) {
        let d = self.act_dim;
        let sa = concat_cols(&batch.obs, &pol.actions);
        let c1 = self.q1.forward_cached(sa.view());
        let c2 = self.q2.forward_cached(sa.view());
        let q1 = c1.output().column(0).to_owned();
        let q2 = c2.output().column(0).to_owned();
        let rows = q1.len();
        let mut sel1 = Array2::zeros((rows, 1));
        let mut sel2 = Array2::zeros((rows, 1));
        let mut qmin = Array1::zeros(rows);
        for r in 0..rows {
            if q1[r] <= q2[r] {
                sel1[[r, 0]] = 1.0;
                qmin[r] = q1[r];
            } else {
                sel2[[r, 0]] = 1.0;
                qmin[r] = q2[r];
            }
        }
        let (_, gin1) = self.q1.backward(&c1, &sel1);
        let (_, gin2) = self.q2.backward(&c2, &sel2);
        let dq_da = (&gin1 + &gin2).slice(s![.., self.obs_dim..]).to_owned();

        let loss = (alpha * &pol.log_prob - &qmin).mean().unwrap_or(0.0);
        let mut gout = Array2::zeros((rows, 2 * d));
        for r in 0..rows {
            for i in 0..d {
                let a = pol.actions[[r, i]];
                let dq_du = dq_da[[r, i]] * (1.0 - a * a);
                let du_dls = pol.std[[r, i]] * pol.eps[[r, i]];
                gout[[r, i]] = (alpha * 2.0 * a - dq_du) / n;
                let g_ls = alpha * (-1.0 + 2.0 * a * du_dls) - dq_du * du_dls;
                gout[[r, d + i]] = pol.ls_mask[[r, i]] * g_ls / n;
            }
        }
        let (g, _) = self.actor.backward(cache, &gout);
        (g, loss, dq_da)
    }

    /// Log-probability of freshly sampled actions for a batch of observations.
    pub fn sample_log_prob<R: Rng>(&self, obs: ArrayView2<f64>, rng: &mut R) -> (Array2<f64>, Array1<f64>) {
        let out = self.actor.forward(obs);
        let p = self.sample_policy(&out, rng);
        (p.actions, p.log_prob)
    }

    pub fn mean_q(&self, batch: &Batch) -> f64 {
        let sa = concat_cols(&batch.obs, &batch.actions);
        self.q1.forward(sa.view()).mean_axis(Axis(0)).map(|m| m[0]).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::buffer::{ReplayBuffer, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn squashed_log_prob_matches_change_of_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sac = Sac::new(3, 2, SacConfig::default(), &mut rng);
        let out = ndarray::array![[0.3, -0.4, -0.5, 0.1]];
        let mut r1 = ChaCha8Rng::seed_from_u64(8);
        let p = sac.sample_policy(&out, &mut r1);
        let mut expect = 0.0;
        for i in 0..2 {
            let (mu, ls) = (out[[0, i]], out[[0, 2 + i]]);
            let u = p.actions[[0, i]].atanh();
            let sd: f64 = f64::exp(ls);
            let z = (u - mu) / sd;
            let gauss = -0.5 * z * z - ls - HALF_LN_2PI;
            expect += gauss - (1.0 - p.actions[[0, i]].powi(2)).ln();
        }
        assert!((p.log_prob[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sac = Sac::new(3, 2, SacConfig::default(), &mut rng);
        let mut buf = ReplayBuffer::new(8, 3, 2);
        for k in 0..8 {
            let x = k as f64 * 0.1;
            buf.push(&Transition {
                obs: vec![x, -x, 0.5],
                action: vec![0.1, -0.2],
                reward: -x,
                next_obs: vec![0.0; 3],
                done: false,
                truncated: false,
            });
        }
        let batch = buf.gather(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let n = 8.0;
        let loss_of = |s: &Sac| {
            let cache = s.actor.forward_cached(batch.obs.view());
            let pol = s.sample_policy(cache.output(), &mut ChaCha8Rng::seed_from_u64(77));
            s.actor_grads(&batch, &cache, &pol, 0.3, n)
        };
        let (g, _, _) = loss_of(&sac);
        let analytic = g.flatten();
        let flat = sac.actor.flatten();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in (0..flat.len()).step_by(7) {
            let mut p = sac.clone();
            let mut f = flat.clone();
            f[k] += h;
            p.actor.set_flat(&f);
            let up = loss_of(&p).1;
            f[k] -= 2.0 * h;
            p.actor.set_flat(&f);
            let down = loss_of(&p).1;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn actions_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sac = Sac::new(4, 3, SacConfig::default(), &mut rng);
        for k in 0..100 {
            let obs = vec![k as f64 * 10.0, -3.0, 0.5, 100.0];
            for det in [true, false] {
                assert!(sac.act(&obs, det, &mut rng).iter().all(|a| (-1.0..=1.0).contains(a)));
            }
        }
    }

    #[test]
    fn critic_loss_falls_on_fixed_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sac = Sac::new(2, 1, SacConfig::default(), &mut rng);
        let mut buf = ReplayBuffer::new(4, 2, 1);
        buf.push(&Transition {
            obs: vec![0.5, -0.5],
            action: vec![0.2],
            reward: -1.0,
            next_obs: vec![0.0, 0.0],
            done: true,
            truncated: false,
        });
        let batch = buf.gather(&[0; 32]);
        let losses: Vec<f64> = (0..50).map(|_| sac.update(&batch, &mut rng).unwrap().critic).collect();
        assert!(losses[49] < 0.5 * losses[0], "{} -> {}", losses[0], losses[49]);
        let rising = losses.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rising <= 2, "critic loss rose {rising} times");
    }

    #[test]
    fn zero_learning_rates_keep_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SacConfig {
            lr_actor: 0.0,
            lr_critic: 0.0,
            lr_alpha: 0.0,
            tau: 0.0,
            ..SacConfig::default()
        };
        let mut sac = Sac::new(2, 1, cfg, &mut rng);
        let before = (sac.actor.clone(), sac.q1.clone(), sac.q2_target.clone(), sac.log_alpha);
        let mut buf = ReplayBuffer::new(4, 2, 1);
        buf.push(&Transition {
            obs: vec![0.1, 0.2],
            action: vec![0.3],
            reward: -0.5,
            next_obs: vec![0.0, 0.1],
            done: false,
            truncated: false,
        });
        sac.update(&buf.gather(&[0; 8]), &mut rng).unwrap();
        assert_eq!((sac.actor.clone(), sac.q1.clone(), sac.q2_target.clone(), sac.log_alpha), before);
    }

    #[test]
    fn non_finite_batch_is_reported_as_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sac = Sac::new(2, 1, SacConfig::default(), &mut rng);
        let before = sac.q1.clone();
        let mut buf = ReplayBuffer::new(2, 2, 1);
        buf.push(&Transition {
            obs: vec![0.0, 0.0],
            action: vec![0.0],
            reward: f64::NAN,
            next_obs: vec![0.0, 0.0],
            done: false,
            truncated: false,
        });
        assert!(matches!(sac.update(&buf.gather(&[0; 4]), &mut rng), Err(RlError::Divergence(_))));
        assert_eq!(sac.q1, before);
    }
}
