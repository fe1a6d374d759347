use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Activation, ForwardCache, Mlp, Parameters};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u.abs();
    2.0 * (std::f64::consts::LN_2 - u.abs() - x.exp().ln_1p())
}

/// Diagonal Gaussian over pre-squash actions with a state-independent log-std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    /// Squashed action in `[-1, 1]^D`.
    pub action: Vec<f64>,
    /// Gaussian draw before squashing.
    pub pre_tanh: Vec<f64>,
    /// Log-density of `action`, including the tanh Jacobian.
    pub log_prob: f64,
    pub entropy: f64,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], init_log_std: f64, rng: &mut R) -> Result<Self> {
        let mean = Mlp::new(sizes, Activation::Identity, rng)?;
        let log_std = Array1::from_elem(mean.output_dim(), init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Ok(Self { mean, log_std })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std.mapv_inplace(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    fn std_dev(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp())
            .collect()
    }

    /// Entropy of the pre-squash Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|l| 0.5 + HALF_LN_2PI + l.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .sum()
    }

    /// Gaussian log-density of `u` around `mean`, before the tanh correction.
    pub fn gaussian_log_prob(&self, mean: &[f64], u: &[f64]) -> f64 {
        mean.iter()
            .zip(u)
            .zip(&self.log_std)
            .map(|((m, x), l)| {
                let l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let z = (x - m) / l.exp();
                -0.5 * z * z - l - HALF_LN_2PI
            })
            .sum()
    }

    /// Log-density of the squashed action `tanh(u)`.
    pub fn log_prob(&self, mean: &[f64], u: &[f64]) -> f64 {
        self.gaussian_log_prob(mean, u) - u.iter().map(|&x| log_one_minus_tanh_sq(x)).sum::<f64>()
    }

    /// Derivatives of [`Self::gaussian_log_prob`] with respect to the mean
    /// and the log-std.
    pub fn log_prob_grads(&self, mean: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d_mean = Vec::with_capacity(mean.len());
        let mut d_log_std = Vec::with_capacity(mean.len());
        for ((m, x), l) in mean.iter().zip(u).zip(&self.log_std) {
            let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(l);
            let var = l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp().powi(2);
            d_mean.push((x - m) / var);
            d_log_std.push(if inside { (x - m).powi(2) / var - 1.0 } else { 0.0 });
        }
        (d_mean, d_log_std)
    }

    pub fn mean_of(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mean.forward(state)
    }

    pub fn mean_batch(&self, states: ArrayView2<f64>) -> Result<ForwardCache> {
        self.mean.forward_batch(states)
    }

    /// Squashed mean action, used for greedy evaluation.
    pub fn deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean_of(state)?.into_iter().map(f64::tanh).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<PolicySample> {
        let mean = self.mean_of(state)?;
        let std = self.std_dev();
        let pre_tanh: Vec<f64> = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob = self.log_prob(&mean, &pre_tanh);
        if !log_prob.is_finite() {
            return Err(Error::NonFinite(format!("policy log-prob {log_prob}")));
        }
        Ok(PolicySample {
            action: pre_tanh.iter().map(|u| u.tanh()).collect(),
            pre_tanh,
            log_prob,
            entropy: self.entropy(),
        })
    }

    pub fn sample_with_seed(&self, state: &[f64], noise_seed: u64) -> Result<PolicySample> {
        self.sample(state, &mut rng_from_seed(noise_seed))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mean: self.mean.zeros_like(),
            log_std: Array1::zeros(self.log_std.len()),
        }
    }

    /// Backpropagates `d objective / d mean` (one row per sample) and adds the
    /// log-std gradient; returns gradients of the same shape as `self`.
    pub fn backward(&self, cache: &ForwardCache, d_mean: &Array2<f64>, d_log_std: Array1<f64>) -> Result<Self> {
        let (mean, _) = self.mean.backward(cache, d_mean.view())?;
        Ok(Self {
            mean,
            log_std: d_log_std,
        })
    }
}

impl Parameters for GaussianPolicy {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.mean.param_slices();
        v.push(self.log_std.as_slice().expect("standard layout"));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.mean.param_slices_mut();
        v.push(self.log_std.as_slice_mut().expect("standard layout"));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn policy(dim_in: usize, dim_out: usize, log_std: f64) -> GaussianPolicy {
        let mut rng = rng_from_seed(11);
        GaussianPolicy::new(&[dim_in, 8, dim_out], log_std, &mut rng).unwrap()
    }

    #[test]
    fn unit_entropy() {
        let p = policy(2, 1, 0.0);
        assert_relative_eq!(p.entropy(), 1.418_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn stable_jacobian_term() {
        for u in [-30.0, -3.0, -0.1, 0.0, 0.7, 5.0, 30.0] {
            let naive = (1.0 - f64::tanh(u).powi(2)).ln();
            if naive.is_finite() && u.abs() < 5.0 {
                assert_relative_eq!(log_one_minus_tanh_sq(u), naive, max_relative = 1e-9);
            }
            assert!(log_one_minus_tanh_sq(u).is_finite());
        }
    }

    #[test]
    fn sample_log_prob_matches_change_of_variables() {
        let p = policy(3, 4, -0.5);
        let s = [0.2, -0.1, 0.5];
        let smp = p.sample_with_seed(&s, 5).unwrap();
        let mean = p.mean_of(&s).unwrap();
        let jac: f64 = smp.action.iter().map(|a| (1.0 - a * a).ln()).sum();
        assert_relative_eq!(
            smp.log_prob,
            p.gaussian_log_prob(&mean, &smp.pre_tanh) - jac,
            epsilon = 1e-9
        );
        assert_eq!(smp, p.sample_with_seed(&s, 5).unwrap());
        assert!(smp.action.iter().all(|a| (-1.0..=1.0).contains(a)));
    }

    #[test]
    fn small_std_collapses_to_mean() {
        let mut p = policy(2, 2, LOG_STD_MIN);
        p.log_std.fill(-50.0);
        let s = [0.3, 0.3];
        let smp = p.sample_with_seed(&s, 1).unwrap();
        let det = p.deterministic(&s).unwrap();
        for (a, d) in smp.action.iter().zip(&det) {
            assert!((a - d).abs() < 0.05);
        }
        assert!(smp.log_prob.is_finite());
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        let mut p = policy(1, 1, 0.0);
        p.log_std[0] = -0.3;
        let mean = p.mean_of(&[0.4]).unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let total: f64 = (0..n)
            .map(|k| {
                let a = -1.0 + (k as f64 + 0.5) * h;
                p.log_prob(&mean, &[a.atanh()]).exp() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn log_prob_gradients_match_differences() {
        let p = policy(2, 3, -0.2);
        let mean = vec![0.1, -0.4, 0.9];
        let u = vec![0.5, 0.0, -1.0];
        let (dm, dl) = p.log_prob_grads(&mean, &u);
        let h = 1e-6;
        for d in 0..3 {
            let mut up = mean.clone();
            up[d] += h;
            let mut dn = mean.clone();
            dn[d] -= h;
            let fd = (p.gaussian_log_prob(&up, &u) - p.gaussian_log_prob(&dn, &u)) / (2.0 * h);
            assert_relative_eq!(dm[d], fd, max_relative = 1e-6);

            let mut pu = p.clone();
            pu.log_std[d] += h;
            let mut pd = p.clone();
            pd.log_std[d] -= h;
            let fd = (pu.gaussian_log_prob(&mean, &u) - pd.gaussian_log_prob(&mean, &u)) / (2.0 * h);
            assert_relative_eq!(dl[d], fd, max_relative = 1e-6);
        }
    }
}
