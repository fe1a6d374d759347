//! Small dense-network engine: MLPs with exact backprop, optimizers,
//! squashed Gaussian policies and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod optim;
pub mod policy;

pub use mlp::{Activation, ForwardCache, Layer, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use policy::{GaussianPolicy, PolicySample};

/// Flat view over every trainable parameter, in a fixed order.
///
/// Gradients use the same container type as the parameters they belong to,
/// so the helpers below work on both.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn fill(&mut self, value: f64) {
        for s in self.param_slices_mut() {
            s.fill(value);
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += other`.
    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (d, s) in self.param_slices_mut().into_iter().zip(other.param_slices()) {
            d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }

    fn copy_from(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (d, s) in self.param_slices_mut().into_iter().zip(other.param_slices()) {
            d.copy_from_slice(s);
        }
    }

    /// `self <- (1 - rho) self + rho online`.
    fn soft_update(&mut self, online: &Self, rho: f64)
    where
        Self: Sized,
    {
        for (d, s) in self.param_slices_mut().into_iter().zip(online.param_slices()) {
            d.iter_mut().zip(s).for_each(|(t, o)| *t = (1.0 - rho) * *t + rho * o);
        }
    }

    fn l2_norm(&self) -> f64 {
        self.param_slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales to at most `max_norm`; returns the norm before clipping.
    fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm && norm.is_finite() {
            self.scale(max_norm / norm);
        }
        norm
    }
}
