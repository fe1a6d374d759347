//! Central finite-difference check of [`Mlp::backward`].

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{Mlp, Parameters};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn loss(net: &Mlp, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<f64> {
    let y = net.predict_batch(x)?;
    Ok((&y * &upstream).sum())
}

/// Compares backprop against central differences of `sum(upstream * net(x))`
/// on up to `per_tensor` randomly chosen entries of every weight and bias
/// tensor and of the input.
pub fn check_mlp<R: Rng + ?Sized>(
    net: &Mlp,
    x: ArrayView2<f64>,
    upstream: ArrayView2<f64>,
    h: f64,
    per_tensor: usize,
    floor: f64,
    rng: &mut R,
) -> Result<GradCheck> {
    let cache = net.forward_batch(x)?;
    let (grads, dx) = net.backward(&cache, upstream)?;
    let analytic = grads.param_slices().iter().map(|s| s.to_vec()).collect::<Vec<_>>();

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut probe = net.clone();
    for (t, g) in analytic.iter().enumerate() {
        let picks: Vec<usize> = if g.len() <= per_tensor {
            (0..g.len()).collect()
        } else {
            (0..per_tensor).map(|_| rng.random_range(0..g.len())).collect()
        };
        for k in picks {
            let orig = probe.param_slices()[t][k];
            probe.param_slices_mut()[t][k] = orig + h;
            let up = loss(&probe, x, upstream)?;
            probe.param_slices_mut()[t][k] = orig - h;
            let down = loss(&probe, x, upstream)?;
            probe.param_slices_mut()[t][k] = orig;
            worst = worst.max(relative_error(g[k], (up - down) / (2.0 * h), floor));
            checked += 1;
        }
    }

    let mut xp: Array2<f64> = x.to_owned();
    for _ in 0..per_tensor.min(xp.len()) {
        let (r, c) = (rng.random_range(0..xp.nrows()), rng.random_range(0..xp.ncols()));
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + h;
        let up = loss(net, xp.view(), upstream)?;
        xp[[r, c]] = orig - h;
        let down = loss(net, xp.view(), upstream)?;
        xp[[r, c]] = orig;
        worst = worst.max(relative_error(dx[[r, c]], (up - down) / (2.0 * h), floor));
        checked += 1;
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}
