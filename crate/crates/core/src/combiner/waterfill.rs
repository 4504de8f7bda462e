//! Gain allocation across the singular modes of the task matrix.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-mode squared gains and the water level that normalizes them.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill<T> {
    /// `Λ²_l` for every input mode; zero outside the active set.
    pub gains: Vec<T>,
    pub level: T,
}

/// Quantization noise constant `4η² / (3b²P)` relative to unit input power.
pub fn noise_ratio(channels: usize, levels: u64, eta: f64) -> f64 {
    let b = levels as f64;
    4.0 * eta * eta / (3.0 * b * b * channels as f64)
}

/// Allocates `Λ²_l = c (ζλ_l − 1)⁺` over the first `min(task_rows, channels)`
/// modes with `Σ Λ²_l = 1`, where `c` is [`noise_ratio`].
///
/// `singular` must be sorted in descending order. The level is found by an
/// exact search over active-set sizes.
pub fn waterfill<T: Real>(singular: &[T], channels: usize, task_rows: usize, levels: u64, eta: f64) -> Result<WaterFill<T>> {
    if channels == 0 {
        return Err(Error::InvalidArgument("at least one channel is required".into()));
    }
    if singular.iter().any(|&s| !s.is_finite() || s < T::zero()) {
        return Err(Error::InvalidArgument("singular values must be finite and nonnegative".into()));
    }
    if singular.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("singular values must be sorted in descending order".into()));
    }
    let limit = singular.len().min(task_rows).min(channels);
    let active_max = singular[..limit].iter().take_while(|&&s| s > T::zero()).count();
    if active_max == 0 {
        return Err(Error::InvalidArgument("all singular values are zero".into()));
    }
    let c = T::of(noise_ratio(channels, levels, eta));
    let inv_c = T::one() / c;

    let mut level = T::zero();
    let mut sum = T::zero();
    for r in 1..=active_max {
        sum += singular[r - 1];
        level = (inv_c + T::of(r as f64)) / sum;
        let last_on = level * singular[r - 1] > T::one();
        let next_off = r == active_max || level * singular[r] <= T::one();
        if last_on && next_off {
            break;
        }
    }
    let gains = singular
        .iter()
        .enumerate()
        .map(|(l, &s)| if l < active_max { c * (level * s - T::one()).max(T::zero()) } else { T::zero() })
        .collect();
    Ok(WaterFill { gains, level })
}

/// Excess MSE contributed by one block under the allocation `fill`.
pub fn block_emse<T: Real>(singular: &[T], fill: &WaterFill<T>, channels: usize) -> T {
    singular.iter().enumerate().fold(T::zero(), |acc, (l, &s)| {
        let s2 = s * s;
        if l < channels {
            acc + s2 / ((fill.level * s - T::one()).max(T::zero()) + T::one())
        } else {
            acc + s2
        }
    })
}
