//! Uniform mid-rise quantizers with optional non-subtractive dither.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::scalar::Real;

/// A `levels`-level mid-rise quantizer on `[-support, support]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    levels: u64,
    support: f64,
    dither: bool,
}

impl QuantizerSpec {
    pub fn new(levels: u64, support: f64, dither: bool) -> Result<Self> {
        if levels < 2 || !levels.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("level count {levels} must be a power of two >= 2")));
        }
        if !(support.is_finite() && support > 0.0) {
            return Err(Error::InvalidArgument(format!("support must be positive, got {support}")));
        }
        Ok(Self { levels, support, dither })
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn dither(&self) -> bool {
        self.dither
    }

    /// Step size `2γ / b`.
    pub fn step(&self) -> f64 {
        2.0 * self.support / self.levels as f64
    }

    /// Reconstruction value of cell `l`.
    pub fn level(&self, l: u64) -> f64 {
        -self.support + self.step() * (l as f64 + 0.5)
    }

    /// Quantizes one real sample; values beyond the support saturate to
    /// the outermost level.
    pub fn quantize(&self, x: f64) -> f64 {
        let cell = ((x + self.support) / self.step()).floor();
        let l = cell.clamp(0.0, (self.levels - 1) as f64) as u64;
        self.level(l)
    }

    /// Bits spent on `channels x tones` complex samples.
    pub fn bits(&self, channels: usize, tones: usize) -> u64 {
        2 * (channels * tones) as u64 * self.levels.trailing_zeros() as u64
    }
}

/// Quantized vector and the number of real samples that exceeded the support.
#[derive(Debug, Clone)]
pub struct Quantized<T: Real> {
    pub values: CVector<T>,
    pub overloaded: usize,
}

/// Quantizes real and imaginary parts independently, adding a uniform
/// dither on `[-Δ/2, Δ/2]` before quantization when enabled.
pub fn quantize_complex_vector<T: Real, R: Rng + ?Sized>(v: &CVector<T>, spec: &QuantizerSpec, rng: &mut R) -> Quantized<T> {
    let step = spec.step();
    let mut overloaded = 0;
    let mut one = |x: T| {
        let mut x = x.as_f64();
        if spec.dither {
            x += step * (rng.random::<f64>() - 0.5);
        }
        if x.abs() > spec.support {
            overloaded += 1;
        }
        T::of(spec.quantize(x))
    };
    let values = v.map(|z| {
        let re = one(z.re);
        let im = one(z.im);
        Complex::new(re, im)
    });
    Quantized { values, overloaded }
}

/// Bits per pulse for `channels` analog outputs sampled at `tones`
/// frequencies with `levels` levels per real dimension.
pub fn bits_per_pri(channels: usize, tones: usize, levels: u64) -> Result<u64> {
    if levels < 2 || !levels.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("level count {levels} must be a power of two >= 2")));
    }
    Ok(2 * (channels * tones) as u64 * levels.trailing_zeros() as u64)
}

/// Largest power-of-two level count that fits the budget.
pub fn levels_from_budget(budget_bits: u64, channels: usize, tones: usize) -> Result<u64> {
    let samples = 2 * (channels * tones) as u64;
    if samples == 0 {
        return Err(Error::InvalidArgument("no samples to quantize".into()));
    }
    let bits = budget_bits / samples;
    if bits == 0 {
        return Err(Error::BudgetTooSmall { budget: budget_bits, required: samples });
    }
    if bits > 62 {
        return Err(Error::InvalidArgument(format!("{bits} bits per sample exceeds the supported 62")));
    }
    Ok(1 << bits)
}
