//! Task-based design of the analog combiner and digital filter.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::equalize::equalizing_unitary;
use super::waterfill::{block_emse, waterfill, WaterFill};
use crate::adc::QuantizerSpec;
use crate::error::{Error, Result};
use crate::linalg::{fbar_adjoint, fbar_apply, hermitian_inv_sqrt, hermitian_inverse, trace_re, CMatrix, CVector};
use crate::scalar::{czero, Real};
use crate::statistics::{apply_blocks, block_diagonal, CompressionMatrix, SignalStatistics};

/// Channel count, quantizer resolution and support multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub channels: usize,
    pub levels: u64,
    pub eta: f64,
}

impl DesignParams {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::InvalidArgument("at least one channel is required".into()));
        }
        if self.levels < 2 || !self.levels.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("level count {} must be a power of two >= 2", self.levels)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    /// Quantizer support `η / √P`.
    pub fn support(&self) -> f64 {
        self.eta / (self.channels as f64).sqrt()
    }
}

/// Variance of the complex quantization error, `4γ² / (3b²)`.
pub fn quantization_noise(support: f64, levels: u64) -> f64 {
    let b = levels as f64;
    4.0 * support * support / (3.0 * b * b)
}

/// Design of one tone block.
#[derive(Debug, Clone)]
pub struct BlockDesign<T: Real> {
    /// Analog combiner `B_i`, `P x MN`.
    pub combiner: CMatrix<T>,
    /// Digital filter block `D_i`, `J_i x P`.
    pub filter: CMatrix<T>,
    /// Singular values of `M_i R_i Σ_i^{-1/2}`, descending.
    pub singular_values: Vec<T>,
    /// Right singular vectors as columns, `MN x J_i`.
    pub right_vectors: CMatrix<T>,
    /// Squared mode gains `Λ²` and the water level.
    pub fill: WaterFill<T>,
    /// Unitary that equalizes the channel powers, `P x P`.
    pub rotation: CMatrix<T>,
    pub emse: T,
    pub lmmse: T,
}

impl<T: Real> BlockDesign<T> {
    /// Sum of the squared mode gains, `Tr(ΛΛᵀ)`.
    pub fn gain_trace(&self) -> T {
        self.fill.gains.iter().fold(T::zero(), |a, &g| a + g)
    }
}

/// A complete acquisition design: per-tone combiners and filters plus the
/// shared quantizer settings.
#[derive(Debug, Clone)]
pub struct AcquisitionDesign<T: Real> {
    pub blocks: Vec<BlockDesign<T>>,
    pub params: DesignParams,
    /// Quantizer support `γ`.
    pub support: f64,
    /// Theoretical excess MSE over the LMMSE benchmark.
    pub emse: T,
    pub lmmse: T,
}

impl<T: Real> AcquisitionDesign<T> {
    pub fn channels(&self) -> usize {
        self.params.channels
    }

    pub fn tones(&self) -> usize {
        self.blocks.len()
    }

    pub fn levels(&self) -> u64 {
        self.params.levels
    }

    pub fn quantizer(&self, dither: bool) -> Result<QuantizerSpec> {
        QuantizerSpec::new(self.params.levels, self.support, dither)
    }

    pub fn quantization_noise(&self) -> f64 {
        quantization_noise(self.support, self.params.levels)
    }

    pub fn combiners(&self) -> Vec<CMatrix<T>> {
        self.blocks.iter().map(|b| b.combiner.clone()).collect()
    }

    pub fn filters(&self) -> Vec<CMatrix<T>> {
        self.blocks.iter().map(|b| b.filter.clone()).collect()
    }

    /// Analog samples `F̄ B̄ x` for a tone-major input `x`.
    pub fn acquire(&self, x: &CVector<T>) -> Result<CVector<T>> {
        let mixed = apply_blocks(&self.combiners(), x)?;
        fbar_apply(&mixed, self.channels(), self.tones())
    }

    /// Task estimate `blkdiag(D_i) F̄ᴴ z` from quantized samples.
    pub fn estimate(&self, z: &CVector<T>) -> Result<CVector<T>> {
        let u = fbar_adjoint(z, self.channels(), self.tones())?;
        apply_blocks(&self.filters(), &u)
    }

    /// The block-diagonal combiner `B̄` (`PL x MNL`).
    pub fn dense_combiner(&self) -> CMatrix<T> {
        block_diagonal(&self.combiners())
    }

    /// The digital filter `D` (`J x PL`), including the inverse DFT.
    pub fn dense_filter(&self) -> Result<CMatrix<T>> {
        let (p, l) = (self.channels(), self.tones());
        let mut fh = CMatrix::from_element(p * l, p * l, czero());
        for j in 0..p * l {
            let mut e = CVector::from_element(p * l, czero());
            e[j] = crate::scalar::cone();
            fh.set_column(j, &fbar_adjoint(&e, p, l)?);
        }
        Ok(block_diagonal(&self.filters()) * fh)
    }
}

/// Designs the combiner and filter for one tone block.
pub fn design_block<T: Real>(
    task: &CMatrix<T>,
    signal: &CMatrix<T>,
    total: &CMatrix<T>,
    params: &DesignParams,
) -> Result<BlockDesign<T>> {
    params.validate()?;
    let dim = total.nrows();
    if task.ncols() != dim || signal.shape() != (dim, dim) || total.ncols() != dim {
        return Err(Error::Dimension("task matrix and covariances disagree in size".into()));
    }
    let p = params.channels;
    let inv_sqrt = hermitian_inv_sqrt(total, "block covariance")?;
    let projected = task * signal;
    let whitened = &projected * &inv_sqrt;

    let svd = whitened.clone().try_svd(true, true, T::of(1e-15), 10_000)
        .ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Decomposition("SVD returned no right vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let singular: Vec<T> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let right = DMatrix::from_fn(dim, order.len(), |r, c| vt[(order[c], r)].conj());

    let fill = waterfill(&singular, p, task.nrows(), params.levels, params.eta)?;
    let modes = singular.len().min(p);

    let mut power = CMatrix::from_element(p, p, czero());
    for l in 0..modes {
        power[(l, l)] = crate::scalar::creal(fill.gains[l]);
    }
    let rotation = equalizing_unitary(&power)?;

    // B = U Λ Vᴴ Σ^{-1/2}, keeping only the modes that can carry gain.
    let mut scaled = CMatrix::from_element(modes, dim, czero());
    for l in 0..modes {
        let g = fill.gains[l].sqrt();
        for c in 0..dim {
            scaled[(l, c)] = right[(c, l)].conj().scale(g);
        }
    }
    let combiner = rotation.columns(0, modes) * scaled * &inv_sqrt;

    let noise = T::of(quantization_noise(params.support(), params.levels));
    let filter = filter_for(&projected, &combiner, total, noise)?;

    let emse = block_emse(&singular, &fill, p);
    let lmmse = (trace_re(&(&projected * task.adjoint())) - singular.iter().fold(T::zero(), |a, &s| a + s * s)).max(T::zero());
    Ok(BlockDesign { combiner, filter, singular_values: singular, right_vectors: right, fill, rotation, emse, lmmse })
}

/// Linear filter minimizing the modeled MSE for a fixed combiner,
/// `T Bᴴ (B Σ Bᴴ + σ_q² I)⁻¹`.
fn filter_for<T: Real>(projected: &CMatrix<T>, combiner: &CMatrix<T>, total: &CMatrix<T>, noise: T) -> Result<CMatrix<T>> {
    let p = combiner.nrows();
    let inner = combiner * total * combiner.adjoint() + CMatrix::identity(p, p).scale(noise);
    Ok(projected * combiner.adjoint() * hermitian_inverse(&inner, "filter inner matrix")?)
}

/// Block-diagonal design over all tones.
pub fn design_multitone<T: Real>(
    stats: &SignalStatistics<T>,
    comp: &CompressionMatrix<T>,
    params: &DesignParams,
) -> Result<AcquisitionDesign<T>> {
    params.validate()?;
    if stats.blocks() != comp.blocks().len() || stats.block_dim() != comp.block(0).ncols() {
        return Err(Error::Dimension("statistics and compression blocks disagree".into()));
    }
    let blocks = (0..stats.blocks())
        .into_par_iter()
        .map(|i| design_block(comp.block(i), stats.signal(i), stats.total(i), params))
        .collect::<Result<Vec<_>>>()?;
    let emse = blocks.iter().fold(T::zero(), |a, b| a + b.emse);
    let lmmse = blocks.iter().fold(T::zero(), |a, b| a + b.lmmse);
    Ok(AcquisitionDesign { blocks, params: *params, support: params.support(), emse, lmmse })
}

/// Single-tone design.
pub fn design_monotone<T: Real>(
    stats: &SignalStatistics<T>,
    comp: &CompressionMatrix<T>,
    params: &DesignParams,
) -> Result<AcquisitionDesign<T>> {
    if stats.blocks() != 1 {
        return Err(Error::InvalidArgument(format!("single-tone design needs one block, got {}", stats.blocks())));
    }
    design_multitone(stats, comp, params)
}

/// Quantizer support the η rule assigns to an arbitrary combiner:
/// `η · sqrt(max_p (1/L) Σ_i (B_i Σ_i B_iᴴ)_pp)`.
pub fn support_for_combiner<T: Real>(combiners: &[CMatrix<T>], stats: &SignalStatistics<T>, eta: f64) -> Result<f64> {
    if combiners.len() != stats.blocks() {
        return Err(Error::Dimension("one combiner per block is required".into()));
    }
    let p = combiners[0].nrows();
    let mut power = vec![0.0; p];
    for (b, i) in combiners.iter().zip(0..) {
        let cov = b * stats.total(i) * b.adjoint();
        for (q, acc) in power.iter_mut().enumerate() {
            *acc += cov[(q, q)].re.as_f64() / combiners.len() as f64;
        }
    }
    Ok(eta * power.iter().cloned().fold(0.0, f64::max).sqrt())
}

/// Excess MSE of the best linear filter for an arbitrary combiner:
/// `Σ_i Tr[T_i (Σ_i⁻¹ − B_iᴴ (B_i Σ_i B_iᴴ + σ_q² I)⁻¹ B_i) T_iᴴ]` with
/// `T_i = M_i R_i`.
pub fn emse_of_combiner<T: Real>(
    combiners: &[CMatrix<T>],
    stats: &SignalStatistics<T>,
    comp: &CompressionMatrix<T>,
    support: f64,
    levels: u64,
) -> Result<T> {
    if combiners.len() != stats.blocks() || comp.blocks().len() != stats.blocks() {
        return Err(Error::Dimension("one combiner per block is required".into()));
    }
    let noise = T::of(quantization_noise(support, levels));
    let mut total = T::zero();
    for (i, b) in combiners.iter().enumerate() {
        let t = comp.block(i) * stats.signal(i);
        let sigma = stats.total(i);
        let p = b.nrows();
        let inner = hermitian_inverse(&(b * sigma * b.adjoint() + CMatrix::identity(p, p).scale(noise)), "combiner inner matrix")?;
        let middle = hermitian_inverse(sigma, "block covariance")? - b.adjoint() * inner * b;
        total += trace_re(&(&t * middle * t.adjoint()));
    }
    Ok(total)
}

/// Modeled `E‖s̃ − ŝ‖²` for given combiners and filters under the additive
/// quantization-noise model.
pub fn modeled_excess_mse<T: Real>(
    combiners: &[CMatrix<T>],
    filters: &[CMatrix<T>],
    stats: &SignalStatistics<T>,
    comp: &CompressionMatrix<T>,
    noise: f64,
) -> Result<T> {
    let gammas = crate::statistics::lmmse_transform(stats, comp)?;
    let mut total = T::zero();
    for i in 0..stats.blocks() {
        let err = &gammas[i] - &filters[i] * &combiners[i];
        total += trace_re(&(&err * stats.total(i) * err.adjoint()));
        total += T::of(noise) * trace_re(&(&filters[i] * filters[i].adjoint()));
    }
    Ok(total)
}
