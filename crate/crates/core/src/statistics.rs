//! Block-diagonal second-order statistics, compression matrices and the
//! LMMSE benchmark.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::Permutation;
use crate::error::{Error, Result};
use crate::linalg::{check_psd, complex_normal_matrix, hermitian_inverse, trace_re, CMatrix, CVector};
use crate::model::RadarConfig;
use crate::scalar::{cis, czero, Real};

/// Covariances of the tone-major coefficient vector `c` and of the noise
/// `w`, stored as their per-tone diagonal blocks.
#[derive(Debug, Clone)]
pub struct SignalStatistics<T: Real> {
    signal: Vec<CMatrix<T>>,
    noise: Vec<CMatrix<T>>,
    total: Vec<CMatrix<T>>,
}

impl<T: Real> SignalStatistics<T> {
    /// `R_c = K σ_α² I` and `R_w = σ_n² I`.
    pub fn isotropic(cfg: &RadarConfig, targets: usize) -> Self {
        let mn = cfg.virtual_len();
        let rc = CMatrix::identity(mn, mn).scale(T::of(targets as f64 * cfg.coeff_variance));
        let rw = CMatrix::identity(mn, mn).scale(T::of(cfg.noise_variance));
        let total = &rc + &rw;
        Self { signal: vec![rc; cfg.tones], noise: vec![rw; cfg.tones], total: vec![total; cfg.tones] }
    }

    /// Validated user-supplied blocks.
    pub fn from_blocks(signal: Vec<CMatrix<T>>, noise: Vec<CMatrix<T>>) -> Result<Self> {
        if signal.is_empty() || signal.len() != noise.len() {
            return Err(Error::Dimension("signal and noise need the same nonzero number of blocks".into()));
        }
        let dim = signal[0].nrows();
        for (i, (rc, rw)) in signal.iter().zip(&noise).enumerate() {
            if rc.shape() != (dim, dim) || rw.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("block {i} is not {dim}x{dim}")));
            }
            check_psd(rc, &format!("signal covariance block {i}"))?;
            check_psd(rw, &format!("noise covariance block {i}"))?;
        }
        let total = signal.iter().zip(&noise).map(|(a, b)| a + b).collect();
        Ok(Self { signal, noise, total })
    }

    /// Splits full covariance matrices into `block`-sized diagonal blocks,
    /// rejecting any nonzero entry outside them.
    pub fn from_dense(signal: &CMatrix<T>, noise: &CMatrix<T>, block: usize) -> Result<Self> {
        let split = |m: &CMatrix<T>, what: &str| -> Result<Vec<CMatrix<T>>> {
            let n = m.nrows();
            if block == 0 || m.ncols() != n || !n.is_multiple_of(block) {
                return Err(Error::Dimension(format!("{what} of size {}x{} does not split into {block}-blocks", n, m.ncols())));
            }
            for i in 0..n {
                for j in 0..n {
                    if i / block != j / block && m[(i, j)] != czero() {
                        return Err(Error::NotBlockDiagonal(format!("{what} has nonzero entry at ({i}, {j})")));
                    }
                }
            }
            Ok((0..n / block).map(|b| m.view((b * block, b * block), (block, block)).into_owned()).collect())
        };
        Self::from_blocks(split(signal, "signal covariance")?, split(noise, "noise covariance")?)
    }

    pub fn blocks(&self) -> usize {
        self.signal.len()
    }

    pub fn block_dim(&self) -> usize {
        self.signal[0].nrows()
    }

    pub fn signal(&self, i: usize) -> &CMatrix<T> {
        &self.signal[i]
    }

    pub fn noise(&self, i: usize) -> &CMatrix<T> {
        &self.noise[i]
    }

    /// `Σ_i = R_{c,i} + R_{w,i}`.
    pub fn total(&self, i: usize) -> &CMatrix<T> {
        &self.total[i]
    }

    /// Assembles the full block-diagonal covariance of `c + w`.
    pub fn dense_total(&self) -> CMatrix<T> {
        block_diagonal(&self.total)
    }

    pub fn dense_signal(&self) -> CMatrix<T> {
        block_diagonal(&self.signal)
    }
}

pub fn block_diagonal<T: Real>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::from_element(rows, cols, czero());
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Applies `blkdiag(blocks)` to a vector.
pub fn apply_blocks<T: Real>(blocks: &[CMatrix<T>], x: &CVector<T>) -> Result<CVector<T>> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    if x.len() != cols {
        return Err(Error::Dimension(format!("vector has length {}, block operator expects {cols}", x.len())));
    }
    let mut out = Vec::with_capacity(blocks.iter().map(|b| b.nrows()).sum());
    let mut offset = 0;
    for b in blocks {
        let y = b * x.rows(offset, b.ncols());
        out.extend_from_slice(y.as_slice());
        offset += b.ncols();
    }
    Ok(CVector::from_vec(out))
}

/// Applies `blkdiag(blocks)ᴴ` to a vector.
pub fn apply_blocks_adjoint<T: Real>(blocks: &[CMatrix<T>], y: &CVector<T>) -> Result<CVector<T>> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    if y.len() != rows {
        return Err(Error::Dimension(format!("vector has length {}, block adjoint expects {rows}", y.len())));
    }
    let mut out = Vec::with_capacity(blocks.iter().map(|b| b.ncols()).sum());
    let mut offset = 0;
    for b in blocks {
        let x = b.ad_mul(&y.rows(offset, b.nrows()));
        out.extend_from_slice(x.as_slice());
        offset += b.nrows();
    }
    Ok(CVector::from_vec(out))
}

/// Entry distribution of the compression blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompressionKind {
    #[default]
    Gaussian,
    Bernoulli,
    Dft,
}

impl CompressionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Bernoulli => "bernoulli",
            Self::Dft => "dft",
        }
    }
}

impl std::str::FromStr for CompressionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "bernoulli" => Ok(Self::Bernoulli),
            "dft" => Ok(Self::Dft),
            _ => Err(Error::InvalidArgument(format!("unknown matrix kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for CompressionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The task matrix, stored as per-tone blocks acting on the tone-major
/// coefficient vector. Each block is `J/L x MN`.
#[derive(Debug, Clone)]
pub struct CompressionMatrix<T: Real> {
    kind: CompressionKind,
    ratio: f64,
    blocks: Vec<CMatrix<T>>,
}

/// Task dimension for a compression ratio: `MNL / ratio` rounded down to a
/// multiple of the tone count.
pub fn task_rows(cfg: &RadarConfig, ratio: f64) -> Result<usize> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(Error::InvalidArgument(format!("compression ratio must be at least 1, got {ratio}")));
    }
    let raw = (cfg.coeff_len() as f64 / ratio).floor() as usize;
    let rows = raw - raw % cfg.tones;
    if rows == 0 {
        return Err(Error::InvalidArgument(format!("compression ratio {ratio} leaves no task rows per tone")));
    }
    Ok(rows)
}

impl<T: Real> CompressionMatrix<T> {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, cfg: &RadarConfig, ratio: f64, kind: CompressionKind) -> Result<Self> {
        let per_block = task_rows(cfg, ratio)? / cfg.tones;
        let mn = cfg.virtual_len();
        let blocks = (0..cfg.tones)
            .map(|_| match kind {
                CompressionKind::Gaussian => complex_normal_matrix(rng, per_block, mn, 1.0),
                CompressionKind::Bernoulli => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let mut m = CMatrix::from_element(per_block, mn, czero());
                    for j in 0..mn {
                        for i in 0..per_block {
                            let re = if rng.random::<bool>() { s } else { -s };
                            let im = if rng.random::<bool>() { s } else { -s };
                            m[(i, j)] = Complex::new(T::of(re), T::of(im));
                        }
                    }
                    m
                }
                CompressionKind::Dft => {
                    let rows = index::sample(rng, mn, per_block).into_vec();
                    DMatrix::from_fn(per_block, mn, |i, j| {
                        cis(-std::f64::consts::TAU * ((rows[i] * j) % mn) as f64 / mn as f64)
                    })
                }
            })
            .collect();
        Ok(Self { kind, ratio, blocks })
    }

    pub fn from_blocks(blocks: Vec<CMatrix<T>>, kind: CompressionKind) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::Dimension("no compression blocks".into()));
        };
        let shape = first.shape();
        if shape.0 == 0 || blocks.iter().any(|b| b.shape() != shape) {
            return Err(Error::Dimension("compression blocks must share one nonempty shape".into()));
        }
        let ratio = shape.1 as f64 / shape.0 as f64;
        Ok(Self { kind, ratio, blocks })
    }

    pub fn kind(&self) -> CompressionKind {
        self.kind
    }

    /// Requested compression ratio.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn blocks(&self) -> &[CMatrix<T>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMatrix<T> {
        &self.blocks[i]
    }

    /// Task rows per tone, `J_i`.
    pub fn block_rows(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Total task dimension `J`.
    pub fn rows(&self) -> usize {
        self.block_rows() * self.blocks.len()
    }

    /// Analog channels needed to carry the task, `⌈J / L⌉`.
    pub fn channels(&self) -> usize {
        self.rows().div_ceil(self.blocks.len())
    }

    /// `s = M Pᵀ c` for a tone-major `c`.
    pub fn apply(&self, c: &CVector<T>) -> Result<CVector<T>> {
        apply_blocks(&self.blocks, c)
    }

    pub fn apply_adjoint(&self, s: &CVector<T>) -> Result<CVector<T>> {
        apply_blocks_adjoint(&self.blocks, s)
    }

    /// The full task matrix acting on transmitter-major coefficients.
    pub fn dense(&self, perm: &Permutation) -> CMatrix<T> {
        let blk = block_diagonal(&self.blocks);
        let mut out = CMatrix::from_element(blk.nrows(), blk.ncols(), czero());
        for j in 0..perm.len() {
            out.set_column(j, &blk.column(perm.target(j)));
        }
        out
    }
}

fn check_compatible<T: Real>(stats: &SignalStatistics<T>, comp: &CompressionMatrix<T>) -> Result<()> {
    if stats.blocks() != comp.blocks.len() || stats.block_dim() != comp.blocks[0].ncols() {
        return Err(Error::Dimension(format!(
            "statistics have {} blocks of size {}, compression has {} blocks of width {}",
            stats.blocks(),
            stats.block_dim(),
            comp.blocks.len(),
            comp.blocks[0].ncols()
        )));
    }
    Ok(())
}

/// Per-tone LMMSE transforms `Γ_i = M_i R_{c,i} Σ_i⁻¹`.
pub fn lmmse_transform<T: Real>(stats: &SignalStatistics<T>, comp: &CompressionMatrix<T>) -> Result<Vec<CMatrix<T>>> {
    check_compatible(stats, comp)?;
    (0..stats.blocks())
        .map(|i| {
            let inv = hermitian_inverse(stats.total(i), &format!("covariance block {i}"))?;
            Ok(comp.block(i) * stats.signal(i) * inv)
        })
        .collect()
}

/// LMMSE of the task vector, `Σ_i Tr[M_i R_i M_iᴴ − M_i R_i Σ_i⁻¹ R_i M_iᴴ]`.
pub fn lmmse_error<T: Real>(stats: &SignalStatistics<T>, comp: &CompressionMatrix<T>) -> Result<T> {
    check_compatible(stats, comp)?;
    let mut total = T::zero();
    for i in 0..stats.blocks() {
        let inv = hermitian_inverse(stats.total(i), &format!("covariance block {i}"))?;
        let t = comp.block(i) * stats.signal(i);
        let e = &t * comp.block(i).adjoint() - &t * inv * t.adjoint();
        total += trace_re(&e);
    }
    Ok(total.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArrayParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, l: usize, noise: f64) -> RadarConfig {
        let p = ArrayParams { tx_count: m, rx_count: n, pri_s: l as f64 * 1e-6, noise_variance: noise, ..Default::default() };
        RadarConfig::ula(&p).unwrap()
    }

    #[test]
    fn full_scale_dimensions() {
        let c = cfg(8, 12, 9, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CompressionMatrix::<f64>::random(&mut rng, &c, 2.0, CompressionKind::Gaussian).unwrap();
        assert_eq!((m.rows(), m.block_rows(), m.channels()), (432, 48, 48));
        assert_eq!(task_rows(&c, 4.0).unwrap(), 216);
        assert_eq!(task_rows(&c, 5.0).unwrap(), 171);
        assert!(task_rows(&c, 0.5).is_err());
        assert!(task_rows(&c, 1000.0).is_err());
    }

    #[test]
    fn full_dft_block_is_scaled_unitary() {
        let c = cfg(2, 3, 3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CompressionMatrix::<f64>::random(&mut rng, &c, 1.0, CompressionKind::Dft).unwrap();
        for b in m.blocks() {
            let g = b * b.adjoint();
            assert!((g - CMatrix::<f64>::identity(6, 6).scale(6.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn bernoulli_entries() {
        let c = cfg(2, 3, 3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CompressionMatrix::<f64>::random(&mut rng, &c, 2.0, CompressionKind::Bernoulli).unwrap();
        assert!(m.blocks().iter().flat_map(|b| b.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-12 && z.re.abs() == z.im.abs()));
    }

    #[test]
    fn reproducible_matrix() {
        let c = cfg(2, 3, 3, 0.1);
        let a = CompressionMatrix::<f64>::random(&mut ChaCha8Rng::seed_from_u64(7), &c, 2.0, CompressionKind::Gaussian).unwrap();
        let b = CompressionMatrix::<f64>::random(&mut ChaCha8Rng::seed_from_u64(7), &c, 2.0, CompressionKind::Gaussian).unwrap();
        assert_eq!(a.blocks(), b.blocks());
    }

    #[test]
    fn dense_task_matrix_is_block_diagonal_after_permutation() {
        let c = cfg(2, 3, 3, 0.1);
        let perm = Permutation::for_config(&c);
        let m = CompressionMatrix::<f64>::random(&mut ChaCha8Rng::seed_from_u64(2), &c, 2.0, CompressionKind::Gaussian).unwrap();
        let dense = m.dense(&perm);
        // M Pᴴ: column perm.target(j) of M Pᴴ is column j of M.
        let mut mp = CMatrix::<f64>::zeros(dense.nrows(), dense.ncols());
        for j in 0..perm.len() {
            mp.set_column(perm.target(j), &dense.column(j));
        }
        assert_eq!(mp, block_diagonal(m.blocks()));
    }

    #[test]
    fn scalar_wiener_gain() {
        let c = cfg(2, 3, 3, 0.5);
        let stats = SignalStatistics::<f64>::isotropic(&c, 2);
        let m = CompressionMatrix::<f64>::random(&mut ChaCha8Rng::seed_from_u64(3), &c, 1.0, CompressionKind::Gaussian).unwrap();
        let g = lmmse_transform(&stats, &m).unwrap();
        for (gi, mi) in g.iter().zip(m.blocks()) {
            assert!((gi - mi.scale(2.0 / 2.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn lmmse_identity_and_closed_form() {
        let c = cfg(1, 2, 3, 0.0);
        let stats = SignalStatistics::<f64>::isotropic(&c, 1);
        let eye = CompressionMatrix::from_blocks(vec![CMatrix::<f64>::identity(2, 2); 3], CompressionKind::Dft).unwrap();
        let g = lmmse_transform(&stats, &eye).unwrap();
        assert!(g.iter().all(|gi| (gi - CMatrix::<f64>::identity(2, 2)).norm() < 1e-12));
        assert!(lmmse_error(&stats, &eye).unwrap().abs() < 1e-12);

        let noisy = cfg(1, 2, 3, 0.25);
        let stats = SignalStatistics::<f64>::isotropic(&noisy, 3);
        let row = CMatrix::<f64>::from_row_slice(1, 2, &[Complex::new(0.6, 0.0), Complex::new(0.0, 0.8)]);
        let m = CompressionMatrix::from_blocks(vec![row; 3], CompressionKind::Gaussian).unwrap();
        let want = 3.0 * 3.0 * 0.25 / 3.25;
        assert!((lmmse_error(&stats, &m).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_and_zero_noise() {
        let c = cfg(1, 2, 1, 0.3);
        let s = SignalStatistics::<f64>::isotropic(&c, 0);
        assert_eq!(s.total(0), s.noise(0));
        let q = cfg(1, 2, 1, 0.0);
        let s = SignalStatistics::<f64>::isotropic(&q, 4);
        assert_eq!(s.total(0), s.signal(0));
        assert!((s.signal(0)[(0, 0)].re - 4.0).abs() < 1e-15);
    }

    #[test]
    fn dense_inputs_validated() {
        let mut rc = CMatrix::<f64>::identity(4, 4);
        let rw = CMatrix::<f64>::identity(4, 4).scale(0.1);
        assert!(SignalStatistics::from_dense(&rc, &rw, 2).is_ok());
        rc[(0, 3)] = Complex::new(0.1, 0.0);
        rc[(3, 0)] = Complex::new(0.1, 0.0);
        assert!(matches!(SignalStatistics::from_dense(&rc, &rw, 2), Err(Error::NotBlockDiagonal(_))));
        let mut bad = CMatrix::<f64>::identity(2, 2);
        bad[(1, 1)] = Complex::new(-2.0, 0.0);
        assert!(matches!(
            SignalStatistics::from_blocks(vec![bad], vec![CMatrix::identity(2, 2)]),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn blockwise_matches_full_matrices() {
        let c = cfg(2, 2, 3, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let blocks: Vec<CMatrix<f64>> = (0..3)
            .map(|_| {
                let g: CMatrix<f64> = complex_normal_matrix(&mut rng, 4, 6, 1.0);
                &g * g.adjoint()
            })
            .collect();
        let noise = vec![CMatrix::<f64>::identity(4, 4).scale(0.4); 3];
        let stats = SignalStatistics::from_blocks(blocks, noise).unwrap();
        let m = CompressionMatrix::<f64>::random(&mut rng, &c, 2.0, CompressionKind::Gaussian).unwrap();
        let blk = block_diagonal(m.blocks());
        let rc = stats.dense_signal();
        let sigma = stats.dense_total();
        let inv = sigma.clone().try_inverse().unwrap();
        let full = (&blk * &rc * blk.adjoint() - &blk * &rc * &inv * &rc * blk.adjoint()).trace().re;
        let fast = lmmse_error(&stats, &m).unwrap();
        assert!((full - fast).abs() <= 1e-10 * full.abs());
    }
}
