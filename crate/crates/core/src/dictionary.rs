//! Steering matrices, the grid dictionary and the coefficient orderings.
//!
//! Two orderings of the Fourier-coefficient vector appear throughout:
//! transmitter-major (`m, tone, n`), produced directly by the dictionary,
//! and tone-major (`tone, m, n`), in which the per-tone blocks are
//! contiguous. [`Permutation`] maps the first to the second.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{RadarConfig, TargetScene};
use crate::scalar::{cabs, cis, czero, Real};

/// Default cap on the number of entries of a materialized dictionary.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

/// Index map from transmitter-major to tone-major coefficient order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
}

impl Permutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; forward.len()];
        for &i in &forward {
            if i >= forward.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument("index map is not a permutation".into()));
            }
        }
        Ok(Self { forward })
    }

    /// The coefficient reordering for a configuration.
    pub fn for_config(cfg: &RadarConfig) -> Self {
        let (m, n, l) = (cfg.tx_count, cfg.rx_count, cfg.tones);
        let mut forward = vec![0; m * n * l];
        for t in 0..m {
            for k in 0..l {
                for r in 0..n {
                    forward[t * n * l + k * n + r] = k * m * n + t * n + r;
                }
            }
        }
        Self { forward }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Destination of source position `i`.
    pub fn target(&self, i: usize) -> usize {
        self.forward[i]
    }

    /// `y = P x`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        let mut y = x.to_vec();
        for (i, &j) in self.forward.iter().enumerate() {
            y[j] = x[i];
        }
        Ok(y)
    }

    /// `x = Pᵀ y`.
    pub fn apply_inverse<T: Copy>(&self, y: &[T]) -> Result<Vec<T>> {
        self.check(y.len())?;
        Ok(self.forward.iter().map(|&j| y[j]).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.forward.len() {
            return Err(Error::Dimension(format!("vector has length {len}, permutation has {}", self.forward.len())));
        }
        Ok(())
    }
}

/// Per-transmitter angle (`N x MN`) and delay (`L x ML`) steering matrices.
///
/// The dictionary `Φ` stacks `V_m ⊗ U_m` over transmitters; it is applied
/// matrix-free and only materialized on request.
#[derive(Debug, Clone)]
pub struct SteeringDictionary<T: Real> {
    tx: usize,
    rx: usize,
    tones: usize,
    angle: Vec<CMatrix<T>>,
    delay: Vec<CMatrix<T>>,
    delay_t: Vec<CMatrix<T>>,
    delay_conj: Vec<CMatrix<T>>,
    angle_h: Vec<CMatrix<T>>,
    perm: Permutation,
}

impl<T: Real> SteeringDictionary<T> {
    pub fn new(cfg: &RadarConfig) -> Result<Self> {
        cfg.validate()?;
        let (m, n, l) = (cfg.tx_count, cfg.rx_count, cfg.tones);
        let (mn, ml) = (m * n, m * l);
        let angle: Vec<CMatrix<T>> = (0..m)
            .map(|t| {
                DMatrix::from_fn(n, mn, |r, g| {
                    let pos = cfg.tx_positions[t] + cfg.rx_positions[r];
                    cis(TAU * pos * (-1.0 + 2.0 * g as f64 / mn as f64))
                })
            })
            .collect();
        let delay: Vec<CMatrix<T>> = (0..m)
            .map(|t| {
                let offset = cfg.tone_offsets_hz[t] * cfg.pri_s;
                DMatrix::from_fn(l, ml, |k, g| {
                    let i = cfg.tone_index(k) as f64;
                    cis(-TAU * (i + offset) * g as f64 / ml as f64)
                })
            })
            .collect();
        Self::from_steering(cfg, angle, delay)
    }

    /// Builds a dictionary from stored steering matrices.
    pub fn from_steering(cfg: &RadarConfig, angle: Vec<CMatrix<T>>, delay: Vec<CMatrix<T>>) -> Result<Self> {
        cfg.validate()?;
        let (m, n, l) = (cfg.tx_count, cfg.rx_count, cfg.tones);
        let ok = angle.len() == m
            && delay.len() == m
            && angle.iter().all(|u| u.shape() == (n, m * n))
            && delay.iter().all(|v| v.shape() == (l, m * l));
        if !ok {
            return Err(Error::Dimension("steering matrices do not match the configuration".into()));
        }
        Ok(Self {
            tx: m,
            rx: n,
            tones: l,
            delay_t: delay.iter().map(|v| v.transpose()).collect(),
            delay_conj: delay.iter().map(|v| v.map(|z| z.conj())).collect(),
            angle_h: angle.iter().map(|u| u.adjoint()).collect(),
            angle,
            delay,
            perm: Permutation::for_config(cfg),
        })
    }

    pub fn virtual_len(&self) -> usize {
        self.tx * self.rx
    }

    pub fn delay_len(&self) -> usize {
        self.tx * self.tones
    }

    pub fn coeff_len(&self) -> usize {
        self.virtual_len() * self.tones
    }

    pub fn grid_len(&self) -> usize {
        self.virtual_len() * self.delay_len()
    }

    pub fn tones(&self) -> usize {
        self.tones
    }

    /// Angle steering matrix `U_m`.
    pub fn angle_steering(&self, m: usize) -> &CMatrix<T> {
        &self.angle[m]
    }

    /// Delay steering matrix `V_m`.
    pub fn delay_steering(&self, m: usize) -> &CMatrix<T> {
        &self.delay[m]
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// `Φ a` in transmitter-major order.
    pub fn apply(&self, a: &CVector<T>) -> Result<CVector<T>> {
        if a.len() != self.grid_len() {
            return Err(Error::Dimension(format!("grid vector has length {}, expected {}", a.len(), self.grid_len())));
        }
        let grid = DMatrix::from_column_slice(self.virtual_len(), self.delay_len(), a.as_slice());
        let block = self.rx * self.tones;
        let mut out = CVector::from_element(self.coeff_len(), czero());
        for t in 0..self.tx {
            let c = &self.angle[t] * (&grid * &self.delay_t[t]);
            out.rows_mut(t * block, block).copy_from_slice(c.as_slice());
        }
        Ok(out)
    }

    /// `Φᴴ c̃` for a transmitter-major coefficient vector.
    pub fn apply_adjoint(&self, c: &CVector<T>) -> Result<CVector<T>> {
        if c.len() != self.coeff_len() {
            return Err(Error::Dimension(format!("coefficient vector has length {}, expected {}", c.len(), self.coeff_len())));
        }
        let block = self.rx * self.tones;
        let mut acc = CMatrix::from_element(self.virtual_len(), self.delay_len(), czero());
        for t in 0..self.tx {
            let ct = DMatrix::from_column_slice(self.rx, self.tones, &c.as_slice()[t * block..(t + 1) * block]);
            acc += (&self.angle_h[t] * ct) * &self.delay_conj[t];
        }
        Ok(CVector::from_column_slice(acc.as_slice()))
    }

    /// `P Φ a`, the tone-major coefficient vector.
    pub fn apply_tone_major(&self, a: &CVector<T>) -> Result<CVector<T>> {
        let c = self.apply(a)?;
        Ok(CVector::from_vec(self.perm.apply(c.as_slice())?))
    }

    /// `Φᴴ Pᵀ c` for a tone-major coefficient vector.
    pub fn apply_tone_major_adjoint(&self, c: &CVector<T>) -> Result<CVector<T>> {
        let ct = CVector::from_vec(self.perm.apply_inverse(c.as_slice())?);
        self.apply_adjoint(&ct)
    }

    /// Materializes `Φ` (`MNL x M²NL`), refusing beyond `cap` entries.
    pub fn dense(&self, cap: usize) -> Result<CMatrix<T>> {
        let requested = self.coeff_len() * self.grid_len();
        if requested > cap {
            return Err(Error::MemoryCap { requested, cap });
        }
        let (n, l, mn) = (self.rx, self.tones, self.virtual_len());
        let mut phi = CMatrix::from_element(self.coeff_len(), self.grid_len(), czero());
        for t in 0..self.tx {
            for k in 0..l {
                for r in 0..n {
                    let row = t * n * l + k * n + r;
                    for g1 in 0..self.delay_len() {
                        let v = self.delay[t][(k, g1)];
                        for g2 in 0..mn {
                            phi[(row, g1 * mn + g2)] = v * self.angle[t][(r, g2)];
                        }
                    }
                }
            }
        }
        Ok(phi)
    }
}

/// Fourier coefficients of a scene evaluated term by term from the target
/// delays and azimuths, in transmitter-major order.
pub fn eval_coefficients_direct<T: Real>(scene: &TargetScene, cfg: &RadarConfig) -> CVector<T> {
    let (m, n, l) = (cfg.tx_count, cfg.rx_count, cfg.tones);
    let mut out = CVector::from_element(m * n * l, czero());
    for t in 0..m {
        for k in 0..l {
            let i = cfg.tone_index(k) as f64;
            for r in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for tgt in &scene.targets {
                    let tau = tgt.cell.delay_s(cfg);
                    let theta = tgt.cell.azimuth_sine(cfg);
                    let phase = (cfg.tx_positions[t] + cfg.rx_positions[r]) * theta
                        - i * tau / cfg.pri_s
                        - cfg.tone_offsets_hz[t] * tau;
                    acc += tgt.coeff * Complex::from_polar(1.0, TAU * phase);
                }
                out[t * n * l + k * n + r] = Complex::new(T::of(acc.re), T::of(acc.im));
            }
        }
    }
    out
}

/// Mutual coherence: the largest normalized inner product between two
/// distinct columns.
pub fn coherence<T: Real>(a: &CMatrix<T>) -> Result<T> {
    let mut normalized = a.clone();
    for (j, mut col) in normalized.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == T::zero() {
            return Err(Error::InvalidArgument(format!("column {j} is zero")));
        }
        col.unscale_mut(norm);
    }
    let cols = a.ncols();
    let chunk = 256;
    let mut worst = T::zero();
    let mut start = 0;
    while start < cols {
        let w = chunk.min(cols - start);
        let gram = normalized.columns(start, w).adjoint() * &normalized;
        for i in 0..w {
            for j in 0..cols {
                if j != start + i {
                    worst = worst.max(cabs(gram[(i, j)]));
                }
            }
        }
        start += w;
    }
    Ok(worst.min(T::one()))
}
