//! Radar configuration, target scenes and the grid/sparse-vector layout.

use num_complex::Complex;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_normal, CVector};
use crate::scalar::{cplx, czero, Real};

/// Array geometry, waveform and noise parameters of a colocated MIMO radar.
///
/// Element positions are in carrier wavelengths; tone offsets in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub tx_count: usize,
    pub rx_count: usize,
    pub tones: usize,
    pub bandwidth_hz: f64,
    pub pri_s: f64,
    pub carrier_hz: f64,
    pub rx_positions: Vec<f64>,
    pub tx_positions: Vec<f64>,
    pub tone_offsets_hz: Vec<f64>,
    pub eta: f64,
    pub coeff_variance: f64,
    pub noise_variance: f64,
}

/// Scalar parameters shared by the configuration constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayParams {
    pub tx_count: usize,
    pub rx_count: usize,
    pub bandwidth_hz: f64,
    pub pri_s: f64,
    pub carrier_hz: f64,
    pub eta: f64,
    pub coeff_variance: f64,
    pub noise_variance: f64,
}

impl Default for ArrayParams {
    /// 8 transmitters, 12 receivers, 1 MHz bands and a 9 µs PRI (9 tones).
    fn default() -> Self {
        Self {
            tx_count: 8,
            rx_count: 12,
            bandwidth_hz: 1e6,
            pri_s: 9e-6,
            carrier_hz: 1e10,
            eta: 2.0,
            coeff_variance: 1.0,
            noise_variance: 0.1,
        }
    }
}

impl ArrayParams {
    fn tone_count(&self) -> Result<usize> {
        if self.tx_count == 0 || self.rx_count == 0 {
            return Err(Error::InvalidConfig("antenna counts must be at least 1".into()));
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("pri_s", self.pri_s),
            ("carrier_hz", self.carrier_hz),
            ("eta", self.eta),
            ("coeff_variance", self.coeff_variance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        let l = (self.bandwidth_hz * self.pri_s).round();
        if l < 1.0 || l % 2.0 == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bandwidth x PRI = {} must round to an odd tone count",
                self.bandwidth_hz * self.pri_s
            )));
        }
        Ok(l as usize)
    }

    fn build(&self, tx_positions: Vec<f64>, rx_positions: Vec<f64>, band_index: &[usize]) -> Result<RadarConfig> {
        let tones = self.tone_count()?;
        let centre = (self.tx_count as f64 + 1.0) / 2.0;
        let cfg = RadarConfig {
            tx_count: self.tx_count,
            rx_count: self.rx_count,
            tones,
            bandwidth_hz: self.bandwidth_hz,
            pri_s: self.pri_s,
            carrier_hz: self.carrier_hz,
            rx_positions,
            tx_positions,
            tone_offsets_hz: band_index.iter().map(|&i| (i as f64 - centre) * self.bandwidth_hz).collect(),
            eta: self.eta,
            coeff_variance: self.coeff_variance,
            noise_variance: self.noise_variance,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RadarConfig {
    /// Uniform linear arrays whose virtual array is a half-wavelength ULA.
    pub fn ula(params: &ArrayParams) -> Result<Self> {
        let (m, n) = (params.tx_count, params.rx_count);
        let rx = (0..n).map(|i| i as f64 / 2.0).collect();
        let tx = (0..m).map(|i| (n * i) as f64 / 2.0).collect();
        let bands: Vec<usize> = (0..m).collect();
        params.build(tx, rx, &bands)
    }

    /// Element positions drawn uniformly over the virtual aperture and
    /// band centres assigned by a random permutation.
    pub fn random_array<R: Rng + ?Sized>(params: &ArrayParams, rng: &mut R) -> Result<Self> {
        params.tone_count()?;
        let (m, n) = (params.tx_count, params.rx_count);
        let aperture = (m * n) as f64 / 2.0;
        let mut draw = |count: usize| -> Vec<f64> {
            (0..count)
                .map(|i| if i == 0 { 0.0 } else { rng.random::<f64>() * aperture })
                .collect()
        };
        let rx = draw(n);
        let tx = draw(m);
        let mut bands: Vec<usize> = (0..m).collect();
        bands.shuffle(rng);
        params.build(tx, rx, &bands)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.tx_count == 0 || self.rx_count == 0 {
            return bad("antenna counts must be at least 1".into());
        }
        if self.tones.is_multiple_of(2) {
            return bad(format!("tone count {} must be odd", self.tones));
        }
        if (self.bandwidth_hz * self.pri_s).round() as usize != self.tones {
            return bad(format!(
                "tone count {} does not match bandwidth x PRI = {}",
                self.tones,
                self.bandwidth_hz * self.pri_s
            ));
        }
        if self.rx_positions.len() != self.rx_count
            || self.tx_positions.len() != self.tx_count
            || self.tone_offsets_hz.len() != self.tx_count
        {
            return bad("position and tone-offset lists must match the antenna counts".into());
        }
        if self.rx_positions[0] != 0.0 || self.tx_positions[0] != 0.0 {
            return bad("the first transmit and receive elements must sit at the origin".into());
        }
        if self.rx_positions.iter().chain(&self.tx_positions).chain(&self.tone_offsets_hz).any(|v| !v.is_finite()) {
            return bad("positions and tone offsets must be finite".into());
        }
        let mut f = self.tone_offsets_hz.clone();
        f.sort_by(f64::total_cmp);
        if f.windows(2).any(|w| w[1] - w[0] < self.bandwidth_hz * (1.0 - 1e-12)) {
            return bad("tone bands overlap".into());
        }
        if !(self.eta > 0.0 && self.coeff_variance > 0.0 && self.noise_variance >= 0.0) {
            return bad("eta and coefficient variance must be positive, noise variance nonnegative".into());
        }
        Ok(())
    }

    /// Number of virtual array elements, `MN`.
    pub fn virtual_len(&self) -> usize {
        self.tx_count * self.rx_count
    }

    /// Number of delay grid cells, `ML`.
    pub fn delay_len(&self) -> usize {
        self.tx_count * self.tones
    }

    /// Length of the Fourier-coefficient vector, `MNL`.
    pub fn coeff_len(&self) -> usize {
        self.virtual_len() * self.tones
    }

    /// Length of the sparse grid vector, `M²NL`.
    pub fn grid_len(&self) -> usize {
        self.virtual_len() * self.delay_len()
    }

    /// Tone index `i` in `-(L-1)/2 ..= (L-1)/2` for block `k`.
    pub fn tone_index(&self, k: usize) -> i64 {
        k as i64 - (self.tones as i64 - 1) / 2
    }

    /// Returns a copy with the noise variance set for the given SNR in dB.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        Self {
            noise_variance: snr_to_noise_variance(db_to_linear(snr_db), self.coeff_variance),
            ..self.clone()
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Noise variance giving the requested linear SNR.
///
/// Dictionary entries are unit modulus, so `E‖Φa‖² = K·MNL·σ_α²` and the
/// ratio reduces to `σ_α² / σ_n²`.
pub fn snr_to_noise_variance(snr_linear: f64, coeff_variance: f64) -> f64 {
    coeff_variance / snr_linear
}

/// A cell of the delay-angle grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub delay: usize,
    pub angle: usize,
}

impl GridCell {
    /// Position in `vec(A)` for an `MN x ML` grid matrix.
    pub fn flat_index(self, virtual_len: usize) -> usize {
        self.delay * virtual_len + self.angle
    }

    pub fn from_flat(index: usize, virtual_len: usize) -> Self {
        Self { delay: index / virtual_len, angle: index % virtual_len }
    }

    pub fn delay_s(self, cfg: &RadarConfig) -> f64 {
        cfg.pri_s * self.delay as f64 / cfg.delay_len() as f64
    }

    pub fn azimuth_sine(self, cfg: &RadarConfig) -> f64 {
        -1.0 + 2.0 * self.angle as f64 / cfg.virtual_len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub cell: GridCell,
    pub coeff: Complex<f64>,
}

/// Reflection-coefficient distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoeffModel {
    #[default]
    Gaussian,
    UnitModulus,
}

impl std::str::FromStr for CoeffModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "unit_modulus" => Ok(Self::UnitModulus),
            _ => Err(Error::InvalidArgument(format!("unknown coefficient model {s:?}"))),
        }
    }
}

/// On-grid point targets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetScene {
    pub targets: Vec<Target>,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>, cfg: &RadarConfig) -> Result<Self> {
        let mut cells: Vec<GridCell> = targets.iter().map(|t| t.cell).collect();
        if let Some(c) = cells.iter().find(|c| c.delay >= cfg.delay_len() || c.angle >= cfg.virtual_len()) {
            return Err(Error::InvalidArgument(format!("cell {c:?} lies outside the grid")));
        }
        cells.sort();
        if cells.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("targets must occupy distinct cells".into()));
        }
        Ok(Self { targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        self.targets.iter().map(|t| t.cell)
    }

    /// Draws `k` distinct cells uniformly and coefficients per `model`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, k: usize, cfg: &RadarConfig, model: CoeffModel) -> Result<Self> {
        let grid = cfg.grid_len();
        if k > grid {
            return Err(Error::InvalidArgument(format!("{k} targets exceed the {grid}-cell grid")));
        }
        let cells = index::sample(rng, grid, k);
        let targets = cells
            .into_iter()
            .map(|flat| {
                let coeff = match model {
                    CoeffModel::Gaussian => complex_normal::<f64, R>(rng, cfg.coeff_variance),
                    CoeffModel::UnitModulus => {
                        let phase = rng.random::<f64>() * std::f64::consts::TAU;
                        Complex::from_polar(cfg.coeff_variance.sqrt(), phase)
                    }
                };
                Target { cell: GridCell::from_flat(flat, cfg.virtual_len()), coeff }
            })
            .collect();
        Ok(Self { targets })
    }

    /// The sparse grid vector `a = vec(A)`.
    pub fn to_sparse_vector<T: Real>(&self, cfg: &RadarConfig) -> CVector<T> {
        let mut a = CVector::from_element(cfg.grid_len(), czero());
        for t in &self.targets {
            a[t.cell.flat_index(cfg.virtual_len())] = cplx(t.coeff.re, t.coeff.im);
        }
        a
    }

    /// Rebuilds a scene from the nonzero entries of a grid vector.
    pub fn from_sparse_vector<T: Real>(a: &CVector<T>, cfg: &RadarConfig) -> Result<Self> {
        if a.len() != cfg.grid_len() {
            return Err(Error::Dimension(format!("grid vector has length {}, expected {}", a.len(), cfg.grid_len())));
        }
        let targets = a
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != T::zero() || z.im != T::zero())
            .map(|(i, z)| Target {
                cell: GridCell::from_flat(i, cfg.virtual_len()),
                coeff: Complex::new(z.re.as_f64(), z.im.as_f64()),
            })
            .collect();
        Ok(Self { targets })
    }
}
