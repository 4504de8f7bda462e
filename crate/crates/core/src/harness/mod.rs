//! Monte Carlo experiment engine comparing the task-based receiver with
//! unquantized and task-ignorant baselines.

mod seed;
mod sweep;
mod trial;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrayParams, CoeffModel, RadarConfig};
use crate::recovery::RecoverySpec;
use crate::statistics::CompressionKind;

pub use seed::{stream_rng, Stream};
pub use sweep::{run_point, run_sweep, write_csv, ExperimentResult, MethodSummary, PointSpec, Provenance, CSV_HEADER};
pub use trial::{PointContext, TrialInput, TrialMetrics};

/// Receiver pipelines compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Designed analog combiner, low-resolution ADCs and digital filter.
    Bilimo,
    /// Every coefficient quantized directly within the same bit budget.
    TaskIgnorant,
    /// Recovery from the unquantized coefficients.
    NoquanDr,
    /// Recovery from the unquantized LMMSE task estimate.
    NoquanLmmse,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bilimo, Method::TaskIgnorant, Method::NoquanDr, Method::NoquanLmmse];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bilimo => "bilimo",
            Self::TaskIgnorant => "task_ignorant",
            Self::NoquanDr => "noquan_dr",
            Self::NoquanLmmse => "noquan_lmmse",
        }
    }

    pub fn quantizes(self) -> bool {
        matches!(self, Self::Bilimo | Self::TaskIgnorant)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Array geometry used when no explicit configuration is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Ula,
    #[default]
    Random,
}

/// A full experiment: geometry, sweep axes, methods and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Explicit configuration; generated from `array` and `params` if absent.
    pub config: Option<RadarConfig>,
    pub array: ArrayKind,
    pub params: ArrayParams,
    pub budget_bits: Vec<u64>,
    pub snr_db: Vec<f64>,
    pub dcr: Vec<f64>,
    pub k: Vec<usize>,
    pub matrix_kinds: Vec<CompressionKind>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    pub coeff_model: CoeffModel,
    pub recovery: RecoverySpec,
    /// Run sparse recovery; when off only task-vector metrics are produced.
    pub recover: bool,
    pub dither: bool,
    /// Fill the `wall_ms` CSV column (makes the CSV run-dependent).
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            config: None,
            array: ArrayKind::Random,
            params: ArrayParams::default(),
            budget_bits: vec![1728],
            snr_db: vec![10.0],
            dcr: vec![2.0],
            k: vec![4],
            matrix_kinds: vec![CompressionKind::Gaussian],
            methods: Method::ALL.to_vec(),
            trials: 100,
            seed: 0,
            coeff_model: CoeffModel::Gaussian,
            recovery: RecoverySpec::default(),
            recover: true,
            dither: true,
            timing: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = self.budget_bits.is_empty()
            || self.snr_db.is_empty()
            || self.dcr.is_empty()
            || self.k.is_empty()
            || self.matrix_kinds.is_empty()
            || self.methods.is_empty();
        if empty {
            return Err(Error::InvalidConfig("every sweep axis and the method list must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.k.contains(&0) {
            return Err(Error::InvalidConfig("target counts must be at least 1".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("SNR values must be finite".into()));
        }
        self.recovery.validate()
    }

    /// The radar configuration of the experiment.
    pub fn resolve_config(&self) -> Result<RadarConfig> {
        let cfg = match (&self.config, self.array) {
            (Some(cfg), _) => cfg.clone(),
            (None, ArrayKind::Ula) => RadarConfig::ula(&self.params)?,
            (None, ArrayKind::Random) => RadarConfig::random_array(&self.params, &mut stream_rng(self.seed, u64::MAX, u64::MAX, Stream::Geometry))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep points in output order.
    pub fn points(&self) -> Vec<PointSpec> {
        let mut out = Vec::new();
        for &budget_bits in &self.budget_bits {
            for &snr_db in &self.snr_db {
                for &dcr in &self.dcr {
                    for &k in &self.k {
                        for &kind in &self.matrix_kinds {
                            out.push(PointSpec { index: out.len() as u64, budget_bits, snr_db, dcr, k, kind });
                        }
                    }
                }
            }
        }
        out
    }
}
