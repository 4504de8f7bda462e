use std::time::{Duration, Instant};

use crate::adc::{levels_from_budget, quantize_complex_vector, QuantizerSpec};
use crate::combiner::{design_multitone, AcquisitionDesign, DesignParams};
use crate::dictionary::SteeringDictionary;
use crate::error::{Error, Result};
use crate::linalg::{complex_normal_vector, norm_sq, CMatrix, CVector};
use crate::model::{RadarConfig, TargetScene};
use crate::recovery::{
    debias, estimate_support, fista, hit_rate, lipschitz_constant, relative_mse, top_k_indices, LinearOperator,
    SensingOperator,
};
use crate::scalar::Real;
use crate::statistics::{apply_blocks, lmmse_error, lmmse_transform, CompressionMatrix, SignalStatistics};

use super::seed::{stream_rng, Stream};
use super::sweep::PointSpec;
use super::{ExperimentSpec, Method};

/// Everything shared by the trials of one sweep point, built once.
pub struct PointContext<'a, T: Real> {
    pub cfg: RadarConfig,
    pub dictionary: &'a SteeringDictionary<T>,
    pub point: PointSpec,
    pub spec: &'a ExperimentSpec,
    pub stats: SignalStatistics<T>,
    pub compression: CompressionMatrix<T>,
    pub design: Option<AcquisitionDesign<T>>,
    pub lmmse: Option<Vec<CMatrix<T>>>,
    pub direct_quantizer: Option<QuantizerSpec>,
    pub eps_lmmse: f64,
    lipschitz_task: Option<T>,
    lipschitz_coeff: Option<T>,
}

/// Ground truth and noisy observation of one trial.
#[derive(Debug, Clone)]
pub struct TrialInput<T: Real> {
    pub scene: TargetScene,
    pub grid: CVector<T>,
    /// Tone-major noiseless coefficients `c = PΦa`.
    pub coeffs: CVector<T>,
    /// Task vector `s`.
    pub task: CVector<T>,
    /// `c + w`.
    pub observed: CVector<T>,
}

/// Per-trial metrics of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub sq_err_s: f64,
    pub rel_mse_s: f64,
    pub rel_mse_a: Option<f64>,
    pub hit_rate: Option<f64>,
    pub overloaded: usize,
    pub quantized_samples: usize,
    pub iterations: usize,
}

impl<'a, T: Real> PointContext<'a, T> {
    pub fn new(spec: &'a ExperimentSpec, base: &RadarConfig, dictionary: &'a SteeringDictionary<T>, point: PointSpec) -> Result<Self> {
        let cfg = base.with_snr_db(point.snr_db);
        let stats = SignalStatistics::<T>::isotropic(&cfg, point.k);
        let mut rng = stream_rng(spec.seed, point.index, u64::MAX, Stream::Compression);
        let compression = CompressionMatrix::random(&mut rng, &cfg, point.dcr, point.kind)?;
        let eps_lmmse = lmmse_error(&stats, &compression)?.as_f64();
        let wants = |m: Method| spec.methods.contains(&m);

        let design = if wants(Method::Bilimo) {
            let channels = compression.channels();
            let levels = levels_from_budget(point.budget_bits, channels, cfg.tones)?;
            Some(design_multitone(&stats, &compression, &DesignParams { channels, levels, eta: cfg.eta })?)
        } else {
            None
        };
        let lmmse = if wants(Method::NoquanLmmse) { Some(lmmse_transform(&stats, &compression)?) } else { None };
        let direct_quantizer = if wants(Method::TaskIgnorant) {
            let levels = levels_from_budget(point.budget_bits, cfg.virtual_len(), cfg.tones)?;
            let std = (point.k as f64 * cfg.coeff_variance + cfg.noise_variance).sqrt();
            Some(QuantizerSpec::new(levels, cfg.eta * std, spec.dither)?)
        } else {
            None
        };

        let mut ctx = Self {
            cfg,
            dictionary,
            point,
            spec,
            stats,
            compression,
            design,
            lmmse,
            direct_quantizer,
            eps_lmmse,
            lipschitz_task: None,
            lipschitz_coeff: None,
        };
        if spec.recover {
            if wants(Method::Bilimo) || wants(Method::NoquanLmmse) {
                ctx.lipschitz_task = Some(lipschitz_constant(&ctx.task_operator(), 30, 1e-6)?);
            }
            if wants(Method::TaskIgnorant) || wants(Method::NoquanDr) {
                ctx.lipschitz_coeff = Some(lipschitz_constant(&ctx.coeff_operator(), 30, 1e-6)?);
            }
        }
        Ok(ctx)
    }

    pub fn task_operator(&self) -> SensingOperator<'_, T> {
        SensingOperator::task(self.dictionary, &self.compression)
    }

    pub fn coeff_operator(&self) -> SensingOperator<'_, T> {
        SensingOperator::coefficients(self.dictionary)
    }

    /// Draws the scene and noise of a trial.
    pub fn draw(&self, trial: u64) -> Result<TrialInput<T>> {
        let mut rng = stream_rng(self.spec.seed, self.point.index, trial, Stream::Scene);
        let scene = TargetScene::sample(&mut rng, self.point.k, &self.cfg, self.spec.coeff_model)?;
        let grid = scene.to_sparse_vector(&self.cfg);
        let coeffs = self.dictionary.apply_tone_major(&grid)?;
        let task = self.compression.apply(&coeffs)?;
        let mut rng = stream_rng(self.spec.seed, self.point.index, trial, Stream::Noise);
        let noise: CVector<T> = complex_normal_vector(&mut rng, coeffs.len(), self.cfg.noise_variance);
        let observed = &coeffs + noise;
        Ok(TrialInput { scene, grid, coeffs, task, observed })
    }

    fn recover(
        &self,
        op: &dyn LinearOperator<T>,
        lipschitz: Option<T>,
        measurement: &CVector<T>,
        input: &TrialInput<T>,
    ) -> Result<(Option<f64>, Option<f64>, usize)> {
        if !self.spec.recover {
            return Ok((None, None, 0));
        }
        let out = fista(op, measurement, &self.spec.recovery, lipschitz)?;
        let estimate = if self.spec.recovery.debias {
            debias(op, measurement, &top_k_indices(&out.estimate, self.point.k)?)?
        } else {
            out.estimate
        };
        let support = estimate_support(&estimate, self.point.k, self.cfg.virtual_len())?;
        let mse = relative_mse(&input.grid, &estimate)?.as_f64();
        Ok((Some(mse), Some(hit_rate(&input.scene, &support)), out.iterations))
    }

    fn metrics(
        &self,
        input: &TrialInput<T>,
        task_estimate: &CVector<T>,
        recovered: (Option<f64>, Option<f64>, usize),
        overloaded: usize,
        quantized_samples: usize,
    ) -> Result<TrialMetrics> {
        let sq_err_s = norm_sq((&input.task - task_estimate).as_slice()).as_f64();
        if !sq_err_s.is_finite() {
            return Err(Error::NonFinite("task estimate".into()));
        }
        Ok(TrialMetrics {
            sq_err_s,
            rel_mse_s: relative_mse(&input.task, task_estimate)?.as_f64(),
            rel_mse_a: recovered.0,
            hit_rate: recovered.1,
            overloaded,
            quantized_samples,
            iterations: recovered.2,
        })
    }

    /// Designed receiver: combine, sample, quantize, filter, recover.
    pub fn bilimo_trial(&self, input: &TrialInput<T>, trial: u64) -> Result<TrialMetrics> {
        let design = self.design.as_ref().ok_or_else(|| Error::InvalidArgument("no design for this point".into()))?;
        let samples = design.acquire(&input.observed)?;
        let mut rng = stream_rng(self.spec.seed, self.point.index, trial, Stream::BilimoDither);
        let q = quantize_complex_vector(&samples, &design.quantizer(self.spec.dither)?, &mut rng);
        let estimate = design.estimate(&q.values)?;
        let rec = self.recover(&self.task_operator(), self.lipschitz_task, &estimate, input)?;
        self.metrics(input, &estimate, rec, q.overloaded, 2 * samples.len())
    }

    /// Every coefficient quantized directly with the per-sample budget.
    pub fn task_ignorant_trial(&self, input: &TrialInput<T>, trial: u64) -> Result<TrialMetrics> {
        let spec = self.direct_quantizer.as_ref().ok_or_else(|| Error::InvalidArgument("no quantizer for this point".into()))?;
        let mut rng = stream_rng(self.spec.seed, self.point.index, trial, Stream::TaskIgnorantDither);
        let q = quantize_complex_vector(&input.observed, spec, &mut rng);
        let estimate = self.compression.apply(&q.values)?;
        let rec = self.recover(&self.coeff_operator(), self.lipschitz_coeff, &q.values, input)?;
        self.metrics(input, &estimate, rec, q.overloaded, 2 * q.values.len())
    }

    /// Recovery from the unquantized coefficients.
    pub fn noquan_dr_trial(&self, input: &TrialInput<T>) -> Result<TrialMetrics> {
        let estimate = self.compression.apply(&input.observed)?;
        let rec = self.recover(&self.coeff_operator(), self.lipschitz_coeff, &input.observed, input)?;
        self.metrics(input, &estimate, rec, 0, 0)
    }

    /// Recovery from the unquantized LMMSE task estimate.
    pub fn noquan_lmmse_trial(&self, input: &TrialInput<T>) -> Result<TrialMetrics> {
        let gammas = self.lmmse.as_ref().ok_or_else(|| Error::InvalidArgument("no LMMSE transform for this point".into()))?;
        let estimate = apply_blocks(gammas, &input.observed)?;
        let rec = self.recover(&self.task_operator(), self.lipschitz_task, &estimate, input)?;
        self.metrics(input, &estimate, rec, 0, 0)
    }

    /// Runs every requested method on one shared draw.
    pub fn run_trial(&self, trial: u64) -> Vec<(Result<TrialMetrics>, Duration)> {
        let input = match self.draw(trial) {
            Ok(i) => i,
            Err(e) => {
                let msg = e.to_string();
                return self.spec.methods.iter().map(|_| (Err(Error::InvalidArgument(msg.clone())), Duration::ZERO)).collect();
            }
        };
        self.spec
            .methods
            .iter()
            .map(|&m| {
                let start = Instant::now();
                let r = match m {
                    Method::Bilimo => self.bilimo_trial(&input, trial),
                    Method::TaskIgnorant => self.task_ignorant_trial(&input, trial),
                    Method::NoquanDr => self.noquan_dr_trial(&input),
                    Method::NoquanLmmse => self.noquan_lmmse_trial(&input),
                };
                (r, start.elapsed())
            })
            .collect()
    }
}
