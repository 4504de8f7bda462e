use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::SteeringDictionary;
use crate::error::Result;
use crate::model::RadarConfig;
use crate::scalar::Real;
use crate::statistics::CompressionKind;

use super::trial::{PointContext, TrialMetrics};
use super::{ExperimentSpec, Method};

pub const CSV_HEADER: [&str; 17] = [
    "method",
    "budget_bits",
    "snr_db",
    "dcr",
    "k",
    "matrix_kind",
    "mse_s_mean",
    "mse_s_se",
    "mse_a_mean",
    "mse_a_se",
    "hit_rate_mean",
    "hit_rate_se",
    "eps_lmmse",
    "eps_emse",
    "saturation_rate",
    "trials",
    "wall_ms",
];

/// One combination of the sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub index: u64,
    pub budget_bits: u64,
    pub snr_db: f64,
    pub dcr: f64,
    pub k: usize,
    pub kind: CompressionKind,
}

/// Aggregated results of one method at one sweep point.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub point: PointSpec,
    /// Mean and standard error of the relative task MSE.
    pub mse_s: (f64, f64),
    /// Mean and standard error of `‖s − ŝ‖²`.
    pub sq_err_s: (f64, f64),
    pub mse_a: Option<(f64, f64)>,
    pub hit_rate: Option<(f64, f64)>,
    pub eps_lmmse: f64,
    pub eps_emse: Option<f64>,
    pub saturation_rate: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub wall_ms: f64,
    pub per_trial: Vec<TrialMetrics>,
}

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub eta: f64,
    pub rho_rule: String,
    pub version: String,
    pub config_hash: String,
    pub trials: usize,
    pub failures: usize,
    pub timings: Vec<Timing>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub point: u64,
    pub method: Method,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<MethodSummary>,
    pub provenance: Provenance,
}

/// Mean and standard error of the mean.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(method: Method, point: PointSpec, ctx_eps: (f64, Option<f64>), runs: Vec<(Result<TrialMetrics>, f64)>) -> MethodSummary {
    let wall_ms = runs.iter().map(|r| r.1).sum();
    let mut per_trial = Vec::with_capacity(runs.len());
    let mut failures = 0;
    for (trial, (r, _)) in runs.into_iter().enumerate() {
        match r {
            Ok(m) => per_trial.push(m),
            Err(e) => {
                failures += 1;
                log::warn!("point {} method {method} trial {trial} failed: {e}", point.index);
            }
        }
    }
    let pick = |f: fn(&TrialMetrics) -> Option<f64>| -> Option<(f64, f64)> {
        let v: Option<Vec<f64>> = per_trial.iter().map(f).collect();
        v.filter(|v| !v.is_empty()).map(|v| mean_se(&v))
    };
    let overloaded: usize = per_trial.iter().map(|m| m.overloaded).sum();
    let samples: usize = per_trial.iter().map(|m| m.quantized_samples).sum();
    MethodSummary {
        method,
        point,
        mse_s: mean_se(&per_trial.iter().map(|m| m.rel_mse_s).collect::<Vec<_>>()),
        sq_err_s: mean_se(&per_trial.iter().map(|m| m.sq_err_s).collect::<Vec<_>>()),
        mse_a: pick(|m| m.rel_mse_a),
        hit_rate: pick(|m| m.hit_rate),
        eps_lmmse: ctx_eps.0,
        eps_emse: if method == Method::Bilimo { ctx_eps.1 } else { None },
        saturation_rate: (method.quantizes() && samples > 0).then(|| overloaded as f64 / samples as f64),
        trials: per_trial.len(),
        failures,
        wall_ms,
        per_trial,
    }
}

/// Runs all trials of one sweep point against a prebuilt dictionary.
pub fn run_point<T: Real>(spec: &ExperimentSpec, cfg: &RadarConfig, dictionary: &SteeringDictionary<T>, point: PointSpec) -> Result<Vec<MethodSummary>> {
    let ctx = PointContext::new(spec, cfg, dictionary, point)?;
    let eps = (ctx.eps_lmmse, ctx.design.as_ref().map(|d| d.emse.as_f64()));
    let trials: Vec<Vec<(Result<TrialMetrics>, f64)>> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| ctx.run_trial(t).into_iter().map(|(r, d)| (r, d.as_secs_f64() * 1e3)).collect())
        .collect();
    let mut by_method: Vec<Vec<(Result<TrialMetrics>, f64)>> = spec.methods.iter().map(|_| Vec::with_capacity(spec.trials)).collect();
    for trial in trials {
        for (slot, run) in by_method.iter_mut().zip(trial) {
            slot.push(run);
        }
    }
    Ok(spec.methods.iter().zip(by_method).map(|(&m, runs)| summarize(m, point, eps, runs)).collect())
}

/// SHA-256 of the canonical JSON form of the spec.
pub fn config_hash(spec: &ExperimentSpec, cfg: &RadarConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec)?);
    h.update(serde_json::to_vec(cfg)?);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs every sweep point in order.
pub fn run_sweep<T: Real>(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let cfg = spec.resolve_config()?;
    let dictionary = SteeringDictionary::<T>::new(&cfg)?;
    let mut rows = Vec::new();
    for point in spec.points() {
        let start = Instant::now();
        let summaries = run_point(spec, &cfg, &dictionary, point)?;
        log::info!(
            "point {} (budget {}, snr {} dB, dcr {}, k {}, {}) done in {:.1} s",
            point.index,
            point.budget_bits,
            point.snr_db,
            point.dcr,
            point.k,
            point.kind,
            start.elapsed().as_secs_f64()
        );
        rows.extend(summaries);
    }
    let provenance = Provenance {
        seed: spec.seed,
        eta: cfg.eta,
        rho_rule: spec.recovery.rho.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(spec, &cfg)?,
        trials: spec.trials,
        failures: rows.iter().map(|r| r.failures).sum(),
        timings: rows.iter().map(|r| Timing { point: r.point.index, method: r.method, wall_ms: r.wall_ms }).collect(),
    };
    Ok(ExperimentResult { rows, provenance })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one CSV row per point and method. `wall_ms` is left empty unless
/// `timing` is set so that repeated runs produce identical bytes.
pub fn write_csv<W: Write>(rows: &[MethodSummary], writer: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let p = &r.point;
        w.write_record([
            r.method.name().to_string(),
            p.budget_bits.to_string(),
            p.snr_db.to_string(),
            p.dcr.to_string(),
            p.k.to_string(),
            p.kind.name().to_string(),
            r.mse_s.0.to_string(),
            r.mse_s.1.to_string(),
            opt(r.mse_a.map(|v| v.0)),
            opt(r.mse_a.map(|v| v.1)),
            opt(r.hit_rate.map(|v| v.0)),
            opt(r.hit_rate.map(|v| v.1)),
            r.eps_lmmse.to_string(),
            opt(r.eps_emse),
            opt(r.saturation_rate),
            r.trials.to_string(),
            if timing { format!("{:.3}", r.wall_ms) } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}
