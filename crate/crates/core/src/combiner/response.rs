//! Frequency responses of the analog combining filters.

use std::io::{Read, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::design::AcquisitionDesign;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::RadarConfig;
use crate::scalar::{cplx, czero, Real};

/// One sample of the response of the filter from receive antenna `rx` to
/// output channel `channel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSample {
    pub channel: usize,
    pub rx: usize,
    pub frequency_hz: f64,
    pub gain: Complex<f64>,
}

fn pulse_at(pulse: Option<&[Complex<f64>]>, cfg: &RadarConfig, k: usize) -> Result<Complex<f64>> {
    let h = match pulse {
        None => Complex::new(1.0, 0.0),
        Some(p) if p.len() == cfg.tones => p[k],
        Some(p) => return Err(Error::Dimension(format!("pulse spectrum has {} samples, expected {}", p.len(), cfg.tones))),
    };
    if h.norm_sqr() == 0.0 || !h.re.is_finite() || !h.im.is_finite() {
        return Err(Error::InvalidArgument(format!("pulse spectrum is zero or non-finite at tone {}", cfg.tone_index(k))));
    }
    Ok(h)
}

/// Samples `T_0 · b · ĥ₀* / |ĥ₀|²` at the frequencies `i/T_0 + f_m` for
/// every transmitter band `m` and tone `i`.
///
/// `pulse` holds the baseband pulse spectrum at each tone (flat if `None`).
pub fn analog_filter_response<T: Real>(
    design: &AcquisitionDesign<T>,
    cfg: &RadarConfig,
    channel: usize,
    rx: usize,
    pulse: Option<&[Complex<f64>]>,
) -> Result<Vec<ResponseSample>> {
    if channel >= design.channels() || rx >= cfg.rx_count || design.tones() != cfg.tones {
        return Err(Error::InvalidArgument(format!("channel {channel} or antenna {rx} out of range")));
    }
    let mut out = Vec::with_capacity(cfg.delay_len());
    for m in 0..cfg.tx_count {
        for k in 0..cfg.tones {
            let h = pulse_at(pulse, cfg, k)?;
            let b = design.blocks[k].combiner[(channel, m * cfg.rx_count + rx)];
            let b = Complex::new(b.re.as_f64(), b.im.as_f64());
            out.push(ResponseSample {
                channel,
                rx,
                frequency_hz: cfg.tone_index(k) as f64 / cfg.pri_s + cfg.tone_offsets_hz[m],
                gain: b * cfg.pri_s * h.conj() / h.norm_sqr(),
            });
        }
    }
    Ok(out)
}

/// Locates the transmitter band and tone block of a response frequency.
fn locate(cfg: &RadarConfig, frequency_hz: f64) -> Result<(usize, usize)> {
    let half = (cfg.tones as i64 - 1) / 2;
    for m in 0..cfg.tx_count {
        let i = (frequency_hz - cfg.tone_offsets_hz[m]) * cfg.pri_s;
        let r = i.round();
        if (i - r).abs() < 1e-6 && (r as i64).abs() <= half {
            return Ok((m, (r as i64 + half) as usize));
        }
    }
    Err(Error::InvalidArgument(format!("frequency {frequency_hz} Hz is not a tone of any band")))
}

/// Rebuilds the per-tone combiner blocks from response samples.
pub fn combiners_from_responses<T: Real>(
    samples: &[ResponseSample],
    cfg: &RadarConfig,
    channels: usize,
    pulse: Option<&[Complex<f64>]>,
) -> Result<Vec<CMatrix<T>>> {
    let mut blocks = vec![CMatrix::from_element(channels, cfg.virtual_len(), czero()); cfg.tones];
    for s in samples {
        if s.channel >= channels || s.rx >= cfg.rx_count {
            return Err(Error::InvalidArgument(format!("sample for channel {} antenna {} out of range", s.channel, s.rx)));
        }
        let (m, k) = locate(cfg, s.frequency_hz)?;
        let b = s.gain * pulse_at(pulse, cfg, k)? / cfg.pri_s;
        blocks[k][(s.channel, m * cfg.rx_count + s.rx)] = cplx(b.re, b.im);
    }
    Ok(blocks)
}

#[derive(Serialize, Deserialize)]
struct Row {
    p: usize,
    n: usize,
    #[serde(rename = "frequency_Hz")]
    frequency_hz: f64,
    re: f64,
    im: f64,
}

/// Writes samples as CSV with columns `p,n,frequency_Hz,re,im`.
pub fn write_responses_csv<W: Write>(writer: W, samples: &[ResponseSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(Row { p: s.channel, n: s.rx, frequency_hz: s.frequency_hz, re: s.gain.re, im: s.gain.im })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_responses_csv<R: Read>(reader: R) -> Result<Vec<ResponseSample>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| {
            let r: Row = row?;
            Ok(ResponseSample { channel: r.p, rx: r.n, frequency_hz: r.frequency_hz, gain: Complex::new(r.re, r.im) })
        })
        .collect()
}
