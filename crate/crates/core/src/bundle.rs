//! Binary export of dictionaries and designs.
//!
//! Layout: 8-byte magic, little-endian `u64` header length, a JSON header,
//! then every array as column-major `(re, im)` pairs of little-endian `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combiner::AcquisitionDesign;
use crate::dictionary::SteeringDictionary;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::RadarConfig;
use crate::scalar::{cplx, Real};

pub const MAGIC: &[u8; 8] = b"BILIMO\0\x01";

/// Ordering and normalization conventions of the stored arrays.
pub const CONVENTION: &str = "grid=delay*MN+angle;coeffs=tone-major;dft=unitary";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub kind: String,
    pub convention: String,
    pub seed: Option<u64>,
    pub config: RadarConfig,
    pub arrays: Vec<ArrayEntry>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub header: BundleHeader,
    pub arrays: Vec<CMatrix<f64>>,
}

impl Bundle {
    pub fn new(kind: &str, config: &RadarConfig, seed: Option<u64>, metadata: serde_json::Value) -> Self {
        let header = BundleHeader {
            kind: kind.to_string(),
            convention: CONVENTION.to_string(),
            seed,
            config: config.clone(),
            arrays: Vec::new(),
            metadata,
        };
        Self { header, arrays: Vec::new() }
    }

    pub fn push<T: Real>(&mut self, name: &str, m: &CMatrix<T>) {
        self.header.arrays.push(ArrayEntry { name: name.to_string(), rows: m.nrows(), cols: m.ncols() });
        self.arrays.push(m.map(|z| num_complex::Complex::new(z.re.as_f64(), z.im.as_f64())));
    }

    pub fn get(&self, name: &str) -> Option<&CMatrix<f64>> {
        self.header.arrays.iter().position(|a| a.name == name).map(|i| &self.arrays[i])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for m in &self.arrays {
            for z in m.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Bundle("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 30 {
            return Err(Error::Bundle(format!("header length {len} is implausible")));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: BundleHeader = serde_json::from_slice(&header)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut buf = [0u8; 16];
        for a in &header.arrays {
            let mut m = CMatrix::zeros(a.rows, a.cols);
            for z in m.iter_mut() {
                r.read_exact(&mut buf)
                    .map_err(|_| Error::Bundle(format!("payload of {} is truncated", a.name)))?;
                let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
                *z = num_complex::Complex::new(re, im);
            }
            arrays.push(m);
        }
        if r.read(&mut buf)? != 0 {
            return Err(Error::Bundle("trailing bytes after payload".into()));
        }
        Ok(Self { header, arrays })
    }
}

/// Hex SHA-256 of a configuration's JSON form.
pub fn config_hash(cfg: &RadarConfig) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(cfg)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Stores the angle and delay steering matrices of every transmitter.
pub fn export_dictionary<T: Real>(dictionary: &SteeringDictionary<T>, cfg: &RadarConfig, seed: Option<u64>) -> Bundle {
    let mut b = Bundle::new("dictionary", cfg, seed, serde_json::json!({}));
    for m in 0..cfg.tx_count {
        b.push(&format!("angle_{m}"), dictionary.angle_steering(m));
        b.push(&format!("delay_{m}"), dictionary.delay_steering(m));
    }
    b
}

/// Rebuilds a dictionary from an exported bundle.
pub fn import_dictionary<T: Real>(bundle: &Bundle) -> Result<(RadarConfig, SteeringDictionary<T>)> {
    if bundle.header.kind != "dictionary" || bundle.header.convention != CONVENTION {
        return Err(Error::Bundle(format!("not a dictionary bundle: kind {}", bundle.header.kind)));
    }
    let cfg = bundle.header.config.clone();
    let fetch = |name: String| -> Result<CMatrix<T>> {
        bundle
            .get(&name)
            .map(|m| m.map(|z| cplx(z.re, z.im)))
            .ok_or_else(|| Error::Bundle(format!("missing array {name}")))
    };
    let angle = (0..cfg.tx_count).map(|m| fetch(format!("angle_{m}"))).collect::<Result<Vec<_>>>()?;
    let delay = (0..cfg.tx_count).map(|m| fetch(format!("delay_{m}"))).collect::<Result<Vec<_>>>()?;
    let dict = SteeringDictionary::from_steering(&cfg, angle, delay)?;
    Ok((cfg, dict))
}

/// Stores the combiner blocks, the digital filter and the design figures.
pub fn export_design<T: Real>(design: &AcquisitionDesign<T>, cfg: &RadarConfig, seed: Option<u64>) -> Result<Bundle> {
    let metadata = serde_json::json!({
        "channels": design.channels(),
        "levels": design.levels(),
        "support": design.support,
        "eta": design.params.eta,
        "eps_emse": design.emse.as_f64(),
        "eps_lmmse": design.lmmse.as_f64(),
        "config_hash": config_hash(cfg)?,
    });
    let mut b = Bundle::new("design", cfg, seed, metadata);
    for (i, blk) in design.blocks.iter().enumerate() {
        b.push(&format!("combiner_{i}"), &blk.combiner);
    }
    b.push("filter", &design.dense_filter()?);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArrayParams;

    #[test]
    fn dictionary_round_trip() {
        let cfg = RadarConfig::ula(&ArrayParams { tx_count: 2, rx_count: 3, pri_s: 3e-6, ..Default::default() }).unwrap();
        let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
        let mut buf = Vec::new();
        export_dictionary(&dict, &cfg, Some(9)).write(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = Bundle::read(buf.as_slice()).unwrap();
        assert_eq!(back.header.seed, Some(9));
        let (cfg2, dict2) = import_dictionary::<f64>(&back).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(dict2.dense(1 << 20).unwrap(), dict.dense(1 << 20).unwrap());
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(Bundle::read(&b"NOTABUNDLE......"[..]).is_err());
        let cfg = RadarConfig::ula(&ArrayParams { tx_count: 1, rx_count: 2, pri_s: 1e-6, ..Default::default() }).unwrap();
        let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
        let mut buf = Vec::new();
        export_dictionary(&dict, &cfg, None).write(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Bundle::read(buf.as_slice()).is_err());
    }
}
