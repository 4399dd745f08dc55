//! On-disk weight format.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic        "UMLW" (4 bytes)
//! version      u32 (currently 1)
//! layer_count  u32
//! per layer:   in u32, out u32
//! per layer:   weight row-major f64 (in*out), then bias f64 (out)
//! ```
//!
//! A JSON sidecar describes the architecture (dims plus activations); the
//! loader cross-checks the two.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Activation, DenseNet, Layer};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"UMLW";
pub const WEIGHTS_VERSION: u32 = 1;

/// JSON sidecar describing a serialized net.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchitectureSidecar {
    pub version: u32,
    pub layers: Vec<LayerSidecar>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayerSidecar {
    #[serde(rename = "in")]
    pub in_features: usize,
    #[serde(rename = "out")]
    pub out_features: usize,
    pub activation: Activation,
}

impl ArchitectureSidecar {
    pub fn for_net(net: &DenseNet) -> Self {
        ArchitectureSidecar {
            version: WEIGHTS_VERSION,
            layers: net
                .layers()
                .iter()
                .map(|l| LayerSidecar {
                    in_features: l.in_features(),
                    out_features: l.out_features(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

/// Write the weights file and its JSON sidecar.
pub fn save_net(net: &DenseNet, weights_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(WEIGHTS_MAGIC);
    bytes.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        bytes.extend_from_slice(&(layer.in_features() as u32).to_le_bytes());
        bytes.extend_from_slice(&(layer.out_features() as u32).to_le_bytes());
    }
    for layer in net.layers() {
        for i in 0..layer.weight.nrows() {
            for j in 0..layer.weight.ncols() {
                bytes.extend_from_slice(&layer.weight[(i, j)].to_le_bytes());
            }
        }
        for j in 0..layer.bias.ncols() {
            bytes.extend_from_slice(&layer.bias[(0, j)].to_le_bytes());
        }
    }
    fs::write(weights_path, bytes)?;
    let sidecar = ArchitectureSidecar::for_net(net);
    fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    if end > bytes.len() {
        return Err(Error::Format("weights file truncated".into()));
    }
    let v = u32::from_le_bytes(bytes[*pos..end].try_into().expect("4 bytes"));
    *pos = end;
    Ok(v)
}

fn read_f64(bytes: &[u8], pos: &mut usize) -> Result<f64> {
    let end = *pos + 8;
    if end > bytes.len() {
        return Err(Error::Format("weights file truncated".into()));
    }
    let v = f64::from_le_bytes(bytes[*pos..end].try_into().expect("8 bytes"));
    *pos = end;
    Ok(v)
}

/// Load a net from the weights file plus its sidecar.
pub fn load_net(weights_path: &Path, sidecar_path: &Path) -> Result<DenseNet> {
    let sidecar: ArchitectureSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    if sidecar.version != WEIGHTS_VERSION {
        return Err(Error::Format(format!(
            "unsupported sidecar version {}",
            sidecar.version
        )));
    }
    let bytes = fs::read(weights_path)?;
    if bytes.len() < 4 || &bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::Format("bad magic; not a weights file".into()));
    }
    let mut pos = 4;
    let version = read_u32(&bytes, &mut pos)?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported weights version {version}")));
    }
    let layer_count = read_u32(&bytes, &mut pos)? as usize;
    if layer_count != sidecar.layers.len() {
        return Err(Error::Format("sidecar layer count disagrees with weights".into()));
    }
    let mut dims = Vec::with_capacity(layer_count);
    for meta in &sidecar.layers {
        let rows = read_u32(&bytes, &mut pos)? as usize;
        let cols = read_u32(&bytes, &mut pos)? as usize;
        if rows != meta.in_features || cols != meta.out_features {
            return Err(Error::Format("sidecar dims disagree with weights".into()));
        }
        dims.push((rows, cols));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for (k, &(rows, cols)) in dims.iter().enumerate() {
        let mut weight = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                weight[(i, j)] = read_f64(&bytes, &mut pos)?;
            }
        }
        let mut bias = DMatrix::zeros(1, cols);
        for j in 0..cols {
            bias[(0, j)] = read_f64(&bytes, &mut pos)?;
        }
        layers.push(Layer {
            weight,
            bias,
            activation: sidecar.layers[k].activation,
        });
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes in weights file".into()));
    }
    DenseNet::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn weights_round_trip_bitwise() {
        let mut rng = substream(8, 0);
        let net = DenseNet::random(
            &[5, 4, 3],
            &[Activation::ReLU, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let dir = std::env::temp_dir().join("uml-lab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let w = dir.join("net.umlw");
        let s = dir.join("net.json");
        save_net(&net, &w, &s).unwrap();
        let loaded = load_net(&w, &s).unwrap();
        assert_eq!(net.param_digest(), loaded.param_digest());
        assert_eq!(
            net.layers()[0].activation,
            loaded.layers()[0].activation
        );
        // Corrupt magic.
        let mut bytes = std::fs::read(&w).unwrap();
        bytes[0] = b'X';
        std::fs::write(&w, bytes).unwrap();
        assert!(load_net(&w, &s).is_err());
    }
}
