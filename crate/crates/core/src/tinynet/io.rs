//! Binary model files.
//!
//! Layout: magic `RARNET01`, then little-endian `u32` layer count; per layer
//! `u32` input width, `u32` output width, `u8` nonlinearity (0 relu,
//! 1 softmax), the row-major weights as `f64`, then the biases as `f64`.

use std::path::Path;

use super::{FeedforwardModel, Layer, LayerSpec, Nonlinearity};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"RARNET01";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(format!(
                "model file truncated reading {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| Error::format(format!("{what} size overflows")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl FeedforwardModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.parameter_count() * 8 + self.layers.len() * 9);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.spec.input_width as u32).to_le_bytes());
            out.extend_from_slice(&(layer.spec.output_width as u32).to_le_bytes());
            out.push(match layer.spec.nonlinearity {
                Nonlinearity::Relu => 0,
                Nonlinearity::Softmax => 1,
            });
            for v in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(8, "magic")?;
        if magic != MODEL_MAGIC {
            return Err(Error::format(format!(
                "bad model magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                std::str::from_utf8(MODEL_MAGIC).expect("ascii")
            )));
        }
        let layer_count = cur.u32("layer count")? as usize;
        let mut layers = Vec::new();
        for l in 0..layer_count {
            let input_width = cur.u32("input width")? as usize;
            let output_width = cur.u32("output width")? as usize;
            let nonlinearity = match cur.take(1, "nonlinearity")?[0] {
                0 => Nonlinearity::Relu,
                1 => Nonlinearity::Softmax,
                other => {
                    return Err(Error::format(format!("layer {l}: unknown nonlinearity code {other}")))
                }
            };
            let weight_count = input_width
                .checked_mul(output_width)
                .ok_or_else(|| Error::format(format!("layer {l} dimensions overflow")))?;
            let weights = cur.f64s(weight_count, "weights")?;
            let biases = cur.f64s(output_width, "biases")?;
            layers.push(Layer {
                spec: LayerSpec {
                    input_width,
                    output_width,
                    nonlinearity,
                },
                weights,
                biases,
            });
        }
        if cur.pos != bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after the last layer",
                bytes.len() - cur.pos
            )));
        }
        Self::from_layers(layers).map_err(|e| Error::format(format!("invalid model: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }
}
