//! Weight files: a text manifest followed by packed little-endian `f32`.
//!
//! ```text
//! RLDWA1
//! layers <L>
//! dense <out> <in>        (one line per layer, input to output)
//! hidden <relu|tanh>
//! end
//! <payload>
//! ```
//!
//! The payload stores, for each layer in order, the `out × in` weight matrix
//! row-major followed by the `out` biases.

use ndarray::{Array1, Array2};

use super::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "RLDWA1";

pub fn save_weights(net: &Mlp) -> Vec<u8> {
    let mut manifest = format!("{CHECKPOINT_MAGIC}\nlayers {}\n", net.layers().len());
    for l in net.layers() {
        manifest.push_str(&format!("dense {} {}\n", l.outputs(), l.inputs()));
    }
    manifest.push_str(&format!("hidden {}\nend\n", net.hidden_activation().name()));
    let mut out = manifest.into_bytes();
    out.reserve(4 * net.param_count());
    for l in net.layers() {
        for &v in l.weight.iter().chain(l.bias.iter()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Lines<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .take(256)
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated or corrupt manifest"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("manifest is not UTF-8"))
    }
}

pub fn load_weights(bytes: &[u8]) -> Result<Mlp> {
    let mut lines = Lines { bytes, pos: 0 };
    if lines.next_line()? != CHECKPOINT_MAGIC {
        return Err(bad(format!("missing {CHECKPOINT_MAGIC} header")));
    }
    let count: usize = lines
        .next_line()?
        .strip_prefix("layers ")
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0 && n < 1024)
        .ok_or_else(|| bad("expected 'layers <count>'"))?;
    let mut shapes = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next_line()?;
        let dims: Vec<usize> = line
            .strip_prefix("dense ")
            .map(|s| s.split(' ').filter_map(|t| t.parse().ok()).collect())
            .unwrap_or_default();
        if dims.len() != 2 || dims.contains(&0) {
            return Err(bad(format!("layer {i}: malformed shape line '{line}'")));
        }
        let (out, inp) = (dims[0], dims[1]);
        if let Some(&(prev_out, _)) = shapes.last() {
            if inp != prev_out {
                return Err(bad(format!(
                    "layer {i}: declares {inp} inputs but layer {} has {prev_out} outputs",
                    i - 1
                )));
            }
        }
        shapes.push((out, inp));
    }
    let hidden = lines
        .next_line()?
        .strip_prefix("hidden ")
        .and_then(Activation::from_name)
        .ok_or_else(|| bad("expected 'hidden <activation>'"))?;
    if lines.next_line()? != "end" {
        return Err(bad("expected 'end' after manifest"));
    }

    let payload = &bytes[lines.pos..];
    let expected: usize = shapes.iter().map(|&(o, i)| o * i + o).sum();
    if payload.len() != 4 * expected {
        return Err(bad(format!(
            "payload holds {} bytes, manifest requires {}",
            payload.len(),
            4 * expected
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut layers = Vec::with_capacity(count);
    for (i, &(out, inp)) in shapes.iter().enumerate() {
        let w: Vec<f64> = values.by_ref().take(out * inp).collect();
        let b: Vec<f64> = values.by_ref().take(out).collect();
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(bad(format!("layer {i}: non-finite parameter")));
        }
        layers.push(Dense {
            weight: Array2::from_shape_vec((out, inp), w).map_err(|e| bad(e.to_string()))?,
            bias: Array1::from(b),
        });
    }
    Mlp::from_layers(layers, hidden)
}
