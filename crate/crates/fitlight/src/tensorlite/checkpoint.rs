//! Model checkpoint format.
//!
//! Versioned little-endian binary; only unmasked entries are stored, so the
//! footprint of a pruned model shrinks with its mask. Layout:
//!
//! ```text
//! magic      4 bytes  "TLM1"
//! layers     u32      number of weight layers L
//! per layer: u32 inputs, u32 outputs
//! adam step  u64
//! mask       ceil(P/8) bytes, one bit per parameter, LSB first
//! params     f32 x retained, parameter-layout order, unmasked only
//! adam m     f32 x retained
//! adam v     f32 x retained
//! ```

use super::{param_len, AdamState, LayerShape, Mask, MaskedModel, TensorError};

const MAGIC: &[u8; 4] = b"TLM1";

/// Serializes a model; masked parameters and moments are implicit zeros.
pub fn save_model(model: &MaskedModel) -> Vec<u8> {
    let shapes = model.shapes();
    let mask = model.mask();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for s in shapes {
        out.extend_from_slice(&(s.inputs as u32).to_le_bytes());
        out.extend_from_slice(&(s.outputs as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.adam().step.to_le_bytes());
    let bits = mask.bits();
    let mut byte = 0u8;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            byte |= 1 << (i % 8);
        }
        if i % 8 == 7 {
            out.push(byte);
            byte = 0;
        }
    }
    if bits.len() % 8 != 0 {
        out.push(byte);
    }
    for source in [model.params(), &model.adam().m[..], &model.adam().v[..]] {
        for (i, &v) in source.iter().enumerate() {
            if mask.retained(i) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorError> {
        if self.pos + n > self.data.len() {
            return Err(TensorError::Corrupt(format!(
                "truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, TensorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TensorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, TensorError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_model(data: &[u8]) -> Result<MaskedModel, TensorError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(TensorError::Corrupt("bad magic".into()));
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 64 {
        return Err(TensorError::Corrupt(format!("implausible layer count {layers}")));
    }
    let mut shapes = Vec::with_capacity(layers);
    for _ in 0..layers {
        let inputs = r.u32()? as usize;
        let outputs = r.u32()? as usize;
        if inputs == 0 || outputs == 0 || inputs > 1 << 16 || outputs > 1 << 16 {
            return Err(TensorError::Corrupt(format!("implausible layer shape {inputs}x{outputs}")));
        }
        shapes.push(LayerShape { inputs, outputs });
    }
    let step = r.u64()?;
    let total = param_len(&shapes);
    let mask_bytes = r.take((total + 7) / 8)?;
    let bits: Vec<bool> = (0..total).map(|i| mask_bytes[i / 8] >> (i % 8) & 1 == 1).collect();
    let mask = Mask { shapes: shapes.clone(), bits };
    let retained = mask.retained_count();

    let read_vec = |r: &mut Reader| -> Result<Vec<f64>, TensorError> {
        let mut vals = vec![0.0f64; total];
        for i in 0..total {
            if mask.retained(i) {
                vals[i] = r.f32()? as f64;
            }
        }
        Ok(vals)
    };
    let params = read_vec(&mut r)?;
    let m = read_vec(&mut r)?;
    let v = read_vec(&mut r)?;
    let _ = retained;
    if r.pos != data.len() {
        return Err(TensorError::Corrupt(format!(
            "{} trailing bytes",
            data.len() - r.pos
        )));
    }
    Ok(MaskedModel::restore(shapes, params, mask, AdamState { m, v, step }))
}
