//! Binary pruning masks with structured generation.
//!
//! Masks are generated mostly structurally: whole hidden units are
//! deactivated (their incoming row and outgoing column zeroed) as long as no
//! weight matrix overshoots its target zero fraction, then element-wise
//! masking tops each matrix up to the exact target count. Zero counts per
//! matrix therefore depend only on the rates, not on the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{param_len, weight_offset, LayerShape, TensorError};

/// Binary mask over a model's full parameter vector. Bias positions are
/// always retained; only weight-matrix entries are ever pruned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub(crate) shapes: Vec<LayerShape>,
    pub(crate) bits: Vec<bool>,
}

impl Mask {
    /// All-ones mask (nothing pruned).
    pub fn full(shapes: &[LayerShape]) -> Mask {
        Mask { shapes: shapes.to_vec(), bits: vec![true; param_len(shapes)] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn retained(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn retained_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Zero count within weight matrix `l`.
    pub fn zeros_in_matrix(&self, l: usize) -> usize {
        let off = weight_offset(&self.shapes, l);
        let n = self.shapes[l].inputs * self.shapes[l].outputs;
        self.bits[off..off + n].iter().filter(|&&b| !b).count()
    }
}

/// Structured zero counts per matrix when `k[h]` units of each hidden layer
/// are deactivated.
fn structural_zeros(shapes: &[LayerShape], k: &[usize]) -> Vec<usize> {
    let n = shapes.len();
    let mut zeros = vec![0usize; n];
    for l in 0..n {
        let rows_removed = if l < n - 1 { k[l] } else { 0 };
        let cols_removed = if l > 0 { k[l - 1] } else { 0 };
        zeros[l] = rows_removed * shapes[l].inputs + cols_removed * shapes[l].outputs
            - rows_removed * cols_removed;
    }
    zeros
}

/// Generates a pruning mask hitting `rates[l]` zeros in each weight matrix,
/// rounded to the nearest element count. Deterministic per seed; different
/// seeds give different supports with identical zero counts.
pub fn make_mask(shapes: &[LayerShape], rates: &[f64], seed: u64) -> Result<Mask, TensorError> {
    if rates.len() != shapes.len() {
        return Err(TensorError::InvalidRates(format!(
            "{} rates for {} weight matrices",
            rates.len(),
            shapes.len()
        )));
    }
    for &r in rates {
        if !(0.0..1.0).contains(&r) {
            return Err(TensorError::InvalidRates(format!("rate {r} outside [0, 1)")));
        }
    }

    let n = shapes.len();
    let targets: Vec<usize> = (0..n)
        .map(|l| ((shapes[l].inputs * shapes[l].outputs) as f64 * rates[l]).round() as usize)
        .collect();

    // structured phase: grow unit-removal counts while every matrix stays
    // within its target
    let n_hidden = n.saturating_sub(1);
    let mut k = vec![0usize; n_hidden];
    loop {
        let mut grew = false;
        for h in 0..n_hidden {
            if k[h] >= shapes[h].outputs {
                continue;
            }
            k[h] += 1;
            let z = structural_zeros(shapes, &k);
            if z.iter().zip(&targets).all(|(z, t)| z <= t) {
                grew = true;
            } else {
                k[h] -= 1;
            }
        }
        if !grew {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![true; param_len(shapes)];
    let removed: Vec<Vec<usize>> = (0..n_hidden)
        .map(|h| sample_distinct(&mut rng, shapes[h].outputs, k[h]))
        .collect();
    for (h, units) in removed.iter().enumerate() {
        for &u in units {
            // incoming row of matrix h
            let off = weight_offset(shapes, h);
            for i in 0..shapes[h].inputs {
                bits[off + u * shapes[h].inputs + i] = false;
            }
            // outgoing column of matrix h+1
            let off = weight_offset(shapes, h + 1);
            for o in 0..shapes[h + 1].outputs {
                bits[off + o * shapes[h + 1].inputs + u] = false;
            }
        }
    }

    // element-wise top-up to the exact per-matrix target
    for l in 0..n {
        let off = weight_offset(shapes, l);
        let elems = shapes[l].inputs * shapes[l].outputs;
        let current = bits[off..off + elems].iter().filter(|&&b| !b).count();
        debug_assert!(current <= targets[l]);
        let extra = targets[l] - current;
        if extra == 0 {
            continue;
        }
        let alive: Vec<usize> = (0..elems).filter(|&i| bits[off + i]).collect();
        for idx in sample_distinct(&mut rng, alive.len(), extra) {
            bits[off + alive[idx]] = false;
        }
    }

    let mask = Mask { shapes: shapes.to_vec(), bits };
    for l in 0..n {
        debug_assert_eq!(mask.zeros_in_matrix(l), targets[l]);
    }
    Ok(mask)
}

/// `count` distinct indices from `0..n`, in draw order (partial Fisher-Yates).
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    use rand::Rng;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let j = rng.gen_range(0..pool.len());
        out.push(pool.swap_remove(j));
    }
    out
}
