//! Small numeric helpers shared across modules.

use ndarray::ArrayView2;

/// Frobenius norm.
pub(crate) fn frob(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest absolute entry (0 for empty input).
pub(crate) fn max_abs(m: &ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// True if every entry is finite.
pub(crate) fn all_finite(m: &ArrayView2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// FNV-1a hash over a stream of f64 bit patterns, used to tag factorizations.
pub(crate) fn hash_f64s<'a>(label: u64, values: impl Iterator<Item = &'a f64>) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ label;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}
