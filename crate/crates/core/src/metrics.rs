//! Evaluation metrics: signal reconstruction error, per-pixel probability of
//! success, and spectral-library mutual coherence.

use crate::datamodel::{AbundanceMap, SpectralLibrary};
use crate::error::{Error, Result};

/// Per-pixel relative error power considered a success (the 5 dB threshold).
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.316;

/// Evaluation summary of an estimated abundance map against ground truth.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub sre_db: f64,
    pub p_s: f64,
    /// `||x_hat_i - x_i||^2 / ||x_i||^2` per pixel; zero-reference pixels are
    /// 0 when the estimate also vanishes there and infinite otherwise.
    pub per_pixel_relative_error: Vec<f64>,
}

fn check_shapes(x_true: &AbundanceMap, x_hat: &AbundanceMap) -> Result<()> {
    if x_true.data().dim() != x_hat.data().dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {:?}, estimate is {:?}",
            x_true.data().dim(),
            x_hat.data().dim()
        )));
    }
    Ok(())
}

/// Signal reconstruction error in dB:
/// `10 log10(sum_i ||x_i||^2 / sum_i ||x_i - x_hat_i||^2)` over pixels.
/// Infinite for an exact reconstruction.
pub fn sre_db(x_true: &AbundanceMap, x_hat: &AbundanceMap) -> Result<f64> {
    check_shapes(x_true, x_hat)?;
    let signal: f64 = x_true.data().iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let noise: f64 = x_true
        .data()
        .iter()
        .zip(x_hat.data().iter())
        .map(|(t, e)| (t - e) * (t - e))
        .sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Fraction of pixels whose relative error power is at most `threshold`.
/// Pixels with a zero reference count as successes exactly when the estimate
/// is also zero there.
pub fn success_probability(
    x_true: &AbundanceMap,
    x_hat: &AbundanceMap,
    threshold: f64,
) -> Result<f64> {
    Ok(evaluate(x_true, x_hat, threshold)?.p_s)
}

/// Full evaluation: SRE, success probability, and the per-pixel error
/// profile.
pub fn evaluate(
    x_true: &AbundanceMap,
    x_hat: &AbundanceMap,
    threshold: f64,
) -> Result<EvalResult> {
    check_shapes(x_true, x_hat)?;
    let t = x_true.data();
    let e = x_hat.data();
    let n = t.ncols();
    let mut per_pixel = Vec::with_capacity(n);
    let mut successes = 0usize;
    for p in 0..n {
        let signal: f64 = t.column(p).iter().map(|v| v * v).sum();
        let err: f64 = t
            .column(p)
            .iter()
            .zip(e.column(p).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let rel = if signal == 0.0 {
            if err == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            err / signal
        };
        if rel <= threshold {
            successes += 1;
        }
        per_pixel.push(rel);
    }
    let sre = sre_db(x_true, x_hat)?;
    Ok(EvalResult {
        sre_db: sre,
        p_s: successes as f64 / n as f64,
        per_pixel_relative_error: per_pixel,
    })
}

/// Largest absolute cosine between distinct library columns; 0 for a
/// single-column library.
pub fn mutual_coherence(a: &SpectralLibrary) -> Result<f64> {
    let am = a.matrix();
    let m = am.ncols();
    let norms: Vec<f64> = (0..m)
        .map(|j| am.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let gram = am.t().dot(am);
    let mut best = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            best = best.max(gram[[i, j]].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::SpatialGrid;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn map(x: Array2<f64>, n_r: usize, n_c: usize) -> AbundanceMap {
        AbundanceMap::new(x, SpatialGrid::new(n_r, n_c).unwrap()).unwrap()
    }

    #[test]
    fn sre_of_zero_estimate_is_zero_db() {
        let t = map(array![[1.0, 2.0], [2.0, 1.0]], 1, 2);
        let e = map(Array2::zeros((2, 2)), 1, 2);
        assert_abs_diff_eq!(sre_db(&t, &e).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sre_twenty_db_case() {
        // signal energy 100, error energy 1
        let t = map(array![[10.0, 0.0]], 1, 2);
        let mut e = t.data().clone();
        e[[0, 1]] = 1.0;
        let e = map(e, 1, 2);
        assert_abs_diff_eq!(sre_db(&t, &e).unwrap(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn sre_exact_recovery_is_infinite() {
        let t = map(array![[1.0, 2.0]], 1, 2);
        assert!(sre_db(&t, &t).unwrap().is_infinite());
        let z = map(Array2::zeros((1, 2)), 1, 2);
        assert!(matches!(sre_db(&z, &t), Err(Error::ZeroReference)));
    }

    #[test]
    fn sre_is_scale_covariant_in_the_error() {
        let t = map(array![[1.0, 2.0, -1.0]], 1, 3);
        let delta = array![[0.1, -0.05, 0.2]];
        let e1 = map(t.data() + &delta, 1, 3);
        let e2 = map(t.data() + &(10.0 * &delta), 1, 3);
        let s1 = sre_db(&t, &e1).unwrap();
        let s2 = sre_db(&t, &e2).unwrap();
        assert_abs_diff_eq!(s1 - s2, 20.0, epsilon = 1e-10);
    }

    #[test]
    fn success_probability_examples() {
        let t = map(array![[1.0, 1.0]], 1, 2);
        assert_abs_diff_eq!(success_probability(&t, &t, 0.316).unwrap(), 1.0);

        // single pixel with relative error power 0.25
        let t1 = map(array![[1.0]], 1, 1);
        let e1 = map(array![[0.5]], 1, 1);
        assert_abs_diff_eq!(success_probability(&t1, &e1, 0.316).unwrap(), 1.0);

        // two pixels, error powers 0.09 and 0.81
        let t2 = map(array![[1.0, 1.0]], 1, 2);
        let e2 = map(array![[0.7, 0.1]], 1, 2);
        assert_abs_diff_eq!(success_probability(&t2, &e2, 0.316).unwrap(), 0.5);
    }

    #[test]
    fn success_probability_monotone_in_threshold() {
        let t = map(array![[1.0, 1.0, 1.0, 1.0]], 2, 2);
        let e = map(array![[0.9, 0.5, 0.1, -0.2]], 2, 2);
        let mut last = 0.0;
        for thr in [0.01, 0.1, 0.316, 1.0, 2.0] {
            let p = success_probability(&t, &e, thr).unwrap();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn zero_reference_pixels_need_zero_estimates() {
        let t = map(array![[1.0, 0.0]], 1, 2);
        let good = map(array![[1.0, 0.0]], 1, 2);
        let bad = map(array![[1.0, 0.3]], 1, 2);
        assert_abs_diff_eq!(success_probability(&t, &good, 0.316).unwrap(), 1.0);
        assert_abs_diff_eq!(success_probability(&t, &bad, 0.316).unwrap(), 0.5);
    }

    #[test]
    fn coherence_examples() {
        let a = SpectralLibrary::new(Array2::eye(3)).unwrap();
        assert_abs_diff_eq!(mutual_coherence(&a).unwrap(), 0.0);

        let dup = SpectralLibrary::new(array![[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(mutual_coherence(&dup).unwrap(), 1.0, epsilon = 1e-15);

        let eps = 1e-3;
        let near = SpectralLibrary::new(array![[1.0, 1.0], [0.0, eps]]).unwrap();
        assert_abs_diff_eq!(
            mutual_coherence(&near).unwrap(),
            1.0 / (1.0 + eps * eps).sqrt(),
            epsilon = 1e-12
        );

        let zero = SpectralLibrary::new(array![[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(mutual_coherence(&zero), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn coherence_invariant_under_positive_column_scaling() {
        let a = SpectralLibrary::new(array![[1.0, 0.4, 0.2], [0.3, 1.0, 0.8]]).unwrap();
        let mut scaled = a.matrix().clone();
        for (j, f) in [2.0, 0.5, 7.0].iter().enumerate() {
            scaled.column_mut(j).mapv_inplace(|v| v * f);
        }
        let b = SpectralLibrary::new(scaled).unwrap();
        let ca = mutual_coherence(&a).unwrap();
        let cb = mutual_coherence(&b).unwrap();
        assert!((ca - cb).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&ca));
    }
}
