//! Log-sum-exp operator and Boltzmann sampling over preferences.
//!
//! Everything here is max-shifted: `L(p) = m + ln(sum exp(eta (p - m))) / eta`
//! with `m = max p`, so large temperatures and large preferences never
//! overflow.

use rand::Rng;

/// `(1/eta) ln sum_i exp(eta * prefs[i])`. Returns 0 for an empty slice.
pub fn log_sum_exp(prefs: &[f64], eta: f64) -> f64 {
    if prefs.is_empty() {
        return 0.0;
    }
    let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = prefs.iter().map(|p| (eta * (p - max)).exp()).sum();
    max + sum.ln() / eta
}

/// Softmax probabilities `exp(eta p_i) / sum_j exp(eta p_j)`.
pub fn softmax(prefs: &[f64], eta: f64) -> Vec<f64> {
    if prefs.is_empty() {
        return Vec::new();
    }
    let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = prefs.iter().map(|p| (eta * (p - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws an index from the softmax distribution. `None` when `prefs` is empty.
pub fn sample_softmax<R: Rng + ?Sized>(prefs: &[f64], eta: f64, rng: &mut R) -> Option<usize> {
    if prefs.is_empty() {
        return None;
    }
    let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = prefs.iter().map(|p| (eta * (p - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Some(i);
        }
        u -= w;
    }
    // Rounding can leave u marginally above the last weight.
    weights.iter().rposition(|w| *w > 0.0)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;

    #[test]
    fn single_child_identity() {
        assert_eq!(log_sum_exp(&[1.25], 3.0), 1.25);
        assert_eq!(softmax(&[4.0], 0.5), vec![1.0]);
    }

    #[test]
    fn two_zero_prefs_give_ln2() {
        assert!((log_sum_exp(&[0.0, 0.0], 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn large_eta_approaches_hard_max() {
        assert!((log_sum_exp(&[3.0, 1.0], 1000.0) - 3.0).abs() < 1e-3);
        let p = softmax(&[3.0, 1.0], 1000.0);
        assert!(p[0] > 1.0 - 1e-12);
    }

    #[test]
    fn analytic_softmax_row() {
        let p = softmax(&[3.0, 1.0], 1.0);
        let e3 = 3f64.exp();
        let e1 = 1f64.exp();
        assert!((p[0] - e3 / (e3 + e1)).abs() < 1e-12);
        assert!((p[0] - 0.8808).abs() < 1e-4);
        assert!((p[1] - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn sample_empty_is_none() {
        let mut rng = rng_from(&[1]);
        assert_eq!(sample_softmax(&[], 1.0, &mut rng), None);
    }

    #[test]
    fn equal_prefs_sample_evenly() {
        let mut rng = rng_from(&[42]);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| sample_softmax(&[0.7, 0.7], 2.0, &mut rng) == Some(0))
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    proptest! {
        #[test]
        fn bracket_inequality(prefs in prop::collection::vec(-50.0f64..50.0, 1..8), eta in 0.01f64..100.0) {
            let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l = log_sum_exp(&prefs, eta);
            let n = prefs.len() as f64;
            prop_assert!(max <= l + 1e-12);
            prop_assert!(l <= max + n.ln() / eta + 1e-12);
        }

        #[test]
        fn shift_invariance(prefs in prop::collection::vec(-20.0f64..20.0, 1..6), c in -100.0f64..100.0, eta in 0.1f64..10.0) {
            let shifted: Vec<f64> = prefs.iter().map(|p| p + c).collect();
            let a = softmax(&prefs, eta);
            let b = softmax(&shifted, eta);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((log_sum_exp(&shifted, eta) - log_sum_exp(&prefs, eta) - c).abs() < 1e-9);
        }

        #[test]
        fn rows_sum_to_one(prefs in prop::collection::vec(-30.0f64..30.0, 1..10), eta in 0.01f64..50.0) {
            let s: f64 = softmax(&prefs, eta).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
