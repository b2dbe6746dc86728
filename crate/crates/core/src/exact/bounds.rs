use super::ExactError;

/// Constants entering the error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub gamma: f64,
    pub eta: f64,
    pub n_actions: usize,
    /// `Rmax / (1 - gamma)`.
    pub vmax: f64,
    /// Covering radius.
    pub delta: f64,
    /// Covering size (or visited-set size for the asynchronous scheme).
    pub n_delta: usize,
    /// Failure probability.
    pub alpha: f64,
}

impl BoundParams {
    fn check(&self) -> Result<(), ExactError> {
        let bad = |m: &str| Err(ExactError::Domain(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.n_actions == 0 {
            return bad("action set is empty");
        }
        if !(self.vmax >= 0.0 && self.vmax.is_finite()) {
            return bad("vmax must be finite and non-negative");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be non-negative");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.n_delta == 0 {
            return bad("covering is empty");
        }
        Ok(())
    }

    fn log_a(&self) -> f64 {
        (self.n_actions as f64).ln()
    }

    /// `gamma delta Vmax / (1 - gamma)`.
    pub fn projection_term(&self) -> f64 {
        self.gamma * self.delta * self.vmax / (1.0 - self.gamma)
    }
}

/// `2 gamma (log|A|/eta + 4 Vmax) / (1 - gamma)^2`.
pub fn k1(p: &BoundParams) -> Result<f64, ExactError> {
    p.check()?;
    let g = p.gamma;
    Ok(2.0 * g * (p.log_a() / p.eta + 4.0 * p.vmax) / (1.0 - g).powi(2))
}

/// `[4 gamma log|A| / (eta (1-gamma)^3) + 2 Vmax / (1-gamma)]
/// * sqrt(2 log(2 |A| N_delta / alpha))`.
pub fn k2(p: &BoundParams) -> Result<f64, ExactError> {
    p.check()?;
    let g = p.gamma;
    let lead = 4.0 * g * p.log_a() / (p.eta * (1.0 - g).powi(3)) + 2.0 * p.vmax / (1.0 - g);
    let inner = 2.0 * p.n_actions as f64 * p.n_delta as f64 / p.alpha;
    Ok(lead * (2.0 * inner.ln()).sqrt())
}

/// Bound on `||Q* - Q^{pi_k}||` given the sup norms `||E_j||` for
/// `j = 0..=k` (`e_sup.len() == k + 1`).
pub fn theorem1_bound(p: &BoundParams, k: usize, e_sup: &[f64]) -> Result<f64, ExactError> {
    p.check()?;
    if e_sup.len() != k + 1 {
        return Err(ExactError::Domain(format!(
            "need {} error norms, got {}",
            k + 1,
            e_sup.len()
        )));
    }
    let g = p.gamma;
    let mut acc = 0.0;
    for (j, e) in e_sup.iter().enumerate() {
        acc += g.powi((k - j) as i32) * e;
    }
    let head = g * (4.0 * p.vmax + p.log_a() / p.eta) / (1.0 - g);
    Ok(2.0 / ((1.0 - g) * (k as f64 + 1.0)) * (head + acc))
}

/// High-probability bound after `kappa` rounds:
/// `K1/(kappa+1) + K2/sqrt(kappa+1) + gamma delta Vmax/(1-gamma)`.
pub fn theorem2_bound(p: &BoundParams, kappa: usize) -> Result<f64, ExactError> {
    let n = kappa as f64 + 1.0;
    Ok(k1(p)? / n + k2(p)? / n.sqrt() + p.projection_term())
}

/// Both bounds at once.
pub fn theorem_bounds(p: &BoundParams, k: usize, kappa: usize, e_sup: &[f64]) -> Result<(f64, f64), ExactError> {
    Ok((theorem1_bound(p, k, e_sup)?, theorem2_bound(p, kappa)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BoundParams {
        BoundParams {
            gamma: 0.5,
            eta: 1.0,
            n_actions: 2,
            vmax: 2.0,
            delta: 0.0,
            n_delta: 1,
            alpha: 0.05,
        }
    }

    #[test]
    fn k1_reference_value() {
        let v = k1(&params()).unwrap();
        assert!((v - 34.7726).abs() < 1e-4, "{v}");
    }

    #[test]
    fn k2_by_hand() {
        let p = params();
        let lead = 4.0 * 0.5 * 2f64.ln() / 0.125 + 2.0 * 2.0 / 0.5;
        let want = lead * (2.0 * (4.0f64 / 0.05).ln()).sqrt();
        assert!((k2(&p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn exact_errors_give_pure_rate() {
        let p = params();
        let b0 = theorem1_bound(&p, 0, &[0.0]).unwrap();
        let b9 = theorem1_bound(&p, 9, &[0.0; 10]).unwrap();
        assert!((b0 / b9 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn error_terms_are_discounted() {
        let p = params();
        let base = theorem1_bound(&p, 2, &[0.0; 3]).unwrap();
        let early = theorem1_bound(&p, 2, &[1.0, 0.0, 0.0]).unwrap() - base;
        let late = theorem1_bound(&p, 2, &[0.0, 0.0, 1.0]).unwrap() - base;
        assert!((late / early - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_bound_decreases_to_projection_term() {
        let mut p = params();
        p.delta = 0.1;
        let far = theorem2_bound(&p, 10_000_000).unwrap();
        assert!(theorem2_bound(&p, 10).unwrap() > theorem2_bound(&p, 100).unwrap());
        assert!(far - p.projection_term() < 0.5);
        assert!((p.projection_term() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        for bad in [
            BoundParams { gamma: 1.0, ..params() },
            BoundParams { eta: 0.0, ..params() },
            BoundParams {
                n_actions: 0,
                ..params()
            },
            BoundParams { alpha: 0.0, ..params() },
            BoundParams { n_delta: 0, ..params() },
        ] {
            assert!(matches!(k1(&bad), Err(ExactError::Domain(_))));
        }
        assert!(theorem1_bound(&params(), 3, &[0.0]).is_err());
    }
}
