use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean, sample standard deviation and the half-width of the two-sided
/// 95% Student-t interval. One value gives a zero-width interval.
pub fn mean_ci95(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975);
    (mean, sd, t * sd / (n as f64).sqrt())
}

/// One-sided Welch t-test of `mean(a) > mean(b)`; returns the p-value.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa, _) = mean_ci95(a);
    let (mb, sb, _) = mean_ci95(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let va = sa * sa / na;
    let vb = sb * sb / nb;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return if ma > mb { 0.0 } else { 1.0 };
    }
    let t = (ma - mb) / se;
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    1.0 - StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}
