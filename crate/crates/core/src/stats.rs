//! Two-sample tests used by the embedding-accuracy metric.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Two-sided p-value of Welch's unequal-variance t-test.
///
/// Both samples need at least two values. When both variances are zero the
/// p-value is 1 for equal means and 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2, "welch_t_test needs two values per sample");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Two-sided p-value of the F-test for equal variances.
pub fn f_test(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2, "f_test needs two values per sample");
    let (va, vb) = (sample_variance(a), sample_variance(b));
    match (va > 0.0, vb > 0.0) {
        (false, false) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let f = va / vb;
    let dist = FisherSnedecor::new(a.len() as f64 - 1.0, b.len() as f64 - 1.0).expect("positive degrees of freedom");
    let lower = dist.cdf(f);
    (2.0 * lower.min(1.0 - lower)).clamp(0.0, 1.0)
}
