//! Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// `sup |F_a − F_b|` over the pooled sample, with the p-value of the limiting
/// Kolmogorov distribution at the small-sample corrected argument
/// `(√n + 0.12 + 0.11/√n)·D`, `n = n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("samples", "both samples must be nonempty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::param("samples", "NaN in sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let sq = ne.sqrt();
    Ok(KsReport {
        statistic: d,
        p_value: kolmogorov_q((sq + 0.12 + 0.11 / sq) * d),
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small λ.
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=6)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (m * m * y).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let x = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (x * (k * k) as f64).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.1, 0.2, 0.2];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_uniforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| 0.5 + rng.random::<f64>()).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.5).abs() < 0.02, "{}", r.statistic);
        assert!(r.p_value < 1e-100);
    }

    #[test]
    fn branches_agree_at_the_switch() {
        let lo = kolmogorov_q(1.18 - 1e-9);
        let hi = kolmogorov_q(1.18 + 1e-9);
        assert!((lo - hi).abs() < 1e-8);
        // tabulated quantiles of the Kolmogorov distribution
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_q(0.828) - 0.5).abs() < 2e-3);
    }

    #[test]
    fn null_p_values_are_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps: Vec<f64> = (0..100)
            .map(|_| {
                let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
                ks_two_sample(&a, &b).unwrap().p_value
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let median = 0.5 * (ps[49] + ps[50]);
        assert!((median - 0.5).abs() < 0.15, "median {median}");
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }
}
