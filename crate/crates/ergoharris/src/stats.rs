//! Small statistical helpers for Monte Carlo checks.

use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Normal};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub var: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> MeanSe {
        let n = xs.len();
        if n == 0 {
            return MeanSe {
                mean: f64::NAN,
                var: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MeanSe {
            mean,
            var,
            se: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Fraction of `hits` in `n` trials with its binomial standard error.
pub fn proportion(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Standard error of a sample variance (normal-theory approximation from the
/// fourth central moment).
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = MeanSe::of(xs);
    let m4 = xs.iter().map(|x| (x - m.mean).powi(4)).sum::<f64>() / n;
    ((m4 - m.var * m.var * (n - 3.0) / (n - 1.0)) / n)
        .max(0.0)
        .sqrt()
}

/// One-sided Clopper–Pearson lower bound at confidence `conf`.
pub fn clopper_pearson_lower(hits: usize, n: usize, conf: f64) -> f64 {
    if hits == 0 || n == 0 {
        return 0.0;
    }
    let b = Beta::new(hits as f64, (n - hits + 1) as f64).expect("valid beta parameters");
    b.inverse_cdf(1.0 - conf)
}

/// One-sided Clopper–Pearson upper bound at confidence `conf`.
pub fn clopper_pearson_upper(hits: usize, n: usize, conf: f64) -> f64 {
    if hits >= n {
        return 1.0;
    }
    let b = Beta::new((hits + 1) as f64, (n - hits) as f64).expect("valid beta parameters");
    b.inverse_cdf(conf)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Clone, Copy, Debug)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Cells with expected count below 5 are pooled.
pub fn chi_square_gof(counts: &[usize], probs: &[f64]) -> ChiSquare {
    assert_eq!(counts.len(), probs.len());
    let total: usize = counts.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * n;
        if e >= 5.0 {
            cells.push((c as f64, e));
        } else {
            pool_obs += c as f64;
            pool_exp += e;
        }
    }
    if pool_exp > 0.0 || pool_obs > 0.0 {
        cells.push((pool_obs, pool_exp));
    }
    if cells.len() < 2 {
        let ok = cells
            .iter()
            .all(|&(o, e)| (o - e).abs() < 1e-9 * n.max(1.0));
        return ChiSquare {
            statistic: 0.0,
            dof: 0,
            p_value: if ok { 1.0 } else { 0.0 },
        };
    }
    let mut statistic = 0.0;
    for &(o, e) in &cells {
        if e > 0.0 {
            statistic += (o - e).powi(2) / e;
        } else if o > 0.0 {
            statistic = f64::INFINITY;
        }
    }
    let dof = cells.len() - 1;
    let p_value = if statistic.is_finite() {
        1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(statistic)
    } else {
        0.0
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_hand_values() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.var - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.se - (5.0 / 12.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson_lower(0, 100, 0.99), 0.0);
        // all successes: lower bound is (1-conf)^(1/n)
        let lo = clopper_pearson_lower(100, 100, 0.99);
        assert!((lo - 0.01f64.powf(0.01)).abs() < 1e-9);
        let up = clopper_pearson_upper(0, 100, 0.99);
        assert!((up - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-9);
    }

    #[test]
    fn chi_square_accepts_exact_counts() {
        let c = chi_square_gof(&[500, 300, 200], &[0.5, 0.3, 0.2]);
        assert_eq!(c.statistic, 0.0);
        assert!(c.p_value > 0.999);
        let bad = chi_square_gof(&[900, 50, 50], &[0.5, 0.3, 0.2]);
        assert!(bad.p_value < 1e-6);
    }
}
