use super::{MarkovError, Result, SUM_TOL};

/// Probability vector on `{0, .., n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    w: Vec<f64>,
}

impl Measure {
    /// Validates nonnegativity and total mass, then renormalises away float noise.
    pub fn new(weights: Vec<f64>) -> Result<Measure> {
        if weights.is_empty() {
            return Err(MarkovError::InvalidMeasure("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MarkovError::InvalidMeasure(format!(
                    "weight {i} is not finite"
                )));
            }
            if w < 0.0 {
                return Err(MarkovError::InvalidMeasure(format!(
                    "weight {i} is negative ({w})"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(MarkovError::InvalidMeasure(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Measure::normalised(weights))
    }

    /// Divide by the total. Callers guarantee a positive total.
    pub(crate) fn normalised(mut w: Vec<f64>) -> Measure {
        let total: f64 = w.iter().sum();
        if total != 1.0 {
            w.iter_mut().for_each(|x| *x /= total);
        }
        Measure { w }
    }

    pub fn dirac(n: usize, x: usize) -> Measure {
        let mut w = vec![0.0; n];
        w[x] = 1.0;
        Measure { w }
    }

    pub fn uniform(n: usize) -> Measure {
        Measure {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, x: usize) -> f64 {
        self.w[x]
    }

    /// `(1 - theta) * self + theta * other`.
    pub fn mix(&self, other: &Measure, theta: f64) -> Result<Measure> {
        check_len(self.len(), other.len())?;
        let w = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        Ok(Measure::normalised(w))
    }

    /// Integral of `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(a, b)| a * b).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.w[i] > 0.0).collect()
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(MarkovError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Total variation with the convention that singular measures are at distance 1.
pub fn total_variation(mu: &Measure, nu: &Measure) -> Result<f64> {
    check_len(mu.len(), nu.len())?;
    let l1: f64 = mu.w.iter().zip(&nu.w).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * l1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let mu = Measure::new(vec![0.9, 0.1]).unwrap();
        let nu = Measure::new(vec![0.2, 0.8]).unwrap();
        assert!((total_variation(&mu, &nu).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(total_variation(&mu, &mu).unwrap(), 0.0);
        assert_eq!(
            total_variation(&Measure::dirac(2, 0), &Measure::dirac(2, 1)).unwrap(),
            1.0
        );
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Measure::new(vec![0.5, 0.6]).is_err());
        assert!(Measure::new(vec![1.1, -0.1]).is_err());
        assert!(matches!(
            total_variation(&Measure::uniform(2), &Measure::uniform(3)),
            Err(MarkovError::DimensionMismatch { .. })
        ));
    }
}
