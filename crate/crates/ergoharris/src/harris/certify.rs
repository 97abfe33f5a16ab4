use serde::Serialize;

use super::{all_pairs, row_lifts, HarrisError, Result, CERT_TOL};
use crate::markov::{
    weighted_distance, DistanceLike, FiniteKernel, LyapunovCertificate, MarkovError,
};

/// Maximum number of times `β` is halved when the exhaustive check fails.
pub const MAX_BETA_HALVINGS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallnessCertificate {
    pub set: Vec<usize>,
    pub epsilon: f64,
    pub t_star: usize,
    pub worst_pair: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub alpha: f64,
    pub t_star: usize,
    pub witness_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeFactors {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_origin: f64,
}

impl RegimeFactors {
    /// Squared-distance factors of the three regimes for a given `β`.
    pub fn new(alpha: f64, epsilon: f64, k_v: f64, beta: f64) -> RegimeFactors {
        RegimeFactors {
            alpha1: 0.5 * (1.0 + alpha),
            alpha2: ((1.0 + 2.0 * beta * k_v) / (1.0 + 3.0 * beta * k_v)).max(0.5),
            alpha_origin: (1.0 - epsilon) * (1.0 + 4.0 * beta * k_v),
        }
    }

    pub fn max(&self) -> f64 {
        self.alpha1.max(self.alpha2).max(self.alpha_origin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakHarrisReport {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Bound on the squared weighted distance after `t_star` steps.
    pub factor: f64,
    pub regime_factors: RegimeFactors,
    pub t_star: usize,
    pub verified: bool,
    /// Largest observed `d̃_β(P rows) / d̃_β(x, y)` over all pairs.
    pub max_ratio: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub beta_halvings: usize,
}

fn normalise_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(HarrisError::InvalidInput("empty state set".into()));
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&x) = s.iter().find(|&&x| x >= n) {
        return Err(HarrisError::InvalidInput(format!("state {x} out of range")));
    }
    Ok(s)
}

fn check_dims(k: &FiniteKernel, d: &DistanceLike) -> Result<()> {
    if k.n() != d.n() {
        return Err(MarkovError::DimensionMismatch {
            expected: k.n(),
            found: d.n(),
        }
        .into());
    }
    Ok(())
}

/// `ε = 1 - max_{x,y ∈ set} d(P^{t⋆}(x,·), P^{t⋆}(y,·))`.
pub fn d_small_check(
    k: &FiniteKernel,
    d: &DistanceLike,
    set: &[usize],
    t_star: usize,
) -> Result<SmallnessCertificate> {
    check_dims(k, d)?;
    small_on(&k.power(t_star), d, set, t_star)
}

fn small_on(
    p: &FiniteKernel,
    d: &DistanceLike,
    set: &[usize],
    t_star: usize,
) -> Result<SmallnessCertificate> {
    let set = normalise_set(set, p.n())?;
    let pairs = all_pairs(&set);
    let lifts = row_lifts(p, &pairs, |i, j| d.get(i, j))?;
    let (mut worst, mut worst_pair) = (0.0, None);
    for (&pair, &l) in pairs.iter().zip(&lifts) {
        if l > worst {
            worst = l;
            worst_pair = Some(pair);
        }
    }
    let epsilon = 1.0 - worst;
    if epsilon <= CERT_TOL {
        return Err(HarrisError::NotSmall {
            epsilon,
            pair: worst_pair.unwrap_or((set[0], set[0])),
        });
    }
    Ok(SmallnessCertificate {
        set,
        epsilon,
        t_star,
        worst_pair,
    })
}

/// `α = max_{d(x,y) < 1} d(P^{t⋆}(x,·), P^{t⋆}(y,·)) / d(x, y)`.
pub fn contraction_check(
    k: &FiniteKernel,
    d: &DistanceLike,
    t_star: usize,
) -> Result<ContractionCertificate> {
    check_dims(k, d)?;
    contraction_on(&k.power(t_star), d, t_star)
}

pub(crate) fn contraction_on(
    p: &FiniteKernel,
    d: &DistanceLike,
    t_star: usize,
) -> Result<ContractionCertificate> {
    let states: Vec<usize> = (0..p.n()).collect();
    let pairs: Vec<(usize, usize)> = all_pairs(&states)
        .into_iter()
        .filter(|&(x, y)| d.get(x, y) < 1.0)
        .collect();
    if pairs.is_empty() {
        return Err(HarrisError::VacuouslyContracting);
    }
    let lifts = row_lifts(p, &pairs, |i, j| d.get(i, j))?;
    let ratios: Vec<f64> = pairs
        .iter()
        .zip(&lifts)
        .map(|(&(x, y), l)| l / d.get(x, y))
        .collect();
    let alpha = ratios.iter().copied().fold(0.0, f64::max);
    let witness_pairs: Vec<(usize, usize)> = pairs
        .iter()
        .zip(&ratios)
        .filter(|(_, &r)| r >= alpha - CERT_TOL)
        .map(|(&p, _)| p)
        .collect();
    if alpha >= 1.0 - CERT_TOL {
        return Err(HarrisError::NotContracting {
            alpha,
            pair: witness_pairs[0],
        });
    }
    Ok(ContractionCertificate {
        alpha,
        t_star,
        witness_pairs,
    })
}

/// Certify `d̃_β(P^{t⋆}(x,·), P^{t⋆}(y,·)) <= √factor · d̃_β(x, y)` for all pairs.
///
/// The regime formulas only propose `β`; the exhaustive optimal-transport
/// check over every pair is what the report certifies.
pub fn weak_harris_certify(
    k: &FiniteKernel,
    d: &DistanceLike,
    v: &[f64],
    cert: &LyapunovCertificate,
    t_star: usize,
) -> Result<WeakHarrisReport> {
    check_dims(k, d)?;
    if v.len() != k.n() {
        return Err(MarkovError::DimensionMismatch {
            expected: k.n(),
            found: v.len(),
        }
        .into());
    }
    let kv = cert.k_v;
    if kv <= 0.0 || !kv.is_finite() {
        return Err(HarrisError::InvalidInput(format!("K_V = {kv}")));
    }
    let p = k.power(t_star);
    let pv = p.apply(v)?;
    for x in 0..v.len() {
        let rhs = v[x] / 8.0 + kv;
        if pv[x] > rhs + CERT_TOL * (1.0 + pv[x].abs()) {
            return Err(HarrisError::LyapunovTooWeak {
                state: x,
                lhs: pv[x],
                rhs,
            });
        }
    }
    let level: Vec<usize> = (0..v.len()).filter(|&x| v[x] <= 4.0 * kv).collect();
    if level.is_empty() {
        return Err(HarrisError::LevelSetNotSmall("level set is empty".into()));
    }
    let epsilon = match small_on(&p, d, &level, t_star) {
        Ok(c) => c.epsilon,
        Err(HarrisError::NotSmall { epsilon, pair }) => {
            return Err(HarrisError::LevelSetNotSmall(format!(
                "epsilon = {epsilon} at {pair:?}"
            )))
        }
        Err(e) => return Err(e),
    };
    let alpha = match contraction_on(&p, d, t_star) {
        Ok(c) => c.alpha,
        Err(HarrisError::VacuouslyContracting) => 0.0,
        Err(HarrisError::NotContracting { alpha, pair }) => {
            return Err(HarrisError::DNotContracting(format!(
                "alpha = {alpha} at {pair:?}"
            )))
        }
        Err(e) => return Err(e),
    };
    let alpha1 = 0.5 * (1.0 + alpha);
    let beta_close = if alpha > 0.0 {
        (alpha1 / alpha - 1.0) / (2.0 * kv)
    } else {
        f64::INFINITY
    };
    let mut beta = (epsilon / (4.0 * kv)).min(beta_close);

    let states: Vec<usize> = (0..k.n()).collect();
    let pairs = all_pairs(&states);
    let mut last = None;
    for halvings in 0..=MAX_BETA_HALVINGS {
        let regime_factors = RegimeFactors::new(alpha, epsilon, kv, beta);
        let factor = regime_factors.max();
        let wd = weighted_distance(d, v, beta);
        let lifts = row_lifts(&p, &pairs, |i, j| wd.eval(i, j))?;
        let bound = factor.sqrt();
        let (mut max_ratio, mut worst_pair, mut ok) = (0.0, None, true);
        for (&(x, y), &l) in pairs.iter().zip(&lifts) {
            let base = wd.eval(x, y);
            let r = l / base;
            if r > max_ratio {
                max_ratio = r;
                worst_pair = Some((x, y));
            }
            if l > bound * base * (1.0 + CERT_TOL) {
                ok = false;
            }
        }
        if ok && factor < 1.0 {
            return Ok(WeakHarrisReport {
                epsilon,
                alpha,
                beta,
                factor,
                regime_factors,
                t_star,
                verified: true,
                max_ratio,
                worst_pair,
                beta_halvings: halvings,
            });
        }
        last = Some((max_ratio, bound, worst_pair.unwrap_or((0, 0))));
        beta *= 0.5;
    }
    let (ratio, bound, pair) = last.expect("at least one attempt");
    Err(HarrisError::VerificationFailed { ratio, bound, pair })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{make_finite_kernel, Measure};

    fn two_state() -> FiniteKernel {
        make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn small_examples() {
        let c = FiniteKernel::constant(&Measure::new(vec![0.2, 0.3, 0.5]).unwrap());
        let d = DistanceLike::trivial(3);
        assert_eq!(d_small_check(&c, &d, &[0, 1, 2], 1).unwrap().epsilon, 1.0);
        assert!(matches!(
            d_small_check(
                &FiniteKernel::identity(2),
                &DistanceLike::trivial(2),
                &[0, 1],
                1
            ),
            Err(HarrisError::NotSmall { .. })
        ));
        let e = d_small_check(&two_state(), &DistanceLike::trivial(2), &[0, 1], 1)
            .unwrap()
            .epsilon;
        assert!((e - 0.3).abs() < 1e-12);
    }

    #[test]
    fn contraction_examples() {
        let c = FiniteKernel::constant(&Measure::uniform(3));
        let d = DistanceLike::truncated_line(3, 4.0).unwrap();
        assert_eq!(contraction_check(&c, &d, 1).unwrap().alpha, 0.0);
        assert!(matches!(
            contraction_check(&FiniteKernel::identity(3), &d, 1),
            Err(HarrisError::NotContracting { .. })
        ));
        assert_eq!(
            contraction_check(&two_state(), &DistanceLike::trivial(2), 1),
            Err(HarrisError::VacuouslyContracting)
        );
    }

    #[test]
    fn origin_regime_formula() {
        // K_V = 1, ε = 0.5, β = ε / (4 K_V)
        let f = RegimeFactors::new(0.01, 0.5, 1.0, 0.125);
        assert!((f.alpha_origin - 0.75).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel_certifies() {
        let c = FiniteKernel::constant(&Measure::uniform(4));
        let d = DistanceLike::truncated_line(4, 2.0).unwrap();
        let v = [0.0; 4];
        let cert = LyapunovCertificate {
            c_v: 1.0,
            gamma: 1.0,
            k_v: 1.0,
        };
        let r = weak_harris_certify(&c, &d, &v, &cert, 1).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(r.epsilon, 1.0);
        assert!(r.verified && r.factor < 1.0);
    }
}
