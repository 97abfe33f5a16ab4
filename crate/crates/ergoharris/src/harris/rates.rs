use serde::Serialize;

use super::{HarrisError, Result};
use crate::markov::{
    invariant_measures, wasserstein1_signed, DistanceLike, FiniteKernel, Measure, Metric,
};

/// First step used in the rate regression; earlier steps are transient.
pub const T_BURN: usize = 5;
/// Profile values below this are treated as converged.
pub const PROFILE_FLOOR: f64 = 1e-9;
/// Profile values below this are rounding residue of an exact zero.
pub const ZERO_FLOOR: f64 = 1e-12;
/// Successive differences below this count as zero in the Cauchy diagnostic.
pub const CAUCHY_FLOOR: f64 = 1e-12;

/// `sup_x ‖P^t(x,·) - μ⋆‖_TV / (1 + V(x)) <= c_tilde · e^{-gamma t}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarrisRate {
    pub c_tilde: f64,
    /// `+inf` when the profile vanishes before the fitting window.
    pub gamma: f64,
    pub fit_window: Option<(usize, usize)>,
    /// The weighted total variation profile for `t = 0, 1, ..`.
    pub profile: Vec<f64>,
}

impl HarrisRate {
    pub fn bound(&self, t: usize) -> f64 {
        if self.gamma.is_infinite() {
            if t == 0 {
                self.c_tilde
            } else {
                0.0
            }
        } else {
            self.c_tilde * (-self.gamma * t as f64).exp()
        }
    }
}

/// Fit the classical Harris rate by log-linear regression over `[T_BURN, t_max]`.
pub fn classical_harris_rate(k: &FiniteKernel, v: &[f64], t_max: usize) -> Result<HarrisRate> {
    let n = k.n();
    if v.len() != n {
        return Err(HarrisError::InvalidInput(format!(
            "V has {} entries for {n} states",
            v.len()
        )));
    }
    let classes = invariant_measures(k);
    if classes.len() != 1 {
        return Err(HarrisError::MultipleInvariantMeasures {
            count: classes.len(),
        });
    }
    let star = &classes[0].measure;
    // signed rows of P^t - 1 μ⋆, propagated exactly since μ⋆ P = μ⋆
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| if x == y { 1.0 } else { 0.0 } - star.get(y))
                .collect()
        })
        .collect();
    let weighted = |rows: &[Vec<f64>]| {
        rows.iter()
            .enumerate()
            .map(|(x, r)| 0.5 * r.iter().map(|a| a.abs()).sum::<f64>() / (1.0 + v[x]))
            .fold(0.0, f64::max)
    };
    let mut profile = vec![weighted(&rows)];
    for _ in 0..t_max {
        rows = rows
            .iter()
            .map(|r| k.step_signed(r).expect("sizes match"))
            .collect();
        let e = weighted(&rows);
        profile.push(e);
        if e < ZERO_FLOOR {
            break;
        }
    }
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .skip(T_BURN)
        .filter(|(_, &e)| e >= PROFILE_FLOOR)
        .map(|(t, &e)| (t as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        if profile.iter().skip(1).all(|&e| e < ZERO_FLOOR) {
            return Ok(HarrisRate {
                c_tilde: profile[0],
                gamma: f64::INFINITY,
                fit_window: None,
                profile,
            });
        }
        // too few points above the floor: fit on everything positive after t = 0
        return Ok(fit(profile, 1));
    }
    let window = (pts[0].0 as usize, pts[pts.len() - 1].0 as usize);
    let mut r = fit_points(&pts, profile);
    r.fit_window = Some(window);
    Ok(r)
}

fn fit(profile: Vec<f64>, from: usize) -> HarrisRate {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .skip(from)
        .filter(|(_, &e)| e > 0.0)
        .map(|(t, &e)| (t as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        let c_tilde = profile.iter().copied().fold(0.0, f64::max);
        return HarrisRate {
            c_tilde,
            gamma: 0.0,
            fit_window: None,
            profile,
        };
    }
    fit_points(&pts, profile)
}

fn fit_points(pts: &[(f64, f64)], profile: Vec<f64>) -> HarrisRate {
    let m = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    let gamma = (-sxy / sxx).max(0.0);
    let c_tilde = profile
        .iter()
        .enumerate()
        .map(|(t, &e)| e * (gamma * t as f64).exp())
        .fold(0.0, f64::max);
    HarrisRate {
        c_tilde,
        gamma,
        fit_window: None,
        profile,
    }
}

/// `K = max(2/c, 2 K_d (1 ∨ C))` for the weak triangle inequality of `d̃`.
///
/// Both hypotheses are checked on all pairs and triples, and the returned
/// constant is verified exhaustively for `d̃` and for `d̃²`.
pub fn weak_triangle_constant(
    d: &DistanceLike,
    v: &[f64],
    k_d: f64,
    c: f64,
    cap_c: f64,
) -> Result<f64> {
    let n = d.n();
    if v.len() != n || c <= 0.0 || k_d <= 0.0 || cap_c < 0.0 {
        return Err(HarrisError::InvalidInput(
            "need matching V, c > 0, K_d > 0, C >= 0".into(),
        ));
    }
    const TOL: f64 = 1e-12;
    for x in 0..n {
        for z in 0..n {
            if d.get(x, z) <= c && v[x] > cap_c * v[z] * (1.0 + TOL) + TOL {
                return Err(HarrisError::HypothesisViolated(format!(
                    "d({x},{z}) <= c but V({x}) = {} > C V({z}) = {}",
                    v[x],
                    cap_c * v[z]
                )));
            }
            for y in 0..n {
                if d.get(x, y) > k_d * (d.get(x, z) + d.get(z, y)) + TOL {
                    return Err(HarrisError::HypothesisViolated(format!(
                        "d({x},{y}) > K_d (d({x},{z}) + d({z},{y}))"
                    )));
                }
            }
        }
    }
    let k = (2.0 / c).max(2.0 * k_d * cap_c.max(1.0));
    let sq = |x: usize, y: usize| d.get(x, y) * (1.0 + v[x] + v[y]);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let (a, b, e) = (sq(x, y), sq(x, z), sq(z, y));
                if a > k * (b + e) * (1.0 + TOL) + TOL {
                    return Err(HarrisError::HypothesisViolated(format!(
                        "squared bound fails at ({x},{y},{z})"
                    )));
                }
                if a.sqrt() > k * (b.sqrt() + e.sqrt()) * (1.0 + TOL) + TOL {
                    return Err(HarrisError::HypothesisViolated(format!(
                        "weak triangle fails at ({x},{y},{z})"
                    )));
                }
            }
        }
    }
    Ok(k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyReport {
    /// `d0`-Wasserstein distance between `P^{nt} μ0` and `P^{(n+1)t} μ0`.
    pub diffs: Vec<f64>,
    /// First `n0` after which every step halves (or is below the floor).
    pub settled_from: Option<usize>,
    pub verified: bool,
}

/// Successive distances along `{P^{nt} μ0}` and whether they eventually halve.
pub fn cauchy_existence_diagnostic(
    k: &FiniteKernel,
    d0: &Metric,
    d: &DistanceLike,
    mu0: &Measure,
    t: usize,
    n_max: usize,
) -> Result<CauchyReport> {
    let n = k.n();
    if d0.n() != n || d.n() != n || mu0.len() != n {
        return Err(HarrisError::InvalidInput("dimension mismatch".into()));
    }
    for x in 0..n {
        for y in 0..n {
            if d0.get(x, y) > d.get(x, y).sqrt() + 1e-12 {
                return Err(HarrisError::HypothesisViolated(format!(
                    "d0({x},{y}) exceeds sqrt d({x},{y})"
                )));
            }
        }
    }
    let p = k.power(t);
    let mut delta: Vec<f64> = p
        .step_signed(mu0.weights())?
        .iter()
        .zip(mu0.weights())
        .map(|(a, b)| a - b)
        .collect();
    let mut diffs = Vec::with_capacity(n_max + 1);
    for i in 0..=n_max {
        if i > 0 {
            delta = p.step_signed(&delta)?;
        }
        diffs.push(wasserstein1_signed(d0, &delta)?);
    }
    let halves = |i: usize| diffs[i + 1] <= (0.5 + 1e-9) * diffs[i] || diffs[i + 1] <= CAUCHY_FLOOR;
    let mut settled_from = None;
    for i in (0..n_max).rev() {
        if halves(i) {
            settled_from = Some(i);
        } else {
            break;
        }
    }
    if n_max == 0 {
        settled_from = Some(0);
    }
    let verified = settled_from.is_some_and(|s| s <= n_max / 2);
    Ok(CauchyReport {
        diffs,
        settled_from,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_finite_kernel;

    #[test]
    fn two_state_rate() {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let r = classical_harris_rate(&k, &[0.0, 0.0], 200).unwrap();
        assert!((r.gamma + 0.7f64.ln()).abs() < 1e-6);
        for (t, &e) in r.profile.iter().enumerate() {
            assert!(e <= r.bound(t) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constant_and_identity() {
        let c = FiniteKernel::constant(&Measure::uniform(3));
        let r = classical_harris_rate(&c, &[0.0; 3], 50).unwrap();
        assert!(r.gamma.is_infinite());
        assert!((r.c_tilde - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            classical_harris_rate(&FiniteKernel::identity(2), &[0.0; 2], 10),
            Err(HarrisError::MultipleInvariantMeasures { count: 2 })
        ));
    }

    #[test]
    fn triangle_constants() {
        let d = DistanceLike::truncated_line(5, 2.0).unwrap();
        assert_eq!(
            weak_triangle_constant(&d, &[0.0; 5], 1.0, 1.0, 1.0).unwrap(),
            2.0
        );
        // V(x) = 2^{x/2}: d(x,z) <= 0.5 means |x - z| <= 1, so C = √2 suffices
        let v: Vec<f64> = (0..5).map(|x| 2f64.powf(x as f64 / 2.0)).collect();
        let k = weak_triangle_constant(&d, &v, 1.0, 0.5, 2f64.sqrt()).unwrap();
        assert_eq!(k, 4.0);
        assert!(matches!(
            weak_triangle_constant(&d, &v, 1.0, 0.5, 1.0),
            Err(HarrisError::HypothesisViolated(_))
        ));
    }

    #[test]
    fn cauchy_on_constant_kernel() {
        let c = FiniteKernel::constant(&Measure::uniform(3));
        let d = DistanceLike::truncated_line(3, 2.0).unwrap();
        let d0 = Metric::try_from(&d).unwrap();
        let r = cauchy_existence_diagnostic(&c, &d0, &d, &Measure::dirac(3, 0), 1, 5).unwrap();
        assert!(r.diffs[0] > 0.0);
        assert!(r.diffs[1..].iter().all(|&x| x == 0.0));
        assert!(r.verified);
    }
}
