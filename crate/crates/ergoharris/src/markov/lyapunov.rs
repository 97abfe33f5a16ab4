use super::measure::check_len;
use super::{FiniteKernel, MarkovError, Result};

/// Smallest admissible `K_V`; keeps certificates strictly positive.
pub const K_FLOOR: f64 = 1e-12;
const CHECK_TOL: f64 = 1e-12;

/// Constants with `(P^t V)(x) <= C_V e^{-γt} V(x) + K_V`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LyapunovCertificate {
    pub c_v: f64,
    pub gamma: f64,
    pub k_v: f64,
}

impl LyapunovCertificate {
    /// Largest violation of the certified inequality over `t <= horizon`
    /// (nonpositive when the certificate holds).
    pub fn worst_violation(&self, k: &FiniteKernel, v: &[f64], horizon: usize) -> Result<f64> {
        check_len(k.n(), v.len())?;
        let mut w = v.to_vec();
        let mut worst = f64::NEG_INFINITY;
        for t in 1..=horizon {
            w = k.apply(&w)?;
            let decay = (-self.gamma * t as f64).exp();
            for x in 0..v.len() {
                let bound = self.c_v * decay * v[x] + self.k_v;
                worst = worst.max(w[x] - bound - CHECK_TOL * (1.0 + w[x].abs()));
            }
        }
        Ok(worst)
    }

    pub fn holds(&self, k: &FiniteKernel, v: &[f64], horizon: usize) -> Result<bool> {
        Ok(self.worst_violation(k, v, horizon)? <= 0.0)
    }
}

/// Fit a Lyapunov certificate on the horizon `1..=horizon`.
///
/// `K_V` is the smallest value compatible with `C_V = 1`; given `K_V` the rate
/// `γ` is the largest that works. If that rate is zero, `C_V = 1` is dropped
/// and the smallest `C_V > 1` is found by bisection that reaches the rate
/// available with `C_V = 1` and doubled `K_V`. A certificate whose `K_V`
/// reaches `max V` carries no drift information and is rejected.
pub fn lyapunov_check(k: &FiniteKernel, v: &[f64], horizon: usize) -> Result<LyapunovCertificate> {
    check_len(k.n(), v.len())?;
    if let Some(x) = v.iter().position(|&x| !x.is_finite() || x < 0.0) {
        return Err(MarkovError::NoCertificate(format!(
            "V({x}) = {} is not a nonnegative number",
            v[x]
        )));
    }
    if horizon == 0 {
        return Err(MarkovError::NoCertificate(
            "horizon must be at least 1".into(),
        ));
    }
    let mut iterates = Vec::with_capacity(horizon);
    let mut w = v.to_vec();
    for _ in 0..horizon {
        w = k.apply(&w)?;
        iterates.push(w.clone());
    }
    let vmax = v.iter().copied().fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(LyapunovCertificate {
            c_v: 1.0,
            gamma: f64::INFINITY,
            k_v: K_FLOOR,
        });
    }
    let excess = iterates
        .iter()
        .flat_map(|w| w.iter().zip(v).map(|(a, b)| a - b))
        .fold(0.0, f64::max);
    let k0 = excess.max(K_FLOOR);

    let gamma1 = max_rate(&iterates, v, 1.0, k0);
    if gamma1 > 0.0 {
        if k0 >= vmax {
            return Err(MarkovError::NoCertificate(format!(
                "K_V = {k0} is not below max V = {vmax}"
            )));
        }
        return finish(
            k,
            v,
            horizon,
            LyapunovCertificate {
                c_v: 1.0,
                gamma: gamma1,
                k_v: k0,
            },
        );
    }
    if 2.0 * k0 >= vmax {
        return Err(MarkovError::NoCertificate(format!(
            "no decay at K_V = {k0} with C_V = 1, and doubling K_V reaches max V = {vmax}"
        )));
    }
    let target = max_rate(&iterates, v, 1.0, 2.0 * k0);
    if target <= 0.0 || !target.is_finite() {
        return Err(MarkovError::NoCertificate(
            "no positive rate at doubled K_V".into(),
        ));
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while max_rate(&iterates, v, hi, k0) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(MarkovError::NoCertificate("C_V search diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if max_rate(&iterates, v, mid, k0) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(
        k,
        v,
        horizon,
        LyapunovCertificate {
            c_v: hi,
            gamma: target,
            k_v: k0,
        },
    )
}

fn finish(
    k: &FiniteKernel,
    v: &[f64],
    horizon: usize,
    cert: LyapunovCertificate,
) -> Result<LyapunovCertificate> {
    let worst = cert.worst_violation(k, v, horizon)?;
    if worst > 0.0 {
        return Err(MarkovError::NoCertificate(format!(
            "fitted certificate violated by {worst}"
        )));
    }
    Ok(cert)
}

/// Largest `γ` with `W_t(x) <= c e^{-γt} V(x) + k` on all data; `-inf` if no
/// `γ >= 0` works, `+inf` if no constraint binds.
fn max_rate(iterates: &[Vec<f64>], v: &[f64], c: f64, k: f64) -> f64 {
    let mut gamma = f64::INFINITY;
    for (i, w) in iterates.iter().enumerate() {
        let t = (i + 1) as f64;
        for x in 0..v.len() {
            let excess = w[x] - k;
            if excess <= 0.0 {
                continue;
            }
            if v[x] == 0.0 {
                return f64::NEG_INFINITY;
            }
            gamma = gamma.min(-(excess / (c * v[x])).ln() / t);
        }
    }
    gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_finite_kernel;

    fn two_state() -> FiniteKernel {
        make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn zero_function() {
        let c = lyapunov_check(&two_state(), &[0.0, 0.0], 10).unwrap();
        assert_eq!(c.k_v, K_FLOOR);
        assert_eq!(c.c_v, 1.0);
    }

    #[test]
    fn two_state_one_step_fit() {
        let c = lyapunov_check(&two_state(), &[0.0, 1.0], 1).unwrap();
        assert_eq!(c.c_v, 1.0);
        assert!((c.k_v - 0.1).abs() < 1e-15);
        // largest rate at K_V = 0.1: 0.8 = e^{-γ} + 0.1
        assert!((c.gamma + 0.7f64.ln()).abs() < 1e-12);
        let hand = LyapunovCertificate {
            c_v: 1.0,
            gamma: 1.25f64.ln(),
            k_v: 0.1,
        };
        assert!(hand.holds(&two_state(), &[0.0, 1.0], 1).unwrap());
    }

    #[test]
    fn escaping_chain_has_no_certificate() {
        // deterministic climb 0 -> 1 -> .. -> 9 (absorbing), V doubles along it
        let n = 10;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|x| {
                let mut r = vec![0.0; n];
                r[(x + 1).min(n - 1)] = 1.0;
                r
            })
            .collect();
        let k = make_finite_kernel(&rows).unwrap();
        let v: Vec<f64> = (0..n).map(|x| 2f64.powi(x as i32)).collect();
        assert!(matches!(
            lyapunov_check(&k, &v, 20),
            Err(MarkovError::NoCertificate(_))
        ));
    }

    #[test]
    fn reflected_walk_certificate_holds() {
        let k = FiniteKernel::reflected_walk(30, 0.7).unwrap();
        let v: Vec<f64> = (0..30).map(|x| x as f64).collect();
        let c = lyapunov_check(&k, &v, 200).unwrap();
        assert!(c.gamma > 0.0 && c.k_v < 29.0);
        assert!(c.holds(&k, &v, 200).unwrap());
    }
}
