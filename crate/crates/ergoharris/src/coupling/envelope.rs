use rayon::prelude::*;
use serde::Serialize;

use super::pair_kernel::run_coupled;
use super::{CouplingError, CouplingKernelOnPairs, Result};
use crate::markov::DistanceLike;
use crate::rng::stream;
use crate::stats::{proportion, MeanSe};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Fraction of paths with `d(X_n, Y_n) <= α̃ⁿ` for all `n <= N`.
    pub fraction: f64,
    pub se: f64,
    /// `1 - d(x, y)`.
    pub bound: f64,
    pub pass: bool,
}

fn check_alpha(alpha_tilde: f64) -> Result<()> {
    if alpha_tilde > 0.0 && alpha_tilde < 1.0 {
        Ok(())
    } else {
        Err(CouplingError::InvalidInput(format!(
            "alpha_tilde = {alpha_tilde} must lie in (0, 1)"
        )))
    }
}

/// Monte Carlo estimate of the probability that coupled paths from `(x, y)`
/// stay under the envelope `α̃ⁿ` up to step `n_max`.
#[allow(clippy::too_many_arguments)]
pub fn envelope_probability(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    alpha_tilde: f64,
    n_max: usize,
    m: usize,
    seed: u64,
) -> Result<EnvelopeReport> {
    check_alpha(alpha_tilde)?;
    let hits = (0..m)
        .into_par_iter()
        .filter(|&i| {
            let p = run_coupled(ck, d, x, y, n_max, &mut stream(seed, i as u64));
            let mut env = 1.0;
            p.distances.iter().all(|&v| {
                let ok = v <= env;
                env *= alpha_tilde;
                ok
            })
        })
        .count();
    let (fraction, se) = proportion(hits, m);
    let bound = 1.0 - d.get(x, y);
    Ok(EnvelopeReport {
        fraction,
        se,
        bound,
        pass: fraction >= bound - 3.0 * se,
    })
}

/// Mean and SE of `V_{n∧τ} = α̃^{-(n∧τ)} d(X_{n∧τ}, Y_{n∧τ})` for `n = 0..=n_max`,
/// where `τ` is the first `n` with `α̃^{-n} d(X_n, Y_n) >= 1`.
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_profile(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    alpha_tilde: f64,
    n_max: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<MeanSe>> {
    check_alpha(alpha_tilde)?;
    let stopped: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let p = run_coupled(ck, d, x, y, n_max, &mut stream(seed, i as u64));
            let mut out = Vec::with_capacity(n_max + 1);
            let mut frozen = None;
            for (n, &v) in p.distances.iter().enumerate() {
                let val = frozen.unwrap_or_else(|| v * alpha_tilde.powi(-(n as i32)));
                if frozen.is_none() && val >= 1.0 {
                    frozen = Some(val);
                }
                out.push(val);
            }
            out
        })
        .collect();
    Ok((0..=n_max)
        .map(|n| MeanSe::of(&stopped.iter().map(|s| s[n]).collect::<Vec<_>>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_contracting_coupling_kernel;
    use crate::markov::make_finite_kernel;

    fn setup(d01: f64) -> (DistanceLike, CouplingKernelOnPairs) {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let d = DistanceLike::new(&[vec![0.0, d01], vec![d01, 0.0]]).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 0.8).unwrap();
        (d, ck)
    }

    #[test]
    fn diagonal_start() {
        let (d, ck) = setup(0.35);
        let r = envelope_probability(&ck, &d, 1, 1, 0.8, 50, 100, 1).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn two_state_envelope() {
        let (d, ck) = setup(0.35);
        let r = envelope_probability(&ck, &d, 0, 1, 0.8, 50, 4000, 2).unwrap();
        // coupled by step 5 keeps 0.35 under 0.8^n
        assert!((r.fraction - (1.0 - 0.7f64.powi(5))).abs() < 4.0 * r.se);
        assert!(r.pass);
    }

    #[test]
    fn profile_is_nonincreasing() {
        let (d, ck) = setup(0.35);
        let prof = supermartingale_profile(&ck, &d, 0, 1, 0.8, 30, 4000, 3).unwrap();
        assert!((prof[0].mean - 0.35).abs() < 1e-12);
        for w in prof.windows(2) {
            assert!(w[1].mean <= w[0].mean + 3.0 * w[1].se.max(w[0].se) + 1e-12);
        }
    }
}
