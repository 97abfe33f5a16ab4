use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{CouplingError, CouplingKernelOnPairs, PathPair, Result};
use crate::markov::{DistanceLike, FiniteKernel, Measure};
use crate::rng::{stream, StreamRng};

/// One run of the hit-then-bind construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitBindSample {
    pub path: PathPair,
    /// First time both coordinates are in `U`; `None` if not reached.
    pub tau: Option<usize>,
    /// Number of completed trials `τ_k` (both in `B`) that did not end with
    /// both coordinates in `U` after `T_U` steps.
    pub failed_trials: usize,
}

/// `α = inf_{y ∈ B} P^{T_U}(y, U)`, computed exactly.
pub fn hit_then_bind_alpha(k: &FiniteKernel, b: &[usize], u: &[usize], t_u: usize) -> f64 {
    let p = k.power(t_u);
    b.iter()
        .map(|&y| u.iter().map(|&z| p.get(y, z)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn draw(row: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Run two independent copies from `z` and from a draw of `mu` until both sit
/// in `U`, then continue with the pair kernel `ck`.
#[allow(clippy::too_many_arguments)]
pub fn hit_then_bind_coupling(
    k: &FiniteKernel,
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[usize],
    u: &[usize],
    z: usize,
    mu: &Measure,
    t_u: usize,
    n: usize,
    seed: u64,
) -> Result<HitBindSample> {
    validate(k, b, u, t_u)?;
    Ok(run(k, ck, d, b, u, z, mu, t_u, n, &mut stream(seed, 0)))
}

/// `m` independent runs; run `i` uses stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn hit_then_bind_samples(
    k: &FiniteKernel,
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[usize],
    u: &[usize],
    z: usize,
    mu: &Measure,
    t_u: usize,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<HitBindSample>> {
    validate(k, b, u, t_u)?;
    Ok((0..m)
        .into_par_iter()
        .map(|i| run(k, ck, d, b, u, z, mu, t_u, n, &mut stream(seed, i as u64)))
        .collect())
}

fn validate(k: &FiniteKernel, b: &[usize], u: &[usize], t_u: usize) -> Result<()> {
    if b.is_empty() || u.is_empty() || t_u == 0 {
        return Err(CouplingError::InvalidInput(
            "B and U must be nonempty and T_U >= 1".into(),
        ));
    }
    if b.iter().chain(u).any(|&s| s >= k.n()) {
        return Err(CouplingError::InvalidInput("state out of range".into()));
    }
    if hit_then_bind_alpha(k, b, u, t_u) <= 0.0 {
        return Err(CouplingError::UnreachableU);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    k: &FiniteKernel,
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[usize],
    u: &[usize],
    z: usize,
    mu: &Measure,
    t_u: usize,
    n: usize,
    rng: &mut StreamRng,
) -> HitBindSample {
    let in_b = |s: usize| b.contains(&s);
    let in_u = |s: usize| u.contains(&s);
    let (mut y, mut w) = (z, draw(mu.weights(), rng));
    let mut path = PathPair::start(y, w, d, n);
    let mut tau = None;
    let mut failed_trials = 0;
    let mut trial: Option<usize> = None;
    let mut earliest = 0;
    for t in 0..=n {
        if tau.is_none() {
            if in_u(y) && in_u(w) {
                tau = Some(t);
            } else {
                if trial.is_some_and(|s| t == s + t_u) {
                    failed_trials += 1;
                    trial = None;
                    earliest = t;
                }
                if trial.is_none() && t >= earliest && in_b(y) && in_b(w) {
                    trial = Some(t);
                }
            }
        }
        if t == n {
            break;
        }
        (y, w) = if tau.is_some() {
            ck.sample(y, w, rng)
        } else {
            (draw(k.row(y), rng), draw(k.row(w), rng))
        };
        path.push(y, w, d);
    }
    HitBindSample {
        path,
        tau,
        failed_trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_finite_kernel;

    fn setup() -> (FiniteKernel, CouplingKernelOnPairs, DistanceLike) {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let ck = CouplingKernelOnPairs::optimal(&k, &d).unwrap();
        (k, ck, d)
    }

    #[test]
    fn alpha_from_kernel_entries() {
        let (k, _, _) = setup();
        assert!((hit_then_bind_alpha(&k, &[0, 1], &[0], 1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn whole_space_couples_immediately() {
        let (k, ck, d) = setup();
        let s = hit_then_bind_coupling(
            &k,
            &ck,
            &d,
            &[0, 1],
            &[0, 1],
            1,
            &Measure::dirac(2, 0),
            1,
            10,
            3,
        )
        .unwrap();
        assert_eq!(s.tau, Some(0));
        assert_eq!(s.failed_trials, 0);
    }

    #[test]
    fn start_in_u_gives_zero() {
        let (k, ck, d) = setup();
        let s = hit_then_bind_coupling(
            &k,
            &ck,
            &d,
            &[0, 1],
            &[0],
            0,
            &Measure::dirac(2, 0),
            1,
            10,
            4,
        )
        .unwrap();
        assert_eq!(s.tau, Some(0));
    }

    #[test]
    fn unreachable_u() {
        let k = FiniteKernel::identity(2);
        let ck = CouplingKernelOnPairs::independent(&k);
        let d = DistanceLike::trivial(2);
        let r = hit_then_bind_coupling(&k, &ck, &d, &[1], &[0], 1, &Measure::dirac(2, 1), 3, 10, 1);
        assert_eq!(r, Err(CouplingError::UnreachableU));
    }
}
