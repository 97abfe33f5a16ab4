use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{CouplingError, Result};
use crate::harris::{contraction_check, HarrisError};
use crate::markov::transport::lift_cost;
use crate::markov::{CouplingPlan, DistanceLike, FiniteKernel, MarkovError, Measure};
use crate::rng::{stream, StreamRng};

/// For each ordered pair `(x, y)`, a joint law of the next pair whose
/// marginals are `P(x,·)` and `P(y,·)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingKernelOnPairs {
    n: usize,
    targets: Vec<Vec<u32>>,
    cum: Vec<Vec<f64>>,
}

impl CouplingKernelOnPairs {
    fn from_plans(n: usize, plans: Vec<CouplingPlan>) -> CouplingKernelOnPairs {
        let mut targets = Vec::with_capacity(n * n);
        let mut cum = Vec::with_capacity(n * n);
        for plan in plans {
            let mut t = Vec::new();
            let mut c = Vec::new();
            let mut acc = 0.0;
            for (a, b, m) in plan.support() {
                acc += m;
                t.push((a * n + b) as u32);
                c.push(acc);
            }
            targets.push(t);
            cum.push(c);
        }
        CouplingKernelOnPairs { n, targets, cum }
    }

    /// Pairs selected by `use_ot` get an optimal coupling for `cost`, the
    /// others the independent product. Diagonal pairs are coupled identically.
    pub fn build<C, S>(k: &FiniteKernel, cost: C, use_ot: S) -> Result<CouplingKernelOnPairs>
    where
        C: Fn(usize, usize) -> f64 + Sync,
        S: Fn(usize, usize) -> bool + Sync,
    {
        let n = k.n();
        let upper: Vec<(usize, usize)> = (0..n).flat_map(|x| (x..n).map(move |y| (x, y))).collect();
        let plans: Vec<CouplingPlan> = upper
            .par_iter()
            .map(|&(x, y)| {
                let (mu, nu) = (k.row_measure(x), k.row_measure(y));
                if x == y {
                    Ok(CouplingPlan::diagonal(&mu))
                } else if use_ot(x, y) {
                    Ok(lift_cost(&cost, &mu, &nu)?.1)
                } else {
                    Ok(CouplingPlan::product(&mu, &nu))
                }
            })
            .collect::<std::result::Result<_, MarkovError>>()?;
        let mut full: Vec<Option<CouplingPlan>> = vec![None; n * n];
        for (&(x, y), plan) in upper.iter().zip(plans) {
            if x != y {
                full[y * n + x] = Some(plan.transpose());
            }
            full[x * n + y] = Some(plan);
        }
        Ok(CouplingKernelOnPairs::from_plans(
            n,
            full.into_iter()
                .map(|p| p.expect("all pairs built"))
                .collect(),
        ))
    }

    /// Optimal coupling of every pair of rows for `d`.
    pub fn optimal(k: &FiniteKernel, d: &DistanceLike) -> Result<CouplingKernelOnPairs> {
        CouplingKernelOnPairs::build(k, |i, j| d.get(i, j), |_, _| true)
    }

    /// Independent product for distinct states, identical moves on the diagonal.
    pub fn independent(k: &FiniteKernel) -> CouplingKernelOnPairs {
        CouplingKernelOnPairs::build(k, |_, _| 0.0, |_, _| false)
            .expect("product plans cannot fail")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Joint law of the next pair from `(x, y)` as `((a, b), mass)`.
    pub fn plan(&self, x: usize, y: usize) -> Vec<((usize, usize), f64)> {
        let i = x * self.n + y;
        let mut prev = 0.0;
        self.targets[i]
            .iter()
            .zip(&self.cum[i])
            .map(|(&t, &c)| {
                let m = c - prev;
                prev = c;
                (((t as usize) / self.n, (t as usize) % self.n), m)
            })
            .collect()
    }

    pub fn sample(&self, x: usize, y: usize, rng: &mut StreamRng) -> (usize, usize) {
        let i = x * self.n + y;
        let cum = &self.cum[i];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        let t = self.targets[i][j] as usize;
        (t / self.n, t % self.n)
    }

    /// `(𝒯 d)(x, y)`: expected distance after one coupled step.
    pub fn expected_distance(&self, d: &DistanceLike, x: usize, y: usize) -> f64 {
        self.plan(x, y)
            .iter()
            .map(|&((a, b), m)| m * d.get(a, b))
            .sum()
    }

    /// Largest deviation of either marginal from the kernel rows, over all pairs.
    pub fn marginal_error(&self, k: &FiniteKernel) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                let (mut left, mut right) = (vec![0.0; n], vec![0.0; n]);
                for ((a, b), m) in self.plan(x, y) {
                    left[a] += m;
                    right[b] += m;
                }
                for z in 0..n {
                    worst = worst
                        .max((left[z] - k.get(x, z)).abs())
                        .max((right[z] - k.get(y, z)).abs());
                }
            }
        }
        worst
    }

    /// Law of the pair after one step from a law on pairs (indexed `x * n + y`).
    pub fn step_pairs(&self, dist: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; dist.len()];
        for (i, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut prev = 0.0;
            for (&t, &c) in self.targets[i].iter().zip(&self.cum[i]) {
                out[t as usize] += w * (c - prev);
                prev = c;
            }
        }
        out
    }
}

/// Optimal couplings where `d(x,y) < 1`, independent products elsewhere.
///
/// Requires `d` to contract under one step with a factor below `alpha_tilde`.
pub fn build_contracting_coupling_kernel(
    k: &FiniteKernel,
    d: &DistanceLike,
    alpha_tilde: f64,
) -> Result<CouplingKernelOnPairs> {
    if !(alpha_tilde > 0.0 && alpha_tilde < 1.0) {
        return Err(CouplingError::InvalidInput(format!(
            "alpha_tilde = {alpha_tilde} must lie in (0, 1)"
        )));
    }
    match contraction_check(k, d, 1) {
        Ok(c) if c.alpha < alpha_tilde => {}
        Ok(c) => {
            return Err(CouplingError::NotContracting(format!(
                "alpha = {} is not below {alpha_tilde}",
                c.alpha
            )))
        }
        Err(HarrisError::VacuouslyContracting) => {}
        Err(e) => return Err(CouplingError::NotContracting(e.to_string())),
    }
    CouplingKernelOnPairs::build(k, |i, j| d.get(i, j), |x, y| d.get(x, y) < 1.0)
}

/// Two coupled trajectories with per-step distances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathPair {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distances: Vec<f64>,
}

impl PathPair {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub(crate) fn start(x: usize, y: usize, d: &DistanceLike, n: usize) -> PathPair {
        let mut p = PathPair {
            left: Vec::with_capacity(n + 1),
            right: Vec::with_capacity(n + 1),
            distances: Vec::with_capacity(n + 1),
        };
        p.push(x, y, d);
        p
    }

    pub(crate) fn push(&mut self, x: usize, y: usize, d: &DistanceLike) {
        self.left.push(x);
        self.right.push(y);
        self.distances.push(d.get(x, y));
    }
}

pub(crate) fn run_coupled(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    n: usize,
    rng: &mut StreamRng,
) -> PathPair {
    let mut path = PathPair::start(x, y, d, n);
    let (mut a, mut b) = (x, y);
    for _ in 0..n {
        (a, b) = ck.sample(a, b, rng);
        path.push(a, b, d);
    }
    path
}

/// One `n`-step coupled path from `(x, y)`.
pub fn simulate_coupled(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    n: usize,
    seed: u64,
) -> PathPair {
    run_coupled(ck, d, x, y, n, &mut stream(seed, 0))
}

/// `m` independent coupled paths; path `i` uses stream `i`.
pub fn sample_coupled_paths(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    n: usize,
    m: usize,
    seed: u64,
) -> Vec<PathPair> {
    (0..m)
        .into_par_iter()
        .map(|i| run_coupled(ck, d, x, y, n, &mut stream(seed, i as u64)))
        .collect()
}

/// Empirical law of one coordinate at step `t` across paths.
pub fn empirical_marginal(paths: &[PathPair], t: usize, n: usize, left: bool) -> Vec<usize> {
    let mut counts = vec![0; n];
    for p in paths {
        counts[if left { p.left[t] } else { p.right[t] }] += 1;
    }
    counts
}

pub(crate) fn row_of(k: &FiniteKernel, x: usize, t: usize) -> Measure {
    k.power(t).row_measure(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_finite_kernel;

    fn two_state() -> FiniteKernel {
        make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn two_state_optimal_plan() {
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let ck = build_contracting_coupling_kernel(&two_state(), &d, 0.8).unwrap();
        let off: f64 = ck
            .plan(0, 1)
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|(_, m)| m)
            .sum();
        assert!((off - 0.7).abs() < 1e-12);
        assert!((ck.expected_distance(&d, 0, 1) - 0.35).abs() < 1e-12);
        assert!(ck.marginal_error(&two_state()) < 1e-12);
    }

    #[test]
    fn constant_kernel_couples_at_once() {
        let k = FiniteKernel::constant(&Measure::uniform(3));
        let d = DistanceLike::truncated_line(3, 4.0).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 0.5).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert!(ck.expected_distance(&d, x, y) < 1e-15);
            }
        }
        let p = simulate_coupled(&ck, &d, 0, 2, 20, 1);
        assert!(p.distances[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_start_stays_diagonal() {
        let d = DistanceLike::trivial(2);
        let ck = CouplingKernelOnPairs::independent(&two_state());
        let p = simulate_coupled(&ck, &d, 1, 1, 50, 3);
        assert!(p.distances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_contracting() {
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!(build_contracting_coupling_kernel(&FiniteKernel::identity(2), &d, 0.9).is_err());
        assert!(build_contracting_coupling_kernel(&two_state(), &d, 0.6).is_err());
    }
}
