use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::pair_kernel::row_of;
use super::{CouplingError, CouplingKernelOnPairs, Result};
use crate::markov::{lift_distance, DistanceLike, FiniteKernel};
use crate::rng::{stream, StreamRng};
use crate::stats::proportion;

const RATE_GRID: usize = 100;

/// Strictly decreasing positive rate `n ↦ ρ(n)` with `ρ(n) → 0`.
#[derive(Clone)]
pub struct RateFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RateFunction({})", self.label)
    }
}

impl RateFunction {
    /// Wrap a closure, checking positivity and strict decrease on `n = 0..=100`.
    pub fn new<F>(f: F, label: impl Into<String>) -> Result<RateFunction>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut prev = f64::INFINITY;
        for n in 0..=RATE_GRID {
            let v = f(n as f64);
            if !(v.is_finite() && v > 0.0) {
                return Err(CouplingError::InvalidRate(format!(
                    "rho({n}) = {v} is not positive"
                )));
            }
            if v >= prev {
                return Err(CouplingError::InvalidRate(format!(
                    "rho is not strictly decreasing at n = {n}"
                )));
            }
            prev = v;
        }
        Ok(RateFunction {
            f: Arc::new(f),
            label: label.into(),
        })
    }

    /// `ρ(n) = c q^n`.
    pub fn geometric(c: f64, q: f64) -> Result<RateFunction> {
        if !(c > 0.0 && c.is_finite() && q > 0.0 && q < 1.0) {
            return Err(CouplingError::InvalidRate(format!(
                "need c > 0 and 0 < q < 1, got c = {c}, q = {q}"
            )));
        }
        RateFunction::new(move |n| c * q.powf(n), format!("{c}*{q}^n"))
    }

    /// Parse the form `c*q^n`.
    pub fn parse(s: &str) -> Result<RateFunction> {
        let bad = || CouplingError::InvalidRate(format!("expected c*q^n, got {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (c, rest) = compact.split_once('*').ok_or_else(bad)?;
        let q = rest.strip_suffix("^n").ok_or_else(bad)?;
        RateFunction::geometric(c.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?)
    }

    pub fn eval(&self, n: f64) -> f64 {
        (self.f)(n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Excursion {
    Finite(usize),
    /// Stayed inside the envelope for the rest of the horizon.
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcursionTrace {
    /// Steps needed to reach `B` from `z0` before the first excursion.
    pub prefix: usize,
    pub lengths: Vec<Excursion>,
    /// Index of the first infinite excursion.
    pub n_star: Option<usize>,
    /// `prefix` plus the lengths of all excursions before `n_star`.
    pub t_star_total: Option<usize>,
    /// Ran out of excursions or horizon before an infinite one.
    pub exhausted: bool,
}

struct Walker<'a> {
    ck: &'a CouplingKernelOnPairs,
    d: &'a DistanceLike,
    in_b: &'a [bool],
    z: (usize, usize),
    used: usize,
    horizon: usize,
}

impl Walker<'_> {
    fn idx(&self) -> usize {
        self.z.0 * self.ck.n() + self.z.1
    }

    fn step(&mut self, rng: &mut StreamRng) -> bool {
        if self.used >= self.horizon {
            return false;
        }
        self.z = self.ck.sample(self.z.0, self.z.1, rng);
        self.used += 1;
        true
    }

    /// `σ_B`: steps until the pair is in `B`, counting from the current state.
    fn return_to_b(&mut self, rng: &mut StreamRng) -> Option<usize> {
        let mut s = 0;
        while !self.in_b[self.idx()] {
            if !self.step(rng) {
                return None;
            }
            s += 1;
        }
        Some(s)
    }

    /// `τ_ρ`: first `n >= 1` with `d(Z_n) >= ρ(n)`. `Ok(None)` means it never
    /// left before the horizon; `Err(())` is reserved for horizon trouble.
    fn leave_envelope(&mut self, rho: &RateFunction, rng: &mut StreamRng) -> Option<usize> {
        let mut n = 0;
        while self.step(rng) {
            n += 1;
            if self.d.get(self.z.0, self.z.1) >= rho.eval(n as f64) {
                return Some(n);
            }
        }
        None
    }
}

fn pair_mask(n: usize, b: &[(usize, usize)]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n * n];
    for &(x, y) in b {
        if x >= n || y >= n {
            return Err(CouplingError::InvalidInput(format!(
                "pair ({x}, {y}) out of range"
            )));
        }
        mask[x * n + y] = true;
    }
    if b.is_empty() {
        return Err(CouplingError::InvalidInput("B is empty".into()));
    }
    Ok(mask)
}

/// Assemble excursions from `B` under `ck`: an excursion ends when the pair
/// leaves the `ρ`-envelope and then returns to `B`; one that stays inside the
/// envelope until `horizon` total steps is recorded as infinite.
#[allow(clippy::too_many_arguments)]
pub fn excursion_chain(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[(usize, usize)],
    rho: &RateFunction,
    z0: (usize, usize),
    max_excursions: usize,
    horizon: usize,
    seed: u64,
) -> Result<ExcursionTrace> {
    let mask = pair_mask(ck.n(), b)?;
    Ok(run_excursions(
        ck,
        d,
        &mask,
        rho,
        z0,
        max_excursions,
        horizon,
        &mut stream(seed, 0),
    ))
}

/// `m` independent traces; trace `i` uses stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn excursion_traces(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[(usize, usize)],
    rho: &RateFunction,
    z0: (usize, usize),
    max_excursions: usize,
    horizon: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<ExcursionTrace>> {
    let mask = pair_mask(ck.n(), b)?;
    Ok((0..m)
        .into_par_iter()
        .map(|i| {
            run_excursions(
                ck,
                d,
                &mask,
                rho,
                z0,
                max_excursions,
                horizon,
                &mut stream(seed, i as u64),
            )
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_excursions(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    in_b: &[bool],
    rho: &RateFunction,
    z0: (usize, usize),
    max_excursions: usize,
    horizon: usize,
    rng: &mut StreamRng,
) -> ExcursionTrace {
    let mut w = Walker {
        ck,
        d,
        in_b,
        z: z0,
        used: 0,
        horizon,
    };
    let mut trace = ExcursionTrace {
        prefix: 0,
        lengths: Vec::new(),
        n_star: None,
        t_star_total: None,
        exhausted: true,
    };
    let Some(prefix) = w.return_to_b(rng) else {
        return trace;
    };
    trace.prefix = prefix;
    let mut total = prefix;
    while trace.lengths.len() < max_excursions {
        let Some(tau) = w.leave_envelope(rho, rng) else {
            trace.n_star = Some(trace.lengths.len());
            trace.t_star_total = Some(total);
            trace.lengths.push(Excursion::Infinite);
            trace.exhausted = false;
            break;
        };
        let Some(sigma) = w.return_to_b(rng) else {
            break;
        };
        trace.lengths.push(Excursion::Finite(tau + sigma));
        total += tau + sigma;
    }
    trace
}

/// `α = min_{z ∈ B} P_z(τ_ρ = ∞)`, by propagating the pair law and removing
/// mass that leaves the envelope. Off-diagonal mass dies once `ρ` drops below
/// the smallest positive distance, so the result is exact when that happens
/// before `horizon`.
pub fn excursion_alpha(
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    b: &[(usize, usize)],
    rho: &RateFunction,
    horizon: usize,
) -> Result<f64> {
    let n = ck.n();
    pair_mask(n, b)?;
    let dmin = (0..n * n)
        .filter(|&i| i / n != i % n)
        .map(|i| d.get(i / n, i % n))
        .fold(1.0, f64::min);
    let alpha = b
        .par_iter()
        .map(|&(x, y)| {
            let mut law = vec![0.0; n * n];
            law[x * n + y] = 1.0;
            for t in 1..=horizon {
                law = ck.step_pairs(&law);
                let r = rho.eval(t as f64);
                for (i, w) in law.iter_mut().enumerate() {
                    if d.get(i / n, i % n) >= r {
                        *w = 0.0;
                    }
                }
                if r < dmin {
                    break;
                }
            }
            law.iter().sum::<f64>()
        })
        .collect::<Vec<f64>>();
    Ok(alpha.into_iter().fold(1.0, f64::min))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBoundRow {
    pub n: usize,
    /// Exact `d₁(𝒫ⁿδ_x, 𝒫ⁿδ_y)`.
    pub lhs: f64,
    /// Empirical `P(t* > n/2)`.
    pub tail: f64,
    pub tail_se: f64,
    pub rho_half: f64,
    pub bound: f64,
    /// `(1 + Φ̂) ρ(n/2)`.
    pub phi_bound: f64,
    pub phi_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateBoundReport {
    pub rows: Vec<RateBoundRow>,
    /// Empirical mean of `1/ρ(t*)`, infinite if any trace has no finite `t*`.
    pub phi_hat: f64,
}

/// Check `d₁(𝒫ⁿδ_x, 𝒫ⁿδ_y) <= P(t* > n/2) + ρ(n/2) + 3 SE` on `n_grid`.
pub fn rate_bound_check(
    traces: &[ExcursionTrace],
    rho: &RateFunction,
    k: &FiniteKernel,
    d: &DistanceLike,
    z: (usize, usize),
    n_grid: &[usize],
) -> Result<RateBoundReport> {
    if traces.is_empty() {
        return Err(CouplingError::InvalidInput("no traces".into()));
    }
    let m = traces.len();
    let phi_hat = traces
        .iter()
        .map(|t| {
            t.t_star_total
                .map_or(f64::INFINITY, |s| 1.0 / rho.eval(s as f64))
        })
        .sum::<f64>()
        / m as f64;
    let lhs: Vec<f64> = n_grid
        .par_iter()
        .map(|&n| lift_distance(d, &row_of(k, z.0, n), &row_of(k, z.1, n)).map(|r| r.0))
        .collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for (&n, &lhs) in n_grid.iter().zip(&lhs) {
        let half = n as f64 / 2.0;
        let hits = traces
            .iter()
            .filter(|t| t.t_star_total.is_none_or(|s| s as f64 > half))
            .count();
        let (tail, tail_se) = proportion(hits, m);
        let rho_half = rho.eval(half);
        let bound = tail + rho_half;
        if lhs > bound + 3.0 * tail_se {
            return Err(CouplingError::BoundViolated {
                n,
                lhs,
                rhs: bound + 3.0 * tail_se,
            });
        }
        let phi_bound = (1.0 + phi_hat) * rho_half;
        rows.push(RateBoundRow {
            n,
            lhs,
            tail,
            tail_se,
            rho_half,
            bound,
            phi_bound,
            phi_holds: lhs <= phi_bound,
        });
    }
    Ok(RateBoundReport { rows, phi_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_contracting_coupling_kernel;
    use crate::markov::{make_finite_kernel, Measure};

    fn two_state() -> (FiniteKernel, DistanceLike, CouplingKernelOnPairs) {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 0.8).unwrap();
        (k, d, ck)
    }

    fn all_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect()
    }

    #[test]
    fn rate_parsing() {
        let r = RateFunction::parse("0.9 * 0.8^n").unwrap();
        assert!((r.eval(2.0) - 0.576).abs() < 1e-15);
        assert!(RateFunction::parse("0.9*1.2^n").is_err());
        assert!(RateFunction::parse("q^n").is_err());
        assert!(RateFunction::new(|_| 1.0, "flat").is_err());
    }

    #[test]
    fn two_state_alpha() {
        let (_, d, ck) = two_state();
        let rho = RateFunction::geometric(0.9, 0.8).unwrap();
        let a = excursion_alpha(&ck, &d, &all_pairs(2), &rho, 1000).unwrap();
        assert!((a - (1.0 - 0.7f64.powi(3))).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_first_excursion_infinite() {
        let k = FiniteKernel::constant(&Measure::uniform(3));
        let d = DistanceLike::trivial(3);
        let ck = CouplingKernelOnPairs::optimal(&k, &d).unwrap();
        let rho = RateFunction::geometric(0.5, 0.5).unwrap();
        let t = excursion_chain(&ck, &d, &all_pairs(3), &rho, (0, 1), 10, 50, 1).unwrap();
        assert_eq!(t.n_star, Some(0));
        assert_eq!(t.t_star_total, Some(0));
        assert_eq!(t.lengths, vec![Excursion::Infinite]);
    }

    #[test]
    fn prefix_when_start_outside_b() {
        let k = FiniteKernel::constant(&Measure::uniform(2));
        let d = DistanceLike::trivial(2);
        let ck = CouplingKernelOnPairs::optimal(&k, &d).unwrap();
        let rho = RateFunction::geometric(0.5, 0.5).unwrap();
        let t = excursion_chain(&ck, &d, &[(0, 0), (1, 1)], &rho, (0, 1), 10, 50, 1).unwrap();
        assert_eq!(t.prefix, 1);
        assert_eq!(t.t_star_total, Some(1));
    }

    #[test]
    fn identity_never_couples() {
        let k = FiniteKernel::identity(2);
        let d = DistanceLike::trivial(2);
        let ck = CouplingKernelOnPairs::independent(&k);
        let rho = RateFunction::geometric(0.9, 0.5).unwrap();
        let traces =
            excursion_traces(&ck, &d, &all_pairs(2), &rho, (0, 1), 20, 100, 10, 2).unwrap();
        assert!(traces.iter().all(|t| t.exhausted && t.n_star.is_none()));
        let r = rate_bound_check(&traces, &rho, &k, &d, (0, 1), &[2, 10]).unwrap();
        assert!(r.rows.iter().all(|row| row.tail == 1.0));
    }

    #[test]
    fn two_state_rate_bound() {
        let (k, d, ck) = two_state();
        let rho = RateFunction::geometric(0.9, 0.8).unwrap();
        let traces =
            excursion_traces(&ck, &d, &all_pairs(2), &rho, (0, 1), 100, 1000, 2000, 3).unwrap();
        let grid: Vec<usize> = (2..=40).collect();
        let r = rate_bound_check(&traces, &rho, &k, &d, (0, 1), &grid).unwrap();
        assert!((r.rows[0].lhs - 0.49 * 0.5).abs() < 1e-12);
    }
}
