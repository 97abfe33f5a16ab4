use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::integrate::{
    brownian_increments, integrate_pair_binding_with_noise, integrate_with_noise, step_count,
};
use super::segment::Segment;
use super::{Result, SddeError, SddeSystem};
use crate::rng::{derive_seed, stream};
use crate::stats::{clopper_pearson_lower, proportion, MeanSe};

/// Confidence level of the lower bounds reported by the probes.
pub const PROBE_CONFIDENCE: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvolutionRow {
    pub lambda: f64,
    /// `E sup|Y|^p / sup|h|^p`.
    pub ratio: f64,
    pub se: f64,
    /// Sample variance of `Y(T)` and its SE.
    pub var_end: f64,
    pub var_end_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub rows: Vec<ConvolutionRow>,
    pub h_sup_p: f64,
    /// `h ≡ 0`: every ratio is reported as 0.
    pub degenerate: bool,
    /// Each consecutive drop exceeds 3 SE of the paired difference.
    pub decreasing: bool,
    pub pass: bool,
}

/// `dY = -λY dt + h(t) dW`, `Y(0) = 0`, on `[0, T]` for each `λ`, all driven by
/// the same normals. Each step is the exact OU transition with `h` frozen at
/// the left point.
pub fn stochastic_convolution_test(
    lambda_grid: &[f64],
    h: &(dyn Fn(f64) -> f64 + Sync),
    p: f64,
    t_end: f64,
    dt: f64,
    m_samples: usize,
    seed: u64,
) -> Result<ConvolutionReport> {
    if p.is_nan() || p <= 2.0 {
        return Err(SddeError::InvalidInput(format!("p = {p} must exceed 2")));
    }
    if lambda_grid.is_empty()
        || lambda_grid.windows(2).any(|w| w[1] <= w[0])
        || lambda_grid[0] < 0.0
    {
        return Err(SddeError::InvalidInput(
            "lambda grid must be nonnegative and increasing".into(),
        ));
    }
    let steps = step_count(t_end, dt)?;
    let hs: Vec<f64> = (0..steps).map(|n| h(n as f64 * dt)).collect();
    let h_sup_p = hs.iter().map(|v| v.abs()).fold(0.0, f64::max).powf(p);
    let coeffs: Vec<(f64, f64)> = lambda_grid
        .iter()
        .map(|&l| {
            let decay = (-l * dt).exp();
            let sd = if l > 0.0 {
                ((1.0 - (-2.0 * l * dt).exp()) / (2.0 * l)).sqrt()
            } else {
                dt.sqrt()
            };
            (decay, sd)
        })
        .collect();
    let k = lambda_grid.len();
    let samples: Vec<Vec<(f64, f64)>> = (0..m_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut y = vec![0.0; k];
            let mut sup = vec![0.0f64; k];
            for &hn in &hs {
                let xi: f64 = StandardNormal.sample(&mut rng);
                for (j, &(decay, sd)) in coeffs.iter().enumerate() {
                    y[j] = decay * y[j] + hn * sd * xi;
                    sup[j] = sup[j].max(y[j].abs());
                }
            }
            sup.iter()
                .zip(&y)
                .map(|(s, &end)| (s.powf(p), end))
                .collect()
        })
        .collect();
    let degenerate = h_sup_p == 0.0;
    let scale = if degenerate { 0.0 } else { 1.0 / h_sup_p };
    let rows: Vec<ConvolutionRow> = (0..k)
        .map(|j| {
            let sup = MeanSe::of(&samples.iter().map(|s| s[j].0 * scale).collect::<Vec<_>>());
            let ends: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
            let end = MeanSe::of(&ends);
            ConvolutionRow {
                lambda: lambda_grid[j],
                ratio: sup.mean,
                se: sup.se,
                var_end: end.var,
                var_end_se: crate::stats::variance_se(&ends),
            }
        })
        .collect();
    let decreasing = !degenerate
        && (0..k.saturating_sub(1)).all(|j| {
            let diff = MeanSe::of(
                &samples
                    .iter()
                    .map(|s| (s[j].0 - s[j + 1].0) * scale)
                    .collect::<Vec<_>>(),
            );
            diff.mean > 3.0 * diff.se
        });
    Ok(ConvolutionReport {
        rows,
        h_sup_p,
        degenerate,
        decreasing,
        pass: degenerate || decreasing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupportReport {
    pub hits: usize,
    pub samples: usize,
    pub fraction: f64,
    pub se: f64,
    /// One-sided Clopper–Pearson lower bound at 99%.
    pub lower: f64,
    /// No hits, so the lower bound is 0 and says nothing.
    pub inconclusive: bool,
}

/// Fraction of solutions from `eta` whose segment at `t_star` lies in the
/// centred ball of radius `delta`.
#[allow(clippy::too_many_arguments)]
pub fn support_probe(
    sys: &SddeSystem,
    eta: &Segment,
    t_star: f64,
    delta: f64,
    dt: f64,
    m_samples: usize,
    seed: u64,
) -> Result<SupportReport> {
    if t_star + 1e-12 < 2.0 * eta.r() {
        return Err(SddeError::InvalidInput(format!(
            "t_star = {t_star} must be at least 2r = {}",
            2.0 * eta.r()
        )));
    }
    let steps = step_count(t_star, dt)?;
    let inside: Vec<bool> = (0..m_samples)
        .into_par_iter()
        .map(|i| {
            let dw = brownian_increments(&mut stream(seed, i as u64), steps, sys.m, dt, 1);
            let path = integrate_with_noise(sys, eta, dt, &dw)?;
            Ok(path.view(steps).sup_norm() <= delta)
        })
        .collect::<Result<_>>()?;
    let hits = inside.iter().filter(|&&b| b).count();
    let (fraction, se) = proportion(hits, m_samples);
    Ok(SupportReport {
        hits,
        samples: m_samples,
        fraction,
        se,
        lower: clopper_pearson_lower(hits, m_samples, PROBE_CONFIDENCE),
        inconclusive: hits == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AprioriRow {
    pub pair: usize,
    pub t: f64,
    /// `E‖X_t − X̃_t‖⁴ / ‖X₀ − X̃₀‖⁴`.
    pub ratio: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AprioriReport {
    pub kappa: f64,
    pub kappa_se: f64,
    /// Same statistic at `dt / 2` on the same Brownian paths.
    pub kappa_halved: f64,
    pub kappa_halved_se: f64,
    pub rows: Vec<AprioriRow>,
    pub stable: bool,
    pub pass: bool,
}

/// Smallest `κ` with `E‖X_t − X̃_t‖⁴ <= e^{κ(1+t)²}‖X₀ − X̃₀‖⁴` on a grid of
/// `grid_points` times in `(0, T]`, for shared-noise pairs, at `dt` and `dt/2`.
#[allow(clippy::too_many_arguments)]
pub fn apriori_separation_test(
    sys: &SddeSystem,
    pairs: &[(Segment, Segment)],
    t_end: f64,
    dt: f64,
    grid_points: usize,
    m_samples: usize,
    seed: u64,
) -> Result<AprioriReport> {
    let (coarse, rows) = apriori_kappa(sys, pairs, t_end, dt, 2, grid_points, m_samples, seed)?;
    let (fine, _) = apriori_kappa(sys, pairs, t_end, dt / 2.0, 1, grid_points, m_samples, seed)?;
    let tol = 3.0 * coarse.1.hypot(fine.1);
    let stable = (coarse.0 - fine.0).abs() <= tol + 1e-12;
    Ok(AprioriReport {
        kappa: coarse.0,
        kappa_se: coarse.1,
        kappa_halved: fine.0,
        kappa_halved_se: fine.1,
        rows,
        stable,
        pass: coarse.0.is_finite() && fine.0.is_finite() && stable,
    })
}

#[allow(clippy::too_many_arguments)]
fn apriori_kappa(
    sys: &SddeSystem,
    pairs: &[(Segment, Segment)],
    t_end: f64,
    dt: f64,
    substeps: usize,
    grid_points: usize,
    m_samples: usize,
    seed: u64,
) -> Result<((f64, f64), Vec<AprioriRow>)> {
    let steps = step_count(t_end, dt)?;
    let grid_points = grid_points.clamp(1, steps);
    let grid: Vec<usize> = (1..=grid_points).map(|k| k * steps / grid_points).collect();
    let mut rows = Vec::new();
    let mut best = (0.0, 0.0);
    for (p, (eta, eta_tilde)) in pairs.iter().enumerate() {
        let z0 = eta.distance(eta_tilde)?;
        if z0 == 0.0 {
            rows.extend(grid.iter().map(|&n| AprioriRow {
                pair: p,
                t: n as f64 * dt,
                ratio: 0.0,
                se: 0.0,
            }));
            continue;
        }
        let pair_seed = derive_seed(seed, p as u64);
        let samples: Vec<Vec<f64>> = (0..m_samples)
            .into_par_iter()
            .map(|i| {
                let dw = brownian_increments(
                    &mut stream(pair_seed, i as u64),
                    steps,
                    sys.m,
                    dt,
                    substeps,
                );
                let (x, y) = integrate_pair_binding_with_noise(sys, 0.0, eta, eta_tilde, dt, &dw)?;
                Ok(grid
                    .iter()
                    .map(|&n| (x.segment_distance(&y, n) / z0).powi(4))
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (g, &n) in grid.iter().enumerate() {
            let s = MeanSe::of(&samples.iter().map(|v| v[g]).collect::<Vec<_>>());
            let t = n as f64 * dt;
            rows.push(AprioriRow {
                pair: p,
                t,
                ratio: s.mean,
                se: s.se,
            });
            let w = (1.0 + t).powi(2);
            let kappa = s.mean.ln() / w;
            if kappa > best.0 {
                best = (kappa, s.se / s.mean / w);
            }
        }
    }
    Ok((best, rows))
}

/// Constant initial segments at `0`, `±R e_i` and `±R/2 e_i`.
pub fn default_probes(d: usize, r: f64, h: f64, radius: f64) -> Result<Vec<Segment>> {
    let mut out = vec![Segment::constant(r, h, &vec![0.0; d])?];
    for i in 0..d {
        for s in [radius, -radius, radius / 2.0, -radius / 2.0] {
            let mut x = vec![0.0; d];
            x[i] = s;
            out.push(Segment::constant(r, h, &x)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DSmallReport {
    pub probes: Vec<SupportReport>,
    /// Smallest lower confidence bound over the probes.
    pub p_hat: f64,
    /// `1 − p̂²/2`.
    pub bound: f64,
}

/// Upper bound on the lifted `1 ∧ ‖·‖/δ` distance between transition laws from
/// the probe segments, via independent coupling and the `δ/4` ball.
#[allow(clippy::too_many_arguments)]
pub fn sdde_dsmall_estimate(
    sys: &SddeSystem,
    probes: &[Segment],
    delta: f64,
    t: f64,
    dt: f64,
    m_samples: usize,
    seed: u64,
) -> Result<DSmallReport> {
    if probes.is_empty() {
        return Err(SddeError::InvalidInput("empty probe set".into()));
    }
    let reports = probes
        .iter()
        .enumerate()
        .map(|(i, eta)| {
            support_probe(
                sys,
                eta,
                t,
                delta / 4.0,
                dt,
                m_samples,
                derive_seed(seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let p_hat = reports.iter().map(|r| r.lower).fold(1.0, f64::min);
    if p_hat == 0.0 {
        return Err(SddeError::Inconclusive(
            "some probe never reached the ball".into(),
        ));
    }
    Ok(DSmallReport {
        probes: reports,
        p_hat,
        bound: 1.0 - p_hat * p_hat / 2.0,
    })
}
