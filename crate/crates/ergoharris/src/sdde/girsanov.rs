use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::integrate::{brownian_increments, step_count, Stepper};
use super::segment::{norm, Path, Segment};
use super::{Result, SddeError, SddeSystem};
use crate::rng::{stream, StreamRng};

/// Proposals allowed when sampling the residual coordinate.
pub const RESIDUAL_ATTEMPT_CAP: usize = 1_000_000;

/// Stopping time on the `dt` grid. A time past the horizon stands for `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StopTime {
    pub index: Option<usize>,
    /// `index · dt`, or `T + dt` when the time was not reached.
    pub time: f64,
}

impl StopTime {
    pub fn is_sentinel(&self) -> bool {
        self.index.is_none()
    }
}

/// Shift path `v` (one `m`-vector per step) with the running left-point
/// integral `∫₀^{t_n} |v|²` (length `steps + 1`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftPath {
    pub v: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub dt: f64,
}

impl ShiftPath {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// `v(t) = λ g(X̃_t)⁻¹ (X(t) − X̃(t))` along a pair of paths.
pub fn girsanov_shift(
    sys: &SddeSystem,
    lambda: f64,
    x: &Path,
    x_tilde: &Path,
) -> Result<ShiftPath> {
    let inv = sys.inverse()?;
    if x.steps() != x_tilde.steps() || x.dim() != sys.d {
        return Err(SddeError::InvalidInput("paths do not match".into()));
    }
    let (d, m, dt) = (sys.d, sys.m, x.dt());
    let steps = x.steps();
    let mut ginv = vec![0.0; m * d];
    let mut v = vec![0.0; steps * m];
    let mut cumulative = Vec::with_capacity(steps + 1);
    cumulative.push(0.0);
    for n in 0..steps {
        inv(&x_tilde.view(n), &mut ginv);
        let (a, b) = (x.point(n), x_tilde.point(n));
        let vn = &mut v[n * m..(n + 1) * m];
        for (k, out) in vn.iter_mut().enumerate() {
            *out = lambda * (0..d).map(|i| ginv[k * d + i] * (a[i] - b[i])).sum::<f64>();
        }
        cumulative.push(cumulative[n] + norm(vn).powi(2) * dt);
    }
    Ok(ShiftPath { v, cumulative, dt })
}

/// First grid time with `∫₀ᵗ |v|² >= gap² / eps` and a positive integral.
pub fn shift_stopping_time(cumulative: &[f64], dt: f64, eps: f64, gap: f64) -> Result<StopTime> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(SddeError::InvalidInput(format!(
            "eps = {eps} must be positive"
        )));
    }
    let threshold = gap * gap / eps;
    let steps = cumulative.len().saturating_sub(1);
    Ok(
        match cumulative.iter().position(|&c| c > 0.0 && c >= threshold) {
            Some(n) => StopTime {
                index: Some(n),
                time: n as f64 * dt,
            },
            None => StopTime {
                index: None,
                time: (steps + 1) as f64 * dt,
            },
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Accepted with the shift active on the whole horizon.
    BoundForever,
    /// Accepted, but the shift budget ran out before the horizon.
    ShiftExhausted,
    /// Rejected: the second coordinate comes from the residual law.
    IndependentResidual,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledPathSample {
    pub x: Path,
    /// Second coordinate: a solution from `η̃`.
    pub x_tilde: Path,
    /// Truncated shift used to build the bound branch, zero from `tau` on.
    pub v: Vec<f64>,
    pub tau: StopTime,
    pub regime: Regime,
    /// `log 𝒟` of the shifted noise against Wiener measure.
    pub log_density: f64,
    pub residual_attempts: usize,
}

/// Terminal values and labels of one coupling draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub regime: Regime,
    pub tau: StopTime,
    pub log_density: f64,
    pub x_end: Vec<f64>,
    pub x_tilde_end: Vec<f64>,
    pub residual_attempts: usize,
}

struct Bound {
    x: Path,
    y: Path,
    v: Vec<f64>,
    tau: StopTime,
    log_density: f64,
}

/// Build the bound pair from driving increments. With `inverse = false` the
/// increments drive `X` and `X̃` sees them shifted by `ṽ dt`; with
/// `inverse = true` they drive `X̃` and `X` sees them shifted back.
#[allow(clippy::too_many_arguments)]
fn bound_pair(
    sys: &SddeSystem,
    lambda: f64,
    threshold: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    dt: f64,
    dw: &[f64],
    inverse: bool,
) -> Result<Bound> {
    let inv = sys.inverse()?;
    let (d, m) = (sys.d, sys.m);
    let steps = dw.len() / m;
    let (mut x, mut y) = (
        Path::start(eta, dt, steps)?,
        Path::start(eta_tilde, dt, steps)?,
    );
    let (mut sx, mut sy) = (Stepper::new(sys), Stepper::new(sys));
    let pull = (1.0 - (-lambda * dt).exp()) / dt;
    let mut ginv = vec![0.0; m * d];
    let mut bind = vec![0.0; d];
    let mut v = vec![0.0; steps * m];
    let (mut wx, mut wy) = (vec![0.0; m], vec![0.0; m]);
    let mut cum = 0.0;
    let mut tau = None;
    let mut log_density = 0.0;
    for n in 0..steps {
        if tau.is_none() && cum > 0.0 && cum >= threshold {
            tau = Some(n);
        }
        sx.eval(&x, n);
        sy.eval(&y, n);
        let vn = &mut v[n * m..(n + 1) * m];
        if tau.is_none() && lambda > 0.0 {
            let (xn, yn) = (x.point(n), y.point(n));
            for i in 0..d {
                bind[i] = pull * ((xn[i] - yn[i]) + (sx.f[i] - sy.f[i]) * dt);
            }
            inv(&y.view(n), &mut ginv);
            for (k, out) in vn.iter_mut().enumerate() {
                *out = (0..d).map(|i| ginv[k * d + i] * bind[i]).sum();
            }
        }
        let w = &dw[n * m..(n + 1) * m];
        for k in 0..m {
            if inverse {
                wy[k] = w[k];
                wx[k] = w[k] - vn[k] * dt;
            } else {
                wx[k] = w[k];
                wy[k] = w[k] + vn[k] * dt;
            }
        }
        let v2 = norm(vn).powi(2);
        log_density += vn.iter().zip(&wy).map(|(a, b)| a * b).sum::<f64>() - 0.5 * v2 * dt;
        cum += v2 * dt;
        sx.advance(&x, n, &wx, dt, None);
        sy.advance(&y, n, &wy, dt, None);
        sx.commit(&mut x, n + 1)?;
        sy.commit(&mut y, n + 1)?;
    }
    let tau = match tau {
        Some(n) => StopTime {
            index: Some(n),
            time: n as f64 * dt,
        },
        None => StopTime {
            index: None,
            time: (steps + 1) as f64 * dt,
        },
    };
    Ok(Bound {
        x,
        y,
        v,
        tau,
        log_density,
    })
}

#[allow(clippy::too_many_arguments)]
fn sample_with(
    sys: &SddeSystem,
    lambda: f64,
    threshold: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    steps: usize,
    dt: f64,
    rng: &mut StreamRng,
) -> Result<CoupledPathSample> {
    let dw = brownian_increments(rng, steps, sys.m, dt, 1);
    let b = bound_pair(sys, lambda, threshold, eta, eta_tilde, dt, &dw, false)?;
    let u: f64 = rng.random();
    if u < (-b.log_density).exp() {
        let regime = if b.tau.is_sentinel() {
            Regime::BoundForever
        } else {
            Regime::ShiftExhausted
        };
        return Ok(CoupledPathSample {
            x: b.x,
            x_tilde: b.y,
            v: b.v,
            tau: b.tau,
            regime,
            log_density: b.log_density,
            residual_attempts: 0,
        });
    }
    for attempt in 1..=RESIDUAL_ATTEMPT_CAP {
        let w2 = brownian_increments(rng, steps, sys.m, dt, 1);
        let r = bound_pair(sys, lambda, threshold, eta, eta_tilde, dt, &w2, true)?;
        let u: f64 = rng.random();
        if u < 1.0 - r.log_density.exp() {
            return Ok(CoupledPathSample {
                x: b.x,
                x_tilde: r.y,
                v: b.v,
                tau: b.tau,
                regime: Regime::IndependentResidual,
                log_density: b.log_density,
                residual_attempts: attempt,
            });
        }
    }
    Err(SddeError::ResidualSamplingStuck {
        attempts: RESIDUAL_ATTEMPT_CAP,
    })
}

fn prepare(
    sys: &SddeSystem,
    eps: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    lambda: f64,
) -> Result<f64> {
    sys.inverse()?;
    sys.check_dim(eta)?;
    if !(eps > 0.0 && lambda >= 0.0) {
        return Err(SddeError::InvalidInput(format!(
            "need eps > 0 and lambda >= 0, got {eps}, {lambda}"
        )));
    }
    let gap = eta.distance(eta_tilde)?;
    if gap * gap > eps {
        return Err(SddeError::PreconditionViolated {
            gap2: gap * gap,
            eps,
        });
    }
    Ok(gap * gap / eps)
}

/// One draw from the coupling of the solutions from `eta` and `eta_tilde`:
/// the bound pair is kept with probability `1 ∧ 1/𝒟`, otherwise the second
/// coordinate is redrawn from the residual law by rejection.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_coupling_sample(
    sys: &SddeSystem,
    lambda: f64,
    eps: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<CoupledPathSample> {
    let threshold = prepare(sys, eps, eta, eta_tilde, lambda)?;
    let steps = step_count(t_end, dt)?;
    sample_with(
        sys,
        lambda,
        threshold,
        eta,
        eta_tilde,
        steps,
        dt,
        &mut stream(seed, 0),
    )
}

/// `m` independent draws reduced to terminal values; draw `i` uses stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_coupling_batch(
    sys: &SddeSystem,
    lambda: f64,
    eps: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    t_end: f64,
    dt: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<CouplingSummary>> {
    let threshold = prepare(sys, eps, eta, eta_tilde, lambda)?;
    let steps = step_count(t_end, dt)?;
    (0..m)
        .into_par_iter()
        .map(|i| {
            let s = sample_with(
                sys,
                lambda,
                threshold,
                eta,
                eta_tilde,
                steps,
                dt,
                &mut stream(seed, i as u64),
            )?;
            Ok(CouplingSummary {
                regime: s.regime,
                tau: s.tau,
                log_density: s.log_density,
                x_end: s.x.terminal().to_vec(),
                x_tilde_end: s.x_tilde.terminal().to_vec(),
                residual_attempts: s.residual_attempts,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdde::integrate_pair_binding;
    use crate::stats::normal_cdf;

    fn point(v: f64, h: f64) -> Segment {
        Segment::constant(0.0, h, &[v]).unwrap()
    }

    #[test]
    fn shift_integrals_linear() {
        let sys = SddeSystem::linear(1.0, 0.5);
        let dt = 1e-4;
        let (x, y) =
            integrate_pair_binding(&sys, 9.0, &point(1.0, dt), &point(0.0, dt), 2.0, dt, 1)
                .unwrap();
        let s = girsanov_shift(&sys, 9.0, &x, &y).unwrap();
        assert!((s.v[0] - 18.0).abs() < 1e-12);
        assert!((s.total() / 16.2 - 1.0).abs() < 5e-3);
        let tau = shift_stopping_time(&s.cumulative, dt, 0.1, 1.0).unwrap();
        let exact = -(1.0 - 10.0 / 16.2f64).ln() / 20.0;
        assert!((tau.time - exact).abs() < 2.0 * dt);
        let never = shift_stopping_time(&s.cumulative, dt, 0.05, 1.0).unwrap();
        assert!(never.is_sentinel());
        assert!((never.time - (2.0 + dt)).abs() < 1e-12);
    }

    #[test]
    fn equal_starts_stay_bound() {
        let sys = SddeSystem::motivating(1.0, 0.5, 1.0).unwrap();
        let eta = Segment::constant(1.0, 0.1, &[0.3]).unwrap();
        for seed in 0..20 {
            let s = girsanov_coupling_sample(&sys, 5.0, 0.1, &eta, &eta, 1.0, 0.01, seed).unwrap();
            assert_eq!(s.regime, Regime::BoundForever);
            assert_eq!(s.log_density, 0.0);
            assert_eq!(s.x, s.x_tilde);
        }
    }

    #[test]
    fn gap_precondition() {
        let sys = SddeSystem::linear(1.0, 0.5);
        let r = girsanov_coupling_sample(
            &sys,
            9.0,
            0.01,
            &point(1.0, 0.01),
            &point(0.0, 0.01),
            1.0,
            0.01,
            1,
        );
        assert!(matches!(r, Err(SddeError::PreconditionViolated { .. })));
        let no_inverse = SddeSystem::linear(1.0, 0.0);
        let r = girsanov_coupling_sample(
            &no_inverse,
            9.0,
            1.0,
            &point(0.1, 0.01),
            &point(0.0, 0.01),
            1.0,
            0.01,
            1,
        );
        assert_eq!(r.unwrap_err(), SddeError::MissingInverse);
    }

    #[test]
    fn rejection_rate_matches_lognormal_oracle() {
        // deterministic shift: P(reject) = TV = 2Φ(√I / 2) − 1
        let sys = SddeSystem::linear(1.0, 0.5);
        let dt = 1e-3;
        let (gap, eps) = (0.1, 0.05);
        let b = girsanov_coupling_batch(
            &sys,
            9.0,
            eps,
            &point(gap, dt),
            &point(0.0, dt),
            1.0,
            dt,
            4000,
            9,
        )
        .unwrap();
        assert!(b.iter().all(|s| s.regime != Regime::ShiftExhausted));
        let rejected = b
            .iter()
            .filter(|s| s.regime == Regime::IndependentResidual)
            .count() as f64
            / b.len() as f64;
        let (x, y) =
            integrate_pair_binding(&sys, 9.0, &point(gap, dt), &point(0.0, dt), 1.0, dt, 0)
                .unwrap();
        let i = girsanov_shift(&sys, 9.0, &x, &y).unwrap().total();
        let tv = 2.0 * normal_cdf(i.sqrt() / 2.0) - 1.0;
        let se = (tv * (1.0 - tv) / b.len() as f64).sqrt();
        assert!((rejected - tv).abs() < 4.0 * se, "{rejected} vs {tv}");
    }
}
