use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::segment::{grid_ratio, Path, Segment};
use super::{Result, SddeError, SddeSystem};
use crate::rng::{stream, StreamRng};
use crate::stats::MeanSe;

/// Brownian increments over `steps` steps of size `dt` in `ℝ^m`, each the sum
/// of `substeps` finer increments. Paths drawn at `dt` with `substeps = 2` and
/// at `dt / 2` with `substeps = 1` from the same stream coincide.
pub fn brownian_increments(
    rng: &mut StreamRng,
    steps: usize,
    m: usize,
    dt: f64,
    substeps: usize,
) -> Vec<f64> {
    let substeps = substeps.max(1);
    let scale = (dt / substeps as f64).sqrt();
    let mut out = vec![0.0; steps * m];
    for step in out.chunks_mut(m) {
        for _ in 0..substeps {
            for w in step.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *w += scale * z;
            }
        }
    }
    out
}

pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    match grid_ratio(t_end, dt) {
        Some(n) if n > 0 => Ok(n),
        _ => Err(SddeError::InvalidGrid(format!(
            "dt = {dt} must divide T = {t_end} > 0"
        ))),
    }
}

/// Scratch buffers for one Euler–Maruyama step.
pub(crate) struct Stepper<'a> {
    sys: &'a SddeSystem,
    pub(crate) f: Vec<f64>,
    pub(crate) g: Vec<f64>,
    pub(crate) next: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(sys: &'a SddeSystem) -> Stepper<'a> {
        Stepper {
            sys,
            f: vec![0.0; sys.d],
            g: vec![0.0; sys.d * sys.m],
            next: vec![0.0; sys.d],
        }
    }

    /// Evaluate `f` and `g` at `X_{n dt}`.
    pub(crate) fn eval(&mut self, path: &Path, n: usize) {
        let v = path.view(n);
        (self.sys.f)(&v, &mut self.f);
        (self.sys.g)(&v, &mut self.g);
    }

    /// `next = X(n dt) + f dt + g dw (+ extra)` using the last `eval`.
    pub(crate) fn advance(
        &mut self,
        path: &Path,
        n: usize,
        dw: &[f64],
        dt: f64,
        extra: Option<&[f64]>,
    ) {
        let m = self.sys.m;
        let x = path.point(n);
        for i in 0..self.sys.d {
            let noise: f64 = self.g[i * m..(i + 1) * m]
                .iter()
                .zip(dw)
                .map(|(g, w)| g * w)
                .sum();
            self.next[i] = x[i] + self.f[i] * dt + noise;
            if let Some(e) = extra {
                self.next[i] += e[i];
            }
        }
    }

    pub(crate) fn commit(&self, path: &mut Path, step: usize) -> Result<()> {
        if self.next.iter().any(|v| !v.is_finite()) {
            return Err(SddeError::NonFinite { step });
        }
        path.push(&self.next);
        Ok(())
    }
}

/// Euler–Maruyama driven by the given increments (`steps × m`).
pub fn integrate_with_noise(sys: &SddeSystem, eta: &Segment, dt: f64, dw: &[f64]) -> Result<Path> {
    sys.check_dim(eta)?;
    let steps = dw.len() / sys.m.max(1);
    let mut path = Path::start(eta, dt, steps)?;
    let mut st = Stepper::new(sys);
    for n in 0..steps {
        st.eval(&path, n);
        st.advance(&path, n, &dw[n * sys.m..(n + 1) * sys.m], dt, None);
        st.commit(&mut path, n + 1)?;
    }
    Ok(path)
}

/// Euler–Maruyama path on `[0, T]` from `eta`.
pub fn integrate(sys: &SddeSystem, eta: &Segment, t_end: f64, dt: f64, seed: u64) -> Result<Path> {
    let steps = step_count(t_end, dt)?;
    let dw = brownian_increments(&mut stream(seed, 0), steps, sys.m, dt, 1);
    integrate_with_noise(sys, eta, dt, &dw)
}

/// The pair `(X, X̃)` with shared noise, where `X̃` also feels `λ(X − X̃) dt`.
///
/// The binding term is integrated exactly over each step:
/// `Z_{n+1} = e^{-λ dt}(Z_n + (f(X_n) − f(X̃_n)) dt) + (g(X_n) − g(X̃_n)) ΔW_n`
/// for `Z = X − X̃`. The added increment only depends on the state at step `n`.
pub fn integrate_pair_binding_with_noise(
    sys: &SddeSystem,
    lambda: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    dt: f64,
    dw: &[f64],
) -> Result<(Path, Path)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SddeError::InvalidInput(format!(
            "lambda = {lambda} must be finite and nonnegative"
        )));
    }
    sys.check_dim(eta)?;
    eta.check_compatible(eta_tilde)?;
    let steps = dw.len() / sys.m.max(1);
    let (mut x, mut y) = (
        Path::start(eta, dt, steps)?,
        Path::start(eta_tilde, dt, steps)?,
    );
    let (mut sx, mut sy) = (Stepper::new(sys), Stepper::new(sys));
    let pull = 1.0 - (-lambda * dt).exp();
    let mut bind = vec![0.0; sys.d];
    for n in 0..steps {
        let w = &dw[n * sys.m..(n + 1) * sys.m];
        sx.eval(&x, n);
        sy.eval(&y, n);
        let (xn, yn) = (x.point(n), y.point(n));
        for i in 0..sys.d {
            bind[i] = pull * ((xn[i] - yn[i]) + (sx.f[i] - sy.f[i]) * dt);
        }
        sx.advance(&x, n, w, dt, None);
        sy.advance(&y, n, w, dt, (lambda > 0.0).then_some(&bind[..]));
        sx.commit(&mut x, n + 1)?;
        sy.commit(&mut y, n + 1)?;
    }
    Ok((x, y))
}

pub fn integrate_pair_binding(
    sys: &SddeSystem,
    lambda: f64,
    eta: &Segment,
    eta_tilde: &Segment,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<(Path, Path)> {
    let steps = step_count(t_end, dt)?;
    let dw = brownian_increments(&mut stream(seed, 0), steps, sys.m, dt, 1);
    integrate_pair_binding_with_noise(sys, lambda, eta, eta_tilde, dt, &dw)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionRow {
    /// `E(sup_{t≤T} e^{γ₀t}‖Z_t‖)⁸ / ‖Z₀‖⁸`.
    pub ratio: f64,
    pub se: f64,
    /// Same over `[0, 2T]`.
    pub ratio_doubled: f64,
    pub se_doubled: f64,
    /// Mean and SE of the pathwise increase from `T` to `2T`.
    pub growth: f64,
    pub growth_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    pub pass: bool,
}

/// Eighth moment of the weighted supremum of `Z = X − X̃` under binding, per
/// initial pair. A pair passes when the moment is finite and does not grow
/// beyond 3 SE when the horizon doubles.
#[allow(clippy::too_many_arguments)]
pub fn contraction_moment_test(
    sys: &SddeSystem,
    lambda: f64,
    gamma0: f64,
    pairs: &[(Segment, Segment)],
    t_end: f64,
    dt: f64,
    m_samples: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let steps = step_count(t_end, dt)?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (p, (eta, eta_tilde)) in pairs.iter().enumerate() {
        let z0 = eta.distance(eta_tilde)?;
        if z0 == 0.0 {
            rows.push(ContractionRow {
                ratio: 0.0,
                se: 0.0,
                ratio_doubled: 0.0,
                se_doubled: 0.0,
                growth: 0.0,
                growth_se: 0.0,
                pass: true,
            });
            continue;
        }
        let pair_seed = crate::rng::derive_seed(seed, p as u64);
        let sups: Vec<(f64, f64)> = (0..m_samples)
            .into_par_iter()
            .map(|i| {
                let dw =
                    brownian_increments(&mut stream(pair_seed, i as u64), 2 * steps, sys.m, dt, 1);
                let (x, y) =
                    integrate_pair_binding_with_noise(sys, lambda, eta, eta_tilde, dt, &dw)?;
                let mut s = (0.0, 0.0);
                for n in 0..=2 * steps {
                    let v = (gamma0 * x.time(n)).exp() * x.segment_distance(&y, n) / z0;
                    if n <= steps {
                        s.0 = f64::max(s.0, v);
                    }
                    s.1 = f64::max(s.1, v);
                }
                Ok((s.0.powi(8), s.1.powi(8)))
            })
            .collect::<Result<_>>()?;
        let a = MeanSe::of(&sups.iter().map(|s| s.0).collect::<Vec<_>>());
        let b = MeanSe::of(&sups.iter().map(|s| s.1).collect::<Vec<_>>());
        let g = MeanSe::of(&sups.iter().map(|s| s.1 - s.0).collect::<Vec<_>>());
        let pass = a.mean.is_finite() && b.mean.is_finite() && g.mean <= 3.0 * g.se;
        rows.push(ContractionRow {
            ratio: a.mean,
            se: a.se,
            ratio_doubled: b.mean,
            se_doubled: b.se,
            growth: g.mean,
            growth_se: g.se,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ContractionReport { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(r: f64, h: f64, v: f64) -> Segment {
        Segment::constant(r, h, &[v]).unwrap()
    }

    #[test]
    fn zero_system_is_constant() {
        let eta = Segment::from_fn(1.0, 0.1, 1, |s| vec![s + 3.0]).unwrap();
        let p = integrate(&SddeSystem::zero(1), &eta, 1.0, 0.01, 1).unwrap();
        assert!((0..=p.steps()).all(|n| p.point(n) == [3.0]));
    }

    #[test]
    fn decay_ode() {
        let p = integrate(
            &SddeSystem::linear(1.0, 0.0),
            &point(0.0, 0.1, 1.0),
            1.0,
            1e-3,
            1,
        )
        .unwrap();
        assert!((p.terminal()[0] - (-1f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn substeps_match_finer_grid() {
        let a = brownian_increments(&mut stream(5, 0), 4, 2, 0.2, 2);
        let b = brownian_increments(&mut stream(5, 0), 8, 2, 0.1, 1);
        for s in 0..4 {
            for c in 0..2 {
                assert!((a[s * 2 + c] - (b[4 * s + c] + b[4 * s + 2 + c])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn blow_up_reported() {
        let sys = SddeSystem::linear(-1e5, 0.0);
        let r = integrate(&sys, &point(0.0, 0.1, 1.0), 10.0, 0.1, 1);
        assert!(matches!(r, Err(SddeError::NonFinite { .. })));
    }

    #[test]
    fn binding_linear_oracle() {
        let sys = SddeSystem::linear(1.0, 0.5);
        let (x, y) = integrate_pair_binding(
            &sys,
            9.0,
            &point(0.0, 1e-4, 1.0),
            &point(0.0, 1e-4, 0.0),
            1.0,
            1e-4,
            3,
        )
        .unwrap();
        for n in (0..=x.steps()).step_by(100) {
            let z = x.point(n)[0] - y.point(n)[0];
            assert!((z - (-10.0 * x.time(n)).exp()).abs() < 10.0 * 1e-4);
        }
        let z1 = x.terminal()[0] - y.terminal()[0];
        assert!(((z1 - (-10f64).exp()) / (-10f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn shared_noise_without_binding() {
        let sys = SddeSystem::cubic(1.0, 0.5).unwrap();
        let eta = point(1.0, 0.1, 0.7);
        let (x, y) = integrate_pair_binding(&sys, 0.0, &eta, &eta, 2.0, 0.01, 4).unwrap();
        assert_eq!(x, y);
        let (_, y2) =
            integrate_pair_binding(&sys, 0.0, &eta, &point(1.0, 0.1, -0.2), 2.0, 0.01, 4).unwrap();
        let direct = integrate(&sys, &point(1.0, 0.1, -0.2), 2.0, 0.01, 4).unwrap();
        assert_eq!(y2, direct);
    }

    #[test]
    fn contraction_moment_linear() {
        let sys = SddeSystem::linear(1.0, 0.5);
        let pairs = vec![
            (point(0.0, 0.01, 1.0), point(0.0, 0.01, 0.0)),
            (point(0.0, 0.01, 0.5), point(0.0, 0.01, 0.5)),
        ];
        let r = contraction_moment_test(&sys, 9.0, 1.0, &pairs, 1.0, 0.01, 20, 1).unwrap();
        assert!(r.pass);
        assert!((r.rows[0].ratio - 1.0).abs() < 1e-12);
        assert_eq!(r.rows[1].ratio, 0.0);
        // with a delay the segment norm keeps the initial gap for r time units
        let delayed = vec![(point(0.5, 0.01, 1.0), point(0.5, 0.01, 0.0))];
        let r = contraction_moment_test(&sys, 9.0, 1.0, &delayed, 1.0, 0.01, 5, 1).unwrap();
        assert!((r.rows[0].ratio - (8.0f64 * 0.5).exp()).abs() < 1e-9 * (8.0f64 * 0.5).exp());
    }
}
