use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::segment::{norm, SegView, Segment};
use super::{Result, SddeError};
use crate::rng::stream;

/// A functional of a segment, writing its value into the output slice.
pub type Functional = Arc<dyn Fn(&SegView<'_>, &mut [f64]) + Send + Sync>;

/// `dX = f(X_t) dt + g(X_t) dW` with `X ∈ ℝ^d`, `W ∈ ℝ^m`.
#[derive(Clone)]
pub struct SddeSystem {
    pub name: String,
    pub d: usize,
    pub m: usize,
    /// Drift, output length `d`.
    pub f: Functional,
    /// Diffusion, output `d × m` row-major.
    pub g: Functional,
    /// Right inverse of `g`, output `m × d` row-major.
    pub g_inv: Option<Functional>,
    /// Declared `K` in `2⟨f(x)−f(y), x(0)−y(0)⟩⁺ + |||g(x)−g(y)|||² ≤ K‖x−y‖²`.
    pub one_sided_k: f64,
}

impl fmt::Debug for SddeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SddeSystem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("has_inverse", &self.g_inv.is_some())
            .field("one_sided_k", &self.one_sided_k)
            .finish()
    }
}

fn scalar(f: impl Fn(&SegView<'_>) -> f64 + Send + Sync + 'static) -> Functional {
    Arc::new(move |x, out| out[0] = f(x))
}

impl SddeSystem {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        m: usize,
        f: Functional,
        g: Functional,
    ) -> SddeSystem {
        SddeSystem {
            name: name.into(),
            d,
            m,
            f,
            g,
            g_inv: None,
            one_sided_k: f64::INFINITY,
        }
    }

    pub fn with_inverse(mut self, g_inv: Functional) -> SddeSystem {
        self.g_inv = Some(g_inv);
        self
    }

    pub fn with_one_sided_k(mut self, k: f64) -> SddeSystem {
        self.one_sided_k = k;
        self
    }

    /// `f ≡ 0`, `g ≡ 0` in dimension `d`.
    pub fn zero(d: usize) -> SddeSystem {
        let zero: Functional = Arc::new(|_, out| out.fill(0.0));
        SddeSystem::new("zero", d, d, zero.clone(), zero).with_one_sided_k(0.0)
    }

    /// `dX = -c X(t) dt + σ dW`.
    pub fn linear(c: f64, sigma: f64) -> SddeSystem {
        let sys = SddeSystem::new(
            "linear",
            1,
            1,
            scalar(move |x| -c * x.now()[0]),
            scalar(move |_| sigma),
        )
        .with_one_sided_k((-2.0 * c).max(0.0));
        if sigma != 0.0 {
            sys.with_inverse(scalar(move |_| 1.0 / sigma))
        } else {
            sys
        }
    }

    /// `dX = -c X(t) dt + (a + b (1 + tanh X(t-r)) / 2) dW`, with `a > 0`, `b >= 0`.
    pub fn motivating(c: f64, a: f64, b: f64) -> Result<SddeSystem> {
        if !(a > 0.0 && b >= 0.0) {
            return Err(SddeError::InvalidInput(format!(
                "need a > 0 and b >= 0, got a = {a}, b = {b}"
            )));
        }
        let g = move |x: &SegView<'_>| a + b * (1.0 + x.oldest()[0].tanh()) / 2.0;
        Ok(SddeSystem::new(
            "motivating",
            1,
            1,
            scalar(move |x| -c * x.now()[0]),
            scalar(g),
        )
        .with_inverse(scalar(move |x| 1.0 / g(x)))
        .with_one_sided_k(b * b / 4.0 + (-2.0 * c).max(0.0)))
    }

    /// `dX = -(X(t)^3 + X(t)) dt + (a + b tanh X(t-r)) dW`, with `a > b >= 0`.
    pub fn cubic(a: f64, b: f64) -> Result<SddeSystem> {
        if !(b >= 0.0 && a > b) {
            return Err(SddeError::InvalidInput(format!(
                "need a > b >= 0, got a = {a}, b = {b}"
            )));
        }
        let g = move |x: &SegView<'_>| a + b * x.oldest()[0].tanh();
        Ok(SddeSystem::new(
            "cubic",
            1,
            1,
            scalar(|x| -x.now()[0].powi(3) - x.now()[0]),
            scalar(g),
        )
        .with_inverse(scalar(move |x| 1.0 / g(x)))
        .with_one_sided_k(b * b))
    }

    /// Builtin by name, with parameters looked up by key (defaults in brackets):
    /// `linear` (c = 1, sigma = 1), `motivating` (c = 1, a = 0.5, b = 1),
    /// `cubic` (a = 1, b = 0.5).
    pub fn builtin(name: &str, param: impl Fn(&str, f64) -> f64) -> Result<SddeSystem> {
        match name {
            "linear" => Ok(SddeSystem::linear(param("c", 1.0), param("sigma", 1.0))),
            "motivating" => {
                SddeSystem::motivating(param("c", 1.0), param("a", 0.5), param("b", 1.0))
            }
            "cubic" => SddeSystem::cubic(param("a", 1.0), param("b", 0.5)),
            other => Err(SddeError::InvalidInput(format!("unknown system {other:?}"))),
        }
    }

    pub(crate) fn inverse(&self) -> Result<&Functional> {
        self.g_inv.as_ref().ok_or(SddeError::MissingInverse)
    }

    pub(crate) fn check_dim(&self, eta: &Segment) -> Result<()> {
        if eta.dim() != self.d {
            return Err(SddeError::InvalidInput(format!(
                "segment has dimension {}, system {}",
                eta.dim(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Spot checks of the declared structure of a system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    /// Largest entry of `g g⁻¹ − I` over the probes, if an inverse is declared.
    pub inverse_error: Option<f64>,
    /// Largest observed `(2⟨Δf, Δx(0)⟩⁺ + |||Δg|||²) / ‖Δx‖²`.
    pub one_sided_max: f64,
    pub declared_k: f64,
    pub probes: usize,
    pub consistent: bool,
}

/// Evaluate the system on `probes` random segment pairs with grid `(r, h)`
/// and values uniform in `[-radius, radius]`.
pub fn audit_system(
    sys: &SddeSystem,
    r: f64,
    h: f64,
    probes: usize,
    radius: f64,
    seed: u64,
) -> Result<AuditReport> {
    let shape = Segment::constant(r, h, &vec![0.0; sys.d])?;
    let random_segment = |rng: &mut crate::rng::StreamRng| {
        let v = (0..shape.values().len())
            .map(|_| rng.random_range(-radius..=radius))
            .collect();
        Segment::new(r, h, sys.d, v)
    };
    let (d, m) = (sys.d, sys.m);
    let results: Vec<(f64, Option<f64>)> = (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = random_segment(&mut rng)?;
            let y = random_segment(&mut rng)?;
            let (mut fx, mut fy) = (vec![0.0; d], vec![0.0; d]);
            let (mut gx, mut gy) = (vec![0.0; d * m], vec![0.0; d * m]);
            (sys.f)(&x.view(), &mut fx);
            (sys.f)(&y.view(), &mut fy);
            (sys.g)(&x.view(), &mut gx);
            (sys.g)(&y.view(), &mut gy);
            let dx0: Vec<f64> = x.now().iter().zip(y.now()).map(|(a, b)| a - b).collect();
            let drift: f64 = fx
                .iter()
                .zip(&fy)
                .zip(&dx0)
                .map(|((a, b), z)| (a - b) * z)
                .sum();
            let diff: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
            let lhs = 2.0 * drift.max(0.0) + norm(&diff).powi(2);
            let gap = x.distance(&y)?;
            let ratio = if gap > 0.0 { lhs / (gap * gap) } else { 0.0 };
            let inv = match &sys.g_inv {
                Some(gi) => {
                    let mut ginv = vec![0.0; m * d];
                    gi(&x.view(), &mut ginv);
                    let mut worst: f64 = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            let e: f64 = (0..m).map(|k| gx[a * m + k] * ginv[k * d + b]).sum();
                            worst = worst.max((e - if a == b { 1.0 } else { 0.0 }).abs());
                        }
                    }
                    Some(worst)
                }
                None => None,
            };
            Ok((ratio, inv))
        })
        .collect::<Result<_>>()?;
    let one_sided_max = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let inverse_error = sys
        .g_inv
        .as_ref()
        .map(|_| results.iter().filter_map(|r| r.1).fold(0.0, f64::max));
    let consistent = one_sided_max <= sys.one_sided_k * (1.0 + 1e-12) + 1e-12
        && inverse_error.is_none_or(|e| e <= 1e-9);
    Ok(AuditReport {
        inverse_error,
        one_sided_max,
        declared_k: sys.one_sided_k,
        probes,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_pass_audit() {
        for sys in [
            SddeSystem::linear(1.0, 0.5),
            SddeSystem::motivating(1.0, 0.5, 1.0).unwrap(),
            SddeSystem::cubic(1.0, 0.5).unwrap(),
        ] {
            let a = audit_system(&sys, 1.0, 0.1, 2000, 3.0, 7).unwrap();
            assert!(a.consistent, "{}: {a:?}", sys.name);
            assert!(a.inverse_error.unwrap() <= 1e-12);
        }
    }

    #[test]
    fn understated_k_is_caught() {
        let sys = SddeSystem::cubic(1.0, 0.5).unwrap().with_one_sided_k(0.01);
        assert!(
            !audit_system(&sys, 1.0, 0.1, 2000, 3.0, 7)
                .unwrap()
                .consistent
        );
    }

    #[test]
    fn builtin_lookup() {
        let sys = SddeSystem::builtin("motivating", |_, v| v).unwrap();
        assert_eq!(sys.name, "motivating");
        assert!(SddeSystem::builtin("nope", |_, v| v).is_err());
        assert!(SddeSystem::cubic(0.5, 1.0).is_err());
    }
}
