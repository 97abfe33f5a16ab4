use super::measure::check_len;
use super::{MarkovError, Result};

const SYM_TOL: f64 = 1e-12;

/// Symmetric `[0,1]`-valued function vanishing exactly on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceLike {
    n: usize,
    v: Vec<f64>,
}

impl DistanceLike {
    pub fn new(rows: &[Vec<f64>]) -> Result<DistanceLike> {
        let (n, v) = square(rows)?;
        DistanceLike::from_flat(n, v)
    }

    pub fn from_flat(n: usize, mut v: Vec<f64>) -> Result<DistanceLike> {
        check_len(n * n, v.len())?;
        symmetrise(n, &mut v)?;
        for x in 0..n {
            for y in 0..n {
                let d = v[x * n + y];
                if x == y && d != 0.0 {
                    return Err(MarkovError::InvalidDistance(format!("d({x},{x}) = {d}")));
                }
                if x != y && d <= 0.0 {
                    return Err(MarkovError::InvalidDistance(format!(
                        "d({x},{y}) = {d} is not positive"
                    )));
                }
                if d > 1.0 {
                    return Err(MarkovError::InvalidDistance(format!(
                        "d({x},{y}) = {d} exceeds 1"
                    )));
                }
            }
        }
        Ok(DistanceLike { n, v })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<DistanceLike> {
        let v = (0..n * n).map(|i| f(i / n, i % n)).collect();
        DistanceLike::from_flat(n, v)
    }

    /// `d(x, y) = 1` for `x != y`.
    pub fn trivial(n: usize) -> DistanceLike {
        let v = (0..n * n)
            .map(|i| if i / n == i % n { 0.0 } else { 1.0 })
            .collect();
        DistanceLike { n, v }
    }

    /// `d(x, y) = 1 ∧ |x - y| / delta` on integer states.
    pub fn truncated_line(n: usize, delta: f64) -> Result<DistanceLike> {
        DistanceLike::from_fn(n, |x, y| (x.abs_diff(y) as f64 / delta).min(1.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.v[x * self.n + y]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.v.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Smallest `K` with `d(x,y) <= K (d(x,z) + d(z,y))` for all triples.
    pub fn weak_triangle_constant(&self) -> f64 {
        let n = self.n;
        let mut k: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let s = self.get(x, z) + self.get(z, y);
                    if s > 0.0 {
                        k = k.max(self.get(x, y) / s);
                    }
                }
            }
        }
        k
    }
}

/// Finite metric: symmetric, zero exactly on the diagonal, triangle inequality.
/// Unlike [`DistanceLike`] it is not capped at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    n: usize,
    v: Vec<f64>,
}

impl Metric {
    pub fn new(rows: &[Vec<f64>]) -> Result<Metric> {
        let (n, v) = square(rows)?;
        Metric::from_flat(n, v)
    }

    pub fn from_flat(n: usize, mut v: Vec<f64>) -> Result<Metric> {
        check_len(n * n, v.len())?;
        symmetrise(n, &mut v)?;
        for x in 0..n {
            for y in 0..n {
                let d = v[x * n + y];
                if !d.is_finite() || d < 0.0 || (x == y && d != 0.0) || (x != y && d == 0.0) {
                    return Err(MarkovError::InvalidDistance(format!("d({x},{y}) = {d}")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let lhs = v[x * n + y];
                    let rhs = v[x * n + z] + v[z * n + y];
                    if lhs > rhs * (1.0 + 1e-12) {
                        return Err(MarkovError::TriangleViolation { x, y, z, lhs, rhs });
                    }
                }
            }
        }
        Ok(Metric { n, v })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Metric> {
        let v = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Metric::from_flat(n, v)
    }

    /// `|x - y|` on integer states.
    pub fn line(n: usize) -> Metric {
        let v = (0..n * n).map(|i| (i / n).abs_diff(i % n) as f64).collect();
        Metric { n, v }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.v[x * self.n + y]
    }
}

impl TryFrom<&DistanceLike> for Metric {
    type Error = MarkovError;

    fn try_from(d: &DistanceLike) -> Result<Metric> {
        Metric::from_flat(d.n, d.v.clone())
    }
}

/// Distance between continuum states, e.g. delay-equation segments.
pub trait ContinuumDistance<S: ?Sized> {
    fn distance(&self, a: &S, b: &S) -> f64;
}

impl<S: ?Sized, F: Fn(&S, &S) -> f64> ContinuumDistance<S> for F {
    fn distance(&self, a: &S, b: &S) -> f64 {
        self(a, b)
    }
}

/// `√(d(x,y)(1 + βV(x) + βV(y)))`.
#[derive(Clone, Copy, Debug)]
pub struct WeightedDistance<'a> {
    pub d: &'a DistanceLike,
    pub v: &'a [f64],
    pub beta: f64,
}

impl WeightedDistance<'_> {
    pub fn eval(&self, x: usize, y: usize) -> f64 {
        (self.d.get(x, y) * (1.0 + self.beta * self.v[x] + self.beta * self.v[y])).sqrt()
    }
}

pub fn weighted_distance<'a>(d: &'a DistanceLike, v: &'a [f64], beta: f64) -> WeightedDistance<'a> {
    debug_assert!(beta > 0.0);
    WeightedDistance { d, v, beta }
}

fn square(rows: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let n = rows.len();
    let mut v = Vec::with_capacity(n * n);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(MarkovError::NotSquare {
                row: i,
                len: r.len(),
                n,
            });
        }
        v.extend_from_slice(r);
    }
    Ok((n, v))
}

fn symmetrise(n: usize, v: &mut [f64]) -> Result<()> {
    for x in 0..n {
        for y in x + 1..n {
            let (a, b) = (v[x * n + y], v[y * n + x]);
            if !a.is_finite() || !b.is_finite() {
                return Err(MarkovError::NonFinite { row: x, col: y });
            }
            if (a - b).abs() > SYM_TOL {
                return Err(MarkovError::InvalidDistance(format!(
                    "asymmetric at ({x},{y}): {a} vs {b}"
                )));
            }
            let m = 0.5 * (a + b);
            v[x * n + y] = m;
            v[y * n + x] = m;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_distance_examples() {
        let d = DistanceLike::trivial(2);
        let v = [0.0, 4.0];
        let w = weighted_distance(&d, &v, 1.0);
        assert_eq!(w.eval(0, 0), 0.0);
        assert!((w.eval(0, 1) - 5f64.sqrt()).abs() < 1e-15);
        let v0 = [0.0, 0.0];
        assert_eq!(weighted_distance(&d, &v0, 1.0).eval(0, 1), 1.0);
    }

    #[test]
    fn distance_validation() {
        assert!(DistanceLike::new(&[vec![0.0, 0.5], vec![0.4, 0.0]]).is_err());
        assert!(DistanceLike::new(&[vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(DistanceLike::new(&[vec![0.0, 1.5], vec![1.5, 0.0]]).is_err());
        assert!(DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).is_ok());
    }

    #[test]
    fn metric_rejects_triangle_failure() {
        let m = Metric::new(&[
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ]);
        assert!(matches!(m, Err(MarkovError::TriangleViolation { .. })));
        assert!(Metric::try_from(&DistanceLike::truncated_line(6, 2.0).unwrap()).is_ok());
    }
}
