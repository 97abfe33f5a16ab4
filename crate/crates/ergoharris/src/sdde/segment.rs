use serde::Serialize;

use super::{Result, SddeError};

const GRID_TOL: f64 = 1e-9;

/// Number of `step`s in `span`, if `span` is an integer multiple of `step`.
pub(crate) fn grid_ratio(span: f64, step: f64) -> Option<usize> {
    if !(step > 0.0 && span >= 0.0 && span.is_finite()) {
        return None;
    }
    let k = (span / step).round();
    ((k * step - span).abs() <= GRID_TOL * span.max(step)).then_some(k as usize)
}

/// History of a `d`-dimensional path on `[-r, 0]`, sampled every `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    r: f64,
    h: f64,
    d: usize,
    /// `r/h + 1` points, oldest first, each of length `d`.
    values: Vec<f64>,
}

impl Segment {
    pub fn new(r: f64, h: f64, d: usize, values: Vec<f64>) -> Result<Segment> {
        let k = grid_ratio(r, h)
            .ok_or_else(|| SddeError::InvalidGrid(format!("h = {h} must divide r = {r}")))?;
        if d == 0 || values.len() != (k + 1) * d {
            return Err(SddeError::InvalidInput(format!(
                "segment needs {} values for r/h = {k} and d = {d}, got {}",
                (k + 1) * d,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SddeError::InvalidInput(format!(
                "segment value {i} is not finite"
            )));
        }
        Ok(Segment { r, h, d, values })
    }

    pub fn constant(r: f64, h: f64, point: &[f64]) -> Result<Segment> {
        let k = grid_ratio(r, h)
            .ok_or_else(|| SddeError::InvalidGrid(format!("h = {h} must divide r = {r}")))?;
        Segment::new(r, h, point.len(), point.repeat(k + 1))
    }

    /// Sample `f(s)` at `s = -r, -r + h, ..., 0`.
    pub fn from_fn(r: f64, h: f64, d: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Segment> {
        let k = grid_ratio(r, h)
            .ok_or_else(|| SddeError::InvalidGrid(format!("h = {h} must divide r = {r}")))?;
        let values = (0..=k).flat_map(|j| f(-r + j as f64 * h)).collect();
        Segment::new(r, h, d, values)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Point `j`, with `j = 0` at `s = -r` and `j = len - 1` at `s = 0`.
    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn now(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    /// Largest Euclidean norm over the grid points.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks(self.d).map(norm).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Segment) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .chunks(self.d)
            .zip(other.values.chunks(self.d))
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_compatible(&self, other: &Segment) -> Result<()> {
        if self.d != other.d
            || self.values.len() != other.values.len()
            || (self.h - other.h).abs() > GRID_TOL * self.h
        {
            return Err(SddeError::InvalidInput(
                "segments live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn view(&self) -> SegView<'_> {
        SegView {
            buf: &self.values,
            d: self.d,
            stride: 1,
            len: self.len(),
            end: self.len() - 1,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Borrowed segment `X_t` inside a path buffer.
#[derive(Clone, Copy, Debug)]
pub struct SegView<'a> {
    buf: &'a [f64],
    d: usize,
    stride: usize,
    len: usize,
    end: usize,
}

impl<'a> SegView<'a> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Point `j`, oldest first.
    pub fn point(&self, j: usize) -> &'a [f64] {
        let i = self.end - (self.len - 1 - j) * self.stride;
        &self.buf[i * self.d..(i + 1) * self.d]
    }

    /// `x(0)`.
    pub fn now(&self) -> &'a [f64] {
        self.point(self.len - 1)
    }

    /// `x(-r)`.
    pub fn oldest(&self) -> &'a [f64] {
        self.point(0)
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len)
            .map(|j| norm(self.point(j)))
            .fold(0.0, f64::max)
    }
}

/// A path on the `dt` grid covering `[-r, T]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Path {
    dt: f64,
    d: usize,
    /// `h / dt`.
    stride: usize,
    /// Points per segment.
    seg_len: usize,
    /// Buffer index of `t = 0`.
    offset: usize,
    h: f64,
    values: Vec<f64>,
}

impl Path {
    /// History filled from `eta` by linear interpolation between its grid points.
    pub(crate) fn start(eta: &Segment, dt: f64, steps: usize) -> Result<Path> {
        let stride = grid_ratio(eta.h, dt).filter(|&s| s >= 1).ok_or_else(|| {
            SddeError::InvalidGrid(format!("dt = {dt} must divide h = {}", eta.h))
        })?;
        let d = eta.d;
        let seg_len = eta.len();
        let offset = (seg_len - 1) * stride;
        let mut values = Vec::with_capacity((offset + steps + 1) * d);
        for k in 0..=offset {
            let (j, rem) = (k / stride, k % stride);
            if rem == 0 {
                values.extend_from_slice(eta.point(j));
            } else {
                let w = rem as f64 / stride as f64;
                let (a, b) = (eta.point(j), eta.point(j + 1));
                values.extend(a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y));
            }
        }
        Ok(Path {
            dt,
            d,
            stride,
            seg_len,
            offset,
            h: eta.h,
            values,
        })
    }

    pub(crate) fn push(&mut self, x: &[f64]) {
        self.values.extend_from_slice(x);
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of time steps after `t = 0`.
    pub fn steps(&self) -> usize {
        self.values.len() / self.d - self.offset - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// `X(n dt)`.
    pub fn point(&self, n: usize) -> &[f64] {
        let i = self.offset + n;
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn terminal(&self) -> &[f64] {
        self.point(self.steps())
    }

    /// `X_t` at `t = n dt`.
    pub fn view(&self, n: usize) -> SegView<'_> {
        SegView {
            buf: &self.values,
            d: self.d,
            stride: self.stride,
            len: self.seg_len,
            end: self.offset + n,
        }
    }

    pub fn segment(&self, n: usize) -> Segment {
        let v = self.view(n);
        let values = (0..v.len).flat_map(|j| v.point(j).to_vec()).collect();
        Segment {
            r: (self.seg_len - 1) as f64 * self.h,
            h: self.h,
            d: self.d,
            values,
        }
    }

    /// `‖X_t − Y_t‖` at `t = n dt`.
    pub fn segment_distance(&self, other: &Path, n: usize) -> f64 {
        let (a, b) = (self.view(n), other.view(n));
        (0..a.len)
            .map(|j| dist(a.point(j), b.point(j)))
            .fold(0.0, f64::max)
    }

    /// `|X(t) − Y(t)|` at `t = n dt`.
    pub fn distance_at(&self, other: &Path, n: usize) -> f64 {
        dist(self.point(n), other.point(n))
    }

    /// Buffer of one coordinate over `t >= 0`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        (0..=self.steps()).map(|n| self.point(n)[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_checks() {
        assert_eq!(grid_ratio(1.0, 0.1), Some(10));
        assert_eq!(grid_ratio(1.0, 0.3), None);
        assert_eq!(grid_ratio(0.0, 0.1), Some(0));
        assert!(Segment::constant(1.0, 0.3, &[0.0]).is_err());
    }

    #[test]
    fn segment_norms() {
        let s = Segment::from_fn(1.0, 0.5, 2, |t| vec![t, 1.0]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.now(), &[0.0, 1.0]);
        assert!((s.sup_norm() - 2f64.sqrt()).abs() < 1e-15);
        let z = Segment::constant(1.0, 0.5, &[0.0, 1.0]).unwrap();
        assert!((s.distance(&z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn history_interpolates() {
        let s = Segment::from_fn(1.0, 0.5, 1, |t| vec![t]).unwrap();
        let p = Path::start(&s, 0.25, 0).unwrap();
        let v = p.view(0);
        assert_eq!(v.len(), 3);
        assert_eq!(v.oldest(), &[-1.0]);
        assert_eq!(p.values, vec![-1.0, -0.75, -0.5, -0.25, 0.0]);
        assert_eq!(p.segment(0), s);
    }
}
