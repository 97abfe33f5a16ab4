use super::measure::check_len;
use super::{MarkovError, Measure, Result, ROW_RENORM_TOL};

/// Row-stochastic matrix on `{0, .., n-1}`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    n: usize,
    p: Vec<f64>,
}

/// Validate a square array of transition probabilities.
///
/// Rows whose sum is off by less than `1e-9` are renormalised, larger
/// deviations are rejected.
pub fn make_finite_kernel(rows: &[Vec<f64>]) -> Result<FiniteKernel> {
    let n = rows.len();
    if n == 0 {
        return Err(MarkovError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let mut p = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(MarkovError::NotSquare {
                row: i,
                len: row.len(),
                n,
            });
        }
        p.extend_from_slice(row);
    }
    FiniteKernel::from_flat(n, p)
}

impl FiniteKernel {
    pub fn from_flat(n: usize, mut p: Vec<f64>) -> Result<FiniteKernel> {
        check_len(n * n, p.len())?;
        for i in 0..n {
            let row = &mut p[i * n..(i + 1) * n];
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MarkovError::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(MarkovError::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() >= ROW_RENORM_TOL {
                return Err(MarkovError::RowSumViolation { row: i, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(FiniteKernel { n, p })
    }

    /// Products of valid kernels: renormalise rounding only.
    fn from_product(n: usize, mut p: Vec<f64>) -> FiniteKernel {
        for row in p.chunks_mut(n) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
        }
        FiniteKernel { n, p }
    }

    pub fn identity(n: usize) -> FiniteKernel {
        let mut p = vec![0.0; n * n];
        (0..n).for_each(|i| p[i * n + i] = 1.0);
        FiniteKernel { n, p }
    }

    /// Every row equal to `mu`.
    pub fn constant(mu: &Measure) -> FiniteKernel {
        let n = mu.len();
        let p = (0..n).flat_map(|_| mu.weights().iter().copied()).collect();
        FiniteKernel { n, p }
    }

    /// Block-diagonal kernel; block `b` occupies consecutive states.
    pub fn block_diagonal(blocks: &[FiniteKernel]) -> FiniteKernel {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut p = vec![0.0; n * n];
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in 0..b.n {
                    p[(off + i) * n + off + j] = b.get(i, j);
                }
            }
            off += b.n;
        }
        FiniteKernel { n, p }
    }

    /// Reflected nearest-neighbour walk on `{0, .., n-1}` stepping down with
    /// probability `p_down` and up otherwise.
    pub fn reflected_walk(n: usize, p_down: f64) -> Result<FiniteKernel> {
        let mut p = vec![0.0; n * n];
        for x in 0..n {
            let down = if x == 0 { 0 } else { x - 1 };
            let up = if x + 1 == n { x } else { x + 1 };
            p[x * n + down] += p_down;
            p[x * n + up] += 1.0 - p_down;
        }
        FiniteKernel::from_flat(n, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.n..(x + 1) * self.n]
    }

    pub fn row_measure(&self, x: usize) -> Measure {
        Measure::normalised(self.row(x).to_vec())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.p.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Kernel of "first `self`, then `other`".
    pub fn compose(&self, other: &FiniteKernel) -> Result<FiniteKernel> {
        check_len(self.n, other.n)?;
        let n = self.n;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let out = &mut p[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    out.iter_mut()
                        .zip(other.row(k))
                        .for_each(|(o, &b)| *o += a * b);
                }
            }
        }
        Ok(FiniteKernel::from_product(n, p))
    }

    /// `t`-step kernel by repeated squaring.
    pub fn power(&self, t: usize) -> FiniteKernel {
        let mut result = FiniteKernel::identity(self.n);
        let mut base = self.clone();
        let mut e = t;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base).expect("same size");
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base).expect("same size");
            }
        }
        result
    }

    /// Row vector times kernel: the law after one step from `mu`.
    pub fn step(&self, mu: &Measure) -> Result<Measure> {
        Ok(Measure::normalised(self.step_signed(mu.weights())?))
    }

    /// Row vector times kernel for an arbitrary signed vector.
    pub fn step_signed(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        for (i, &a) in v.iter().enumerate() {
            if a != 0.0 {
                out.iter_mut()
                    .zip(self.row(i))
                    .for_each(|(o, &b)| *o += a * b);
            }
        }
        Ok(out)
    }

    /// Kernel applied to a function: `(P f)(x) = sum_y P(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, f.len())?;
        Ok((0..self.n)
            .map(|x| self.row(x).iter().zip(f).map(|(p, v)| p * v).sum())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_kernel_examples() {
        let id = make_finite_kernel(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(id, FiniteKernel::identity(2));
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert_eq!(k.get(1, 1), 0.8);
        assert!(matches!(
            make_finite_kernel(&[vec![0.5, 0.6], vec![0.2, 0.8]]),
            Err(MarkovError::RowSumViolation { row: 0, .. })
        ));
        assert!(matches!(
            make_finite_kernel(&[vec![1.1, -0.1], vec![0.2, 0.8]]),
            Err(MarkovError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn small_row_noise_is_renormalised() {
        let k = make_finite_kernel(&[vec![0.5, 0.5 + 1e-11], vec![0.2, 0.8]]).unwrap();
        let s: f64 = k.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_matches_two_state_closed_form() {
        // P^t = Pi + 0.7^t (I - Pi) with Pi rows (2/3, 1/3)
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let p5 = k.power(5);
        let l = 0.7f64.powi(5);
        assert!((p5.get(0, 0) - (2.0 / 3.0 + l / 3.0)).abs() < 1e-14);
        assert!((p5.get(1, 0) - (2.0 / 3.0 - 2.0 * l / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn reflected_walk_rows() {
        let k = FiniteKernel::reflected_walk(4, 0.7).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(k.row(0), &[0.7, 0.3, 0.0, 0.0]));
        assert!(close(k.row(3), &[0.0, 0.0, 0.7, 0.3]));
    }
}
