use serde::Serialize;

use super::pair_kernel::sample_coupled_paths;
use super::{CouplingError, CouplingKernelOnPairs, PathPair, Result};
use crate::markov::{invariant_measures, DistanceLike, FiniteKernel};
use crate::stats::proportion;

/// Fraction of paths with `d(X_k, Y_k) <= eps` for all `N <= k < len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerdictRow {
    pub eps: f64,
    pub n: usize,
    pub fraction: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticVerdict {
    pub table: Vec<VerdictRow>,
    /// Fraction at the tightest `eps` whose last two `N` agree within one SE.
    pub estimate: f64,
    pub se: f64,
    pub eps: f64,
    pub n: usize,
    pub stabilized: bool,
}

/// Estimate the mass of the asymptotic diagonal from finite paths.
pub fn asymptotic_verdict(
    samples: &[PathPair],
    eps_schedule: &[f64],
    n_schedule: &[usize],
) -> Result<AsymptoticVerdict> {
    if samples.is_empty() || eps_schedule.is_empty() {
        return Err(CouplingError::InvalidInput(
            "need samples and an eps schedule".into(),
        ));
    }
    let len = samples.iter().map(|p| p.len()).min().unwrap_or(0);
    let mut ns: Vec<usize> = n_schedule.iter().copied().filter(|&n| n < len).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() {
        return Err(CouplingError::HorizonTooShort { len });
    }
    let mut eps: Vec<f64> = eps_schedule.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let m = samples.len();
    let mut table = Vec::with_capacity(eps.len() * ns.len());
    for &e in &eps {
        for &n in &ns {
            let hits = samples
                .iter()
                .filter(|p| p.distances[n..len].iter().all(|&v| v <= e))
                .count();
            let (fraction, se) = proportion(hits, m);
            table.push(VerdictRow {
                eps: e,
                n,
                fraction,
                se,
            });
        }
    }
    let per_eps = ns.len();
    let stable = |i: usize| {
        let rows = &table[i * per_eps..(i + 1) * per_eps];
        if rows.len() < 2 {
            return true;
        }
        let (a, b) = (rows[rows.len() - 2], rows[rows.len() - 1]);
        (a.fraction - b.fraction).abs() <= a.se.max(b.se)
    };
    let pick = (0..eps.len()).rev().find(|&i| stable(i));
    let (i, stabilized) = match pick {
        Some(i) => (i, true),
        None => (eps.len() - 1, false),
    };
    let row = table[(i + 1) * per_eps - 1];
    Ok(AsymptoticVerdict {
        estimate: row.fraction,
        se: row.se,
        eps: row.eps,
        n: row.n,
        stabilized,
        table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    /// Several invariant measures but the starting pair does not separate them.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub invariant_count: usize,
    pub distinct_classes: bool,
    pub asymptotic: AsymptoticVerdict,
    pub verdict: Verdict,
}

/// Compare the exact number of invariant measures with the empirical mass of
/// asymptotically coupled paths from `(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_cross_check(
    k: &FiniteKernel,
    ck: &CouplingKernelOnPairs,
    d: &DistanceLike,
    x: usize,
    y: usize,
    n: usize,
    m_samples: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    if n < 4 {
        return Err(CouplingError::HorizonTooShort { len: n + 1 });
    }
    let classes = invariant_measures(k);
    let class_of = |s: usize| classes.iter().position(|c| c.states.contains(&s));
    let distinct_classes = matches!((class_of(x), class_of(y)), (Some(a), Some(b)) if a != b);
    let nn = d.n();
    let dmin = (0..nn * nn)
        .filter(|&i| i / nn != i % nn)
        .map(|i| d.get(i / nn, i % nn))
        .fold(1.0, f64::min);
    let eps_schedule = [0.5, 0.25, 0.5 * dmin];
    let n_schedule = [n / 4, n / 2, 3 * n / 4];
    let samples = sample_coupled_paths(ck, d, x, y, n, m_samples, seed);
    let asymptotic = asymptotic_verdict(&samples, &eps_schedule, &n_schedule)?;
    let count = classes.len();
    let verdict = if count == 1 {
        if asymptotic.estimate > 0.0 {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    } else if distinct_classes {
        if asymptotic.estimate <= 3.0 * asymptotic.se {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    } else {
        Verdict::Inconclusive
    };
    Ok(UniquenessReport {
        invariant_count: count,
        distinct_classes,
        asymptotic,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_contracting_coupling_kernel;
    use crate::markov::make_finite_kernel;

    fn path(d: &[f64]) -> PathPair {
        PathPair {
            left: vec![0; d.len()],
            right: vec![0; d.len()],
            distances: d.to_vec(),
        }
    }

    #[test]
    fn identical_paths_are_coupled() {
        let s = vec![path(&[0.0; 10]); 5];
        let v = asymptotic_verdict(&s, &[0.1], &[2, 5]).unwrap();
        assert_eq!(v.estimate, 1.0);
        assert!(v.stabilized);
    }

    #[test]
    fn separated_paths_are_not() {
        let s = vec![path(&[1.0; 10]); 5];
        assert_eq!(asymptotic_verdict(&s, &[0.5], &[2]).unwrap().estimate, 0.0);
        assert!(matches!(
            asymptotic_verdict(&s, &[0.5], &[20]),
            Err(CouplingError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn identity_kernel_is_consistent() {
        let k = FiniteKernel::identity(2);
        let d = DistanceLike::trivial(2);
        let ck = CouplingKernelOnPairs::independent(&k);
        let r = uniqueness_cross_check(&k, &ck, &d, 0, 1, 40, 100, 1).unwrap();
        assert_eq!(r.invariant_count, 2);
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn two_state_is_consistent() {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 0.8).unwrap();
        let r = uniqueness_cross_check(&k, &ck, &d, 0, 1, 100, 500, 2).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.asymptotic.estimate > 0.9);
    }
}
