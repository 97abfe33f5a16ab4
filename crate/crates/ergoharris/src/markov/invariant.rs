use nalgebra::{DMatrix, DVector};

use super::{FiniteKernel, Measure};

/// A recurrent communicating class with its invariant probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicClass {
    pub states: Vec<usize>,
    pub measure: Measure,
}

/// One invariant measure per closed communicating class, ordered by the
/// smallest state of each class.
pub fn invariant_measures(k: &FiniteKernel) -> Vec<ErgodicClass> {
    let n = k.n();
    let comp = tarjan(k);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; ncomp];
    for x in 0..n {
        for y in 0..n {
            if k.get(x, y) > 0.0 && comp[x] != comp[y] {
                closed[comp[x]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for x in 0..n {
        classes[comp[x]].push(x);
    }
    let mut out: Vec<ErgodicClass> = classes
        .into_iter()
        .enumerate()
        .filter(|(c, _)| closed[*c])
        .map(|(_, states)| {
            let measure = class_measure(k, &states);
            ErgodicClass { states, measure }
        })
        .collect();
    out.sort_by_key(|c| c.states[0]);
    out
}

/// Solve `mu (P_C - I) = 0`, `sum mu = 1` on a closed class by LU.
fn class_measure(k: &FiniteKernel, states: &[usize]) -> Measure {
    let n = k.n();
    let m = states.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &x) in states.iter().enumerate() {
        for (j, &y) in states.iter().enumerate() {
            // row j of the transposed system
            a[(j, i)] = k.get(x, y) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..m {
        a[(m - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .expect("closed class gives a nonsingular system");
    let mut w = vec![0.0; n];
    for (i, &x) in states.iter().enumerate() {
        w[x] = sol[i].max(0.0);
    }
    Measure::normalised(w)
}

/// Strongly connected components of the transition graph (iterative Tarjan).
fn tarjan(k: &FiniteKernel) -> Vec<usize> {
    let n = k.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| k.get(x, y) > 0.0).collect())
        .collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(top) = call.last_mut() {
            let (v, pos) = *top;
            if index[v] == usize::MAX {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if pos < adj[v].len() {
                top.1 += 1;
                let w = adj[v][pos];
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_finite_kernel;

    #[test]
    fn two_state_measure() {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let cls = invariant_measures(&k);
        assert_eq!(cls.len(), 1);
        assert!((cls[0].measure.get(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((cls[0].measure.get(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_has_two_classes() {
        let cls = invariant_measures(&FiniteKernel::identity(2));
        assert_eq!(cls.len(), 2);
        assert_eq!(cls[0].measure, Measure::dirac(2, 0));
        assert_eq!(cls[1].measure, Measure::dirac(2, 1));
    }

    #[test]
    fn block_diagonal_classes() {
        let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let b = FiniteKernel::block_diagonal(&[k.clone(), k]);
        let cls = invariant_measures(&b);
        assert_eq!(cls.len(), 2);
        assert_eq!(cls[1].states, vec![2, 3]);
        assert!((cls[1].measure.get(2) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(cls[1].measure.get(0), 0.0);
    }

    #[test]
    fn transient_states_get_no_mass() {
        // 0 -> {0,1}, 1 absorbing, 2 -> 1
        let k = make_finite_kernel(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let cls = invariant_measures(&k);
        assert_eq!(cls.len(), 1);
        assert_eq!(cls[0].states, vec![1]);
    }
}
