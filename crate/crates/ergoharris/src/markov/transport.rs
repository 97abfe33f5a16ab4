//! Exact optimal transport by the primal network simplex method.
//!
//! The solver works on the bipartite network restricted to the supports of the
//! two marginals, with one artificial root node. Costs are scaled to `[0, 1]`
//! internally; all reported values are in the caller's units. A dual solution
//! is recovered from the final tree potentials and repaired by a c-transform,
//! so `value - dual_value` is a certified optimality gap.

use super::measure::check_len;
use super::{DistanceLike, MarkovError, Measure, Metric, Result, SUM_TOL};

/// Largest admissible primal-dual gap, relative to the largest cost.
pub const DUAL_GAP_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-13;
const ART_COST: f64 = 2.0;

/// Output of [`solve_transport`].
#[derive(Clone, Debug)]
pub struct Transport {
    pub rows: usize,
    pub cols: usize,
    /// Dense `rows × cols` plan, row-major.
    pub plan: Vec<f64>,
    pub value: f64,
    /// Kantorovich dual value `Σ a_i u_i + Σ b_j v_j` with `u_i + v_j <= c_ij`.
    pub dual_value: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// Minimise `Σ c(i,j) π(i,j)` over plans with row sums `supply` and column sums
/// `demand`. The demand is rescaled to the supply's total, so the two totals
/// only need to agree up to rounding.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<Transport> {
    for (name, w) in [("supply", supply), ("demand", demand)] {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MarkovError::InvalidMeasure(format!(
                "{name} has a negative or non-finite entry"
            )));
        }
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if total_s <= 0.0 || total_d <= 0.0 {
        return Err(MarkovError::InvalidMeasure(
            "marginals must carry positive mass".into(),
        ));
    }
    let rows_idx: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0.0).collect();
    let cols_idx: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0.0).collect();
    let (ns, nd) = (rows_idx.len(), cols_idx.len());
    let a: Vec<f64> = rows_idx.iter().map(|&i| supply[i]).collect();
    let scale_d = total_s / total_d;
    let b: Vec<f64> = cols_idx.iter().map(|&j| demand[j] * scale_d).collect();

    let mut raw = Vec::with_capacity(ns * nd);
    for &i in &rows_idx {
        for &j in &cols_idx {
            let c = cost(i, j);
            if !c.is_finite() || c < 0.0 {
                return Err(MarkovError::InvalidDistance(format!("cost({i},{j}) = {c}")));
            }
            raw.push(c);
        }
    }
    let cmax = raw.iter().copied().fold(0.0, f64::max);
    let scale = if cmax > 0.0 { cmax } else { 1.0 };
    let norm: Vec<f64> = raw.iter().map(|c| c / scale).collect();

    let mut net = Network::new(ns, nd, &norm, &a, &b);
    net.run()?;

    let (rows, cols) = (supply.len(), demand.len());
    let mut plan = vec![0.0; rows * cols];
    let mut value = 0.0;
    for r in 0..ns {
        for c in 0..nd {
            let f = net.flow[r * nd + c];
            if f > 0.0 {
                plan[rows_idx[r] * cols + cols_idx[c]] = f;
                value += f * raw[r * nd + c];
            }
        }
    }

    // Dual: u_r = -π_r, then v = c-transform of u, then u = c-transform of v.
    let mut u_s: Vec<f64> = (0..ns).map(|r| -net.pi[r] * scale).collect();
    let v_s: Vec<f64> = (0..nd)
        .map(|c| {
            (0..ns)
                .map(|r| raw[r * nd + c] - u_s[r])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    for r in 0..ns {
        u_s[r] = (0..nd)
            .map(|c| raw[r * nd + c] - v_s[c])
            .fold(f64::INFINITY, f64::min);
    }
    let dual_value: f64 = a.iter().zip(&u_s).map(|(x, y)| x * y).sum::<f64>()
        + b.iter().zip(&v_s).map(|(x, y)| x * y).sum::<f64>();

    // Potentials on the full index sets.
    let v: Vec<f64> = (0..cols)
        .map(|j| {
            rows_idx
                .iter()
                .enumerate()
                .map(|(r, &i)| cost(i, j) - u_s[r])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // Over every column, so the pair of two massless indices stays feasible.
    let u: Vec<f64> = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| cost(i, j) - v[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    if value - dual_value > DUAL_GAP_TOL * scale.max(1.0)
        || dual_value - value > DUAL_GAP_TOL * scale.max(1.0)
    {
        return Err(MarkovError::SolverNonconvergence(format!(
            "primal {value} and dual {dual_value} disagree after {} pivots",
            net.pivots
        )));
    }
    Ok(Transport {
        rows,
        cols,
        plan,
        value,
        dual_value,
        u,
        v,
        pivots: net.pivots,
    })
}

struct Network<'a> {
    ns: usize,
    nd: usize,
    c: &'a [f64],
    flow: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    next_arc: usize,
    block: usize,
    pivots: usize,
    adj_start: Vec<usize>,
    adj: Vec<usize>,
    queue: Vec<usize>,
}

impl<'a> Network<'a> {
    fn new(ns: usize, nd: usize, c: &'a [f64], a: &[f64], b: &[f64]) -> Self {
        let real = ns * nd;
        let nodes = ns + nd + 1;
        let mut flow = vec![0.0; real + ns + nd];
        let mut basis = Vec::with_capacity(ns + nd);
        let mut pos = vec![usize::MAX; real + ns + nd];
        for u in 0..ns + nd {
            flow[real + u] = if u < ns { a[u] } else { b[u - ns] };
            pos[real + u] = basis.len();
            basis.push(real + u);
        }
        let mut net = Network {
            ns,
            nd,
            c,
            flow,
            parent: vec![usize::MAX; nodes],
            pred: vec![usize::MAX; nodes],
            up: vec![false; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            basis,
            pos,
            next_arc: 0,
            block: ((real as f64).sqrt().ceil() as usize).max(10),
            pivots: 0,
            adj_start: vec![0; nodes + 1],
            adj: vec![0; 2 * (ns + nd)],
            queue: Vec::with_capacity(nodes),
        };
        net.rebuild();
        net
    }

    fn real(&self) -> usize {
        self.ns * self.nd
    }

    fn root(&self) -> usize {
        self.ns + self.nd
    }

    fn src(&self, a: usize) -> usize {
        let real = self.real();
        if a < real {
            a / self.nd
        } else if a - real < self.ns {
            a - real
        } else {
            self.root()
        }
    }

    fn tgt(&self, a: usize) -> usize {
        let real = self.real();
        if a < real {
            self.ns + a % self.nd
        } else if a - real < self.ns {
            self.root()
        } else {
            a - real
        }
    }

    fn cost(&self, a: usize) -> f64 {
        let real = self.real();
        if a < real {
            self.c[a]
        } else if a - real < self.ns {
            0.0
        } else {
            ART_COST
        }
    }

    fn reduced(&self, a: usize) -> f64 {
        self.cost(a) + self.pi[self.src(a)] - self.pi[self.tgt(a)]
    }

    /// Recompute parent pointers, depths and potentials from the basis.
    fn rebuild(&mut self) {
        let nodes = self.root() + 1;
        self.adj_start.iter_mut().for_each(|s| *s = 0);
        for &a in &self.basis {
            let (s, t) = (self.src(a), self.tgt(a));
            self.adj_start[s + 1] += 1;
            self.adj_start[t + 1] += 1;
        }
        for i in 0..nodes {
            self.adj_start[i + 1] += self.adj_start[i];
        }
        let mut fill = self.adj_start.clone();
        for idx in 0..self.basis.len() {
            let a = self.basis[idx];
            let (s, t) = (self.src(a), self.tgt(a));
            self.adj[fill[s]] = a;
            fill[s] += 1;
            self.adj[fill[t]] = a;
            fill[t] += 1;
        }
        let root = self.root();
        self.queue.clear();
        self.queue.push(root);
        self.parent[root] = usize::MAX;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let x = self.queue[head];
            head += 1;
            for k in self.adj_start[x]..self.adj_start[x + 1] {
                let a = self.adj[k];
                if a == self.pred[x] && x != root {
                    continue;
                }
                let (s, t) = (self.src(a), self.tgt(a));
                let y = if s == x { t } else { s };
                self.parent[y] = x;
                self.pred[y] = a;
                self.depth[y] = self.depth[x] + 1;
                if s == y {
                    self.up[y] = true;
                    self.pi[y] = self.pi[x] - self.cost(a);
                } else {
                    self.up[y] = false;
                    self.pi[y] = self.pi[x] + self.cost(a);
                }
                self.queue.push(y);
            }
        }
        debug_assert_eq!(self.queue.len(), nodes);
    }

    /// Block search pricing over real arcs.
    fn entering(&mut self) -> Option<usize> {
        let real = self.real();
        let mut best = None;
        let mut min = -PRICE_TOL;
        let mut count = 0;
        for k in 0..real {
            let a = (self.next_arc + k) % real;
            if self.pos[a] != usize::MAX {
                continue;
            }
            let rc = self.reduced(a);
            if rc < min {
                min = rc;
                best = Some(a);
            }
            count += 1;
            if count >= self.block {
                if best.is_some() {
                    self.next_arc = (a + 1) % real;
                    return best;
                }
                count = 0;
            }
        }
        best
    }

    fn pivot(&mut self, e: usize) -> Result<()> {
        let (first, second) = (self.src(e), self.tgt(e));
        let (mut x, mut y) = (first, second);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                x = self.parent[x];
            } else {
                y = self.parent[y];
            }
        }
        let join = x;
        let mut delta = f64::INFINITY;
        let mut out = usize::MAX;
        let mut w = first;
        while w != join {
            let d = if self.up[w] {
                self.flow[self.pred[w]]
            } else {
                f64::INFINITY
            };
            if d < delta {
                delta = d;
                out = w;
            }
            w = self.parent[w];
        }
        let mut w = second;
        while w != join {
            let d = if self.up[w] {
                f64::INFINITY
            } else {
                self.flow[self.pred[w]]
            };
            if d <= delta {
                delta = d;
                out = w;
            }
            w = self.parent[w];
        }
        if !delta.is_finite() {
            return Err(MarkovError::SolverNonconvergence("unbounded cycle".into()));
        }
        self.flow[e] += delta;
        let mut w = first;
        while w != join {
            let a = self.pred[w];
            self.flow[a] += if self.up[w] { -delta } else { delta };
            w = self.parent[w];
        }
        let mut w = second;
        while w != join {
            let a = self.pred[w];
            self.flow[a] += if self.up[w] { delta } else { -delta };
            w = self.parent[w];
        }
        let leave = self.pred[out];
        self.flow[leave] = 0.0;
        let slot = self.pos[leave];
        self.basis[slot] = e;
        self.pos[e] = slot;
        self.pos[leave] = usize::MAX;
        self.rebuild();
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let cap = 50 * (self.real() + self.root()) + 1000;
        while let Some(e) = self.entering() {
            if self.pivots >= cap {
                return Err(MarkovError::SolverNonconvergence(format!(
                    "pivot cap {cap} reached"
                )));
            }
            self.pivot(e)?;
            self.pivots += 1;
        }
        Ok(())
    }
}

/// Joint law with prescribed marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPlan {
    n: usize,
    plan: Vec<f64>,
    left: Measure,
    right: Measure,
}

impl CouplingPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plan[x * self.n + y]
    }

    pub fn entries(&self) -> &[f64] {
        &self.plan
    }

    pub fn left(&self) -> &Measure {
        &self.left
    }

    pub fn right(&self) -> &Measure {
        &self.right
    }

    /// Largest deviation of the plan's marginals from `left` and `right`.
    pub fn marginal_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            let row: f64 = self.plan[i * n..(i + 1) * n].iter().sum();
            let col: f64 = (0..n).map(|k| self.plan[k * n + i]).sum();
            dev = dev
                .max((row - self.left.get(i)).abs())
                .max((col - self.right.get(i)).abs());
        }
        dev
    }

    /// Nonzero entries `(x, y, mass)` in row-major order.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        (0..n * n)
            .filter(|&k| self.plan[k] > 0.0)
            .map(|k| (k / n, k % n, self.plan[k]))
            .collect()
    }

    pub fn diagonal(mu: &Measure) -> CouplingPlan {
        let n = mu.len();
        let mut plan = vec![0.0; n * n];
        (0..n).for_each(|i| plan[i * n + i] = mu.get(i));
        CouplingPlan {
            n,
            plan,
            left: mu.clone(),
            right: mu.clone(),
        }
    }

    pub fn product(mu: &Measure, nu: &Measure) -> CouplingPlan {
        let n = mu.len();
        let plan = (0..n * n).map(|k| mu.get(k / n) * nu.get(k % n)).collect();
        CouplingPlan {
            n,
            plan,
            left: mu.clone(),
            right: nu.clone(),
        }
    }

    pub fn transpose(&self) -> CouplingPlan {
        let n = self.n;
        let plan = (0..n * n).map(|k| self.plan[(k % n) * n + k / n]).collect();
        CouplingPlan {
            n,
            plan,
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

/// Optimal coupling for an arbitrary nonnegative cost on `{0..n-1}²`.
pub fn lift_cost(
    cost: impl Fn(usize, usize) -> f64,
    mu: &Measure,
    nu: &Measure,
) -> Result<(f64, CouplingPlan, Transport)> {
    check_len(mu.len(), nu.len())?;
    if mu == nu {
        let plan = CouplingPlan::diagonal(mu);
        let value = (0..mu.len()).map(|i| mu.get(i) * cost(i, i)).sum::<f64>();
        if value == 0.0 {
            let n = mu.len();
            let t = Transport {
                rows: n,
                cols: n,
                plan: plan.plan.clone(),
                value: 0.0,
                dual_value: 0.0,
                u: vec![0.0; n],
                v: vec![0.0; n],
                pivots: 0,
            };
            return Ok((0.0, plan, t));
        }
    }
    let t = solve_transport(mu.weights(), nu.weights(), &cost)?;
    let plan = CouplingPlan {
        n: mu.len(),
        plan: t.plan.clone(),
        left: mu.clone(),
        right: nu.clone(),
    };
    let dev = plan.marginal_deviation();
    if dev > SUM_TOL {
        return Err(MarkovError::SolverNonconvergence(format!(
            "plan marginals off by {dev}"
        )));
    }
    Ok((t.value, plan, t))
}

/// Lift a distance-like function to probability measures by optimal transport.
pub fn lift_distance(d: &DistanceLike, mu: &Measure, nu: &Measure) -> Result<(f64, CouplingPlan)> {
    check_len(d.n(), mu.len())?;
    let (value, plan, _) = lift_cost(|i, j| d.get(i, j), mu, nu)?;
    Ok((value, plan))
}

/// Wasserstein-1 distance for a finite metric. The value is cross-checked
/// against the Lipschitz dual within [`DUAL_GAP_TOL`].
pub fn wasserstein1(metric: &Metric, mu: &Measure, nu: &Measure) -> Result<f64> {
    check_len(metric.n(), mu.len())?;
    check_len(metric.n(), nu.len())?;
    let delta: Vec<f64> = mu
        .weights()
        .iter()
        .zip(nu.weights())
        .map(|(a, b)| a - b)
        .collect();
    wasserstein1_signed(metric, &delta)
}

/// Wasserstein-1 norm of a signed vector of total mass zero, i.e. the transport
/// cost from its positive to its negative part. For a metric this equals
/// `W1(μ, ν)` with `delta = μ - ν` and avoids cancellation for close measures.
pub fn wasserstein1_signed(metric: &Metric, delta: &[f64]) -> Result<f64> {
    check_len(metric.n(), delta.len())?;
    let pos: Vec<f64> = delta.iter().map(|x| x.max(0.0)).collect();
    let neg: Vec<f64> = delta.iter().map(|x| (-x).max(0.0)).collect();
    let mass: f64 = pos.iter().sum();
    if mass == 0.0 || neg.iter().sum::<f64>() == 0.0 {
        return Ok(0.0);
    }
    let t = solve_transport(&pos, &neg, |i, j| metric.get(i, j))?;
    // Lip1 dual: f(x) = min_j (d(x, j) - v_j) over the negative support
    let cols: Vec<usize> = (0..delta.len()).filter(|&j| neg[j] > 0.0).collect();
    let n = metric.n();
    let f: Vec<f64> = (0..n)
        .map(|x| {
            cols.iter()
                .map(|&j| metric.get(x, j) - t.v[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let scale = (0..n * n)
        .map(|k| metric.get(k / n, k % n))
        .fold(0.0, f64::max)
        .max(1.0);
    for x in 0..n {
        for y in 0..n {
            if f[x] - f[y] > metric.get(x, y) + 1e-12 * scale {
                return Err(MarkovError::SolverNonconvergence(format!(
                    "dual potential not 1-Lipschitz at ({x},{y})"
                )));
            }
        }
    }
    let dual: f64 = f.iter().zip(&pos).map(|(a, b)| a * b).sum::<f64>()
        - f.iter().zip(&neg).map(|(a, b)| a * b).sum::<f64>();
    if (t.value - dual).abs() > DUAL_GAP_TOL * scale {
        return Err(MarkovError::SolverNonconvergence(format!(
            "W1 primal {} vs Lipschitz dual {dual}",
            t.value
        )));
    }
    Ok(t.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(w: &[f64]) -> Measure {
        Measure::new(w.to_vec()).unwrap()
    }

    #[test]
    fn trivial_metric_gives_tv() {
        let d = DistanceLike::trivial(2);
        let (v, plan) = lift_distance(&d, &m(&[0.6, 0.4]), &m(&[0.3, 0.7])).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert!(plan.marginal_deviation() < 1e-15);
    }

    #[test]
    fn scaled_distance() {
        let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let (v, _) = lift_distance(&d, &m(&[0.6, 0.4]), &m(&[0.3, 0.7])).unwrap();
        assert!((v - 0.15).abs() < 1e-15);
    }

    #[test]
    fn equal_measures_give_diagonal_plan() {
        let d = DistanceLike::truncated_line(4, 2.0).unwrap();
        let mu = m(&[0.1, 0.2, 0.3, 0.4]);
        let (v, plan) = lift_distance(&d, &mu, &mu).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(plan, CouplingPlan::diagonal(&mu));
    }

    #[test]
    fn w1_examples() {
        let line = Metric::line(3);
        assert_eq!(
            wasserstein1(&line, &Measure::dirac(3, 0), &Measure::dirac(3, 2)).unwrap(),
            2.0
        );
        let mu = m(&[0.5, 0.5, 0.0]);
        assert_eq!(wasserstein1(&line, &mu, &mu).unwrap(), 0.0);
        let w = wasserstein1(&line, &mu, &m(&[0.0, 0.5, 0.5])).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular_transport_matches_hand_solution() {
        // two sources, three sinks, greedy is suboptimal here
        let c = [[1.0, 2.0, 3.0], [4.0, 1.0, 2.0]];
        let t = solve_transport(&[0.5, 0.5], &[0.2, 0.3, 0.5], |i, j| c[i][j]).unwrap();
        // optimum: 0->0 0.2, 0->1 0.3, 1->2 0.5 : 0.2 + 0.6 + 1.0 = 1.8
        assert!((t.value - 1.8).abs() < 1e-14);
        assert!((t.value - t.dual_value).abs() < 1e-12);
    }
}
