//! Exact evaluation of a fixed policy through its induced Markov chain.
//!
//! Two paths are provided. [`SparseChain`] is a general row-stochastic matrix
//! with a dense direct solve (and damped power iteration) for small chains.
//! [`analyze_policy`] exploits the model structure: `(Q, I)` is redrawn from
//! `C` on every transition, so the chain lumps exactly onto `(E, C)` pairs,
//! and `C` moves by at most one per slot. The lumped chain is therefore
//! block-tridiagonal in `C` and is solved with a block LU; the result is
//! expanded back to full states and its balance residual is checked against
//! the full kernel.

use log::warn;
use nalgebra::{DMatrix, DVector};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::linalg::BlockTridiagonal;
use crate::mdp::{Action, Model, StateSpace, SystemState};
use crate::policy::StationaryPolicy;

pub const BALANCE_TOLERANCE: f64 = 1e-9;
const DENSE_LIMIT: usize = 4000;
const POWER_TOLERANCE: f64 = 1e-12;
const POWER_SWEEPS: usize = 10_000_000;

/// Row-stochastic matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChain {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseChain {
    /// Rows as `(column, probability)` lists; zero entries are dropped.
    pub fn from_rows(rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (c, p) in row {
                if p == 0.0 {
                    continue;
                }
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() as usize == c {
                    *vals.last_mut().unwrap() += p;
                } else {
                    cols.push(c as u32);
                    vals.push(p);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().copied().enumerate().collect::<Vec<_>>()),
        )
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// `max_i |sum_j P_ij - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.row(i).map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `pi * P`.
    pub fn left_mul(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &w) in pi.iter().enumerate() {
            if w != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += w * p;
                }
            }
        }
        out
    }

    fn successors(&self, i: usize, out: &mut Vec<usize>) {
        out.extend(self.row(i).map(|e| e.0));
    }
}

/// Materializes the policy-induced chain over the full state space.
pub fn induced_chain(model: &Model, policy: &StationaryPolicy) -> Result<SparseChain> {
    policy.validate(model)?;
    let space = model.space();
    Ok(SparseChain::from_rows((0..space.len()).map(|i| {
        let x = space.state(i);
        let mut row = Vec::new();
        model.for_each_successor(&x, policy.action(i), |j, p| row.push((j, p)));
        row
    })))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    /// `||pi P - pi||_inf`.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub(crate) struct Recurrence {
    /// Closed communicating classes among the reachable states, each sorted.
    pub closed: Vec<Vec<usize>>,
}

/// Finds the closed classes reachable from `seeds`.
pub(crate) fn recurrent_classes(
    n: usize,
    seeds: &[usize],
    successors: impl Fn(usize, &mut Vec<usize>),
) -> Recurrence {
    let mut local = vec![usize::MAX; n];
    let mut order = Vec::new();
    for &s in seeds {
        if local[s] == usize::MAX {
            local[s] = order.len();
            order.push(s);
        }
    }
    let mut edges = Vec::new();
    let mut buf = Vec::new();
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        buf.clear();
        successors(u, &mut buf);
        for &v in &buf {
            if local[v] == usize::MAX {
                local[v] = order.len();
                order.push(v);
            }
            edges.push((local[u] as u32, local[v] as u32));
        }
    }
    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(order.len(), edges.len());
    for _ in 0..order.len() {
        graph.add_node(());
    }
    for &(u, v) in &edges {
        graph.add_edge(NodeIndex::new(u as usize), NodeIndex::new(v as usize), ());
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut component = vec![0usize; order.len()];
    for (k, scc) in sccs.iter().enumerate() {
        for v in scc {
            component[v.index()] = k;
        }
    }
    let mut open = vec![false; sccs.len()];
    for &(u, v) in &edges {
        let (cu, cv) = (component[u as usize], component[v as usize]);
        if cu != cv {
            open[cu] = true;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(k, _)| !open[*k])
        .map(|(_, scc)| {
            let mut states: Vec<usize> = scc.iter().map(|v| order[v.index()]).collect();
            states.sort_unstable();
            states
        })
        .collect();
    closed.sort_by_key(|c| c[0]);
    Recurrence { closed }
}

fn single_class(rec: Recurrence, describe: impl Fn(usize) -> String) -> Result<Vec<usize>> {
    match rec.closed.len() {
        1 => Ok(rec.closed.into_iter().next().unwrap()),
        0 => Err(Error::Singular("no recurrent class found".into())),
        _ => Err(Error::MultipleRecurrentClasses {
            first: describe(rec.closed[0][0]),
            second: describe(rec.closed[1][0]),
        }),
    }
}

/// Stationary distribution of the closed class reachable from `start`, by a
/// dense direct solve with the first class state pinned. Falls back to
/// damped power iteration for large classes.
pub fn stationary_distribution(chain: &SparseChain, start: usize) -> Result<StationaryDistribution> {
    let rec = recurrent_classes(chain.len(), &[start], |i, out| chain.successors(i, out));
    let class = single_class(rec, |i| format!("#{i}"))?;
    if class.len() > DENSE_LIMIT {
        return power_iteration(chain, start, POWER_TOLERANCE, POWER_SWEEPS);
    }
    let mut pos = vec![usize::MAX; chain.len()];
    for (k, &s) in class.iter().enumerate() {
        pos[s] = k;
    }
    let m = class.len() - 1;
    // (I - P_KK)^T restricted to K minus the anchor class[0].
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (k, &s) in class.iter().enumerate() {
        for (j, p) in chain.row(s) {
            let col = pos[j];
            if col == usize::MAX || col == 0 {
                continue;
            }
            if k == 0 {
                b[col - 1] += p;
            } else {
                a[(col - 1, k - 1)] -= p;
            }
        }
    }
    let y = if m == 0 {
        DVector::zeros(0)
    } else {
        a.lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("stationary system".into()))?
    };
    let mut probs = vec![0.0; chain.len()];
    probs[class[0]] = 1.0;
    for k in 0..m {
        probs[class[k + 1]] = y[k];
    }
    finish(chain, probs)
}

fn finish(chain: &SparseChain, mut probs: Vec<f64>) -> Result<StationaryDistribution> {
    normalize(&mut probs)?;
    let next = chain.left_mul(&probs);
    let residual = max_diff(&next, &probs);
    if residual >= BALANCE_TOLERANCE {
        return Err(Error::Residual {
            what: "stationary balance",
            residual,
            tolerance: BALANCE_TOLERANCE,
        });
    }
    Ok(StationaryDistribution { probs, residual })
}

fn normalize(probs: &mut [f64]) -> Result<()> {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            if *p < -1e-12 {
                return Err(Error::Singular(format!("negative stationary mass {p}")));
            }
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Singular("stationary mass vanished".into()));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damped power iteration `pi <- (pi + pi P) / 2` from a point mass at `start`.
pub fn power_iteration(
    chain: &SparseChain,
    start: usize,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<StationaryDistribution> {
    let mut pi = vec![0.0; chain.len()];
    pi[start] = 1.0;
    damped_power(&mut pi, |v| chain.left_mul(v), tolerance, max_sweeps)?;
    finish(chain, pi)
}

fn damped_power(
    pi: &mut [f64],
    apply: impl Fn(&[f64]) -> Vec<f64>,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<()> {
    for _ in 0..max_sweeps {
        let next = apply(pi);
        let diff = max_diff(&next, pi);
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + q);
        }
        if diff < tolerance {
            return Ok(());
        }
    }
    Err(Error::Residual {
        what: "power iteration",
        residual: f64::NAN,
        tolerance,
    })
}

/// `sum_x pi_x g(x, mu(x))`.
pub fn blocking_probability(policy: &StationaryPolicy, dist: &StationaryDistribution) -> f64 {
    let space = policy.space();
    dist.probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, p)| p * Model::stage_cost(&space.state(i), policy.action(i)))
        .sum()
}

/// Policy-induced chain on `(E, C)` pairs, stored as dense blocks per push count.
#[derive(Debug, Clone)]
pub struct LumpedChain {
    width: usize,
    /// `stay[c]`: level `c -> c`.
    stay: Vec<DMatrix<f64>>,
    /// `up[c]`: level `c -> c + 1`.
    up: Vec<DMatrix<f64>>,
    /// `down[c]`: level `c + 1 -> c`.
    down: Vec<DMatrix<f64>>,
    /// Expected stage cost of each `(E, C)` pair under the policy.
    cost: Vec<f64>,
}

impl LumpedChain {
    pub fn build(model: &Model, policy: &StationaryPolicy) -> Self {
        let space = model.space();
        let width = space.battery_units as usize + 1;
        let levels = space.contents as usize + 1;
        let mut stay = vec![DMatrix::zeros(width, width); levels];
        let mut up = vec![DMatrix::zeros(width, width); levels - 1];
        let mut down = vec![DMatrix::zeros(width, width); levels - 1];
        let mut cost = vec![0.0; width * levels];
        for c in 0..levels {
            let req = model.request_transition(c as u32);
            for e in 0..width {
                for (qi, &q) in req.iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let (request, targets_next) = StateSpace::request_of(qi);
                    let x = SystemState::new(e as u32, request, targets_next, c as u32);
                    let u = policy.action_at(&x);
                    cost[space.lumped_index(e as u32, c as u32)] += q * Model::stage_cost(&x, u);
                    model.for_each_lumped_successor(&x, u, |e2, c2, p| {
                        let c2 = c2 as usize;
                        let block = if c2 == c {
                            &mut stay[c]
                        } else if c2 == c + 1 {
                            &mut up[c]
                        } else {
                            &mut down[c2]
                        };
                        block[(e, e2 as usize)] += q * p;
                    });
                }
            }
        }
        Self {
            width,
            stay,
            up,
            down,
            cost,
        }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn describe(&self, z: usize) -> String {
        format!("(E={}, C={})", z % self.width, z / self.width)
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let (cf, ef) = (from / self.width, from % self.width);
        let (ct, et) = (to / self.width, to % self.width);
        if ct == cf {
            self.stay[cf][(ef, et)]
        } else if ct == cf + 1 {
            self.up[cf][(ef, et)]
        } else if ct + 1 == cf {
            self.down[ct][(ef, et)]
        } else {
            0.0
        }
    }

    pub fn successors(&self, z: usize, out: &mut Vec<usize>) {
        let (c, e) = (z / self.width, z % self.width);
        let mut push_row = |block: &DMatrix<f64>, level: usize| {
            for e2 in 0..self.width {
                if block[(e, e2)] > 0.0 {
                    out.push(level * self.width + e2);
                }
            }
        };
        if c > 0 {
            push_row(&self.down[c - 1], c - 1);
        }
        push_row(&self.stay[c], c);
        if c + 1 < self.stay.len() {
            push_row(&self.up[c], c + 1);
        }
    }

    /// `sum_{z'} P(z -> z') v(z')`.
    pub fn row_dot(&self, z: usize, v: &[f64]) -> f64 {
        let (c, e) = (z / self.width, z % self.width);
        let w = self.width;
        let dot = |block: &DMatrix<f64>, level: usize| -> f64 {
            (0..w).map(|e2| block[(e, e2)] * v[level * w + e2]).sum()
        };
        let mut s = dot(&self.stay[c], c);
        if c > 0 {
            s += dot(&self.down[c - 1], c - 1);
        }
        if c + 1 < self.stay.len() {
            s += dot(&self.up[c], c + 1);
        }
        s
    }

    /// Groups `states` (sorted) by push count.
    fn groups(&self, states: impl IntoIterator<Item = usize>) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut level = usize::MAX;
        for z in states {
            let c = z / self.width;
            if c != level {
                groups.push(Vec::new());
                level = c;
            }
            groups.last_mut().unwrap().push(z);
        }
        groups
    }

    /// `I - P` restricted to the grouped states, with its row excess (the
    /// probability of leaving the restriction in one step).
    fn system(&self, groups: &[Vec<usize>]) -> (BlockTridiagonal, Vec<f64>) {
        let block = |rows: &[usize], cols: &[usize], diag: bool| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
                let id = if diag && i == j { 1.0 } else { 0.0 };
                id - self.entry(rows[i], cols[j])
            })
        };
        let mut inside = vec![false; self.len()];
        groups.iter().flatten().for_each(|&z| inside[z] = true);
        let mut succ = Vec::new();
        let excess = groups
            .iter()
            .flatten()
            .map(|&z| {
                succ.clear();
                self.successors(z, &mut succ);
                succ.iter().filter(|&&t| !inside[t]).map(|&t| self.entry(z, t)).sum()
            })
            .collect();
        let system = BlockTridiagonal {
            diag: groups.iter().map(|g| block(g, g, true)).collect(),
            upper: groups.windows(2).map(|w| block(&w[0], &w[1], false)).collect(),
            lower: groups.windows(2).map(|w| block(&w[1], &w[0], false)).collect(),
        };
        (system, excess)
    }

    /// Stationary weights on the closed class `class` (sorted).
    ///
    /// Levels are eliminated from the top down without subtraction, and the
    /// censored chain on the lowest level gives the last block's weights, so
    /// states whose mass is many orders of magnitude below the mode stay
    /// accurate.
    pub(crate) fn stationary_on(&self, class: &[usize]) -> Result<Vec<f64>> {
        let mut groups = self.groups(class.iter().copied());
        groups.reverse();
        let (system, excess) = self.system(&groups);
        let y = system.factor(&excess)?.left_null()?;
        let mut weights = vec![0.0; self.len()];
        for (z, v) in groups.iter().flatten().zip(y) {
            weights[*z] = v;
        }
        normalize(&mut weights)?;
        Ok(weights)
    }

    /// Solves `(I - P) w = b` on every state except `anchor`, with `w(anchor) = 0`,
    /// for each right-hand side in `rhs`.
    pub(crate) fn solve_pinned(&self, anchor: usize, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let groups = self.groups((0..self.len()).filter(|&z| z != anchor));
        let order: Vec<usize> = groups.iter().flatten().copied().collect();
        let (system, excess) = self.system(&groups);
        let lu = system.factor(&excess)?;
        rhs.iter()
            .map(|b| {
                let local: Vec<f64> = order.iter().map(|&z| b[z]).collect();
                let sol = lu.solve(&local)?;
                let mut w = vec![0.0; self.len()];
                for (z, v) in order.iter().zip(sol) {
                    w[*z] = v;
                }
                Ok(w)
            })
            .collect()
    }

    /// Closed classes over all `(E, C)` pairs.
    pub(crate) fn all_recurrent_classes(&self) -> Recurrence {
        let seeds: Vec<usize> = (0..self.len()).collect();
        recurrent_classes(self.len(), &seeds, |z, out| self.successors(z, out))
    }
}

/// Exact long-run evaluation of one policy.
#[derive(Debug, Clone)]
pub struct PolicyAnalysis {
    pub distribution: StationaryDistribution,
    pub blocking: f64,
    /// Stationary frequency of sleep, unicast and push.
    pub action_frequency: [f64; 3],
    pub mean_battery: f64,
}

/// Stationary analysis of `policy` started from the empty state `(0, 0, 0, 0)`.
pub fn analyze_policy(model: &Model, policy: &StationaryPolicy) -> Result<PolicyAnalysis> {
    policy.validate(model)?;
    let space = model.space();
    let lumped = LumpedChain::build(model, policy);

    let start = SystemState::EMPTY;
    let mut seeds = Vec::new();
    model.for_each_lumped_successor(&start, policy.action_at(&start), |e, c, _| {
        seeds.push(space.lumped_index(e, c))
    });
    let rec = recurrent_classes(lumped.len(), &seeds, |z, out| lumped.successors(z, out));
    let class = single_class(rec, |z| lumped.describe(z))?;
    let weights = lumped.stationary_on(&class)?;

    let mut probs = vec![0.0; space.len()];
    for (i, p) in probs.iter_mut().enumerate() {
        let x = space.state(i);
        let w = weights[space.lumped_index(x.energy, x.pushed)];
        if w > 0.0 {
            *p = w * model.request_transition(x.pushed)[StateSpace::request_index(x.request, x.targets_next)];
        }
    }
    let mut residual = max_diff(&apply_full(model, policy, &probs), &probs);
    if residual >= BALANCE_TOLERANCE {
        warn!("direct stationary solve left residual {residual:e}; falling back to power iteration");
        damped_power(&mut probs, |v| apply_full(model, policy, v), POWER_TOLERANCE, POWER_SWEEPS)?;
        normalize(&mut probs)?;
        residual = max_diff(&apply_full(model, policy, &probs), &probs);
        if residual >= BALANCE_TOLERANCE {
            return Err(Error::Residual {
                what: "stationary balance",
                residual,
                tolerance: BALANCE_TOLERANCE,
            });
        }
    }
    let distribution = StationaryDistribution { probs, residual };
    let blocking = blocking_probability(policy, &distribution);
    let mut action_frequency = [0.0; 3];
    let mut mean_battery = 0.0;
    for (i, &p) in distribution.probs.iter().enumerate() {
        if p > 0.0 {
            action_frequency[policy.action(i).index()] += p;
            mean_battery += p * space.state(i).energy as f64;
        }
    }
    Ok(PolicyAnalysis {
        distribution,
        blocking,
        action_frequency,
        mean_battery,
    })
}

/// `pi * P_mu` over full states, computed through the kernel factors.
pub(crate) fn apply_full(model: &Model, policy: &StationaryPolicy, pi: &[f64]) -> Vec<f64> {
    let space = model.space();
    let mut lumped = vec![0.0; space.lumped_len()];
    for (i, &w) in pi.iter().enumerate() {
        if w != 0.0 {
            let x = space.state(i);
            model.for_each_lumped_successor(&x, policy.action(i), |e, c, p| {
                lumped[space.lumped_index(e, c)] += w * p;
            });
        }
    }
    (0..space.len())
        .map(|i| {
            let x = space.state(i);
            let qi = StateSpace::request_index(x.request, x.targets_next);
            lumped[space.lumped_index(x.energy, x.pushed)] * model.request_transition(x.pushed)[qi]
        })
        .collect()
}

/// Convenience: push-action frequency of a policy's stationary behavior.
pub fn push_frequency(analysis: &PolicyAnalysis) -> f64 {
    analysis.action_frequency[Action::Push.index()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::EnergyArrival;
    use crate::testutil::small_model;

    #[test]
    fn two_state_push_chain() {
        // Push-count chain {C_thr - 1, C_thr} with N = 20, p_c = 0.2, C_thr = 10.
        let (pc, n, c) = (0.2, 20.0, 10.0);
        let a = pc * (c - 1.0) / n;
        let b = pc * c / n;
        let chain = SparseChain::from_dense(&[vec![a, 1.0 - a], vec![b, 1.0 - b]]);
        let d = stationary_distribution(&chain, 0).unwrap();
        assert!((d.probs[0] - 2.0 / 20.2).abs() < 1e-12);
        assert!((d.probs[0] - 0.099010).abs() < 1e-6);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let chain = SparseChain::from_dense(&[
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ]);
        let d = stationary_distribution(&chain, 2).unwrap();
        for p in d.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn power_iteration_agrees_with_direct() {
        let chain = SparseChain::from_dense(&[
            vec![0.1, 0.9, 0.0, 0.0],
            vec![0.0, 0.2, 0.8, 0.0],
            vec![0.3, 0.0, 0.0, 0.7],
            vec![0.6, 0.0, 0.4, 0.0],
        ]);
        let a = stationary_distribution(&chain, 0).unwrap();
        let b = power_iteration(&chain, 0, 1e-14, 1_000_000).unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_chain_converges_with_damping() {
        let chain = SparseChain::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let d = power_iteration(&chain, 0, 1e-13, 10_000).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn transient_states_get_zero_mass() {
        // 0 -> 1 once, then {1, 2} alternate randomly.
        let chain = SparseChain::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.0, 0.5, 0.5],
        ]);
        let d = stationary_distribution(&chain, 0).unwrap();
        assert_eq!(d.probs[0], 0.0);
        assert!((d.probs[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_recurrent_classes_are_reported() {
        let chain = SparseChain::from_dense(&[
            vec![0.0, 0.5, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        match stationary_distribution(&chain, 0) {
            Err(Error::MultipleRecurrentClasses { first, second }) => {
                assert_eq!((first.as_str(), second.as_str()), ("#1", "#2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frozen_energy_without_arrivals() {
        let m = small_model(6, 2, 3, 0.7, 0.3, EnergyArrival::Deterministic { units: 0 });
        let p = StationaryPolicy::all_sleep(m.space());
        let chain = induced_chain(&m, &p).unwrap();
        let sp = m.space();
        for i in 0..chain.len() {
            let e = sp.state(i).energy;
            for (j, _) in chain.row(i) {
                assert_eq!(sp.state(j).energy, e);
            }
        }
        assert!(chain.row_sum_error() < 1e-12);
    }

    #[test]
    fn structured_and_dense_paths_agree() {
        let m = small_model(8, 2, 4, 0.8, 0.4, EnergyArrival::Poisson { mean: 1.3 });
        let sp = m.space();
        let policy = StationaryPolicy::from_fn(sp, |x| {
            if x.pushed < 3 && x.energy >= 2 {
                Action::Push
            } else if x.request > 0 && x.energy >= x.request {
                Action::Unicast
            } else {
                Action::Sleep
            }
        });
        let fast = analyze_policy(&m, &policy).unwrap();
        let chain = induced_chain(&m, &policy).unwrap();
        let dense = stationary_distribution(&chain, 0).unwrap();
        for (a, b) in fast.distribution.probs.iter().zip(&dense.probs) {
            assert!((a - b).abs() < 1e-10);
        }
        let blk = blocking_probability(&policy, &dense);
        assert!((fast.blocking - blk).abs() < 1e-10);
        let s: f64 = fast.action_frequency.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
