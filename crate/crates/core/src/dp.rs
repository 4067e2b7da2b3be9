//! Average-cost policy iteration.
//!
//! Evaluation solves the Poisson equation `lambda + h = g + P h` pinned at
//! `h(anchor) = 0`, where the anchor is the last state in the documented
//! order. Because `(Q, I)` is redrawn from `C'` each slot, the equation is
//! first solved for `W(E, C) = E[h | E, C]` on the lumped chain (a
//! block-tridiagonal system) and `h` is then recovered state by state.

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::markov::{recurrent_classes, LumpedChain, SparseChain};
use crate::mdp::{Action, Model, StateSpace};
use crate::policy::StationaryPolicy;

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_ITERATION_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Average cost `lambda`, the long-run blocking probability.
    pub gain: f64,
    /// Differential value `h`, one entry per state.
    pub bias: Vec<f64>,
    /// Index of the state pinned to `h = 0`.
    pub anchor: usize,
    /// `max_x |lambda + h(x) - g(x, mu(x)) - sum_y p h(y)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gain: f64,
    /// States whose action changed in the improvement step that followed.
    pub changed: usize,
}

#[derive(Debug, Clone)]
pub struct PolicyIterationResult {
    pub policy: StationaryPolicy,
    pub evaluation: EvaluationResult,
    pub trace: Vec<IterationRecord>,
    pub bellman_residual: f64,
}

/// `W(E, C) = sum_{Q, I} Pr(Q, I | C) h(E, Q, I, C)` in lumped order.
fn lumped_average(model: &Model, h: &[f64]) -> Vec<f64> {
    let space = model.space();
    let mut w = vec![0.0; space.lumped_len()];
    for (i, &v) in h.iter().enumerate() {
        let x = space.state(i);
        let q = model.request_transition(x.pushed)[StateSpace::request_index(x.request, x.targets_next)];
        if q > 0.0 {
            w[space.lumped_index(x.energy, x.pushed)] += q * v;
        }
    }
    w
}

/// `g(x, u) + sum_y p(y | x, u) h(y)`, with `w` from [`lumped_average`].
fn q_factor(model: &Model, w: &[f64], index: usize, action: Action) -> f64 {
    let space = model.space();
    let x = space.state(index);
    let mut future = 0.0;
    model.for_each_lumped_successor(&x, action, |e, c, p| future += p * w[space.lumped_index(e, c)]);
    Model::stage_cost(&x, action) + future
}

/// Exact evaluation of `policy`. Fails if the policy chain has more than one
/// recurrent class, since `(lambda, h)` is then not unique.
pub fn policy_evaluation(model: &Model, policy: &StationaryPolicy) -> Result<EvaluationResult> {
    policy.validate(model)?;
    let space = model.space();
    let lumped = LumpedChain::build(model, policy);
    let rec = lumped.all_recurrent_classes();
    if rec.closed.len() > 1 {
        return Err(Error::MultipleRecurrentClasses {
            first: lumped.describe(rec.closed[0][0]),
            second: lumped.describe(rec.closed[1][0]),
        });
    }
    // Pinning the most visited pair keeps the hitting times below small.
    let class = &rec.closed[0];
    let pi = lumped.stationary_on(class)?;
    let a = *class
        .iter()
        .max_by(|&&u, &&v| pi[u].total_cmp(&pi[v]))
        .expect("closed classes are nonempty");
    let g = lumped.cost();
    let gain: f64 = pi.iter().zip(g).map(|(p, c)| p * c).sum();
    let mut g_rest = g.to_vec();
    g_rest[a] = 0.0;
    let ones: Vec<f64> = (0..lumped.len()).map(|z| if z == a { 0.0 } else { 1.0 }).collect();
    let sols = lumped.solve_pinned(a, &[g_rest, ones])?;
    let (x1, x2) = (&sols[0], &sols[1]);
    let w: Vec<f64> = x1.iter().zip(x2).map(|(u, v)| u - gain * v).collect();

    let mut bias: Vec<f64> = (0..space.len())
        .map(|i| q_factor(model, &w, i, policy.action(i)) - gain)
        .collect();
    let anchor = space.len() - 1;
    let shift = bias[anchor];
    bias.iter_mut().for_each(|v| *v -= shift);

    let w = lumped_average(model, &bias);
    let residual = (0..space.len())
        .map(|i| (gain + bias[i] - q_factor(model, &w, i, policy.action(i))).abs())
        .fold(0.0, f64::max);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::Residual {
            what: "policy evaluation",
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(EvaluationResult {
        gain,
        bias,
        anchor,
        residual,
    })
}

/// Dense evaluation of an explicit chain with per-state costs, anchored at the
/// last state. Intended for small chains.
pub fn evaluate_chain(chain: &SparseChain, cost: &[f64]) -> Result<EvaluationResult> {
    let n = chain.len();
    if cost.len() != n || n == 0 {
        return Err(Error::PolicySize {
            expected: n,
            got: cost.len(),
        });
    }
    let seeds: Vec<usize> = (0..n).collect();
    let rec = recurrent_classes(n, &seeds, |i, out| out.extend(chain.row(i).map(|e| e.0)));
    if rec.closed.len() > 1 {
        return Err(Error::MultipleRecurrentClasses {
            first: format!("#{}", rec.closed[0][0]),
            second: format!("#{}", rec.closed[1][0]),
        });
    }
    let anchor = n - 1;
    // Unknowns: h(0..n-1) except the anchor, then lambda in the anchor's slot.
    let mut a = DMatrix::<f64>::zeros(n, n);
    let b = DVector::from_column_slice(cost);
    for i in 0..n {
        a[(i, anchor)] = 1.0;
        if i != anchor {
            a[(i, i)] += 1.0;
        }
        for (j, p) in chain.row(i) {
            if j != anchor {
                a[(i, j)] -= p;
            }
        }
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("average-cost system".into()))?;
    let gain = sol[anchor];
    let mut bias: Vec<f64> = sol.iter().copied().collect();
    bias[anchor] = 0.0;
    let residual = (0..n)
        .map(|i| {
            let future: f64 = chain.row(i).map(|(j, p)| p * bias[j]).sum();
            (gain + bias[i] - cost[i] - future).abs()
        })
        .fold(0.0, f64::max);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::Residual {
            what: "chain evaluation",
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(EvaluationResult {
        gain,
        bias,
        anchor,
        residual,
    })
}

fn tie_tolerance(h: &[f64]) -> f64 {
    1e-11 * (1.0 + h.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn improve(model: &Model, h: &[f64], current: Option<&StationaryPolicy>) -> Result<StationaryPolicy> {
    let space = model.space();
    if h.len() != space.len() {
        return Err(Error::PolicySize {
            expected: space.len(),
            got: h.len(),
        });
    }
    let w = lumped_average(model, h);
    let tol = tie_tolerance(h);
    let actions = (0..space.len())
        .map(|i| {
            let x = space.state(i);
            let scored: Vec<(Action, f64)> = model
                .feasible_actions(&x)
                .into_iter()
                .map(|u| (u, q_factor(model, &w, i, u)))
                .collect();
            let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            if let Some(p) = current {
                let keep = p.action(i);
                if scored.iter().any(|&(u, v)| u == keep && v <= best + tol) {
                    return keep;
                }
            }
            scored.iter().find(|s| s.1 <= best + tol).unwrap().0
        })
        .collect();
    StationaryPolicy::new(space, actions)
}

/// Greedy policy for `h`; near-ties (relative `1e-11`) go to the lowest action index.
pub fn policy_improvement(model: &Model, h: &[f64]) -> Result<StationaryPolicy> {
    improve(model, h, None)
}

/// `max_x |lambda + h(x) - min_u [g(x, u) + sum_y p h(y)]|`.
pub fn bellman_residual(model: &Model, evaluation: &EvaluationResult) -> f64 {
    let space = model.space();
    let w = lumped_average(model, &evaluation.bias);
    (0..space.len())
        .map(|i| {
            let x = space.state(i);
            let best = model
                .feasible_actions(&x)
                .into_iter()
                .map(|u| q_factor(model, &w, i, u))
                .fold(f64::INFINITY, f64::min);
            (evaluation.gain + evaluation.bias[i] - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Policy iteration from all-Sleep (or `initial`) until the policy repeats.
///
/// During iteration the current action is kept whenever it is within the tie
/// tolerance of the minimum, which rules out cycling between equivalent policies.
pub fn policy_iteration(model: &Model, initial: Option<StationaryPolicy>) -> Result<PolicyIterationResult> {
    policy_iteration_capped(model, initial, DEFAULT_ITERATION_CAP)
}

pub fn policy_iteration_capped(
    model: &Model,
    initial: Option<StationaryPolicy>,
    cap: usize,
) -> Result<PolicyIterationResult> {
    let mut policy = initial.unwrap_or_else(|| StationaryPolicy::all_sleep(model.space()));
    let mut trace: Vec<IterationRecord> = Vec::new();
    for iteration in 1..=cap {
        let evaluation = policy_evaluation(model, &policy)?;
        if let Some(prev) = trace.last() {
            if evaluation.gain > prev.gain + 1e-12 {
                return Err(Error::NonMonotone {
                    previous: prev.gain,
                    current: evaluation.gain,
                });
            }
        }
        let next = improve(model, &evaluation.bias, Some(&policy))?;
        let changed = next.differences(&policy);
        debug!("policy iteration {iteration}: lambda = {:.12}, {changed} states changed", evaluation.gain);
        trace.push(IterationRecord {
            iteration,
            gain: evaluation.gain,
            changed,
        });
        if changed == 0 {
            let bellman_residual = bellman_residual(model, &evaluation);
            if !(bellman_residual < RESIDUAL_TOLERANCE) {
                return Err(Error::Residual {
                    what: "Bellman",
                    residual: bellman_residual,
                    tolerance: RESIDUAL_TOLERANCE,
                });
            }
            return Ok(PolicyIterationResult {
                policy,
                evaluation,
                trace,
                bellman_residual,
            });
        }
        policy = next;
    }
    Err(Error::IterationCap(cap))
}
