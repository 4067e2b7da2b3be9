#![allow(dead_code)]

use std::collections::BTreeMap;

use pushcell_core::channel::DistanceGrid;
use pushcell_core::content::Catalog;
use pushcell_core::mdp::{Action, EnergyArrival, Model, ModelParams, SystemState};
use pushcell_core::StationaryPolicy;

/// Equal-area grid on a 50 m cell, `E_p = M`.
pub fn model(
    battery_units: u32,
    classes: u32,
    contents: usize,
    skew: f64,
    request_prob: f64,
    update_prob: f64,
    arrivals: EnergyArrival,
) -> Model {
    Model::new(ModelParams {
        battery_units,
        push_units: classes,
        request_prob,
        catalog: Catalog::new(contents, skew, update_prob).unwrap(),
        grid: DistanceGrid::equal_area(classes, 50.0, 1.0).unwrap(),
        arrivals,
    })
    .unwrap()
}

/// Next-state pmf built by enumerating every joint outcome of one slot: the
/// energy arrival, which content (if any) is updated, and which content is
/// requested from where. Shares nothing with the model's own tables.
pub fn brute_force_row(model: &Model, arrival_pmf: &[f64], x: &SystemState, u: Action) -> BTreeMap<usize, f64> {
    let p = model.params();
    let space = model.space();
    let n = space.contents;
    let classes = space.classes as usize;
    let pc = p.catalog.update_prob();
    let pu = p.request_prob;
    let skew = p.catalog.skew();
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-skew)).collect();
    let total: f64 = weights.iter().sum();
    let r = p.grid.radius();
    let annulus = |m: usize| {
        let (d0, d1) = (p.grid.boundary(m - 1), p.grid.boundary(m));
        (d1 * d1 - d0 * d0) / (r * r)
    };
    let spend = match u {
        Action::Sleep => 0,
        Action::Unicast => p.grid.multiplier(x.request as usize),
        Action::Push => p.push_units,
    };

    // (None = no update, Some(k) = rank k updated, probability)
    let mut updates = vec![(None, 1.0 - pc)];
    updates.extend((1..=n).map(|k| (Some(k), pc / n as f64)));

    let mut out = BTreeMap::new();
    for (a, &pa) in arrival_pmf.iter().enumerate() {
        let e = (x.energy - spend + a as u32).min(space.battery_units);
        for &(update, pk) in &updates {
            let evicted = matches!(update, Some(k) if k <= x.pushed);
            let c = match (u, evicted) {
                (Action::Push, true) => x.pushed,
                (Action::Push, false) => x.pushed + 1,
                (_, true) => x.pushed - 1,
                (_, false) => x.pushed,
            };
            let mut add = |q: u32, i: bool, prob: f64| {
                let idx = space.index(&SystemState::new(e, q, i, c));
                *out.entry(idx).or_insert(0.0) += pa * pk * prob;
            };
            add(0, false, 1.0 - pu);
            for rank in 1..=n {
                let pr = pu * weights[rank as usize - 1] / total;
                if rank <= c {
                    add(0, false, pr);
                } else {
                    for m in 1..=classes {
                        add(m as u32, rank == c + 1, pr * annulus(m));
                    }
                }
            }
        }
    }
    out
}

/// Every deterministic stationary policy that is feasible in every state.
pub fn all_feasible_policies(model: &Model) -> Vec<StationaryPolicy> {
    let space = model.space();
    let choices: Vec<Vec<Action>> = space.states().map(|x| model.feasible_actions(&x)).collect();
    let count: usize = choices.iter().map(Vec::len).product();
    (0..count)
        .map(|mut code| {
            let actions = choices
                .iter()
                .map(|c| {
                    let a = c[code % c.len()];
                    code /= c.len();
                    a
                })
                .collect();
            StationaryPolicy::new(space, actions).unwrap()
        })
        .collect()
}
