//! Seeded Monte Carlo of the slotted system.
//!
//! Per slot, in this order: the policy picks `u` from the current state, the
//! cost `g(x, u)` is charged, then the harvested energy `A`, a possible
//! catalog update and the next request are drawn. The generator is ChaCha8
//! seeded with `seed_from_u64`, so a given seed reproduces a trajectory
//! bit for bit.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::error::{invalid, Result};
use crate::mdp::{Action, EnergyArrival, Model, SystemState};
use crate::policy::StationaryPolicy;
use crate::report::{BlockingReport, Provenance};

pub const DEFAULT_WARMUP: u64 = 10_000;
const BATCHES: u64 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Total slots `K`, warm-up included.
    pub slots: u64,
    /// Leading slots excluded from every statistic.
    pub warmup: u64,
    pub seed: u64,
    pub initial: SystemState,
}

impl SimConfig {
    pub fn new(slots: u64, seed: u64) -> Self {
        Self {
            slots,
            warmup: DEFAULT_WARMUP.min(slots.saturating_sub(1)),
            seed,
            initial: SystemState::EMPTY,
        }
    }

    pub fn counted(&self) -> u64 {
        self.slots - self.warmup
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Blocked slots `K_bar` in the counted window.
    pub blocked: u64,
    pub counted_slots: u64,
    /// Slots that carried a content request (served from the pushed set or not).
    pub requests: u64,
    /// `K_bar / counted_slots`, the primary estimate.
    pub blocking: f64,
    /// `K_bar / requests`.
    pub blocking_per_request: f64,
    /// Binomial standard error of `blocking`.
    pub sigma: f64,
    /// 95% confidence radius, `1.96 * sigma`.
    pub ci_radius: f64,
    /// Standard error from batch means; larger than `sigma` when slots are correlated.
    pub batch_sigma: f64,
    /// Frequency of sleep, unicast and push.
    pub action_frequency: [f64; 3],
    pub mean_battery: f64,
}

impl SimReport {
    pub fn to_blocking_report(&self) -> BlockingReport {
        BlockingReport {
            provenance: Provenance::MonteCarlo,
            blocking: self.blocking,
            samples: Some(self.counted_slots),
            ci_radius: Some(self.ci_radius),
        }
    }
}

enum ArrivalSampler {
    Fixed(u32),
    Poisson(Poisson<f64>),
    Table(WeightedIndex<f64>),
}

/// Samples slot transitions of one model.
pub struct Sampler<'a> {
    model: &'a Model,
    arrivals: ArrivalSampler,
    ranks: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a Model) -> Result<Self> {
        let arrivals = match &model.params().arrivals {
            EnergyArrival::Deterministic { units } => ArrivalSampler::Fixed(*units),
            EnergyArrival::Poisson { mean } if *mean == 0.0 => ArrivalSampler::Fixed(0),
            EnergyArrival::Poisson { mean } => ArrivalSampler::Poisson(
                Poisson::new(*mean).map_err(|e| invalid("arrival mean", e.to_string()))?,
            ),
            EnergyArrival::Pmf(p) => ArrivalSampler::Table(
                WeightedIndex::new(p).map_err(|e| invalid("arrival pmf", e.to_string()))?,
            ),
        };
        let ranks = WeightedIndex::new(model.catalog().popularity())
            .map_err(|e| invalid("popularity", e.to_string()))?;
        Ok(Self {
            model,
            arrivals,
            ranks,
        })
    }

    fn harvest(&self, rng: &mut impl Rng) -> u64 {
        match &self.arrivals {
            ArrivalSampler::Fixed(a) => *a as u64,
            ArrivalSampler::Poisson(p) => p.sample(rng) as u64,
            ArrivalSampler::Table(t) => t.sample(rng) as u64,
        }
    }

    /// Next state and whether a content request arrived; no feasibility check.
    fn advance(&self, x: &SystemState, action: Action, rng: &mut impl Rng) -> (SystemState, bool) {
        let space = self.model.space();
        let cat = self.model.catalog();
        let grid = self.model.grid();

        let harvested = self.harvest(rng);
        let left = (x.energy - self.model.spend(x, action)) as u64;
        let energy = (left + harvested).min(space.battery_units as u64) as u32;

        let mut pushed = x.pushed;
        if rng.random::<f64>() < cat.update_prob() {
            let replaced = rng.random_range(1..=space.contents);
            if replaced <= x.pushed {
                pushed -= 1;
            }
        }
        if action == Action::Push {
            pushed += 1;
        }

        let mut next = SystemState::new(energy, 0, false, pushed);
        let requested = rng.random::<f64>() < self.model.params().request_prob;
        if requested {
            let rank = self.ranks.sample(rng) as u32 + 1;
            if rank > pushed {
                let d = grid.radius() * rng.random::<f64>().sqrt();
                next.request = grid.class_of(d) as u32;
                next.targets_next = rank == pushed + 1;
            }
        }
        (next, requested)
    }

    /// One slot: `(next state, cost)`.
    pub fn step(&self, x: &SystemState, action: Action, rng: &mut impl Rng) -> Result<(SystemState, f64)> {
        if !self.model.is_feasible(x, action) {
            return Err(crate::error::Error::InfeasibleAction {
                state: x.to_string(),
                action,
            });
        }
        let cost = Model::stage_cost(x, action);
        Ok((self.advance(x, action, rng).0, cost))
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `policy` for `config.slots` slots and aggregates the counted window.
pub fn run(model: &Model, policy: &StationaryPolicy, config: &SimConfig) -> Result<SimReport> {
    if config.slots <= config.warmup {
        return Err(invalid("horizon", "must exceed the warm-up"));
    }
    if !model.space().contains(&config.initial) {
        return Err(invalid("initial state", "outside the state space"));
    }
    policy.validate(model)?;
    let sampler = Sampler::new(model)?;
    let mut rng = rng_from_seed(config.seed);

    let counted = config.counted();
    let batch_len = (counted / BATCHES).max(1);
    let mut batch_blocked = Vec::with_capacity(BATCHES as usize + 1);
    let mut in_batch = 0u64;
    let mut batch_cost = 0u64;

    let mut x = config.initial;
    let mut requested = false;
    let (mut blocked, mut requests, mut battery) = (0u64, 0u64, 0u64);
    let mut actions = [0u64; 3];
    for k in 0..config.slots {
        let u = policy.action_at(&x);
        debug_assert!(model.is_feasible(&x, u));
        if k >= config.warmup {
            let cost = Model::stage_cost(&x, u) as u64;
            blocked += cost;
            requests += requested as u64;
            battery += x.energy as u64;
            actions[u.index()] += 1;
            batch_cost += cost;
            in_batch += 1;
            if in_batch == batch_len {
                batch_blocked.push(batch_cost as f64 / batch_len as f64);
                in_batch = 0;
                batch_cost = 0;
            }
        }
        let (next, req) = sampler.advance(&x, u, &mut rng);
        x = next;
        requested = req;
    }

    let n = counted as f64;
    let blocking = blocked as f64 / n;
    let sigma = (blocking * (1.0 - blocking) / n).sqrt();
    let batch_sigma = batch_std_error(&batch_blocked);
    Ok(SimReport {
        blocked,
        counted_slots: counted,
        requests,
        blocking,
        blocking_per_request: if requests > 0 {
            blocked as f64 / requests as f64
        } else {
            0.0
        },
        sigma,
        ci_radius: 1.96 * sigma,
        batch_sigma,
        action_frequency: actions.map(|a| a as f64 / n),
        mean_battery: battery as f64 / n,
    })
}

fn batch_std_error(means: &[f64]) -> f64 {
    let b = means.len();
    if b < 2 {
        return f64::NAN;
    }
    let mean = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}
