//! State space, actions, per-slot cost and the exact transition kernel.
//!
//! State order (part of the policy file contract): index
//! `((E * (2M + 1)) + qi) * (N + 1) + C`, where the request axis `qi` encodes
//! `(Q, I)` as `(0,0) -> 0`, `(m,0) -> 2m - 1`, `(m,1) -> 2m`.
//!
//! The kernel factorizes as
//! `Pr(E' | E, Q, u) * Pr(C' | C, u) * Pr(Q', I' | C')`. Every consumer
//! (dynamic programming, chain analysis, the simulator's oracle tests) goes
//! through the three factor functions below.

use std::fmt;

use log::warn;

use crate::channel::DistanceGrid;
use crate::content::Catalog;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Sleep = 0,
    Unicast = 1,
    Push = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Sleep, Action::Unicast, Action::Push];

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Action::Sleep),
            1 => Some(Action::Unicast),
            2 => Some(Action::Push),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemState {
    /// Battery level in energy units.
    pub energy: u32,
    /// Request class `Q`; 0 means no request needing the base station.
    pub request: u32,
    /// `I`: the request targets rank `C + 1`, the content a push would deliver.
    pub targets_next: bool,
    /// Number of head contents already pushed to users.
    pub pushed: u32,
}

impl SystemState {
    pub const EMPTY: SystemState = SystemState {
        energy: 0,
        request: 0,
        targets_next: false,
        pushed: 0,
    };

    pub fn new(energy: u32, request: u32, targets_next: bool, pushed: u32) -> Self {
        Self {
            energy,
            request,
            targets_next,
            pushed,
        }
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(E={}, Q={}, I={}, C={})",
            self.energy, self.request, self.targets_next as u8, self.pushed
        )
    }
}

/// Dimensions of the enumerated state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub battery_units: u32,
    pub classes: u32,
    pub contents: u32,
}

impl StateSpace {
    pub fn new(battery_units: u32, classes: u32, contents: u32) -> Self {
        Self {
            battery_units,
            classes,
            contents,
        }
    }

    pub fn request_levels(&self) -> usize {
        2 * self.classes as usize + 1
    }

    pub fn len(&self) -> usize {
        (self.battery_units as usize + 1) * self.request_levels() * (self.contents as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of `(E, C)` pairs.
    pub fn lumped_len(&self) -> usize {
        (self.battery_units as usize + 1) * (self.contents as usize + 1)
    }

    pub fn request_index(request: u32, targets_next: bool) -> usize {
        match (request, targets_next) {
            (0, _) => 0,
            (m, false) => 2 * m as usize - 1,
            (m, true) => 2 * m as usize,
        }
    }

    pub fn request_of(qi: usize) -> (u32, bool) {
        if qi == 0 {
            (0, false)
        } else {
            (qi.div_ceil(2) as u32, qi.is_multiple_of(2))
        }
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.energy <= self.battery_units
            && s.request <= self.classes
            && s.pushed <= self.contents
            && !(s.request == 0 && s.targets_next)
    }

    pub fn index(&self, s: &SystemState) -> usize {
        debug_assert!(self.contains(s));
        let qi = Self::request_index(s.request, s.targets_next);
        (s.energy as usize * self.request_levels() + qi) * (self.contents as usize + 1)
            + s.pushed as usize
    }

    pub fn state(&self, index: usize) -> SystemState {
        let width = self.contents as usize + 1;
        let pushed = (index % width) as u32;
        let rest = index / width;
        let qi = rest % self.request_levels();
        let energy = (rest / self.request_levels()) as u32;
        let (request, targets_next) = Self::request_of(qi);
        SystemState {
            energy,
            request,
            targets_next,
            pushed,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    /// Index of an `(E, C)` pair in push-count-major order: `C * (E_max + 1) + E`.
    pub fn lumped_index(&self, energy: u32, pushed: u32) -> usize {
        pushed as usize * (self.battery_units as usize + 1) + energy as usize
    }
}

/// Per-slot harvested energy distribution, in energy units.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyArrival {
    Poisson { mean: f64 },
    Deterministic { units: u32 },
    /// `pmf[i]` is the probability that `i` units arrive.
    Pmf(Vec<f64>),
}

impl EnergyArrival {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnergyArrival::Poisson { mean } => {
                if !(*mean >= 0.0) || !mean.is_finite() {
                    return Err(invalid("arrival mean", "must be finite and >= 0"));
                }
            }
            EnergyArrival::Deterministic { .. } => {}
            EnergyArrival::Pmf(p) => {
                if p.is_empty() || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return Err(invalid("arrival pmf", "entries must lie in [0, 1]"));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid("arrival pmf", format!("sums to {s}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            EnergyArrival::Poisson { mean } => *mean,
            EnergyArrival::Deterministic { units } => *units as f64,
            EnergyArrival::Pmf(p) => p.iter().enumerate().map(|(i, q)| i as f64 * q).sum(),
        }
    }

    /// `p_a(0..len)`.
    pub fn pmf_table(&self, len: usize) -> Vec<f64> {
        match self {
            EnergyArrival::Poisson { mean } => {
                if *mean == 0.0 {
                    let mut t = vec![0.0; len];
                    if len > 0 {
                        t[0] = 1.0;
                    }
                    return t;
                }
                let ln_mean = mean.ln();
                let mut ln_fact = 0.0;
                (0..len)
                    .map(|i| {
                        if i > 0 {
                            ln_fact += (i as f64).ln();
                        }
                        (i as f64 * ln_mean - mean - ln_fact).exp()
                    })
                    .collect()
            }
            EnergyArrival::Deterministic { units } => {
                (0..len).map(|i| if i == *units as usize { 1.0 } else { 0.0 }).collect()
            }
            EnergyArrival::Pmf(p) => (0..len).map(|i| p.get(i).copied().unwrap_or(0.0)).collect(),
        }
    }

    /// `sum_{i >= k} p_a(i)` for `k = 0..len`.
    pub fn tail_table(&self, len: usize) -> Vec<f64> {
        match self {
            EnergyArrival::Poisson { mean } => {
                let table = self.pmf_table(len);
                let mut out = Vec::with_capacity(len);
                let mut cdf_below = 0.0;
                for k in 0..len {
                    if k > 0 {
                        cdf_below += table[k - 1];
                    }
                    if cdf_below < 0.5 {
                        out.push((1.0 - cdf_below).max(0.0));
                    } else {
                        out.push(poisson_upper_sum(*mean, k, table[k]));
                    }
                }
                out
            }
            EnergyArrival::Deterministic { units } => {
                (0..len).map(|k| if k <= *units as usize { 1.0 } else { 0.0 }).collect()
            }
            EnergyArrival::Pmf(p) => {
                let mut out = vec![0.0; len];
                let mut acc = 0.0;
                for k in (0..len.max(p.len())).rev() {
                    acc += p.get(k).copied().unwrap_or(0.0);
                    if k < len {
                        out[k] = acc;
                    }
                }
                if len > 0 {
                    out[0] = 1.0;
                }
                out
            }
        }
    }
}

/// Direct upper-tail sum of a Poisson pmf starting at term `first = p(k)`.
fn poisson_upper_sum(mean: f64, k: usize, first: f64) -> f64 {
    let mut term = first;
    let mut sum = 0.0;
    let mut i = k;
    loop {
        sum += term;
        i += 1;
        term *= mean / i as f64;
        if term == 0.0 || (i as f64 > mean && term < sum * 1e-18) || i > k + 100_000 {
            break;
        }
    }
    sum
}

/// Scenario constants of the discrete model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `E_max`: battery capacity in energy units.
    pub battery_units: u32,
    /// `E_p`: energy units spent by one push.
    pub push_units: u32,
    /// `p_u`: per-slot request probability.
    pub request_prob: f64,
    pub catalog: Catalog,
    pub grid: DistanceGrid,
    pub arrivals: EnergyArrival,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.request_prob) {
            return Err(invalid("request probability", "must lie in [0, 1]"));
        }
        if self.push_units == 0 {
            return Err(invalid("push energy", "must be >= 1 unit"));
        }
        if self.push_units > self.battery_units {
            return Err(invalid("push energy", "exceeds battery capacity"));
        }
        let top = *self.grid.multipliers().last().unwrap();
        if top > self.battery_units {
            return Err(invalid("unicast energy", "largest class exceeds battery capacity"));
        }
        self.arrivals.validate()?;
        if top != self.push_units {
            warn!(
                "push energy {} units differs from the largest unicast class {} units",
                self.push_units, top
            );
        }
        Ok(())
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(
            self.battery_units,
            self.grid.classes() as u32,
            self.catalog.size() as u32,
        )
    }
}

/// Validated parameters plus the lookup tables the kernel needs.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    space: StateSpace,
    arrival_pmf: Vec<f64>,
    arrival_tail: Vec<f64>,
    /// `request[c][qi] = Pr(Q', I' | C' = c)`.
    request: Vec<Vec<f64>>,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let space = params.space();
        let len = params.battery_units as usize + 1;
        let arrival_pmf = params.arrivals.pmf_table(len);
        let arrival_tail = params.arrivals.tail_table(len + 1);
        let request = (0..=space.contents)
            .map(|c| request_pmf(&params, c))
            .collect();
        Ok(Self {
            params,
            space,
            arrival_pmf,
            arrival_tail,
            request,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn catalog(&self) -> &Catalog {
        &self.params.catalog
    }

    pub fn grid(&self) -> &DistanceGrid {
        &self.params.grid
    }

    /// Mean harvested energy per slot, in units.
    pub fn mean_arrival(&self) -> f64 {
        self.params.arrivals.mean()
    }

    pub fn enumerate_states(&self) -> Vec<SystemState> {
        self.space.states().collect()
    }

    /// Energy units consumed by `action` in state `x`.
    pub fn spend(&self, x: &SystemState, action: Action) -> u32 {
        match action {
            Action::Sleep => 0,
            Action::Unicast => self.params.grid.multiplier(x.request as usize),
            Action::Push => self.params.push_units,
        }
    }

    pub fn is_feasible(&self, x: &SystemState, action: Action) -> bool {
        match action {
            Action::Sleep => true,
            Action::Unicast => {
                x.request > 0 && x.energy >= self.params.grid.multiplier(x.request as usize)
            }
            Action::Push => {
                x.energy >= self.params.push_units && x.pushed < self.space.contents
            }
        }
    }

    pub fn feasible_actions(&self, x: &SystemState) -> Vec<Action> {
        Action::ALL
            .into_iter()
            .filter(|&a| self.is_feasible(x, a))
            .collect()
    }

    /// 1 if a pending request is neither unicast nor covered by the push.
    pub fn stage_cost(x: &SystemState, action: Action) -> f64 {
        let covered = action == Action::Unicast || (x.targets_next && action == Action::Push);
        if x.request > 0 && !covered {
            1.0
        } else {
            0.0
        }
    }

    fn check(&self, x: &SystemState, action: Action) -> Result<()> {
        if !self.is_feasible(x, action) {
            return Err(Error::InfeasibleAction {
                state: x.to_string(),
                action,
            });
        }
        Ok(())
    }

    /// `Pr(E' | E, Q, u)` as `(E', p)` pairs in increasing `E'`.
    pub fn energy_transition(&self, energy: u32, request: u32, action: Action) -> Result<Vec<(u32, f64)>> {
        let x = SystemState::new(energy, request, false, 0);
        let spend = self.spend(&x, action);
        if spend > energy || energy > self.space.battery_units {
            return Err(invalid(
                "energy transition",
                format!("spend {spend} exceeds battery level {energy}"),
            ));
        }
        let mut out = Vec::new();
        self.for_each_energy(energy - spend, |e, p| out.push((e, p)));
        Ok(out)
    }

    /// Calls `f(E', p)` for `E' = min(E_max, base + A)`; zero entries are skipped.
    pub(crate) fn for_each_energy(&self, base: u32, mut f: impl FnMut(u32, f64)) {
        let e_max = self.space.battery_units;
        for e in base..e_max {
            let p = self.arrival_pmf[(e - base) as usize];
            if p > 0.0 {
                f(e, p);
            }
        }
        let p = self.arrival_tail[(e_max - base) as usize];
        if p > 0.0 {
            f(e_max, p);
        }
    }

    /// `Pr(C' | C, u)`.
    pub fn push_count_transition(&self, pushed: u32, action: Action) -> Result<Vec<(u32, f64)>> {
        if action == Action::Push && pushed >= self.space.contents {
            return Err(invalid("push count transition", "push requires C < N"));
        }
        let mut out = Vec::with_capacity(2);
        self.for_each_pushed(pushed, action, |c, p| out.push((c, p)));
        Ok(out)
    }

    pub(crate) fn for_each_pushed(&self, pushed: u32, action: Action, mut f: impl FnMut(u32, f64)) {
        let n = self.space.contents as f64;
        let evict = self.params.catalog.update_prob() * pushed as f64 / n;
        let (stay, up) = if action == Action::Push {
            (pushed, pushed + 1)
        } else if pushed == 0 {
            f(0, 1.0);
            return;
        } else {
            (pushed - 1, pushed)
        };
        // Push keeps C on an eviction, otherwise C + 1; sleep/unicast drop to C - 1 on an eviction.
        if evict > 0.0 {
            f(stay, evict);
        }
        if evict < 1.0 {
            f(up, 1.0 - evict);
        }
    }

    /// `Pr(Q', I' | C')` indexed by the request axis.
    pub fn request_transition(&self, pushed_next: u32) -> &[f64] {
        &self.request[pushed_next as usize]
    }

    /// Full next-state pmf as `(index, p)` pairs sorted by index.
    pub fn transition(&self, x: &SystemState, action: Action) -> Result<Vec<(usize, f64)>> {
        self.check(x, action)?;
        let mut out = Vec::new();
        self.for_each_successor(x, action, |i, p| out.push((i, p)));
        out.sort_unstable_by_key(|e| e.0);
        Ok(out)
    }

    /// Calls `f(index, p)` for every reachable successor; no feasibility check.
    pub(crate) fn for_each_successor(&self, x: &SystemState, action: Action, mut f: impl FnMut(usize, f64)) {
        let base = x.energy - self.spend(x, action);
        let levels = self.space.request_levels();
        let width = self.space.contents as usize + 1;
        self.for_each_energy(base, |e, pe| {
            self.for_each_pushed(x.pushed, action, |c, pc| {
                for (qi, &pq) in self.request[c as usize].iter().enumerate() {
                    if pq > 0.0 {
                        let idx = (e as usize * levels + qi) * width + c as usize;
                        f(idx, pe * pc * pq);
                    }
                }
            });
        });
    }

    /// Calls `f(E', C', p)` for the `(E, C)` part of the transition.
    pub(crate) fn for_each_lumped_successor(
        &self,
        x: &SystemState,
        action: Action,
        mut f: impl FnMut(u32, u32, f64),
    ) {
        let base = x.energy - self.spend(x, action);
        self.for_each_energy(base, |e, pe| {
            self.for_each_pushed(x.pushed, action, |c, pc| f(e, c, pe * pc));
        });
    }
}

fn request_pmf(params: &ModelParams, pushed_next: u32) -> Vec<f64> {
    let classes = params.grid.classes();
    let mut out = vec![0.0; 2 * classes + 1];
    let n = params.catalog.size() as u32;
    let pu = params.request_prob;
    if pushed_next >= n {
        out[0] = 1.0;
        return out;
    }
    let c = pushed_next as usize;
    let cat = &params.catalog;
    let next = cat.rank_prob(c + 1);
    let beyond = cat.tail(c + 1);
    let mut requested = 0.0;
    for m in 1..=classes {
        let frac = params.grid.annulus_fraction(m);
        out[2 * m] = pu * next * frac;
        out[2 * m - 1] = pu * beyond * frac;
        requested += out[2 * m] + out[2 * m - 1];
    }
    out[0] = (1.0 - pu) + pu * cat.head(c);
    debug_assert!((out[0] + requested - 1.0).abs() < 1e-12);
    out
}
