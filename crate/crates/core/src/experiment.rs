//! Presets, sweep execution and CSV output.
//!
//! A spec is a flat `key = value` text (see [`ExperimentSpec::apply`] for the
//! keys). Sweep points run in parallel on a rayon pool whose size comes from
//! `PUSHCELL_WORKERS` (or the `workers` key); rows are emitted in sweep
//! order, so the same spec and seed always give the same CSV bytes.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{build_distance_grid, ChannelParams, Fading, GridMode};
use crate::content::Catalog;
use crate::dp::policy_iteration;
use crate::error::{Error, Result};
use crate::markov::analyze_policy;
use crate::mdp::{EnergyArrival, Model, ModelParams};
use crate::report::Provenance;
use crate::sim::{self, SimConfig};
use crate::threshold::{build_policy, spec_for, PolicyKind};

pub const WORKERS_ENV: &str = "PUSHCELL_WORKERS";
pub const CSV_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "policy",
    "method",
    "blocking",
    "ci_radius",
    "c_thr",
    "m_thr",
    "seed",
    "slots",
];
pub const DEFAULT_DP_STATE_CAP: usize = 50_000;
const FSMC_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    UpdateProb,
    MeanArrival,
    RequestProb,
    Battery,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::UpdateProb => "p_c",
            SweepAxis::MeanArrival => "a_bar",
            SweepAxis::RequestProb => "p_u",
            SweepAxis::Battery => "e_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p_c" | "pc" | "update_prob" => Some(SweepAxis::UpdateProb),
            "a_bar" | "a" | "mean_arrival" => Some(SweepAxis::MeanArrival),
            "p_u" | "pu" | "request_prob" => Some(SweepAxis::RequestProb),
            "e_max" | "emax" | "battery" | "battery_units" => Some(SweepAxis::Battery),
            _ => None,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scenario constants; energies in units of `E_unit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub battery_units: u32,
    pub classes: u32,
    /// `E_p`; defaults to `M` units when unset.
    pub push_units: Option<u32>,
    pub contents: usize,
    pub skew: f64,
    pub update_prob: f64,
    pub request_prob: f64,
    /// Mean Poisson harvest per slot.
    pub mean_arrival: f64,
    pub bandwidth_hz: f64,
    /// `r0 / W`.
    pub spectral_efficiency: f64,
    pub pathloss_db: f64,
    pub pathloss_exponent: f64,
    pub radius_m: f64,
    pub edge_power_w: f64,
    pub slot_s: f64,
}

impl Scenario {
    /// Simulation constants of the reference setup: R = 50 m, r0/W = 1,
    /// beta = 10 dB, alpha = 2, Pt(R) = 1 W, M = 5, E_p = M, N = 20, v = 1.
    pub fn paper_v() -> Self {
        Self {
            battery_units: 50,
            classes: 5,
            push_units: None,
            contents: 20,
            skew: 1.0,
            update_prob: 0.2,
            request_prob: 0.9,
            mean_arrival: 1.0,
            bandwidth_hz: 1e6,
            spectral_efficiency: 1.0,
            pathloss_db: 10.0,
            pathloss_exponent: 2.0,
            radius_m: 50.0,
            edge_power_w: 1.0,
            slot_s: 1.0,
        }
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::calibrated(
            self.bandwidth_hz,
            self.spectral_efficiency * self.bandwidth_hz,
            10f64.powf(self.pathloss_db / 10.0),
            self.pathloss_exponent,
            self.radius_m,
            self.edge_power_w,
            self.slot_s,
            Fading::Rayleigh { mean_gain: 1.0 },
        )
    }

    pub fn params(&self) -> Result<ModelParams> {
        let grid = build_distance_grid(&self.channel()?, self.classes as usize, GridMode::UnitSteps)?;
        Ok(ModelParams {
            battery_units: self.battery_units,
            push_units: self.push_units.unwrap_or(self.classes),
            request_prob: self.request_prob,
            catalog: Catalog::new(self.contents, self.skew, self.update_prob)?,
            grid,
            arrivals: EnergyArrival::Poisson {
                mean: self.mean_arrival,
            },
        })
    }

    pub fn with(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut s = self.clone();
        match axis {
            SweepAxis::UpdateProb => s.update_prob = value,
            SweepAxis::MeanArrival => s.mean_arrival = value,
            SweepAxis::RequestProb => s.request_prob = value,
            SweepAxis::Battery => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("e_max must be a whole number, got {value}")));
                }
                s.battery_units = value as u32;
            }
        }
        Ok(s)
    }
}

/// What to evaluate for which policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: Scenario,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub methods: Vec<Provenance>,
    /// Monte Carlo horizon and warm-up.
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub dp_state_cap: usize,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
}

fn range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round12(lo + i as f64 * step)).collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl ExperimentSpec {
    pub const PRESETS: [&'static str; 5] = ["paper-v", "fig3", "fig4", "fig5", "fig6"];

    pub fn preset(name: &str) -> Result<Self> {
        let mut spec = Self {
            name: name.to_string(),
            scenario: Scenario::paper_v(),
            axis: None,
            values: Vec::new(),
            policies: PolicyKind::ALL.to_vec(),
            methods: vec![Provenance::ClosedForm, Provenance::Fsmc],
            slots: 1_000_000,
            warmup: sim::DEFAULT_WARMUP,
            seed: 1,
            dp_state_cap: DEFAULT_DP_STATE_CAP,
            workers: None,
            output: None,
        };
        let sc = &mut spec.scenario;
        match name {
            "paper-v" => {}
            "fig3" => {
                sc.mean_arrival = 1.0;
                sc.request_prob = 0.9;
                sc.update_prob = 0.6;
                spec.axis = Some(SweepAxis::Battery);
                spec.values = vec![10.0, 20.0, 50.0, 100.0, 200.0, 500.0];
                spec.policies = vec![PolicyKind::Potb, PolicyKind::Eetb];
            }
            "fig4" => {
                sc.mean_arrival = 1.5;
                sc.request_prob = 0.9;
                spec.axis = Some(SweepAxis::UpdateProb);
                spec.values = range(0.1, 0.6, 0.1);
                spec.methods.push(Provenance::Dp);
            }
            "fig5" => {
                sc.update_prob = 0.2;
                sc.request_prob = 0.9;
                spec.axis = Some(SweepAxis::MeanArrival);
                spec.values = range(0.5, 2.5, 0.25);
                spec.methods.push(Provenance::Dp);
            }
            "fig6" => {
                sc.mean_arrival = 0.75;
                sc.update_prob = 0.2;
                spec.axis = Some(SweepAxis::RequestProb);
                spec.values = range(0.1, 1.0, 0.1);
                spec.methods.push(Provenance::Dp);
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (expected one of {})",
                    Self::PRESETS.join(", ")
                )))
            }
        }
        Ok(spec)
    }

    /// Parses a config text, then applies `overrides` (`key=value` each).
    /// A `preset` key, if any, is applied first.
    pub fn from_config(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}`: expected key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let preset = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map_or("paper-v", |(_, v)| v.as_str());
        let mut spec = Self::preset(preset)?;
        for (k, v) in &pairs {
            if k != "preset" {
                spec.apply(k, v)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one key. Scenario keys: `e_max`, `classes`, `push_units`,
    /// `contents`, `skew`, `p_c`, `p_u`, `a_bar`, `bandwidth_hz`,
    /// `spectral_efficiency`, `pathloss_db`, `pathloss_exponent`, `radius`,
    /// `edge_power`, `slot_s`. Run keys: `name`, `sweep`, `values`,
    /// `policies`, `methods`, `slots`, `warmup`, `seed`, `dp_state_cap`,
    /// `workers`, `output`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        let sc = &mut self.scenario;
        match key {
            "name" => self.name = value.to_string(),
            "e_max" | "battery_units" => sc.battery_units = num(key, value)?,
            "classes" | "m" => sc.classes = num(key, value)?,
            "push_units" | "e_p" => sc.push_units = Some(num(key, value)?),
            "contents" | "n" => sc.contents = num(key, value)?,
            "skew" | "v" => sc.skew = num(key, value)?,
            "p_c" | "update_prob" => sc.update_prob = num(key, value)?,
            "p_u" | "request_prob" => sc.request_prob = num(key, value)?,
            "a_bar" | "mean_arrival" => sc.mean_arrival = num(key, value)?,
            "bandwidth_hz" => sc.bandwidth_hz = num(key, value)?,
            "spectral_efficiency" => sc.spectral_efficiency = num(key, value)?,
            "pathloss_db" => sc.pathloss_db = num(key, value)?,
            "pathloss_exponent" | "alpha" => sc.pathloss_exponent = num(key, value)?,
            "radius" => sc.radius_m = num(key, value)?,
            "edge_power" => sc.edge_power_w = num(key, value)?,
            "slot_s" => sc.slot_s = num(key, value)?,
            "sweep" => {
                self.axis = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(SweepAxis::parse(value).ok_or_else(|| {
                        Error::Config(format!("unknown sweep axis `{value}` (p_c, a_bar, p_u, e_max)"))
                    })?)
                }
            }
            "values" => self.values = parse_values(value)?,
            "policies" => {
                self.policies = split_list(value)
                    .map(|p| {
                        PolicyKind::parse(p).ok_or_else(|| Error::Config(format!("unknown policy `{p}`")))
                    })
                    .collect::<Result<_>>()?
            }
            "methods" => {
                self.methods = split_list(value)
                    .map(|m| {
                        Provenance::parse(m).ok_or_else(|| Error::Config(format!("unknown method `{m}`")))
                    })
                    .collect::<Result<_>>()?
            }
            "slots" => self.slots = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "dp_state_cap" => self.dp_state_cap = num(key, value)?,
            "workers" => self.workers = Some(num(key, value)?),
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() && !self.methods.contains(&Provenance::Dp) {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.policies.is_empty() && self.methods.iter().any(|&m| m != Provenance::Dp) {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.axis.is_some() && self.values.is_empty() {
            return Err(Error::Config("sweep axis given without values".into()));
        }
        if let Some(axis) = self.axis {
            for &v in &self.values {
                let ok = match axis {
                    SweepAxis::UpdateProb | SweepAxis::RequestProb => (0.0..=1.0).contains(&v),
                    SweepAxis::MeanArrival => v >= 0.0 && v.is_finite(),
                    SweepAxis::Battery => v >= 1.0 && v.fract() == 0.0,
                };
                if !ok {
                    return Err(Error::Config(format!("sweep value {v} is invalid for {axis}")));
                }
            }
        }
        if self.methods.contains(&Provenance::MonteCarlo) && self.slots <= self.warmup {
            return Err(Error::Config("slots must exceed warmup".into()));
        }
        for (_, s) in self.points()? {
            s.params()?.validate()?;
        }
        Ok(())
    }

    fn points(&self) -> Result<Vec<(Option<f64>, Scenario)>> {
        match self.axis {
            None => Ok(vec![(None, self.scenario.clone())]),
            Some(axis) => self
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.scenario.with(axis, v)?)))
                .collect(),
        }
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

/// `a,b,c` or `lo:hi:step`.
fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse values `{s}`"));
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if parts.len() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0] {
            return Err(bad());
        }
        return Ok(range(parts[0], parts[1], parts[2]));
    }
    split_list(s).map(|v| v.parse().map_err(|_| bad())).collect()
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub policy: String,
    pub method: String,
    pub blocking: Option<f64>,
    pub ci_radius: Option<f64>,
    pub c_thr: Option<u32>,
    pub m_thr: Option<u32>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub sweep_value: Option<f64>,
    pub policy: String,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<RowFailure>,
}

impl ResultTable {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn find(&self, sweep_value: Option<f64>, policy: &str, method: Provenance) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.sweep_value == sweep_value && r.policy == policy && r.method == method.as_str()
        })
    }
}

/// Seed of one Monte Carlo row, derived from the base seed.
pub fn row_seed(base: u64, point: usize, policy: usize) -> u64 {
    let mut z = base ^ ((point as u64) << 32 | policy as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn worker_count(spec: &ExperimentSpec) -> usize {
    spec.workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(spec))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let parts: Vec<ResultTable> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, (value, scenario))| run_point(spec, k, *value, scenario))
            .collect()
    });
    let mut table = ResultTable::default();
    for p in parts {
        table.rows.extend(p.rows);
        table.failures.extend(p.failures);
    }
    for f in &table.failures {
        warn!(
            "{} / {} at {:?}: {}",
            f.policy, f.method, f.sweep_value, f.message
        );
    }
    Ok(table)
}

fn run_point(spec: &ExperimentSpec, point: usize, value: Option<f64>, scenario: &Scenario) -> ResultTable {
    let mut table = ResultTable::default();
    let param = spec.axis.map_or(String::new(), |a| a.name().to_string());
    let blank = |policy: &str, method: Provenance| ResultRow {
        sweep_param: param.clone(),
        sweep_value: value,
        policy: policy.to_string(),
        method: method.as_str().to_string(),
        blocking: None,
        ci_radius: None,
        c_thr: None,
        m_thr: None,
        seed: None,
        slots: None,
    };
    let fail = |table: &mut ResultTable, policy: &str, method: Provenance, e: &Error| {
        table.failures.push(RowFailure {
            sweep_value: value,
            policy: policy.to_string(),
            method: method.as_str().to_string(),
            message: e.to_string(),
        });
    };

    let built = scenario.params().and_then(|p| Ok((Model::new(p.clone())?, p)));
    let (model, params) = match built {
        Ok(x) => x,
        Err(e) => {
            for &kind in &spec.policies {
                for &m in &spec.methods {
                    fail(&mut table, kind.name(), m, &e);
                }
            }
            return table;
        }
    };

    for (pi, &kind) in spec.policies.iter().enumerate() {
        let tspec = match spec_for(kind, &params) {
            Ok(s) => s,
            Err(e) => {
                for &m in &spec.methods {
                    fail(&mut table, kind.name(), m, &e);
                    table.rows.push(blank(kind.name(), m));
                }
                continue;
            }
        };
        let row = |method: Provenance| {
            let mut r = blank(kind.name(), method);
            if kind != PolicyKind::ServiceOnDemand {
                r.c_thr = Some(tspec.push_threshold);
            }
            if matches!(kind, PolicyKind::Eetb | PolicyKind::Gotb | PolicyKind::ServiceOnDemand) {
                r.m_thr = Some(tspec.unicast_class);
            }
            r
        };
        let policy = build_policy(&tspec, &model);
        for &method in &spec.methods {
            let started = Instant::now();
            let mut r = row(method);
            match method {
                Provenance::ClosedForm => r.blocking = tspec.predicted,
                Provenance::Fsmc => match policy.as_ref().map_err(clone_err).and_then(|p| analyze_policy(&model, p)) {
                    Ok(a) => r.blocking = Some(a.blocking),
                    Err(e) => fail(&mut table, kind.name(), method, &e),
                },
                Provenance::MonteCarlo => {
                    let seed = row_seed(spec.seed, point, pi);
                    let cfg = SimConfig {
                        slots: spec.slots,
                        warmup: spec.warmup,
                        seed,
                        initial: crate::mdp::SystemState::EMPTY,
                    };
                    r.seed = Some(seed);
                    r.slots = Some(spec.slots);
                    match policy.as_ref().map_err(clone_err).and_then(|p| sim::run(&model, p, &cfg)) {
                        Ok(s) => {
                            r.blocking = Some(s.blocking);
                            r.ci_radius = Some(s.ci_radius);
                        }
                        Err(e) => fail(&mut table, kind.name(), method, &e),
                    }
                }
                Provenance::Dp => continue,
            }
            info!(
                "{} {} at {:?}: {:?} in {:.3}s",
                kind.name(),
                method,
                value,
                r.blocking,
                started.elapsed().as_secs_f64()
            );
            table.rows.push(r);
        }
    }

    if spec.methods.contains(&Provenance::Dp) {
        let states = model.space().len();
        if states > spec.dp_state_cap {
            warn!(
                "skipping dp at {:?}: {states} states exceed the cap of {}",
                value, spec.dp_state_cap
            );
        } else {
            let started = Instant::now();
            let mut r = blank("optimal", Provenance::Dp);
            match policy_iteration(&model, None) {
                Ok(res) => {
                    r.blocking = Some(res.evaluation.gain);
                    info!(
                        "dp at {:?}: {:.12} after {} iterations in {:.3}s",
                        value,
                        res.evaluation.gain,
                        res.trace.len(),
                        started.elapsed().as_secs_f64()
                    );
                }
                Err(e) => fail(&mut table, "optimal", Provenance::Dp, &e),
            }
            table.rows.push(r);
        }
    }
    table
}

fn clone_err(e: &Error) -> Error {
    Error::Config(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub sweep_value: Option<f64>,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRanking {
    pub sweep_value: Option<f64>,
    pub method: String,
    /// `(policy, blocking)` from best to worst.
    pub ranking: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonSummary {
    pub rankings: Vec<PointRanking>,
    pub anomalies: Vec<Anomaly>,
}

/// Ranks policies per sweep value and method and flags dominance violations:
/// the DP optimum must not exceed any policy, and GOTB must not exceed the
/// other threshold policies. Exact methods use a `1e-8` slack, Monte Carlo
/// rows three combined standard errors.
pub fn compare_report(table: &ResultTable) -> ComparisonSummary {
    let mut summary = ComparisonSummary::default();
    let mut keys: Vec<(Option<f64>, String)> = Vec::new();
    for r in &table.rows {
        let k = (r.sweep_value, r.method.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let sigma = |r: &ResultRow| r.ci_radius.map_or(0.0, |c| c / 1.96);
    let slack = |a: &ResultRow, b: &ResultRow| {
        if a.method == Provenance::MonteCarlo.as_str() || b.method == Provenance::MonteCarlo.as_str() {
            3.0 * (sigma(a).powi(2) + sigma(b).powi(2)).sqrt()
        } else {
            FSMC_TOLERANCE
        }
    };
    for (value, method) in keys {
        let rows: Vec<&ResultRow> = table
            .rows
            .iter()
            .filter(|r| r.sweep_value == value && r.method == method && r.blocking.is_some())
            .collect();
        let mut ranking: Vec<(String, f64)> =
            rows.iter().map(|r| (r.policy.clone(), r.blocking.unwrap())).collect();
        ranking.sort_by(|a, b| a.1.total_cmp(&b.1));
        summary.rankings.push(PointRanking {
            sweep_value: value,
            method: method.clone(),
            ranking,
        });

        let mut flag = |msg: String| {
            summary.anomalies.push(Anomaly {
                sweep_value: value,
                method: method.clone(),
                message: msg,
            })
        };
        if let Some(gotb) = rows.iter().find(|r| r.policy == PolicyKind::Gotb.name()) {
            for other in rows.iter().filter(|r| {
                [PolicyKind::Potb, PolicyKind::Aptb, PolicyKind::Eetb]
                    .iter()
                    .any(|k| k.name() == r.policy)
            }) {
                let (g, o) = (gotb.blocking.unwrap(), other.blocking.unwrap());
                if g > o + slack(gotb, other) {
                    flag(format!("gotb {g} exceeds {} {o}", other.policy));
                }
            }
        }
    }
    // DP rows are compared against every policy at the same sweep value.
    for dp in table.rows.iter().filter(|r| r.method == Provenance::Dp.as_str() && r.blocking.is_some()) {
        let d = dp.blocking.unwrap();
        for other in table.rows.iter().filter(|r| {
            r.sweep_value == dp.sweep_value
                && r.method != Provenance::Dp.as_str()
                && r.method != Provenance::ClosedForm.as_str()
                && r.blocking.is_some()
        }) {
            let o = other.blocking.unwrap();
            if d > o + slack(dp, other) {
                summary.anomalies.push(Anomaly {
                    sweep_value: dp.sweep_value,
                    method: other.method.clone(),
                    message: format!("dp optimum {d} exceeds {} {o}", other.policy),
                });
            }
        }
    }
    summary
}
