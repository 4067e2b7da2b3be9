//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{all_feasible_policies, brute_force_row, model};
use pushcell_core::dp::policy_iteration;
use pushcell_core::experiment::{row_seed, run_experiment, ExperimentSpec, ResultTable, Scenario};
use pushcell_core::markov::{analyze_policy, blocking_probability, induced_chain, push_frequency, stationary_distribution};
use pushcell_core::mdp::EnergyArrival;
use pushcell_core::sim::{self, SimConfig};
use pushcell_core::threshold::{
    build_policy, lemma1_push_probability, lemma2_lower_bound, spec_for, theorem1_blocking, theorem2_blocking,
    PolicyKind, ThresholdPolicySpec,
};
use pushcell_core::{Model, Provenance, SystemState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn paper(update_prob: f64, request_prob: f64, mean_arrival: f64, battery_units: u32) -> Scenario {
    let mut s = Scenario::paper_v();
    s.update_prob = update_prob;
    s.request_prob = request_prob;
    s.mean_arrival = mean_arrival;
    s.battery_units = battery_units;
    s
}

fn threshold_fsmc(s: &Scenario, kind: PolicyKind) -> (ThresholdPolicySpec, f64) {
    let params = s.params().unwrap();
    let m = Model::new(params.clone()).unwrap();
    let spec = spec_for(kind, &params).unwrap();
    let a = analyze_policy(&m, &build_policy(&spec, &m).unwrap()).unwrap();
    (spec, a.blocking)
}

fn kernel_correctness() -> Outcome {
    let m = Model::new(Scenario::paper_v().params().unwrap()).unwrap();
    let space = m.space();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sampled = 0;
    let mut worst_sum: f64 = 0.0;
    while sampled < 2000 {
        let x = space.state(rng.random_range(0..space.len()));
        let actions = m.feasible_actions(&x);
        let u = actions[rng.random_range(0..actions.len())];
        let total: f64 = m.transition(&x, u).unwrap().iter().map(|e| e.1).sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
        sampled += 1;
    }

    let pmf = vec![0.3, 0.25, 0.2, 0.15, 0.07, 0.03];
    let small = model(3, 1, 2, 1.0, 0.9, 0.2, EnergyArrival::Pmf(pmf.clone()));
    let mut worst_entry: f64 = 0.0;
    for x in small.enumerate_states() {
        for u in small.feasible_actions(&x) {
            let oracle = brute_force_row(&small, &pmf, &x, u);
            let row = small.transition(&x, u).unwrap();
            let mut covered = 0.0;
            for &(j, p) in &row {
                let q = oracle.get(&j).copied().unwrap_or(0.0);
                worst_entry = worst_entry.max((p - q).abs());
                covered += q;
            }
            let oracle_total: f64 = oracle.values().sum();
            worst_entry = worst_entry.max((oracle_total - covered).abs());
        }
    }
    outcome(
        worst_sum < 1e-9 && worst_entry < 1e-12,
        format!("{sampled} rows, max |row sum - 1| = {worst_sum:.1e}; brute-force max error {worst_entry:.1e}"),
    )
}

fn lemma1_frequency() -> Outcome {
    let mut worst: f64 = 0.0;
    for pc in [0.2, 0.6] {
        for c_thr in [5u32, 10] {
            // Every slot brings E_p + l_M, so a push is always affordable.
            let m = model(10, 5, 20, 1.0, 0.9, pc, EnergyArrival::Deterministic { units: 10 });
            let spec = ThresholdPolicySpec {
                kind: PolicyKind::Potb,
                push_threshold: c_thr,
                unicast_class: 0,
                eta: 0.0,
                predicted: None,
            };
            let a = analyze_policy(&m, &build_policy(&spec, &m).unwrap()).unwrap();
            let expect = lemma1_push_probability(c_thr, pc, 20).unwrap();
            worst = worst.max((push_frequency(&a) - expect).abs());
        }
    }
    outcome(worst < 1e-6, format!("max |push frequency - p_c C/(N+p_c)| = {worst:.1e}"))
}

fn theorem1_ladder() -> Outcome {
    let ladder = [10u32, 20, 50, 100, 500];
    let values: Vec<f64> = ladder
        .iter()
        .map(|&e| threshold_fsmc(&paper(0.6, 0.9, 1.0, e), PolicyKind::Potb).1)
        .collect();
    let target = theorem1_blocking(&paper(0.6, 0.9, 1.0, 500).params().unwrap()).unwrap();
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    let gap = (values[ladder.len() - 1] - target).abs();
    let shown: Vec<String> = ladder.iter().zip(&values).map(|(e, v)| format!("{e}:{v:.6}")).collect();
    outcome(
        monotone && gap <= 0.01,
        format!("ladder [{}], closed form {target:.6}, gap {gap:.1e}, monotone {monotone}", shown.join(" ")),
    )
}

fn theorem2_desk() -> Outcome {
    let s = paper(0.2, 0.9, 1.0, 500);
    let (spec, fsmc) = threshold_fsmc(&s, PolicyKind::Eetb);
    let target = theorem2_blocking(&s.params().unwrap()).unwrap();
    let gap = (fsmc - target).abs();
    outcome(
        spec.push_threshold == 15 && gap <= 0.02,
        format!("C_EE = {}, FSMC {fsmc:.6}, prediction {target:.6}, gap {gap:.1e}", spec.push_threshold),
    )
}

fn dp_dominance() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for pc in [0.2, 0.6] {
        let mut s = paper(pc, 0.9, 1.0, 20);
        s.classes = 3;
        s.contents = 8;
        let params = s.params().unwrap();
        let m = Model::new(params.clone()).unwrap();
        let pi = policy_iteration(&m, None).unwrap();
        let lambda = pi.evaluation.gain;
        let monotone = pi.trace.windows(2).all(|w| w[1].gain <= w[0].gain + 1e-12);
        let worst_slack = PolicyKind::ALL
            .iter()
            .map(|&k| {
                let spec = spec_for(k, &params).unwrap();
                analyze_policy(&m, &build_policy(&spec, &m).unwrap()).unwrap().blocking - lambda
            })
            .fold(f64::INFINITY, f64::min);
        ok &= monotone && pi.bellman_residual < 1e-9 && worst_slack >= -1e-8;
        notes.push(format!(
            "p_c {pc}: lambda {lambda:.3e}, min slack {worst_slack:.1e}, residual {:.1e}, {} iterations",
            pi.bellman_residual,
            pi.trace.len()
        ));
    }
    outcome(ok, notes.join("; "))
}

fn micro_enumeration() -> Outcome {
    let m = model(1, 1, 1, 1.0, 0.8, 0.5, EnergyArrival::Pmf(vec![0.5, 0.5]));
    let start = m.space().index(&SystemState::EMPTY);
    let policies = all_feasible_policies(&m);
    let best = policies
        .iter()
        .filter_map(|p| {
            let dist = stationary_distribution(&induced_chain(&m, p).ok()?, start).ok()?;
            Some(blocking_probability(p, &dist))
        })
        .fold(f64::INFINITY, f64::min);
    let lambda = policy_iteration(&m, None).unwrap().evaluation.gain;
    outcome(
        (lambda - best).abs() < 1e-12,
        format!("{} states, {} policies, iteration {lambda:.12}, enumeration {best:.12}", m.space().len(), policies.len()),
    )
}

fn fig4(values: &[f64]) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset("fig4").unwrap();
    spec.values = values.to_vec();
    spec.policies = PolicyKind::ALL.to_vec();
    spec
}

fn mc_agreement(seed: u64) -> (Outcome, ResultTable) {
    let mut spec = fig4(&[0.2, 0.4]);
    spec.methods = vec![Provenance::Fsmc];
    let table = run_experiment(&spec).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = table.failures.is_empty();
    for (point, &pc) in spec.values.iter().enumerate() {
        let s = spec.scenario.with(spec.axis.unwrap(), pc).unwrap();
        let params = s.params().unwrap();
        let m = Model::new(params.clone()).unwrap();
        for (j, &kind) in PolicyKind::ALL.iter().enumerate() {
            let policy = build_policy(&spec_for(kind, &params).unwrap(), &m).unwrap();
            let fsmc = table.find(Some(pc), kind.name(), Provenance::Fsmc).unwrap().blocking.unwrap();
            let report = sim::run(&m, &policy, &SimConfig::new(1_000_000, row_seed(seed, point, j))).unwrap();
            let sigma = (fsmc * (1.0 - fsmc) / report.counted_slots as f64).sqrt();
            let z = (report.blocking - fsmc).abs() / sigma.max(f64::MIN_POSITIVE);
            worst = worst.max(z);
            ok &= (report.blocking - fsmc).abs() <= 3.0 * sigma;
        }
    }
    (outcome(ok, format!("10 runs of 10^6 slots, seed {seed}, worst |MC - FSMC| = {worst:.2} sigma")), table)
}

fn ordinal_fig4() -> (Outcome, ResultTable) {
    let mut spec = fig4(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
    spec.methods = vec![Provenance::Fsmc];
    let table = run_experiment(&spec).unwrap();
    let get = |pc: f64, k: PolicyKind| table.find(Some(pc), k.name(), Provenance::Fsmc).unwrap().blocking.unwrap();
    let push = [PolicyKind::Potb, PolicyKind::Aptb, PolicyKind::Eetb, PolicyKind::Gotb];

    let beats_sod = spec
        .values
        .iter()
        .filter(|&&pc| pc <= 0.4 + 1e-12)
        .all(|&pc| push.iter().all(|&k| get(pc, k) < get(pc, PolicyKind::ServiceOnDemand)));

    let diff: Vec<f64> = spec.values.iter().map(|&pc| get(pc, PolicyKind::Potb) - get(pc, PolicyKind::Eetb)).collect();
    let crosses = diff.iter().any(|&d| d < 0.0) && diff.iter().any(|&d| d > 0.0);

    let (lo, hi) = (spec.values[0], spec.values[spec.values.len() - 1]);
    let low_end = (get(lo, PolicyKind::Gotb) - get(lo, PolicyKind::Potb)).abs() <= 1e-9;
    let high_end = (get(hi, PolicyKind::Gotb) - get(hi, PolicyKind::Eetb)).abs() <= 1e-9;

    let detail = format!(
        "(a) push beats SOD for p_c <= 0.4: {beats_sod}; (b) POTB/EETB cross: {crosses}; \
         (c) GOTB = POTB at p_c {lo}: {low_end}, GOTB = EETB at p_c {hi}: {high_end} \
         (GOTB {:.6} vs EETB {:.6})",
        get(hi, PolicyKind::Gotb),
        get(hi, PolicyKind::Eetb)
    );
    (outcome(beats_sod && crosses && low_end && high_end, detail), table)
}

fn lemma2_floor(tables: &[&ResultTable], scenario: &Scenario) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for table in tables {
        for row in &table.rows {
            let (Some(c_thr), Some(blocking), Some(pc)) = (row.c_thr, row.blocking, row.sweep_value) else {
                continue;
            };
            if row.method != Provenance::Fsmc.as_str() {
                continue;
            }
            let s = scenario.with(pushcell_core::experiment::SweepAxis::UpdateProb, pc).unwrap();
            let floor = lemma2_lower_bound(c_thr, &s.params().unwrap()).unwrap();
            worst = worst.min(blocking - floor);
            checked += 1;
        }
    }
    outcome(checked > 0 && worst >= -1e-9, format!("{checked} FSMC rows, min blocking - floor = {worst:.3e}"))
}

fn report(results: &mut Vec<(usize, bool)>, id: usize, limit: Duration, run: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = run();
    let took = start.elapsed();
    let pass = o.pass && took <= limit;
    println!(
        "criterion {id}: {} ({:.1}s, limit {}s) {}",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        limit.as_secs(),
        o.detail
    );
    results.push((id, pass));
}

#[test]
fn acceptance_criteria() {
    let minute = Duration::from_secs(60);
    let mut results = Vec::new();
    report(&mut results, 1, minute, kernel_correctness);
    report(&mut results, 2, minute, lemma1_frequency);
    report(&mut results, 3, 10 * minute, theorem1_ladder);
    report(&mut results, 4, 10 * minute, theorem2_desk);
    report(&mut results, 5, 5 * minute, dp_dominance);
    report(&mut results, 6, minute, micro_enumeration);

    let mut tables = Vec::new();
    report(&mut results, 7, 10 * minute, || {
        let (o, t) = mc_agreement(42);
        tables.push(t);
        o
    });
    report(&mut results, 8, 15 * minute, || {
        let (o, t) = ordinal_fig4();
        tables.push(t);
        o
    });
    let scenario = ExperimentSpec::preset("fig4").unwrap().scenario;
    report(&mut results, 9, minute, || lemma2_floor(&tables.iter().collect::<Vec<_>>(), &scenario));

    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
