//! Threshold policies and their closed-form (infinite-battery) predictions.
//!
//! All energies here are in units of `E_unit`; `A` is the mean harvested
//! energy per slot.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::mdp::{Action, Model, ModelParams};
use crate::policy::StationaryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Push-only, threshold from the average push budget.
    Potb,
    /// Push-only with threshold `N`.
    Aptb,
    /// Push up to the break-even rank, spend the rest on near unicasts.
    Eetb,
    /// Best `(C_thr, m_thr)` by scanning thresholds `0..=C_PO`.
    Gotb,
    ServiceOnDemand,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Potb,
        PolicyKind::Aptb,
        PolicyKind::Eetb,
        PolicyKind::Gotb,
        PolicyKind::ServiceOnDemand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Potb => "potb",
            PolicyKind::Aptb => "aptb",
            PolicyKind::Eetb => "eetb",
            PolicyKind::Gotb => "gotb",
            PolicyKind::ServiceOnDemand => "sod",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "potb" => Some(PolicyKind::Potb),
            "aptb" => Some(PolicyKind::Aptb),
            "eetb" => Some(PolicyKind::Eetb),
            "gotb" => Some(PolicyKind::Gotb),
            "sod" | "service-on-demand" | "service_on_demand" | "ondemand" => {
                Some(PolicyKind::ServiceOnDemand)
            }
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicySpec {
    pub kind: PolicyKind,
    /// `C_thr`: push while fewer than this many head contents are pushed.
    pub push_threshold: u32,
    /// `m_thr`: unicast only to classes `1..=m_thr`; 0 disables unicast.
    pub unicast_class: u32,
    /// Rate of unicast requests once the threshold is reached.
    pub eta: f64,
    /// Infinite-battery blocking prediction, when a closed form exists.
    pub predicted: Option<f64>,
}

fn check_threshold(c_thr: u32, n: usize) -> Result<()> {
    if c_thr as usize > n {
        return Err(invalid("push threshold", format!("{c_thr} exceeds catalog size {n}")));
    }
    Ok(())
}

/// `floor` that tolerates representation error just below an integer.
fn floor_count(x: f64) -> u64 {
    if x.is_infinite() {
        return u64::MAX;
    }
    (x * (1.0 + 1e-12)).floor().max(0.0) as u64
}

fn cap(x: u64, n: usize) -> u32 {
    x.min(n as u64) as u32
}

/// Long-run push frequency `p_c C_thr / (N + p_c)` with ample energy.
pub fn lemma1_push_probability(c_thr: u32, update_prob: f64, contents: usize) -> Result<f64> {
    check_threshold(c_thr, contents)?;
    Ok(update_prob * c_thr as f64 / (contents as f64 + update_prob))
}

/// Blocking from requests for contents that were pushed and then replaced
/// before the replacement could be pushed.
pub fn lemma2_lower_bound(c_thr: u32, params: &ModelParams) -> Result<f64> {
    let cat = &params.catalog;
    let push = lemma1_push_probability(c_thr, cat.update_prob(), cat.size())?;
    Ok(push * params.request_prob * cat.tail(c_thr as usize))
}

/// `min(N, floor((N + p_c) A / (p_c E_p)))`; `N` when `p_c = 0`.
pub fn potb_threshold(params: &ModelParams) -> Result<u32> {
    let n = params.catalog.size();
    let pc = params.catalog.update_prob();
    let a = params.arrivals.mean();
    if params.push_units == 0 {
        return Err(invalid("push energy", "must be >= 1 unit"));
    }
    if pc == 0.0 {
        return Ok(n as u32);
    }
    let x = (n as f64 + pc) * a / (pc * params.push_units as f64);
    Ok(cap(floor_count(x), n))
}

/// Infinite-battery POTB blocking `p_u * sum_{i > C_PO} f_i`.
pub fn theorem1_blocking(params: &ModelParams) -> Result<f64> {
    let c = potb_threshold(params)?;
    Ok(params.request_prob * params.catalog.tail(c as usize))
}

/// Break-even push rank: rank `i` is worth pushing while
/// `E_p <= (N / p_c) p_u f_i E_u`.
pub fn ee_threshold(params: &ModelParams) -> Result<u32> {
    let cat = &params.catalog;
    let n = cat.size();
    let pc = cat.update_prob();
    let pu = params.request_prob;
    let eu = params.grid.mean_unicast_energy();
    let ep = params.push_units as f64;
    if pu == 0.0 || eu == 0.0 {
        return Ok(0);
    }
    if pc == 0.0 {
        return Ok(n as u32);
    }
    let v = cat.skew();
    if v == 0.0 {
        // Every rank has the same value; all or nothing.
        let worth = ep <= n as f64 / pc * pu * eu / n as f64 * (1.0 + 1e-12);
        return Ok(if worth { n as u32 } else { 0 });
    }
    let ratio = n as f64 * pu * eu / (pc * ep * cat.normalizer());
    Ok(cap(floor_count(ratio.powf(1.0 / v)), n))
}

/// Rate of unicast requests once `c_thr` contents are pushed:
/// `(1 - p_c C / (N + p_c)) p_u sum_{i > C} f_i`.
pub fn unicast_rate_beyond(c_thr: u32, params: &ModelParams) -> Result<f64> {
    let cat = &params.catalog;
    let push = lemma1_push_probability(c_thr, cat.update_prob(), cat.size())?;
    Ok((1.0 - push) * params.request_prob * cat.tail(c_thr as usize))
}

/// Average push energy per slot at threshold `c_thr`.
pub fn push_budget(c_thr: u32, params: &ModelParams) -> Result<f64> {
    let cat = &params.catalog;
    Ok(lemma1_push_probability(c_thr, cat.update_prob(), cat.size())? * params.push_units as f64)
}

/// Largest class `m` such that serving every unicast request from classes
/// `1..=m` fits in the energy left after pushing.
pub fn eetb_dtilde(params: &ModelParams, c_thr: u32) -> Result<u32> {
    let grid = &params.grid;
    let classes = grid.classes();
    let eta = unicast_rate_beyond(c_thr, params)?;
    if eta == 0.0 {
        return Ok(classes as u32);
    }
    let spare = (params.arrivals.mean() - push_budget(c_thr, params)?).max(0.0);
    let limit = grid.mean_unicast_energy().min(spare / eta);
    let slack = 1e-12 * (1.0 + limit.abs());
    let m = (0..=classes)
        .rev()
        .find(|&m| grid.partial_unicast_energy(m) <= limit + slack)
        .unwrap_or(0);
    Ok(m as u32)
}

/// `LB(C) + eta(C) * Pr(user beyond class m)`.
pub fn predicted_blocking(params: &ModelParams, c_thr: u32, unicast_class: u32) -> Result<f64> {
    let grid = &params.grid;
    let m = unicast_class as usize;
    if m > grid.classes() {
        return Err(invalid("unicast class", "exceeds the number of classes"));
    }
    let r = grid.radius();
    let d = grid.boundary(m);
    let beyond = ((r * r - d * d) / (r * r)).max(0.0);
    Ok(lemma2_lower_bound(c_thr, params)? + unicast_rate_beyond(c_thr, params)? * beyond)
}

/// Infinite-battery EETB blocking. Fails when the harvested energy cannot
/// even sustain the pushes, where no closed form exists.
pub fn theorem2_blocking(params: &ModelParams) -> Result<f64> {
    let c = ee_threshold(params)?;
    let budget = push_budget(c, params)?;
    let a = params.arrivals.mean();
    if a < budget * (1.0 - 1e-12) {
        return Err(Error::NoClosedForm(format!(
            "mean harvest {a} is below the push budget {budget} at threshold {c}"
        )));
    }
    let m = eetb_dtilde(params, c)?;
    predicted_blocking(params, c, m)
}

/// Scans `C = 0..=C_PO` and keeps the first strictly smaller prediction.
pub fn gotb_search(params: &ModelParams) -> Result<ThresholdPolicySpec> {
    let c_po = potb_threshold(params)?;
    let mut best: Option<(u32, u32, f64)> = None;
    for c in 0..=c_po {
        let m = eetb_dtilde(params, c)?;
        let pred = predicted_blocking(params, c, m)?;
        if best.is_none_or(|b| pred < b.2) {
            best = Some((c, m, pred));
        }
    }
    let (c, m, pred) = best.expect("scan covers C = 0");
    Ok(ThresholdPolicySpec {
        kind: PolicyKind::Gotb,
        push_threshold: c,
        unicast_class: m,
        eta: unicast_rate_beyond(c, params)?,
        predicted: Some(pred),
    })
}

/// Thresholds of a policy kind for the given scenario.
pub fn spec_for(kind: PolicyKind, params: &ModelParams) -> Result<ThresholdPolicySpec> {
    let n = params.catalog.size() as u32;
    let classes = params.grid.classes() as u32;
    let spec = |c: u32, m: u32, predicted: Option<f64>| -> Result<ThresholdPolicySpec> {
        Ok(ThresholdPolicySpec {
            kind,
            push_threshold: c,
            unicast_class: m,
            eta: unicast_rate_beyond(c, params)?,
            predicted,
        })
    };
    match kind {
        PolicyKind::Potb => {
            let c = potb_threshold(params)?;
            spec(c, 0, Some(theorem1_blocking(params)?))
        }
        PolicyKind::Aptb => {
            // The Theorem-1 form holds only if the harvest sustains pushing all N.
            let a = params.arrivals.mean();
            let predicted = (a >= push_budget(n, params)? * (1.0 - 1e-12)).then_some(0.0);
            spec(n, 0, predicted)
        }
        PolicyKind::Eetb => {
            let c = ee_threshold(params)?;
            let m = eetb_dtilde(params, c)?;
            spec(c, m, theorem2_blocking(params).ok())
        }
        PolicyKind::Gotb => gotb_search(params),
        PolicyKind::ServiceOnDemand => spec(0, classes, None),
    }
}

/// Materializes a spec as a per-state action table.
pub fn build_policy(spec: &ThresholdPolicySpec, model: &Model) -> Result<StationaryPolicy> {
    let space = model.space();
    check_threshold(spec.push_threshold, space.contents as usize)?;
    if spec.unicast_class > space.classes {
        return Err(invalid("unicast class", "exceeds the number of classes"));
    }
    let ep = model.params().push_units;
    let grid = model.grid();
    let c_thr = spec.push_threshold;
    let unicast = |x: &crate::mdp::SystemState, m_thr: u32| {
        if x.request > 0 && x.request <= m_thr && x.energy >= grid.multiplier(x.request as usize) {
            Action::Unicast
        } else {
            Action::Sleep
        }
    };
    let policy = StationaryPolicy::from_fn(space, |x| match spec.kind {
        PolicyKind::Potb | PolicyKind::Aptb => {
            if x.pushed < c_thr && x.energy >= ep {
                Action::Push
            } else {
                Action::Sleep
            }
        }
        PolicyKind::Eetb | PolicyKind::Gotb => {
            if x.pushed < c_thr {
                if x.energy >= ep {
                    Action::Push
                } else {
                    Action::Sleep
                }
            } else {
                unicast(x, spec.unicast_class)
            }
        }
        PolicyKind::ServiceOnDemand => unicast(x, space.classes),
    });
    policy.validate(model)?;
    Ok(policy)
}
