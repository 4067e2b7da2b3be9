//! Sleep / unicast / push control of an energy-harvesting small-cell base station.
//!
//! The crate is organized bottom-up:
//!
//! * [`channel`] and [`content`]: link budget, distance grid, Zipf catalog.
//! * [`mdp`]: state space, actions, stage cost and the exact transition kernel.
//! * [`dp`]: average-cost policy iteration.
//! * [`threshold`]: closed-form threshold policies and their predictions.
//! * [`markov`]: exact stationary evaluation of any fixed policy, on top of the
//!   subtraction-free block elimination in [`linalg`].
//! * [`sim`]: seeded Monte Carlo of the slotted system.
//! * [`experiment`]: presets, sweeps and CSV output used by the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod content;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod markov;
pub mod mdp;
pub mod policy;
pub mod policy_file;
pub mod report;
pub mod sim;
pub mod threshold;

pub use error::{Error, Result};
pub use mdp::{Action, EnergyArrival, Model, ModelParams, StateSpace, SystemState};
pub use policy::StationaryPolicy;
pub use report::{BlockingReport, Provenance};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::channel::DistanceGrid;
    use crate::content::Catalog;
    use crate::mdp::{EnergyArrival, Model, ModelParams};

    /// Equal-area grid on `R = 50`, push energy `E_p = M`, Zipf skew 1.
    pub fn small_model(
        battery_units: u32,
        classes: u32,
        contents: usize,
        request_prob: f64,
        update_prob: f64,
        arrivals: EnergyArrival,
    ) -> Model {
        Model::new(ModelParams {
            battery_units,
            push_units: classes,
            request_prob,
            catalog: Catalog::new(contents, 1.0, update_prob).unwrap(),
            grid: DistanceGrid::equal_area(classes, 50.0, 1.0).unwrap(),
            arrivals,
        })
        .unwrap()
    }
}
