use crate::error::{Error, Result};
use crate::mdp::{Action, Model, StateSpace, SystemState};

/// Deterministic stationary policy: one action per state in the documented order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationaryPolicy {
    space: StateSpace,
    actions: Vec<Action>,
}

impl StationaryPolicy {
    pub fn new(space: StateSpace, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != space.len() {
            return Err(Error::PolicySize {
                expected: space.len(),
                got: actions.len(),
            });
        }
        Ok(Self { space, actions })
    }

    pub fn from_fn(space: StateSpace, mut f: impl FnMut(&SystemState) -> Action) -> Self {
        let actions = space.states().map(|s| f(&s)).collect();
        Self { space, actions }
    }

    /// The policy that always sleeps; feasible for every model.
    pub fn all_sleep(space: StateSpace) -> Self {
        Self {
            space,
            actions: vec![Action::Sleep; space.len()],
        }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn action(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn action_at(&self, state: &SystemState) -> Action {
        self.actions[self.space.index(state)]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Checks the policy matches the model's state space and only picks feasible actions.
    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.space != model.space() {
            return Err(Error::PolicySize {
                expected: model.space().len(),
                got: self.actions.len(),
            });
        }
        for (i, &a) in self.actions.iter().enumerate() {
            let x = self.space.state(i);
            if !model.is_feasible(&x, a) {
                return Err(Error::InfeasibleAction {
                    state: x.to_string(),
                    action: a,
                });
            }
        }
        Ok(())
    }

    /// Number of states where the two policies disagree.
    pub fn differences(&self, other: &StationaryPolicy) -> usize {
        self.actions
            .iter()
            .zip(&other.actions)
            .filter(|(a, b)| a != b)
            .count()
    }
}
