use std::cell::OnceCell;

use super::{FieldState, Model, RadialGrid};
use crate::energy::Profile;
use crate::error::Result;

/// Everything a recorder may look at after a step.
pub struct Frame<'a> {
    pub step: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub state: &'a FieldState,
    pub grid: &'a RadialGrid,
    pub model: &'a Model,
    profile: OnceCell<Profile>,
}

impl<'a> Frame<'a> {
    pub fn new(
        step: usize,
        n_steps: usize,
        dt: f64,
        state: &'a FieldState,
        grid: &'a RadialGrid,
        model: &'a Model,
    ) -> Self {
        Self {
            step,
            n_steps,
            dt,
            state,
            grid,
            model,
            profile: OnceCell::new(),
        }
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn is_first(&self) -> bool {
        self.step == 0
    }

    pub fn is_last(&self) -> bool {
        self.step == self.n_steps
    }

    /// Pointwise derivatives and densities, computed once per step and shared
    /// by every recorder.
    pub fn profile(&self) -> &Profile {
        self.profile
            .get_or_init(|| Profile::compute(self.state, self.grid, self.model))
    }
}

/// Observer invoked at `t = 0` and after every step of [`super::evolve`].
pub trait Recorder {
    fn name(&self) -> &'static str;

    fn record(&mut self, frame: &Frame<'_>) -> Result<()>;
}
