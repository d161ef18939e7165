//! Vanilla and refined LSTM, GRU and MGU cells.
//!
//! A refined gate adds a shortcut from the cell input to the gate output:
//! `g = σ(W·x + U·h + b) ⋄ x` with `⋄` elementwise `+` or `×`. The gate
//! output becomes unbounded, so refinement is only allowed on gates that do
//! not drive the state interpolation (LSTM input/output, GRU reset, MGU
//! forget inside the reset product).

mod config;
mod params;
mod refine;
mod step;

pub use config::{Arch, CellConfig, Gate, GateSelect, RefineMode};
pub use params::{Affine, Block, CellParams, UnitParams};
pub use refine::{refine, refine_backward};
pub use step::{
    cell_step_backward, cell_step_backward_with, gru_step_forward, lstm_step_forward,
    mgu_step_forward, step_forward, BackwardOptions, StepCache, StepGrads,
};
