//! Unrolled sequence models: forward pass, BPTT, losses, optimizers and the
//! finite-difference gradient check.

mod gradcheck;
mod model;
mod optim;
mod train;
mod unroll;

pub use gradcheck::{
    finite_diff_grad, gradient_check, gradient_check_with, relative_error, GradCheckReport,
    REL_ERR_FLOOR,
};
pub use model::{GradStore, LossKind, Model, Params};
pub use optim::{clip_global_norm, OptimizerConfig, OptimizerKind, OptimizerState};
pub use train::{evaluate, EpochReport, EvalStats, SequenceSource, TrainConfig, Trainer};
pub use unroll::{
    argmax, batch_loss, batch_loss_and_grad, batch_loss_and_grad_with, bptt_accumulate,
    bptt_backward, sequence_loss, softmax_xent, unroll_forward, unroll_forward_from, CellState,
    Sequence, Trajectory,
};
