//! Gated recurrent cells (LSTM, GRU, MGU) with refined gates, trained by
//! hand-written backpropagation through time.
//!
//! Everything numeric is generic over [`numkit::Scalar`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod cells;
pub mod cli;
pub mod engine;
pub mod error;
pub mod numkit;
pub mod probe;
pub mod store;
pub mod tasks;

pub use error::{Error, Result};

pub type Matrix64 = numkit::Matrix<f64>;
pub type Vector64 = numkit::Vector<f64>;
pub type CellParams64 = cells::CellParams<f64>;
pub type Model64 = engine::Model<f64>;
pub type Sequence64 = engine::Sequence<f64>;
pub type Trainer64 = engine::Trainer<f64>;

pub type Matrix32 = numkit::Matrix<f32>;
pub type Vector32 = numkit::Vector<f32>;
pub type CellParams32 = cells::CellParams<f32>;
pub type Model32 = engine::Model<f32>;
pub type Sequence32 = engine::Sequence<f32>;
pub type Trainer32 = engine::Trainer<f32>;
