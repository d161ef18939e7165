use std::fmt;
use std::str::FromStr;

use crate::engine::model::{GradStore, Params};
use crate::error::{Error, Result};
use crate::numkit::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    AdaDelta,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdaDelta => "adadelta",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "adadelta" => Ok(OptimizerKind::AdaDelta),
            other => Err(Error::Config(format!(
                "unknown optimizer `{other}` (expected sgd, adam or adadelta)"
            ))),
        }
    }
}

/// Optimizer hyperparameters.
///
/// Defaults: SGD(lr 0.1); Adam(lr 1e-3, β₁ 0.9, β₂ 0.999, ε 1e-8);
/// AdaDelta(lr 1, ρ 0.95, ε 1e-6).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            beta1: 0.0,
            beta2: 0.0,
            rho: 0.0,
            eps: 0.0,
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.0,
            eps: 1e-8,
        }
    }

    pub fn adadelta(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdaDelta,
            lr,
            beta1: 0.0,
            beta2: 0.0,
            rho: 0.95,
            eps: 1e-6,
        }
    }

    pub fn default_for(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::sgd(0.1),
            OptimizerKind::Adam => Self::adam(1e-3),
            OptimizerKind::AdaDelta => Self::adadelta(1.0),
        }
    }
}

/// Optimizer hyperparameters plus per-parameter accumulators.
///
/// Adam keeps first/second moments in `slot1`/`slot2`; AdaDelta keeps the
/// running mean of squared gradients in `slot1` and of squared updates in
/// `slot2`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub cfg: OptimizerConfig,
    pub steps: u64,
    pub slot1: Option<Params<T>>,
    pub slot2: Option<Params<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(cfg: OptimizerConfig, params: &Params<T>) -> Self {
        let stateful = cfg.kind != OptimizerKind::Sgd;
        OptimizerState {
            cfg,
            steps: 0,
            slot1: stateful.then(|| params.zeros_like()),
            slot2: stateful.then(|| params.zeros_like()),
        }
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut Params<T>, grads: &GradStore<T>) {
        self.steps += 1;
        let c = self.cfg;
        let lr = T::of(c.lr);
        let g_all = grads.params.slices();
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.blocks_mut().into_iter().zip(g_all) {
                    for (p, &g) in p.iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
                let t = self.steps as i32;
                let bc1 = T::one() - b1.powi(t);
                let bc2 = T::one() - b2.powi(t);
                let m_all = self.slot1.as_mut().expect("adam state").blocks_mut();
                let v_all = self.slot2.as_mut().expect("adam state").blocks_mut();
                for (((p, g), m), v) in params.blocks_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
                    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        *p -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::AdaDelta => {
                let (rho, eps) = (T::of(c.rho), T::of(c.eps));
                let eg_all = self.slot1.as_mut().expect("adadelta state").blocks_mut();
                let ed_all = self.slot2.as_mut().expect("adadelta state").blocks_mut();
                for (((p, g), eg), ed) in params.blocks_mut().into_iter().zip(g_all).zip(eg_all).zip(ed_all) {
                    for (((p, &g), eg), ed) in p.iter_mut().zip(g).zip(eg.iter_mut()).zip(ed.iter_mut()) {
                        *eg = rho * *eg + (T::one() - rho) * g * g;
                        let delta = -((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
                        *ed = rho * *ed + (T::one() - rho) * delta * delta;
                        *p += lr * delta;
                    }
                }
            }
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradStore<T>, max_norm: T) -> T {
    let norm = grads.global_norm();
    if norm > max_norm && max_norm > T::zero() {
        grads.scale(max_norm / norm);
    }
    norm
}
