use std::fmt;
use std::str::FromStr;

use crate::cells::{Affine, Block, CellConfig, CellParams};
use crate::error::{Error, Result};
use crate::numkit::{Rng, Scalar, Vector};

/// Where the classifier head reads the hidden state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Softmax cross-entropy at every timestep.
    PerStep,
    /// Softmax cross-entropy at the last timestep only.
    FinalStep,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::PerStep => "per-step",
            LossKind::FinalStep => "final-step",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-step" => Ok(LossKind::PerStep),
            "final-step" => Ok(LossKind::FinalStep),
            other => Err(Error::Config(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// Every learnable tensor of a [`Model`]: the cell and the output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub cell: CellParams<T>,
    pub head: Affine<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros_like(&self) -> Self {
        Params {
            cell: self.cell.zeros_like(),
            head: Affine::zeros(self.head.w.rows(), self.head.w.cols()),
        }
    }

    /// Named blocks: cell blocks followed by `head.w` and `head.b`.
    pub fn blocks(&self, cfg: &CellConfig) -> Vec<Block<'_, T>> {
        let mut out = self.cell.blocks(cfg.arch);
        out.push(Block {
            name: "head.w".into(),
            rows: self.head.w.rows(),
            cols: self.head.w.cols(),
            data: self.head.w.as_slice(),
        });
        out.push(Block {
            name: "head.b".into(),
            rows: self.head.b.len(),
            cols: 1,
            data: self.head.b.as_slice(),
        });
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.cell.blocks_mut();
        out.push(self.head.w.as_mut_slice());
        out.push(self.head.b.as_mut_slice());
        out
    }

    /// Flat read-only slices, same order as [`Params::blocks_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        if let Some(p) = &self.cell.proj {
            out.push(p.w.as_slice());
            out.push(p.b.as_slice());
        }
        for unit in self.cell.gates.iter().chain(std::iter::once(&self.cell.cand)) {
            out.push(unit.w.as_slice());
            out.push(unit.u.as_slice());
            out.push(unit.b.as_slice());
        }
        out.push(self.head.w.as_slice());
        out.push(self.head.b.as_slice());
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

/// A recurrent cell with an affine classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub cfg: CellConfig,
    pub classes: usize,
    pub loss: LossKind,
    pub params: Params<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: CellConfig, classes: usize, loss: LossKind, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        if classes < 2 {
            return Err(Error::Config("a classifier head needs at least 2 classes".into()));
        }
        let cell = CellParams::init(&cfg, rng);
        let head = Affine::xavier(classes, cfg.hidden_size, rng);
        Ok(Model {
            cfg,
            classes,
            loss,
            params: Params { cell, head },
        })
    }

    /// Model with every parameter zero.
    pub fn zeros(cfg: CellConfig, classes: usize, loss: LossKind) -> Result<Self> {
        cfg.validate()?;
        Ok(Model {
            cfg,
            classes,
            loss,
            params: Params {
                cell: CellParams::zeros(&cfg),
                head: Affine::zeros(classes, cfg.hidden_size),
            },
        })
    }

    pub fn head_logits(&self, h: &[T]) -> Vector<T> {
        self.params.head.apply(h)
    }

    /// Validates config and parameter shapes together.
    pub fn check(&self) -> Result<()> {
        self.cfg.validate()?;
        self.params.cell.check_shapes(&self.cfg)?;
        let (r, c) = self.params.head.w.shape();
        if (r, c) != (self.classes, self.cfg.hidden_size) || self.params.head.b.len() != self.classes {
            return Err(Error::Shape {
                name: "head.w".into(),
                expected: format!("{}x{}", self.classes, self.cfg.hidden_size),
                found: format!("{r}x{c}"),
            });
        }
        Ok(())
    }
}

/// Gradient record with exactly the shape of a model's [`Params`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradStore<T> {
    pub params: Params<T>,
}

impl<T: Scalar> GradStore<T> {
    pub fn zeros_for(model: &Model<T>) -> Self {
        GradStore {
            params: model.params.zeros_like(),
        }
    }

    pub fn zero(&mut self) {
        for s in self.params.blocks_mut() {
            s.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.params.blocks_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &GradStore<T>, factor: T) {
        for (dst, src) in self.params.blocks_mut().into_iter().zip(other.params.slices()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += factor * s;
            }
        }
    }

    pub fn global_norm(&self) -> T {
        self.params
            .slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::Arch;

    #[test]
    fn grad_store_mirrors_model() {
        let cfg = CellConfig::new(Arch::Lstm, 2, 4);
        let m: Model<f64> = Model::new(cfg, 2, LossKind::PerStep, &mut Rng::new(1)).unwrap();
        let g = GradStore::zeros_for(&m);
        let a: Vec<(String, usize, usize)> = m
            .params
            .blocks(&cfg)
            .into_iter()
            .map(|b| (b.name, b.rows, b.cols))
            .collect();
        let b: Vec<(String, usize, usize)> = g
            .params
            .blocks(&cfg)
            .into_iter()
            .map(|b| (b.name, b.rows, b.cols))
            .collect();
        assert_eq!(a, b);
        assert_eq!(g.global_norm(), 0.0);
        m.check().unwrap();
    }

    #[test]
    fn slices_and_blocks_agree() {
        let cfg = CellConfig::new(Arch::Mgu, 3, 3);
        let m: Model<f64> = Model::new(cfg, 4, LossKind::FinalStep, &mut Rng::new(2)).unwrap();
        let lens: Vec<usize> = m.params.slices().iter().map(|s| s.len()).collect();
        let blens: Vec<usize> = m.params.blocks(&cfg).iter().map(|b| b.data.len()).collect();
        assert_eq!(lens, blens);
    }
}
