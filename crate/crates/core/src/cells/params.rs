use crate::cells::{Arch, CellConfig, Gate};
use crate::error::{Error, Result};
use crate::numkit::{axpy, init_xavier, Matrix, Rng, Scalar, Vector};

/// Affine map `w·x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub w: Matrix<T>,
    pub b: Vector<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Affine {
            w: Matrix::zeros(out, inp),
            b: Vector::zeros(out),
        }
    }

    pub fn xavier(out: usize, inp: usize, rng: &mut Rng) -> Self {
        Affine {
            w: init_xavier(out, inp, rng),
            b: Vector::zeros(out),
        }
    }

    pub fn apply(&self, x: &[T]) -> Vector<T> {
        let mut out = self.b.clone();
        self.w.matvec_add(x, &mut out);
        out
    }

    /// Accumulates parameter gradients for cotangent `d` at input `x` and
    /// returns the input gradient.
    pub fn backward(&self, grad: &mut Affine<T>, x: &[T], d: &[T]) -> Vector<T> {
        grad.w.add_outer(d, x);
        axpy(T::one(), d, &mut grad.b);
        let mut dx = Vector::zeros(x.len());
        self.w.matvec_t_add(d, &mut dx);
        dx
    }
}

/// Weights of one gate or candidate: `ĝ = w·x + u·r + b`, where `r` is
/// `h_{t-1}` for gates and the reset product for GRU/MGU candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitParams<T> {
    pub w: Matrix<T>,
    pub u: Matrix<T>,
    pub b: Vector<T>,
}

impl<T: Scalar> UnitParams<T> {
    fn zeros(hidden: usize, inp: usize) -> Self {
        UnitParams {
            w: Matrix::zeros(hidden, inp),
            u: Matrix::zeros(hidden, hidden),
            b: Vector::zeros(hidden),
        }
    }

    fn xavier(hidden: usize, inp: usize, rng: &mut Rng) -> Self {
        UnitParams {
            w: init_xavier(hidden, inp, rng),
            u: init_xavier(hidden, hidden, rng),
            b: Vector::zeros(hidden),
        }
    }

    #[inline]
    pub(crate) fn preact(&self, x: &[T], r: &[T]) -> Vector<T> {
        let mut out = self.b.clone();
        self.w.matvec_add(x, &mut out);
        self.u.matvec_add(r, &mut out);
        out
    }

    /// `δ[w, u, b] += δĝ·[x, r, 1]`, `δx += wᵀδĝ`, `δr += uᵀδĝ`.
    #[inline]
    pub(crate) fn backward(
        &self,
        grad: &mut UnitParams<T>,
        dpre: &[T],
        x: &[T],
        r: &[T],
        dx: &mut [T],
        dr: &mut [T],
    ) {
        grad.w.add_outer(dpre, x);
        grad.u.add_outer(dpre, r);
        axpy(T::one(), dpre, &mut grad.b);
        self.w.matvec_t_add(dpre, dx);
        self.u.matvec_t_add(dpre, dr);
    }
}

/// Learnable weights of a cell. Gate order follows [`Arch::gates`].
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams<T> {
    pub proj: Option<Affine<T>>,
    pub gates: Vec<UnitParams<T>>,
    pub cand: UnitParams<T>,
}

/// Borrowed view of one named parameter block.
#[derive(Debug)]
pub struct Block<'a, T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [T],
}

impl<T: Scalar> CellParams<T> {
    pub fn zeros(cfg: &CellConfig) -> Self {
        let h = cfg.hidden_size;
        let d = cfg.cell_input_size();
        CellParams {
            proj: cfg
                .project_input
                .then(|| Affine::zeros(h, cfg.input_size)),
            gates: cfg.arch.gates().iter().map(|_| UnitParams::zeros(h, d)).collect(),
            cand: UnitParams::zeros(h, d),
        }
    }

    /// Glorot-uniform weights, zero biases (forget bias +1 when requested).
    pub fn init(cfg: &CellConfig, rng: &mut Rng) -> Self {
        let h = cfg.hidden_size;
        let d = cfg.cell_input_size();
        let proj = cfg
            .project_input
            .then(|| Affine::xavier(h, cfg.input_size, rng));
        let mut gates: Vec<UnitParams<T>> = cfg
            .arch
            .gates()
            .iter()
            .map(|_| UnitParams::xavier(h, d, rng))
            .collect();
        let cand = UnitParams::xavier(h, d, rng);
        if cfg.unit_forget_bias && cfg.arch == Arch::Lstm {
            let f = cfg.arch.gate_index(Gate::Forget).expect("lstm has forget");
            gates[f].b.fill(T::one());
        }
        CellParams { proj, gates, cand }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix<T>| Matrix::zeros(m.rows(), m.cols());
        let zu = |u: &UnitParams<T>| UnitParams {
            w: z(&u.w),
            u: z(&u.u),
            b: Vector::zeros(u.b.len()),
        };
        CellParams {
            proj: self.proj.as_ref().map(|p| Affine {
                w: z(&p.w),
                b: Vector::zeros(p.b.len()),
            }),
            gates: self.gates.iter().map(zu).collect(),
            cand: zu(&self.cand),
        }
    }

    pub fn gate(&self, arch: Arch, gate: Gate) -> Option<&UnitParams<T>> {
        arch.gate_index(gate).map(|i| &self.gates[i])
    }

    /// Named blocks in a fixed order; biases are reported as `n × 1`.
    pub fn blocks(&self, arch: Arch) -> Vec<Block<'_, T>> {
        let mut out = Vec::new();
        if let Some(p) = &self.proj {
            push_matrix(&mut out, "proj.w".into(), &p.w);
            push_vector(&mut out, "proj.b".into(), &p.b);
        }
        let names = arch.gates().iter().map(|g| g.name()).chain(["cand"]);
        for (name, unit) in names.zip(self.gates.iter().chain([&self.cand])) {
            push_matrix(&mut out, format!("{name}.w"), &unit.w);
            push_matrix(&mut out, format!("{name}.u"), &unit.u);
            push_vector(&mut out, format!("{name}.b"), &unit.b);
        }
        out
    }

    /// Mutable slices in the same order as [`CellParams::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        if let Some(p) = &mut self.proj {
            out.push(p.w.as_mut_slice());
            out.push(p.b.as_mut_slice());
        }
        for unit in self.gates.iter_mut().chain(std::iter::once(&mut self.cand)) {
            out.push(unit.w.as_mut_slice());
            out.push(unit.u.as_mut_slice());
            out.push(unit.b.as_mut_slice());
        }
        out
    }

    /// Checks that every block has the shape `cfg` implies.
    pub fn check_shapes(&self, cfg: &CellConfig) -> Result<()> {
        let expect = CellParams::<T>::zeros(cfg);
        if self.gates.len() != expect.gates.len() {
            return Err(Error::Shape {
                name: "gates".into(),
                expected: format!("{} gate units", expect.gates.len()),
                found: format!("{} gate units", self.gates.len()),
            });
        }
        let got = self.blocks(cfg.arch);
        let want = expect.blocks(cfg.arch);
        if got.len() != want.len() {
            return Err(Error::Shape {
                name: "cell".into(),
                expected: format!("{} blocks", want.len()),
                found: format!("{} blocks", got.len()),
            });
        }
        for (g, w) in got.iter().zip(&want) {
            if (g.rows, g.cols) != (w.rows, w.cols) || g.name != w.name {
                return Err(Error::Shape {
                    name: w.name.clone(),
                    expected: format!("{} {}x{}", w.name, w.rows, w.cols),
                    found: format!("{} {}x{}", g.name, g.rows, g.cols),
                });
            }
        }
        Ok(())
    }
}

fn push_matrix<'a, T: Scalar>(out: &mut Vec<Block<'a, T>>, name: String, m: &'a Matrix<T>) {
    out.push(Block {
        name,
        rows: m.rows(),
        cols: m.cols(),
        data: m.as_slice(),
    });
}

fn push_vector<'a, T: Scalar>(out: &mut Vec<Block<'a, T>>, name: String, v: &'a Vector<T>) {
    out.push(Block {
        name,
        rows: v.len(),
        cols: 1,
        data: v.as_slice(),
    });
}
