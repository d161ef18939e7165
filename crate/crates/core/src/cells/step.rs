//! Single-timestep forward and reverse passes for LSTM, GRU and MGU cells.
//!
//! Every forward op returns a [`StepCache`] holding all quantities the
//! reverse pass reads; the reverse pass never recomputes an activation.

use crate::cells::params::CellParams;
use crate::cells::refine::{refine_backward_unchecked, refine_unchecked};
use crate::cells::{Arch, CellConfig, Gate, RefineMode};
use crate::error::{Error, Result};
use crate::numkit::{
    axpy, sigmoid_grad_from_output, sigmoid_scalar, tanh_grad_from_output, Scalar, Vector,
};

/// Saved forward quantities of one step.
#[derive(Clone, Debug)]
pub struct StepCache<T> {
    pub arch: Arch,
    /// Raw input as fed to the cell.
    pub x_raw: Vector<T>,
    /// Cell input after the optional projection; `x_t` in the cell equations.
    pub x: Vector<T>,
    pub h_prev: Vector<T>,
    pub c_prev: Option<Vector<T>>,
    /// Gate pre-activations `ĝ_t`, in [`Arch::gates`] order.
    pub pre: Vec<Vector<T>>,
    /// Sigmoid outputs `σ(ĝ_t)`.
    pub sig: Vec<Vector<T>>,
    /// Gate outputs after refinement (equal to `sig` for unrefined gates).
    pub out: Vec<Vector<T>>,
    /// Refine mode applied to each gate.
    pub modes: Vec<RefineMode>,
    /// Candidate `c̃_t` (LSTM) or `h̃_t` (GRU/MGU), post-tanh.
    pub cand: Vector<T>,
    /// Reset product `A = r′ ⊙ h_{t-1}` (GRU) or `f′ ⊙ h_{t-1}` (MGU).
    pub reset_product: Option<Vector<T>>,
    pub h: Vector<T>,
    pub c: Option<Vector<T>>,
    pub tanh_c: Option<Vector<T>>,
}

impl<T: Scalar> StepCache<T> {
    pub fn gate_index(&self, gate: Gate) -> Option<usize> {
        self.arch.gate_index(gate)
    }

    pub fn sigma(&self, gate: Gate) -> Option<&Vector<T>> {
        self.gate_index(gate).map(|i| &self.sig[i])
    }

    pub fn gate_output(&self, gate: Gate) -> Option<&Vector<T>> {
        self.gate_index(gate).map(|i| &self.out[i])
    }
}

/// Gradients flowing out of one step.
#[derive(Clone, Debug)]
pub struct StepGrads<T> {
    pub dx_raw: Vector<T>,
    pub dh_prev: Vector<T>,
    pub dc_prev: Option<Vector<T>>,
}

/// Switches for mutation testing of the reverse pass.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default)]
pub struct BackwardOptions {
    /// Drop the direct `δg → δx` shortcut of refined gates.
    pub drop_refine_shortcut: bool,
}

fn check_len(op: &'static str, what: &str, expected: usize, v: &[impl Sized]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::dim(op, format!("{what} of length {expected}"), v.len()));
    }
    Ok(())
}

fn check_arch(op: &'static str, cfg: &CellConfig, arch: Arch) -> Result<()> {
    if cfg.arch != arch {
        return Err(Error::Config(format!("{op} called with a {} config", cfg.arch)));
    }
    Ok(())
}

fn project<T: Scalar>(p: &CellParams<T>, cfg: &CellConfig, x_raw: &[T]) -> Result<Vector<T>> {
    check_len("cell step", "x_raw", cfg.input_size, x_raw)?;
    Ok(match &p.proj {
        Some(proj) => proj.apply(x_raw),
        None => x_raw.to_vec().into(),
    })
}

/// Computes one gate: pre-activation, sigmoid, refinement.
#[inline]
fn gate_forward<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    idx: usize,
    x: &[T],
    h_prev: &[T],
) -> (Vector<T>, Vector<T>, Vector<T>, RefineMode) {
    let gate = cfg.arch.gates()[idx];
    let pre = p.gates[idx].preact(x, h_prev);
    let sig = pre.map(sigmoid_scalar);
    let mode = cfg.mode_of(gate);
    let out = refine_unchecked(&sig, x, mode);
    (pre, sig, out, mode)
}

fn all_gates<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    x: &[T],
    h_prev: &[T],
) -> (Vec<Vector<T>>, Vec<Vector<T>>, Vec<Vector<T>>, Vec<RefineMode>) {
    let n = cfg.arch.gates().len();
    let mut pre = Vec::with_capacity(n);
    let mut sig = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    for idx in 0..n {
        let (a, b, c, m) = gate_forward(p, cfg, idx, x, h_prev);
        pre.push(a);
        sig.push(b);
        out.push(c);
        modes.push(m);
    }
    (pre, sig, out, modes)
}

fn check_params<T: Scalar>(p: &CellParams<T>, cfg: &CellConfig) -> Result<()> {
    let h = cfg.hidden_size;
    if p.gates.len() != cfg.arch.gates().len()
        || p.cand.u.shape() != (h, h)
        || p.cand.w.shape() != (h, cfg.cell_input_size())
        || p.proj.is_some() != cfg.project_input
    {
        return Err(Error::Config(format!(
            "cell parameters do not match config {}",
            cfg.label()
        )));
    }
    Ok(())
}

/// LSTM step with optionally refined input/output gates.
pub fn lstm_step_forward<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    x_raw: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> Result<StepCache<T>> {
    check_arch("lstm_step_forward", cfg, Arch::Lstm)?;
    cfg.validate()?;
    check_params(p, cfg)?;
    let h = cfg.hidden_size;
    check_len("lstm_step_forward", "h_prev", h, h_prev)?;
    check_len("lstm_step_forward", "c_prev", h, c_prev)?;
    let x = project(p, cfg, x_raw)?;
    let (pre, sig, out, modes) = all_gates(p, cfg, &x, h_prev);
    let (f, i, o) = (&out[0], &out[1], &out[2]);
    let cand = p.cand.preact(&x, h_prev).map(|v| v.tanh());
    let mut c = Vector::zeros(h);
    let mut tanh_c = Vector::zeros(h);
    let mut hv = Vector::zeros(h);
    for k in 0..h {
        c[k] = f[k] * c_prev[k] + i[k] * cand[k];
        tanh_c[k] = c[k].tanh();
        hv[k] = o[k] * tanh_c[k];
    }
    Ok(StepCache {
        arch: Arch::Lstm,
        x_raw: x_raw.to_vec().into(),
        x,
        h_prev: h_prev.to_vec().into(),
        c_prev: Some(c_prev.to_vec().into()),
        pre,
        sig,
        out,
        modes,
        cand,
        reset_product: None,
        h: hv,
        c: Some(c),
        tanh_c: Some(tanh_c),
    })
}

/// GRU step with an optionally refined reset gate. The candidate reads `x_t`.
pub fn gru_step_forward<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    x_raw: &[T],
    h_prev: &[T],
) -> Result<StepCache<T>> {
    check_arch("gru_step_forward", cfg, Arch::Gru)?;
    cfg.validate()?;
    check_params(p, cfg)?;
    let h = cfg.hidden_size;
    check_len("gru_step_forward", "h_prev", h, h_prev)?;
    let x = project(p, cfg, x_raw)?;
    let (pre, sig, out, modes) = all_gates(p, cfg, &x, h_prev);
    let (z, r) = (&out[0], &out[1]);
    let a: Vector<T> = r.iter().zip(h_prev).map(|(&r, &h)| r * h).collect::<Vec<_>>().into();
    let cand = p.cand.preact(&x, &a).map(|v| v.tanh());
    let hv: Vector<T> = (0..h)
        .map(|k| z[k] * h_prev[k] + (T::one() - z[k]) * cand[k])
        .collect::<Vec<_>>()
        .into();
    Ok(StepCache {
        arch: Arch::Gru,
        x_raw: x_raw.to_vec().into(),
        x,
        h_prev: h_prev.to_vec().into(),
        c_prev: None,
        pre,
        sig,
        out,
        modes,
        cand,
        reset_product: Some(a),
        h: hv,
        c: None,
        tanh_c: None,
    })
}

/// MGU step. A refined forget gate only enters the reset product; the state
/// interpolation always uses the plain sigmoid output.
pub fn mgu_step_forward<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    x_raw: &[T],
    h_prev: &[T],
) -> Result<StepCache<T>> {
    check_arch("mgu_step_forward", cfg, Arch::Mgu)?;
    cfg.validate()?;
    check_params(p, cfg)?;
    let h = cfg.hidden_size;
    check_len("mgu_step_forward", "h_prev", h, h_prev)?;
    let x = project(p, cfg, x_raw)?;
    let (pre, sig, out, modes) = all_gates(p, cfg, &x, h_prev);
    let (f_sig, f_out) = (&sig[0], &out[0]);
    let a: Vector<T> = f_out
        .iter()
        .zip(h_prev)
        .map(|(&f, &h)| f * h)
        .collect::<Vec<_>>()
        .into();
    let cand = p.cand.preact(&x, &a).map(|v| v.tanh());
    let hv: Vector<T> = (0..h)
        .map(|k| (T::one() - f_sig[k]) * h_prev[k] + f_sig[k] * cand[k])
        .collect::<Vec<_>>()
        .into();
    Ok(StepCache {
        arch: Arch::Mgu,
        x_raw: x_raw.to_vec().into(),
        x,
        h_prev: h_prev.to_vec().into(),
        c_prev: None,
        pre,
        sig,
        out,
        modes,
        cand,
        reset_product: Some(a),
        h: hv,
        c: None,
        tanh_c: None,
    })
}

/// Dispatches on `cfg.arch`; `c_prev` is required for LSTM and ignored
/// otherwise.
pub fn step_forward<T: Scalar>(
    p: &CellParams<T>,
    cfg: &CellConfig,
    x_raw: &[T],
    h_prev: &[T],
    c_prev: Option<&[T]>,
) -> Result<StepCache<T>> {
    match cfg.arch {
        Arch::Lstm => {
            let c_prev = c_prev.ok_or_else(|| {
                Error::Config("LSTM step needs a previous memory state".into())
            })?;
            lstm_step_forward(p, cfg, x_raw, h_prev, c_prev)
        }
        Arch::Gru => gru_step_forward(p, cfg, x_raw, h_prev),
        Arch::Mgu => mgu_step_forward(p, cfg, x_raw, h_prev),
    }
}

/// Reverse pass of one step.
///
/// Parameter gradients are accumulated into `grads`. `dc` is the memory-state
/// cotangent for LSTM and must be `None` for GRU/MGU.
pub fn cell_step_backward<T: Scalar>(
    cfg: &CellConfig,
    p: &CellParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: Option<&[T]>,
    grads: &mut CellParams<T>,
) -> Result<StepGrads<T>> {
    cell_step_backward_with(cfg, p, cache, dh, dc, grads, BackwardOptions::default())
}

#[doc(hidden)]
pub fn cell_step_backward_with<T: Scalar>(
    cfg: &CellConfig,
    p: &CellParams<T>,
    cache: &StepCache<T>,
    dh: &[T],
    dc: Option<&[T]>,
    grads: &mut CellParams<T>,
    opts: BackwardOptions,
) -> Result<StepGrads<T>> {
    if cache.arch != cfg.arch || cache.x_raw.len() != cfg.input_size || cache.h.len() != cfg.hidden_size
    {
        return Err(Error::Config(format!(
            "step cache ({}) does not match config {}",
            cache.arch,
            cfg.label()
        )));
    }
    check_len("cell_step_backward", "dh", cfg.hidden_size, dh)?;
    if let Some(dc) = dc {
        if cfg.arch != Arch::Lstm {
            return Err(Error::Config(format!("{} has no memory state", cfg.arch)));
        }
        check_len("cell_step_backward", "dc", cfg.hidden_size, dc)?;
    }
    let h = cfg.hidden_size;
    let d = cfg.cell_input_size();
    let mut dx = Vector::zeros(d);
    let mut dh_prev = Vector::zeros(h);
    let mut dc_prev = None;

    // Cotangents of the gate outputs g (after refinement), arch order.
    let mut dgate_out: Vec<Vector<T>> = vec![Vector::zeros(h); cache.out.len()];
    // Extra cotangent reaching σ directly (MGU interpolation).
    let mut dsig_extra: Option<Vector<T>> = None;

    match cfg.arch {
        Arch::Lstm => {
            let c_prev = cache.c_prev.as_ref().expect("lstm cache");
            let tanh_c = cache.tanh_c.as_ref().expect("lstm cache");
            let (f, i, o) = (&cache.out[0], &cache.out[1], &cache.out[2]);
            let mut dcand_pre = Vector::zeros(h);
            let mut dcp = Vector::zeros(h);
            for k in 0..h {
                let dct = dc.map_or(T::zero(), |dc| dc[k])
                    + dh[k] * o[k] * tanh_grad_from_output(tanh_c[k]);
                dgate_out[2][k] = dh[k] * tanh_c[k];
                dgate_out[0][k] = dct * c_prev[k];
                dgate_out[1][k] = dct * cache.cand[k];
                dcand_pre[k] = dct * i[k] * tanh_grad_from_output(cache.cand[k]);
                dcp[k] = dct * f[k];
            }
            p.cand
                .backward(&mut grads.cand, &dcand_pre, &cache.x, &cache.h_prev, &mut dx, &mut dh_prev);
            dc_prev = Some(dcp);
        }
        Arch::Gru => {
            let z = &cache.out[0];
            let r = &cache.out[1];
            let a = cache.reset_product.as_ref().expect("gru cache");
            let mut dcand_pre = Vector::zeros(h);
            for k in 0..h {
                dgate_out[0][k] = dh[k] * (cache.h_prev[k] - cache.cand[k]);
                dh_prev[k] = dh[k] * z[k];
                dcand_pre[k] = dh[k] * (T::one() - z[k]) * tanh_grad_from_output(cache.cand[k]);
            }
            let mut da = Vector::zeros(h);
            p.cand
                .backward(&mut grads.cand, &dcand_pre, &cache.x, a, &mut dx, &mut da);
            for k in 0..h {
                dgate_out[1][k] = da[k] * cache.h_prev[k];
                dh_prev[k] += da[k] * r[k];
            }
        }
        Arch::Mgu => {
            let f_sig = &cache.sig[0];
            let f_out = &cache.out[0];
            let a = cache.reset_product.as_ref().expect("mgu cache");
            let mut dcand_pre = Vector::zeros(h);
            let mut extra = Vector::zeros(h);
            for k in 0..h {
                extra[k] = dh[k] * (cache.cand[k] - cache.h_prev[k]);
                dh_prev[k] = dh[k] * (T::one() - f_sig[k]);
                dcand_pre[k] = dh[k] * f_sig[k] * tanh_grad_from_output(cache.cand[k]);
            }
            let mut da = Vector::zeros(h);
            p.cand
                .backward(&mut grads.cand, &dcand_pre, &cache.x, a, &mut dx, &mut da);
            for k in 0..h {
                dgate_out[0][k] = da[k] * cache.h_prev[k];
                dh_prev[k] += da[k] * f_out[k];
            }
            dsig_extra = Some(extra);
        }
    }

    for (idx, dg) in dgate_out.iter().enumerate() {
        let sig = &cache.sig[idx];
        let (mut dsig, dx_direct) = refine_backward_unchecked(dg, sig, &cache.x, cache.modes[idx]);
        if cache.modes[idx] != RefineMode::None && !opts.drop_refine_shortcut {
            axpy(T::one(), &dx_direct, &mut dx);
        }
        if idx == 0 {
            if let Some(extra) = &dsig_extra {
                axpy(T::one(), extra, &mut dsig);
            }
        }
        let dpre: Vector<T> = dsig
            .iter()
            .zip(sig.iter())
            .map(|(&d, &s)| d * sigmoid_grad_from_output(s))
            .collect::<Vec<_>>()
            .into();
        p.gates[idx].backward(
            &mut grads.gates[idx],
            &dpre,
            &cache.x,
            &cache.h_prev,
            &mut dx,
            &mut dh_prev,
        );
    }

    let dx_raw = match (&p.proj, &mut grads.proj) {
        (Some(proj), Some(gproj)) => proj.backward(gproj, &cache.x_raw, &dx),
        (None, None) => dx,
        _ => {
            return Err(Error::Config(
                "gradient record does not mirror the cell parameters".into(),
            ))
        }
    };
    Ok(StepGrads {
        dx_raw,
        dh_prev,
        dc_prev,
    })
}
