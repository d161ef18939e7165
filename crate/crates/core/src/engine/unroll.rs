use crate::cells::{cell_step_backward_with, step_forward, BackwardOptions, StepCache};
use crate::engine::model::{GradStore, LossKind, Model};
use crate::error::{Error, Result};
use crate::numkit::{axpy, Scalar, Vector};

/// One training/evaluation sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence<T> {
    pub inputs: Vec<Vector<T>>,
    /// One class per step for [`LossKind::PerStep`], a single class for
    /// [`LossKind::FinalStep`].
    pub targets: Vec<usize>,
}

/// Recurrent state carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState<T> {
    pub h: Vector<T>,
    pub c: Option<Vector<T>>,
}

impl<T: Scalar> CellState<T> {
    pub fn zeros<U>(model: &Model<U>) -> Self {
        let h = model.cfg.hidden_size;
        CellState {
            h: Vector::zeros(h),
            c: model.cfg.arch.has_memory_cell().then(|| Vector::zeros(h)),
        }
    }
}

/// Forward record of a whole sequence.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub caches: Vec<StepCache<T>>,
    /// Head outputs: one per step (per-step loss) or one at the end.
    pub logits: Vec<Vector<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn hidden_states(&self) -> impl Iterator<Item = &Vector<T>> {
        self.caches.iter().map(|c| &c.h)
    }

    pub fn final_state(&self) -> CellState<T> {
        let last = self.caches.last().expect("trajectory is nonempty");
        CellState {
            h: last.h.clone(),
            c: last.c.clone(),
        }
    }

    /// Timestep each logit vector belongs to.
    pub fn logit_steps(&self) -> Vec<usize> {
        let t = self.caches.len();
        if self.logits.len() == t {
            (0..t).collect()
        } else {
            vec![t - 1]
        }
    }
}

/// Runs the cell over `inputs` from the zero state.
pub fn unroll_forward<T: Scalar>(model: &Model<T>, inputs: &[Vector<T>]) -> Result<Trajectory<T>> {
    unroll_forward_from(model, inputs, &CellState::zeros(model))
}

pub fn unroll_forward_from<T: Scalar>(
    model: &Model<T>,
    inputs: &[Vector<T>],
    init: &CellState<T>,
) -> Result<Trajectory<T>> {
    if inputs.is_empty() {
        return Err(Error::Argument("cannot unroll an empty sequence".into()));
    }
    let cfg = &model.cfg;
    let p = &model.params.cell;
    let mut caches: Vec<StepCache<T>> = Vec::with_capacity(inputs.len());
    let mut logits = Vec::with_capacity(match model.loss {
        LossKind::PerStep => inputs.len(),
        LossKind::FinalStep => 1,
    });
    for (t, x) in inputs.iter().enumerate() {
        let cache = {
            let (h, c) = match caches.last() {
                Some(prev) => (&prev.h, prev.c.as_ref()),
                None => (&init.h, init.c.as_ref()),
            };
            step_forward(p, cfg, x, h, c.map(|c| c.as_slice()))?
        };
        if model.loss == LossKind::PerStep || t + 1 == inputs.len() {
            logits.push(model.head_logits(&cache.h));
        }
        caches.push(cache);
    }
    Ok(Trajectory { caches, logits })
}

/// Numerically stable softmax cross-entropy; returns the loss and
/// `softmax(logits) − onehot(target)`.
pub fn softmax_xent<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vector<T>)> {
    if target >= logits.len() {
        return Err(Error::Argument(format!(
            "target class {target} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    let loss = sum.ln() + max - logits[target];
    let mut grad: Vector<T> = exps.iter().map(|&e| e / sum).collect::<Vec<_>>().into();
    grad[target] -= T::one();
    Ok((loss, grad))
}

/// Index of the largest logit (first on ties).
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of one sequence and the logit cotangents.
pub fn sequence_loss<T: Scalar>(traj: &Trajectory<T>, targets: &[usize]) -> Result<(T, Vec<Vector<T>>)> {
    if targets.len() != traj.logits.len() {
        return Err(Error::dim("sequence_loss", traj.logits.len(), targets.len()));
    }
    let n = T::of(targets.len() as f64);
    let mut total = T::zero();
    let mut dlogits = Vec::with_capacity(targets.len());
    for (logits, &y) in traj.logits.iter().zip(targets) {
        let (l, mut d) = softmax_xent(logits, y)?;
        total += l;
        d.iter_mut().for_each(|v| *v /= n);
        dlogits.push(d);
    }
    Ok((total / n, dlogits))
}

/// Exact gradients of the loss whose logit cotangents are `dlogits`.
pub fn bptt_backward<T: Scalar>(
    model: &Model<T>,
    traj: &Trajectory<T>,
    dlogits: &[Vector<T>],
) -> Result<GradStore<T>> {
    let mut grads = GradStore::zeros_for(model);
    bptt_accumulate(model, traj, dlogits, T::one(), &mut grads, BackwardOptions::default())?;
    Ok(grads)
}

/// `grads += scale · ∂loss/∂θ`.
#[doc(hidden)]
pub fn bptt_accumulate<T: Scalar>(
    model: &Model<T>,
    traj: &Trajectory<T>,
    dlogits: &[Vector<T>],
    scale: T,
    grads: &mut GradStore<T>,
    opts: BackwardOptions,
) -> Result<()> {
    if dlogits.len() != traj.logits.len() {
        return Err(Error::dim("bptt_backward", traj.logits.len(), dlogits.len()));
    }
    let h = model.cfg.hidden_size;
    let steps = traj.logit_steps();
    let has_c = model.cfg.arch.has_memory_cell();
    let mut dh_next = Vector::zeros(h);
    let mut dc_next: Option<Vector<T>> = has_c.then(|| Vector::zeros(h));
    let mut logit_idx = dlogits.len();
    let head = &model.params.head;
    for (t, cache) in traj.caches.iter().enumerate().rev() {
        let mut dh = dh_next;
        if logit_idx > 0 && steps[logit_idx - 1] == t {
            logit_idx -= 1;
            let d: Vector<T> = dlogits[logit_idx].map(|v| v * scale);
            grads.params.head.w.add_outer(&d, &cache.h);
            axpy(T::one(), &d, &mut grads.params.head.b);
            head.w.matvec_t_add(&d, &mut dh);
        }
        let out = cell_step_backward_with(
            &model.cfg,
            &model.params.cell,
            cache,
            &dh,
            dc_next.as_ref().map(|v| v.as_slice()),
            &mut grads.params.cell,
            opts,
        )?;
        dh_next = out.dh_prev;
        dc_next = out.dc_prev;
    }
    Ok(())
}

/// Mean sequence loss over a batch.
pub fn batch_loss<T: Scalar>(model: &Model<T>, batch: &[Sequence<T>]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut total = T::zero();
    for s in batch {
        let traj = unroll_forward(model, &s.inputs)?;
        total += sequence_loss(&traj, &s.targets)?.0;
    }
    Ok(total / T::of(batch.len() as f64))
}

/// Mean batch loss and its exact gradient.
pub fn batch_loss_and_grad<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
) -> Result<(T, GradStore<T>)> {
    batch_loss_and_grad_with(model, batch, BackwardOptions::default())
}

#[doc(hidden)]
pub fn batch_loss_and_grad_with<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
    opts: BackwardOptions,
) -> Result<(T, GradStore<T>)> {
    let mut grads = GradStore::zeros_for(model);
    let loss = accumulate_batch(model, batch, &mut grads, opts)?;
    Ok((loss, grads))
}

/// Adds the mean-loss gradient of `batch` into `grads`; returns the mean loss.
pub(crate) fn accumulate_batch<T: Scalar>(
    model: &Model<T>,
    batch: &[Sequence<T>],
    grads: &mut GradStore<T>,
    opts: BackwardOptions,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let mut total = T::zero();
    for s in batch {
        let traj = unroll_forward(model, &s.inputs)?;
        let (loss, dlogits) = sequence_loss(&traj, &s.targets)?;
        total += loss;
        bptt_accumulate(model, &traj, &dlogits, scale, grads, opts)?;
    }
    Ok(total * scale)
}
