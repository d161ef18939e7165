//! The refining operation `g = σ(ĝ) ⋄ x` and its reverse mode.

use crate::cells::RefineMode;
use crate::error::{Error, Result};
use crate::numkit::{Scalar, Vector};

/// Combines a sigmoid output `a` with the cell input `x`.
///
/// `None` returns `a`, `Add` returns `a + x` and `Mul` returns `a ⊙ x`. The
/// refined result is not clamped.
pub fn refine<T: Scalar>(a: &[T], x: &[T], mode: RefineMode) -> Result<Vector<T>> {
    if a.len() != x.len() {
        return Err(Error::dim("refine", a.len(), x.len()));
    }
    Ok(refine_unchecked(a, x, mode))
}

#[inline]
pub(crate) fn refine_unchecked<T: Scalar>(a: &[T], x: &[T], mode: RefineMode) -> Vector<T> {
    let data: Vec<T> = match mode {
        RefineMode::None => a.to_vec(),
        RefineMode::Add => a.iter().zip(x).map(|(&a, &x)| a + x).collect(),
        RefineMode::Mul => a.iter().zip(x).map(|(&a, &x)| a * x).collect(),
    };
    data.into()
}

/// Splits the gate cotangent `dg` into the part reaching the sigmoid output
/// (`da`) and the direct shortcut to the cell input (`dx_direct`).
pub fn refine_backward<T: Scalar>(
    dg: &[T],
    a: &[T],
    x: &[T],
    mode: RefineMode,
) -> Result<(Vector<T>, Vector<T>)> {
    if dg.len() != a.len() || a.len() != x.len() {
        return Err(Error::dim(
            "refine_backward",
            dg.len(),
            format!("a: {}, x: {}", a.len(), x.len()),
        ));
    }
    Ok(refine_backward_unchecked(dg, a, x, mode))
}

#[inline]
pub(crate) fn refine_backward_unchecked<T: Scalar>(
    dg: &[T],
    a: &[T],
    x: &[T],
    mode: RefineMode,
) -> (Vector<T>, Vector<T>) {
    match mode {
        RefineMode::None => (dg.to_vec().into(), Vector::zeros(dg.len())),
        RefineMode::Add => (dg.to_vec().into(), dg.to_vec().into()),
        RefineMode::Mul => (
            dg.iter().zip(x).map(|(&d, &x)| d * x).collect::<Vec<_>>().into(),
            dg.iter().zip(a).map(|(&d, &a)| d * a).collect::<Vec<_>>().into(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn forward_examples() {
        assert_eq!(refine(&[0.5], &[0.0], RefineMode::Add).unwrap()[0], 0.5);
        assert_eq!(refine(&[0.5], &[0.0], RefineMode::Mul).unwrap()[0], 0.0);
        assert_eq!(refine(&[0.8], &[1.0], RefineMode::Mul).unwrap()[0], 0.8);
        assert_eq!(refine(&[0.8], &[7.0], RefineMode::None).unwrap()[0], 0.8);
    }

    #[test]
    fn backward_examples() {
        let (da, dx) = refine_backward(&[1.0], &[0.5], &[2.0], RefineMode::Mul).unwrap();
        assert_eq!((da[0], dx[0]), (2.0, 0.5));
        let (da, dx) = refine_backward(&[3.0], &[0.1], &[-4.0], RefineMode::Add).unwrap();
        assert_eq!((da[0], dx[0]), (3.0, 3.0));
        let (da, dx) = refine_backward(&[3.0], &[0.1], &[-4.0], RefineMode::None).unwrap();
        assert_eq!((da[0], dx[0]), (3.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(refine::<f64>(&[0.1, 0.2], &[1.0], RefineMode::Add).is_err());
        assert!(refine_backward::<f64>(&[1.0], &[0.1, 0.2], &[1.0, 1.0], RefineMode::Add).is_err());
    }

    #[test]
    fn backward_matches_central_difference() {
        let mut rng = Rng::new(17);
        let n = 5;
        let a: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.05, 0.95)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let dg: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let eps = 1e-6;
        let loss = |a: &[f64], x: &[f64], mode| -> f64 {
            let g = refine(a, x, mode).unwrap();
            g.iter().zip(&dg).map(|(g, d)| g * d).sum()
        };
        for mode in [RefineMode::None, RefineMode::Add, RefineMode::Mul] {
            let (da, dx) = refine_backward(&dg, &a, &x, mode).unwrap();
            for k in 0..n {
                let (mut ap, mut am) = (a.clone(), a.clone());
                ap[k] += eps;
                am[k] -= eps;
                let fd = (loss(&ap, &x, mode) - loss(&am, &x, mode)) / (2.0 * eps);
                assert!((fd - da[k]).abs() < 1e-7, "{mode} da[{k}]");
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += eps;
                xm[k] -= eps;
                let fd = (loss(&a, &xp, mode) - loss(&a, &xm, mode)) / (2.0 * eps);
                assert!((fd - dx[k]).abs() < 1e-7, "{mode} dx[{k}]");
            }
        }
    }
}
