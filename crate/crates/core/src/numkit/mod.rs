//! Dense linear algebra, activations and seeded initialization.

mod matrix;
mod rng;
mod scalar;

pub use matrix::{axpy, dot, Matrix, Vector};
pub use rng::Rng;
pub use scalar::Scalar;

/// Logistic function, evaluated without overflow for large `|v|`.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(v: &[T]) -> Vector<T> {
    v.iter().map(|&x| sigmoid_scalar(x)).collect::<Vec<_>>().into()
}

pub fn tanh_act<T: Scalar>(v: &[T]) -> Vector<T> {
    v.iter().map(|&x| x.tanh()).collect::<Vec<_>>().into()
}

/// Derivative of tanh expressed through its output `y = tanh(x)`.
#[inline]
pub fn tanh_grad_from_output<T: Scalar>(y: T) -> T {
    T::one() - y * y
}

/// Derivative of the logistic function through its output `s = σ(x)`.
#[inline]
pub fn sigmoid_grad_from_output<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

/// Uniform Glorot initialization in `±sqrt(6 / (rows + cols))`.
pub fn init_xavier<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.uniform_range(-bound, bound)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid(&[0.0f64])[0], 0.5);
        let s = sigmoid(&[40.0f64])[0];
        assert!(1.0 - s < 1e-17);
        assert!(s <= 1.0);
    }

    #[test]
    fn tanh_derivative_matches_central_difference() {
        let x = 0.3f64;
        let h = 1e-6;
        let fd = ((x + h).tanh() - (x - h).tanh()) / (2.0 * h);
        assert!((tanh_grad_from_output(x.tanh()) - fd).abs() < 1e-8);
        assert_eq!(tanh_act(&[0.0f64])[0], 0.0);
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let m: Matrix<f64> = init_xavier(1, 1, &mut Rng::new(3));
        assert!(m.get(0, 0).abs() <= 3f64.sqrt());
        let a: Matrix<f64> = init_xavier(13, 7, &mut Rng::new(99));
        let b: Matrix<f64> = init_xavier(13, 7, &mut Rng::new(99));
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn xavier_sample_mean_is_small() {
        let m: Matrix<f64> = init_xavier(100, 100, &mut Rng::new(1234));
        let mean = m.as_slice().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    proptest! {
        #[test]
        fn sigmoid_is_antisymmetric(v in -30.0f64..30.0) {
            let s = sigmoid_scalar(v);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!((sigmoid_scalar(-v) - (1.0 - s)).abs() < 1e-15);
        }

        #[test]
        fn activations_stay_in_range(v in -1e6f64..1e6) {
            let s = sigmoid_scalar(v);
            prop_assert!((0.0..=1.0).contains(&s));
            let t = v.tanh();
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert_eq!((-v).tanh(), -t);
        }

        #[test]
        fn tanh_open_interval_for_moderate_inputs(v in -18.0f64..18.0) {
            let t = v.tanh();
            prop_assert!(t > -1.0 && t < 1.0);
        }
    }
}
