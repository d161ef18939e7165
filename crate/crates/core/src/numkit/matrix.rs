use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::numkit::Scalar;

/// Dense vector of reals.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![T::zero(); len],
        }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Vector {
            data: vec![value; len],
        }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Vector { data }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Vector {
            data: values.iter().map(|&v| T::of(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Vector {
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        check_len("hadamard", self.len(), other.len())?;
        Ok(Vector {
            data: self.iter().zip(other.iter()).map(|(&a, &b)| a * b).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_len("add", self.len(), other.len())?;
        Ok(Vector {
            data: self.iter().zip(other.iter()).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        check_len("dot", self.len(), other.len())?;
        Ok(dot(self, other))
    }

    pub fn norm_inf(&self) -> T {
        self.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> T {
        dot(self, self).sqrt()
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.data
    }
}

impl<T> DerefMut for Vector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(data: Vec<T>) -> Self {
        Vector { data }
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dim("Matrix::from_rows", c, row.len()));
            }
            data.extend(row.iter().map(|&v| T::of(v)));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("lhs cols == rhs rows ({})", self.cols),
                format!("rhs rows {}", other.rows),
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                axpy(self.data[i * self.cols + k], other.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// `self · x` as a fresh vector.
    pub fn matvec(&self, x: &[T]) -> Result<Vector<T>> {
        if x.len() != self.cols {
            return Err(Error::dim("matvec", self.cols, x.len()));
        }
        let mut out = Vector::zeros(self.rows);
        self.matvec_add(x, &mut out);
        Ok(out)
    }

    /// `out += self · x`. Shapes are the caller's responsibility.
    #[inline]
    pub fn matvec_add(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · d`.
    #[inline]
    pub fn matvec_t_add(&self, d: &[T], out: &mut [T]) {
        debug_assert_eq!(d.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&di, row) in d.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if di != T::zero() {
                axpy(di, row, out);
            }
        }
    }

    /// `self += a · bᵀ`.
    #[inline]
    pub fn add_outer(&mut self, a: &[T], b: &[T]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        let cols = self.cols.max(1);
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(cols)) {
            if ai != T::zero() {
                axpy(ai, b, row);
            }
        }
    }
}

fn check_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::dim(op, a, b));
    }
    Ok(())
}

/// Dot product over eight independent lanes so the loop vectorizes without
/// reassociating floating-point sums.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha · x`.
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    let mut cy = y.chunks_exact_mut(8);
    let mut cx = x.chunks_exact(8);
    for (yc, xc) in (&mut cy).zip(&mut cx) {
        for k in 0..8 {
            yc[k] += alpha * xc[k];
        }
    }
    for (yi, &xi) in cy.into_remainder().iter_mut().zip(cx.remainder()) {
        *yi += alpha * xi;
    }
}
