use crate::error::{ForgeError, Result};
use crate::scalar::Scalar;

/// Dense `batch x len x dim` tensor, row-major (dim fastest).
///
/// `len` may be zero (an empty reference sequence); `batch` and `dim` may not.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    batch: usize,
    len: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn new(batch: usize, len: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if batch == 0 || dim == 0 {
            return Err(ForgeError::Shape(format!(
                "tensor extents must be positive, got {batch}x{len}x{dim}"
            )));
        }
        if data.len() != batch * len * dim {
            return Err(ForgeError::Shape(format!(
                "{} values for a {batch}x{len}x{dim} tensor",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            len,
            dim,
            data,
        })
    }

    pub fn zeros(batch: usize, len: usize, dim: usize) -> Self {
        Self {
            batch,
            len,
            dim,
            data: vec![T::zero(); batch * len * dim],
        }
    }

    pub fn from_fn(
        batch: usize,
        len: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(batch * len * dim);
        for b in 0..batch {
            for t in 0..len {
                for i in 0..dim {
                    data.push(f(b, t, i));
                }
            }
        }
        Self {
            batch,
            len,
            dim,
            data,
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.len, self.dim)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Feature vector of token `t` in batch item `b`.
    #[inline]
    pub fn token(&self, b: usize, t: usize) -> &[T] {
        let o = (b * self.len + t) * self.dim;
        &self.data[o..o + self.dim]
    }

    #[inline]
    pub fn token_mut(&mut self, b: usize, t: usize) -> &mut [T] {
        let o = (b * self.len + t) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            data: self.data.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Largest elementwise absolute difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Concatenates along the sequence axis: `self` tokens first.
    pub fn concat_seq(&self, other: &Self) -> Result<Self> {
        if self.batch != other.batch || self.dim != other.dim {
            return Err(ForgeError::Shape(format!(
                "cannot concatenate {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let len = self.len + other.len;
        let mut data = Vec::with_capacity(self.batch * len * self.dim);
        for b in 0..self.batch {
            let stride_a = self.len * self.dim;
            let stride_b = other.len * other.dim;
            data.extend_from_slice(&self.data[b * stride_a..(b + 1) * stride_a]);
            data.extend_from_slice(&other.data[b * stride_b..(b + 1) * stride_b]);
        }
        Ok(Self {
            batch: self.batch,
            len,
            dim: self.dim,
            data,
        })
    }

    /// Splits the sequence axis into `[0, at)` and `[at, len)`.
    pub fn split_seq(&self, at: usize) -> Result<(Self, Self)> {
        if at > self.len {
            return Err(ForgeError::Shape(format!(
                "split position {at} beyond length {}",
                self.len
            )));
        }
        let head = Self::from_fn(self.batch, at, self.dim, |b, t, i| self.token(b, t)[i]);
        let tail = Self::from_fn(self.batch, self.len - at, self.dim, |b, t, i| {
            self.token(b, at + t)[i]
        });
        Ok((head, tail))
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(ForgeError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            data: self.data.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// `self * x` for a column vector `x`, written into `out`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }

    /// `self^T * x`, written into `out`.
    pub fn mul_vec_transposed_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = T::zero());
        for (r, &xr) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * xr;
            }
        }
    }

    /// `self += u * v^T`.
    pub fn add_outer(&mut self, u: &[T], v: &[T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (m, &vc) in row.iter_mut().zip(v) {
                *m = *m + ur * vc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_split_recovers_inputs() {
        let a = Tensor3::<f64>::from_fn(2, 2, 3, |b, t, i| (b * 100 + t * 10 + i) as f64);
        let r = Tensor3::<f64>::from_fn(2, 3, 3, |b, t, i| -((b * 100 + t * 10 + i) as f64));
        let c = a.concat_seq(&r).unwrap();
        assert_eq!(c.shape(), (2, 5, 3));
        assert_eq!(c.token(1, 1), a.token(1, 1));
        assert_eq!(c.token(1, 2), r.token(1, 0));
        let (head, tail) = c.split_seq(2).unwrap();
        assert_eq!(head, a);
        assert_eq!(tail, r);
    }

    #[test]
    fn concat_empty_is_identity() {
        let a = Tensor3::<f64>::from_fn(1, 4, 2, |_, t, i| (t + i) as f64);
        let empty = Tensor3::zeros(1, 0, 2);
        assert_eq!(a.concat_seq(&empty).unwrap(), a);
    }

    #[test]
    fn shape_errors() {
        assert!(Tensor3::<f64>::new(0, 1, 1, vec![]).is_err());
        assert!(Tensor3::<f64>::new(1, 1, 2, vec![0.0]).is_err());
        let a = Tensor3::<f64>::zeros(1, 1, 2);
        let b = Tensor3::<f64>::zeros(1, 1, 3);
        assert!(a.concat_seq(&b).is_err());
        assert!(a.split_seq(2).is_err());
    }

    #[test]
    fn matrix_vector_products() {
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut y = [0.0; 2];
        m.mul_vec_into(&[1.0, 0.0, -1.0], &mut y);
        assert_eq!(y, [-2.0, -2.0]);
        let mut z = [0.0; 3];
        m.mul_vec_transposed_into(&[1.0, 1.0], &mut z);
        assert_eq!(z, [5.0, 7.0, 9.0]);
        let mut acc = Matrix::<f64>::zeros(2, 3);
        acc.add_outer(&[1.0, 2.0], &[1.0, 0.0, 3.0]);
        assert_eq!(acc.data(), &[1.0, 0.0, 3.0, 2.0, 0.0, 6.0]);
    }
}
