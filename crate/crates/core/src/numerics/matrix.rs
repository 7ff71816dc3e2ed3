use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::{NumericsError, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Dense column vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(NumericsError::RaggedRows {
                    row: i,
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    /// `self · v`
    pub fn matvec(&self, v: &Vector<T>) -> Result<Vector<T>, NumericsError> {
        if self.cols != v.len() {
            return Err(NumericsError::Shape {
                op: "matvec",
                left: (self.rows, self.cols),
                right: (v.len(), 1),
            });
        }
        let out = (0..self.rows)
            .map(|i| dot(self.row(i), v.as_slice()))
            .collect();
        Ok(Vector(out))
    }

    /// `selfᵀ · v`
    pub fn matvec_transposed(&self, v: &Vector<T>) -> Result<Vector<T>, NumericsError> {
        if self.rows != v.len() {
            return Err(NumericsError::Shape {
                op: "matvec_transposed",
                left: (self.cols, self.rows),
                right: (v.len(), 1),
            });
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += m * vi;
            }
        }
        Ok(Vector(out))
    }

    /// `self += a · bᵀ`
    pub fn add_outer(&mut self, a: &Vector<T>, b: &Vector<T>) -> Result<(), NumericsError> {
        if self.rows != a.len() || self.cols != b.len() {
            return Err(NumericsError::Shape {
                op: "add_outer",
                left: (self.rows, self.cols),
                right: (a.len(), b.len()),
            });
        }
        let cols = self.cols;
        for (i, &ai) in a.iter().enumerate() {
            if ai == T::zero() {
                continue;
            }
            let row = &mut self.data[i * cols..(i + 1) * cols];
            for (r, &bj) in row.iter_mut().zip(b.iter()) {
                *r += ai * bj;
            }
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eight interleaved partial sums; lets the compiler keep several lanes in
/// flight instead of serializing on one accumulator.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const L: usize = 8;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); L];
    let (ca, cb) = (a.chunks_exact(L), b.chunks_exact(L));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..L {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![T::one(); n])
    }

    pub fn filled(n: usize, v: T) -> Self {
        Self(vec![v; n])
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| T::lit(v)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self, NumericsError> {
        if self.len() != other.len() {
            return Err(NumericsError::Length {
                op,
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericsError> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericsError> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, NumericsError> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NumericsError> {
        if self.len() != other.len() {
            return Err(NumericsError::Length {
                op: "add_assign",
                left: self.len(),
                right: other.len(),
            });
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Matrix-vector product; see [`Matrix::matvec`].
pub fn matvec<T: Scalar>(m: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>, NumericsError> {
    m.matvec(v)
}

/// Componentwise product; see [`Vector::hadamard`].
pub fn hadamard<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<Vector<T>, NumericsError> {
    a.hadamard(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec() {
        let v = Vector::from(vec![1.0, 2.0, 3.0]);
        assert_eq!(matvec(&Matrix::identity(3), &v).unwrap(), v);
    }

    #[test]
    fn zero_matvec() {
        let v = Vector::from(vec![1.5, -2.0, 3.0]);
        let out = matvec(&Matrix::zeros(2, 3), &v).unwrap();
        assert_eq!(out, Vector::zeros(2));
    }

    #[test]
    fn small_matvec() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let out = matvec(&m, &Vector::from(vec![1.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let m = Matrix::<f64>::zeros(2, 3);
        let err = matvec(&m, &Vector::zeros(4)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x1"), "{msg}");
    }

    #[test]
    fn hadamard_cases() {
        let a = Vector::from(vec![1.0, 2.0]);
        let b = Vector::from(vec![3.0, 4.0]);
        assert_eq!(hadamard(&a, &b).unwrap().as_slice(), &[3.0, 8.0]);
        assert_eq!(hadamard(&a, &Vector::ones(2)).unwrap(), a);
        assert_eq!(hadamard(&a, &Vector::zeros(2)).unwrap(), Vector::zeros(2));
        assert!(hadamard(&a, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn transposed_product_and_outer() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = m.matvec_transposed(&Vector::from(vec![1.0, -1.0])).unwrap();
        assert_eq!(t.as_slice(), &[-3.0, -3.0, -3.0]);

        let mut acc = Matrix::zeros(2, 3);
        acc.add_outer(&Vector::from(vec![1.0, 2.0]), &Vector::from(vec![1.0, 0.0, -1.0]))
            .unwrap();
        assert_eq!(acc.as_slice(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}
