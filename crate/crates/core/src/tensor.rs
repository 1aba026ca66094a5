//! Dense row-major tensors. Only the small fixed set of operations the
//! recurrent models need; shapes are validated on every operation.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape {
                name: "tensor literal".into(),
                expected: shape.to_vec(),
                got: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn item(&self) -> T {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared L2 norm, summed in element order.
    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn scale_in_place(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Matrix [m, n] times vector [n] -> [m].
    pub fn matvec(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, n) = self.matrix_dims("matvec")?;
        if x.len() != n {
            return Err(Error::Shape {
                name: "matvec input".into(),
                expected: vec![n],
                got: x.shape.clone(),
            });
        }
        let mut out = vec![T::zero(); m];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = T::zero();
            for (w, v) in row.iter().zip(x.data.iter()) {
                acc += *w * *v;
            }
            *o = acc;
        }
        Ok(Tensor::vector(out))
    }

    /// Transposed product: self shape [m, n], y shape [m] -> [n].
    pub fn matvec_t(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        let (m, n) = self.matrix_dims("matvec_t")?;
        if y.len() != m {
            return Err(Error::Shape {
                name: "matvec_t input".into(),
                expected: vec![m],
                got: y.shape.clone(),
            });
        }
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            let yi = y.data[i];
            let row = &self.data[i * n..(i + 1) * n];
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += yi * *w;
            }
        }
        Ok(Tensor::vector(out))
    }

    /// Column `j` of a [m, n] matrix as a vector [m].
    pub fn column(&self, j: usize) -> Result<Tensor<T>> {
        let (m, n) = self.matrix_dims("column")?;
        if j >= n {
            return Err(Error::InvalidInput(format!(
                "column index {j} out of range for {n} columns"
            )));
        }
        let data = (0..m).map(|i| self.data[i * n + j]).collect();
        Ok(Tensor::vector(data))
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn concat(&self, other: &Tensor<T>) -> Tensor<T> {
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Tensor::vector(data)
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        if start + len > self.data.len() {
            return Err(Error::InvalidInput(format!(
                "slice {start}..{} out of range for length {}",
                start + len,
                self.data.len()
            )));
        }
        Ok(Tensor::vector(self.data[start..start + len].to_vec()))
    }

    fn matrix_dims(&self, op: &str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::Shape {
                name: op.into(),
                expected: vec![0, 0],
                got: self.shape.clone(),
            });
        }
        Ok((self.shape[0], self.shape[1]))
    }

    fn zip_with(&self, other: &Tensor<T>, op: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                name: op.into(),
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_basics() {
        let w = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = Tensor::vector(vec![1.0, 0.0, -1.0]);
        assert_eq!(w.matvec(&x).unwrap().data(), &[-2.0, -2.0]);
        let y = Tensor::vector(vec![1.0, -1.0]);
        assert_eq!(w.matvec_t(&y).unwrap().data(), &[-3.0, -3.0, -3.0]);
        assert_eq!(w.column(1).unwrap().data(), &[2.0, 5.0]);
    }

    #[test]
    fn shape_errors_name_the_operation() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        let x = Tensor::vector(vec![1.0, 2.0]);
        assert!(w.matvec(&x).is_err());
        let a = Tensor::<f64>::zeros(&[2]);
        let b = Tensor::<f64>::zeros(&[3]);
        assert!(a.add(&b).is_err());
    }
}
