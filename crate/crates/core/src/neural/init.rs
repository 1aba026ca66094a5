//! Parameter initialization: seeded Gaussian draws and orthogonal
//! matrices via modified Gram-Schmidt. Sampling happens in f64 and is
//! narrowed afterwards, so a seed fixes the draw sequence.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::neural::Init;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub(crate) fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn gaussian(rng: &mut StdRng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn fill<T: Real>(tensor: &mut Tensor<T>, init: Init, rng: &mut StdRng) {
    match init {
        Init::Zeros => {
            for v in tensor.data_mut() {
                *v = T::zero();
            }
        }
        Init::Constant(c) => {
            for v in tensor.data_mut() {
                *v = T::of(c);
            }
        }
        Init::Gaussian(std) => {
            for v in tensor.data_mut() {
                *v = T::of(gaussian(rng) * std);
            }
        }
        Init::Orthogonal => {
            let shape = tensor.shape().to_vec();
            assert_eq!(shape.len(), 2, "orthogonal init needs a matrix");
            assert_eq!(shape[0], shape[1], "orthogonal init needs a square matrix");
            let n = shape[0];
            let mut rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| gaussian(rng)).collect())
                .collect();
            gram_schmidt(&mut rows, rng);
            let data = tensor.data_mut();
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = T::of(rows[i][j]);
                }
            }
        }
    }
}

fn gram_schmidt(rows: &mut [Vec<f64>], rng: &mut StdRng) {
    let n = rows.len();
    for i in 0..n {
        loop {
            for j in 0..i {
                let dot: f64 = rows[i].iter().zip(rows[j].iter()).map(|(a, b)| a * b).sum();
                for k in 0..n {
                    rows[i][k] -= dot * rows[j][k];
                }
            }
            let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-10 {
                for v in rows[i].iter_mut() {
                    *v /= norm;
                }
                break;
            }
            // degenerate draw: resample the row and retry
            for v in rows[i].iter_mut() {
                *v = gaussian(rng);
            }
        }
    }
}
