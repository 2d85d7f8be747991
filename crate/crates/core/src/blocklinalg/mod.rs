//! Block-sparse linear algebra over the element graph.

pub mod dense;
mod sparse;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub use dense::DenseSpdSolver;
pub use sparse::{BlockSparseBuilder, BlockSparseMatrix};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One dense square block per element, e.g. the mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal<T> {
    n: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> BlockDiagonal<T> {
    pub fn new(blocks: Vec<Vec<T>>, dim: usize) -> Self {
        let n = blocks.len();
        let mut data = Vec::with_capacity(n * dim * dim);
        for b in blocks {
            assert_eq!(b.len(), dim * dim);
            data.extend(b);
        }
        Self { n, dim, data }
    }

    pub fn from_flat(n: usize, dim: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * dim * dim);
        Self { n, dim, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, i: usize) -> &[T] {
        let bs = self.dim * self.dim;
        &self.data[i * bs..(i + 1) * bs]
    }

    /// Blockwise inverse; every block must be SPD.
    pub fn inverse(&self) -> Result<Self> {
        let bs = self.dim * self.dim;
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            let inv = dense::spd_inverse(self.block(i), self.dim).map_err(|e| match e {
                Error::NotPositiveDefinite { .. } => Error::SingularBlock(i),
                other => other,
            })?;
            data.extend(inv);
        }
        debug_assert_eq!(data.len(), self.n * bs);
        Ok(Self {
            n: self.n,
            dim: self.dim,
            data,
        })
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut y = vec![T::zero(); x.len()];
        for i in 0..self.n {
            dense::gemv_acc(d, d, self.block(i), &x[i * d..(i + 1) * d], &mut y[i * d..(i + 1) * d]);
        }
        y
    }

    pub fn to_sparse(&self) -> BlockSparseMatrix<T> {
        let mut b = BlockSparseBuilder::new(self.n, self.n, self.dim, self.dim);
        for i in 0..self.n {
            b.add_block(i, i, self.block(i));
        }
        b.build()
    }

    /// `xᵀ D y`
    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        crate::scalar::dot(x, &self.apply(y))
    }
}

/// Name of the pseudo-random stream behind [`random_vector`].
pub const RANDOM_STREAM: &str = "chacha8-u53-v1";

/// Deterministic vector with i.i.d. entries uniform on `[-1, 1]`.
///
/// Entries come from ChaCha8 seeded with `seed`; each draw keeps the top 53
/// bits of a `u64`, so the stream is identical on every platform.
pub fn random_vector<T: Scalar>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            T::of(2.0 * u - 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_vector_is_reproducible() {
        let a = random_vector::<f64>(1000, 42);
        let b = random_vector::<f64>(1000, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert!(a.iter().any(|x| *x != 0.0));
        let c = random_vector::<f64>(1000, 43);
        let differing = a.iter().zip(&c).filter(|(x, y)| x != y).count();
        assert!(differing >= 990);
        let mean = a.iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn block_inverse() {
        let d = BlockDiagonal::new(vec![vec![2.0, 1.0, 1.0, 3.0], vec![4.0, 0.0, 0.0, 5.0]], 2);
        let inv = d.inverse().unwrap();
        let prod = d.to_sparse().matmul(&inv.to_sparse()).unwrap();
        let id = BlockSparseMatrix::<f64>::identity(2, 2);
        assert!(prod.diff_norm(&id).unwrap() < 1e-14);
        let bad = BlockDiagonal::new(vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0]], 2);
        assert_eq!(bad.inverse().unwrap_err(), Error::SingularBlock(1));
    }
}
