//! Small dense kernels on row-major slices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `c (m×n) += a (m×k) · b (k×n)`
#[inline]
pub fn gemm_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aip * *bj;
            }
        }
    }
}

/// `c (m×n) += aᵀ · b` where `a` is `(k×m)` and `b` is `(k×n)`.
#[inline]
pub fn gemm_tn_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let api = a[p * m + i];
            if api == T::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += api * *bj;
            }
        }
    }
}

/// `y (m) += a (m×n) · x`
#[inline]
pub fn gemv_acc<T: Scalar>(m: usize, n: usize, a: &[T], x: &[T], y: &mut [T]) {
    for i in 0..m {
        let row = &a[i * n..(i + 1) * n];
        let mut s = T::zero();
        for (aij, xj) in row.iter().zip(x) {
            s += *aij * *xj;
        }
        y[i] += s;
    }
}

/// `y (n) += aᵀ · x` with `a` of shape `(m×n)`.
#[inline]
pub fn gemv_t_acc<T: Scalar>(m: usize, n: usize, a: &[T], x: &[T], y: &mut [T]) {
    for i in 0..m {
        let xi = x[i];
        let row = &a[i * n..(i + 1) * n];
        for (yj, aij) in y.iter_mut().zip(row) {
            *yj += *aij * xi;
        }
    }
}

pub fn transpose<T: Scalar>(rows: usize, cols: usize, a: &[T]) -> Vec<T> {
    let mut t = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

/// Lower Cholesky factor of an SPD matrix (row-major, full storage).
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let tol = scale * T::epsilon() * T::of(n as f64);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite {
                row: j,
                pivot: d.to_f64_lossy(),
            });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Explicit inverse of an SPD matrix via its Cholesky factor.
pub fn spd_inverse<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    let l = cholesky(a, n)?;
    let mut inv = vec![T::zero(); n * n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = T::zero());
        col[j] = T::one();
        cholesky_solve(&l, n, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    // symmetrize away round-off
    for i in 0..n {
        for j in i + 1..n {
            let s = T::of(0.5) * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok(inv)
}

/// Dense solver for symmetric positive (semi)definite systems.
///
/// In the semidefinite case the null space is assumed to be spanned by the
/// all-ones vector (the constant function in a nodal basis). The system is
/// solved on the complement: the right-hand side is projected, and the
/// factorization is of `A + 11ᵀ/n`, which yields the unique mean-zero solution.
#[derive(Debug, Clone)]
pub struct DenseSpdSolver<T> {
    n: usize,
    factor: Vec<T>,
    singular: bool,
}

impl<T: Scalar> DenseSpdSolver<T> {
    pub fn new(a: &[T], n: usize, singular: bool) -> Result<Self> {
        let mut work = a.to_vec();
        if singular {
            // Shift by the same magnitude as the spectrum so conditioning is kept.
            let scale = (0..n).map(|i| a[i * n + i]).fold(T::zero(), |s, d| s + d) / T::of(n as f64);
            let shift = scale / T::of(n as f64);
            for v in work.iter_mut() {
                *v += shift;
            }
        }
        let factor = cholesky(&work, n)?;
        Ok(Self { n, factor, singular })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        if self.singular {
            remove_mean(b);
        }
        cholesky_solve(&self.factor, self.n, b);
        if self.singular {
            remove_mean(b);
        }
    }
}

/// Subtracts the arithmetic mean (Euclidean projection off the ones vector).
pub fn remove_mean<T: Scalar>(v: &mut [T]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().copied().sum::<T>() / T::of(v.len() as f64);
    for x in v.iter_mut() {
        *x -= mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut b = vec![0.0; n * n];
        for v in b.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let mut a = vec![0.0; n * n];
        gemm_tn_acc(n, n, n, &b, &b, &mut a);
        for i in 0..n {
            a[i * n + i] += 0.5;
        }
        a
    }

    #[test]
    fn inverse_is_accurate() {
        let n = 9;
        let a = spd(n, 3);
        let inv = spd_inverse(&a, n).unwrap();
        let mut prod = vec![0.0; n * n];
        gemm_acc(n, n, n, &a, &inv, &mut prod);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * n + j] - e).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(cholesky(&a, 2), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn singular_solver_returns_mean_zero_solution() {
        // 1D Neumann Laplacian: constant null space
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n - 1 {
            a[i * n + i] += 1.0;
            a[(i + 1) * n + i + 1] += 1.0;
            a[i * n + i + 1] -= 1.0;
            a[(i + 1) * n + i] -= 1.0;
        }
        let s = DenseSpdSolver::new(&a, n, true).unwrap();
        let mut b = vec![1.0; n];
        s.solve_in_place(&mut b);
        assert!(b.iter().all(|x: &f64| x.abs() < 1e-12));

        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut ay = vec![0.0; n];
        gemv_acc(n, n, &a, &y, &mut ay);
        let mut x = ay.clone();
        s.solve_in_place(&mut x);
        let mut ax = vec![0.0; n];
        gemv_acc(n, n, &a, &x, &mut ax);
        for (u, v) in ax.iter().zip(&ay) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
    }
}
