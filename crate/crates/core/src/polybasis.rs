//! Reference-interval machinery on `[0, 1]`: Gauss–Lobatto nodal bases,
//! Gauss–Legendre quadrature, 1D mass/derivative/trace matrices and the 1D
//! h-refinement and p-embedding matrices every tensor-product operator is
//! built from.
//!
//! All 1D matrices are dense row-major `(rows × cols)`.
//! Nodes and weights are computed in `f64` by Newton iteration on the
//! Legendre three-term recurrence and then converted to the target scalar.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_DEGREE: usize = 8;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    // (1 - x^2) P_n' = n (P_{n-1} - x P_n); only used away from x = ±1.
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        nf * (p0 - x * p1) / (1.0 - x * x)
    } else {
        0.5 * nf * (nf + 1.0) * x.signum().powi(n as i32 + 1)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre_ref(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Tricomi initial guess, refined by Newton.
        let mut r = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, r);
            let dx = p / dp;
            r -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, r);
        x[i] = r;
        w[i] = 2.0 / ((1.0 - r * r) * dp * dp);
    }
    (x, w)
}

/// Gauss–Lobatto points on `[-1, 1]`: the endpoints plus the roots of `P_p'`.
fn gauss_lobatto_ref(p: usize) -> Vec<f64> {
    let mut x = vec![0.0; p + 1];
    x[0] = -1.0;
    x[p] = 1.0;
    let nf = p as f64;
    for i in 1..p {
        let mut r = -(std::f64::consts::PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre(p, r);
            // P'' from the Legendre ODE.
            let d2 = (2.0 * r * dpn - nf * (nf + 1.0) * pn) / (1.0 - r * r);
            let dx = dpn / d2;
            r -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        x[i] = r;
    }
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    x
}

/// Gauss–Legendre quadrature with `n` points mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_ref(n);
    (
        x.iter().map(|xi| 0.5 * (xi + 1.0)).collect(),
        w.iter().map(|wi| 0.5 * wi).collect(),
    )
}

/// Gauss–Lobatto nodes of degree `p` mapped to `[0, 1]`.
pub fn gauss_lobatto(p: usize) -> Vec<f64> {
    let mut x: Vec<f64> = gauss_lobatto_ref(p).iter().map(|xi| 0.5 * (xi + 1.0)).collect();
    x[0] = 0.0;
    x[p] = 1.0;
    x
}

/// Values of every Lagrange polynomial on `nodes` at `x`.
pub fn lagrange_values(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let mut v = 1.0;
            for m in 0..n {
                if m != j {
                    v *= (x - nodes[m]) / (nodes[j] - nodes[m]);
                }
            }
            v
        })
        .collect()
}

/// Derivatives of every Lagrange polynomial on `nodes` at `x`.
pub fn lagrange_derivatives(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let mut s = 0.0;
            for k in 0..n {
                if k == j {
                    continue;
                }
                let mut term = 1.0 / (nodes[j] - nodes[k]);
                for m in 0..n {
                    if m != j && m != k {
                        term *= (x - nodes[m]) / (nodes[j] - nodes[m]);
                    }
                }
                s += term;
            }
            s
        })
        .collect()
}

/// Degree-`p` Gauss–Lobatto nodal basis on the reference interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Basis1D<T> {
    pub degree: usize,
    pub nodes: Vec<T>,
    /// `p + 2` Gauss–Legendre points; exact to degree `2p + 3`.
    pub quad_points: Vec<T>,
    pub quad_weights: Vec<T>,
    /// `mass[i][j] = ∫ φ_i φ_j`
    pub mass: Vec<T>,
    /// Nodal derivative matrix, `diff[i][j] = φ_j'(x_i)`.
    pub diff: Vec<T>,
    /// `weak_diff[i][j] = ∫ φ_i φ_j'`
    pub weak_diff: Vec<T>,
    pub trace_left: Vec<T>,
    pub trace_right: Vec<T>,
    nodes_f64: Vec<f64>,
}

impl<T: Scalar> Basis1D<T> {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::UnsupportedDegree(p));
        }
        let n = p + 1;
        let nodes_f64 = gauss_lobatto(p);
        let (qx, qw) = gauss_legendre(p + 2);

        let mut mass = vec![0.0; n * n];
        let mut weak_diff = vec![0.0; n * n];
        for (&x, &w) in qx.iter().zip(&qw) {
            let v = lagrange_values(&nodes_f64, x);
            let d = lagrange_derivatives(&nodes_f64, x);
            for i in 0..n {
                for j in 0..n {
                    mass[i * n + j] += w * v[i] * v[j];
                    weak_diff[i * n + j] += w * v[i] * d[j];
                }
            }
        }
        let mut diff = vec![0.0; n * n];
        for i in 0..n {
            let d = lagrange_derivatives(&nodes_f64, nodes_f64[i]);
            diff[i * n..(i + 1) * n].copy_from_slice(&d);
        }
        let mut trace_left = vec![0.0; n];
        let mut trace_right = vec![0.0; n];
        trace_left[0] = 1.0;
        trace_right[p] = 1.0;

        let cast = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        Ok(Self {
            degree: p,
            nodes: cast(&nodes_f64),
            quad_points: cast(&qx),
            quad_weights: cast(&qw),
            mass: cast(&mass),
            diff: cast(&diff),
            weak_diff: cast(&weak_diff),
            trace_left: cast(&trace_left),
            trace_right: cast(&trace_right),
            nodes_f64,
        })
    }

    /// Number of nodes, `p + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes_f64(&self) -> &[f64] {
        &self.nodes_f64
    }

    /// Basis values at a reference coordinate (any real `x`, not only `[0, 1]`).
    pub fn values(&self, x: f64) -> Vec<T> {
        lagrange_values(&self.nodes_f64, x).into_iter().map(T::of).collect()
    }

    pub fn derivatives(&self, x: f64) -> Vec<T> {
        lagrange_derivatives(&self.nodes_f64, x).into_iter().map(T::of).collect()
    }

    /// Trace vector at reference coordinate 0 or 1.
    pub fn trace(&self, at_right: bool) -> &[T] {
        if at_right {
            &self.trace_right
        } else {
            &self.trace_left
        }
    }
}

/// 1D transfer matrices for a degree-`p` basis.
#[derive(Debug, Clone)]
pub struct Embedding1D<T> {
    pub degree: usize,
    /// `child_interp[c][i][j] = φ_j((x_i + c) / 2)`: parent basis evaluated at
    /// the nodes of child `c` (`0` ↔ `[0, ½]`, `1` ↔ `[½, 1]`).
    pub child_interp: [Vec<T>; 2],
}

impl<T: Scalar> Embedding1D<T> {
    pub fn new(p: usize) -> Result<Self> {
        let basis = Basis1D::<f64>::new(p)?;
        let nodes = basis.nodes_f64();
        let n = p + 1;
        let make = |c: f64| {
            let mut m = vec![T::zero(); n * n];
            for i in 0..n {
                let v = lagrange_values(nodes, 0.5 * (nodes[i] + c));
                for j in 0..n {
                    m[i * n + j] = T::of(v[j]);
                }
            }
            m
        };
        Ok(Self {
            degree: p,
            child_interp: [make(0.0), make(1.0)],
        })
    }
}

/// `(p_hi + 1) × (p_lo + 1)` matrix evaluating the degree-`p_lo` basis at the
/// degree-`p_hi` nodes.
pub fn p_embedding<T: Scalar>(p_lo: usize, p_hi: usize) -> Result<Vec<T>> {
    let lo = Basis1D::<f64>::new(p_lo)?;
    let hi = Basis1D::<f64>::new(p_hi)?;
    let (nl, nh) = (p_lo + 1, p_hi + 1);
    let mut m = vec![T::zero(); nh * nl];
    for i in 0..nh {
        let v = lagrange_values(lo.nodes_f64(), hi.nodes_f64()[i]);
        for j in 0..nl {
            m[i * nl + j] = T::of(v[j]);
        }
    }
    Ok(m)
}

/// A dense 1D factor of a tensor-product matrix.
#[derive(Debug, Clone, Copy)]
pub struct Factor<'a, T> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [T],
}

impl<'a, T> Factor<'a, T> {
    pub fn new(rows: usize, cols: usize, data: &'a [T]) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }
}

/// Tensor (Kronecker) product of per-axis factors, scaled by `scale`.
///
/// `factors[0]` acts on the x index, which varies fastest in the flattened
/// degree-of-freedom numbering.
pub fn kron<T: Scalar>(factors: &[Factor<'_, T>], scale: T) -> Vec<T> {
    let rows: usize = factors.iter().map(|f| f.rows).product();
    let cols: usize = factors.iter().map(|f| f.cols).product();
    let mut out = vec![T::zero(); rows * cols];
    kron_into(factors, scale, &mut out);
    out
}

/// Accumulating variant of [`kron`]: `out += scale * ⊗ factors`.
pub fn kron_into<T: Scalar>(factors: &[Factor<'_, T>], scale: T, out: &mut [T]) {
    let rows: usize = factors.iter().map(|f| f.rows).product();
    let cols: usize = factors.iter().map(|f| f.cols).product();
    debug_assert_eq!(out.len(), rows * cols);
    let d = factors.len();
    let mut ri = [0usize; 3];
    for r in 0..rows {
        let mut t = r;
        for a in 0..d {
            ri[a] = t % factors[a].rows;
            t /= factors[a].rows;
        }
        let mut ci = [0usize; 3];
        for c in 0..cols {
            let mut v = scale;
            for a in 0..d {
                v *= factors[a].data[ri[a] * factors[a].cols + ci[a]];
            }
            out[r * cols + c] += v;
            // odometer increment of the column multi-index
            for a in 0..d {
                ci[a] += 1;
                if ci[a] < factors[a].cols {
                    break;
                }
                ci[a] = 0;
            }
        }
    }
}

/// Splits a flattened tensor index into per-axis indices.
pub fn tensor_index(mut idx: usize, n: usize, dim: usize) -> [usize; 3] {
    let mut out = [0; 3];
    for o in out.iter_mut().take(dim) {
        *o = idx % n;
        idx /= n;
    }
    out
}
