use std::time::Instant;

use super::{Hierarchy, Level};
use crate::blocklinalg::dense::{gemv_acc, remove_mean};
use crate::blocklinalg::random_vector;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Scalar};

/// Result of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `‖e_i‖₂` for `i = 0..=N` (residual norms when no reference solution is given).
    pub error_norms: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// Iterations until the relative reduction reached the tolerance.
    pub iterations: usize,
    pub rho: f64,
    pub converged: bool,
    pub seconds: f64,
}

/// Average convergence factor `exp(ln(‖e_N‖/‖e₀‖) / N)` of a norm history.
///
/// Returns 0 for `N = 0` with `e₀ = 0`; an error if `e₀ = 0` with `N ≥ 1`.
pub fn measure_rho(norms: &[f64]) -> Result<f64> {
    let n = norms.len().saturating_sub(1);
    let e0 = *norms.first().ok_or_else(|| Error::UndefinedRho("empty norm history".into()))?;
    if n == 0 {
        return if e0 == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedRho("no iterations".into()))
        };
    }
    if e0 == 0.0 {
        return Err(Error::UndefinedRho("initial error is zero".into()));
    }
    Ok(((norms[n] / e0).ln() / n as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Multigrid,
    Identity,
}

fn sweep<T: Scalar>(level: &Level<T>, b: &[T], x: &mut [T], forward: bool) {
    let a = &level.a;
    let (rd, cd) = (a.row_dim(), a.col_dim());
    let n = a.nrows();
    let mut s = vec![T::zero(); rd];
    let mut order: Box<dyn Iterator<Item = usize>> = if forward { Box::new(0..n) } else { Box::new((0..n).rev()) };
    for i in &mut order {
        s.copy_from_slice(&b[i * rd..(i + 1) * rd]);
        for (j, blk) in a.row(i) {
            let xj = &x[j * cd..(j + 1) * cd];
            for r in 0..rd {
                let row = &blk[r * cd..(r + 1) * cd];
                let mut acc = T::zero();
                for (u, v) in row.iter().zip(xj) {
                    acc += *u * *v;
                }
                s[r] -= acc;
            }
        }
        gemv_acc(rd, rd, level.diag_inv.block(i), &s, &mut x[i * rd..(i + 1) * rd]);
    }
}

impl<T: Scalar> Hierarchy<T> {
    /// `sweeps` block Gauss–Seidel sweeps on level `l`, in element order or reversed.
    pub fn smooth(&self, l: usize, b: &[T], x: &mut [T], forward: bool, sweeps: usize) {
        for _ in 0..sweeps {
            sweep(&self.levels[l], b, x, forward);
        }
    }

    /// One V(ν,ν)-cycle on level `l`, updating `x` in place.
    pub fn vcycle(&self, l: usize, x: &mut [T], b: &[T]) {
        if l + 1 == self.levels.len() {
            let mut rhs = b.to_vec();
            self.bottom_solve(&mut rhs);
            x.copy_from_slice(&rhs);
            return;
        }
        let nu = self.options.nu;
        self.smooth(l, b, x, true, nu);
        let mut r = b.to_vec();
        self.levels[l].a.spmv_acc(-T::one(), x, &mut r);
        let interp = &self.transfers[l].interp;
        let rc = interp.spmv_transpose(&r);
        let mut xc = vec![T::zero(); rc.len()];
        self.vcycle(l + 1, &mut xc, &rc);
        interp.spmv_acc(T::one(), &xc, x);
        self.smooth(l, b, x, false, nu);
    }

    /// Applies one V-cycle from a zero initial guess: `z ≈ A⁻¹ r`.
    pub fn precondition(&self, r: &[T]) -> Vec<T> {
        let mut z = vec![T::zero(); r.len()];
        self.vcycle(0, &mut z, r);
        z
    }

    /// Euclidean norm of `x − reference`, with the mass-weighted mean removed when singular.
    pub fn error_norm(&self, x: &[T], reference: Option<&[T]>) -> f64 {
        let mut e = x.to_vec();
        if let Some(r) = reference {
            axpy(-T::one(), r, &mut e);
        }
        if self.is_singular() {
            let m = &self.levels[0].mass;
            let one = vec![T::one(); e.len()];
            let mean = m.inner(&one, &e) / m.inner(&one, &one);
            e.iter_mut().for_each(|v| *v -= mean);
        }
        norm2(&e).to_f64_lossy()
    }

    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let mut r = b.to_vec();
        self.levels[0].a.spmv_acc(-T::one(), x, &mut r);
        r
    }

    fn finish(&self, errors: Vec<f64>, residuals: Vec<f64>, converged: bool, start: Instant) -> Result<SolveReport> {
        let iterations = errors.len() - 1;
        let rho = if errors[0] == 0.0 { 0.0 } else { measure_rho(&errors)? };
        Ok(SolveReport {
            error_norms: errors,
            residual_norms: residuals,
            iterations,
            rho,
            converged,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Stationary iteration `x ← vcycle(x)` until `‖e_N‖ ≤ tol ‖e₀‖`.
    ///
    /// Errors are measured against `reference` when given, otherwise residual norms are used.
    pub fn solve_vcycles(&self, b: &[T], x: &mut [T], reference: Option<&[T]>, opts: SolveOptions) -> Result<SolveReport> {
        let start = Instant::now();
        let measure = |x: &[T]| -> (f64, f64) {
            let r = norm2(&self.residual(x, b)).to_f64_lossy();
            let e = if reference.is_some() || is_zero(b) { self.error_norm(x, reference) } else { r };
            (e, r)
        };
        let (e0, r0) = measure(x);
        let mut errors = vec![e0];
        let mut residuals = vec![r0];
        if e0 == 0.0 {
            return self.finish(errors, residuals, true, start);
        }
        let mut converged = false;
        for _ in 0..opts.max_iter {
            self.vcycle(0, x, b);
            let (e, r) = measure(x);
            errors.push(e);
            residuals.push(r);
            if !e.is_finite() {
                break;
            }
            if e <= opts.tol * e0 {
                converged = true;
                break;
            }
        }
        self.finish(errors, residuals, converged, start)
    }

    /// Preconditioned conjugate gradients with one V-cycle (or the identity) per application.
    pub fn solve_pcg(&self, b: &[T], x: &mut [T], reference: Option<&[T]>, opts: SolveOptions, pre: Preconditioner) -> Result<SolveReport> {
        let start = Instant::now();
        let singular = self.is_singular();
        let a = &self.levels[0].a;
        let use_error = reference.is_some() || is_zero(b);
        let mut r = self.residual(x, b);
        if singular {
            remove_mean(&mut r);
        }
        let e0 = if use_error { self.error_norm(x, reference) } else { norm2(&r).to_f64_lossy() };
        let mut errors = vec![e0];
        let mut residuals = vec![norm2(&r).to_f64_lossy()];
        if e0 == 0.0 {
            return self.finish(errors, residuals, true, start);
        }
        let apply = |r: &[T]| -> Vec<T> {
            let mut z = match pre {
                Preconditioner::Multigrid => self.precondition(r),
                Preconditioner::Identity => r.to_vec(),
            };
            if singular {
                remove_mean(&mut z);
            }
            z
        };
        let mut z = apply(&r);
        let mut rz = dot(&r, &z);
        if rz < T::zero() {
            return Err(Error::IndefinitePreconditioner(rz.to_f64_lossy()));
        }
        let mut p = z.clone();
        let mut converged = false;
        for _ in 0..opts.max_iter {
            if rz == T::zero() {
                break;
            }
            let ap = a.spmv(&p);
            let pap = dot(&p, &ap);
            if pap <= T::zero() {
                break;
            }
            let alpha = rz / pap;
            axpy(alpha, &p, x);
            axpy(-alpha, &ap, &mut r);
            if singular {
                remove_mean(&mut r);
            }
            let rn = norm2(&r).to_f64_lossy();
            let e = if use_error { self.error_norm(x, reference) } else { rn };
            errors.push(e);
            residuals.push(rn);
            if !e.is_finite() {
                break;
            }
            if e <= opts.tol * e0 {
                converged = true;
                break;
            }
            z = apply(&r);
            let rz_new = dot(&r, &z);
            if rz_new < T::zero() {
                return Err(Error::IndefinitePreconditioner(rz_new.to_f64_lossy()));
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = *zi + beta * *pi;
            }
        }
        self.finish(errors, residuals, converged, start)
    }

    /// MGPCG: CG preconditioned by one V-cycle.
    pub fn solve_mgpcg(&self, b: &[T], x: &mut [T], reference: Option<&[T]>, opts: SolveOptions) -> Result<SolveReport> {
        self.solve_pcg(b, x, reference, opts, Preconditioner::Multigrid)
    }

    /// Convergence-factor protocol: `b = 0`, random `x₀` from `seed`, errors are the iterates.
    pub fn measure(&self, mgpcg: bool, seed: u64, opts: SolveOptions) -> Result<SolveReport> {
        let n = self.levels[0].len();
        let b = vec![T::zero(); n];
        let mut x = random_vector::<T>(n, seed);
        if mgpcg {
            self.solve_mgpcg(&b, &mut x, None, opts)
        } else {
            self.solve_vcycles(&b, &mut x, None, opts)
        }
    }
}

fn is_zero<T: Scalar>(b: &[T]) -> bool {
    b.iter().all(|v| *v == T::zero())
}
