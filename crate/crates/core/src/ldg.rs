//! LDG operators on a mesh level: mass, discrete gradient, penalties, Laplacian and right-hand side.
//!
//! Face and volume matrices are assembled in mass-weighted form (`M·G_k`,
//! `M·T`); the coefficient-space operators are recovered by applying `M⁻¹`.

use crate::blocklinalg::{BlockDiagonal, BlockSparseBuilder, BlockSparseMatrix};
use crate::error::{Error, Result};
use crate::mesh::{Boundary, Face, FaceKind, MeshLevel};
use crate::polybasis::{gauss_legendre, kron, kron_into, Basis1D, Factor};
use crate::scalar::Scalar;

/// How `h` is chosen in `τ = τ̃ / h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyScale {
    /// Smallest adjacent element size, per face.
    Local,
    /// One fixed `h` for every face.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdgConfig {
    pub tau0: f64,
    pub tau_d: f64,
    /// Switch vector `s`; `β = ½ sign(s·n) n`.
    pub switch: [f64; 3],
    pub boundary: Boundary,
    pub penalty_scale: PenaltyScale,
}

impl Default for LdgConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            tau0: 0.01,
            tau_d: 100.0,
            switch: [1.0, 1.0 / pi, 1.0 / (pi * pi)],
            boundary: Boundary::neumann(),
            penalty_scale: PenaltyScale::Local,
        }
    }
}

impl LdgConfig {
    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_tau(mut self, tau0: f64, tau_d: f64) -> Self {
        self.tau0 = tau0;
        self.tau_d = tau_d;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.boundary.validate(dim)?;
        if !(self.tau0 >= 0.0) || !self.tau0.is_finite() {
            return Err(Error::InvalidConfig(format!("tau0 must be finite and >= 0, got {}", self.tau0)));
        }
        if self.boundary.has_dirichlet(dim) && !(self.tau_d > 0.0 && self.tau_d.is_finite()) {
            return Err(Error::InvalidConfig(format!("tauD must be > 0 with Dirichlet faces, got {}", self.tau_d)));
        }
        if let PenaltyScale::Fixed(h) = self.penalty_scale {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig("fixed penalty h must be positive".into()));
            }
        }
        if self.tau0 == 0.0 && !self.boundary.has_dirichlet(dim) {
            log::warn!("tau0 = 0 without Dirichlet faces: the Laplacian may be degenerate beyond constants");
        }
        Ok(())
    }

    /// Weights `(w⁻, w⁺)` of the minus/plus test traces in `⟨ω⟩ + β⟦ω⟧` on a face normal to `axis`.
    fn side_weights(&self, axis: usize) -> (f64, f64) {
        let s = self.switch[axis];
        let sigma = if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        };
        (0.5 * (1.0 + sigma), 0.5 * (1.0 - sigma))
    }

    fn face_h(&self, level: &MeshLevel, face: &Face) -> f64 {
        match self.penalty_scale {
            PenaltyScale::Fixed(h) => h,
            PenaltyScale::Local => {
                let hm = level.h(face.minus);
                face.plus.map_or(hm, |p| hm.min(level.h(p)))
            }
        }
    }
}

/// Scalar DG space: tensor-product degree-`p` polynomials per element.
#[derive(Debug, Clone)]
pub struct DgSpace<T> {
    pub dim: usize,
    pub basis: Basis1D<T>,
}

impl<T: Scalar> DgSpace<T> {
    pub fn new(dim: usize, p: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self {
            dim,
            basis: Basis1D::new(p)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    /// Degrees of freedom per element.
    pub fn block_dim(&self) -> usize {
        self.basis.len().pow(self.dim as u32)
    }

    /// Nodal interpolation of `u` on every element.
    pub fn interpolate<F: Fn([f64; 3]) -> f64>(&self, level: &MeshLevel, u: F) -> Vec<T> {
        let nb = self.basis.len();
        let nodes = self.basis.nodes_f64();
        let bd = self.block_dim();
        let mut out = Vec::with_capacity(level.len() * bd);
        for c in level.cells() {
            let (lo, h) = (c.lower(), c.size());
            for k in 0..bd {
                let idx = crate::polybasis::tensor_index(k, nb, self.dim);
                let mut x = [0.0; 3];
                for a in 0..self.dim {
                    x[a] = lo[a] + h * nodes[idx[a]];
                }
                out.push(T::of(u(x)));
            }
        }
        out
    }
}

/// Operators of one level, mass-weighted where noted.
#[derive(Debug, Clone)]
pub struct LevelOperators<T> {
    pub mass: BlockDiagonal<T>,
    pub mass_inv: BlockDiagonal<T>,
    /// `M·G_k` per spatial component.
    pub weighted_gradient: Vec<BlockSparseMatrix<T>>,
    /// `M·T = τ₀ M E₀ + τ_D M E_D`.
    pub weighted_penalty: BlockSparseMatrix<T>,
    /// `A = Σ G_kᵀ M G_k + M T`.
    pub a: BlockSparseMatrix<T>,
    pub h_level: f64,
}

impl<T: Scalar> LevelOperators<T> {
    /// Assembles `A` from the mass and the weighted gradient/penalty parts.
    pub fn from_parts(
        mass: BlockDiagonal<T>,
        weighted_gradient: Vec<BlockSparseMatrix<T>>,
        weighted_penalty: BlockSparseMatrix<T>,
        h_level: f64,
    ) -> Result<Self> {
        let mass_inv = mass.inverse()?;
        let a = laplacian_from_parts(&mass_inv, &weighted_gradient, &weighted_penalty)?;
        Ok(Self {
            mass,
            mass_inv,
            weighted_gradient,
            weighted_penalty,
            a,
            h_level,
        })
    }

    /// Coefficient-space gradient component `G_k = M⁻¹ (M G_k)`.
    pub fn gradient(&self, k: usize) -> BlockSparseMatrix<T> {
        self.weighted_gradient[k].left_mul_diag(&self.mass_inv).expect("conforming")
    }

    /// Coefficient-space penalty `T`.
    pub fn penalty(&self) -> BlockSparseMatrix<T> {
        self.weighted_penalty.left_mul_diag(&self.mass_inv).expect("conforming")
    }

    /// Divergence component `D_k = −M⁻¹ G_kᵀ M`.
    pub fn divergence(&self, k: usize) -> BlockSparseMatrix<T> {
        let mut d = self.weighted_gradient[k].transpose().left_mul_diag(&self.mass_inv).expect("conforming");
        d.scale(-T::one());
        d
    }
}

/// `A = Σ (M G_k)ᵀ M⁻¹ (M G_k) + M T`.
pub fn laplacian_from_parts<T: Scalar>(
    mass_inv: &BlockDiagonal<T>,
    weighted_gradient: &[BlockSparseMatrix<T>],
    weighted_penalty: &BlockSparseMatrix<T>,
) -> Result<BlockSparseMatrix<T>> {
    let terms: Vec<&BlockSparseMatrix<T>> = weighted_gradient.iter().collect();
    BlockSparseMatrix::weighted_gram_sum(&terms, mass_inv, Some(weighted_penalty))
}

pub fn assemble_mass<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>) -> BlockDiagonal<T> {
    let n = space.basis.len();
    let f = Factor::new(n, n, &space.basis.mass);
    let factors = vec![f; space.dim];
    let bd = space.block_dim();
    let mut data = Vec::with_capacity(level.len() * bd * bd);
    for c in level.cells() {
        data.extend(kron(&factors, T::of(c.size().powi(space.dim as i32))));
    }
    BlockDiagonal::from_flat(level.len(), bd, data)
}

/// Mass-weighted broken gradient `M ∇_h`, one block-diagonal matrix per component.
pub fn weighted_broken_gradient<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>) -> Vec<BlockSparseMatrix<T>> {
    (0..space.dim)
        .map(|k| {
            let mut b = BlockSparseBuilder::new(level.len(), level.len(), space.block_dim(), space.block_dim());
            add_broken_gradient(level, space, k, &mut b);
            b.build()
        })
        .collect()
}

fn add_broken_gradient<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, k: usize, b: &mut BlockSparseBuilder<T>) {
    let n = space.basis.len();
    let factors: Vec<Factor<'_, T>> = (0..space.dim)
        .map(|a| Factor::new(n, n, if a == k { &space.basis.weak_diff } else { &space.basis.mass }))
        .collect();
    for (i, c) in level.cells().iter().enumerate() {
        kron_into(&factors, T::of(c.size().powi(space.dim as i32 - 1)), b.entry(i, i));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Minus,
    Plus,
}

/// Trace/quadrature data for one face patch.
struct FacePatch<'a, T> {
    space: &'a DgSpace<T>,
    face: &'a Face,
    lower: [[f64; 3]; 2],
    size: [f64; 2],
}

impl<'a, T: Scalar> FacePatch<'a, T> {
    fn new(space: &'a DgSpace<T>, level: &MeshLevel, face: &'a Face) -> Self {
        let cm = level.cell(face.minus);
        let mut lower = [cm.lower(), cm.lower()];
        let mut size = [cm.size(), cm.size()];
        if let Some(p) = face.plus {
            let cp = level.cell(p);
            lower[1] = cp.lower();
            lower[1][face.axis] += face.plus_shift;
            size[1] = cp.size();
        }
        Self { space, face, lower, size }
    }

    fn slot(s: Side) -> usize {
        match s {
            Side::Minus => 0,
            Side::Plus => 1,
        }
    }

    fn trace(&self, s: Side) -> &'a [T] {
        let at_right = match s {
            Side::Minus => self.face.normal_sign > 0.0,
            Side::Plus => false,
        };
        self.space.basis.trace(at_right)
    }

    /// `∫_patch φ_i(x; X) φ_j(x; Y)` along tangential axis `a`.
    fn tangential(&self, a: usize, x: Side, y: Side) -> Vec<T> {
        let basis = &self.space.basis;
        let n = basis.len();
        let (lo, hi) = (self.face.lo[a], self.face.hi[a]);
        let (pts, wts) = gauss_legendre(n + 1);
        let (sx, sy) = (Self::slot(x), Self::slot(y));
        let mut out = vec![T::zero(); n * n];
        for (q, w) in pts.iter().zip(&wts) {
            let xq = lo + (hi - lo) * q;
            let vx = basis.values((xq - self.lower[sx][a]) / self.size[sx]);
            let vy = basis.values((xq - self.lower[sy][a]) / self.size[sy]);
            let wq = T::of(w * (hi - lo));
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += wq * vx[i] * vy[j];
                }
            }
        }
        out
    }

    /// Face block `F(X, Y)_ij = ∫_patch φ_i^X φ_j^Y`.
    fn block(&self, x: Side, y: Side) -> Vec<T> {
        let n = self.space.basis.len();
        let (tx, ty) = (self.trace(x), self.trace(y));
        let mut normal = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                normal[i * n + j] = tx[i] * ty[j];
            }
        }
        let tang: Vec<Vec<T>> = (0..self.space.dim)
            .map(|a| if a == self.face.axis { Vec::new() } else { self.tangential(a, x, y) })
            .collect();
        let factors: Vec<Factor<'_, T>> = (0..self.space.dim)
            .map(|a| Factor::new(n, n, if a == self.face.axis { &normal } else { &tang[a] }))
            .collect();
        kron(&factors, T::one())
    }
}

fn element(face: &Face, s: Side) -> usize {
    match s {
        Side::Minus => face.minus,
        Side::Plus => face.plus.expect("interior face"),
    }
}

/// Mass-weighted lifting `M L`, one matrix per component.
pub fn weighted_lifting<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> Vec<BlockSparseMatrix<T>> {
    let mut builders: Vec<_> = (0..space.dim)
        .map(|_| BlockSparseBuilder::new(level.len(), level.len(), space.block_dim(), space.block_dim()))
        .collect();
    add_lifting(level, space, cfg, &mut builders);
    builders.into_iter().map(|b| b.build()).collect()
}

fn add_lifting<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig, builders: &mut [BlockSparseBuilder<T>]) {
    for face in level.faces(&cfg.boundary) {
        let patch = FacePatch::new(space, level, &face);
        let b = &mut builders[face.axis];
        match face.kind {
            FaceKind::Interior => {
                let (wm, wp) = cfg.side_weights(face.axis);
                for (x, w) in [(Side::Minus, wm), (Side::Plus, wp)] {
                    if w == 0.0 {
                        continue;
                    }
                    for (y, sign) in [(Side::Minus, -1.0), (Side::Plus, 1.0)] {
                        b.add_block_scaled(element(&face, x), element(&face, y), T::of(w * sign), &patch.block(x, y));
                    }
                }
            }
            FaceKind::Dirichlet => {
                b.add_block_scaled(face.minus, face.minus, T::of(-face.normal_sign), &patch.block(Side::Minus, Side::Minus));
            }
            FaceKind::Neumann => {}
        }
    }
}

/// Mass-weighted discrete gradient `M G = M ∇_h + M L`.
pub fn weighted_gradient<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> Vec<BlockSparseMatrix<T>> {
    let mut builders: Vec<_> = (0..space.dim)
        .map(|k| {
            let mut b = BlockSparseBuilder::new(level.len(), level.len(), space.block_dim(), space.block_dim());
            add_broken_gradient(level, space, k, &mut b);
            b
        })
        .collect();
    add_lifting(level, space, cfg, &mut builders);
    builders.into_iter().map(|b| b.build()).collect()
}

/// Mass-weighted gradient assembled from the weak form `(q,ω) = −(u, ∇·ω) + ∫ û ω·n`.
///
/// Independent of [`weighted_gradient`]; the two agree when integration by
/// parts is exact.
pub fn weighted_gradient_weak_form<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> Vec<BlockSparseMatrix<T>> {
    let n = space.basis.len();
    let weak_t = crate::blocklinalg::dense::transpose(n, n, &space.basis.weak_diff);
    let mut builders: Vec<_> = (0..space.dim)
        .map(|k| {
            let mut b = BlockSparseBuilder::new(level.len(), level.len(), space.block_dim(), space.block_dim());
            let factors: Vec<Factor<'_, T>> = (0..space.dim)
                .map(|a| Factor::new(n, n, if a == k { &weak_t } else { &space.basis.mass }))
                .collect();
            for (i, c) in level.cells().iter().enumerate() {
                kron_into(&factors, T::of(-c.size().powi(space.dim as i32 - 1)), b.entry(i, i));
            }
            b
        })
        .collect();
    for face in level.faces(&cfg.boundary) {
        let patch = FacePatch::new(space, level, &face);
        let b = &mut builders[face.axis];
        match face.kind {
            FaceKind::Interior => {
                // û = w⁺ u⁻ + w⁻ u⁺
                let (wm, wp) = cfg.side_weights(face.axis);
                for (x, nx) in [(Side::Minus, 1.0), (Side::Plus, -1.0)] {
                    for (y, wy) in [(Side::Minus, wp), (Side::Plus, wm)] {
                        if wy != 0.0 {
                            b.add_block_scaled(element(&face, x), element(&face, y), T::of(nx * wy), &patch.block(x, y));
                        }
                    }
                }
            }
            FaceKind::Neumann => {
                b.add_block_scaled(face.minus, face.minus, T::of(face.normal_sign), &patch.block(Side::Minus, Side::Minus));
            }
            FaceKind::Dirichlet => {}
        }
    }
    builders.into_iter().map(|b| b.build()).collect()
}

/// Mass-weighted penalty operators `(M E₀, M E_D)` without `τ` factors.
pub fn weighted_penalties<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> (BlockSparseMatrix<T>, BlockSparseMatrix<T>) {
    let bd = space.block_dim();
    let mut e0 = BlockSparseBuilder::new(level.len(), level.len(), bd, bd);
    let mut ed = BlockSparseBuilder::new(level.len(), level.len(), bd, bd);
    for face in level.faces(&cfg.boundary) {
        add_penalty_face(level, space, &face, T::one(), T::one(), &mut e0, &mut ed);
    }
    (e0.build(), ed.build())
}

fn add_penalty_face<T: Scalar>(
    level: &MeshLevel,
    space: &DgSpace<T>,
    face: &Face,
    s0: T,
    sd: T,
    e0: &mut BlockSparseBuilder<T>,
    ed: &mut BlockSparseBuilder<T>,
) {
    let patch = FacePatch::new(space, level, face);
    match face.kind {
        FaceKind::Interior => {
            for (x, sx) in [(Side::Minus, 1.0), (Side::Plus, -1.0)] {
                for (y, sy) in [(Side::Minus, 1.0), (Side::Plus, -1.0)] {
                    e0.add_block_scaled(element(face, x), element(face, y), s0 * T::of(sx * sy), &patch.block(x, y));
                }
            }
        }
        FaceKind::Dirichlet => ed.add_block_scaled(face.minus, face.minus, sd, &patch.block(Side::Minus, Side::Minus)),
        FaceKind::Neumann => {}
    }
}

/// Mass-weighted penalty bundle `M T = τ₀ M E₀ + τ_D M E_D`, with `τ = τ̃ / h_face`.
pub fn weighted_penalty<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> BlockSparseMatrix<T> {
    let bd = space.block_dim();
    let mut b = BlockSparseBuilder::new(level.len(), level.len(), bd, bd);
    let mut scratch = BlockSparseBuilder::new(0, level.len(), bd, bd);
    for face in level.faces(&cfg.boundary) {
        let h = cfg.face_h(level, &face);
        let (t0, td) = (T::of(cfg.tau0 / h), T::of(cfg.tau_d / h));
        match face.kind {
            FaceKind::Interior if cfg.tau0 == 0.0 => {}
            FaceKind::Interior => add_penalty_face(level, space, &face, t0, td, &mut b, &mut scratch),
            FaceKind::Dirichlet => add_penalty_face(level, space, &face, t0, td, &mut scratch, &mut b),
            FaceKind::Neumann => {}
        }
    }
    b.build()
}

/// Rediscretizes every operator on `level`.
pub fn assemble<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig) -> Result<LevelOperators<T>> {
    cfg.validate(space.dim)?;
    if level.dim() != space.dim {
        return Err(Error::DimensionMismatch(format!("mesh is {}D, space is {}D", level.dim(), space.dim)));
    }
    let mass = assemble_mass(level, space);
    let mg = weighted_gradient(level, space, cfg);
    let mt = weighted_penalty(level, space, cfg);
    LevelOperators::from_parts(mass, mg, mt, level.min_h())
}

/// Boundary and volume data of `−Δu = f`, `u = g` on Γ_D, `∇u·n = h` on Γ_N.
pub struct RhsData<'a> {
    pub f: &'a dyn Fn([f64; 3]) -> f64,
    pub g: &'a dyn Fn([f64; 3]) -> f64,
    pub h: &'a dyn Fn([f64; 3], [f64; 3]) -> f64,
}

/// Tensor quadrature points and weights for the box `[lo, lo+size]` restricted to `axes`.
fn box_quadrature(dim: usize, lo: [f64; 3], hi: [f64; 3], skip: Option<usize>, nq: usize) -> Vec<([f64; 3], f64)> {
    let (pts, wts) = gauss_legendre(nq);
    let axes: Vec<usize> = (0..dim).filter(|a| Some(*a) != skip).collect();
    let total = nq.pow(axes.len() as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut x = lo;
        let mut w = 1.0;
        let mut t = k;
        for &a in &axes {
            let q = t % nq;
            t /= nq;
            x[a] = lo[a] + (hi[a] - lo[a]) * pts[q];
            w *= wts[q] * (hi[a] - lo[a]);
        }
        out.push((x, w));
    }
    out
}

/// Values of all tensor basis functions of the element `(lo, h)` at `x`.
fn basis_at<T: Scalar>(space: &DgSpace<T>, lo: [f64; 3], h: f64, x: [f64; 3]) -> Vec<T> {
    let per_axis: Vec<Vec<T>> = (0..space.dim).map(|a| space.basis.values((x[a] - lo[a]) / h)).collect();
    let n = space.basis.len();
    (0..space.block_dim())
        .map(|k| {
            let idx = crate::polybasis::tensor_index(k, n, space.dim);
            (0..space.dim).fold(T::one(), |acc, a| acc * per_axis[a][idx[a]])
        })
        .collect()
}

/// Right-hand side `ℓ` of `A u = ℓ` (mass included).
pub fn assemble_rhs<T: Scalar>(level: &MeshLevel, space: &DgSpace<T>, cfg: &LdgConfig, ops: &LevelOperators<T>, data: &RhsData<'_>) -> Vec<T> {
    let dim = space.dim;
    let bd = space.block_dim();
    let nq = space.degree() + 4;
    let mut ell = vec![T::zero(); level.len() * bd];
    for (e, c) in level.cells().iter().enumerate() {
        let lo = c.lower();
        let mut hi = lo;
        for a in 0..dim {
            hi[a] += c.size();
        }
        for (x, w) in box_quadrature(dim, lo, hi, None, nq) {
            let fx = T::of(w * (data.f)(x));
            for (dst, v) in ell[e * bd..(e + 1) * bd].iter_mut().zip(basis_at(space, lo, c.size(), x)) {
                *dst += fx * v;
            }
        }
    }
    // M J_D per component, then ℓ -= Σ G_kᵀ (M J_D)_k
    let mut mjd: Vec<Vec<T>> = vec![vec![T::zero(); level.len() * bd]; dim];
    let mut saw_dirichlet = false;
    for face in level.faces(&cfg.boundary) {
        if face.kind == FaceKind::Interior {
            continue;
        }
        let c = level.cell(face.minus);
        let (lo, h) = (c.lower(), c.size());
        let e = face.minus;
        let mut normal = [0.0; 3];
        normal[face.axis] = face.normal_sign;
        let tau_d = cfg.tau_d / cfg.face_h(level, &face);
        for (x, w) in box_quadrature(dim, face.lo, face.hi, Some(face.axis), nq) {
            let phi = basis_at(space, lo, h, x);
            match face.kind {
                FaceKind::Dirichlet => {
                    saw_dirichlet = true;
                    let gx = (data.g)(x) * w;
                    for (k, v) in phi.iter().enumerate() {
                        mjd[face.axis][e * bd + k] += T::of(gx * face.normal_sign) * *v;
                        ell[e * bd + k] += T::of(tau_d * gx) * *v;
                    }
                }
                FaceKind::Neumann => {
                    let hx = T::of((data.h)(x, normal) * w);
                    for (k, v) in phi.iter().enumerate() {
                        ell[e * bd + k] += hx * *v;
                    }
                }
                FaceKind::Interior => unreachable!(),
            }
        }
    }
    if saw_dirichlet {
        for (k, v) in mjd.iter().enumerate() {
            let minv_v = ops.mass_inv.apply(v);
            let gt = ops.weighted_gradient[k].spmv_transpose(&minv_v);
            for (l, g) in ell.iter_mut().zip(&gt) {
                *l -= *g;
            }
        }
    } else if probe_nonzero(data.g) {
        log::warn!("Dirichlet data supplied but the mesh has no Dirichlet faces; ignored");
    }
    ell
}

fn probe_nonzero(g: &dyn Fn([f64; 3]) -> f64) -> bool {
    [[0.0, 0.0, 0.0], [0.3, 0.7, 0.1], [1.0, 0.5, 0.25]].iter().any(|x| g(*x) != 0.0)
}

/// `‖u_h − u‖_{L²(Ω)}` by tensor quadrature with `p + 4` points per axis.
pub fn l2_error<T: Scalar, F: Fn([f64; 3]) -> f64>(level: &MeshLevel, space: &DgSpace<T>, coeffs: &[T], exact: F) -> f64 {
    let dim = space.dim;
    let bd = space.block_dim();
    let nq = space.degree() + 4;
    let mut err = 0.0;
    for (e, c) in level.cells().iter().enumerate() {
        let lo = c.lower();
        let mut hi = lo;
        for a in 0..dim {
            hi[a] += c.size();
        }
        let ce = &coeffs[e * bd..(e + 1) * bd];
        for (x, w) in box_quadrature(dim, lo, hi, None, nq) {
            let uh: f64 = basis_at(space, lo, c.size(), x)
                .iter()
                .zip(ce)
                .map(|(v, cv)| (*v * *cv).to_f64_lossy())
                .sum();
            let d = uh - exact(x);
            err += w * d * d;
        }
    }
    err.sqrt()
}

/// Built-in manufactured solutions of `−Δu = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    /// `u = Π_a sin(π x_a)`
    SinProduct,
    /// `u = 1 + x₀x₁ + Σ_a c_a x_a^q`, contained in `𝒬_q` for `q ≥ 1`.
    Polynomial(u32),
}

impl Manufactured {
    pub fn name(&self) -> String {
        match self {
            Self::SinProduct => "sin-product".into(),
            Self::Polynomial(q) => format!("polynomial{q}"),
        }
    }

    const COEFFS: [f64; 3] = [1.0, -2.0, 0.5];

    pub fn u(&self, x: [f64; 3], dim: usize) -> f64 {
        match *self {
            Self::SinProduct => (0..dim).map(|a| (std::f64::consts::PI * x[a]).sin()).product(),
            Self::Polynomial(q) => 1.0 + x[0] * x[1] + (0..dim).map(|a| Self::COEFFS[a] * x[a].powi(q as i32)).sum::<f64>(),
        }
    }

    pub fn grad(&self, x: [f64; 3], dim: usize) -> [f64; 3] {
        let mut g = [0.0; 3];
        match *self {
            Self::SinProduct => {
                let pi = std::f64::consts::PI;
                for a in 0..dim {
                    g[a] = (0..dim)
                        .map(|b| if a == b { pi * (pi * x[b]).cos() } else { (pi * x[b]).sin() })
                        .product();
                }
            }
            Self::Polynomial(q) => {
                for a in 0..dim {
                    g[a] = Self::COEFFS[a] * q as f64 * x[a].powi(q as i32 - 1);
                }
                g[0] += x[1];
                g[1] += x[0];
            }
        }
        g
    }

    /// `f = −Δu`
    pub fn f(&self, x: [f64; 3], dim: usize) -> f64 {
        match *self {
            Self::SinProduct => dim as f64 * std::f64::consts::PI.powi(2) * self.u(x, dim),
            Self::Polynomial(q) => {
                if q < 2 {
                    return 0.0;
                }
                -(0..dim)
                    .map(|a| Self::COEFFS[a] * (q * (q - 1)) as f64 * x[a].powi(q as i32 - 2))
                    .sum::<f64>()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocklinalg::random_vector;
    use crate::mesh::{BcKind, MeshHierarchy};
    use crate::scalar::dot;

    fn ops(dim: usize, n: usize, p: usize, cfg: &LdgConfig) -> (MeshHierarchy, DgSpace<f64>, LevelOperators<f64>) {
        let mesh = MeshHierarchy::uniform(dim, n).unwrap();
        let space = DgSpace::new(dim, p).unwrap();
        let ops = assemble(mesh.finest(), &space, cfg).unwrap();
        (mesh, space, ops)
    }

    #[test]
    fn total_mass_is_volume() {
        let mesh = MeshHierarchy::preset(2, "corner", 4).unwrap();
        let space = DgSpace::<f64>::new(2, 2).unwrap();
        let m = assemble_mass(mesh.finest(), &space);
        let one = vec![1.0; mesh.finest().len() * space.block_dim()];
        assert!((m.inner(&one, &one) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn broken_gradient_of_x_is_one() {
        let (mesh, space, _) = ops(2, 4, 2, &LdgConfig::default());
        let mg = weighted_broken_gradient(mesh.finest(), &space);
        let m = assemble_mass(mesh.finest(), &space);
        let minv = m.inverse().unwrap();
        let u = space.interpolate(mesh.finest(), |x| x[0]);
        let gx = minv.apply(&mg[0].spmv(&u));
        let gy = minv.apply(&mg[1].spmv(&u));
        assert!(gx.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(gy.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn continuous_function_has_no_lifting_or_jump_penalty() {
        let cfg = LdgConfig::default();
        let mesh = MeshHierarchy::preset(2, "corner", 4).unwrap();
        let space = DgSpace::<f64>::new(2, 2).unwrap();
        let lvl = mesh.finest();
        let u = space.interpolate(lvl, |x| x[0] * x[0] - 2.0 * x[0] * x[1] + 0.3);
        for l in weighted_lifting(lvl, &space, &cfg) {
            assert!(l.spmv(&u).iter().all(|v| v.abs() < 1e-13));
        }
        let (e0, _) = weighted_penalties(lvl, &space, &cfg);
        assert!(e0.spmv(&u).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn one_sided_lifting_lands_in_minus_element() {
        // two elements along x at n = 2; u = indicator of the left column
        let cfg = LdgConfig::default();
        let mesh = MeshHierarchy::uniform(2, 2).unwrap();
        let space = DgSpace::<f64>::new(2, 1).unwrap();
        let lvl = mesh.finest();
        let u: Vec<f64> = lvl
            .cells()
            .iter()
            .flat_map(|c| [if c.coords[0] == 0 { 1.0 } else { 0.0 }; 4])
            .collect();
        let l = weighted_lifting(lvl, &space, &cfg);
        let r = l[0].spmv(&u);
        for (e, c) in lvl.cells().iter().enumerate() {
            let s: f64 = r[e * 4..(e + 1) * 4].iter().sum();
            // ∫(Lu)_x over the left element = −∫_face [u] = −1/2
            let want = if c.coords[0] == 0 { -0.5 } else { 0.0 };
            assert!((s - want).abs() < 1e-14, "element {e}: {s}");
        }
    }

    #[test]
    fn dirichlet_penalty_measures_boundary() {
        let cfg = LdgConfig::default().with_boundary(Boundary::dirichlet());
        let mesh = MeshHierarchy::uniform(3, 2).unwrap();
        let space = DgSpace::<f64>::new(3, 1).unwrap();
        let (_, ed) = weighted_penalties(mesh.finest(), &space, &cfg);
        let one = vec![1.0; 8 * 8];
        assert!((dot(&one, &ed.spmv(&one)) - 6.0).abs() < 1e-13);
    }

    #[test]
    fn laplacian_is_symmetric_psd_with_constant_nullspace() {
        let (mesh, space, ops) = ops(2, 4, 2, &LdgConfig::default());
        assert!(ops.a.symmetry_defect() < 1e-12);
        let one = vec![1.0; mesh.finest().len() * space.block_dim()];
        assert!(ops.a.spmv(&one).iter().all(|v| v.abs() < 1e-11));
        for seed in 0..20 {
            let x = random_vector::<f64>(one.len(), seed);
            assert!(dot(&x, &ops.a.spmv(&x)) >= -1e-10);
        }
    }

    #[test]
    fn strong_weak_matches_weak_form() {
        for bc in [BcKind::Neumann, BcKind::Dirichlet, BcKind::Periodic] {
            let cfg = LdgConfig::default().with_boundary(Boundary::uniform(bc));
            let mesh = MeshHierarchy::uniform(2, 4).unwrap();
            let space = DgSpace::<f64>::new(2, 3).unwrap();
            let a = weighted_gradient(mesh.finest(), &space, &cfg);
            let b = weighted_gradient_weak_form(mesh.finest(), &space, &cfg);
            for k in 0..2 {
                assert!(a[k].relative_diff(&b[k]).unwrap() < 1e-12);
            }
        }
        let cfg = LdgConfig::default();
        let mesh = MeshHierarchy::preset(3, "corner", 3).unwrap();
        let space = DgSpace::<f64>::new(3, 2).unwrap();
        let a = weighted_gradient(mesh.finest(), &space, &cfg);
        let b = weighted_gradient_weak_form(mesh.finest(), &space, &cfg);
        for k in 0..3 {
            assert!(a[k].relative_diff(&b[k]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero_rhs_and_unit_source_integrates() {
        let cfg = LdgConfig::default();
        let (mesh, space, ops) = ops(2, 4, 2, &cfg);
        let zero = |_: [f64; 3]| 0.0;
        let zero_h = |_: [f64; 3], _: [f64; 3]| 0.0;
        let one = |_: [f64; 3]| 1.0;
        let ell = assemble_rhs(mesh.finest(), &space, &cfg, &ops, &RhsData { f: &zero, g: &zero, h: &zero_h });
        assert!(ell.iter().all(|v| *v == 0.0));
        let ell = assemble_rhs(mesh.finest(), &space, &cfg, &ops, &RhsData { f: &one, g: &zero, h: &zero_h });
        assert!((ell.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
