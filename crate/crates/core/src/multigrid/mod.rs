//! Operator-coarsened multigrid hierarchies for the LDG Laplacian.

mod solve;

pub use solve::{measure_rho, Preconditioner, SolveOptions, SolveReport};

use std::fmt;
use std::str::FromStr;

use crate::blocklinalg::{BlockDiagonal, BlockSparseMatrix, DenseSpdSolver};
use crate::error::{Error, Result};
use crate::ldg::{assemble, assemble_rhs, l2_error, laplacian_from_parts, DgSpace, LdgConfig, LevelOperators, Manufactured, RhsData};
use crate::mesh::MeshHierarchy;
use crate::scalar::Scalar;
use crate::transfer::{build_h_interpolation, build_p_interpolation, coarse_mass, coarsen_weighted, TransferKind, TransferPair};

/// How coarse operators are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coarsening {
    /// `A_c = 𝒞(A_f)`
    Primal,
    /// `A_c = Σ 𝒞(G_f)ᵀ M_c 𝒞(G_f) + M_c 𝒞(T_f)`
    Flux,
}

/// Which transfers make up the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MgKind {
    /// Tree coarsening down to the root at fixed degree.
    H,
    /// Degree halving down to `p = 1`, then a direct solve if small, else tree coarsening.
    P,
    /// Degree halving down to `p = 1`, then tree coarsening.
    Hp,
}

macro_rules! string_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!("unknown {} '{}'", stringify!($ty), other))),
                }
            }
        }
    };
}

string_enum!(Coarsening, Coarsening::Primal => "primal", Coarsening::Flux => "flux");
string_enum!(MgKind, MgKind::H => "h", MgKind::P => "p", MgKind::Hp => "hp");

/// Largest system solved densely at the bottom of a p-hierarchy.
pub const DENSE_BOTTOM_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyOptions {
    pub mode: Coarsening,
    /// Pre- and post-smoothing sweeps.
    pub nu: usize,
    /// Keep the weighted gradient/penalty of every level (flux mode only).
    pub keep_flux: bool,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            mode: Coarsening::Flux,
            nu: 3,
            keep_flux: false,
        }
    }
}

/// Mass-weighted flux-formulation parts of one level.
#[derive(Debug, Clone)]
pub struct FluxParts<T> {
    pub weighted_gradient: Vec<BlockSparseMatrix<T>>,
    pub weighted_penalty: BlockSparseMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct Level<T> {
    pub a: BlockSparseMatrix<T>,
    pub mass: BlockDiagonal<T>,
    /// Inverses of the diagonal blocks of `a`; empty on the bottom level.
    pub diag_inv: BlockDiagonal<T>,
    pub flux: Option<FluxParts<T>>,
    pub degree: usize,
}

impl<T: Scalar> Level<T> {
    fn new(a: BlockSparseMatrix<T>, mass: BlockDiagonal<T>, flux: Option<FluxParts<T>>, degree: usize, bottom: bool) -> Result<Self> {
        let diag_inv = if bottom {
            BlockDiagonal::from_flat(0, a.row_dim(), Vec::new())
        } else {
            a.diagonal_blocks()?.inverse()?
        };
        Ok(Self {
            a,
            mass,
            diag_inv,
            flux,
            degree,
        })
    }

    pub fn len(&self) -> usize {
        self.a.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `A = Σ (MG_k)ᵀ M⁻¹ (MG_k) + MT` rebuilt from stored flux parts.
    pub fn reassembled(&self) -> Option<Result<BlockSparseMatrix<T>>> {
        self.flux.as_ref().map(|f| {
            let minv = self.mass.inverse()?;
            laplacian_from_parts(&minv, &f.weighted_gradient, &f.weighted_penalty)
        })
    }
}

/// Multigrid hierarchy: levels from finest (`levels[0]`) to the bottom.
#[derive(Debug, Clone)]
pub struct Hierarchy<T> {
    pub levels: Vec<Level<T>>,
    /// `transfers[l]` interpolates from `levels[l + 1]` to `levels[l]`.
    pub transfers: Vec<TransferPair<T>>,
    pub options: HierarchyOptions,
    singular: bool,
    bottom: DenseSpdSolver<T>,
}

/// One step of the transfer chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Coarsen the mesh from tree level `from` to `from + 1`.
    H { from: usize },
    /// Lower the degree.
    P { from: usize, to: usize },
}

/// Transfer steps for a hierarchy of the given kind on `mesh` starting at degree `p`.
pub fn plan(mesh: &MeshHierarchy, p: usize, kind: MgKind) -> Vec<Step> {
    let mut steps = Vec::new();
    let mut cur = p;
    if kind != MgKind::H {
        while cur > 1 {
            let next = cur.div_ceil(2);
            steps.push(Step::P { from: cur, to: next });
            cur = next;
        }
    }
    let fine_dofs = mesh.finest().len() * (cur + 1).pow(mesh.dim() as u32);
    if kind != MgKind::P || fine_dofs > DENSE_BOTTOM_LIMIT {
        steps.extend((0..mesh.depth() - 1).map(|from| Step::H { from }));
    }
    steps
}

/// Builds the interpolation operators for a plan.
pub fn build_transfers<T: Scalar>(mesh: &MeshHierarchy, p: usize, steps: &[Step]) -> Result<Vec<TransferPair<T>>> {
    let mut cur_p = p;
    let dim = mesh.dim();
    steps
        .iter()
        .map(|s| match *s {
            Step::P { from, to } => {
                if from != cur_p {
                    return Err(Error::Structure(format!("p-step from {from} but current degree is {cur_p}")));
                }
                cur_p = to;
                Ok(TransferPair {
                    interp: build_p_interpolation(mesh.finest().len(), dim, from, to)?,
                    kind: TransferKind::P,
                    fine_degree: from,
                    coarse_degree: to,
                })
            }
            Step::H { from } => Ok(TransferPair {
                interp: build_h_interpolation(&mesh.levels[from], &mesh.levels[from + 1], &mesh.parents[from], cur_p)?,
                kind: TransferKind::H,
                fine_degree: cur_p,
                coarse_degree: cur_p,
            }),
        })
        .collect()
}

impl<T: Scalar> Hierarchy<T> {
    /// Coarsens `fine` through `transfers` per the chosen mode.
    pub fn build(fine: LevelOperators<T>, degree: usize, transfers: Vec<TransferPair<T>>, options: HierarchyOptions) -> Result<Self> {
        let LevelOperators {
            mass,
            weighted_gradient,
            weighted_penalty,
            a,
            ..
        } = fine;
        let singular = detect_singular(&a);
        let mut flux = match options.mode {
            Coarsening::Flux => Some(FluxParts {
                weighted_gradient,
                weighted_penalty,
            }),
            Coarsening::Primal => None,
        };
        let mut levels = Vec::with_capacity(transfers.len() + 1);
        let mut cur_a = a;
        let mut cur_m = mass;
        let mut cur_p = degree;
        for (l, t) in transfers.iter().enumerate() {
            if t.interp.rows() != cur_a.rows() || t.fine_degree != cur_p {
                return Err(Error::DimensionMismatch(format!("transfer {l} has {} fine rows, level has {}", t.interp.rows(), cur_a.rows())));
            }
            let mc = coarse_mass(&t.interp, &cur_m)?;
            let (ac, next_flux) = match options.mode {
                Coarsening::Primal => (coarsen_weighted(&cur_a, &t.interp)?, None),
                Coarsening::Flux => {
                    let f = flux.as_ref().expect("flux parts");
                    let mg: Vec<_> = f
                        .weighted_gradient
                        .iter()
                        .map(|g| coarsen_weighted(g, &t.interp))
                        .collect::<Result<_>>()?;
                    let mt = coarsen_weighted(&f.weighted_penalty, &t.interp)?;
                    let ac = laplacian_from_parts(&mc.inverse()?, &mg, &mt)?;
                    (
                        ac,
                        Some(FluxParts {
                            weighted_gradient: mg,
                            weighted_penalty: mt,
                        }),
                    )
                }
            };
            let kept = if options.keep_flux { flux.take() } else { None };
            levels.push(Level::new(cur_a, cur_m, kept, cur_p, false)?);
            flux = next_flux;
            cur_a = ac;
            cur_m = mc;
            cur_p = t.coarse_degree;
        }
        let bottom_dense = cur_a.to_dense();
        let bottom = DenseSpdSolver::new(&bottom_dense, cur_a.rows(), singular)?;
        let kept = if options.keep_flux { flux.take() } else { None };
        levels.push(Level::new(cur_a, cur_m, kept, cur_p, true)?);
        Ok(Self {
            levels,
            transfers,
            options,
            singular,
            bottom,
        })
    }

    /// Whether the finest operator annihilates constants (pure Neumann / periodic).
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &Level<T> {
        &self.levels[0]
    }

    /// Memory held by all level operators, in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.levels
            .iter()
            .map(|l| {
                l.a.memory_bytes()
                    + l.flux.as_ref().map_or(0, |f| {
                        f.weighted_penalty.memory_bytes() + f.weighted_gradient.iter().map(|g| g.memory_bytes()).sum::<usize>()
                    })
            })
            .sum::<usize>()
            + self.transfers.iter().map(|t| t.interp.memory_bytes()).sum::<usize>()
    }

    pub(crate) fn bottom_solve(&self, b: &mut [T]) {
        self.bottom.solve_in_place(b);
    }
}

fn detect_singular<T: Scalar>(a: &BlockSparseMatrix<T>) -> bool {
    let one = vec![T::one(); a.cols()];
    let r = a.spmv(&one);
    let rmax = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    rmax <= T::of(1e-10) * a.max_abs()
}

/// Mesh description for [`Problem::setup`].
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Uniform { n: usize },
    Adaptive { preset: String, max_level: u8 },
}

impl MeshSpec {
    pub fn build(&self, dim: usize) -> Result<MeshHierarchy> {
        match self {
            Self::Uniform { n } => MeshHierarchy::uniform(dim, *n),
            Self::Adaptive { preset, max_level } => MeshHierarchy::preset(dim, preset, *max_level),
        }
    }
}

/// Everything needed to build a discretization and its hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub mesh: MeshSpec,
    pub p: usize,
    pub ldg: LdgConfig,
    pub kind: MgKind,
    pub hierarchy: HierarchyOptions,
}

/// A discretized problem with its multigrid hierarchy.
pub struct Problem<T> {
    pub mesh: MeshHierarchy,
    pub space: DgSpace<T>,
    pub hierarchy: Hierarchy<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn setup(spec: &ProblemSpec) -> Result<Self> {
        let mesh = spec.mesh.build(spec.dim)?;
        let space = DgSpace::new(spec.dim, spec.p)?;
        let steps = plan(&mesh, spec.p, spec.kind);
        let transfers = build_transfers(&mesh, spec.p, &steps)?;
        let ops = assemble(mesh.finest(), &space, &spec.ldg)?;
        let hierarchy = Hierarchy::build(ops, spec.p, transfers, spec.hierarchy)?;
        Ok(Self { mesh, space, hierarchy })
    }
}

/// Discrete solution of a manufactured problem and its accuracy.
#[derive(Debug, Clone)]
pub struct ManufacturedSolve<T> {
    pub coeffs: Vec<T>,
    pub l2_error: f64,
    pub report: SolveReport,
}

/// Solves `−Δu = f` with the data of `case` on a uniform `n^dim` mesh by flux-coarsened MGPCG.
///
/// Boundary data are taken from the exact solution on every side kind in `cfg.boundary`.
pub fn solve_manufactured<T: Scalar>(dim: usize, n: usize, p: usize, case: Manufactured, cfg: &LdgConfig, opts: SolveOptions) -> Result<ManufacturedSolve<T>> {
    let mesh = MeshHierarchy::uniform(dim, n)?;
    let space = DgSpace::<T>::new(dim, p)?;
    let ops = assemble(mesh.finest(), &space, cfg)?;
    let f = |x: [f64; 3]| case.f(x, dim);
    let g = |x: [f64; 3]| case.u(x, dim);
    let h = |x: [f64; 3], nrm: [f64; 3]| {
        let gr = case.grad(x, dim);
        (0..dim).map(|a| gr[a] * nrm[a]).sum::<f64>()
    };
    let b = assemble_rhs(mesh.finest(), &space, cfg, &ops, &RhsData { f: &f, g: &g, h: &h });
    let transfers = build_transfers(&mesh, p, &plan(&mesh, p, MgKind::H))?;
    let hierarchy = Hierarchy::build(ops, p, transfers, HierarchyOptions::default())?;
    let mut x = vec![T::zero(); b.len()];
    let report = hierarchy.solve_mgpcg(&b, &mut x, None, opts)?;
    if hierarchy.is_singular() {
        let m = &hierarchy.finest().mass;
        let one = vec![T::one(); x.len()];
        let mean = m.inner(&one, &x) / m.inner(&one, &one);
        let exact_mean = T::of(mean_of(case, dim));
        x.iter_mut().for_each(|v| *v = *v - mean + exact_mean);
    }
    let l2_error = l2_error(mesh.finest(), &space, &x, |y| case.u(y, dim));
    Ok(ManufacturedSolve { coeffs: x, l2_error, report })
}

fn mean_of(case: Manufactured, dim: usize) -> f64 {
    let (pts, wts) = crate::polybasis::gauss_legendre(12);
    let mut total = 0.0;
    let n = pts.len();
    for k in 0..n.pow(dim as u32) {
        let mut x = [0.0; 3];
        let mut w = 1.0;
        let mut t = k;
        for a in 0..dim {
            x[a] = pts[t % n];
            w *= wts[t % n];
            t /= n;
        }
        total += w * case.u(x, dim);
    }
    total
}
