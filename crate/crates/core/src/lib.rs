//! Local discontinuous Galerkin discretization of the Poisson equation on
//! uniform and adaptive quadtree/octree meshes, with geometric multigrid
//! solvers built by primal (`IᵀAI`) or flux (gradient and penalty) coarsening.
//!
//! ```
//! use ldgmg::{Coarsening, MeshSpec, MgKind, Problem, ProblemSpec, SolveOptions};
//! use ldgmg::ldg::LdgConfig;
//!
//! let spec = ProblemSpec {
//!     dim: 2,
//!     mesh: MeshSpec::Uniform { n: 8 },
//!     p: 1,
//!     ldg: LdgConfig::default(),
//!     kind: MgKind::H,
//!     hierarchy: ldgmg::HierarchyOptions { mode: Coarsening::Flux, ..Default::default() },
//! };
//! let problem = ldgmg::Problem::<f64>::setup(&spec).unwrap();
//! let report = problem.hierarchy.measure(false, 1, SolveOptions::default()).unwrap();
//! assert!(report.converged && report.rho < 0.3);
//! ```

pub mod blocklinalg;
pub mod error;
pub mod ldg;
pub mod mesh;
pub mod multigrid;
pub mod polybasis;
pub mod scalar;
pub mod transfer;

pub use blocklinalg::{BlockDiagonal, BlockSparseBuilder, BlockSparseMatrix, DenseSpdSolver};
pub use error::{Error, Result};
pub use ldg::{DgSpace, LdgConfig, LevelOperators, PenaltyScale};
pub use mesh::{BcKind, Boundary, Cell, MeshHierarchy, MeshLevel};
pub use multigrid::{
    measure_rho, solve_manufactured, Coarsening, Hierarchy, HierarchyOptions, MeshSpec, MgKind, Preconditioner, Problem, ProblemSpec, SolveOptions, SolveReport,
};
pub use scalar::Scalar;

pub type Matrix = BlockSparseMatrix<f64>;
pub type BlockDiag = BlockDiagonal<f64>;
pub type Space = DgSpace<f64>;
pub type Operators = LevelOperators<f64>;
pub type MgHierarchy = Hierarchy<f64>;
pub type MgProblem = Problem<f64>;
