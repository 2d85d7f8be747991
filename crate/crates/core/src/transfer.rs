//! Interpolation between levels, its adjoint restriction, and Galerkin coarsening.

use crate::blocklinalg::{BlockDiagonal, BlockSparseBuilder, BlockSparseMatrix};
use crate::error::{Error, Result};
use crate::mesh::MeshLevel;
use crate::polybasis::{kron, p_embedding, Embedding1D, Factor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Between consecutive tree levels at fixed degree.
    H,
    /// Between degrees on a fixed mesh.
    P,
}

/// Interpolation `I` (coarse → fine) between two levels.
#[derive(Debug, Clone)]
pub struct TransferPair<T> {
    pub interp: BlockSparseMatrix<T>,
    pub kind: TransferKind,
    pub fine_degree: usize,
    pub coarse_degree: usize,
}

impl<T: Scalar> TransferPair<T> {
    /// Restriction `R = M_c⁻¹ Iᵀ M_f`.
    pub fn restriction(&self, mass_fine: &BlockDiagonal<T>, mass_coarse: &BlockDiagonal<T>) -> Result<BlockSparseMatrix<T>> {
        build_restriction(&self.interp, mass_fine, mass_coarse)
    }
}

/// h-interpolation: each fine element evaluates its parent's polynomial.
///
/// Elements whose parent is the same cell (not merged on this step) get an identity block.
pub fn build_h_interpolation<T: Scalar>(fine: &MeshLevel, coarse: &MeshLevel, parents: &[usize], p: usize) -> Result<BlockSparseMatrix<T>> {
    if parents.len() != fine.len() {
        return Err(Error::Structure(format!("{} parents for {} elements", parents.len(), fine.len())));
    }
    let dim = fine.dim();
    let emb = Embedding1D::<T>::new(p)?;
    let n = p + 1;
    let bd = n.pow(dim as u32);
    let mut id = vec![T::zero(); n * n];
    for i in 0..n {
        id[i * n + i] = T::one();
    }
    let mut b = BlockSparseBuilder::new(fine.len(), coarse.len(), bd, bd);
    for (i, &pi) in parents.iter().enumerate() {
        if pi >= coarse.len() {
            return Err(Error::Structure(format!("element {i}: missing parent {pi}")));
        }
        let c = fine.cell(i);
        let pc = coarse.cell(pi);
        let block = if c == pc {
            let f: Vec<Factor<'_, T>> = (0..dim).map(|_| Factor::new(n, n, &id)).collect();
            kron(&f, T::one())
        } else if c.parent() == Some(pc) {
            let f: Vec<Factor<'_, T>> = (0..dim).map(|a| Factor::new(n, n, &emb.child_interp[c.child_bit(a)])).collect();
            kron(&f, T::one())
        } else {
            return Err(Error::Structure(format!("element {i} is not contained in coarse element {pi}")));
        };
        b.add_block(i, pi, &block);
    }
    Ok(b.build())
}

/// p-interpolation: exact embedding of degree `p_coarse` into degree `p_fine`, per element.
pub fn build_p_interpolation<T: Scalar>(n_elements: usize, dim: usize, p_fine: usize, p_coarse: usize) -> Result<BlockSparseMatrix<T>> {
    if p_coarse >= p_fine {
        return Err(Error::InvalidConfig(format!("p-transfer needs p_coarse < p_fine, got {p_coarse} >= {p_fine}")));
    }
    let e = p_embedding::<T>(p_coarse, p_fine)?;
    let (nf, nc) = (p_fine + 1, p_coarse + 1);
    let f: Vec<Factor<'_, T>> = (0..dim).map(|_| Factor::new(nf, nc, &e)).collect();
    let block = kron(&f, T::one());
    let mut b = BlockSparseBuilder::new(n_elements, n_elements, nf.pow(dim as u32), nc.pow(dim as u32));
    for i in 0..n_elements {
        b.add_block(i, i, &block);
    }
    Ok(b.build())
}

/// `M_c = Iᵀ M_f I`, checked to be block diagonal.
pub fn coarse_mass<T: Scalar>(interp: &BlockSparseMatrix<T>, mass_fine: &BlockDiagonal<T>) -> Result<BlockDiagonal<T>> {
    let mc = BlockSparseMatrix::galerkin_product(interp, None, &mass_fine.to_sparse(), interp)?;
    let tol = T::of(1e-12) * mc.max_abs();
    mc.to_block_diagonal(tol)
}

/// `R = M_c⁻¹ Iᵀ M_f`
pub fn build_restriction<T: Scalar>(
    interp: &BlockSparseMatrix<T>,
    mass_fine: &BlockDiagonal<T>,
    mass_coarse: &BlockDiagonal<T>,
) -> Result<BlockSparseMatrix<T>> {
    let it_mf = interp.transpose().right_mul_diag(mass_fine)?;
    it_mf.left_mul_diag(&mass_coarse.inverse()?)
}

/// `𝒞(A) = R A I`
pub fn rat<T: Scalar>(a: &BlockSparseMatrix<T>, interp: &BlockSparseMatrix<T>, restriction: &BlockSparseMatrix<T>) -> Result<BlockSparseMatrix<T>> {
    restriction.matmul(&a.matmul(interp)?)
}

/// `Iᵀ X I` for a mass-weighted operator `X = M_f Y`; equals `M_c 𝒞(Y)`.
pub fn coarsen_weighted<T: Scalar>(x: &BlockSparseMatrix<T>, interp: &BlockSparseMatrix<T>) -> Result<BlockSparseMatrix<T>> {
    BlockSparseMatrix::galerkin_product(interp, None, x, interp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocklinalg::random_vector;
    use crate::ldg::{assemble_mass, DgSpace};
    use crate::mesh::MeshHierarchy;
    use crate::scalar::dot;

    #[test]
    fn h_interpolation_reproduces_polynomials() {
        let mesh = MeshHierarchy::preset(2, "corner", 4).unwrap();
        let space = DgSpace::<f64>::new(2, 3).unwrap();
        let u = |x: [f64; 3]| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 0.5;
        for l in 0..mesh.depth() - 1 {
            let i = build_h_interpolation::<f64>(&mesh.levels[l], &mesh.levels[l + 1], &mesh.parents[l], 3).unwrap();
            let uc = space.interpolate(&mesh.levels[l + 1], u);
            let uf = space.interpolate(&mesh.levels[l], u);
            let got = i.spmv(&uc);
            assert!(got.iter().zip(&uf).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn restriction_inverts_interpolation() {
        let mesh = MeshHierarchy::uniform(2, 4).unwrap();
        let space = DgSpace::<f64>::new(2, 2).unwrap();
        let i = build_h_interpolation::<f64>(&mesh.levels[0], &mesh.levels[1], &mesh.parents[0], 2).unwrap();
        let mf = assemble_mass(&mesh.levels[0], &space);
        let mc = coarse_mass(&i, &mf).unwrap();
        let direct = assemble_mass(&mesh.levels[1], &space);
        assert!(mc.to_sparse().relative_diff(&direct.to_sparse()).unwrap() < 1e-13);
        let r = build_restriction(&i, &mf, &mc).unwrap();
        let ri = r.matmul(&i).unwrap();
        let id = BlockSparseMatrix::identity(mesh.levels[1].len(), 9);
        assert!(ri.diff_norm(&id).unwrap() < 1e-12);
        // adjointness in the mass inner products
        let uf = random_vector::<f64>(i.rows(), 1);
        let uc = random_vector::<f64>(i.cols(), 2);
        let lhs = dot(&r.spmv(&uf), &mc.apply(&uc));
        let rhs = dot(&uf, &mf.apply(&i.spmv(&uc)));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn p_interpolation_identities() {
        let mesh = MeshHierarchy::uniform(2, 4).unwrap();
        let lvl = mesh.finest();
        let (s4, s2) = (DgSpace::<f64>::new(2, 4).unwrap(), DgSpace::<f64>::new(2, 2).unwrap());
        let i = build_p_interpolation::<f64>(lvl.len(), 2, 4, 2).unwrap();
        let u = |x: [f64; 3]| x[0] * x[0] + x[1] * x[0] * x[0];
        let got = i.spmv(&s2.interpolate(lvl, u));
        let want = s4.interpolate(lvl, u);
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-13));
        let mf = assemble_mass(lvl, &s4);
        let mc = coarse_mass(&i, &mf).unwrap();
        assert!(mc.to_sparse().relative_diff(&assemble_mass(lvl, &s2).to_sparse()).unwrap() < 1e-13);
        let r = build_restriction(&i, &mf, &mc).unwrap();
        let id = BlockSparseMatrix::identity(lvl.len(), 9);
        assert!(r.matmul(&i).unwrap().diff_norm(&id).unwrap() < 1e-12);
        assert!(build_p_interpolation::<f64>(4, 2, 2, 2).is_err());
    }
}
