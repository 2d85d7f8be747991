use std::io::{self, Write};

use super::dense::{gemm_acc, gemm_tn_acc, gemv_acc, gemv_t_acc};
use super::BlockDiagonal;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse matrix of dense blocks in block-CSR layout.
///
/// Every block has the same shape `row_dim × col_dim`; rectangular shapes are
/// used for transfers between polynomial degrees. Block columns within a row
/// are kept sorted, which fixes the reduction order of every product.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_dim: usize,
    col_dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    data: Vec<T>,
}

/// Accumulating constructor for [`BlockSparseMatrix`].
#[derive(Debug, Clone)]
pub struct BlockSparseBuilder<T> {
    ncols: usize,
    row_dim: usize,
    col_dim: usize,
    rows: Vec<Vec<(usize, Vec<T>)>>,
}

impl<T: Scalar> BlockSparseBuilder<T> {
    pub fn new(nrows: usize, ncols: usize, row_dim: usize, col_dim: usize) -> Self {
        Self {
            ncols,
            row_dim,
            col_dim,
            rows: vec![Vec::new(); nrows],
        }
    }

    /// Mutable access to block `(i, j)`, created zeroed if absent.
    pub fn entry(&mut self, i: usize, j: usize) -> &mut [T] {
        assert!(j < self.ncols, "block column {j} out of range");
        let bs = self.row_dim * self.col_dim;
        let row = &mut self.rows[i];
        let pos = match row.iter().position(|(c, _)| *c == j) {
            Some(p) => p,
            None => {
                row.push((j, vec![T::zero(); bs]));
                row.len() - 1
            }
        };
        &mut row[pos].1
    }

    pub fn add_block(&mut self, i: usize, j: usize, block: &[T]) {
        self.add_block_scaled(i, j, T::one(), block);
    }

    pub fn add_block_scaled(&mut self, i: usize, j: usize, alpha: T, block: &[T]) {
        let dst = self.entry(i, j);
        debug_assert_eq!(dst.len(), block.len());
        for (d, s) in dst.iter_mut().zip(block) {
            *d += alpha * *s;
        }
    }

    pub fn build(self) -> BlockSparseMatrix<T> {
        let nrows = self.rows.len();
        let nnz: usize = self.rows.iter().map(|r| r.len()).sum();
        let bs = self.row_dim * self.col_dim;
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz * bs);
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, blk) in row {
                col_idx.push(c);
                data.extend_from_slice(&blk);
            }
            row_ptr.push(col_idx.len());
        }
        BlockSparseMatrix {
            nrows,
            ncols: self.ncols,
            row_dim: self.row_dim,
            col_dim: self.col_dim,
            row_ptr,
            col_idx,
            data,
        }
    }
}

impl<T: Scalar> BlockSparseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize, row_dim: usize, col_dim: usize) -> Self {
        BlockSparseBuilder::new(nrows, ncols, row_dim, col_dim).build()
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        let mut b = BlockSparseBuilder::new(n, n, dim, dim);
        for i in 0..n {
            let blk = b.entry(i, i);
            for k in 0..dim {
                blk[k * dim + k] = T::one();
            }
        }
        b.build()
    }

    /// Block-diagonal matrix with the same block repeated or one per row.
    pub fn from_diagonal_blocks(blocks: &[Vec<T>], row_dim: usize, col_dim: usize) -> Self {
        let n = blocks.len();
        let mut b = BlockSparseBuilder::new(n, n, row_dim, col_dim);
        for (i, blk) in blocks.iter().enumerate() {
            b.add_block(i, i, blk);
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn row_dim(&self) -> usize {
        self.row_dim
    }
    pub fn col_dim(&self) -> usize {
        self.col_dim
    }
    /// Scalar row count.
    pub fn rows(&self) -> usize {
        self.nrows * self.row_dim
    }
    /// Scalar column count.
    pub fn cols(&self) -> usize {
        self.ncols * self.col_dim
    }
    pub fn nnz_blocks(&self) -> usize {
        self.col_idx.len()
    }
    fn block_len(&self) -> usize {
        self.row_dim * self.col_dim
    }

    /// Stored blocks of block row `i` as `(column, block)` pairs, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &[T])> + '_ {
        let bs = self.block_len();
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], &self.data[k * bs..(k + 1) * bs]))
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&[T]> {
        let bs = self.block_len();
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|p| {
            let k = self.row_ptr[i] + p;
            &self.data[k * bs..(k + 1) * bs]
        })
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> Option<&mut [T]> {
        let bs = self.block_len();
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => {
                let k = self.row_ptr[i] + p;
                Some(&mut self.data[k * bs..(k + 1) * bs])
            }
            Err(_) => None,
        }
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows()];
        self.spmv_acc(T::one(), x, &mut y);
        y
    }

    /// `y += alpha · A x`
    pub fn spmv_acc(&self, alpha: T, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols(), "spmv: x has wrong length");
        assert_eq!(y.len(), self.rows(), "spmv: y has wrong length");
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut tmp = vec![T::zero(); rd];
        for i in 0..self.nrows {
            tmp.iter_mut().for_each(|t| *t = T::zero());
            for (j, blk) in self.row(i) {
                gemv_acc(rd, cd, blk, &x[j * cd..(j + 1) * cd], &mut tmp);
            }
            for (yi, ti) in y[i * rd..(i + 1) * rd].iter_mut().zip(&tmp) {
                *yi += alpha * *ti;
            }
        }
    }

    /// `y = Aᵀ x` without forming the transpose.
    pub fn spmv_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows(), "spmv_transpose: x has wrong length");
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut y = vec![T::zero(); self.cols()];
        for i in 0..self.nrows {
            let xi = &x[i * rd..(i + 1) * rd];
            for (j, blk) in self.row(i) {
                gemv_t_acc(rd, cd, blk, xi, &mut y[j * cd..(j + 1) * cd]);
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let nnz = self.nnz_blocks();
        let mut col_idx = vec![0usize; nnz];
        let mut data = vec![T::zero(); nnz * rd * cd];
        for i in 0..self.nrows {
            for (j, blk) in self.row(i) {
                let k = next[j];
                next[j] += 1;
                col_idx[k] = i;
                let dst = &mut data[k * rd * cd..(k + 1) * rd * cd];
                for a in 0..rd {
                    for b in 0..cd {
                        dst[b * rd + a] = blk[a * cd + b];
                    }
                }
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_dim: cd,
            col_dim: rd,
            row_ptr,
            col_idx,
            data,
        }
    }

    /// Block product `A · B`; the sparsity of the result is the product graph.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows || self.col_dim != other.row_dim {
            return Err(Error::DimensionMismatch(format!(
                "matmul: ({}x{} blocks of {}x{}) * ({}x{} blocks of {}x{})",
                self.nrows, self.ncols, self.row_dim, self.col_dim, other.nrows, other.ncols, other.row_dim, other.col_dim
            )));
        }
        let (m, k, n) = (self.row_dim, self.col_dim, other.col_dim);
        let bs = m * n;
        let mut marker = vec![usize::MAX; other.ncols];
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut data: Vec<T> = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        let mut acc: Vec<T> = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            acc.clear();
            for (p, a_blk) in self.row(i) {
                for (j, b_blk) in other.row(p) {
                    let slot = if marker[j] == usize::MAX {
                        marker[j] = cols.len();
                        cols.push(j);
                        acc.resize(acc.len() + bs, T::zero());
                        cols.len() - 1
                    } else {
                        marker[j]
                    };
                    gemm_acc(m, k, n, a_blk, b_blk, &mut acc[slot * bs..(slot + 1) * bs]);
                }
            }
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by_key(|&s| cols[s]);
            for s in order {
                col_idx.push(cols[s]);
                data.extend_from_slice(&acc[s * bs..(s + 1) * bs]);
                marker[cols[s]] = usize::MAX;
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: other.ncols,
            row_dim: m,
            col_dim: n,
            row_ptr,
            col_idx,
            data,
        })
    }

    /// `A + alpha · B` over the union sparsity pattern.
    pub fn add_scaled(&self, other: &Self, alpha: T) -> Result<Self> {
        if self.nrows != other.nrows
            || self.ncols != other.ncols
            || self.row_dim != other.row_dim
            || self.col_dim != other.col_dim
        {
            return Err(Error::DimensionMismatch("add_scaled: shapes differ".into()));
        }
        let bs = self.block_len();
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.nrows {
            let (mut a, mut b) = (self.row_ptr[i], other.row_ptr[i]);
            let (ae, be) = (self.row_ptr[i + 1], other.row_ptr[i + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.col_idx[a] } else { usize::MAX };
                let cb = if b < be { other.col_idx[b] } else { usize::MAX };
                if ca < cb {
                    col_idx.push(ca);
                    data.extend_from_slice(&self.data[a * bs..(a + 1) * bs]);
                    a += 1;
                } else if cb < ca {
                    col_idx.push(cb);
                    data.extend(other.data[b * bs..(b + 1) * bs].iter().map(|v| alpha * *v));
                    b += 1;
                } else {
                    col_idx.push(ca);
                    data.extend(
                        self.data[a * bs..(a + 1) * bs]
                            .iter()
                            .zip(&other.data[b * bs..(b + 1) * bs])
                            .map(|(x, y)| *x + alpha * *y),
                    );
                    a += 1;
                    b += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_dim: self.row_dim,
            col_dim: self.col_dim,
            row_ptr,
            col_idx,
            data,
        })
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `D · A` for a block-diagonal `D` acting on the row space.
    pub fn left_mul_diag(&self, d: &BlockDiagonal<T>) -> Result<Self> {
        if d.len() != self.nrows || d.dim() != self.row_dim {
            return Err(Error::DimensionMismatch("left_mul_diag".into()));
        }
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut out = self.clone();
        let bs = rd * cd;
        for i in 0..self.nrows {
            let di = d.block(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let dst = &mut out.data[k * bs..(k + 1) * bs];
                dst.iter_mut().for_each(|v| *v = T::zero());
                gemm_acc(rd, rd, cd, di, &self.data[k * bs..(k + 1) * bs], dst);
            }
        }
        Ok(out)
    }

    /// `A · D` for a block-diagonal `D` acting on the column space.
    pub fn right_mul_diag(&self, d: &BlockDiagonal<T>) -> Result<Self> {
        if d.len() != self.ncols || d.dim() != self.col_dim {
            return Err(Error::DimensionMismatch("right_mul_diag".into()));
        }
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut out = self.clone();
        let bs = rd * cd;
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let dst = &mut out.data[k * bs..(k + 1) * bs];
                dst.iter_mut().for_each(|v| *v = T::zero());
                gemm_acc(rd, cd, cd, &self.data[k * bs..(k + 1) * bs], d.block(j), dst);
            }
        }
        Ok(out)
    }

    /// `Lᵀ · W · A · R` where `L` and `R` carry exactly one block per block
    /// row (injections: h- and p-interpolation) and `W` is an optional
    /// block-diagonal weight on the fine row space.
    ///
    /// Falls back to general sparse products when `L` or `R` has another shape.
    pub fn galerkin_product(left: &Self, weight: Option<&BlockDiagonal<T>>, mid: &Self, right: &Self) -> Result<Self> {
        if left.nrows != mid.nrows || left.row_dim != mid.row_dim || mid.ncols != right.nrows || mid.col_dim != right.row_dim {
            return Err(Error::DimensionMismatch("galerkin_product: nonconforming operands".into()));
        }
        let single = |m: &Self| (0..m.nrows).all(|i| m.row_len(i) == 1);
        if !single(left) || !single(right) {
            let lt = left.transpose();
            let wm = match weight {
                Some(w) => mid.left_mul_diag(w)?,
                None => mid.clone(),
            };
            return lt.matmul(&wm)?.matmul(right);
        }
        let fr = mid.row_dim; // fine row dim
        let cr = left.col_dim; // coarse row dim
        let fc = mid.col_dim;
        let cc = right.col_dim;
        let mut builder = BlockSparseBuilder::new(left.ncols, right.ncols, cr, cc);
        let mut lw = vec![T::zero(); cr * fr];
        let mut t1 = vec![T::zero(); cr * fc];
        let mut t2 = vec![T::zero(); cr * cc];
        for r in 0..mid.nrows {
            let (big_r, l_blk) = left.row(r).next().expect("single block");
            // lw = L_rᵀ W_r
            lw.iter_mut().for_each(|v| *v = T::zero());
            match weight {
                Some(w) => gemm_tn_acc(cr, fr, fr, l_blk, w.block(r), &mut lw),
                None => {
                    for a in 0..fr {
                        for b in 0..cr {
                            lw[b * fr + a] = l_blk[a * cr + b];
                        }
                    }
                }
            }
            for (j, x_blk) in mid.row(r) {
                let (big_j, r_blk) = right.row(j).next().expect("single block");
                t1.iter_mut().for_each(|v| *v = T::zero());
                gemm_acc(cr, fr, fc, &lw, x_blk, &mut t1);
                t2.iter_mut().for_each(|v| *v = T::zero());
                gemm_acc(cr, fc, cc, &t1, r_blk, &mut t2);
                builder.add_block(big_r, big_j, &t2);
            }
        }
        Ok(builder.build())
    }

    /// `Σ_t B_tᵀ W B_t + extra`, assembled in place over the exact result pattern.
    pub fn weighted_gram_sum(terms: &[&Self], weight: &BlockDiagonal<T>, extra: Option<&Self>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::DimensionMismatch("weighted_gram_sum: no terms".into()))?;
        let (n, rd, cd) = (first.ncols, first.row_dim, first.col_dim);
        for t in terms {
            if t.ncols != n || t.row_dim != rd || t.col_dim != cd || t.nrows != weight.len() || weight.dim() != rd {
                return Err(Error::DimensionMismatch("weighted_gram_sum: nonconforming term".into()));
            }
        }
        if let Some(e) = extra {
            if e.nrows != n || e.ncols != n || e.row_dim != cd || e.col_dim != cd {
                return Err(Error::DimensionMismatch("weighted_gram_sum: nonconforming extra".into()));
            }
        }
        // pattern
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in terms {
            for r in 0..t.nrows {
                let rc = &t.col_idx[t.row_ptr[r]..t.row_ptr[r + 1]];
                for &i in rc {
                    cols[i].extend_from_slice(rc);
                }
            }
        }
        if let Some(e) = extra {
            for i in 0..n {
                cols[i].extend_from_slice(&e.col_idx[e.row_ptr[i]..e.row_ptr[i + 1]]);
            }
        }
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            col_idx.extend_from_slice(c);
            row_ptr.push(col_idx.len());
        }
        drop(cols);
        let bs = cd * cd;
        let mut out = Self {
            nrows: n,
            ncols: n,
            row_dim: cd,
            col_dim: cd,
            row_ptr,
            col_idx,
            data: Vec::new(),
        };
        out.data = vec![T::zero(); out.col_idx.len() * bs];
        let mut wb: Vec<T> = Vec::new();
        let mut tmp = vec![T::zero(); bs];
        for t in terms {
            for r in 0..t.nrows {
                let (s, e) = (t.row_ptr[r], t.row_ptr[r + 1]);
                // wb[k] = W_r B_rk
                wb.clear();
                wb.resize((e - s) * rd * cd, T::zero());
                for k in s..e {
                    let dst = &mut wb[(k - s) * rd * cd..(k - s + 1) * rd * cd];
                    gemm_acc(rd, rd, cd, weight.block(r), &t.data[k * rd * cd..(k + 1) * rd * cd], dst);
                }
                for ki in s..e {
                    let i = t.col_idx[ki];
                    let bi = &t.data[ki * rd * cd..(ki + 1) * rd * cd];
                    for kj in s..e {
                        let j = t.col_idx[kj];
                        tmp.iter_mut().for_each(|v| *v = T::zero());
                        gemm_tn_acc(cd, rd, cd, bi, &wb[(kj - s) * rd * cd..(kj - s + 1) * rd * cd], &mut tmp);
                        let dst = out.block_mut(i, j).expect("pattern");
                        for (d, v) in dst.iter_mut().zip(&tmp) {
                            *d += *v;
                        }
                    }
                }
            }
        }
        if let Some(e) = extra {
            for i in 0..n {
                for (j, blk) in e.row(i) {
                    let dst = out.block_mut(i, j).expect("pattern");
                    for (d, v) in dst.iter_mut().zip(blk) {
                        *d += *v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of `A - B` (patterns may differ).
    pub fn diff_norm(&self, other: &Self) -> Result<T> {
        Ok(self.add_scaled(other, -T::one())?.frobenius_norm())
    }

    /// `‖A − B‖_F / max(‖B‖_F, tiny)`
    pub fn relative_diff(&self, reference: &Self) -> Result<T> {
        let d = self.diff_norm(reference)?;
        let n = reference.frobenius_norm();
        Ok(if n > T::zero() { d / n } else { d })
    }

    /// Largest Frobenius norm among off-diagonal blocks.
    pub fn max_offdiag_block_norm(&self) -> T {
        let bs = self.block_len();
        let mut m = T::zero();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] != i {
                    let n = self.data[k * bs..(k + 1) * bs].iter().map(|v| *v * *v).sum::<T>().sqrt();
                    m = m.max(n);
                }
            }
        }
        m
    }

    /// Symmetry defect `‖A − Aᵀ‖_F / ‖A‖_F`.
    pub fn symmetry_defect(&self) -> T {
        let t = self.transpose();
        self.relative_diff(&t).unwrap_or_else(|_| T::infinity())
    }

    pub fn diagonal_blocks(&self) -> Result<BlockDiagonal<T>> {
        if self.nrows != self.ncols || self.row_dim != self.col_dim {
            return Err(Error::DimensionMismatch("diagonal_blocks of a non-square matrix".into()));
        }
        let mut blocks = Vec::with_capacity(self.nrows * self.block_len());
        for i in 0..self.nrows {
            match self.block(i, i) {
                Some(b) => blocks.extend_from_slice(b),
                None => blocks.extend(std::iter::repeat(T::zero()).take(self.block_len())),
            }
        }
        Ok(BlockDiagonal::from_flat(self.nrows, self.row_dim, blocks))
    }

    /// Converts a block-diagonal sparse matrix; fails if off-diagonal mass exceeds `tol`.
    pub fn to_block_diagonal(&self, tol: T) -> Result<BlockDiagonal<T>> {
        let off = self.max_offdiag_block_norm();
        if off > tol {
            return Err(Error::Structure(format!("matrix is not block diagonal (off-diagonal block norm {off:e})")));
        }
        self.diagonal_blocks()
    }

    /// Dense row-major copy (tests and small bottom solves only).
    pub fn to_dense(&self) -> Vec<T> {
        let (r, c) = (self.rows(), self.cols());
        let (rd, cd) = (self.row_dim, self.col_dim);
        let mut out = vec![T::zero(); r * c];
        for i in 0..self.nrows {
            for (j, blk) in self.row(i) {
                for a in 0..rd {
                    for b in 0..cd {
                        out[(i * rd + a) * c + j * cd + b] += blk[a * cd + b];
                    }
                }
            }
        }
        out
    }

    /// Coordinate text dump: a header line, then one line per stored block
    /// holding `block_row block_col` followed by the row-major block entries.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# blocks {} {} dims {} {}", self.nrows, self.ncols, self.row_dim, self.col_dim)?;
        for i in 0..self.nrows {
            for (j, blk) in self.row(i) {
                write!(w, "{i} {j}")?;
                for v in blk {
                    write!(w, " {v:e}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>() + (self.col_idx.len() + self.row_ptr.len()) * std::mem::size_of::<usize>()
    }
}
