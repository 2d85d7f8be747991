//! Quadtree / octree meshes of `[0,1]^d`, their faces, and the coarsening hierarchy.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use crate::error::{Error, Result};

/// Deepest supported refinement level (3D Morton keys must fit in 64 bits).
pub const MAX_LEVEL: u8 = 20;

/// A tree cell: refinement level and integer coordinates at that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: u8,
    pub coords: [u32; 3],
}

impl Cell {
    pub fn root() -> Self {
        Self { level: 0, coords: [0; 3] }
    }

    pub fn size(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    pub fn lower(&self) -> [f64; 3] {
        let h = self.size();
        [self.coords[0] as f64 * h, self.coords[1] as f64 * h, self.coords[2] as f64 * h]
    }

    pub fn center(&self, dim: usize) -> [f64; 3] {
        let h = self.size();
        let lo = self.lower();
        let mut c = [0.0; 3];
        for a in 0..dim {
            c[a] = lo[a] + 0.5 * h;
        }
        c
    }

    pub fn parent(&self) -> Option<Cell> {
        (self.level > 0).then(|| Cell {
            level: self.level - 1,
            coords: [self.coords[0] >> 1, self.coords[1] >> 1, self.coords[2] >> 1],
        })
    }

    /// Children in Morton order (x bit fastest).
    pub fn children(&self, dim: usize) -> Vec<Cell> {
        (0..1usize << dim)
            .map(|c| {
                let mut coords = [0u32; 3];
                for a in 0..dim {
                    coords[a] = 2 * self.coords[a] + ((c >> a) & 1) as u32;
                }
                Cell { level: self.level + 1, coords }
            })
            .collect()
    }

    /// Position within the parent along `axis` (0 = lower half).
    pub fn child_bit(&self, axis: usize) -> usize {
        (self.coords[axis] & 1) as usize
    }

    pub fn morton_key(&self, dim: usize) -> u64 {
        let shift = (MAX_LEVEL - self.level) as u32;
        let mut key = 0u64;
        for bit in 0..MAX_LEVEL as u32 {
            for a in 0..dim {
                let c = (self.coords[a] as u64) << shift;
                key |= ((c >> bit) & 1) << (bit as usize * dim + a);
            }
        }
        key
    }

    /// Squared distance from the closed cell to a point.
    pub fn distance2_to(&self, dim: usize, x: [f64; 3]) -> f64 {
        let lo = self.lower();
        let h = self.size();
        (0..dim)
            .map(|a| {
                let d = if x[a] < lo[a] {
                    lo[a] - x[a]
                } else if x[a] > lo[a] + h {
                    x[a] - lo[a] - h
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    /// Squared distance from a point to the farthest corner of the cell.
    pub fn max_distance2_to(&self, dim: usize, x: [f64; 3]) -> f64 {
        let lo = self.lower();
        let h = self.size();
        (0..dim)
            .map(|a| {
                let d = (lo[a] - x[a]).abs().max((lo[a] + h - x[a]).abs());
                d * d
            })
            .sum()
    }
}

/// Boundary condition on one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Periodic,
}

/// Boundary condition per axis and side (`sides[axis][0]` is the lower side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundary {
    pub sides: [[BcKind; 2]; 3],
}

impl Boundary {
    pub fn uniform(kind: BcKind) -> Self {
        Self { sides: [[kind; 2]; 3] }
    }

    pub fn neumann() -> Self {
        Self::uniform(BcKind::Neumann)
    }

    pub fn dirichlet() -> Self {
        Self::uniform(BcKind::Dirichlet)
    }

    pub fn periodic() -> Self {
        Self::uniform(BcKind::Periodic)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for a in 0..dim {
            let [lo, hi] = self.sides[a];
            if (lo == BcKind::Periodic) != (hi == BcKind::Periodic) {
                return Err(Error::InvalidConfig(format!("axis {a}: periodic must be set on both sides")));
            }
        }
        Ok(())
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.sides[axis][0] == BcKind::Periodic
    }

    pub fn has_dirichlet(&self, dim: usize) -> bool {
        (0..dim).any(|a| self.sides[a].contains(&BcKind::Dirichlet))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Interior,
    Dirichlet,
    Neumann,
}

/// A face patch, stored at the granularity of its finer adjacent element.
///
/// Geometry is expressed in the frame of the `minus` element. For interior
/// faces `minus` is the element below the face along `axis`, so the normal
/// points in the `+axis` direction; the plus element's lower corner must be
/// shifted by `plus_shift` along `axis` to meet the face (nonzero only across
/// periodic wrap-around). For boundary faces `normal_sign` is the outward
/// normal of `minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    pub axis: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub minus: usize,
    pub plus: Option<usize>,
    pub normal_sign: f64,
    pub plus_shift: f64,
}

impl Face {
    pub fn coord(&self) -> f64 {
        self.lo[self.axis]
    }

    pub fn area(&self, dim: usize) -> f64 {
        (0..dim).filter(|&a| a != self.axis).map(|a| self.hi[a] - self.lo[a]).product()
    }
}

/// One mesh of the hierarchy: leaf cells in Morton order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshLevel {
    dim: usize,
    cells: Vec<Cell>,
    lookup: HashMap<Cell, usize>,
}

enum Neighbor {
    Boundary,
    Equal(usize, f64),
    Coarser(usize, f64),
    Finer,
}

impl MeshLevel {
    pub fn new(dim: usize, mut cells: Vec<Cell>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        cells.sort_by_key(|c| c.morton_key(dim));
        let lookup: HashMap<Cell, usize> = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        if lookup.len() != cells.len() {
            return Err(Error::Structure("duplicate cells".into()));
        }
        Ok(Self { dim, cells, lookup })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn index_of(&self, c: &Cell) -> Option<usize> {
        self.lookup.get(c).copied()
    }

    pub fn h(&self, i: usize) -> f64 {
        self.cells[i].size()
    }

    pub fn min_h(&self) -> f64 {
        self.cells.iter().map(|c| c.size()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_level(&self) -> u8 {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn is_uniform(&self) -> bool {
        self.cells.iter().all(|c| c.level == self.cells[0].level)
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.size().powi(self.dim as i32)).sum()
    }

    /// The leaf containing `c` or an ancestor of it.
    fn covering_leaf(&self, c: Cell) -> Option<usize> {
        let mut cur = Some(c);
        while let Some(x) = cur {
            if let Some(&i) = self.lookup.get(&x) {
                return Some(i);
            }
            cur = x.parent();
        }
        None
    }

    fn neighbor(&self, i: usize, axis: usize, upper: bool, periodic: bool) -> Neighbor {
        let c = self.cells[i];
        let n = 1i64 << c.level;
        let mut k = c.coords[axis] as i64 + if upper { 1 } else { -1 };
        let mut shift = 0.0;
        if k < 0 || k >= n {
            if !periodic {
                return Neighbor::Boundary;
            }
            shift = if upper { 1.0 } else { -1.0 };
            k = k.rem_euclid(n);
        }
        let mut nc = c;
        nc.coords[axis] = k as u32;
        match self.covering_leaf(nc) {
            Some(j) if self.cells[j].level == c.level => Neighbor::Equal(j, shift),
            Some(j) => Neighbor::Coarser(j, shift),
            None => Neighbor::Finer,
        }
    }

    /// Enumerates every face, wiring minus/plus elements and boundary kinds.
    pub fn faces(&self, bc: &Boundary) -> Vec<Face> {
        let dim = self.dim;
        let mut out = Vec::new();
        for i in 0..self.cells.len() {
            let c = self.cells[i];
            let h = c.size();
            let lo = c.lower();
            for axis in 0..dim {
                for upper in [false, true] {
                    let periodic = bc.is_periodic(axis);
                    let mut flo = lo;
                    let mut fhi = lo;
                    for a in 0..dim {
                        fhi[a] = lo[a] + h;
                    }
                    let coord = lo[axis] + if upper { h } else { 0.0 };
                    flo[axis] = coord;
                    fhi[axis] = coord;
                    let face = |kind, minus, plus, normal_sign, plus_shift, flo: [f64; 3], fhi: [f64; 3]| Face {
                        kind,
                        axis,
                        lo: flo,
                        hi: fhi,
                        minus,
                        plus,
                        normal_sign,
                        plus_shift,
                    };
                    match self.neighbor(i, axis, upper, periodic) {
                        Neighbor::Boundary => {
                            let kind = match bc.sides[axis][upper as usize] {
                                BcKind::Dirichlet => FaceKind::Dirichlet,
                                _ => FaceKind::Neumann,
                            };
                            out.push(face(kind, i, None, if upper { 1.0 } else { -1.0 }, 0.0, flo, fhi));
                        }
                        Neighbor::Equal(j, shift) => {
                            if upper {
                                out.push(face(FaceKind::Interior, i, Some(j), 1.0, shift, flo, fhi));
                            }
                        }
                        Neighbor::Coarser(j, shift) => {
                            if upper {
                                out.push(face(FaceKind::Interior, i, Some(j), 1.0, shift, flo, fhi));
                            } else {
                                // move the face into the coarse (minus) element's frame
                                flo[axis] -= shift;
                                fhi[axis] -= shift;
                                out.push(face(FaceKind::Interior, j, Some(i), 1.0, -shift, flo, fhi));
                            }
                        }
                        Neighbor::Finer => {}
                    }
                }
            }
        }
        out
    }

    /// Largest level difference across any face.
    pub fn max_level_jump(&self) -> u8 {
        let mut worst = 0;
        for f in self.faces(&Boundary::neumann()) {
            if let Some(p) = f.plus {
                let (a, b) = (self.cells[f.minus].level, self.cells[p].level);
                worst = worst.max(a.abs_diff(b));
            }
        }
        worst
    }

    /// Plain-text dump: one element per line, `id level x y [z] h`.
    pub fn write_debug<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            let lo = c.lower();
            write!(w, "{i} {}", c.level)?;
            for x in lo.iter().take(self.dim) {
                write!(w, " {x}")?;
            }
            writeln!(w, " {}", c.size())?;
        }
        Ok(())
    }
}

/// Meshes from finest (`levels[0]`) to the single root cell, with child→parent maps.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `parents[l][i]` is the index on `levels[l + 1]` of the element containing element `i` of `levels[l]`.
    pub parents: Vec<Vec<usize>>,
}

impl MeshHierarchy {
    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MeshLevel {
        &self.levels[0]
    }

    /// Builds the hierarchy by merging every complete sibling group on each step.
    pub fn from_finest(finest: MeshLevel) -> Result<Self> {
        let dim = finest.dim();
        let mut levels = vec![finest];
        let mut parents = Vec::new();
        while levels.last().map(|l| l.len()).unwrap_or(0) > 1 {
            let fine = levels.last().expect("nonempty");
            let nsib = 1usize << dim;
            let mut merged: HashSet<Cell> = HashSet::new();
            for c in fine.cells() {
                if let Some(p) = c.parent() {
                    if !merged.contains(&p) && p.children(dim).iter().all(|s| fine.index_of(s).is_some()) {
                        merged.insert(p);
                    }
                }
            }
            if merged.is_empty() {
                return Err(Error::Structure("mesh cannot be coarsened".into()));
            }
            let mut cells: Vec<Cell> = merged.iter().copied().collect();
            cells.extend(fine.cells().iter().filter(|c| !c.parent().is_some_and(|p| merged.contains(&p))));
            let coarse = MeshLevel::new(dim, cells)?;
            let map = fine
                .cells()
                .iter()
                .map(|c| {
                    let target = match c.parent() {
                        Some(p) if merged.contains(&p) => p,
                        _ => *c,
                    };
                    coarse.index_of(&target).expect("parent present")
                })
                .collect();
            debug_assert!(coarse.len() <= fine.len() - merged.len() * (nsib - 1));
            parents.push(map);
            levels.push(coarse);
        }
        Ok(Self { levels, parents })
    }

    /// Uniform `n^dim` grid with `log2(n) + 1` levels.
    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n == 0 || !n.is_power_of_two() || n.trailing_zeros() > MAX_LEVEL as u32 {
            return Err(Error::NotPowerOfTwo(n));
        }
        let level = n.trailing_zeros() as u8;
        let nz = if dim == 3 { n } else { 1 };
        let mut cells = Vec::with_capacity(n.pow(dim as u32));
        for z in 0..nz {
            for y in 0..n {
                for x in 0..n {
                    cells.push(Cell {
                        level,
                        coords: [x as u32, y as u32, z as u32],
                    });
                }
            }
        }
        Self::from_finest(MeshLevel::new(dim, cells)?)
    }

    /// Predicate-driven refinement up to `max_level`, then 2:1 face balancing.
    pub fn adaptive<F: Fn(&Cell) -> bool>(dim: usize, refine: F, max_level: u8) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if max_level > MAX_LEVEL {
            return Err(Error::InvalidConfig(format!("max_level {max_level} exceeds {MAX_LEVEL}")));
        }
        let mut leaves: HashSet<Cell> = HashSet::new();
        let mut stack = vec![Cell::root()];
        while let Some(c) = stack.pop() {
            if c.level < max_level && refine(&c) {
                stack.extend(c.children(dim));
            } else {
                leaves.insert(c);
            }
        }
        balance(dim, &mut leaves);
        Self::from_finest(MeshLevel::new(dim, leaves.into_iter().collect())?)
    }

    /// Named refinement preset (`corner` or `annulus`).
    pub fn preset(dim: usize, name: &str, max_level: u8) -> Result<Self> {
        match name {
            "corner" => Self::adaptive(dim, |c| c.distance2_to(dim, [0.0; 3]) < 0.25 * 0.25, max_level),
            "annulus" => {
                let center = [0.5; 3];
                let r2 = 0.3 * 0.3;
                Self::adaptive(
                    dim,
                    |c| c.distance2_to(dim, center) <= r2 && c.max_distance2_to(dim, center) >= r2,
                    max_level,
                )
            }
            other => Err(Error::InvalidConfig(format!("unknown adaptive preset '{other}'"))),
        }
    }
}

fn balance(dim: usize, leaves: &mut HashSet<Cell>) {
    loop {
        let mut split: HashSet<Cell> = HashSet::new();
        for c in leaves.iter() {
            if c.level < 2 {
                continue;
            }
            let n = 1i64 << c.level;
            for axis in 0..dim {
                for d in [-1i64, 1] {
                    let k = c.coords[axis] as i64 + d;
                    if k < 0 || k >= n {
                        continue;
                    }
                    let mut nc = *c;
                    nc.coords[axis] = k as u32;
                    // the neighbour region must not be covered by a leaf coarser than level - 1
                    let mut cur = nc.parent().and_then(|p| p.parent());
                    while let Some(x) = cur {
                        if leaves.contains(&x) {
                            split.insert(x);
                            break;
                        }
                        cur = x.parent();
                    }
                }
            }
        }
        if split.is_empty() {
            return;
        }
        for s in split {
            leaves.remove(&s);
            leaves.extend(s.children(dim));
        }
    }
}
