//! Axis-aligned cubical cell complexes and their incidence operators.
//!
//! A complex of dimension `n` (1 to 4) with `extents[a]` cells along axis `a`
//! enumerates its `p`-cells lexicographically: first by orientation (the
//! sorted tuple of axes the cell spans, in lexicographic order of tuples),
//! then by integer position with axis 0 varying slowest. A cell is oriented
//! by the increasing order of its axes, and the incidence operator uses the
//! cubical boundary formula
//!
//! ```text
//! ∂[a_0 … a_p](x) = Σ_k (-1)^k ( face_k(x + e_{a_k}) - face_k(x) )
//! ```
//!
//! where `face_k` drops axis `a_k`. Axes may be periodic, in which case
//! positions wrap and every axis carries exactly `extents[a]` positions.

use std::sync::OnceLock;

use itertools::Itertools;

use crate::error::{invalid, Result};
use crate::sparse::Incidence;

pub const MAX_DIM: usize = 4;

/// Largest per-axis extent accepted for 4D complexes.
pub const MAX_EXTENT_4D: usize = 4;

/// A single cell: the set of axes it spans (bitmask) and its lower corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub axes: u8,
    pub pos: [usize; MAX_DIM],
}

impl Cell {
    pub fn degree(&self) -> usize {
        self.axes.count_ones() as usize
    }

    pub fn spans(&self, axis: usize) -> bool {
        self.axes & (1 << axis) != 0
    }
}

/// Sorted axes of an orientation bitmask.
pub fn mask_axes(mask: u8) -> impl Iterator<Item = usize> {
    (0..8).filter(move |a| mask & (1 << a) != 0)
}

#[derive(Clone, Debug)]
struct CellBlock {
    axes: u8,
    counts: [usize; MAX_DIM],
    offset: usize,
    len: usize,
}

#[derive(Clone, Debug)]
pub struct CubicalComplex {
    extents: Vec<usize>,
    spacings: Vec<f64>,
    periodic: Vec<bool>,
    blocks: Vec<Vec<CellBlock>>,
    cell_counts: Vec<usize>,
    derivatives: Vec<OnceLock<Incidence>>,
    transposes: Vec<OnceLock<Incidence>>,
}

impl PartialEq for CubicalComplex {
    fn eq(&self, other: &Self) -> bool {
        self.extents == other.extents && self.spacings == other.spacings && self.periodic == other.periodic
    }
}

impl CubicalComplex {
    /// A solid box (no periodic axes).
    pub fn new(extents: &[usize], spacings: &[f64]) -> Result<Self> {
        Self::with_periodicity(extents, spacings, &vec![false; extents.len()])
    }

    /// A complex whose axes are individually periodic or bounded.
    pub fn with_periodicity(extents: &[usize], spacings: &[f64], periodic: &[bool]) -> Result<Self> {
        let dim = extents.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return invalid(format!("dimension must be between 1 and {MAX_DIM}, got {dim}"));
        }
        if spacings.len() != dim || periodic.len() != dim {
            return invalid("extents, spacings and periodicity must have the same length");
        }
        if let Some(a) = extents.iter().position(|&n| n == 0) {
            return invalid(format!("extent along axis {a} must be at least 1"));
        }
        if let Some(a) = spacings.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
            return invalid(format!("spacing along axis {a} must be positive, got {}", spacings[a]));
        }
        if dim == 4 && extents.iter().any(|&n| n > MAX_EXTENT_4D) {
            return invalid(format!("4D complexes are limited to {MAX_EXTENT_4D} cells per axis"));
        }

        let mut blocks = Vec::with_capacity(dim + 1);
        let mut cell_counts = Vec::with_capacity(dim + 1);
        for p in 0..=dim {
            let mut offset = 0;
            let mut deg_blocks = Vec::new();
            for axes in (0..dim).combinations(p) {
                let mask = axes.iter().fold(0u8, |m, &a| m | (1 << a));
                let mut counts = [1usize; MAX_DIM];
                for a in 0..dim {
                    counts[a] = if periodic[a] || mask & (1 << a) != 0 { extents[a] } else { extents[a] + 1 };
                }
                let len = counts.iter().product();
                deg_blocks.push(CellBlock { axes: mask, counts, offset, len });
                offset += len;
            }
            blocks.push(deg_blocks);
            cell_counts.push(offset);
        }

        Ok(Self {
            extents: extents.to_vec(),
            spacings: spacings.to_vec(),
            periodic: periodic.to_vec(),
            blocks,
            cell_counts,
            derivatives: (0..dim).map(|_| OnceLock::new()).collect(),
            transposes: (0..dim).map(|_| OnceLock::new()).collect(),
        })
    }

    /// A fully periodic complex (a discrete torus).
    pub fn periodic(extents: &[usize], spacings: &[f64]) -> Result<Self> {
        Self::with_periodicity(extents, spacings, &vec![true; extents.len()])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn periodicity(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    /// Axes that carry more than the constant mode: bounded axes, and periodic
    /// axes with at least two cells.
    pub fn resolved_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&a| !(self.periodic[a] && self.extents[a] == 1))
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cell_counts
    }

    pub fn cell_count(&self, p: usize) -> usize {
        self.cell_counts[p]
    }

    /// Orientation bitmasks of the `p`-cells in enumeration order.
    pub fn orientations(&self, p: usize) -> Vec<u8> {
        self.blocks[p].iter().map(|b| b.axes).collect()
    }

    /// Index range occupied by the `p`-cells of one orientation.
    pub fn orientation_range(&self, p: usize, axes: u8) -> Option<std::ops::Range<usize>> {
        self.blocks[p].iter().find(|b| b.axes == axes).map(|b| b.offset..b.offset + b.len)
    }

    /// Per-axis position counts for `p`-cells of an orientation.
    pub fn orientation_counts(&self, p: usize, axes: u8) -> Option<[usize; MAX_DIM]> {
        self.blocks[p].iter().find(|b| b.axes == axes).map(|b| b.counts)
    }

    fn block_of(&self, p: usize, idx: usize) -> &CellBlock {
        let blocks = &self.blocks[p];
        let k = blocks.partition_point(|b| b.offset + b.len <= idx);
        &blocks[k]
    }

    pub fn cell(&self, p: usize, idx: usize) -> Cell {
        assert!(idx < self.cell_counts[p], "cell index {idx} out of range for degree {p}");
        let b = self.block_of(p, idx);
        let mut rem = idx - b.offset;
        let mut pos = [0usize; MAX_DIM];
        for a in (0..self.dim()).rev() {
            pos[a] = rem % b.counts[a];
            rem /= b.counts[a];
        }
        Cell { axes: b.axes, pos }
    }

    /// Index of a cell, or `None` if the position falls outside the complex.
    pub fn index_of(&self, cell: &Cell) -> Option<usize> {
        let p = cell.degree();
        let b = self.blocks.get(p)?.iter().find(|b| b.axes == cell.axes)?;
        let mut idx = 0;
        for a in 0..self.dim() {
            if cell.pos[a] >= b.counts[a] {
                return None;
            }
            idx = idx * b.counts[a] + cell.pos[a];
        }
        Some(b.offset + idx)
    }

    /// Moves a cell by `delta` positions along `axis`, wrapping on periodic
    /// axes. Returns `None` when the result leaves a bounded complex.
    pub fn shift(&self, cell: &Cell, axis: usize, delta: isize) -> Option<Cell> {
        let counts = self.orientation_counts(cell.degree(), cell.axes)?;
        let n = counts[axis] as isize;
        let mut q = cell.pos[axis] as isize + delta;
        if self.periodic[axis] {
            q = q.rem_euclid(n);
        } else if q < 0 || q >= n {
            return None;
        }
        let mut out = *cell;
        out.pos[axis] = q as usize;
        Some(out)
    }

    /// Coordinates of a cell's center.
    pub fn center(&self, p: usize, idx: usize) -> [f64; MAX_DIM] {
        let cell = self.cell(p, idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            let half = if cell.spans(a) { 0.5 } else { 0.0 };
            x[a] = (cell.pos[a] as f64 + half) * self.spacings[a];
        }
        x
    }

    /// Length, area or volume of cells with the given orientation.
    pub fn orientation_measure(&self, axes: u8) -> f64 {
        mask_axes(axes).map(|a| self.spacings[a]).product()
    }

    /// Measure of the dual cell of a cell with the given orientation. Dual
    /// cells are full (not clipped at the boundary of a bounded complex).
    pub fn dual_orientation_measure(&self, axes: u8) -> f64 {
        (0..self.dim()).filter(|&a| axes & (1 << a) == 0).map(|a| self.spacings[a]).product()
    }

    pub fn measure(&self, p: usize, idx: usize) -> f64 {
        self.orientation_measure(self.block_of(p, idx).axes)
    }

    pub fn dual_measure(&self, p: usize, idx: usize) -> f64 {
        self.dual_orientation_measure(self.block_of(p, idx).axes)
    }

    /// A cell lies on the boundary when it sits on a face of the box, i.e. its
    /// position is extremal along some bounded axis it does not span.
    pub fn is_boundary(&self, p: usize, idx: usize) -> bool {
        let cell = self.cell(p, idx);
        (0..self.dim())
            .any(|a| !self.periodic[a] && !cell.spans(a) && (cell.pos[a] == 0 || cell.pos[a] == self.extents[a]))
    }

    pub fn boundary_flags(&self, p: usize) -> Vec<bool> {
        (0..self.cell_counts[p]).map(|i| self.is_boundary(p, i)).collect()
    }

    /// Boundary flags restricted to the given axes (cells on the faces of the
    /// box perpendicular to one of `axes`).
    pub fn boundary_flags_on(&self, p: usize, axes: &[usize]) -> Vec<bool> {
        (0..self.cell_counts[p])
            .map(|i| {
                let cell = self.cell(p, i);
                axes.iter().any(|&a| {
                    !self.periodic[a] && !cell.spans(a) && (cell.pos[a] == 0 || cell.pos[a] == self.extents[a])
                })
            })
            .collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cell_counts.iter().enumerate().map(|(p, &n)| if p % 2 == 0 { n as i64 } else { -(n as i64) }).sum()
    }

    /// Top-dimensional cells that contain the given cell.
    pub fn cofaces_top(&self, p: usize, idx: usize) -> Vec<usize> {
        let cell = self.cell(p, idx);
        let free: Vec<usize> = (0..self.dim()).filter(|&a| !cell.spans(a)).collect();
        let full = ((1u16 << self.dim()) - 1) as u8;
        let mut out = Vec::new();
        for choice in 0..(1usize << free.len()) {
            let mut pos = cell.pos;
            let mut ok = true;
            for (k, &a) in free.iter().enumerate() {
                if choice & (1 << k) != 0 {
                    if pos[a] == 0 {
                        if self.periodic[a] {
                            pos[a] = self.extents[a] - 1;
                        } else {
                            ok = false;
                        }
                    } else {
                        pos[a] -= 1;
                    }
                } else if !self.periodic[a] && pos[a] == self.extents[a] {
                    ok = false;
                }
            }
            if ok {
                if let Some(i) = self.index_of(&Cell { axes: full, pos }) {
                    out.push(i);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn build_derivative(&self, p: usize) -> Incidence {
        let mut triplets = Vec::with_capacity(self.cell_counts[p + 1] * 2 * (p + 1));
        for row in 0..self.cell_counts[p + 1] {
            let cell = self.cell(p + 1, row);
            for (k, a) in mask_axes(cell.axes).enumerate() {
                let sign: i8 = if k % 2 == 0 { 1 } else { -1 };
                let face = Cell { axes: cell.axes & !(1 << a), pos: cell.pos };
                let lower = self.index_of(&face).expect("lower face inside complex");
                let upper_cell = self.shift(&face, a, 1).expect("upper face inside complex");
                let upper = self.index_of(&upper_cell).expect("upper face inside complex");
                triplets.push((row, lower, -sign));
                triplets.push((row, upper, sign));
            }
        }
        Incidence::from_triplets(self.cell_counts[p + 1], self.cell_counts[p], &triplets)
    }

    /// The exterior derivative `D_p` mapping `p`-cochains to `(p+1)`-cochains.
    pub fn exterior_derivative(&self, p: usize) -> Result<&Incidence> {
        if p >= self.dim() {
            return invalid(format!("exterior derivative degree {p} out of range for a {}-complex", self.dim()));
        }
        Ok(self.derivatives[p].get_or_init(|| self.build_derivative(p)))
    }

    /// `D_p` transposed, cached.
    pub fn exterior_derivative_transpose(&self, p: usize) -> Result<&Incidence> {
        let d = self.exterior_derivative(p)?;
        Ok(self.transposes[p].get_or_init(|| d.transpose()))
    }

    /// Classifies the cells of a 4D complex whose axis 0 is time.
    pub fn spacetime_split(&self) -> Result<SpacetimeSplit> {
        if self.dim() != 4 {
            return invalid(format!("space-time split needs a 4D complex, got dimension {}", self.dim()));
        }
        let spatial = CubicalComplex::with_periodicity(&self.extents[1..], &self.spacings[1..], &self.periodic[1..])?;
        let time_like = (0..=4)
            .map(|p| (0..self.cell_counts[p]).map(|i| self.cell(p, i).spans(0)).collect())
            .collect();
        Ok(SpacetimeSplit { spatial, time_like })
    }
}

/// Where a 4D cell sits in the space/time decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitCell {
    /// A space-like `p`-cell at time level `level`, identified by a spatial `p`-cell.
    Space { level: usize, cell: usize },
    /// A time-like `p`-cell spanning time slab `slab`, identified by a spatial `(p-1)`-cell.
    Time { slab: usize, cell: usize },
}

/// Time-like / space-like classification of the cells of a 4D complex.
#[derive(Clone, Debug)]
pub struct SpacetimeSplit {
    spatial: CubicalComplex,
    time_like: Vec<Vec<bool>>,
}

impl SpacetimeSplit {
    /// The 3D complex of a single time level.
    pub fn spatial(&self) -> &CubicalComplex {
        &self.spatial
    }

    pub fn is_time_like(&self, p: usize, idx: usize) -> bool {
        self.time_like[p][idx]
    }

    pub fn time_like_count(&self, p: usize) -> usize {
        self.time_like[p].iter().filter(|&&t| t).count()
    }

    pub fn space_like_count(&self, p: usize) -> usize {
        self.time_like[p].len() - self.time_like_count(p)
    }

    /// Re-indexes a cell of the 4D complex it was built from.
    pub fn locate(&self, complex4: &CubicalComplex, p: usize, idx: usize) -> SplitCell {
        let cell = complex4.cell(p, idx);
        let mut pos = [0usize; MAX_DIM];
        pos[..3].copy_from_slice(&cell.pos[1..4]);
        let spatial_axes = cell.axes >> 1;
        let spatial_cell = self.spatial.index_of(&Cell { axes: spatial_axes, pos }).expect("spatial cell exists");
        if cell.spans(0) {
            SplitCell::Time { slab: cell.pos[0], cell: spatial_cell }
        } else {
            SplitCell::Space { level: cell.pos[0], cell: spatial_cell }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit3(n: usize) -> CubicalComplex {
        CubicalComplex::new(&[n, n, n], &[1.0; 3]).unwrap()
    }

    #[test]
    fn unit_cube_counts() {
        assert_eq!(unit3(1).cell_counts(), &[8, 12, 6, 1]);
    }

    #[test]
    fn two_cube_counts() {
        assert_eq!(unit3(2).cell_counts(), &[27, 54, 36, 8]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(CubicalComplex::new(&[0, 1, 1], &[1.0; 3]).is_err());
        assert!(CubicalComplex::new(&[1, 1, 1], &[1.0, -1.0, 1.0]).is_err());
        assert!(CubicalComplex::new(&[1, 1, 1], &[1.0, f64::NAN, 1.0]).is_err());
        assert!(CubicalComplex::new(&[5, 1, 1, 1], &[1.0; 4]).is_err());
        assert!(CubicalComplex::new(&[], &[]).is_err());
    }

    #[test]
    fn one_dimensional_stencil() {
        let c = CubicalComplex::new(&[1], &[1.0]).unwrap();
        let d0 = c.exterior_derivative(0).unwrap();
        assert_eq!(d0.triplets().collect::<Vec<_>>(), vec![(0, 0, -1), (0, 1, 1)]);
        assert!(c.exterior_derivative(1).is_err());
    }

    #[test]
    fn enumeration_round_trips() {
        let c = CubicalComplex::new(&[2, 3, 1], &[1.0, 0.5, 2.0]).unwrap();
        for p in 0..=3 {
            for i in 0..c.cell_count(p) {
                assert_eq!(c.index_of(&c.cell(p, i)), Some(i));
            }
        }
    }

    #[test]
    fn orientation_order_is_lexicographic() {
        let c = unit3(1);
        assert_eq!(c.orientations(1), vec![0b001, 0b010, 0b100]);
        assert_eq!(c.orientations(2), vec![0b011, 0b101, 0b110]);
    }

    #[test]
    fn interior_face_rows_have_four_unit_entries() {
        let c = unit3(2);
        let d1 = c.exterior_derivative(1).unwrap();
        for f in 0..c.cell_count(2) {
            let (cols, vals) = d1.row(f);
            assert_eq!(cols.len(), 4);
            assert!(vals.iter().all(|v| v.abs() == 1));
        }
    }

    #[test]
    fn periodic_counts_and_euler() {
        let c = CubicalComplex::periodic(&[3, 4, 5], &[1.0; 3]).unwrap();
        assert_eq!(c.cell_counts(), &[60, 180, 180, 60]);
        assert_eq!(c.euler_characteristic(), 0);
    }

    #[test]
    fn degenerate_periodic_axis_cancels() {
        let c = CubicalComplex::with_periodicity(&[4, 1, 1], &[1.0; 3], &[true; 3]).unwrap();
        let d0 = c.exterior_derivative(0).unwrap();
        // y- and z-edges connect a vertex to itself
        let y = c.orientation_range(1, 0b010).unwrap();
        for r in y {
            assert!(d0.row(r).0.is_empty());
        }
    }

    #[test]
    fn boundary_flags_box() {
        let c = unit3(2);
        let flags = c.boundary_flags(0);
        assert_eq!(flags.iter().filter(|&&b| !b).count(), 1);
        let cells = c.boundary_flags(3);
        assert!(cells.iter().all(|&b| !b));
    }

    #[test]
    fn cofaces_of_interior_edge() {
        let c = unit3(2);
        let e = c.index_of(&Cell { axes: 0b001, pos: [0, 1, 1, 0] }).unwrap();
        assert_eq!(c.cofaces_top(1, e).len(), 4);
        let corner = c.index_of(&Cell { axes: 0, pos: [0, 0, 0, 0] }).unwrap();
        assert_eq!(c.cofaces_top(0, corner).len(), 1);
    }

    #[test]
    fn spacetime_split_counts() {
        let c = CubicalComplex::new(&[1, 1, 1, 1], &[1.0; 4]).unwrap();
        let s = c.spacetime_split().unwrap();
        assert_eq!(c.cell_count(1), 32);
        assert_eq!(s.time_like_count(1), 8);
        assert_eq!(s.space_like_count(1), 24);
        assert_eq!(s.time_like_count(0), 0);
        assert_eq!(s.space_like_count(4), 0);
        assert!(unit3(1).spacetime_split().is_err());
    }
}
