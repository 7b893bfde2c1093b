//! Grids, field containers, validity masks, and the on-disk container format.
//!
//! All fields live on a uniform rectilinear [`Grid3`]. Grid points double as
//! voxel centers; the canonical linear ordering is x3 fastest, x2 next, x1
//! slowest, and multi-component fields are stored component-major (all voxels
//! of component 0, then component 1, ...). That ordering is also the on-disk
//! layout, see [`container`].
//!
//! Fields are immutable after construction in normal pipeline use; every
//! read accessor takes `&self` and is safe to call concurrently.

pub mod container;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{CMat3, CVec3, Error, Result};

/// Uniform rectilinear voxel grid: per-axis voxel counts, spacing and origin.
///
/// Grid point `(i, j, k)` sits at `origin + (i*h1, j*h2, k*h3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
}

impl Grid3 {
    /// Minimum voxel count per axis (interior second-order stencils plus margin).
    pub const MIN_DIM: usize = 5;
    /// Default cap on the total voxel count.
    pub const DEFAULT_VOXEL_BUDGET: usize = 1 << 24;

    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Self::with_budget(dims, spacing, origin, Self::DEFAULT_VOXEL_BUDGET)
    }

    pub fn with_budget(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        budget: usize,
    ) -> Result<Self> {
        if dims.iter().any(|&d| d < Self::MIN_DIM) {
            return Err(Error::DimensionTooSmall {
                dims,
                min: Self::MIN_DIM,
            });
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::NonPositiveSpacing(spacing));
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|c| c.checked_mul(dims[2]))
            .ok_or(Error::VoxelBudgetExceeded {
                count: usize::MAX,
                budget,
            })?;
        if count > budget {
            return Err(Error::VoxelBudgetExceeded { count, budget });
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    /// `n x n x n` grid spanning the unit cube (spacing `1/(n-1)`, origin 0).
    pub fn unit_cube(n: usize) -> Result<Self> {
        let h = 1.0 / (n as f64 - 1.0);
        Self::new([n, n, n], [h, h, h], [0.0, 0.0, 0.0])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of `(i, j, k)`; x3 fastest, x1 slowest.
    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        debug_assert!(ijk[0] < self.dims[0] && ijk[1] < self.dims[1] && ijk[2] < self.dims[2]);
        (ijk[0] * self.dims[1] + ijk[1]) * self.dims[2] + ijk[2]
    }

    /// Inverse of [`Grid3::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], k]
    }

    /// Physical position of grid point `(i, j, k)`.
    #[inline]
    pub fn position(&self, ijk: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + ijk[0] as f64 * self.spacing[0],
            self.origin[1] + ijk[1] as f64 * self.spacing[1],
            self.origin[2] + ijk[2] as f64 * self.spacing[2],
        ]
    }

    /// Stride of a unit step along `axis` in linear-index space.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.dims[1] * self.dims[2],
            1 => self.dims[2],
            _ => 1,
        }
    }
}

/// One complex number per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldC {
    grid: Grid3,
    values: Vec<Complex64>,
}

impl ScalarFieldC {
    pub fn zeros(grid: Grid3) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::ZERO; n],
        }
    }

    pub fn from_values(grid: Grid3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "scalar field length {} does not match grid voxel count {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..out.grid.len() {
            let x = out.grid.position(out.grid.coords(idx));
            out.values[idx] = f(x);
        }
        out
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Complex64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Max modulus over all voxels.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// One complex 3-vector per voxel, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldC {
    grid: Grid3,
    values: Vec<Complex64>,
}

impl VectorFieldC {
    pub fn zeros(grid: Grid3) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::ZERO; 3 * n],
        }
    }

    pub fn from_values(grid: Grid3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 3 * grid.len() {
            return Err(Error::Format(format!(
                "vector field length {} does not match 3x grid voxel count {}",
                values.len(),
                3 * grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> CVec3) -> Self {
        let mut out = Self::zeros(grid);
        let n = out.grid.len();
        for idx in 0..n {
            let x = out.grid.position(out.grid.coords(idx));
            let v = f(x);
            for c in 0..3 {
                out.values[c * n + idx] = v[c];
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn vec_at(&self, idx: usize) -> CVec3 {
        let n = self.grid.len();
        CVec3::new(
            self.values[idx],
            self.values[n + idx],
            self.values[2 * n + idx],
        )
    }

    #[inline]
    pub fn set_vec(&mut self, idx: usize, v: CVec3) {
        let n = self.grid.len();
        self.values[idx] = v[0];
        self.values[n + idx] = v[1];
        self.values[2 * n + idx] = v[2];
    }

    /// All voxels of one component.
    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Max modulus over all voxels and components.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Symmetry tag carried by a [`MatrixFieldC`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    General,
    Symmetric,
    Antisymmetric,
}

/// One complex 3x3 matrix per voxel, stored component-major with row-major
/// component order (m11, m12, m13, m21, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFieldC {
    grid: Grid3,
    values: Vec<Complex64>,
    symmetry: Symmetry,
}

impl MatrixFieldC {
    /// Per-voxel symmetry defect tolerance, relative to the voxel max entry.
    pub const SYMMETRY_TOL: f64 = 1e-12;

    pub fn zeros(grid: Grid3, symmetry: Symmetry) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::ZERO; 9 * n],
            symmetry,
        }
    }

    pub fn from_values(grid: Grid3, values: Vec<Complex64>, symmetry: Symmetry) -> Result<Self> {
        if values.len() != 9 * grid.len() {
            return Err(Error::Format(format!(
                "matrix field length {} does not match 9x grid voxel count {}",
                values.len(),
                9 * grid.len()
            )));
        }
        let out = Self {
            grid,
            values,
            symmetry,
        };
        out.validate_symmetry()?;
        Ok(out)
    }

    pub fn from_fn(grid: Grid3, symmetry: Symmetry, mut f: impl FnMut([f64; 3]) -> CMat3) -> Self {
        let mut out = Self::zeros(grid, symmetry);
        for idx in 0..out.grid.len() {
            let x = out.grid.position(out.grid.coords(idx));
            out.set_mat(idx, f(x));
        }
        out
    }

    /// Constant tensor on every voxel.
    pub fn constant(grid: Grid3, symmetry: Symmetry, m: CMat3) -> Self {
        let mut out = Self::zeros(grid, symmetry);
        for idx in 0..out.grid.len() {
            out.set_mat(idx, m);
        }
        out
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    #[inline]
    pub fn mat_at(&self, idx: usize) -> CMat3 {
        let n = self.grid.len();
        CMat3::from_fn(|r, c| self.values[(3 * r + c) * n + idx])
    }

    #[inline]
    pub fn set_mat(&mut self, idx: usize, m: CMat3) {
        let n = self.grid.len();
        for r in 0..3 {
            for c in 0..3 {
                self.values[(3 * r + c) * n + idx] = m[(r, c)];
            }
        }
    }

    pub fn component(&self, r: usize, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        let k = 3 * r + c;
        &self.values[k * n..(k + 1) * n]
    }

    pub fn component_mut(&mut self, r: usize, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        let k = 3 * r + c;
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Checks the tagged symmetry voxel by voxel: the defect
    /// `max |A -+ A^T|` must not exceed [`Self::SYMMETRY_TOL`] times the
    /// voxel's max entry.
    pub fn validate_symmetry(&self) -> Result<()> {
        let sign = match self.symmetry {
            Symmetry::General => return Ok(()),
            Symmetry::Symmetric => 1.0,
            Symmetry::Antisymmetric => -1.0,
        };
        for idx in 0..self.grid.len() {
            let m = self.mat_at(idx);
            let mut defect = 0.0f64;
            let mut scale = 0.0f64;
            for r in 0..3 {
                for c in 0..3 {
                    defect = defect.max((m[(r, c)] - sign * m[(c, r)]).norm());
                    scale = scale.max(m[(r, c)].norm());
                }
            }
            if defect > Self::SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
                return Err(Error::Format(format!(
                    "voxel {idx} violates {:?} tag: defect {defect:.3e} vs scale {scale:.3e}",
                    self.symmetry
                )));
            }
        }
        Ok(())
    }
}

/// Per-voxel validity flags with a free-text provenance note.
///
/// Masks only ever shrink along a pipeline: every stage intersects its own
/// rejections with the mask it received.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid3,
    flags: Vec<bool>,
    provenance: String,
}

impl Mask {
    pub fn full(grid: Grid3, provenance: impl Into<String>) -> Self {
        let n = grid.len();
        Self {
            grid,
            flags: vec![true; n],
            provenance: provenance.into(),
        }
    }

    pub fn from_flags(grid: Grid3, flags: Vec<bool>, provenance: impl Into<String>) -> Result<Self> {
        if flags.len() != grid.len() {
            return Err(Error::Format(format!(
                "mask length {} does not match grid voxel count {}",
                flags.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            flags,
            provenance: provenance.into(),
        })
    }

    /// Voxels at index distance >= `margin` from every face.
    pub fn interior(grid: Grid3, margin: usize) -> Result<Self> {
        let dims = grid.dims();
        if dims.iter().any(|&d| d < 2 * margin + 1) {
            return Err(Error::EmptyInterior { dims, margin });
        }
        let mut flags = vec![false; grid.len()];
        for i in margin..dims[0] - margin {
            for j in margin..dims[1] - margin {
                for k in margin..dims[2] - margin {
                    flags[grid.index([i, j, k])] = true;
                }
            }
        }
        Ok(Self {
            grid,
            flags,
            provenance: format!("interior margin {margin}"),
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.flags[idx]
    }

    pub fn set(&mut self, idx: usize, v: bool) {
        self.flags[idx] = v;
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Number of valid voxels.
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Linear indices of valid voxels, in canonical order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
    }

    pub fn intersect(&self, other: &Mask, provenance: impl Into<String>) -> Result<Mask> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let flags = self
            .flags
            .iter()
            .zip(&other.flags)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Mask {
            grid: self.grid.clone(),
            flags,
            provenance: provenance.into(),
        })
    }

    /// Shrinks the mask so a centered stencil of half-width `margin` along
    /// every axis stays inside the original mask (and inside the grid).
    pub fn eroded(&self, margin: usize, provenance: impl Into<String>) -> Mask {
        let dims = self.grid.dims();
        let mut flags = vec![false; self.grid.len()];
        'vox: for idx in 0..self.grid.len() {
            if !self.flags[idx] {
                continue;
            }
            let ijk = self.grid.coords(idx);
            for axis in 0..3 {
                if ijk[axis] < margin || ijk[axis] + margin >= dims[axis] {
                    continue 'vox;
                }
                let stride = self.grid.stride(axis);
                for d in 1..=margin {
                    if !self.flags[idx - d * stride] || !self.flags[idx + d * stride] {
                        continue 'vox;
                    }
                }
            }
            flags[idx] = true;
        }
        Mask {
            grid: self.grid.clone(),
            flags,
            provenance: provenance.into(),
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid
            && self
                .flags
                .iter()
                .zip(&other.flags)
                .all(|(&a, &b)| !a || b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_grid() {
        let g = Grid3::new([16, 16, 16], [1.0 / 15.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.len(), 4096);
        let p = g.position([15, 0, 15]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);
    }

    #[test]
    fn dims_too_small_rejected() {
        let err = Grid3::new([4, 16, 16], [0.1; 3], [0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::DimensionTooSmall { .. }));
    }

    #[test]
    fn voxel_budget_enforced() {
        let err = Grid3::with_budget([32, 32, 32], [0.1; 3], [0.0; 3], 1000).unwrap_err();
        assert!(matches!(
            err,
            Error::VoxelBudgetExceeded {
                count: 32768,
                budget: 1000
            }
        ));
        assert_eq!(Grid3::unit_cube(32).unwrap().len(), 32768);
    }

    #[test]
    fn index_roundtrip_and_strides() {
        let g = Grid3::new([5, 6, 7], [1.0; 3], [0.0; 3]).unwrap();
        for idx in [0, 1, 41, g.len() - 1] {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
        // x3 fastest
        assert_eq!(g.index([0, 0, 1]), 1);
        assert_eq!(g.index([0, 1, 0]), 7);
        assert_eq!(g.index([1, 0, 0]), 42);
        assert_eq!(g.stride(0), 42);
        assert_eq!(g.stride(1), 7);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn interior_mask_counts() {
        let g = Grid3::new([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(Mask::interior(g.clone(), 2).unwrap().count(), 1);
        let g16 = Grid3::unit_cube(16).unwrap();
        assert_eq!(Mask::interior(g16.clone(), 1).unwrap().count(), 14 * 14 * 14);
        assert!(matches!(
            Mask::interior(g16, 8).unwrap_err(),
            Error::EmptyInterior { .. }
        ));
    }

    #[test]
    fn mask_erosion_matches_interior_on_full_mask() {
        let g = Grid3::unit_cube(8).unwrap();
        let full = Mask::full(g.clone(), "all");
        let eroded = full.eroded(2, "eroded");
        let interior = Mask::interior(g, 2).unwrap();
        assert_eq!(eroded.flags(), interior.flags());
    }

    #[test]
    fn mask_intersect_monotone() {
        let g = Grid3::unit_cube(6).unwrap();
        let a = Mask::interior(g.clone(), 1).unwrap();
        let b = Mask::interior(g.clone(), 2).unwrap();
        let c = a.intersect(&b, "a&b").unwrap();
        assert_eq!(c.count(), b.count());
        assert!(c.is_subset_of(&a) && c.is_subset_of(&b));
        let c2 = b.intersect(&a, "b&a").unwrap();
        assert_eq!(c.flags(), c2.flags());
    }

    #[test]
    fn matrix_symmetry_validation() {
        let g = Grid3::unit_cube(5).unwrap();
        let mut m = MatrixFieldC::zeros(g.clone(), Symmetry::Symmetric);
        let mut a = CMat3::zeros();
        a[(0, 1)] = Complex64::new(1.0, 2.0);
        a[(1, 0)] = Complex64::new(1.0, 2.0);
        m.set_mat(3, a);
        assert!(m.validate_symmetry().is_ok());
        a[(1, 0)] = Complex64::new(1.0, 2.1);
        m.set_mat(3, a);
        assert!(m.validate_symmetry().is_err());
    }

    #[test]
    fn vector_component_major_layout() {
        let g = Grid3::unit_cube(5).unwrap();
        let mut v = VectorFieldC::zeros(g.clone());
        v.set_vec(7, CVec3::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ));
        assert_eq!(v.values()[7].re, 1.0);
        assert_eq!(v.values()[g.len() + 7].re, 2.0);
        assert_eq!(v.values()[2 * g.len() + 7].re, 3.0);
        assert_eq!(v.vec_at(7)[2].re, 3.0);
    }
}
