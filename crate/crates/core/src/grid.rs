//! Regular box grids and functions sampled on them.
//!
//! Grid points are cell centers: point `i` sits at `origin + idx(i) * spacing`
//! and owns the cube of side `spacing` around it. Flat indices are row-major
//! with the last axis fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
}

impl BoxGrid {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        if origin.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be at least 2, got {}",
                origin.len()
            )));
        }
        if origin.len() != shape.len() {
            return Err(Error::InvalidGrid(format!(
                "origin has {} entries but shape has {}",
                origin.len(),
                shape.len()
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidGrid(
                "every shape entry must be at least 1".into(),
            ));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            origin,
            spacing,
            shape,
        })
    }

    /// Grid of `shape` cells centered on `center`.
    pub fn centered(center: &[f64], spacing: f64, shape: Vec<usize>) -> Result<Self> {
        let origin = center
            .iter()
            .zip(&shape)
            .map(|(c, &s)| c - 0.5 * (s as f64 - 1.0) * spacing)
            .collect();
        Self::new(origin, spacing, shape)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for d in (0..self.dim() - 1).rev() {
            strides[d] = strides[d + 1] * self.shape[d + 1];
        }
        strides
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + i as f64 * self.spacing)
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat index of the grid point within `tol * spacing` of `x`, if any.
    pub fn locate(&self, x: &[f64], tol: f64) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let t = (x[d] - self.origin[d]) / self.spacing;
            let r = t.round();
            if (t - r).abs() > tol || r < 0.0 || r >= self.shape[d] as f64 {
                return None;
            }
            idx.push(r as usize);
        }
        Some(self.ravel(&idx))
    }

    /// Lower and upper corners of the box covered by the cells.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 0.5 * self.spacing;
        let lo = self.origin.iter().map(|o| o - h).collect();
        let hi = self
            .origin
            .iter()
            .zip(&self.shape)
            .map(|(o, &s)| o + (s as f64 - 1.0) * self.spacing + h)
            .collect();
        (lo, hi)
    }

    /// The same grid padded by `pad` cells on every side.
    pub fn padded(&self, pad: usize) -> BoxGrid {
        let origin = self
            .origin
            .iter()
            .map(|o| o - pad as f64 * self.spacing)
            .collect();
        let shape = self.shape.iter().map(|s| s + 2 * pad).collect();
        BoxGrid {
            origin,
            spacing: self.spacing,
            shape,
        }
    }

    /// Offset of this grid inside `outer`, in cells, when the lattices coincide.
    pub fn offset_in(&self, outer: &BoxGrid) -> Option<Vec<usize>> {
        if outer.dim() != self.dim() || (outer.spacing - self.spacing).abs() > 1e-12 * self.spacing
        {
            return None;
        }
        let mut off = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let t = (self.origin[d] - outer.origin[d]) / self.spacing;
            let r = t.round();
            if (t - r).abs() > 1e-9 || r < 0.0 {
                return None;
            }
            let r = r as usize;
            if r + self.shape[d] > outer.shape[d] {
                return None;
            }
            off.push(r);
        }
        Some(off)
    }

    pub fn same_lattice(&self, other: &BoxGrid) -> bool {
        self == other
            || (self.shape == other.shape
                && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
                && self
                    .origin
                    .iter()
                    .zip(&other.origin)
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * self.spacing))
    }
}

/// Real values on a [`BoxGrid`]; `+inf` is allowed (potentials at atoms).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: BoxGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: BoxGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidGrid(
                "grid values must not be NaN or -inf".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: BoxGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: BoxGrid, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: BoxGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(Error::InvalidGrid(
                "grid functions live on different grids".into(),
            ));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup-norm of the difference over points where both values are finite.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute value on the outermost layer of cells.
    pub fn boundary_max(&self) -> f64 {
        let shape = self.grid.shape();
        (0..self.values.len())
            .filter(|&i| {
                self.grid
                    .unravel(i)
                    .iter()
                    .zip(shape)
                    .any(|(&k, &s)| k == 0 || k + 1 == s)
            })
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    /// Embeds the values into a larger grid on the same lattice, zero elsewhere.
    pub fn embed_into(&self, outer: &BoxGrid) -> Result<GridFunction> {
        let off = self
            .grid
            .offset_in(outer)
            .ok_or_else(|| Error::InvalidGrid("grid is not a sub-box of the target grid".into()))?;
        let mut values = vec![0.0; outer.len()];
        for (i, &v) in self.values.iter().enumerate() {
            let idx: Vec<usize> = self
                .grid
                .unravel(i)
                .iter()
                .zip(&off)
                .map(|(a, b)| a + b)
                .collect();
            values[outer.ravel(&idx)] = v;
        }
        Ok(GridFunction {
            grid: outer.clone(),
            values,
        })
    }

    /// Restriction to a sub-box on the same lattice.
    pub fn restrict_to(&self, inner: &BoxGrid) -> Result<GridFunction> {
        let off = inner
            .offset_in(&self.grid)
            .ok_or_else(|| Error::InvalidGrid("target grid is not a sub-box".into()))?;
        let values = (0..inner.len())
            .map(|i| {
                let idx: Vec<usize> = inner
                    .unravel(i)
                    .iter()
                    .zip(&off)
                    .map(|(a, b)| a + b)
                    .collect();
                self.values[self.grid.ravel(&idx)]
            })
            .collect();
        Ok(GridFunction {
            grid: inner.clone(),
            values,
        })
    }
}
