//! Uniform periodic grids on the box `[-π, π]^dim` and real fields sampled on them.
//!
//! Samples sit on the grid nodes `x_i = -π + i·h`, `i = 0..n`, `h = 2π/n`, along every axis.
//! Field values are stored row-major with the last axis fastest, so in 2D the value at
//! `(x₁[i], x₂[j])` lives at `i·n + j` and in 3D `(i, j, l)` lives at `(i·n + j)·n + l`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Geometry of a uniform grid with `n` nodes per axis on `[-π, π]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    dim: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `2π/n`.
    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Quadrature weight of a single node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -PI + i as f64 * self.h()
    }

    /// Per-axis node indices of the flat index `idx` (unused trailing axes are zero).
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    pub fn ravel(&self, index: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => index[0] * n + index[1],
            _ => (index[0] * n + index[1]) * n + index[2],
        }
    }

    /// Physical position of the node with flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, l] = self.unravel(idx);
        let z = if self.dim == 3 { self.coord(l) } else { 0.0 };
        [self.coord(i), self.coord(j), z]
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.dim == 2 {
            write!(f, "{}x{}", self.n, self.n)
        } else {
            write!(f, "{}x{}x{}", self.n, self.n, self.n)
        }
    }
}

/// Real values sampled at every node of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::FieldLength {
                expected: spec.len(),
                found: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every node position.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..spec.len()).map(|idx| f(spec.point(idx))).collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale(c);
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.spec.ensure_same(&other.spec)?;
        Ok(Self {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.spec.ensure_same(&other.spec)?;
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Midpoint-rule integral `h^dim · Σ f`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.spec.cell_volume() * f.values.iter().sum::<f64>()
}

/// Discrete inner product `h^dim · Σ f·g`.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.spec.ensure_same(&g.spec)?;
    Ok(f.spec.cell_volume() * dot(&f.values, &g.values))
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    (f.spec.cell_volume() * dot(&f.values, &f.values)).sqrt()
}

/// Discrete L² distance between two fields on the same grid.
pub fn l2_distance(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.spec.ensure_same(&g.spec)?;
    let s: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((f.spec.cell_volume() * s).sqrt())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
