//! Grid data model and geometric observables of phase fields.

mod surface;
mod vtk;

pub use surface::{interface_face_count, specific_surface};
pub use vtk::{write_vtk_scalar, write_vtk_vector};

use crate::error::{Error, Result};
use crate::geometry::PhaseField;
use crate::scalar::Real;

/// Regular grid of `m^dim` cubic cells of side `h = side / m`.
///
/// Micro-scale solvers treat it as a torus; the macroscopic reaction solver
/// uses the same index space with box boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid<T> {
    dim: usize,
    m: usize,
    side: T,
}

/// Per-axis `+1` / `-1` neighbour tables with periodic wrap.
#[derive(Clone, Debug)]
pub struct Neighbors {
    pub plus: Vec<Vec<u32>>,
    pub minus: Vec<Vec<u32>>,
}

impl<T: Real> TorusGrid<T> {
    /// Grid for micro-scale problems: `dim` in {2, 3}, `m >= 8`.
    pub fn new(dim: usize, m: usize, side: T) -> Result<Self> {
        if m < 8 {
            return Err(Error::param("m", format!("need at least 8 cells per side, got {m}")));
        }
        Self::coarse(dim, m, side)
    }

    /// Grid without the resolution floor, for macroscopic fields.
    pub fn coarse(dim: usize, m: usize, side: T) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param("dim", format!("dimension must be 2 or 3, got {dim}")));
        }
        if m == 0 {
            return Err(Error::param("m", "grid needs at least one cell"));
        }
        if !(side > T::zero()) || !side.is_finite() {
            return Err(Error::param("side", format!("side length must be positive, got {side}")));
        }
        if m.checked_pow(dim as u32).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::param("m", "grid too large"));
        }
        Ok(Self { dim, m, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn spacing(&self) -> T {
        self.side / T::of_usize(self.m)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow(axis as u32)
    }

    /// Cell coordinates of a linear index; axis 0 varies fastest.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let m = self.m;
        let mut c = [0usize; 3];
        let mut r = idx;
        for slot in c.iter_mut().take(self.dim) {
            *slot = r % m;
            r /= m;
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.m + c[k];
        }
        idx
    }

    /// Index of possibly out-of-range cell coordinates, wrapped onto the torus.
    pub fn wrap_index(&self, c: [i64; 3]) -> usize {
        let m = self.m as i64;
        let mut w = [0usize; 3];
        for k in 0..self.dim {
            w[k] = c[k].rem_euclid(m) as usize;
        }
        self.index(w)
    }

    pub fn center(&self, idx: usize) -> [T; 3] {
        let h = self.spacing();
        let c = self.coords(idx);
        let mut x = [T::zero(); 3];
        for k in 0..self.dim {
            x[k] = (T::of_usize(c[k]) + T::lit(0.5)) * h;
        }
        x
    }

    pub fn neighbors(&self) -> Neighbors {
        let n = self.len();
        let mut plus = Vec::with_capacity(self.dim);
        let mut minus = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let stride = self.stride(axis);
            let span = stride * self.m;
            let mut p = vec![0u32; n];
            let mut q = vec![0u32; n];
            for idx in 0..n {
                let c = (idx / stride) % self.m;
                p[idx] = if c + 1 == self.m { idx + stride - span } else { idx + stride } as u32;
                q[idx] = if c == 0 { idx + span - stride } else { idx - stride } as u32;
            }
            plus.push(p);
            minus.push(q);
        }
        Neighbors { plus, minus }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.m == other.m && self.side == other.side
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub grid: TorusGrid<T>,
    pub values: Vec<T>,
}

/// Vector field with components interleaved per cell: `values[idx * dim + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    pub grid: TorusGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: TorusGrid<T>) -> Self {
        Self { values: vec![T::zero(); grid.len()], grid }
    }

    pub fn constant(grid: TorusGrid<T>, value: T) -> Self {
        Self { values: vec![value; grid.len()], grid }
    }

    pub fn from_fn(grid: TorusGrid<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self { grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: TorusGrid<T>) -> Self {
        Self { values: vec![T::zero(); grid.len() * grid.dim()], grid }
    }

    pub fn from_fn(grid: TorusGrid<T>, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let n = grid.dim();
        let mut values = Vec::with_capacity(grid.len() * n);
        for i in 0..grid.len() {
            let v = f(grid.center(i));
            values.extend_from_slice(&v[..n]);
        }
        Self { grid, values }
    }

    pub fn get(&self, idx: usize, k: usize) -> T {
        self.values[idx * self.grid.dim() + k]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-cell isotropic diffusivity derived from a phase field.
///
/// `d_b == 0` selects the perforated variant: B-cells are masked out and every
/// face touching them carries zero conductivity.
#[derive(Clone, Debug)]
pub struct CoefficientField<T> {
    pub grid: TorusGrid<T>,
    pub values: Vec<T>,
    pub d_a: T,
    pub d_b: T,
    pub seed: u64,
}

impl<T: Real> CoefficientField<T> {
    pub fn is_perforated(&self) -> bool {
        self.values.iter().any(|&d| d == T::zero())
    }

    /// Cells with strictly positive diffusivity.
    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|&d| d > T::zero()).collect()
    }

    pub fn active_fraction(&self) -> T {
        let active = self.values.iter().filter(|&&d| d > T::zero()).count();
        T::of_usize(active) / T::of_usize(self.values.len())
    }
}

/// Fraction of A-cells.
pub fn volume_fraction<T: Real>(pf: &PhaseField<T>) -> T {
    T::of_usize(pf.count_a()) / T::of_usize(pf.grid.len())
}

pub fn coefficient_field<T: Real>(pf: &PhaseField<T>, d_a: T, d_b: T) -> Result<CoefficientField<T>> {
    if !(d_a > T::zero()) || !d_a.is_finite() {
        return Err(Error::param("d_a", format!("must be positive, got {d_a}")));
    }
    if !(d_b >= T::zero()) || !d_b.is_finite() {
        return Err(Error::param("d_b", format!("must be non-negative, got {d_b}")));
    }
    let values = pf.cells.iter().map(|&c| if c == 1 { d_a } else { d_b }).collect();
    Ok(CoefficientField {
        grid: pf.grid,
        values,
        d_a,
        d_b,
        seed: pf.seed,
    })
}
