//! Legacy VTK `STRUCTURED_POINTS` (ASCII) export.

use std::io::{self, Write};

use super::{ScalarField, TorusGrid, VectorField};
use crate::scalar::Real;

fn header<T: Real, W: Write>(out: &mut W, grid: &TorusGrid<T>, title: &str) -> io::Result<()> {
    let m = grid.m();
    let h = grid.spacing().to_f64_lossy();
    let (mz, hz) = if grid.dim() == 3 { (m, h) } else { (1, 1.0) };
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {m} {m} {mz}")?;
    writeln!(out, "ORIGIN 0 0 0")?;
    writeln!(out, "SPACING {h} {h} {hz}")?;
    writeln!(out, "POINT_DATA {}", grid.len())
}

pub fn write_vtk_scalar<T: Real, W: Write>(out: &mut W, title: &str, name: &str, field: &ScalarField<T>) -> io::Result<()> {
    header(out, &field.grid, title)?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in &field.values {
        writeln!(out, "{}", v.to_f64_lossy())?;
    }
    Ok(())
}

/// 2D fields are padded with a zero third component, as VTK vectors are 3-vectors.
pub fn write_vtk_vector<T: Real, W: Write>(out: &mut W, title: &str, name: &str, field: &VectorField<T>) -> io::Result<()> {
    header(out, &field.grid, title)?;
    writeln!(out, "VECTORS {name} double")?;
    let n = field.grid.dim();
    for idx in 0..field.grid.len() {
        let c = |k: usize| if k < n { field.get(idx, k).to_f64_lossy() } else { 0.0 };
        writeln!(out, "{} {} {}", c(0), c(1), c(2))?;
    }
    Ok(())
}
