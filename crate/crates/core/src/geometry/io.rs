//! Binary phase-field files and point CSV.
//!
//! SHPF layout (little-endian): `"SHPF"`, u32 version = 1, u32 n, u32 m,
//! f64 L, u64 seed, then `m^n` bytes in cell order (axis 0 fastest), 1 = A.

use std::io::{BufRead, Read, Write};

use super::{PhaseField, PointSet, Window};
use crate::error::{Error, Result};
use crate::fields::TorusGrid;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"SHPF";
const VERSION: u32 = 1;

pub fn write_phase_field<T: Real, W: Write>(out: &mut W, pf: &PhaseField<T>) -> Result<()> {
    let g = &pf.grid;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    out.write_all(&(g.m() as u32).to_le_bytes())?;
    out.write_all(&g.side().to_f64_lossy().to_le_bytes())?;
    out.write_all(&pf.seed.to_le_bytes())?;
    out.write_all(&pf.cells)?;
    Ok(())
}

pub fn read_phase_field<T: Real, R: Read>(input: &mut R) -> Result<PhaseField<T>> {
    let mut head = [0u8; 32];
    input.read_exact(&mut head).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &head[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected SHPF".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (dim, m) = (u32_at(8) as usize, u32_at(12) as usize);
    let side = f64::from_le_bytes(head[16..24].try_into().unwrap());
    let seed = u64::from_le_bytes(head[24..32].try_into().unwrap());
    let grid = TorusGrid::new(dim, m, T::lit(side)).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let mut cells = vec![0u8; grid.len()];
    input.read_exact(&mut cells).map_err(|e| Error::Format(format!("truncated cell data: {e}")))?;
    if let Some(b) = cells.iter().find(|&&c| c > 1) {
        return Err(Error::Format(format!("cell value {b} is not 0 or 1")));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after cell data".into()));
    }
    Ok(PhaseField { grid, cells, seed, model: "file".into(), warning: None })
}

pub fn write_point_csv<T: Real, W: Write>(out: &mut W, pts: &PointSet<T>) -> Result<()> {
    let dim = pts.window.dim;
    writeln!(out, "{}", if dim == 2 { "x,y" } else { "x,y,z" })?;
    for p in &pts.points {
        // shortest round-trip representation
        let row: Vec<String> = p[..dim].iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_point_csv<T: Real, R: BufRead>(input: R, window: Window<T>) -> Result<PointSet<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty point file".into()))??;
    let expected = if window.dim == 2 { "x,y" } else { "x,y,z" };
    if header.trim() != expected {
        return Err(Error::Format(format!("header {:?}, expected {expected:?}", header.trim())));
    }
    let mut points = Vec::new();
    for (no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", no + 2)))?;
        if vals.len() != window.dim {
            return Err(Error::Format(format!("row {}: {} columns, expected {}", no + 2, vals.len(), window.dim)));
        }
        let mut p = [T::zero(); 3];
        for (k, v) in vals.into_iter().enumerate() {
            p[k] = T::lit(v);
        }
        points.push(p);
    }
    PointSet::from_points(window, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, sample_poisson, RasterModel};

    #[test]
    fn phase_field_round_trip() {
        let pts = sample_poisson(Window::new(3, 2.0).unwrap(), 5.0, 11).unwrap();
        let pf = rasterize(&RasterModel::Balls { points: pts, radius: 0.3 }, 3, 2.0, 16, 11).unwrap();
        let mut buf = Vec::new();
        write_phase_field(&mut buf, &pf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * 16 * 16);
        assert_eq!(&buf[..4], b"SHPF");
        let back: PhaseField<f64> = read_phase_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back.cells, pf.cells);
        assert_eq!(back.grid, pf.grid);
        assert_eq!(back.seed, 11);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_phase_field::<f64, _>(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(read_phase_field::<f64, _>(&mut &buf[..100]).is_err());
    }

    #[test]
    fn point_csv_round_trip_is_exact() {
        for dim in [2, 3] {
            let w = Window::new(dim, 1.0).unwrap();
            let pts = sample_poisson(w, 50.0, 7).unwrap();
            let mut buf = Vec::new();
            write_point_csv(&mut buf, &pts).unwrap();
            let back = read_point_csv(buf.as_slice(), w).unwrap();
            assert_eq!(back.points, pts.points);
        }
        let w = Window::new(2, 1.0).unwrap();
        assert!(read_point_csv("x,y\n0.5\n".as_bytes(), w).is_err());
        assert!(read_point_csv("a,b\n".as_bytes(), w).is_err());
        assert!(read_point_csv("x,y\n1.5,0.2\n".as_bytes(), w).is_err());
    }
}
