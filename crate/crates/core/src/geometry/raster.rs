//! Rasterization of geometric models to phase indicators on a torus grid.

use super::{
    lattice_points, matern_thin, sample_poisson, voronoi, delaunay, GrainModel, MaternVariant, PointSet, Tessellation,
    Window,
};
use crate::error::{Error, Result};
use crate::fields::TorusGrid;
use crate::scalar::Real;

/// Raised when a non-trivial model rasterizes to a single phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterWarning {
    AllA,
    AllB,
}

/// Indicator of phase A (`1`) and B (`0`) per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField<T> {
    pub grid: TorusGrid<T>,
    pub cells: Vec<u8>,
    pub seed: u64,
    pub model: String,
    pub warning: Option<RasterWarning>,
}

impl<T: Real> PhaseField<T> {
    pub fn filled(grid: TorusGrid<T>, value: u8, seed: u64) -> Self {
        Self { grid, cells: vec![value.min(1); grid.len()], seed, model: "uniform".into(), warning: None }
    }

    pub fn count_a(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn is_a(&self, idx: usize) -> bool {
        self.cells[idx] == 1
    }

    /// Swaps the phases.
    pub fn complement(&self) -> Self {
        let warning = self.warning.map(|w| match w {
            RasterWarning::AllA => RasterWarning::AllB,
            RasterWarning::AllB => RasterWarning::AllA,
        });
        Self { cells: self.cells.iter().map(|&c| 1 - c).collect(), warning, ..self.clone() }
    }

    /// Lattice translation: `out(i) = in(i + v mod m)`.
    pub fn shift(&self, v: [i64; 3]) -> Self {
        let g = &self.grid;
        let cells = (0..g.len())
            .map(|idx| {
                let c = g.coords(idx);
                let src = g.wrap_index([c[0] as i64 + v[0], c[1] as i64 + v[1], c[2] as i64 + v[2]]);
                self.cells[src]
            })
            .collect();
        Self { cells, ..self.clone() }
    }

    /// The `m_sub^n` block starting at `origin`, read with wrap-around and
    /// treated as a torus of its own.
    pub fn subwindow(&self, origin: [usize; 3], m_sub: usize) -> Result<Self> {
        let g = &self.grid;
        if m_sub > g.m() {
            return Err(Error::param("m_sub", format!("sub-window of {m_sub} cells exceeds {}", g.m())));
        }
        let side = g.spacing() * T::of_usize(m_sub);
        let sub = TorusGrid::new(g.dim(), m_sub, side)?;
        let cells = (0..sub.len())
            .map(|idx| {
                let c = sub.coords(idx);
                let at = |k: usize| (origin[k] + c[k]) as i64;
                self.cells[g.wrap_index([at(0), at(1), if g.dim() == 3 { at(2) } else { 0 }])]
            })
            .collect();
        Ok(Self { grid: sub, cells, seed: self.seed, model: self.model.clone(), warning: None })
    }
}

/// Deterministic patterns defined directly on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pattern {
    /// All A.
    Uniform,
    /// A where the coordinate along `axis` is below `fraction * L`.
    Layers { axis: usize, fraction: f64 },
    /// `tiles` squares per side, A on tiles with even index sum.
    Checkerboard { tiles: usize },
    /// Solid (B) rows `0..wall_rows` along axis 1, fluid elsewhere.
    Channel { wall_rows: usize },
    /// One centred ball per period cell, radius relative to the period,
    /// replicated exactly `periods` times per side.
    DiskLattice { periods: usize, radius: f64 },
}

/// Closed sets that can be rasterized; phase A is the set itself.
#[derive(Clone, Debug)]
pub enum RasterModel<T> {
    Balls { points: PointSet<T>, radius: T },
    /// Band of `thickness` cells around the tessellation facets.
    TessellationBoundaries { tess: Tessellation<T>, thickness: usize },
    DelaunayPipes { tess: Tessellation<T>, radius: T },
    Grains { model: GrainModel<T> },
    Pattern(Pattern),
}

impl<T: Real> RasterModel<T> {
    fn tag(&self) -> String {
        match self {
            RasterModel::Balls { points, .. } => format!("balls/{}", points.model.tag()),
            RasterModel::TessellationBoundaries { .. } => "voronoi_boundaries".into(),
            RasterModel::DelaunayPipes { .. } => "delaunay_pipes".into(),
            RasterModel::Grains { .. } => "grains".into(),
            RasterModel::Pattern(p) => match p {
                Pattern::Uniform => "uniform",
                Pattern::Layers { .. } => "layers",
                Pattern::Checkerboard { .. } => "checkerboard",
                Pattern::Channel { .. } => "channel",
                Pattern::DiskLattice { .. } => "disk_lattice",
            }
            .into(),
        }
    }

    fn window(&self) -> Option<&Window<T>> {
        match self {
            RasterModel::Balls { points, .. } => Some(&points.window),
            RasterModel::TessellationBoundaries { tess, .. } | RasterModel::DelaunayPipes { tess, .. } => {
                Some(&tess.points.window)
            }
            RasterModel::Grains { model } => Some(&model.window),
            RasterModel::Pattern(_) => None,
        }
    }

    /// Models whose closed set is empty or everything by construction.
    fn trivially_uniform(&self) -> bool {
        match self {
            RasterModel::Balls { points, radius } => points.is_empty() || *radius == T::zero(),
            RasterModel::Grains { model } => model.grains.is_empty(),
            RasterModel::Pattern(Pattern::Uniform) => true,
            RasterModel::Pattern(Pattern::Layers { fraction, .. }) => *fraction <= 0.0 || *fraction >= 1.0,
            RasterModel::Pattern(Pattern::DiskLattice { radius, .. }) => *radius <= 0.0,
            _ => false,
        }
    }
}

/// Marks every cell whose centre lies in the model's closed set.
pub fn rasterize<T: Real>(model: &RasterModel<T>, dim: usize, side: T, m: usize, seed: u64) -> Result<PhaseField<T>> {
    let grid = TorusGrid::new(dim, m, side)?;
    if let Some(w) = model.window() {
        if w.dim != dim || w.side != side {
            return Err(Error::Contract(format!(
                "model window ({}D, side {}) differs from raster window ({dim}D, side {side})",
                w.dim, w.side
            )));
        }
    }
    let mut cells = vec![0u8; grid.len()];
    match model {
        RasterModel::Balls { points, radius } => {
            if *radius < T::zero() {
                return Err(Error::param("radius", "must be non-negative"));
            }
            // a zero radius is a null set
            if *radius > T::zero() {
                let r2 = *radius * *radius;
                for p in &points.points {
                    mark_near(&grid, p, p, *radius, &mut cells, |x| dist_sq(x, p) <= r2);
                }
            }
        }
        RasterModel::TessellationBoundaries { tess, thickness } => {
            let half = grid.spacing() * T::of_usize(*thickness) * T::lit(0.5);
            let w = tess.points.window;
            for (idx, cell) in cells.iter_mut().enumerate() {
                let x = grid.center(idx);
                let g = tess.nearest_generator(&x);
                let p = tess.points.points[g];
                let rel = w.displacement(&p, &x);
                let near = tess.cells[g].facets.iter().any(|f| {
                    let mut q = [T::zero(); 3];
                    for k in 0..dim {
                        q[k] = tess.points.points[f.neighbor.index][k] + T::from_i32(f.neighbor.offset[k]).unwrap() * side - p[k];
                    }
                    let qn = dist_sq(&q, &[T::zero(); 3]).sqrt();
                    let proj = (0..3).fold(T::zero(), |s, k| s + rel[k] * q[k]) / qn;
                    qn * T::lit(0.5) - proj <= half
                });
                *cell = near as u8;
            }
        }
        RasterModel::DelaunayPipes { tess, radius } => {
            let r2 = *radius * *radius;
            for e in delaunay(tess) {
                let a = tess.points.points[e.a];
                let mut b = tess.points.points[e.b];
                for k in 0..dim {
                    b[k] += T::from_i32(e.offset[k]).unwrap() * side;
                }
                mark_near(&grid, &a, &b, *radius, &mut cells, |x| segment_dist_sq(x, &a, &b) <= r2);
            }
        }
        RasterModel::Grains { model: gm } => {
            for g in &gm.grains {
                mark_near(&grid, &g.center, &g.center, g.reach, &mut cells, |x| {
                    super::grain_indicator(g, x) <= T::one()
                });
            }
        }
        RasterModel::Pattern(p) => fill_pattern(&grid, p, &mut cells)?,
    }
    let count = cells.iter().filter(|&&c| c == 1).count();
    let warning = if model.trivially_uniform() {
        None
    } else if count == 0 {
        Some(RasterWarning::AllB)
    } else if count == cells.len() {
        Some(RasterWarning::AllA)
    } else {
        None
    };
    Ok(PhaseField { grid, cells, seed, model: model.tag(), warning })
}

fn dist_sq<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    (0..3).fold(T::zero(), |s, k| s + (a[k] - b[k]) * (a[k] - b[k]))
}

fn segment_dist_sq<T: Real>(x: &[T; 3], a: &[T; 3], b: &[T; 3]) -> T {
    let ab: Vec<T> = (0..3).map(|k| b[k] - a[k]).collect();
    let len2 = ab.iter().fold(T::zero(), |s, &v| s + v * v);
    let mut t = if len2 > T::zero() { (0..3).fold(T::zero(), |s, k| s + (x[k] - a[k]) * ab[k]) / len2 } else { T::zero() };
    t = t.max(T::zero()).min(T::one());
    let p = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    dist_sq(x, &p)
}

/// Visits the lifted cell centres inside the box spanned by `a`, `b` grown by
/// `r`, and marks those accepted by `inside` (wrapped onto the torus).
fn mark_near<T: Real>(grid: &TorusGrid<T>, a: &[T; 3], b: &[T; 3], r: T, cells: &mut [u8], inside: impl Fn(&[T; 3]) -> bool) {
    let h = grid.spacing();
    let dim = grid.dim();
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for k in 0..dim {
        let (l, u) = (a[k].min(b[k]) - r, a[k].max(b[k]) + r);
        lo[k] = (l / h - T::lit(0.5)).ceil().to_i64().unwrap();
        hi[k] = (u / h - T::lit(0.5)).floor().to_i64().unwrap();
    }
    let half = T::lit(0.5);
    for cz in lo[2]..=hi[2] {
        for cy in lo[1]..=hi[1] {
            for cx in lo[0]..=hi[0] {
                let c = [cx, cy, cz];
                let mut x = [T::zero(); 3];
                for k in 0..dim {
                    x[k] = (T::from_i64(c[k]).unwrap() + half) * h;
                }
                if inside(&x) {
                    cells[grid.wrap_index(c)] = 1;
                }
            }
        }
    }
}

fn fill_pattern<T: Real>(grid: &TorusGrid<T>, p: &Pattern, cells: &mut [u8]) -> Result<()> {
    let m = grid.m();
    let dim = grid.dim();
    match *p {
        Pattern::Uniform => cells.fill(1),
        Pattern::Layers { axis, fraction } => {
            if axis >= dim {
                return Err(Error::param("axis", format!("layer axis {axis} out of range")));
            }
            for (idx, cell) in cells.iter_mut().enumerate() {
                let c = grid.coords(idx)[axis];
                *cell = (((c as f64) + 0.5) / (m as f64) < fraction) as u8;
            }
        }
        Pattern::Checkerboard { tiles } => {
            if tiles == 0 {
                return Err(Error::param("tiles", "need at least one tile per side"));
            }
            for (idx, cell) in cells.iter_mut().enumerate() {
                let c = grid.coords(idx);
                // tile of the centre (c + 1/2) h, in integer arithmetic
                let sum: usize = (0..dim).map(|k| (2 * c[k] + 1) * tiles / (2 * m)).sum();
                *cell = sum.is_multiple_of(2) as u8;
            }
        }
        Pattern::Channel { wall_rows } => {
            if wall_rows >= m {
                return Err(Error::param("wall_rows", "walls fill the whole window"));
            }
            for (idx, cell) in cells.iter_mut().enumerate() {
                *cell = (grid.coords(idx)[1] >= wall_rows) as u8;
            }
        }
        Pattern::DiskLattice { periods, radius } => {
            if periods == 0 || !m.is_multiple_of(periods) {
                return Err(Error::param("periods", format!("{periods} periods do not divide {m} cells")));
            }
            if !(radius >= 0.0) {
                return Err(Error::param("radius", "must be non-negative"));
            }
            let mp = m / periods;
            for (idx, cell) in cells.iter_mut().enumerate() {
                let c = grid.coords(idx);
                // offset of the centre from the period centre, in half-cells
                let r2: f64 = (0..dim)
                    .map(|k| {
                        let off = (2 * (c[k] % mp) + 1) as f64 - mp as f64;
                        off * off
                    })
                    .sum();
                *cell = (radius > 0.0 && r2 <= (2.0 * radius * mp as f64).powi(2)) as u8;
            }
        }
    }
    Ok(())
}

/// Feature families that a recipe can sample.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureModel<T> {
    /// Poisson germs with balls of fixed radius.
    Boolean { intensity: T, radius: T },
    MaternBalls { intensity: T, hardcore: T, variant: MaternVariant, radius: T },
    /// Centred balls on a square lattice of the given spacing.
    DiskLattice { spacing: T, radius: T },
    VoronoiBoundaries { intensity: T, thickness: usize },
    DelaunayPipes { intensity: T, radius: T },
    Grains { intensity: T },
    Pattern(Pattern),
}

/// A geometry family sampled at fixed feature scale on windows of any size.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryRecipe<T> {
    pub dim: usize,
    pub features: FeatureModel<T>,
    /// Assign the features to phase B instead of A.
    pub features_are_b: bool,
}

impl<T: Real> GeometryRecipe<T> {
    pub fn new(dim: usize, features: FeatureModel<T>) -> Self {
        Self { dim, features, features_are_b: false }
    }

    pub fn with_features_b(mut self) -> Self {
        self.features_are_b = true;
        self
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.features, FeatureModel::DiskLattice { .. } | FeatureModel::Pattern(_))
    }

    pub fn realize(&self, side: T, m: usize, seed: u64) -> Result<PhaseField<T>> {
        let window = Window::new(self.dim, side)?;
        let tessellate = |intensity: T| -> Result<Option<Tessellation<T>>> {
            let pts = sample_poisson(window, intensity, seed)?;
            if pts.is_empty() {
                Ok(None)
            } else {
                voronoi(&pts).map(Some)
            }
        };
        let empty = RasterModel::Balls { points: PointSet { seed, ..PointSet::from_points(window, vec![])? }, radius: T::zero() };
        let model = match &self.features {
            FeatureModel::Boolean { intensity, radius } => {
                RasterModel::Balls { points: sample_poisson(window, *intensity, seed)?, radius: non_negative("radius", *radius)? }
            }
            FeatureModel::MaternBalls { intensity, hardcore, variant, radius } => {
                let pts = sample_poisson(window, *intensity, seed)?;
                RasterModel::Balls { points: matern_thin(&pts, *hardcore, *variant, seed)?, radius: non_negative("radius", *radius)? }
            }
            FeatureModel::DiskLattice { spacing, radius } => {
                let periods = (side / *spacing).round().to_usize().unwrap_or(0);
                let tol = T::geom_tol(side);
                if periods == 0 || (T::of_usize(periods) * *spacing - side).abs() > tol {
                    return Err(Error::param("spacing", format!("lattice spacing {spacing} does not tile side {side}")));
                }
                let _ = lattice_points(window, periods)?;
                RasterModel::Pattern(Pattern::DiskLattice {
                    periods,
                    radius: (non_negative("radius", *radius)? / *spacing).to_f64_lossy(),
                })
            }
            FeatureModel::VoronoiBoundaries { intensity, thickness } => match tessellate(*intensity)? {
                Some(tess) => RasterModel::TessellationBoundaries { tess, thickness: *thickness },
                None => empty,
            },
            FeatureModel::DelaunayPipes { intensity, radius } => match tessellate(*intensity)? {
                Some(tess) => RasterModel::DelaunayPipes { tess, radius: non_negative("radius", *radius)? },
                None => empty,
            },
            FeatureModel::Grains { intensity } => match tessellate(*intensity)? {
                Some(tess) => RasterModel::Grains { model: GrainModel::from_tessellation(&tess)? },
                None => empty,
            },
            FeatureModel::Pattern(p) => RasterModel::Pattern(*p),
        };
        let pf = rasterize(&model, self.dim, side, m, seed)?;
        Ok(if self.features_are_b { pf.complement() } else { pf })
    }

    /// Ensemble volume fraction of phase A, where known in closed form.
    pub fn reference_volume_fraction(&self) -> Option<T> {
        let feature = match &self.features {
            FeatureModel::Boolean { intensity, radius } => Some(T::one() - (-*intensity * ball_volume(self.dim, *radius)).exp()),
            FeatureModel::DiskLattice { spacing, radius } if *radius * T::lit(2.0) <= *spacing => {
                Some(ball_volume(self.dim, *radius) / spacing.powi(self.dim as i32))
            }
            FeatureModel::Pattern(Pattern::Uniform) => Some(T::one()),
            _ => None,
        }?;
        Some(if self.features_are_b { T::one() - feature } else { feature })
    }

    /// Ensemble specific surface, where known in closed form.
    pub fn reference_specific_surface(&self) -> Option<T> {
        match &self.features {
            FeatureModel::Boolean { intensity, radius } => {
                let r = *radius;
                let sphere = if self.dim == 2 { T::TAU() * r } else { T::lit(4.0) * T::PI() * r * r };
                Some(*intensity * sphere * (-*intensity * ball_volume(self.dim, r)).exp())
            }
            FeatureModel::Pattern(Pattern::Uniform) => Some(T::zero()),
            _ => None,
        }
    }
}

fn non_negative<T: Real>(name: &'static str, v: T) -> Result<T> {
    if v >= T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be non-negative, got {v}")))
    }
}

pub(crate) fn ball_volume<T: Real>(dim: usize, r: T) -> T {
    if dim == 2 {
        T::PI() * r * r
    } else {
        T::lit(4.0 / 3.0) * T::PI() * r * r * r
    }
}
