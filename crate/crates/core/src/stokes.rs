//! Stokes cell problems on the pore phase (A) and the Darcy permeability.
//!
//! MAC grid: velocity component `k` lives on the face between cell `a` and
//! `a + e_k` (index `k * N + a`), pressure at cell centres. A face is open iff
//! both adjacent cells are fluid; closed faces carry zero velocity. The
//! viscous term is the 5-point (7-point) Laplacian per component: a closed
//! neighbour along the flow axis is a no-slip face (value 0), a closed
//! transverse neighbour is a wall half-way between, realized by the
//! reflected ghost value `-u`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, TorusGrid, VectorField};
use crate::geometry::PhaseField;
use crate::linalg::{connectivity, pcg, LinearOperator, Projector, NONE};
use crate::scalar::{dot, max_abs, norm2, Real};
use crate::tensor::SmallMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesConfig<T> {
    pub nu: T,
    /// Relative momentum residual.
    pub tol: T,
    /// Bound on `max |div_h u| * h / max |u|`.
    pub div_tol: T,
    /// Outer (pressure) iteration cap; `None` means `20 m`.
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for StokesConfig<T> {
    fn default() -> Self {
        let tol = if T::epsilon() < T::lit(1e-12) { T::lit(1e-8) } else { T::lit(1e-4) };
        Self { nu: T::one(), tol, div_tol: tol, max_iter: None }
    }
}

impl<T: Real> StokesConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(Error::param("nu", format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(Error::param("tol", "must lie in (0, 1)"));
        }
        if !(self.div_tol > T::zero() && self.div_tol < T::one()) {
            return Err(Error::param("div_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StokesCorrector<T> {
    pub direction: usize,
    pub grid: TorusGrid<T>,
    /// Face velocities, `velocity[k * N + a]` on the `+e_k` face of cell `a`.
    pub velocity: Vec<T>,
    /// Zero mean over every fluid component; zero in the solid.
    pub pressure: ScalarField<T>,
    pub res_mom: T,
    pub res_div: T,
    pub iterations: usize,
}

impl<T: Real> StokesCorrector<T> {
    /// Cell-centred velocity (average of the two faces per axis), for output.
    pub fn cell_velocity(&self) -> VectorField<T> {
        let g = self.grid;
        let n = g.len();
        let nb = g.neighbors();
        let half = T::lit(0.5);
        let mut v = VectorField::zeros(g);
        for a in 0..n {
            for k in 0..g.dim() {
                v.values[a * g.dim() + k] = half * (self.velocity[k * n + a] + self.velocity[k * n + nb.minus[k][a] as usize]);
            }
        }
        v
    }

    /// Largest divergence magnitude over the cells, in the units of the velocity gradient.
    pub fn max_divergence(&self) -> T {
        let div = divergence(&self.grid, &self.grid.neighbors(), &self.velocity);
        max_abs(&div)
    }
}

#[derive(Clone, Debug)]
pub struct PermeabilityTensor<T> {
    pub tensor: SmallMatrix<T>,
    /// `nu <grad u_i : grad u_j>` (discrete Dirichlet form incl. wall terms).
    pub energy: SmallMatrix<T>,
    pub m: usize,
    pub side: T,
    pub seed: u64,
    pub nu: T,
    pub porosity: T,
    pub res_mom: T,
    pub res_div: T,
}

/// Discrete `-nu Laplacian` on the open faces.
struct Viscous<T> {
    diag: Vec<T>,
    /// Open neighbour faces of each face (up to 6), `NONE` padded.
    nbrs: Vec<[u32; 6]>,
    off: T,
}

impl<T: Real> Viscous<T> {
    fn new(grid: &TorusGrid<T>, open: &[bool], nu: T) -> Self {
        let n = grid.len();
        let dim = grid.dim();
        let nb = grid.neighbors();
        let c = nu / (grid.spacing() * grid.spacing());
        let mut diag = vec![T::zero(); dim * n];
        let mut nbrs = vec![[NONE; 6]; dim * n];
        for k in 0..dim {
            for a in 0..n {
                let f = k * n + a;
                if !open[f] {
                    continue;
                }
                let mut d = T::zero();
                let mut slot = 0;
                for l in 0..dim {
                    for b in [nb.plus[l][a], nb.minus[l][a]] {
                        let g = k * n + b as usize;
                        if open[g] {
                            d += T::one();
                            nbrs[f][slot] = g as u32;
                            slot += 1;
                        } else if l == k {
                            d += T::one();
                        } else {
                            d += T::lit(2.0);
                        }
                    }
                }
                diag[f] = c * d;
            }
        }
        Self { diag, nbrs, off: c }
    }
}

impl<T: Real> LinearOperator<T> for Viscous<T> {
    fn apply(&self, x: &[T], y: &mut [T]) {
        for (f, yf) in y.iter_mut().enumerate() {
            let mut s = self.diag[f] * x[f];
            for &g in &self.nbrs[f] {
                if g == NONE {
                    break;
                }
                s -= self.off * x[g as usize];
            }
            *yf = s;
        }
    }
}

fn divergence<T: Real>(grid: &TorusGrid<T>, nb: &crate::fields::Neighbors, u: &[T]) -> Vec<T> {
    let n = grid.len();
    let h = grid.spacing();
    (0..n)
        .map(|a| (0..grid.dim()).map(|k| u[k * n + a] - u[k * n + nb.minus[k][a] as usize]).sum::<T>() / h)
        .collect()
}

/// `D^T p` on the faces: `(p_a - p_{a+e_k}) / h`.
fn divergence_adjoint<T: Real>(grid: &TorusGrid<T>, nb: &crate::fields::Neighbors, open: &[bool], p: &[T]) -> Vec<T> {
    let n = grid.len();
    let h = grid.spacing();
    let mut out = vec![T::zero(); grid.dim() * n];
    for k in 0..grid.dim() {
        for a in 0..n {
            let f = k * n + a;
            if open[f] {
                out[f] = (p[a] - p[nb.plus[k][a] as usize]) / h;
            }
        }
    }
    out
}

struct Setup<T> {
    grid: TorusGrid<T>,
    open: Vec<bool>,
    visc: Viscous<T>,
    face_proj: Projector,
    face_inv_diag: Vec<T>,
    pressure_proj: Projector,
    percolates: [bool; 3],
}

fn setup<T: Real>(pf: &PhaseField<T>, cfg: &StokesConfig<T>) -> Result<Setup<T>> {
    cfg.validate()?;
    let grid = pf.grid;
    let n = grid.len();
    let dim = grid.dim();
    if pf.count_a() == n {
        return Err(Error::NotApplicable("no solid cell: the Stokes cell problem has no bounded solution".into()));
    }
    let nb = grid.neighbors();
    let fluid: Vec<bool> = pf.cells.iter().map(|&c| c == 1).collect();
    let mut open = vec![false; dim * n];
    for k in 0..dim {
        for a in 0..n {
            open[k * n + a] = fluid[a] && fluid[nb.plus[k][a] as usize];
        }
    }
    let conn = connectivity(&grid, &fluid, |a, k| open[k * n + a]);
    let mut percolates = [false; 3];
    for (k, p) in percolates.iter_mut().enumerate().take(dim) {
        *p = conn.percolates(k);
    }
    let visc = Viscous::new(&grid, &open, cfg.nu);
    let face_proj = Projector::new(open.iter().map(|&o| if o { 0 } else { NONE }).collect(), false);
    let face_inv_diag = visc.diag.iter().map(|&d| if d > T::zero() { T::one() / d } else { T::zero() }).collect();
    Ok(Setup { grid, open, visc, face_proj, face_inv_diag, pressure_proj: Projector::new(conn.labels, true), percolates })
}

fn solve_in<T: Real>(s: &Setup<T>, i: usize, cfg: &StokesConfig<T>) -> Result<StokesCorrector<T>> {
    let grid = s.grid;
    let n = grid.len();
    if i >= grid.dim() {
        return Err(Error::param("direction", format!("axis {i} out of range")));
    }
    if !s.percolates[i] {
        return Err(Error::Percolation { direction: i, phase: "fluid" });
    }
    let nb = grid.neighbors();
    let h = grid.spacing();
    let inner_tol = (cfg.tol.min(cfg.div_tol) * T::lit(1e-3)).max(T::epsilon() * T::lit(64.0));
    let inner_iter = 200 * grid.m() + 1000;
    let mut inner_iterations = 0usize;
    let mut solve_a = |rhs: &[T], x: &mut [T]| -> Result<()> {
        x.iter_mut().for_each(|v| *v = T::zero());
        let rep = pcg(&s.visc, &s.face_inv_diag, &s.face_proj, rhs, x, inner_tol, inner_iter);
        inner_iterations += rep.iterations;
        if !rep.converged && rep.residual > inner_tol * T::lit(100.0) {
            return Err(Error::Solver { iterations: rep.iterations, residual: rep.residual.to_f64_lossy() });
        }
        Ok(())
    };

    let mut f = vec![T::zero(); grid.dim() * n];
    for a in 0..n {
        if s.open[i * n + a] {
            f[i * n + a] = T::one();
        }
    }
    let mut u = vec![T::zero(); f.len()];
    solve_a(&f, &mut u)?;
    let mut p = vec![T::zero(); n];
    let div_metric = |u: &[T]| {
        let umax = max_abs(u);
        if umax == T::zero() {
            T::zero()
        } else {
            max_abs(&divergence(&grid, &nb, u)) * h / umax
        }
    };
    let residual = |u: &[T]| {
        let mut r: Vec<T> = divergence(&grid, &nb, u).into_iter().map(|v| -v).collect();
        s.pressure_proj.apply(&mut r);
        r
    };

    let mut rho = residual(&u);
    let mut d = rho.clone();
    let mut rr = dot(&rho, &rho);
    let max_outer = cfg.max_iter.unwrap_or(20 * grid.m());
    let mut w = vec![T::zero(); u.len()];
    let mut it = 0;
    while div_metric(&u) > cfg.div_tol * T::lit(0.1) && rr > T::zero() {
        if it >= max_outer {
            return Err(Error::Solver { iterations: it, residual: div_metric(&u).to_f64_lossy() });
        }
        let dt_d = divergence_adjoint(&grid, &nb, &s.open, &d);
        solve_a(&dt_d, &mut w)?;
        let mut sd = divergence(&grid, &nb, &w);
        s.pressure_proj.apply(&mut sd);
        let dsd = dot(&d, &sd);
        if !(dsd > T::zero()) {
            break;
        }
        let alpha = rr / dsd;
        for (pk, &dk) in p.iter_mut().zip(&d) {
            *pk += alpha * dk;
        }
        for (uk, &wk) in u.iter_mut().zip(&w) {
            *uk += alpha * wk;
        }
        rho = residual(&u);
        let rr_new = dot(&rho, &rho);
        let beta = rr_new / rr;
        rr = rr_new;
        for (dk, &rk) in d.iter_mut().zip(&rho) {
            *dk = rk + beta * *dk;
        }
        s.pressure_proj.apply(&mut d);
        it += 1;
    }
    s.pressure_proj.apply(&mut p);

    // momentum residual f - A u + D^T p on open faces
    let mut au = vec![T::zero(); u.len()];
    s.visc.apply(&u, &mut au);
    let dtp = divergence_adjoint(&grid, &nb, &s.open, &p);
    let mut r: Vec<T> = (0..u.len()).map(|k| f[k] - au[k] + dtp[k]).collect();
    s.face_proj.apply(&mut r);
    let res_mom = norm2(&r) / norm2(&f);
    let res_div = div_metric(&u);
    if res_mom > cfg.tol || res_div > cfg.div_tol {
        return Err(Error::Solver { iterations: it, residual: res_mom.max(res_div).to_f64_lossy() });
    }
    Ok(StokesCorrector {
        direction: i,
        grid,
        velocity: u,
        pressure: ScalarField { grid, values: p },
        res_mom,
        res_div,
        iterations: it,
    })
}

/// Velocity and pressure for the unit body force `e_i` in the fluid phase A.
pub fn solve_stokes_corrector<T: Real>(pf: &PhaseField<T>, i: usize, cfg: &StokesConfig<T>) -> Result<StokesCorrector<T>> {
    if pf.count_a() == 0 {
        return Err(Error::Percolation { direction: i, phase: "fluid" });
    }
    solve_in(&setup(pf, cfg)?, i, cfg)
}

/// `K_ij = m^-n sum (u_i)_j` over the faces of axis `j`; zero without fluid.
///
/// Axes along which the fluid does not percolate get zero rows and columns;
/// the returned correctors cover the remaining axes.
pub fn permeability<T: Real>(pf: &PhaseField<T>, cfg: &StokesConfig<T>) -> Result<(PermeabilityTensor<T>, Vec<StokesCorrector<T>>)> {
    cfg.validate()?;
    let grid = pf.grid;
    let dim = grid.dim();
    let porosity = crate::fields::volume_fraction(pf);
    let mut out = PermeabilityTensor {
        tensor: SmallMatrix::zeros(dim),
        energy: SmallMatrix::zeros(dim),
        m: grid.m(),
        side: grid.side(),
        seed: pf.seed,
        nu: cfg.nu,
        porosity,
        res_mom: T::zero(),
        res_div: T::zero(),
    };
    if pf.count_a() == 0 {
        return Ok((out, Vec::new()));
    }
    let s = setup(pf, cfg)?;
    // a force along a blocked axis is balanced by pressure alone (u = 0)
    let open_axes: Vec<usize> = (0..dim).filter(|&i| s.percolates[i]).collect();
    if open_axes.is_empty() {
        return Err(Error::Percolation { direction: 0, phase: "fluid" });
    }
    let correctors = open_axes.par_iter().map(|&i| solve_in(&s, i, cfg)).collect::<Result<Vec<_>>>()?;
    let n = grid.len();
    let cells = T::of_usize(n);
    for ci in &correctors {
        let i = ci.direction;
        let mut au = vec![T::zero(); ci.velocity.len()];
        s.visc.apply(&ci.velocity, &mut au);
        for j in 0..dim {
            let flux: T = ci.velocity[j * n..(j + 1) * n].iter().copied().sum();
            out.tensor.set(i, j, flux / cells);
        }
        for cj in &correctors {
            out.energy.set(i, cj.direction, dot(&au, &cj.velocity) / cells);
        }
        out.res_mom = out.res_mom.max(ci.res_mom);
        out.res_div = out.res_div.max(ci.res_div);
    }
    Ok((out, correctors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, Pattern, PointSet, RasterModel, Window};

    fn channel(m: usize) -> PhaseField<f64> {
        rasterize(&RasterModel::<f64>::Pattern(Pattern::Channel { wall_rows: 1 }), 2, 1.0, m, 0).unwrap()
    }

    fn disk(m: usize, r: f64) -> PhaseField<f64> {
        let pts = PointSet::from_points(Window::new(2, 1.0).unwrap(), vec![[0.5, 0.5, 0.0]]).unwrap();
        rasterize(&RasterModel::Balls { points: pts, radius: r }, 2, 1.0, m, 0).unwrap().complement()
    }

    #[test]
    fn poiseuille_profile() {
        let m = 128;
        let pf = channel(m);
        let cfg = StokesConfig::default();
        let c = solve_stokes_corrector(&pf, 0, &cfg).unwrap();
        let h = 1.0 / m as f64;
        let n = pf.grid.len();
        // walls at y = h and y = 1
        let umax = 0.125 * (1.0 - h) * (1.0 - h);
        for j in 1..m {
            let y = (j as f64 + 0.5) * h;
            let exact = (y - h) * (1.0 - y) / 2.0;
            let u = c.velocity[pf.grid.index([m / 3, j, 0])];
            assert!((u - exact).abs() <= 0.02 * umax, "row {j}: {u} vs {exact}");
        }
        // vertical velocity vanishes, pressure is flat
        assert!(c.velocity[n..].iter().all(|&v| v.abs() < 1e-12));
        assert!(c.pressure.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn channel_permeability_and_energy() {
        let m = 64;
        let (k, _) = permeability(&channel(m), &StokesConfig::default()).unwrap();
        let hf = 1.0 - 1.0 / m as f64;
        assert!((k.tensor.get(0, 0) - hf.powi(3) / 12.0).abs() < 0.02 * hf.powi(3) / 12.0);
        assert!(k.tensor.get(1, 1).abs() < 1e-12);
        assert!((k.tensor.get(0, 0) - k.energy.get(0, 0)).abs() <= 1e-7 * k.tensor.max_abs());
        assert!((k.porosity - hf).abs() < 1e-15);
    }

    #[test]
    fn obstacle_flow_is_reflection_symmetric_and_divergence_free() {
        let m = 48;
        let pf = disk(m, 0.2);
        let cfg = StokesConfig::default();
        let (k, cs) = permeability(&pf, &cfg).unwrap();
        let c = &cs[0];
        let g = pf.grid;
        let n = g.len();
        let umax = max_abs(&c.velocity);
        for j in 0..m {
            for i in 0..m {
                let a = c.velocity[g.index([i, j, 0])];
                let b = c.velocity[g.index([i, m - 1 - j, 0])];
                assert!((a - b).abs() <= 1e-7 * umax);
            }
        }
        assert!(c.res_div <= cfg.div_tol && c.res_mom <= cfg.tol);
        // no-slip: every face touching a solid cell is exactly zero
        let nb = g.neighbors();
        for kx in 0..2 {
            for a in 0..n {
                if pf.cells[a] == 0 || pf.cells[nb.plus[kx][a] as usize] == 0 {
                    assert_eq!(c.velocity[kx * n + a], 0.0);
                }
            }
        }
        let kk = k.tensor;
        assert!(kk.asymmetry() <= 1e-7 * kk.max_abs());
        assert!((kk.get(0, 0) - kk.get(1, 1)).abs() <= 1e-7 * kk.max_abs());
        assert!(kk.eigenvalues()[0] >= -1e-7 * kk.max_abs());
        for i in 0..2 {
            for j in 0..2 {
                assert!((kk.get(i, j) - k.energy.get(i, j)).abs() <= 1e-7 * kk.max_abs());
            }
        }
    }

    #[test]
    fn more_solid_means_less_flow() {
        let m = 32;
        let small = disk(m, 0.15);
        let large = disk(m, 0.25);
        assert!(large.cells.iter().zip(&small.cells).all(|(l, s)| l <= s));
        let cfg = StokesConfig::default();
        let k_small = permeability(&small, &cfg).unwrap().0.tensor.get(0, 0);
        let k_large = permeability(&large, &cfg).unwrap().0.tensor.get(0, 0);
        assert!(k_large <= k_small + 1e-7 * k_small);
    }

    #[test]
    fn degenerate_phases() {
        let g = TorusGrid::new(2, 16, 1.0).unwrap();
        let solid = PhaseField::<f64>::filled(g, 0, 0);
        let cfg = StokesConfig::default();
        assert!(matches!(solve_stokes_corrector(&solid, 0, &cfg), Err(Error::Percolation { .. })));
        let (k, cs) = permeability(&solid, &cfg).unwrap();
        assert!(cs.is_empty() && k.tensor.max_abs() == 0.0 && k.porosity == 0.0);
        let fluid = PhaseField::<f64>::filled(g, 1, 0);
        assert!(matches!(solve_stokes_corrector(&fluid, 0, &cfg), Err(Error::NotApplicable(_))));
        // channel blocks flow across it
        let ch = rasterize(&RasterModel::<f64>::Pattern(Pattern::Channel { wall_rows: 2 }), 2, 1.0, 16, 0).unwrap();
        assert!(matches!(solve_stokes_corrector(&ch, 1, &cfg), Err(Error::Percolation { direction: 1, .. })));
        assert!(solve_stokes_corrector(&ch, 0, &StokesConfig { nu: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn three_dimensional_pipe_array() {
        let pts = PointSet::from_points(Window::<f64>::new(3, 1.0).unwrap(), vec![[0.5, 0.5, 0.5]]).unwrap();
        let pf = rasterize(&RasterModel::Balls { points: pts, radius: 0.3 }, 3, 1.0, 16, 0).unwrap().complement();
        let (k, _) = permeability(&pf, &StokesConfig::default()).unwrap();
        let kk = k.tensor;
        assert!(kk.get(0, 0) > 0.0);
        for i in 0..3 {
            assert!((kk.get(i, i) - kk.get(0, 0)).abs() <= 1e-6 * kk.get(0, 0));
        }
        assert!(kk.asymmetry() <= 1e-6 * kk.max_abs());
    }

    #[test]
    fn viscosity_scales_permeability() {
        let pf = disk(32, 0.2);
        let k1 = permeability(&pf, &StokesConfig::default()).unwrap().0.tensor.get(0, 0);
        let k2 = permeability(&pf, &StokesConfig { nu: 2.0, ..StokesConfig::default() }).unwrap().0.tensor.get(0, 0);
        assert!((k1 - 2.0 * k2).abs() <= 1e-7 * k1);
    }
}
