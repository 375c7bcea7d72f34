//! Scalar corrector problems and the homogenized diffusion tensor.
//!
//! Cell-centred finite volumes on the torus. The face between cell `a` and
//! `a + e_k` carries the harmonic mean `kappa` of the two diffusivities, or 0
//! when either cell is masked, which imposes zero flux on the interface.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{CoefficientField, Neighbors, ScalarField, TorusGrid, VectorField};
use crate::linalg::{connectivity, pcg, LinearOperator, Projector};
use crate::scalar::{pairwise_sum, Real};
use crate::tensor::SmallMatrix;

/// Stopping rule for the corrector solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Relative residual `||A phi - b|| / ||b||`.
    pub tol: T,
    /// Iteration cap; `None` means `50 m`.
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        // 1e-10 is out of reach in single precision
        let tol = if T::epsilon() < T::lit(1e-12) { T::lit(1e-10) } else { T::lit(1e-5) };
        Self { tol, max_iter: None }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, max_iter: None }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(Error::param("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    fn iterations(&self, m: usize) -> usize {
        self.max_iter.unwrap_or(50 * m)
    }
}

#[derive(Clone, Debug)]
pub struct Corrector<T> {
    /// Zero-based axis `j` of the unit gradient `e_j`.
    pub direction: usize,
    /// Zero on masked cells, zero mean on every active component.
    pub field: ScalarField<T>,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct HomogenizedTensor<T> {
    pub tensor: SmallMatrix<T>,
    pub m: usize,
    pub side: T,
    pub seed: u64,
    pub d_a: T,
    pub d_b: T,
    /// Fraction of cells with positive diffusivity.
    pub active_fraction: T,
    pub residuals: Vec<T>,
    pub iterations: Vec<usize>,
}

/// Face conductivities and neighbour tables of a coefficient field.
pub(crate) struct FaceOperator<T> {
    grid: TorusGrid<T>,
    nb: Neighbors,
    /// `kappa[k][a]`: face between `a` and `a + e_k`.
    kappa: Vec<Vec<T>>,
}

impl<T: Real> FaceOperator<T> {
    pub(crate) fn new(cf: &CoefficientField<T>) -> Self {
        let grid = cf.grid;
        let nb = grid.neighbors();
        let two = T::lit(2.0);
        let kappa = (0..grid.dim())
            .map(|k| {
                (0..grid.len())
                    .map(|a| {
                        let (da, db) = (cf.values[a], cf.values[nb.plus[k][a] as usize]);
                        if da > T::zero() && db > T::zero() {
                            two * da * db / (da + db)
                        } else {
                            T::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Self { grid, nb, kappa }
    }

    fn diagonal(&self) -> Vec<T> {
        (0..self.grid.len())
            .map(|a| (0..self.grid.dim()).map(|k| self.kappa[k][a] + self.kappa[k][self.nb.minus[k][a] as usize]).sum())
            .collect()
    }

    /// `b_a = h (kappa_{a,+j} - kappa_{a-e_j,+j})`.
    fn rhs(&self, j: usize) -> Vec<T> {
        let h = self.grid.spacing();
        (0..self.grid.len()).map(|a| h * (self.kappa[j][a] - self.kappa[j][self.nb.minus[j][a] as usize])).collect()
    }

    /// Discrete `grad phi_j + e_j` on the `+k` face of every cell.
    fn face_gradient(&self, phi: &[T], j: usize, k: usize, a: usize) -> T {
        let h = self.grid.spacing();
        let g = (phi[self.nb.plus[k][a] as usize] - phi[a]) / h;
        if j == k {
            g + T::one()
        } else {
            g
        }
    }
}

impl<T: Real> LinearOperator<T> for FaceOperator<T> {
    fn apply(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for k in 0..self.grid.dim() {
            let kap = &self.kappa[k];
            let plus = &self.nb.plus[k];
            for a in 0..x.len() {
                let b = plus[a] as usize;
                let flux = kap[a] * (x[a] - x[b]);
                y[a] += flux;
                y[b] -= flux;
            }
        }
    }
}

fn check_direction<T: Real>(grid: &TorusGrid<T>, j: usize) -> Result<()> {
    if j >= grid.dim() {
        return Err(Error::param("direction", format!("axis {j} out of range for {}D", grid.dim())));
    }
    Ok(())
}

fn solve_with<T: Real>(op: &FaceOperator<T>, proj: &Projector, j: usize, cfg: &SolverConfig<T>) -> Result<Corrector<T>> {
    let b = op.rhs(j);
    let inv_diag: Vec<T> = op
        .diagonal()
        .iter()
        .enumerate()
        .map(|(a, &d)| if d > T::zero() && proj.is_unknown(a) { T::one() / d } else { T::zero() })
        .collect();
    let mut phi = vec![T::zero(); b.len()];
    let rep = pcg(op, &inv_diag, proj, &b, &mut phi, cfg.tol, cfg.iterations(op.grid.m()));
    if !rep.converged {
        return Err(Error::Solver { iterations: rep.iterations, residual: rep.residual.to_f64_lossy() });
    }
    Ok(Corrector {
        direction: j,
        field: ScalarField { grid: op.grid, values: phi },
        residual: rep.residual,
        iterations: rep.iterations,
    })
}

/// Union-find percolation check; returns the per-component projector.
fn active_components<T: Real>(cf: &CoefficientField<T>, op: &FaceOperator<T>, directions: &[usize]) -> Result<Projector> {
    let member = cf.mask();
    let conn = connectivity(&cf.grid, &member, |a, k| op.kappa[k][a] > T::zero());
    for &j in directions {
        if !conn.percolates(j) {
            return Err(Error::Percolation { direction: j, phase: "active" });
        }
    }
    Ok(Projector::new(conn.labels, true))
}

pub fn solve_corrector<T: Real>(cf: &CoefficientField<T>, j: usize, cfg: &SolverConfig<T>) -> Result<Corrector<T>> {
    cfg.validate()?;
    check_direction(&cf.grid, j)?;
    let op = FaceOperator::new(cf);
    let proj = active_components(cf, &op, &[j])?;
    solve_with(&op, &proj, j, cfg)
}

/// Solves all `n` correctors (in parallel) and assembles the tensor.
pub fn homogenize<T: Real>(cf: &CoefficientField<T>, cfg: &SolverConfig<T>) -> Result<(HomogenizedTensor<T>, Vec<Corrector<T>>)> {
    cfg.validate()?;
    let op = FaceOperator::new(cf);
    let dirs: Vec<usize> = (0..cf.grid.dim()).collect();
    let proj = active_components(cf, &op, &dirs)?;
    let correctors = dirs.par_iter().map(|&j| solve_with(&op, &proj, j, cfg)).collect::<Result<Vec<_>>>()?;
    let tensor = assemble(cf, &op, &correctors);
    Ok((tensor, correctors))
}

fn check_correctors<T: Real>(cf: &CoefficientField<T>, correctors: &[Corrector<T>]) -> Result<()> {
    let n = cf.grid.dim();
    if correctors.len() != n {
        return Err(Error::Contract(format!("expected {n} correctors, got {}", correctors.len())));
    }
    for (j, c) in correctors.iter().enumerate() {
        if c.direction != j {
            return Err(Error::Contract(format!("corrector {j} solves direction {}", c.direction)));
        }
        if !c.field.grid.same_shape(&cf.grid) {
            return Err(Error::Contract("corrector grid differs from coefficient grid".into()));
        }
    }
    Ok(())
}

/// `D_ij = m^-n sum_a kappa_{a,i} (grad_h phi_j + e_j)_i` (face fluxes).
pub fn homogenized_tensor<T: Real>(cf: &CoefficientField<T>, correctors: &[Corrector<T>]) -> Result<HomogenizedTensor<T>> {
    check_correctors(cf, correctors)?;
    Ok(assemble(cf, &FaceOperator::new(cf), correctors))
}

fn assemble<T: Real>(cf: &CoefficientField<T>, op: &FaceOperator<T>, correctors: &[Corrector<T>]) -> HomogenizedTensor<T> {
    let n = cf.grid.dim();
    let cells = T::of_usize(cf.grid.len());
    let mut tensor = SmallMatrix::zeros(n);
    for i in 0..n {
        for (j, c) in correctors.iter().enumerate() {
            let phi = &c.field.values;
            let terms: Vec<T> = (0..cf.grid.len()).map(|a| op.kappa[i][a] * op.face_gradient(phi, j, i, a)).collect();
            tensor.set(i, j, pairwise_sum(&terms) / cells);
        }
    }
    HomogenizedTensor {
        tensor,
        m: cf.grid.m(),
        side: cf.grid.side(),
        seed: cf.seed,
        d_a: cf.d_a,
        d_b: cf.d_b,
        active_fraction: cf.active_fraction(),
        residuals: correctors.iter().map(|c| c.residual).collect(),
        iterations: correctors.iter().map(|c| c.iterations).collect(),
    }
}

/// Energy form `E_ij = m^-n sum_faces kappa g^i g^j`, `g^j = grad_h phi_j + e_j`.
pub fn energy_tensor<T: Real>(cf: &CoefficientField<T>, correctors: &[Corrector<T>]) -> Result<SmallMatrix<T>> {
    check_correctors(cf, correctors)?;
    let op = FaceOperator::new(cf);
    let n = cf.grid.dim();
    let cells = T::of_usize(cf.grid.len());
    let mut e = SmallMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut terms = Vec::with_capacity(n * cf.grid.len());
            for k in 0..n {
                for a in 0..cf.grid.len() {
                    let gi = op.face_gradient(&correctors[i].field.values, i, k, a);
                    let gj = op.face_gradient(&correctors[j].field.values, j, k, a);
                    terms.push(op.kappa[k][a] * gi * gj);
                }
            }
            let s = pairwise_sum(&terms);
            e.set(i, j, s / cells);
        }
    }
    Ok(e)
}

/// Harmonic (lower) and arithmetic (upper) means of the cell diffusivities.
pub fn voigt_reuss<T: Real>(cf: &CoefficientField<T>) -> Result<(T, T)> {
    if cf.is_perforated() {
        return Err(Error::NotApplicable("bounds need a full-phase coefficient field".into()));
    }
    let n = T::of_usize(cf.values.len());
    let arith = cf.values.iter().copied().sum::<T>() / n;
    let harm = n / cf.values.iter().map(|&d| T::one() / d).sum::<T>();
    Ok((harm.min(arith), arith))
}

/// `u0(x) + eps sum_j phi_j(x / eps) d_j u0(x)` on the fine grid that tiles
/// the macro window with period cells of side `eps * L`.
///
/// Macro data are expanded to first order about each macro cell centre.
pub fn reconstruct_first_order<T: Real>(
    u0: &ScalarField<T>,
    grad_u0: &VectorField<T>,
    correctors: &[Corrector<T>],
    epsilon: T,
) -> Result<ScalarField<T>> {
    let macro_grid = u0.grid;
    let n = macro_grid.dim();
    if !grad_u0.grid.same_shape(&macro_grid) {
        return Err(Error::Contract("gradient and macro field grids differ".into()));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    let cell = correctors.first().ok_or_else(|| Error::Contract("no correctors".into()))?.field.grid;
    if correctors.len() != n || cell.dim() != n || correctors.iter().any(|c| !c.field.grid.same_shape(&cell)) {
        return Err(Error::Contract("correctors must cover every axis on one cell grid".into()));
    }
    let periods_f = macro_grid.side() / (epsilon * cell.side());
    let periods = periods_f.round();
    if periods < T::one() || (periods_f - periods).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(8.0)) * periods {
        return Err(Error::Contract(format!("macro side is {periods_f} periods, not a whole number")));
    }
    let mf = periods.to_usize().unwrap() * cell.m();
    let fine = TorusGrid::coarse(n, mf, macro_grid.side())?;
    let hm = macro_grid.spacing();
    let values = (0..fine.len())
        .map(|idx| {
            let x = fine.center(idx);
            let c = fine.coords(idx);
            let mut mc = [0usize; 3];
            for k in 0..n {
                mc[k] = ((x[k] / hm).floor().to_usize().unwrap()).min(macro_grid.m() - 1);
            }
            let midx = macro_grid.index(mc);
            let xc = macro_grid.center(midx);
            let mut cc = [0usize; 3];
            for k in 0..n {
                cc[k] = c[k] % cell.m();
            }
            let cidx = cell.index(cc);
            let mut u = u0.values[midx];
            for k in 0..n {
                let g = grad_u0.get(midx, k);
                u += g * (x[k] - xc[k]) + epsilon * correctors[k].field.values[cidx] * g;
            }
            u
        })
        .collect();
    Ok(ScalarField { grid: fine, values })
}
