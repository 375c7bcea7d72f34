//! Macroscopic bulk/surface exchange with homogenized diffusion.
//!
//! Bulk `u` and surface `U` on a box `[0, side]^n` of `M^n` cells:
//!
//! ```text
//! c du/dt = div(D grad u) - s g(u, U) + c f,    dU/dt = g(u, U)
//! ```
//!
//! with capacity `c = theta` (or 1 with `unit_capacity`), specific surface `s` and
//! adsorption rate `g`. Diffusion is backward Euler; the surface equation is
//! integrated exactly per cell over the step with the bulk forcing frozen.

use crate::error::{Error, Result};
use crate::fields::TorusGrid;
use crate::linalg::{pcg, LinearOperator, Projector};
use crate::scalar::Real;
use crate::tensor::SmallMatrix;

const MAX_SWEEPS: usize = 5;

/// Adsorption rate `g(u, U)` (bulk to surface).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExchangeLaw<T> {
    /// `g = k (u - U)`.
    Linear { k: T },
    /// `g = k1 u (U_max - U) - k2 U`.
    Langmuir { k1: T, k2: T, umax: T },
}

impl<T: Real> ExchangeLaw<T> {
    pub fn rate(&self, u: T, big_u: T) -> T {
        match *self {
            ExchangeLaw::Linear { k } => k * (u - big_u),
            ExchangeLaw::Langmuir { k1, k2, umax } => k1 * u * (umax - big_u) - k2 * big_u,
        }
    }

    /// Surface value with `g(u, U) = 0` at bulk value `u`.
    pub fn equilibrium(&self, u: T) -> T {
        match *self {
            ExchangeLaw::Linear { .. } => u,
            ExchangeLaw::Langmuir { k1, k2, umax } => k1 * u * umax / (k2 + k1 * u),
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: T| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be non-negative, got {v}")))
            }
        };
        match *self {
            ExchangeLaw::Linear { k } => check("k", k),
            ExchangeLaw::Langmuir { k1, k2, umax } => {
                check("k1", k1)?;
                check("k2", k2)?;
                check("Umax", umax)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Zero flux through the box boundary.
    Neumann,
    /// `u = 0` on the box boundary.
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source<T> {
    Constant(T),
    /// One value per macro cell.
    Field(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReactionParams<T> {
    pub law: ExchangeLaw<T>,
    pub theta: T,
    pub s: T,
    pub source: Source<T>,
    pub dhom: SmallMatrix<T>,
    pub boundary: Boundary,
    /// Drop the porosity factor on the time derivative and source.
    pub unit_capacity: bool,
}

impl<T: Real> ReactionParams<T> {
    pub fn capacity(&self) -> T {
        if self.unit_capacity {
            T::one()
        } else {
            self.theta
        }
    }

    pub fn validate(&self, grid: &TorusGrid<T>) -> Result<()> {
        self.law.validate()?;
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return Err(Error::param("theta", format!("porosity must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.s >= T::zero()) || !self.s.is_finite() {
            return Err(Error::param("s", format!("specific surface must be non-negative, got {}", self.s)));
        }
        let d = &self.dhom;
        if d.dim != grid.dim() {
            return Err(Error::param("Dhom", format!("{}x{} tensor on a {}D grid", d.dim, d.dim, grid.dim())));
        }
        let scale = d.max_abs();
        if !(scale > T::zero()) || d.asymmetry() > T::lit(1e-8) * scale || d.eigenvalues()[0] <= T::zero() {
            return Err(Error::param("Dhom", "must be symmetric positive definite"));
        }
        if let Source::Field(v) = &self.source {
            if v.len() != grid.len() {
                return Err(Error::param("f", format!("source field has {} values, grid has {}", v.len(), grid.len())));
            }
        }
        Ok(())
    }

    fn source_at(&self, a: usize) -> T {
        match &self.source {
            Source::Constant(f) => *f,
            Source::Field(v) => v[a],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroState<T> {
    pub grid: TorusGrid<T>,
    /// Bulk concentration per cell.
    pub u: Vec<T>,
    /// Surface concentration per unit interface, per cell.
    pub surface: Vec<T>,
    pub t: T,
}

impl<T: Real> MacroState<T> {
    pub fn new(grid: TorusGrid<T>, u: Vec<T>, surface: Vec<T>) -> Result<Self> {
        if u.len() != grid.len() || surface.len() != grid.len() {
            return Err(Error::param("state", "field sizes differ from the grid"));
        }
        Ok(Self { grid, u, surface, t: T::zero() })
    }

    pub fn uniform(grid: TorusGrid<T>, u: T, surface: T) -> Self {
        Self { grid, u: vec![u; grid.len()], surface: vec![surface; grid.len()], t: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.surface).all(|v| v.is_finite())
    }

    pub fn record(&self, params: &ReactionParams<T>) -> MassRecord<T> {
        let vol = self.grid.cell_volume();
        let mass_u = self.u.iter().copied().sum::<T>() * vol;
        let mass_surface = self.surface.iter().copied().sum::<T>() * vol;
        MassRecord {
            t: self.t,
            mass_u,
            mass_surface,
            total: params.capacity() * mass_u + params.s * mass_surface,
            min_u: self.u.iter().copied().fold(T::infinity(), T::min),
            max_u: self.u.iter().copied().fold(T::neg_infinity(), T::max),
        }
    }
}

/// Cell-volume weighted masses; `total = c mass_u + s mass_surface`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassRecord<T> {
    pub t: T,
    pub mass_u: T,
    pub mass_surface: T,
    pub total: T,
    pub min_u: T,
    pub max_u: T,
}

/// `-div(D grad u)` per unit volume on the box.
///
/// Diagonal entries of `D` act through faces; off-diagonal entries through
/// gradients at interior grid vertices (averages of the adjacent face
/// differences). Splitting each face term evenly over its vertices bounds
/// every vertex contribution below by `g^T D g`, so the operator is positive
/// semidefinite whenever `D` is. Dirichlet faces use the ghost value `-u`.
pub(crate) struct MacroOperator<T> {
    grid: TorusGrid<T>,
    d: SmallMatrix<T>,
    boundary: Boundary,
}

impl<T: Real> MacroOperator<T> {
    pub(crate) fn new(grid: TorusGrid<T>, d: SmallMatrix<T>, boundary: Boundary) -> Self {
        Self { grid, d, boundary }
    }

    fn face_diagonal(&self) -> Vec<T> {
        let g = &self.grid;
        let h2 = g.spacing() * g.spacing();
        let m = g.m();
        (0..g.len())
            .map(|a| {
                let c = g.coords(a);
                let mut s = T::zero();
                for k in 0..g.dim() {
                    for at_edge in [c[k] == 0, c[k] + 1 == m] {
                        s += match (at_edge, self.boundary) {
                            (false, _) => self.d.get(k, k),
                            (true, Boundary::Neumann) => T::zero(),
                            (true, Boundary::Dirichlet) => T::lit(2.0) * self.d.get(k, k),
                        };
                    }
                }
                s / h2
            })
            .collect()
    }

    fn has_cross_terms(&self) -> bool {
        (0..self.d.dim).any(|k| (0..self.d.dim).any(|l| k != l && self.d.get(k, l) != T::zero()))
    }
}

impl<T: Real> LinearOperator<T> for MacroOperator<T> {
    fn apply(&self, x: &[T], y: &mut [T]) {
        let g = &self.grid;
        let n = g.dim();
        let m = g.m();
        let h = g.spacing();
        let h2 = h * h;
        y.iter_mut().for_each(|v| *v = T::zero());
        for a in 0..g.len() {
            let c = g.coords(a);
            for k in 0..n {
                let dkk = self.d.get(k, k) / h2;
                if c[k] + 1 < m {
                    let b = a + g.stride(k);
                    let flux = dkk * (x[a] - x[b]);
                    y[a] += flux;
                    y[b] -= flux;
                } else if self.boundary == Boundary::Dirichlet {
                    y[a] += T::lit(2.0) * dkk * x[a];
                }
                if c[k] == 0 && self.boundary == Boundary::Dirichlet {
                    y[a] += T::lit(2.0) * dkk * x[a];
                }
            }
        }
        if !self.has_cross_terms() {
            return;
        }
        // interior vertices: upper corner of every cell not on an upper face
        let corners = 1usize << n;
        let weight = T::one() / (T::of_usize(corners / 2) * h);
        let mut cells = [0usize; 8];
        let mut sign = [[T::zero(); 3]; 8];
        for a in 0..g.len() {
            let c = g.coords(a);
            if (0..n).any(|k| c[k] + 1 == m) {
                continue;
            }
            for sigma in 0..corners {
                let mut idx = a;
                for k in 0..n {
                    let bit = (sigma >> k) & 1;
                    idx += bit * g.stride(k);
                    sign[sigma][k] = if bit == 1 { T::one() } else { -T::one() };
                }
                cells[sigma] = idx;
            }
            let mut grad = [T::zero(); 3];
            for k in 0..n {
                let mut s = T::zero();
                for sigma in 0..corners {
                    s += sign[sigma][k] * x[cells[sigma]];
                }
                grad[k] = s * weight;
            }
            for sigma in 0..corners {
                let mut contrib = T::zero();
                for k in 0..n {
                    for l in 0..n {
                        if k != l {
                            contrib += self.d.get(k, l) * grad[l] * sign[sigma][k];
                        }
                    }
                }
                y[cells[sigma]] += contrib * weight;
            }
        }
    }
}

/// Linear family: with the diffusion/source rate `r` frozen, the exact
/// surface increment is `alpha r + gamma` per cell.
fn linear_coefficients<T: Real>(k: T, s_over_c: T, dt: T) -> (T, T) {
    // w = u - U obeys w' = r - k beta w and dU = k int w
    let beta = s_over_c + T::one();
    let kb = k * beta;
    if kb == T::zero() {
        return (T::zero(), T::zero());
    }
    let x = kb * dt;
    let decay = if x > T::lit(1e-8) { -(-x).exp_m1() / kb } else { dt * (T::one() - x * T::lit(0.5)) };
    ((dt - decay) / beta, k * decay)
}

/// Langmuir increment with the bulk value frozen at `ubar`, and its
/// derivative in `ubar`.
fn langmuir_increment<T: Real>(k1: T, k2: T, umax: T, big_u0: T, ubar: T, dt: T) -> (T, T) {
    // U' = a - b U
    let a = k1 * ubar * umax;
    let b = k1 * ubar + k2;
    if b.abs() < T::lit(1e-300).max(T::min_positive_value()) {
        return (a * dt, k1 * umax * dt);
    }
    let e = -(-b * dt).exp_m1();
    let target = a / b;
    let dtarget = k1 * umax * k2 / (b * b);
    let de = k1 * dt * (-b * dt).exp();
    ((target - big_u0) * e, dtarget * e + (target - big_u0) * de)
}

/// One implicit-diffusion step with exact per-cell surface integration.
///
/// The linear family is solved in one shot. Langmuir exchange iterates a
/// per-cell linearization (at most 5 sweeps) and fails with
/// [`Error::Step`] if the iterates have not settled.
pub fn step<T: Real>(state: &MacroState<T>, params: &ReactionParams<T>, dt: T) -> Result<MacroState<T>> {
    let grid = state.grid;
    params.validate(&grid)?;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::param("dt", format!("time step must be positive, got {dt}")));
    }
    let c = params.capacity();
    let s = params.s;
    let n = grid.len();
    let op = MacroOperator::new(grid, params.dhom, params.boundary);
    let face_diag = op.face_diagonal();
    let proj = Projector::new(vec![0; n], false);
    let double = T::epsilon() < T::lit(1e-12);
    let solve_tol = if double { T::lit(1e-14) } else { T::lit(1e-6) };
    let fp_tol = if double { T::lit(1e-10) } else { T::lit(1e-5) };

    let solve = |lhs: &Shifted<'_, T>, rhs: &[T], x0: &[T]| -> Result<Vec<T>> {
        let inv_diag: Vec<T> = (0..n).map(|a| T::one() / (lhs.diag[a] + lhs.dt * face_diag[a])).collect();
        let mut x = x0.to_vec();
        let rep = pcg(lhs, &inv_diag, &proj, rhs, &mut x, solve_tol, 20 * n + 100);
        if !rep.converged && rep.residual > solve_tol * T::lit(1e3) {
            return Err(Error::Solver { iterations: rep.iterations, residual: rep.residual.to_f64_lossy() });
        }
        if params.boundary == Boundary::Neumann {
            // flux terms sum to zero; put back what the solver lost
            let want: T = rhs.iter().copied().sum();
            let have: T = x.iter().zip(&lhs.diag).map(|(&v, &d)| v * d).sum();
            let weight: T = lhs.diag.iter().copied().sum();
            let shift = (want - have) / weight;
            x.iter_mut().for_each(|v| *v += shift);
        }
        Ok(x)
    };

    let (u, du) = match params.law {
        ExchangeLaw::Linear { k } => {
            let (alpha, gamma) = linear_coefficients(k, s / c, dt);
            // dU = alpha (c f - A u) / c + gamma (u^n - U^n)
            let lhs = Shifted { op: &op, diag: vec![c; n], dt: dt - s * alpha / c };
            let rhs: Vec<T> = (0..n)
                .map(|a| {
                    let f = params.source_at(a);
                    c * state.u[a] + c * f * dt - s * (alpha * f + gamma * (state.u[a] - state.surface[a]))
                })
                .collect();
            let u = solve(&lhs, &rhs, &state.u)?;
            let mut au = vec![T::zero(); n];
            op.apply(&u, &mut au);
            // recover dU from the bulk balance so the ledger closes exactly
            let du = (0..n)
                .map(|a| {
                    let f = params.source_at(a);
                    if s == T::zero() {
                        return alpha * (c * f - au[a]) / c + gamma * (state.u[a] - state.surface[a]);
                    }
                    (c * state.u[a] + c * f * dt - c * u[a] - dt * au[a]) / s
                })
                .collect();
            (u, du)
        }
        ExchangeLaw::Langmuir { k1, k2, umax } => {
            let mut u_it = state.u.clone();
            let mut change = T::infinity();
            let mut out = None;
            for _ in 0..MAX_SWEEPS {
                let mut diag = vec![c; n];
                let mut rhs = vec![T::zero(); n];
                let mut lin = vec![(T::zero(), T::zero()); n];
                for a in 0..n {
                    let (g, dg) = langmuir_increment(k1, k2, umax, state.surface[a], u_it[a], dt);
                    let dg = if s > T::zero() { dg.max(-c / (T::lit(2.0) * s)) } else { dg };
                    lin[a] = (g, dg);
                    diag[a] = c + s * dg;
                    rhs[a] = c * state.u[a] + c * params.source_at(a) * dt - s * (g - dg * u_it[a]);
                }
                let lhs = Shifted { op: &op, diag, dt };
                let next = solve(&lhs, &rhs, &u_it)?;
                let scale = next.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
                change = next.iter().zip(&u_it).fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs())) / scale;
                // the increment actually used by this solve
                let du: Vec<T> = (0..n).map(|a| lin[a].0 + lin[a].1 * (next[a] - u_it[a])).collect();
                u_it = next;
                if change <= fp_tol {
                    out = Some(du);
                    break;
                }
            }
            match out {
                Some(du) => (u_it, du),
                None => return Err(Error::Step { sweeps: MAX_SWEEPS, change: change.to_f64_lossy() }),
            }
        }
    };
    let surface = state.surface.iter().zip(&du).map(|(&s0, &d)| s0 + d).collect();
    Ok(MacroState { grid, u, surface, t: state.t + dt })
}

/// `diag u + dt A u`.
struct Shifted<'a, T> {
    op: &'a MacroOperator<T>,
    diag: Vec<T>,
    dt: T,
}

impl<T: Real> LinearOperator<T> for Shifted<'_, T> {
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.op.apply(x, y);
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = d * xi + self.dt * *yi;
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    /// Initial state, every `stride`-th step and the final state.
    pub snapshots: Vec<MacroState<T>>,
    /// One record per snapshot.
    pub ledger: Vec<MassRecord<T>>,
}

pub fn run<T: Real>(initial: &MacroState<T>, params: &ReactionParams<T>, dt: T, t_end: T, stride: usize) -> Result<RunOutput<T>> {
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return Err(Error::param("T", format!("end time must be positive, got {t_end}")));
    }
    if !(dt > T::zero()) {
        return Err(Error::param("dt", format!("time step must be positive, got {dt}")));
    }
    let stride = stride.max(1);
    let ratio = t_end / dt;
    let rounded = ratio.round();
    let steps = if (ratio - rounded).abs() <= T::lit(1e-9) * ratio.max(T::one()) { rounded } else { ratio.ceil() };
    let steps = steps.to_usize().unwrap_or(0).max(1);
    let mut state = initial.clone();
    let mut out = RunOutput { snapshots: vec![state.clone()], ledger: vec![state.record(params)] };
    for n in 1..=steps {
        let h = if n == steps { t_end - state.t } else { dt };
        let t_next = if n == steps { t_end } else { initial.t + T::of_usize(n) * dt };
        if h <= T::zero() {
            break;
        }
        state = step(&state, params, h)?;
        state.t = t_next;
        if !state.is_finite() {
            return Err(Error::Step { sweeps: 0, change: f64::NAN });
        }
        if n % stride == 0 || n == steps {
            out.ledger.push(state.record(params));
            out.snapshots.push(state.clone());
        }
    }
    Ok(out)
}

/// Closed-form uniform trajectory of the linear family without source:
/// `c u' = -s k (u - U)`, `U' = k (u - U)`.
pub fn linear_uniform_solution<T: Real>(k: T, c: T, s: T, u0: T, big_u0: T, t: T) -> (T, T) {
    let total = c * u0 + s * big_u0;
    let w = (u0 - big_u0) * (-k * (s / c + T::one()) * t).exp();
    ((total + s * w) / (c + s), (total - c * w) / (c + s))
}
