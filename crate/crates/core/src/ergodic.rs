//! Window averages over seeds and window sizes.
//!
//! The feature scale is fixed while the window side `L` grows, so `1/L`
//! plays the role of the scale parameter. Every `(L, seed)` pair runs
//! independently; results are reduced in `(L, seed)` order, so tables do
//! not depend on the thread count.

use rayon::prelude::*;

use crate::cellproblem::{homogenize, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{coefficient_field, specific_surface, volume_fraction};
use crate::geometry::{GeometryRecipe, PhaseField};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    VolumeFraction,
    SpecificSurface,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::VolumeFraction => "volume_fraction",
            Observable::SpecificSurface => "specific_surface",
        }
    }

    fn measure<T: Real>(self, pf: &PhaseField<T>) -> T {
        match self {
            Observable::VolumeFraction => volume_fraction(pf),
            Observable::SpecificSurface => specific_surface(pf),
        }
    }

    fn reference<T: Real>(self, recipe: &GeometryRecipe<T>) -> Option<T> {
        match self {
            Observable::VolumeFraction => recipe.reference_volume_fraction(),
            Observable::SpecificSurface => recipe.reference_specific_surface(),
        }
    }
}

/// Window sides, cells per unit length and seeds for a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep<T> {
    pub sides: Vec<T>,
    pub resolution: usize,
    pub seeds: Vec<u64>,
}

impl<T: Real> Sweep<T> {
    pub fn new(sides: Vec<T>, resolution: usize, seeds: Vec<u64>) -> Self {
        Self { sides, resolution, seeds }
    }

    /// Seeds `0..count`.
    pub fn with_seed_count(sides: Vec<T>, resolution: usize, count: usize) -> Self {
        Self::new(sides, resolution, (0..count as u64).collect())
    }

    pub fn cells(&self, side: T) -> Result<usize> {
        let m = (side * T::of_usize(self.resolution)).round().to_usize().unwrap_or(0);
        if m == 0 || (T::of_usize(m) - side * T::of_usize(self.resolution)).abs() > T::lit(1e-6) * T::of_usize(m) {
            return Err(Error::param("L", format!("side {side} is not a whole number of cells at resolution {}", self.resolution)));
        }
        Ok(m)
    }

    fn validate(&self, min_sides: usize, min_seeds: usize) -> Result<()> {
        if self.sides.len() < min_sides {
            return Err(Error::param("L", format!("need at least {min_sides} window sizes, got {}", self.sides.len())));
        }
        if self.seeds.len() < min_seeds {
            return Err(Error::param("seeds", format!("need at least {min_seeds} seeds, got {}", self.seeds.len())));
        }
        if self.sides.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::param("L", "window sides must be positive"));
        }
        for &s in &self.sides {
            self.cells(s)?;
        }
        Ok(())
    }

    fn jobs(&self) -> Vec<(usize, u64)> {
        (0..self.sides.len()).flat_map(|i| self.seeds.iter().map(move |&s| (i, s))).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow<T> {
    pub observable: String,
    pub side: T,
    pub m: usize,
    /// Samples that entered the statistics.
    pub seeds: usize,
    pub mean: T,
    /// Unbiased sample variance; NaN with fewer than two samples.
    pub variance: T,
    pub reference: Option<T>,
    pub min: T,
    pub max: T,
    /// Samples whose solve failed.
    pub failures: usize,
}

impl<T: Real> ConvergenceRow<T> {
    fn from_samples(observable: String, side: T, m: usize, samples: &[T], reference: Option<T>, failures: usize) -> Self {
        let (mean, variance) = mean_variance(samples);
        Self {
            observable,
            side,
            m,
            seeds: samples.len(),
            mean,
            variance,
            reference,
            min: samples.iter().copied().fold(T::nan(), T::min),
            max: samples.iter().copied().fold(T::nan(), T::max),
            failures,
        }
    }

    pub fn spread(&self) -> T {
        self.max - self.min
    }

    pub fn standard_error(&self) -> T {
        (self.variance / T::of_usize(self.seeds)).sqrt()
    }

    /// `ok`, or `failed=k` when some samples could not be computed.
    pub fn flag(&self) -> String {
        if self.failures == 0 {
            "ok".into()
        } else {
            format!("failed={}", self.failures)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
}

impl<T: Real> ConvergenceTable<T> {
    pub fn row(&self, observable: &str, side: T) -> Option<&ConvergenceRow<T>> {
        self.rows.iter().find(|r| r.observable == observable && r.side == side)
    }

    /// Rows of one observable in increasing window size.
    pub fn series(&self, observable: &str) -> Vec<&ConvergenceRow<T>> {
        let mut v: Vec<_> = self.rows.iter().filter(|r| r.observable == observable).collect();
        v.sort_by(|a, b| a.side.partial_cmp(&b.side).unwrap_or(std::cmp::Ordering::Equal));
        v
    }

    /// `Var(large) / Var(small)`.
    pub fn variance_ratio(&self, observable: &str, small: T, large: T) -> Option<T> {
        Some(self.row(observable, large)?.variance / self.row(observable, small)?.variance)
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}

fn mean_variance<T: Real>(xs: &[T]) -> (T, T) {
    if xs.is_empty() {
        return (T::nan(), T::nan());
    }
    // Welford: identical samples give exactly zero variance
    let (mut mean, mut m2) = (T::zero(), T::zero());
    for (k, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / T::of_usize(k + 1);
        m2 += d * (x - mean);
    }
    if xs.len() < 2 {
        return (mean, T::nan());
    }
    (mean, m2 / T::of_usize(xs.len() - 1))
}

/// Mean and variance over seeds of geometric observables for each side.
///
/// Needs at least 2 sides and 8 seeds.
pub fn empirical_average<T: Real>(
    recipe: &GeometryRecipe<T>,
    observables: &[Observable],
    sweep: &Sweep<T>,
) -> Result<ConvergenceTable<T>> {
    sweep.validate(2, 8)?;
    if observables.is_empty() {
        return Err(Error::param("observables", "nothing to measure"));
    }
    let values = sweep
        .jobs()
        .par_iter()
        .map(|&(i, seed)| {
            let side = sweep.sides[i];
            let pf = recipe.realize(side, sweep.cells(side)?, seed)?;
            Ok(observables.iter().map(|o| o.measure(&pf)).collect::<Vec<T>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_side = sweep.seeds.len();
    let mut table = ConvergenceTable::default();
    for (i, &side) in sweep.sides.iter().enumerate() {
        let block = &values[i * per_side..(i + 1) * per_side];
        for (k, o) in observables.iter().enumerate() {
            let samples: Vec<T> = block.iter().map(|v| v[k]).collect();
            table.rows.push(ConvergenceRow::from_samples(
                o.name().into(),
                side,
                sweep.cells(side)?,
                &samples,
                o.reference(recipe),
                0,
            ));
        }
    }
    Ok(table)
}

/// Name of the `D_ij` row in tensor tables.
pub fn tensor_entry_name(i: usize, j: usize) -> String {
    format!("D{}{}", i + 1, j + 1)
}

/// Mean and variance over seeds of the upper-triangle entries of `D^hom`.
///
/// Failed realizations (no percolation, solver breakdown) are counted in
/// the row's `failures` and left out of the statistics.
pub fn tensor_convergence<T: Real>(
    recipe: &GeometryRecipe<T>,
    d_a: T,
    d_b: T,
    sweep: &Sweep<T>,
    cfg: &SolverConfig<T>,
) -> Result<ConvergenceTable<T>> {
    sweep.validate(1, 1)?;
    let n = recipe.dim;
    let mut results: Vec<Result<Vec<T>>> = sweep
        .jobs()
        .par_iter()
        .map(|&(i, seed)| {
            let side = sweep.sides[i];
            let pf = recipe.realize(side, sweep.cells(side)?, seed)?;
            let cf = coefficient_field(&pf, d_a, d_b)?;
            let (h, _) = homogenize(&cf, cfg)?;
            Ok((0..n).flat_map(|r| (r..n).map(move |c| (r, c))).map(|(r, c)| h.tensor.get(r, c)).collect())
        })
        .collect();
    // parameter problems are the caller's, not the realization's
    if let Some(pos) = results.iter().position(|r| matches!(r, Err(Error::Parameter { .. }))) {
        return results.swap_remove(pos).map(|_| ConvergenceTable::default());
    }
    let per_side = sweep.seeds.len();
    let mut table = ConvergenceTable::default();
    for (i, &side) in sweep.sides.iter().enumerate() {
        let block = &results[i * per_side..(i + 1) * per_side];
        let ok: Vec<&Vec<T>> = block.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failures = block.len() - ok.len();
        let mut k = 0;
        for r in 0..n {
            for c in r..n {
                let samples: Vec<T> = ok.iter().map(|v| v[k]).collect();
                table.rows.push(ConvergenceRow::from_samples(tensor_entry_name(r, c), side, sweep.cells(side)?, &samples, None, failures));
                k += 1;
            }
        }
    }
    Ok(table)
}

/// Volume fractions of disjoint sub-windows of a single realization.
///
/// One realization of side `side` is cut into tiles of each sub-side; rows
/// report the spread across tiles.
pub fn window_spread<T: Real>(recipe: &GeometryRecipe<T>, side: T, sub_sides: &[T], resolution: usize, seed: u64) -> Result<ConvergenceTable<T>> {
    let sweep = Sweep::new(vec![side], resolution, vec![seed]);
    let m = sweep.cells(side)?;
    let pf = recipe.realize(side, m, seed)?;
    let mut table = ConvergenceTable::default();
    for &sub in sub_sides {
        let ms = sweep.cells(sub)?;
        if ms > m || m % ms != 0 {
            return Err(Error::param("L", format!("sub-window side {sub} does not tile side {side}")));
        }
        let tiles = m / ms;
        let count = tiles.pow(recipe.dim as u32);
        let samples = (0..count)
            .into_par_iter()
            .map(|t| {
                let mut origin = [0usize; 3];
                let mut rest = t;
                for o in origin.iter_mut().take(recipe.dim) {
                    *o = (rest % tiles) * ms;
                    rest /= tiles;
                }
                Ok(volume_fraction(&pf.subwindow(origin, ms)?))
            })
            .collect::<Result<Vec<T>>>()?;
        table.rows.push(ConvergenceRow::from_samples(
            Observable::VolumeFraction.name().into(),
            sub,
            ms,
            &samples,
            recipe.reference_volume_fraction(),
            0,
        ));
    }
    Ok(table)
}
