//! Seeded stationary random geometries on a periodic window.

mod grain;
mod io;
mod raster;
mod voronoi;

pub use grain::{grain_indicator, Grain, GrainModel};
pub use io::{read_phase_field, read_point_csv, write_phase_field, write_point_csv};
pub use raster::{rasterize, FeatureModel, GeometryRecipe, Pattern, PhaseField, RasterModel, RasterWarning};
pub use voronoi::{delaunay, voronoi, Cell, DelaunayEdge, Facet, Neighbor, Tessellation};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The torus `[0, side)^dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window<T> {
    pub dim: usize,
    pub side: T,
}

impl<T: Real> Window<T> {
    pub fn new(dim: usize, side: T) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::param("dim", format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(side > T::zero()) || !side.is_finite() {
            return Err(Error::param("side", format!("side length must be positive, got {side}")));
        }
        Ok(Self { dim, side })
    }

    pub fn volume(&self) -> T {
        self.side.powi(self.dim as i32)
    }

    /// Maps a coordinate into `[0, side)`.
    pub fn wrap(&self, x: T) -> T {
        let mut w = x - (x / self.side).floor() * self.side;
        if w >= self.side || w < T::zero() {
            w = T::zero();
        }
        w
    }

    /// Minimal-image displacement `b - a` on the torus.
    pub fn displacement(&self, a: &[T; 3], b: &[T; 3]) -> [T; 3] {
        let mut d = [T::zero(); 3];
        let half = self.side * T::lit(0.5);
        for k in 0..self.dim {
            let mut x = b[k] - a[k];
            x = x - (x / self.side).round() * self.side;
            if x > half {
                x -= self.side;
            } else if x < -half {
                x += self.side;
            }
            d[k] = x;
        }
        d
    }

    pub fn distance_sq(&self, a: &[T; 3], b: &[T; 3]) -> T {
        let d = self.displacement(a, b);
        d.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointModel {
    Poisson,
    Matern1,
    Matern2,
    Lattice,
    Given,
}

impl PointModel {
    pub fn tag(&self) -> &'static str {
        match self {
            PointModel::Poisson => "poisson",
            PointModel::Matern1 => "matern1",
            PointModel::Matern2 => "matern2",
            PointModel::Lattice => "lattice",
            PointModel::Given => "given",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaternVariant {
    /// Every point with a neighbour closer than the hard-core distance is removed.
    I,
    /// i.i.d. marks; a point survives iff no neighbour within the distance has a smaller mark.
    II,
}

/// Points on a window. Coordinates are stored padded to 3 components.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    pub window: Window<T>,
    pub points: Vec<[T; 3]>,
    pub seed: u64,
    pub model: PointModel,
}

impl<T: Real> PointSet<T> {
    /// Wraps explicit coordinates; each must already lie in `[0, side)`.
    pub fn from_points(window: Window<T>, points: Vec<[T; 3]>) -> Result<Self> {
        for p in &points {
            for k in 0..window.dim {
                if !(p[k] >= T::zero() && p[k] < window.side) {
                    return Err(Error::param("points", format!("coordinate {} outside [0, {})", p[k], window.side)));
                }
            }
            if window.dim == 2 && p[2] != T::zero() {
                return Err(Error::param("points", "2D points must have zero third component"));
            }
        }
        Ok(Self { window, points, seed: 0, model: PointModel::Given })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_pair_distance(&self) -> Option<T> {
        let mut best: Option<T> = None;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = self.window.distance_sq(&self.points[i], &self.points[j]).sqrt();
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Poisson count: inversion of the pmf below mean 30, rand_distr's exact
/// sampler above.
fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0usize;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                // rounding left a gap in the far tail
                break;
            }
        }
        k
    } else {
        let dist = Poisson::new(mean).expect("finite positive mean");
        dist.sample(rng) as usize
    }
}

fn uniform_point<T: Real, R: Rng>(window: &Window<T>, rng: &mut R) -> [T; 3] {
    let mut p = [T::zero(); 3];
    for slot in p.iter_mut().take(window.dim) {
        let u: f64 = rng.random();
        *slot = window.wrap(T::lit(u) * window.side);
    }
    p
}

/// Stationary Poisson process with the given intensity (points per unit volume).
pub fn sample_poisson<T: Real>(window: Window<T>, intensity: T, seed: u64) -> Result<PointSet<T>> {
    if !(intensity >= T::zero()) || !intensity.is_finite() {
        return Err(Error::param("intensity", format!("must be non-negative, got {intensity}")));
    }
    let mut rng = rng_for(seed, 0);
    let mean = (intensity * window.volume()).to_f64_lossy();
    let n = poisson_count(mean, &mut rng);
    let points = (0..n).map(|_| uniform_point(&window, &mut rng)).collect();
    Ok(PointSet { window, points, seed, model: PointModel::Poisson })
}

/// Regular lattice with `per_side` points per axis at cell centres `(i + 1/2) side / per_side`.
pub fn lattice_points<T: Real>(window: Window<T>, per_side: usize) -> Result<PointSet<T>> {
    if per_side == 0 {
        return Err(Error::param("per_side", "need at least one lattice point per side"));
    }
    let spacing = window.side / T::of_usize(per_side);
    let coord = |i: usize| (T::of_usize(i) + T::lit(0.5)) * spacing;
    let mut points = Vec::new();
    let nz = if window.dim == 3 { per_side } else { 1 };
    for k in 0..nz {
        for j in 0..per_side {
            for i in 0..per_side {
                let z = if window.dim == 3 { coord(k) } else { T::zero() };
                points.push([coord(i), coord(j), z]);
            }
        }
    }
    Ok(PointSet { window, points, seed: 0, model: PointModel::Lattice })
}

/// Hard-core thinning with torus distances. Survivors are pairwise at least
/// `hardcore` apart. Marks for variant II come from `seed`.
pub fn matern_thin<T: Real>(pts: &PointSet<T>, hardcore: T, variant: MaternVariant, seed: u64) -> Result<PointSet<T>> {
    if !(hardcore >= T::zero()) || !hardcore.is_finite() {
        return Err(Error::param("hardcore", format!("must be non-negative, got {hardcore}")));
    }
    let model = match variant {
        MaternVariant::I => PointModel::Matern1,
        MaternVariant::II => PointModel::Matern2,
    };
    if hardcore == T::zero() {
        return Ok(PointSet { model, seed, ..pts.clone() });
    }
    let n = pts.points.len();
    let d2 = hardcore * hardcore;
    let mut rng = rng_for(seed, 1);
    let marks: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let mut keep = vec![true; n];
    for i in 0..n {
        for j in i + 1..n {
            if pts.window.distance_sq(&pts.points[i], &pts.points[j]) < d2 {
                match variant {
                    MaternVariant::I => {
                        keep[i] = false;
                        keep[j] = false;
                    }
                    MaternVariant::II => {
                        // ties broken by index
                        if (marks[i], i) < (marks[j], j) {
                            keep[j] = false;
                        } else {
                            keep[i] = false;
                        }
                    }
                }
            }
        }
    }
    let points = pts.points.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    Ok(PointSet { window: pts.window, points, seed, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2() -> Window<f64> {
        Window::new(2, 1.0).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        assert!(sample_poisson(unit2(), 0.0, 7).unwrap().is_empty());
        assert!(matches!(sample_poisson(unit2(), -1.0, 7), Err(Error::Parameter { name: "intensity", .. })));
    }

    #[test]
    fn poisson_is_deterministic_and_in_window() {
        let a = sample_poisson(unit2(), 50.0, 11).unwrap();
        let b = sample_poisson(unit2(), 50.0, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_poisson(unit2(), 50.0, 12).unwrap();
        assert_ne!(a.points, c.points);
        for p in &a.points {
            assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]) && p[2] == 0.0);
        }
        let w3 = Window::new(3, 2.0).unwrap();
        let d = sample_poisson(w3, 3.0, 1).unwrap();
        assert!(d.points.iter().all(|p| p.iter().all(|&x| (0.0..2.0).contains(&x))));
    }

    #[test]
    fn small_mean_inversion_matches_pmf() {
        // mean 2: P(N=0) = e^-2
        let mut zeros = 0;
        let trials = 20_000;
        for s in 0..trials {
            let mut rng = rng_for(s, 0);
            if poisson_count(2.0, &mut rng) == 0 {
                zeros += 1;
            }
        }
        let p0 = (-2.0f64).exp();
        let se = (p0 * (1.0 - p0) / trials as f64).sqrt();
        assert!(((zeros as f64 / trials as f64) - p0).abs() < 4.0 * se);
    }

    #[test]
    fn wrap_and_displacement() {
        let w = unit2();
        assert_eq!(w.wrap(1.25), 0.25);
        assert_eq!(w.wrap(-0.25), 0.75);
        let d = w.displacement(&[0.1, 0.9, 0.0], &[0.9, 0.1, 0.0]);
        assert!((d[0] + 0.2).abs() < 1e-12 && (d[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn matern_zero_distance_keeps_everything() {
        let p = sample_poisson(unit2(), 100.0, 3).unwrap();
        let q = matern_thin(&p, 0.0, MaternVariant::I, 9).unwrap();
        assert_eq!(p.points, q.points);
    }

    #[test]
    fn matern_close_pair() {
        let d = 0.1;
        let p = PointSet::from_points(unit2(), vec![[0.2, 0.2, 0.0], [0.2 + 0.5 * d, 0.2, 0.0], [0.7, 0.7, 0.0]]).unwrap();
        let one = matern_thin(&p, d, MaternVariant::I, 5).unwrap();
        assert_eq!(one.points, vec![[0.7, 0.7, 0.0]]);
        let two = matern_thin(&p, d, MaternVariant::II, 5).unwrap();
        assert_eq!(two.len(), 2);
        let mut rng = rng_for(5, 1);
        let marks: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let winner = if marks[0] < marks[1] { p.points[0] } else { p.points[1] };
        assert!(two.points.contains(&winner));
        assert!(two.points.contains(&[0.7, 0.7, 0.0]));
    }

    #[test]
    fn matern_pair_across_the_seam() {
        let p = PointSet::from_points(unit2(), vec![[0.01, 0.5, 0.0], [0.99, 0.5, 0.0]]).unwrap();
        assert!(matern_thin(&p, 0.05, MaternVariant::I, 0).unwrap().is_empty());
    }

    #[test]
    fn lattice_layout() {
        let l = lattice_points(unit2(), 4).unwrap();
        assert_eq!(l.len(), 16);
        assert_eq!(l.points[0], [0.125, 0.125, 0.0]);
        assert_eq!(l.points[5], [0.375, 0.375, 0.0]);
        assert_eq!(lattice_points(Window::new(3, 1.0).unwrap(), 2).unwrap().len(), 8);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_matern_output_is_hard_core_subset(
            seed in 0u64..10_000,
            lambda in 20.0f64..300.0,
            d in 0.0f64..0.15,
            second in any::<bool>(),
        ) {
            let w = Window::new(2, 1.0).unwrap();
            let p = sample_poisson(w, lambda, seed).unwrap();
            let variant = if second { MaternVariant::II } else { MaternVariant::I };
            let q = matern_thin(&p, d, variant, seed ^ 0xabc).unwrap();
            prop_assert!(q.points.iter().all(|x| p.points.contains(x)));
            if let Some(min) = q.min_pair_distance() {
                prop_assert!(min >= d, "min distance {} < {}", min, d);
            }
            // determinism
            prop_assert_eq!(q, matern_thin(&p, d, variant, seed ^ 0xabc).unwrap());
        }

        #[test]
        fn prop_matern_two_survivors_at_least_matern_one(seed in 0u64..5_000, d in 0.01f64..0.2) {
            let w = Window::new(2, 1.0).unwrap();
            let p = sample_poisson(w, 80.0, seed).unwrap();
            let one = matern_thin(&p, d, MaternVariant::I, seed).unwrap();
            let two = matern_thin(&p, d, MaternVariant::II, seed).unwrap();
            prop_assert!(two.len() >= one.len());
        }
    }
}
