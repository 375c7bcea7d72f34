//! Grains interpolating a generator and its boundary hit-points.

use super::{Tessellation, Window};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One grain: centre `P_c` and boundary points `P_b,i` in lifted coordinates.
#[derive(Clone, Debug)]
pub struct Grain<T> {
    pub center: [T; 3],
    pub boundary: Vec<[T; 3]>,
    /// `{d <= 1}` lies in the ball of this radius about the centre.
    pub reach: T,
}

fn dist_sq<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    (0..3).fold(T::zero(), |s, k| s + (a[k] - b[k]) * (a[k] - b[k]))
}

impl<T: Real> Grain<T> {
    pub fn new(center: [T; 3], boundary: Vec<[T; 3]>) -> Result<Self> {
        if boundary.is_empty() {
            return Err(Error::Geometry("grain needs at least one boundary point".into()));
        }
        for (i, b) in boundary.iter().enumerate() {
            if dist_sq(b, &center) == T::zero() {
                return Err(Error::Geometry(format!("boundary point {i} coincides with the centre")));
            }
            for (j, c) in boundary.iter().enumerate().skip(i + 1) {
                if dist_sq(b, c) == T::zero() {
                    return Err(Error::Geometry(format!("boundary points {i} and {j} coincide")));
                }
            }
        }
        // beyond 3R every factor of every term is at least one and the first exceeds 9
        let r = boundary.iter().map(|b| dist_sq(b, &center).sqrt()).fold(T::zero(), T::max);
        Ok(Self { center, boundary, reach: T::lit(3.0) * r })
    }
}

/// `d(P_c, x) = sum_i |x-P_c|^2/|P_bi-P_c|^2 * prod_{j!=i} |x-P_bj|^2/|P_bi-P_bj|^2`.
pub fn grain_indicator<T: Real>(grain: &Grain<T>, x: &[T; 3]) -> T {
    let c = &grain.center;
    let r0 = dist_sq(x, c);
    let mut d = T::zero();
    for (i, bi) in grain.boundary.iter().enumerate() {
        let mut term = r0 / dist_sq(bi, c);
        for (j, bj) in grain.boundary.iter().enumerate() {
            if j != i {
                term *= dist_sq(x, bj) / dist_sq(bi, bj);
            }
        }
        d += term;
    }
    d
}

/// Grains of a tessellation: one per generator, with the midpoints of its
/// Delaunay edges (where they cross the shared facets) as boundary points.
#[derive(Clone, Debug)]
pub struct GrainModel<T> {
    pub window: Window<T>,
    pub grains: Vec<Grain<T>>,
}

impl<T: Real> GrainModel<T> {
    pub fn from_tessellation(tess: &Tessellation<T>) -> Result<Self> {
        let w = tess.points.window;
        let half = T::lit(0.5);
        let grains = (0..tess.cells.len())
            .map(|c| {
                let p = tess.points.points[c];
                let boundary = tess
                    .shared_facets(c)
                    .map(|f| {
                        let q = tess.points.points[f.neighbor.index];
                        let mut b = [T::zero(); 3];
                        for k in 0..w.dim {
                            let qk = q[k] + T::from_i32(f.neighbor.offset[k]).unwrap() * w.side;
                            b[k] = (p[k] + qk) * half;
                        }
                        b
                    })
                    .collect();
                Grain::new(p, boundary)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { window: w, grains })
    }

    /// Whether `x` lies in some grain (torus distances).
    pub fn contains(&self, x: &[T; 3]) -> bool {
        self.grains.iter().any(|g| {
            let disp = self.window.displacement(&g.center, x);
            let r2 = (0..3).fold(T::zero(), |s, k| s + disp[k] * disp[k]);
            if r2 > g.reach * g.reach {
                return false;
            }
            let mut lifted = g.center;
            for k in 0..self.window.dim {
                lifted[k] += disp[k];
            }
            grain_indicator(g, &lifted) <= T::one()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lattice_points, sample_poisson, voronoi};

    fn diamond() -> Grain<f64> {
        Grain::new([0.0; 3], vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]).unwrap()
    }

    #[test]
    fn hand_evaluated_value() {
        let g = diamond();
        let x = [0.5, 0.0, 0.0];
        let t_plus = 0.25 * (2.25 / 4.0) * (1.25 / 2.0) * (1.25 / 2.0);
        let t_minus = 0.25 * (0.25 / 4.0) * (1.25 / 2.0) * (1.25 / 2.0);
        let t_y = 0.25 * (0.25 / 2.0) * (2.25 / 2.0) * (1.25 / 4.0);
        assert_eq!(t_plus, 0.054931640625);
        assert_eq!(t_minus, 0.006103515625);
        assert_eq!(t_y, 0.010986328125);
        let d = grain_indicator(&g, &x);
        assert_eq!(d, 0.0830078125);
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn interpolation_identities() {
        let g = diamond();
        assert_eq!(grain_indicator(&g, &g.center), 0.0);
        for b in &g.boundary {
            assert_eq!(grain_indicator(&g, b), 1.0);
        }
    }

    #[test]
    fn tessellation_grains_interpolate() {
        let p = sample_poisson(Window::<f64>::new(2, 1.0).unwrap(), 40.0, 3).unwrap();
        let gm = GrainModel::from_tessellation(&voronoi(&p).unwrap()).unwrap();
        for g in &gm.grains {
            assert_eq!(grain_indicator(g, &g.center), 0.0);
            for b in &g.boundary {
                assert!((grain_indicator(g, b) - 1.0).abs() < 1e-12);
            }
        }
        let lat = lattice_points(Window::<f64>::new(3, 1.0).unwrap(), 2).unwrap();
        let gm3 = GrainModel::from_tessellation(&voronoi(&lat).unwrap()).unwrap();
        assert_eq!(gm3.grains[0].boundary.len(), 6);
        assert!(gm3.contains(&lat.points[0]));
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(Grain::new([0.0; 3], vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).is_err());
        assert!(Grain::new([0.0; 3], vec![[0.0, 0.0, 0.0]]).is_err());
    }
}
