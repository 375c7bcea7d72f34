//! Periodic Voronoi tessellation by half-space clipping, and its Delaunay dual.
//!
//! Each cell starts as the box `p + [-L/2, L/2]^n` (the cell against the
//! generator's own nearest periodic images) and is clipped by the bisectors of
//! ghost images of all other generators, nearest first, until the remaining
//! images are farther than twice the cell's circumradius. Ghost images come
//! from `(2K+1)^n` shells; `K` starts at 1 and is raised when the security
//! radius is not covered (only happens for very few, very large cells).

use std::collections::BTreeSet;

use super::PointSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A generator's periodic image: position `points[index] + offset * side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub index: usize,
    pub offset: [i32; 3],
}

#[derive(Clone, Debug)]
pub struct Facet<T> {
    pub neighbor: Neighbor,
    /// Lifted vertex coordinates; in 2D the segment `[start, end]`.
    pub vertices: Vec<[T; 3]>,
    /// Length (2D) or area (3D).
    pub measure: T,
}

#[derive(Clone, Debug)]
pub struct Cell<T> {
    pub generator: usize,
    /// In 2D the facets are ordered counter-clockwise around the generator.
    pub facets: Vec<Facet<T>>,
    pub volume: T,
}

#[derive(Clone, Debug)]
pub struct Tessellation<T> {
    pub points: PointSet<T>,
    pub cells: Vec<Cell<T>>,
}

/// Delaunay edge from generator `a` to the image `b + offset * side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DelaunayEdge {
    pub a: usize,
    pub b: usize,
    pub offset: [i32; 3],
}

impl DelaunayEdge {
    /// Stores each undirected edge once: `a <= b`, and for self-edges the
    /// lexicographically positive offset.
    pub fn canonical(a: usize, b: usize, offset: [i32; 3]) -> Self {
        let neg = [-offset[0], -offset[1], -offset[2]];
        if a < b || (a == b && offset > neg) {
            Self { a, b, offset }
        } else {
            Self { a: b, b: a, offset: neg }
        }
    }

    pub fn connects(&self, i: usize, j: usize) -> bool {
        (self.a == i && self.b == j) || (self.a == j && self.b == i)
    }
}

impl<T: Real> Tessellation<T> {
    fn facet_threshold(&self) -> T {
        let side = self.points.window.side;
        T::geom_tol(side) * side.powi(self.points.window.dim as i32 - 2)
    }

    /// Facets of positive measure; zero-measure contacts of degenerate
    /// (cocircular) configurations are not adjacencies.
    pub fn shared_facets(&self, cell: usize) -> impl Iterator<Item = &Facet<T>> {
        let thr = self.facet_threshold();
        self.cells[cell].facets.iter().filter(move |f| f.measure > thr)
    }

    /// Unordered generator pairs sharing a facet, stored in both orders.
    pub fn adjacency(&self) -> BTreeSet<(usize, usize)> {
        let mut set = BTreeSet::new();
        for c in 0..self.cells.len() {
            for f in self.shared_facets(c) {
                set.insert((c, f.neighbor.index));
            }
        }
        set
    }

    pub fn total_volume(&self) -> T {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Generator nearest to `x` in torus distance (lowest index on ties).
    pub fn nearest_generator(&self, x: &[T; 3]) -> usize {
        nearest(&self.points, x)
    }
}

pub(crate) fn nearest<T: Real>(pts: &PointSet<T>, x: &[T; 3]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, p) in pts.points.iter().enumerate() {
        let d = pts.window.distance_sq(p, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn voronoi<T: Real>(pts: &PointSet<T>) -> Result<Tessellation<T>> {
    if pts.is_empty() {
        return Err(Error::Geometry("tessellation needs at least one generator".into()));
    }
    let window = pts.window;
    let tol = T::geom_tol(window.side);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if window.distance_sq(&pts.points[i], &pts.points[j]) <= tol * tol {
                return Err(Error::Geometry(format!("generators {i} and {j} coincide")));
            }
        }
    }
    let cells = (0..pts.len()).map(|i| build_cell(pts, i)).collect::<Result<Vec<_>>>()?;
    Ok(Tessellation { points: pts.clone(), cells })
}

/// Edges of the Delaunay graph: exactly the tessellation's facet adjacency,
/// each undirected edge once with the offset realizing the shared facet.
pub fn delaunay<T: Real>(tess: &Tessellation<T>) -> Vec<DelaunayEdge> {
    let mut edges = BTreeSet::new();
    for c in 0..tess.cells.len() {
        for f in tess.shared_facets(c) {
            edges.insert(DelaunayEdge::canonical(c, f.neighbor.index, f.neighbor.offset));
        }
    }
    edges.into_iter().collect()
}

struct Candidate<T> {
    neighbor: Neighbor,
    q: [T; 3],
    dist: T,
}

fn candidates<T: Real>(pts: &PointSet<T>, i: usize, shell: i32) -> Vec<Candidate<T>> {
    let w = pts.window;
    let p = pts.points[i];
    let zr = if w.dim == 3 { shell } else { 0 };
    let mut out = Vec::new();
    for (j, pj) in pts.points.iter().enumerate() {
        for oz in -zr..=zr {
            for oy in -shell..=shell {
                for ox in -shell..=shell {
                    let offset = [ox, oy, oz];
                    if j == i && offset == [0, 0, 0] {
                        continue;
                    }
                    let mut q = [T::zero(); 3];
                    for k in 0..w.dim {
                        q[k] = pj[k] + T::from_i32(offset[k]).unwrap() * w.side - p[k];
                    }
                    let dist = q.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
                    out.push(Candidate { neighbor: Neighbor { index: j, offset }, q, dist });
                }
            }
        }
    }
    out.sort_by(|a, b| a.dist.partial_cmp(&b.dist).unwrap().then(a.neighbor.cmp(&b.neighbor)));
    out
}

fn build_cell<T: Real>(pts: &PointSet<T>, i: usize) -> Result<Cell<T>> {
    let w = pts.window;
    let tol = T::geom_tol(w.side);
    let two = T::lit(2.0);
    for shell in 1..=3 {
        let shell_t = T::from_i32(shell).unwrap();
        let mut poly = if w.dim == 2 { Poly::square(i, w.side) } else { Poly::cube(i, w.side) };
        let mut rmax = poly.radius();
        for cand in candidates(pts, i, shell) {
            if cand.dist > two * rmax + tol {
                break;
            }
            if poly.clip(&cand.q, cand.neighbor, tol) {
                rmax = poly.radius();
            }
        }
        if two * rmax <= shell_t * w.side + tol {
            return Ok(poly.into_cell(i, &pts.points[i], w.dim));
        }
    }
    Err(Error::Geometry(format!("cell {i} not resolved by ghost shells")))
}

/// Convex cell in coordinates relative to its generator.
enum Poly<T> {
    /// Vertex loop; edge k runs from vertex k to vertex k+1 and has tag k.
    Two { verts: Vec<[T; 2]>, tags: Vec<(Neighbor, T)> },
    /// Faces as vertex loops with tag and distance of the supporting plane.
    Three { faces: Vec<(Neighbor, T, Vec<[T; 3]>)> },
}

fn own(i: usize, axis: usize, sign: i32) -> Neighbor {
    let mut offset = [0; 3];
    offset[axis] = sign;
    Neighbor { index: i, offset }
}

impl<T: Real> Poly<T> {
    fn square(i: usize, side: T) -> Self {
        let h = side * T::lit(0.5);
        let verts = vec![[-h, -h], [h, -h], [h, h], [-h, h]];
        // edges: bottom (-y), right (+x), top (+y), left (-x)
        let tags = vec![(own(i, 1, -1), h), (own(i, 0, 1), h), (own(i, 1, 1), h), (own(i, 0, -1), h)];
        Poly::Two { verts, tags }
    }

    fn cube(i: usize, side: T) -> Self {
        let h = side * T::lit(0.5);
        let v = |x: T, y: T, z: T| [x, y, z];
        let n = -h;
        let faces = vec![
            (own(i, 0, -1), h, vec![v(n, n, n), v(n, h, n), v(n, h, h), v(n, n, h)]),
            (own(i, 0, 1), h, vec![v(h, n, n), v(h, h, n), v(h, h, h), v(h, n, h)]),
            (own(i, 1, -1), h, vec![v(n, n, n), v(h, n, n), v(h, n, h), v(n, n, h)]),
            (own(i, 1, 1), h, vec![v(n, h, n), v(h, h, n), v(h, h, h), v(n, h, h)]),
            (own(i, 2, -1), h, vec![v(n, n, n), v(h, n, n), v(h, h, n), v(n, h, n)]),
            (own(i, 2, 1), h, vec![v(n, n, h), v(h, n, h), v(h, h, h), v(n, h, h)]),
        ];
        Poly::Three { faces }
    }

    fn radius(&self) -> T {
        match self {
            Poly::Two { verts, .. } => verts.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).fold(T::zero(), T::max),
            Poly::Three { faces } => faces
                .iter()
                .flat_map(|f| f.2.iter())
                .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
                .fold(T::zero(), T::max),
        }
    }

    /// Intersects with `{x : x.q <= |q|^2 / 2}`; returns whether anything was cut.
    fn clip(&mut self, q: &[T; 3], tag: Neighbor, tol: T) -> bool {
        let qn2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
        let qn = qn2.sqrt();
        let half = qn * T::lit(0.5);
        // signed distance to the bisector
        let sd = |x: &[T]| {
            let mut s = T::zero();
            for (k, &xk) in x.iter().enumerate() {
                s += xk * q[k];
            }
            s / qn - half
        };
        match self {
            Poly::Two { verts, tags } => {
                let d: Vec<T> = verts.iter().map(|v| sd(v)).collect();
                if d.iter().all(|&x| x <= tol) {
                    return false;
                }
                let n = verts.len();
                let mut nv: Vec<[T; 2]> = Vec::with_capacity(n + 1);
                let mut nt = Vec::with_capacity(n + 1);
                for k in 0..n {
                    let (a, b) = (verts[k], verts[(k + 1) % n]);
                    let (da, db) = (d[k], d[(k + 1) % n]);
                    let ain = da <= tol;
                    let bin = db <= tol;
                    let cross = || {
                        let t = da / (da - db);
                        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
                    };
                    match (ain, bin) {
                        (true, true) => {
                            nv.push(a);
                            nt.push(tags[k]);
                        }
                        (true, false) => {
                            nv.push(a);
                            nt.push(tags[k]);
                            if da < -tol {
                                nv.push(cross());
                                nt.push((tag, half));
                            } else {
                                // `a` lies on the bisector: the new edge starts there
                                *nt.last_mut().unwrap() = (tag, half);
                            }
                        }
                        (false, true) => {
                            if db < -tol {
                                nv.push(cross());
                                nt.push(tags[k]);
                            }
                        }
                        (false, false) => {}
                    }
                }
                // drop zero-length edges
                let mut k = 0;
                while nv.len() > 2 && k < nv.len() {
                    let next = (k + 1) % nv.len();
                    let (a, b) = (nv[k], nv[next]);
                    if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= tol {
                        nv.remove(k);
                        nt.remove(k);
                    } else {
                        k += 1;
                    }
                }
                *verts = nv;
                *tags = nt;
                true
            }
            Poly::Three { faces } => {
                let any_out = faces.iter().any(|f| f.2.iter().any(|v| sd(v) > tol));
                if !any_out {
                    return false;
                }
                let mut cap: Vec<[T; 3]> = Vec::new();
                let mut kept = Vec::with_capacity(faces.len() + 1);
                for (ftag, fdist, loop_) in faces.drain(..) {
                    let d: Vec<T> = loop_.iter().map(|v| sd(v)).collect();
                    let n = loop_.len();
                    let mut out: Vec<[T; 3]> = Vec::with_capacity(n + 1);
                    for k in 0..n {
                        let (a, b) = (loop_[k], loop_[(k + 1) % n]);
                        let (da, db) = (d[k], d[(k + 1) % n]);
                        if da <= tol {
                            out.push(a);
                            if da >= -tol {
                                cap.push(a);
                            }
                        }
                        if (da < -tol && db > tol) || (da > tol && db < -tol) {
                            let t = da / (da - db);
                            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
                            out.push(x);
                            cap.push(x);
                        }
                    }
                    dedup_loop(&mut out, tol);
                    if out.len() >= 3 {
                        kept.push((ftag, fdist, out));
                    }
                }
                let mut uniq: Vec<[T; 3]> = Vec::new();
                for p in cap {
                    if !uniq.iter().any(|u| dist3(u, &p) <= tol) {
                        uniq.push(p);
                    }
                }
                if uniq.len() >= 3 {
                    kept.push((tag, half, order_in_plane(uniq, q)));
                }
                *faces = kept;
                true
            }
        }
    }

    fn into_cell(self, generator: usize, p: &[T; 3], dim: usize) -> Cell<T> {
        let lift = |v: &[T]| {
            let mut x = [T::zero(); 3];
            for k in 0..dim {
                x[k] = p[k] + v[k];
            }
            x
        };
        let third = T::lit(1.0 / 3.0);
        let half = T::lit(0.5);
        match self {
            Poly::Two { verts, tags } => {
                let n = verts.len();
                let mut volume = T::zero();
                let facets = (0..n)
                    .map(|k| {
                        let (a, b) = (verts[k], verts[(k + 1) % n]);
                        let measure = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                        volume += half * measure * tags[k].1;
                        Facet { neighbor: tags[k].0, vertices: vec![lift(&a), lift(&b)], measure }
                    })
                    .collect();
                Cell { generator, facets, volume }
            }
            Poly::Three { faces } => {
                let mut volume = T::zero();
                let facets = faces
                    .into_iter()
                    .map(|(tag, dist, loop_)| {
                        let measure = loop_area(&loop_);
                        volume += third * measure * dist;
                        Facet { neighbor: tag, vertices: loop_.iter().map(|v| lift(v)).collect(), measure }
                    })
                    .collect();
                Cell { generator, facets, volume }
            }
        }
    }
}

fn dist3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn dedup_loop<T: Real>(v: &mut Vec<[T; 3]>, tol: T) {
    let mut k = 0;
    while v.len() > 1 && k < v.len() {
        let next = (k + 1) % v.len();
        if dist3(&v[k], &v[next]) <= tol {
            v.remove(next);
        } else {
            k += 1;
        }
    }
}

fn cross3<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn loop_area<T: Real>(loop_: &[[T; 3]]) -> T {
    let mut acc = [T::zero(); 3];
    let o = loop_[0];
    for k in 1..loop_.len().saturating_sub(1) {
        let a = [loop_[k][0] - o[0], loop_[k][1] - o[1], loop_[k][2] - o[2]];
        let b = [loop_[k + 1][0] - o[0], loop_[k + 1][1] - o[1], loop_[k + 1][2] - o[2]];
        let c = cross3(&a, &b);
        for i in 0..3 {
            acc[i] += c[i];
        }
    }
    T::lit(0.5) * (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt()
}

/// Orders coplanar points of a convex polygon by angle about their centroid.
fn order_in_plane<T: Real>(pts: Vec<[T; 3]>, normal: &[T; 3]) -> Vec<[T; 3]> {
    let n = pts.len();
    let mut c = [T::zero(); 3];
    for p in &pts {
        for k in 0..3 {
            c[k] += p[k] / T::of_usize(n);
        }
    }
    let seed = if normal[0].abs() < normal[1].abs().max(normal[2].abs()) { [T::one(), T::zero(), T::zero()] } else { [T::zero(), T::one(), T::zero()] };
    let u = cross3(normal, &seed);
    let v = cross3(normal, &u);
    let mut keyed: Vec<(T, [T; 3])> = pts
        .into_iter()
        .map(|p| {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            let x = d[0] * u[0] + d[1] * u[1] + d[2] * u[2];
            let y = d[0] * v[0] + d[1] * v[1] + d[2] * v[2];
            (y.atan2(x), p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    keyed.into_iter().map(|(_, p)| p).collect()
}
