//! Preconditioned conjugate gradients with nullspace projection, and the
//! winding-aware union-find used for percolation checks.

use crate::fields::TorusGrid;
use crate::scalar::{dot, norm2, Real};

pub(crate) const NONE: u32 = u32::MAX;

pub(crate) trait LinearOperator<T> {
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Restricts vectors to the unknowns of a problem and, optionally, removes
/// the per-component constant (the nullspace of a pure-flux operator).
#[derive(Clone, Debug)]
pub(crate) struct Projector {
    labels: Vec<u32>,
    counts: Vec<usize>,
    remove_means: bool,
}

impl Projector {
    pub fn new(labels: Vec<u32>, remove_means: bool) -> Self {
        let ncomp = labels.iter().filter(|&&l| l != NONE).map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut counts = vec![0; ncomp];
        for &l in &labels {
            if l != NONE {
                counts[l as usize] += 1;
            }
        }
        Self { labels, counts, remove_means }
    }

    pub fn is_unknown(&self, i: usize) -> bool {
        self.labels[i] != NONE
    }

    pub fn apply<T: Real>(&self, v: &mut [T]) {
        if !self.remove_means {
            for (x, &l) in v.iter_mut().zip(&self.labels) {
                if l == NONE {
                    *x = T::zero();
                }
            }
            return;
        }
        let mut sums = vec![T::zero(); self.counts.len()];
        for (x, &l) in v.iter().zip(&self.labels) {
            if l != NONE {
                sums[l as usize] += *x;
            }
        }
        let means: Vec<T> = sums.iter().zip(&self.counts).map(|(&s, &c)| s / T::of_usize(c)).collect();
        for (x, &l) in v.iter_mut().zip(&self.labels) {
            if l == NONE {
                *x = T::zero();
            } else {
                *x -= means[l as usize];
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgReport<T> {
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` at exit.
    pub residual: T,
    pub converged: bool,
}

fn residual_into<T: Real, A: LinearOperator<T>>(op: &A, b: &[T], x: &[T], r: &mut [T], proj: &Projector) {
    op.apply(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    proj.apply(r);
}

/// Jacobi-preconditioned CG on the range of `proj`; `x` holds the initial guess.
pub(crate) fn pcg<T: Real, A: LinearOperator<T>>(
    op: &A,
    inv_diag: &[T],
    proj: &Projector,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> CgReport<T> {
    let n = b.len();
    let mut bp = b.to_vec();
    proj.apply(&mut bp);
    let bnorm = norm2(&bp);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return CgReport { iterations: 0, residual: T::zero(), converged: true };
    }
    proj.apply(x);
    let mut r = vec![T::zero(); n];
    residual_into(op, &bp, x, &mut r, proj);
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&ri, &di)| ri * di).collect();
    proj.apply(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while it < max_iter {
        if rel <= tol {
            residual_into(op, &bp, x, &mut r, proj);
            rel = norm2(&r) / bnorm;
            if rel <= tol {
                break;
            }
            z.iter_mut().zip(r.iter().zip(inv_diag)).for_each(|(zi, (&ri, &di))| *zi = ri * di);
            proj.apply(&mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        op.apply(&p, &mut ap);
        proj.apply(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        rel = norm2(&r) / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        proj.apply(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    proj.apply(x);
    residual_into(op, &bp, x, &mut r, proj);
    let residual = norm2(&r) / bnorm;
    CgReport { iterations: it, residual, converged: residual <= tol }
}

/// Connected components of a cell subset on the torus, with the axes along
/// which each component wraps around (i.e. percolates).
#[derive(Clone, Debug)]
pub(crate) struct Connectivity {
    pub labels: Vec<u32>,
    pub winds: Vec<[bool; 3]>,
}

impl Connectivity {
    pub fn percolates(&self, axis: usize) -> bool {
        self.winds.iter().any(|w| w[axis])
    }
}

/// `member[i]` selects cells; `link(i, axis)` says whether the face between
/// `i` and its `+axis` neighbour connects them.
pub(crate) fn connectivity<T: Real>(
    grid: &TorusGrid<T>,
    member: &[bool],
    link: impl Fn(usize, usize) -> bool,
) -> Connectivity {
    let n = grid.len();
    let nb = grid.neighbors();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    // position(i) = position(parent(i)) + offset(i), in lifted cell units
    let mut offset = vec![[0i32; 3]; n];
    let mut wind = vec![[false; 3]; n];

    fn find(parent: &mut [u32], offset: &mut [[i32; 3]], i: usize) -> (usize, [i32; 3]) {
        let mut path = Vec::new();
        let mut cur = i;
        while parent[cur] as usize != cur {
            path.push(cur);
            cur = parent[cur] as usize;
        }
        let root = cur;
        // compress from the top of the path down
        for &node in path.iter().rev() {
            let p = parent[node] as usize;
            if p != root {
                let po = offset[p];
                for k in 0..3 {
                    offset[node][k] += po[k];
                }
            }
            parent[node] = root as u32;
        }
        (root, if i == root { [0; 3] } else { offset[i] })
    }

    for i in 0..n {
        if !member[i] {
            continue;
        }
        for axis in 0..grid.dim() {
            let j = nb.plus[axis][i] as usize;
            if !member[j] || !link(i, axis) {
                continue;
            }
            let (ri, oi) = find(&mut parent, &mut offset, i);
            let (rj, oj) = find(&mut parent, &mut offset, j);
            let mut d = [0i32; 3];
            d[axis] = 1;
            // position(j) = position(i) + e_axis in the lifted picture
            let rel = [oi[0] + d[0] - oj[0], oi[1] + d[1] - oj[1], oi[2] + d[2] - oj[2]];
            if ri == rj {
                for k in 0..3 {
                    if rel[k] != 0 {
                        wind[ri][k] = true;
                    }
                }
            } else {
                parent[rj] = ri as u32;
                offset[rj] = rel;
                let wj = wind[rj];
                for k in 0..3 {
                    wind[ri][k] |= wj[k];
                }
            }
        }
    }

    let mut labels = vec![NONE; n];
    let mut root_label = vec![NONE; n];
    let mut winds = Vec::new();
    for i in 0..n {
        if !member[i] {
            continue;
        }
        let (r, _) = find(&mut parent, &mut offset, i);
        if root_label[r] == NONE {
            root_label[r] = winds.len() as u32;
            winds.push(wind[r]);
        }
        labels[i] = root_label[r];
    }
    Connectivity { labels, winds }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Vec<Vec<f64>>);

    impl LinearOperator<f64> for Dense {
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for (yi, row) in y.iter_mut().zip(&self.0) {
                *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = Dense(vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let proj = Projector::new(vec![0, 0, 0], false);
        let rep = pcg(&a, &[0.25, 1.0 / 3.0, 0.5], &proj, &b, &mut x, 1e-14, 50);
        assert!(rep.converged);
        let mut y = [0.0; 3];
        a.apply(&x, &mut y);
        for k in 0..3 {
            assert!((y[k] - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_on_singular_ring_returns_zero_mean() {
        // periodic 1D Laplacian, consistent rhs
        let n = 6;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 2.0;
            rows[i][(i + 1) % n] -= 1.0;
            rows[i][(i + n - 1) % n] -= 1.0;
        }
        let a = Dense(rows);
        let b = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5];
        let mut x = vec![0.0; n];
        let proj = Projector::new(vec![0; n], true);
        let rep = pcg(&a, &[0.5; 6], &proj, &b, &mut x, 1e-13, 100);
        assert!(rep.converged, "{rep:?}");
        assert!(x.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn winding_detection() {
        let grid = TorusGrid::new(2, 8, 1.0).unwrap();
        // horizontal stripe at row 3 wraps along x only
        let member: Vec<bool> = (0..64).map(|i| grid.coords(i)[1] == 3).collect();
        let c = connectivity(&grid, &member, |_, _| true);
        assert_eq!(c.winds.len(), 1);
        assert!(c.percolates(0));
        assert!(!c.percolates(1));

        // closed ring inside the torus: no winding
        let ring: Vec<bool> = (0..64)
            .map(|i| {
                let [x, y, _] = grid.coords(i);
                (2..=5).contains(&x) && (2..=5).contains(&y) && !((3..=4).contains(&x) && (3..=4).contains(&y))
            })
            .collect();
        let c = connectivity(&grid, &ring, |_, _| true);
        assert_eq!(c.winds, vec![[false; 3]]);

        // two separate columns: two components each winding along y
        let cols: Vec<bool> = (0..64).map(|i| matches!(grid.coords(i)[0], 1 | 5)).collect();
        let c = connectivity(&grid, &cols, |_, _| true);
        assert_eq!(c.winds.len(), 2);
        assert!(c.percolates(1) && !c.percolates(0));
    }
}
