use std::f64::consts::PI;

use proptest::prelude::*;
use stohom_core::geometry::{
    delaunay, matern_thin, sample_poisson, voronoi, DelaunayEdge, FeatureModel, GeometryRecipe, MaternVariant, PointSet,
    Window,
};

fn window() -> Window<f64> {
    Window::new(2, 1.0).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn poisson_count_moments() {
    let counts: Vec<f64> = (0..10_000).map(|s| sample_poisson(window(), 100.0, s).unwrap().len() as f64).collect();
    let (m, v) = mean_var(&counts);
    assert!((m - 100.0).abs() <= 0.3, "mean {m}");
    assert!((v - 100.0).abs() <= 5.0, "variance {v}");
}

#[test]
fn poisson_rejects_negative_intensity() {
    assert!(sample_poisson(window(), -1.0, 0).is_err());
    assert!(sample_poisson(window(), f64::NAN, 0).is_err());
}

/// Brute-force Matérn-I: keep points with no other point closer than `d`.
fn matern1_oracle(pts: &PointSet<f64>, d: f64) -> usize {
    let w = pts.window;
    (0..pts.len())
        .filter(|&i| (0..pts.len()).all(|j| j == i || w.distance_sq(&pts.points[i], &pts.points[j]) >= d * d))
        .count()
}

#[test]
fn matern1_retention() {
    let (lambda, d) = (200.0, 0.05);
    let mut fractions = Vec::new();
    let (mut kept, mut total) = (0usize, 0usize);
    for s in 0..1000 {
        let pts = sample_poisson(window(), lambda, s).unwrap();
        let thinned = matern_thin(&pts, d, MaternVariant::I, s).unwrap();
        assert_eq!(thinned.len(), matern1_oracle(&pts, d));
        kept += thinned.len();
        total += pts.len();
        fractions.push(thinned.len() as f64 / pts.len() as f64);
    }
    let expected = (-lambda * PI * d * d).exp();
    let (_, var) = mean_var(&fractions);
    let pooled = kept as f64 / total as f64;
    assert!((pooled - expected).abs() <= 3.0 * (var / 1000.0).sqrt(), "{pooled} vs {expected}");
}

#[test]
fn boolean_coverage_over_seeds() {
    let recipe = GeometryRecipe::new(2, FeatureModel::Boolean { intensity: 30.0, radius: 0.05 });
    let phi: Vec<f64> = (0..200).map(|s| stohom_core::fields::volume_fraction(&recipe.realize(1.0, 512, s).unwrap())).collect();
    let (m, v) = mean_var(&phi);
    let expected = 1.0 - (-30.0 * PI * 0.0025f64).exp();
    assert!((m - expected).abs() <= 3.0 * (v / 200.0).sqrt(), "{m} vs {expected}");
}

fn points(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y, 0.0]), 1..n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matern_is_hard_core(seed in 0u64..1000, d in 0.0..0.2f64, two in any::<bool>()) {
        let pts = sample_poisson(window(), 80.0, seed).unwrap();
        let variant = if two { MaternVariant::II } else { MaternVariant::I };
        let thinned = matern_thin(&pts, d, variant, seed).unwrap();
        if let Some(min) = thinned.min_pair_distance() {
            prop_assert!(min >= d);
        }
        prop_assert_eq!(&thinned, &matern_thin(&pts, d, variant, seed).unwrap());
    }

    #[test]
    fn tessellation_partitions_and_is_dual(raw in points(40)) {
        let pts = PointSet::from_points(window(), raw).unwrap();
        prop_assume!(pts.min_pair_distance().is_none_or(|d| d > 1e-6));
        let tess = voronoi(&pts).unwrap();
        prop_assert!((tess.total_volume() - 1.0).abs() <= 1e-9);
        let adj = tess.adjacency();
        for &(i, j) in &adj {
            prop_assert!(adj.contains(&(j, i)));
        }
        let edges = delaunay(&tess);
        let from_edges: std::collections::BTreeSet<(usize, usize)> =
            edges.iter().flat_map(|e: &DelaunayEdge| [(e.a, e.b), (e.b, e.a)]).filter(|(a, b)| a != b).collect();
        let no_self: std::collections::BTreeSet<(usize, usize)> = adj.iter().copied().filter(|(a, b)| a != b).collect();
        prop_assert_eq!(from_edges, no_self);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), lambda in 0.0..200.0f64) {
        let a = sample_poisson(window(), lambda, seed).unwrap();
        let b = sample_poisson(window(), lambda, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.points.iter().all(|p| p[0] >= 0.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 1.0));
    }
}
