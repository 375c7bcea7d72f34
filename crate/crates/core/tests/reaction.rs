use proptest::prelude::*;
use stohom_core::fields::TorusGrid;
use stohom_core::reaction::{run, step, Boundary, ExchangeLaw, MacroState, ReactionParams, Source};
use stohom_core::tensor::SmallMatrix;

fn bump(g: TorusGrid<f64>, x0: f64, y0: f64) -> Vec<f64> {
    (0..g.len())
        .map(|a| {
            let x = g.center(a);
            (-25.0 * ((x[0] - x0).powi(2) + (x[1] - y0).powi(2))).exp()
        })
        .collect()
}

fn params(k: f64, theta: f64, s: f64, dxx: f64, dyy: f64, dxy: f64) -> ReactionParams<f64> {
    ReactionParams {
        law: ExchangeLaw::Linear { k },
        theta,
        s,
        source: Source::Constant(0.0),
        dhom: SmallMatrix { dim: 2, a: [[dxx, dxy, 0.0], [dxy, dyy, 0.0], [0.0; 3]] },
        boundary: Boundary::Neumann,
        unit_capacity: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn neumann_steps_conserve_mass(
        k in 0.0..10.0f64, theta in 0.05..1.0f64, s in 0.0..20.0f64,
        dxx in 0.01..2.0f64, dyy in 0.01..2.0f64, c in -0.9..0.9f64,
        dt in 1e-3..0.2f64, x0 in 0.0..1.0f64, y0 in 0.0..1.0f64,
    ) {
        let p = params(k, theta, s, dxx, dyy, c * (dxx * dyy).sqrt());
        let g = TorusGrid::coarse(2, 12, 1.0).unwrap();
        let mut state = MacroState::new(g, bump(g, x0, y0), vec![0.1; g.len()]).unwrap();
        let m0 = state.record(&p).total;
        for _ in 0..5 {
            state = step(&state, &p, dt).unwrap();
            prop_assert!(state.is_finite());
            prop_assert!((state.record(&p).total - m0).abs() <= 1e-10 * dt * m0.abs().max(1.0));
        }
    }

    #[test]
    fn uniform_inputs_stay_uniform(k in 0.0..10.0f64, theta in 0.05..1.0f64, s in 0.0..20.0f64, u0 in 0.0..2.0f64, v0 in 0.0..2.0f64) {
        let p = params(k, theta, s, 1.0, 0.5, 0.2);
        let g = TorusGrid::coarse(2, 6, 1.0).unwrap();
        let out = run(&MacroState::uniform(g, u0, v0), &p, 0.01, 0.2, 5).unwrap();
        for snap in &out.snapshots {
            let (u, v) = stohom_core::reaction::linear_uniform_solution(k, theta, s, u0, v0, snap.t);
            prop_assert!(snap.u.iter().all(|&x| (x - u).abs() <= 1e-10));
            prop_assert!(snap.surface.iter().all(|&x| (x - v).abs() <= 1e-10));
        }
    }
}

#[test]
fn positivity_below_reaction_bound() {
    let g = TorusGrid::coarse(2, 16, 1.0).unwrap();
    for &(k, theta, s) in &[(1.0, 0.5, 2.0), (10.0, 0.2, 5.0), (0.5, 1.0, 0.5)] {
        for &f in &[0.0, 1.0] {
            let dt = 1.0 / (k * f64::max(s / theta, 1.0));
            let mut p = params(k, theta, s, 1.0, 0.3, 0.0);
            p.source = Source::Constant(f);
            for bc in [Boundary::Neumann, Boundary::Dirichlet] {
                p.boundary = bc;
                let out = run(&MacroState::new(g, bump(g, 0.2, 0.8), vec![0.0; g.len()]).unwrap(), &p, dt, 20.0 * dt, 1).unwrap();
                for snap in &out.snapshots {
                    assert!(snap.u.iter().chain(&snap.surface).all(|&v| v >= -1e-12), "k={k} bc={bc:?}");
                }
            }
        }
    }
}

#[test]
fn single_precision_step() {
    let g = TorusGrid::<f32>::coarse(2, 8, 1.0).unwrap();
    let p = ReactionParams {
        law: ExchangeLaw::Langmuir { k1: 1.0f32, k2: 0.5, umax: 2.0 },
        theta: 0.5,
        s: 1.0,
        source: Source::Constant(0.0),
        dhom: SmallMatrix::identity(2),
        boundary: Boundary::Neumann,
        unit_capacity: false,
    };
    let s = step(&MacroState::uniform(g, 1.0, 0.0), &p, 0.05).unwrap();
    assert!(s.is_finite() && s.surface[0] > 0.0 && s.u[0] < 1.0);
}
