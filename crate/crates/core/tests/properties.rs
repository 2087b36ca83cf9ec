//! Property-based checks of the structural invariants.

use lgeo::divergence::{c_transform, is_c_cyclical_monotone, l_divergence, CouplingSample};
use lgeo::finance::fernholz_decompose;
use lgeo::generator::{dual_coord, inverse_dual};
use lgeo::geodesic::{pythagorean_sign, uniform_grid};
use lgeo::geometry::LocalFrame;
use lgeo::transport::{action, displacement_family, minimizing_curve};
use lgeo::{psi, Builtin, Connection, CoordSystem, Curve, Generator, MarketPath, PrimalCoord, SimplexPoint};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn simplex(n: usize) -> impl Strategy<Value = SimplexPoint> {
    prop::collection::vec(-2.0..2.0_f64, n)
        .prop_map(|x| SimplexPoint::from_positive(&x.iter().map(|v| v.exp()).collect::<Vec<_>>()).unwrap())
}

fn builtin(n: usize) -> impl Strategy<Value = Builtin> {
    prop_oneof![
        simplex(n).prop_map(|w| Builtin::constant_weighted(&w)),
        (0.05..0.95_f64).prop_map(|l| Builtin::diversity(l).unwrap()),
        (prop::collection::vec(0.2..5.0_f64, n), 0.05..0.95_f64)
            .prop_map(|(w, l)| Builtin::generalized_diversity(w, l).unwrap()),
        (0.05..0.95_f64, 0.05..0.95_f64, simplex(n)).prop_map(|(a, l, w)| {
            Builtin::combination(vec![
                (a, Builtin::diversity(l).unwrap()),
                (1.0 - a, Builtin::constant_weighted(&w)),
            ])
            .unwrap()
        }),
    ]
}

/// Dimension, generator and `k` points.
fn setting(k: usize) -> impl Strategy<Value = (usize, Builtin, Vec<SimplexPoint>)> {
    (2usize..=5).prop_flat_map(move |n| (Just(n), builtin(n), prop::collection::vec(simplex(n), k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coordinates_round_trip(p in (2usize..=6).prop_flat_map(simplex)) {
        let back = SimplexPoint::from_primal(&p.to_primal()).unwrap();
        prop_assert!((back.vector() - p.vector()).amax() < 1e-14);
    }

    #[test]
    fn psi_is_convex(x in prop::collection::vec(-5.0..5.0_f64, 3), y in prop::collection::vec(-5.0..5.0_f64, 3), s in 0.0..1.0_f64) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        prop_assert!(psi(&mid) <= (1.0 - s) * psi(&x) + s * psi(&y) + 1e-12);
    }

    #[test]
    fn portfolio_is_interior((_, gen, ps) in setting(1)) {
        let w = gen.portfolio(&ps[0]);
        prop_assert!(w.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_nonnegative((_, gen, ps) in setting(2)) {
        let t = l_divergence(&gen, &ps[0], &ps[1]).unwrap().value;
        prop_assert!(t >= 0.0);
        prop_assert!(l_divergence(&gen, &ps[0], &ps[0]).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn dual_map_inverts((_, gen, ps) in setting(1)) {
        let th = ps[0].to_primal();
        let back = inverse_dual(&gen, &dual_coord(&gen, &th).unwrap(), None).unwrap();
        prop_assert!((back.vector() - th.vector()).amax() < 1e-9);
    }

    #[test]
    fn fenchel_inequality((_, gen, ps) in setting(2)) {
        let th = ps[0].to_primal();
        let phi = dual_coord(&gen, &ps[1].to_primal()).unwrap();
        let fs = c_transform(&gen, &phi).unwrap().value;
        let slack = psi((th.vector() - phi.vector()).as_slice()) - gen.f_primal(th.as_slice()) - fs;
        prop_assert!(slack >= -1e-9, "slack {slack}");
    }

    #[test]
    fn metrics_are_inverse_pairs((n, gen, ps) in setting(1)) {
        let frame = LocalFrame::at(&gen, &ps[0]).unwrap();
        for chart in [Connection::Primal, Connection::Dual] {
            let g = frame.metric(chart);
            prop_assert!((&g.entries - g.entries.transpose()).amax() < 1e-12);
            prop_assert!(g.is_positive_definite());
            let id = &g.entries * &g.inverse - DMatrix::identity(n - 1, n - 1);
            prop_assert!(id.amax() < 1e-8);
        }
    }

    #[test]
    fn pythagorean_signs_agree((_, gen, ps) in setting(3)) {
        let res = pythagorean_sign(&gen, &ps[0], &ps[1], &ps[2]).unwrap();
        prop_assert!(res.signs_agree(), "{res:?}");
    }

    #[test]
    fn graphs_are_c_cyclically_monotone((n, gen, ps) in (2usize..=4).prop_flat_map(|n| (Just(n), builtin(n), prop::collection::vec(simplex(n), 5)))) {
        let _ = n;
        let thetas: Vec<PrimalCoord> = ps.iter().map(|p| p.to_primal()).collect();
        let sample = CouplingSample::from_graph(&gen, &thetas).unwrap();
        prop_assert!(is_c_cyclical_monotone(&sample, 5).unwrap());
    }

    #[test]
    fn action_dominates_cost(
        (_, _, ps) in setting(2),
        amp in 0.0..0.3_f64,
        mode in 1usize..4,
    ) {
        let th = ps[0].to_primal();
        let phi = lgeo::DualCoord::from_vector(ps[1].to_primal().into_vector()).unwrap();
        let grid = uniform_grid(129);
        let best = minimizing_curve(&th, &phi, &grid).unwrap();
        let w = amp * (mode as f64 * std::f64::consts::PI);
        let pts = best.points().iter().zip(&grid)
            .map(|(x, &t)| x.map(|v| v + amp * (mode as f64 * std::f64::consts::PI * t).sin()))
            .collect();
        let vel = best.velocities().unwrap().iter().zip(&grid)
            .map(|(v, &t)| v.map(|u| u + w * (mode as f64 * std::f64::consts::PI * t).cos()))
            .collect();
        let curve = Curve::new(grid.clone(), pts, CoordSystem::Primal, Some(vel)).unwrap();
        let a = action(&curve).unwrap();
        let bound = psi((th.vector() - phi.vector()).as_slice());
        prop_assert!(!a.feasible || a.value >= bound - 1e-6, "{} < {bound}", a.value);
    }

    #[test]
    fn displacement_starts_equal_weighted((n, gen, ps) in setting(1)) {
        let family = displacement_family(&gen, n).unwrap();
        let w = family.at(0.0).unwrap().portfolio(&ps[0]);
        prop_assert!(w.iter().all(|&v| (v - 1.0 / n as f64).abs() < 1e-15));
        let end = family.at(1.0).unwrap().portfolio(&ps[0]);
        prop_assert!((end - gen.portfolio(&ps[0])).amax() < 1e-15);
    }

    #[test]
    fn fernholz_identity_holds((_, gen, ps) in setting(12)) {
        let path = MarketPath::from_weights(ps).unwrap();
        let report = fernholz_decompose(&gen, &path).unwrap();
        prop_assert!(report.max_identity_residual() < 1e-12);
    }

    #[test]
    fn market_path_csv_round_trip((_, _, ps) in setting(6)) {
        let path = MarketPath::from_weights(ps).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let back = MarketPath::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, path);
    }

    #[test]
    fn curve_csv_round_trip(xs in prop::collection::vec(prop::collection::vec(-1e3..1e3_f64, 2), 2..20)) {
        let times: Vec<f64> = (0..xs.len()).map(|i| i as f64 / (xs.len() - 1) as f64).collect();
        let points = xs.into_iter().map(DVector::from_vec).collect();
        let curve = Curve::new(times, points, CoordSystem::Dual, None).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let back = Curve::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.points(), curve.points());
        prop_assert_eq!(back.times(), curve.times());
        prop_assert_eq!(back.coord(), curve.coord());
    }

    #[test]
    fn generator_json_round_trip((_, gen, _) in setting(0)) {
        let back = Builtin::from_json(&gen.to_json()).unwrap();
        prop_assert_eq!(back, gen);
    }
}
