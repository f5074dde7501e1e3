//! Property-based invariants of the section geometry, the return map, the
//! slab ladder, and the Denjoy construction.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use bifocus_core::denjoy::{denjoy_surgery, DenjoyCircleMap, DenjoyConfig, LengthLaw};
use bifocus_core::horseshoe::{slab_of, slab_radii, SlabConfig};
use bifocus_core::local_flow::{local_map, local_map_inverse};
use bifocus_core::return_map::{
    inverse_return_map, return_map, return_map_jacobian, GlobalMapModel, JacobianMode,
};
use bifocus_core::section::{circular_distance, wrap_angle, wrap_angle_pm};
use bifocus_core::{BifocusParams, InSectionPoint, RectPoint};
use proptest::prelude::*;

fn delta2() -> BifocusParams {
    BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).unwrap()
}

/// Random section point with radius in a numerically comfortable band.
fn section_point() -> impl Strategy<Value = RectPoint> {
    (1e-6f64..0.5, 0.0f64..TAU, -0.5f64..0.5)
        .prop_map(|(r, phi, z)| RectPoint::new(r * phi.cos(), r * phi.sin(), z))
}

proptest! {
    #[test]
    fn wrap_pm_lands_in_half_open_interval(x in -1e3f64..1e3) {
        let w = wrap_angle_pm(x);
        prop_assert!(w > -PI && w <= PI);
        // same circle point
        prop_assert!(circular_distance(w, x) < 1e-9);
    }

    #[test]
    fn wrap_lands_in_period(x in -1e3f64..1e3) {
        let w = wrap_angle(x);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(circular_distance(w, x) < 1e-9);
    }

    #[test]
    fn determinant_law(p in section_point()) {
        let params = delta2();
        let model = GlobalMapModel::default();
        let eval = return_map_jacobian(&p, &params, &model, JacobianMode::Analytic, None).unwrap();
        let s = p.x * p.x + p.y * p.y;
        let expected = -params.delta() * s.powf(params.delta() - 1.0);
        prop_assert!((eval.det - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences(p in section_point()) {
        let params = delta2();
        let model = GlobalMapModel::default();
        let a = return_map_jacobian(&p, &params, &model, JacobianMode::Analytic, None)
            .unwrap()
            .jacobian;
        let f = return_map_jacobian(&p, &params, &model, JacobianMode::FiniteDifference, None)
            .unwrap()
            .jacobian;
        let scale = a.norm().max(1.0);
        prop_assert!((a - f).norm() < 1e-4 * scale);
    }

    #[test]
    fn return_map_newton_inverse_round_trip(p in section_point()) {
        let params = delta2();
        let model = GlobalMapModel::default();
        let image = return_map(&p, &params, &model).unwrap();
        // seed inside the same branch, slightly off the true preimage
        let seed = RectPoint::new(p.x * 1.001, p.y * 1.001 + 1e-9, p.z * 0.999);
        if let Ok(back) = inverse_return_map(&image, &params, &model, &seed) {
            let err = (back.x - p.x).abs() + (back.y - p.y).abs() + (back.z - p.z).abs();
            prop_assert!(err < 1e-8 * (1.0 + p.radius()));
        }
    }

    #[test]
    fn local_map_round_trip(
        phi_s in -3.0f64..3.0,
        r_u in 1e-6f64..0.99,
        phi_u in -3.0f64..3.0,
    ) {
        let params = BifocusParams::new(1.7, 1.0, 1.2, 0.8, 0.0).unwrap();
        let p = InSectionPoint { phi_s, r_u, phi_u };
        let round = local_map_inverse(&local_map(&p, &params).unwrap(), &params).unwrap();
        prop_assert!((round.r_u - r_u).abs() < 1e-11 * r_u.max(1e-3));
        prop_assert!(circular_distance(round.phi_s, phi_s) < 1e-11);
        prop_assert!(circular_distance(round.phi_u, phi_u) < 1e-11);
    }

    #[test]
    fn slab_of_is_consistent_with_radii(n in 1i64..30, f in 0.0f64..1.0) {
        let params = delta2();
        let cfg = SlabConfig::default();
        let s = slab_radii(n, &params, &cfg).unwrap();
        // a radius strictly inside [b_{n+1}, b_n) belongs to slab n
        let r = s.b_n1 + (s.b_n - s.b_n1) * f * 0.999;
        if r > 0.0 {
            prop_assert_eq!(slab_of(r, &params, &cfg), Some(n));
        }
    }
}

fn shared_circle() -> &'static DenjoyCircleMap {
    static MAP: OnceLock<DenjoyCircleMap> = OnceLock::new();
    MAP.get_or_init(|| {
        denjoy_surgery(&DenjoyConfig {
            omega: 0.5 * (5.0f64.sqrt() - 1.0),
            theta0: 0.3,
            length_budget: 0.5,
            length_law: LengthLaw::Basel,
            n_intervals: 400,
        })
        .unwrap()
    })
}

proptest! {
    #[test]
    fn denjoy_lift_is_monotone_and_degree_one(x in -10.0f64..10.0, h in 1e-9f64..0.1) {
        let map = shared_circle();
        let fx = map.eval_lift(x);
        let fxh = map.eval_lift(x + h);
        prop_assert!(fxh > fx, "lift must be strictly increasing");
        let translated = map.eval_lift(x + map.total_len);
        prop_assert!((translated - fx - map.total_len).abs() < 1e-9);
    }
}
