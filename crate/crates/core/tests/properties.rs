use std::f64::consts::PI;
use std::path::Path;

use proptest::prelude::*;
use shape_geodesics::geometry::{build_geometry, h0_inner, laplace_beltrami};
use shape_geodesics::io::{parse_config, parse_pgm, GrayImage};
use shape_geodesics::operator::gp_inner;
use shape_geodesics::{Immersion, OperatorParams, ParamGrid, Vector3, VectorField};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pgm_round_trips(w in 1usize..12, h in 1usize..12, maxval in 1u16..2000, seed in any::<u64>()) {
        let img = GrayImage::from_fn(w, h, maxval, |c, r| {
            ((seed ^ (c as u64 * 31 + r as u64 * 17)).wrapping_mul(2654435761) % (u64::from(maxval) + 1)) as u16
        }).unwrap();
        prop_assert_eq!(&parse_pgm(&img.to_p5(), Path::new("p5")).unwrap(), &img);
        prop_assert_eq!(&parse_pgm(img.to_p2().as_bytes(), Path::new("p2")).unwrap(), &img);
    }

    #[test]
    fn config_parser_never_panics(text in "[ -~\n]{0,200}") {
        let _ = parse_config(&text);
    }

    #[test]
    fn numeric_values_round_trip_through_config(a in 0.0f64..1e6, dt in 1e-6f64..10.0) {
        let cfg = parse_config(&format!("A = {a}\ndt = {dt}\n")).unwrap();
        prop_assert_eq!(cfg.params.a, a);
        prop_assert_eq!(cfg.dt, dt);
    }

    #[test]
    fn laplacian_symmetric_and_metric_dominates(c1 in -0.5f64..0.5, c2 in -0.5f64..0.5, k in 1u32..4) {
        let grid = ParamGrid::square(13).unwrap();
        let f = Immersion::from_fn(grid, |u, v| Vector3::new(u, v, c1 * (k as f64 * u).sin() * v.sin() + c2 * u * v / PI)).unwrap();
        let cache = build_geometry(&f).unwrap();
        let h = VectorField(grid.sample(|u, v| Vector3::new(u.sin() * v.sin(), (2.0 * u).sin() * v.sin(), (u * v).sin() * u.sin() * v.sin())));
        let kf = VectorField(grid.sample(|u, v| Vector3::new((u + v).sin() * u.sin() * v.sin(), 0.0, (3.0 * v).sin() * u.sin())));
        let lh = laplace_beltrami(&cache, &h).unwrap();
        let lk = laplace_beltrami(&cache, &kf).unwrap();
        let scale = h0_inner(&cache, &h, &h).unwrap().sqrt() * h0_inner(&cache, &kf, &kf).unwrap().sqrt();
        let asym = (h0_inner(&cache, &lh, &kf).unwrap() - h0_inner(&cache, &h, &lk).unwrap()).abs();
        prop_assert!(asym <= 1e-10 * scale);
        let params = OperatorParams::new(1.0, 2).unwrap();
        prop_assert!(gp_inner(&cache, &params, &h, &h).unwrap() >= h0_inner(&cache, &h, &h).unwrap());
    }
}
