use proptest::prelude::*;

use softbend_core::control::{
    control_step, valve_step, ControlCommand, ControllerConfig, ErrorSignals, Mode, ValveDirection,
    ValveState,
};
use softbend_core::kinematics::{
    backbone_from_angle, bend_angle_from_triangle, law_of_cosines_angle, render_silhouette,
    triangle_from_backbone, ModuleGeometry,
};
use softbend_core::plant::{
    forward_angle, pressure_step, sma_step, PneumaticParams, SmaState, SmaWireParams,
};
use softbend_core::vision::{largest_component, threshold, BinaryImage, CameraIntrinsics, GrayImage};

proptest! {
    #[test]
    fn law_of_cosines_is_symmetric(b in 0.1f64..100.0, c in 0.1f64..100.0, t in 0.0f64..1.0) {
        let a = (b - c).abs() + t * (b + c - (b - c).abs());
        let x = law_of_cosines_angle(a, b, c).unwrap();
        let y = law_of_cosines_angle(a, c, b).unwrap();
        prop_assert!((x - y).abs() < 1e-9);
        prop_assert!((0.0..=180.0).contains(&x));
    }

    #[test]
    fn law_of_cosines_limits(b in 0.1f64..100.0, c in 0.1f64..100.0) {
        prop_assert!((law_of_cosines_angle(b + c, b, c).unwrap() - 180.0).abs() < 1e-6);
        prop_assert!(law_of_cosines_angle((b - c).abs(), b, c).unwrap().abs() < 1e-3);
    }

    #[test]
    fn kinematic_round_trip_for_any_aux(k in 0u32..=36, d in 10.0f64..100.0) {
        let theta = 5.0 * k as f64;
        let pose = backbone_from_angle(&ModuleGeometry::default(), theta, 200).unwrap();
        let tri = triangle_from_backbone(&pose, d).unwrap();
        prop_assert!((bend_angle_from_triangle(&tri).degrees - theta).abs() <= 1e-6);
    }

    #[test]
    fn arc_length_is_preserved(theta in 0.0f64..=180.0, samples in 100usize..400) {
        let geom = ModuleGeometry::default();
        let pose = backbone_from_angle(&geom, theta, samples).unwrap();
        prop_assert!((pose.polyline_length() - geom.length_mm).abs() <= 1e-3 * geom.length_mm);
    }

    #[test]
    fn forward_map_is_monotone_and_lipschitz(
        p in 0.0f64..210.0, dp in 0.0f64..50.0, s in 0.0f64..0.04, ds in 0.0f64..0.01,
    ) {
        let params = PneumaticParams::default();
        let base = forward_angle(p, s, &params);
        let more_p = forward_angle(p + dp, s, &params);
        prop_assert!(more_p >= base);
        prop_assert!(more_p - base <= params.gain_deg_per_kpa * dp + 1e-9);
        prop_assert!(forward_angle(p, (s + ds).min(0.04), &params) >= base);
    }

    #[test]
    fn pressure_stays_in_supply_range(
        openings in prop::collection::vec(0.0f64..=1.0, 1..200),
        dt in 0.001f64..=0.1,
    ) {
        let params = PneumaticParams::default();
        let mut p = 0.0;
        for u in openings {
            for _ in 0..20 {
                p = pressure_step(p, u, &params, dt);
                prop_assert!((0.0..=params.supply_kpa).contains(&p), "{p}");
            }
        }
    }

    #[test]
    fn sma_state_stays_physical(
        commands in prop::collection::vec((any::<bool>(), 1usize..400), 1..60),
        dt in 0.001f64..=0.1,
    ) {
        let params = SmaWireParams::default();
        let mut s = SmaState::at_rest(25.0);
        for (powered, steps) in commands {
            for _ in 0..steps {
                s = sma_step(&s, &params, powered, 25.0, dt);
                prop_assert!((0.0..=1.0).contains(&s.martensite_fraction));
                prop_assert!((0.0..=params.max_recovery_strain).contains(&s.strain));
            }
        }
    }

    #[test]
    fn control_step_is_pure_and_mode_safe(e_p in -250.0f64..250.0, e_alpha in -80.0f64..80.0) {
        let errs = ErrorSignals { e_p, e_alpha };
        let pn = ControllerConfig::new(Mode::PneumaticOnly, 40.0);
        let hy = ControllerConfig::new(Mode::Hybrid, 40.0);
        prop_assert_eq!(control_step(&pn, &errs), control_step(&pn, &errs));
        prop_assert!(!control_step(&pn, &errs).sma_power);
        let cmd = control_step(&hy, &errs);
        prop_assert_eq!(cmd.sma_power, e_alpha > hy.angle_deadband_deg);
        if e_alpha < -hy.angle_deadband_deg {
            prop_assert_eq!(cmd.valve_direction, ValveDirection::Close);
        }
    }

    #[test]
    fn valve_position_stays_in_travel(dirs in prop::collection::vec(0u8..3, 1..500)) {
        let cfg = ControllerConfig::new(Mode::Hybrid, 40.0);
        let mut valve = ValveState::closed(cfg.steps_full_travel);
        for d in dirs {
            let valve_direction = match d {
                0 => ValveDirection::Open,
                1 => ValveDirection::Close,
                _ => ValveDirection::Hold,
            };
            let next = valve_step(&valve, &ControlCommand { valve_direction, sma_power: false }, 0.1, &cfg);
            prop_assert!(next.step_position <= cfg.steps_full_travel);
            prop_assert_eq!(
                next.opening() >= valve.opening(),
                next.step_position >= valve.step_position
            );
            valve = next;
        }
    }

    #[test]
    fn threshold_is_monotone(
        pixels in prop::collection::vec(any::<u8>(), 32 * 24),
        lo in any::<u8>(), hi in any::<u8>(),
    ) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let img = GrayImage::new(32, 24, pixels).unwrap();
        let (a, b) = (threshold(&img, lo), threshold(&img, hi));
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            prop_assert!(*x || !*y);
        }
    }

    #[test]
    fn largest_component_is_idempotent(pixels in prop::collection::vec(prop::bool::weighted(0.4), 32 * 24)) {
        let img = BinaryImage::new(32, 24, pixels).unwrap();
        if let Ok(once) = largest_component(&img) {
            let twice = largest_component(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn silhouette_rendering_is_pure(theta in 0.0f64..=180.0) {
        let geom = ModuleGeometry::default();
        let cam = CameraIntrinsics::default();
        let pose = backbone_from_angle(&geom, theta, 200).unwrap();
        prop_assert_eq!(
            render_silhouette(&pose, &geom, &cam).unwrap(),
            render_silhouette(&pose, &geom, &cam).unwrap()
        );
    }
}
