//! Default parameter values and closed-form checks of the model terms.
//! Expected values are computed here from scratch rather than through the
//! library's own helpers.

use approx::assert_relative_eq;
use glam::DVec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixtraffic::analysis::fit_speed_spacing;
use mixtraffic::geometry::{directional_radius, BodyShape, Curb, ModeClass, RoadGeometry};
use mixtraffic::navigation::{
    anisotropy, curb_terms, relax_heading, repulsion_magnitude, target_direction,
};
use mixtraffic::speed::{update_speed, FreeDistance};
use mixtraffic::{AgentState, ModelParams, SimulationConfig};

#[test]
fn model_parameters() {
    let p = ModelParams::default();
    assert_eq!(p.k, 0.1);
    assert_eq!(p.range, 3.0);
    assert_eq!(p.time_gap, 0.9);
    assert_eq!(p.dt, 0.05);
    assert_eq!(p.tau, 0.3);
    assert_eq!(p.t_a, 0.88);
    assert_eq!(p.v0_moto, 10.0);
    assert_eq!(p.v0_car, 8.85);
    assert!(p.t_a < p.time_gap);
    assert_eq!(p.k_curb(), 0.2);
}

#[test]
fn body_shapes() {
    assert_eq!(BodyShape::motorcycle(), BodyShape::new(0.5, 0.5).unwrap());
    assert_eq!(BodyShape::car(), BodyShape::new(2.0, 1.0).unwrap());
}

#[test]
fn scenario_arithmetic() {
    let cfg = SimulationConfig::default();
    let road = RoadGeometry::default();
    assert_eq!(
        (road.length, road.n_lanes, road.lane_width),
        (100.0, 3, 4.0)
    );
    // 100 veh/km/lane on three lanes of 100 m
    assert_eq!(cfg.target_count(), 30);
    assert_eq!(cfg.n_steps(), 6000);
    let centers: Vec<f64> = (0..3).map(|k| road.lane_center(k)).collect();
    assert_eq!(centers, [2.0, 6.0, 10.0]);
    assert_eq!(road.lane_boundaries(), [4.0, 8.0]);
    assert_eq!(cfg.placement.p_min, 0.25);
}

#[test]
fn ellipse_radius_at_45_degrees() {
    let h = DVec2::X;
    let d = DVec2::new(1.0, 1.0).normalize();
    let expected = 2.0 / 2.5f64.sqrt();
    assert_relative_eq!(
        directional_radius(BodyShape::car(), h, d),
        expected,
        epsilon = 1e-12
    );
    assert_relative_eq!(expected, 1.2649, epsilon = 1e-4);
}

#[test]
fn target_direction_below_y_init() {
    let mut a = AgentState::new(0, ModeClass::Motorcycle, DVec2::new(0.0, 7.0), 10.0);
    a.y_init = 6.0;
    let e = target_direction(&a, 10.0);
    let n = 101.0f64.sqrt();
    assert_relative_eq!(e.x, 10.0 / n, epsilon = 1e-12);
    assert_relative_eq!(e.y, -1.0 / n, epsilon = 1e-12);
    assert_relative_eq!(e.y, -0.0995, epsilon = 1e-4);
}

#[test]
fn repulsion_intensities() {
    let k = 0.1;
    assert_relative_eq!(anisotropy(DVec2::X, DVec2::X, k), 0.1, epsilon = 1e-15);
    assert_relative_eq!(anisotropy(DVec2::X, -DVec2::X, k), 0.2, epsilon = 1e-15);
    assert_relative_eq!(
        repulsion_magnitude(0.1, 1.0, 1.0, 3.0),
        0.1,
        epsilon = 1e-15
    );
    assert_relative_eq!(
        repulsion_magnitude(0.1, 1.0, 4.0, 3.0),
        0.1 / std::f64::consts::E,
        epsilon = 1e-15
    );
}

#[test]
fn curb_push_at_mid_road() {
    let p = ModelParams::default();
    let a = AgentState::new(0, ModeClass::Motorcycle, DVec2::new(0.0, 6.0), 10.0);
    let terms = curb_terms(&a, &RoadGeometry::default(), &p);
    assert_eq!(terms.len(), 2);
    let expected = 0.2 * (-5.5f64 / 3.0).exp();
    for t in &terms {
        assert_relative_eq!(t.magnitude, expected, epsilon = 1e-12);
    }
    assert_relative_eq!(expected, 0.03197, epsilon = 1e-5);
    assert_relative_eq!(
        (terms[0].normal + terms[1].normal).length(),
        0.0,
        epsilon = 1e-15
    );
    let lower = terms.iter().find(|t| t.curb == Curb::Lower).unwrap();
    assert!(lower.normal.y > 0.0);
}

#[test]
fn one_euler_step_of_the_heading() {
    let e = relax_heading(DVec2::X, DVec2::Y, &ModelParams::default());
    let (x, y): (f64, f64) = (5.0 / 6.0, 1.0 / 6.0);
    let n = (x * x + y * y).sqrt();
    assert_relative_eq!(e.x, x / n, epsilon = 1e-12);
    assert_relative_eq!(e.y, y / n, epsilon = 1e-12);
    assert_relative_eq!(e.x, 0.98058, epsilon = 1e-5);
}

#[test]
fn speed_rule() {
    let p = ModelParams::default();
    let b = FreeDistance::Bounded;
    assert_eq!(
        update_speed(10.0, b(0.0), FreeDistance::Unbounded, &p),
        f64::EPSILON
    );
    assert_relative_eq!(
        update_speed(10.0, b(4.5), b(100.0), &p),
        5.0,
        epsilon = 1e-12
    );
    assert_relative_eq!(
        update_speed(10.0, b(100.0), b(2.7), &p),
        3.0,
        epsilon = 1e-12
    );
    assert_eq!(
        update_speed(8.85, FreeDistance::Unbounded, FreeDistance::Unbounded, &p),
        8.85
    );
    // following a stopped leader shrinks the gap by 1 - dt/T = 17/18 per step
    let g = 5.0;
    let v = update_speed(10.0, b(g), FreeDistance::Unbounded, &p);
    assert_relative_eq!((g - v * p.dt) / g, 17.0 / 18.0, epsilon = 1e-14);
}

#[test]
fn noisy_speed_spacing_recovers_time_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<(f64, f64)> = (0..400)
        .map(|_| {
            let s: f64 = rng.random_range(2.5..20.0);
            let v = 10.0f64.min((s - 2.0) / 0.9) + rng.random_range(-0.1..0.1);
            (s, v)
        })
        .collect();
    let fit = fit_speed_spacing(&points).unwrap();
    assert!(!fit.degenerate);
    assert!(
        (fit.time_gap - 0.9).abs() <= 0.05 * 0.9,
        "T = {}",
        fit.time_gap
    );
}

#[test]
fn default_run_row_count() {
    let cfg = SimulationConfig {
        duration: 10.0,
        ..Default::default()
    };
    let out = mixtraffic::run(&cfg).unwrap();
    let frames = cfg.n_steps() / cfg.record_every + 1;
    assert_eq!(out.record.rows.len() as u64, 30 * frames);
}
