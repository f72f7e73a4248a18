// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::TAU;

use elastica_core::diagnostics::{cauchy_check, l1_velocity, LojaTrace};
use elastica_core::flow::evolve;
use elastica_core::{DiffScheme, EnergyParams, StepperConfig, TubularData};

#[test]
fn l1_velocity_on_the_circle_matches_radius_change() {
    // on a circle of radius r(t) parametrized by angle, |∂_t γ| = |r'| at every
    // sample, so ∫‖∂_t γ‖_{L²(dθ)} dt = √(2π) |r(0) − r(T)|
    let c = common::seed("circle:1", 128, 2, DiffScheme::Spectral);
    let cfg = StepperConfig {
        dt_max: 1e-3,
        stop_grad_tol: 1e-7,
        ..StepperConfig::default()
    };
    let (state, trace) = evolve(c, &cfg, &EnergyParams::default()).unwrap();
    assert!(trace.converged);
    let r_final = common::mean_radius(&state.curve);
    let loja = LojaTrace::from_flow(&trace.rows).unwrap();
    let l1 = l1_velocity(&loja, 0.0).unwrap();
    let expect = TAU.sqrt() * (1.0 - r_final);
    assert!((l1 - expect).abs() <= 1e-3, "{l1} vs {expect}");
}

#[test]
fn identical_snapshots_have_zero_distance() {
    let c = common::seed("ellipse:1.2,0.8", 64, 2, DiffScheme::Spectral);
    let tub = TubularData::new(c.clone()).unwrap();
    let rep = cauchy_check(&[c.clone(), c.clone(), c], &tub).unwrap();
    assert_eq!(rep.distances.len(), 2);
    assert!(rep.distances.iter().all(|&d| d <= 1e-12));
    assert!(rep.tail_decreasing);
}
