// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use elastica_core::flow::{evolve, StepperConfig};
use elastica_core::{DiffScheme, DiscreteCurve, EnergyParams};

fn circle(r: f64, n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(2, n, DiffScheme::Fd4, |t| vec![r * t.cos(), r * t.sin()]).unwrap()
}

fn mean_radius(c: &DiscreteCurve) -> f64 {
    let n = c.samples() as f64;
    let cx: f64 = c.points().chunks_exact(2).map(|p| p[0]).sum::<f64>() / n;
    let cy: f64 = c.points().chunks_exact(2).map(|p| p[1]).sum::<f64>() / n;
    c.points()
        .chunks_exact(2)
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n
}

#[test]
fn unit_circle_relaxes_to_critical_circle() {
    let p = EnergyParams::default();
    let start = Instant::now();
    let (state, trace) = evolve(circle(1.0, 256), &StepperConfig::default(), &p).unwrap();
    eprintln!(
        "steps {} t {} rejected {} elapsed {:?}",
        state.step_count,
        state.t,
        trace.rejected_steps,
        start.elapsed()
    );
    assert!(trace.converged);
    assert!((mean_radius(&state.curve) - FRAC_1_SQRT_2).abs() < 1e-3);
    assert!((state.energy - 2.0 * 2f64.sqrt() * PI).abs() < 1e-3);
    assert!(trace.max_energy_increase <= 1e-12);
}

#[test]
fn ellipse_relaxes_to_round_circle() {
    let p = EnergyParams::default();
    let c = DiscreteCurve::from_fn(2, 256, DiffScheme::Fd4, |t| vec![1.2 * t.cos(), 0.8 * t.sin()]).unwrap();
    let start = Instant::now();
    let (state, trace) = evolve(c, &StepperConfig::default(), &p).unwrap();
    eprintln!(
        "steps {} t {} rejected {} elapsed {:?}",
        state.step_count,
        state.t,
        trace.rejected_steps,
        start.elapsed()
    );
    assert!(trace.converged);
    let k = elastica_core::geometry::curvature(&state.curve);
    let kmax = (0..k.samples()).map(|i| {
        let v = k.at(i);
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    });
    let target = 2f64.sqrt();
    let dev = kmax.map(|x| (x - target).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-3, "{dev}");
    assert!((state.energy - 2.0 * 2f64.sqrt() * PI).abs() < 1e-2);
    assert!(trace.max_energy_increase <= 1e-12);
}
