// SPDX-License-Identifier: Apache-2.0

mod common;

use elastica_core::geometry::project_normal;
use elastica_core::graph::{normal_graph, reconstruct, tubular_radius};
use elastica_core::variation::elastic_energy;
use elastica_core::{DiffScheme, EnergyParams, Error, TubularData, VectorField};

#[test]
fn figure_eight_radius_respects_curvature_and_crossing() {
    for dim in [2, 3] {
        let c = common::seed("figure_eight:1", 128, dim, DiffScheme::Spectral);
        let tub = TubularData::new(c.clone()).unwrap();
        assert!(tub.radius() > 0.0);
        assert!(tub.radius() <= 0.5 / tub.curvature_bound() + 1e-15);
        assert_eq!(tub.radius(), tubular_radius(&c).unwrap());
    }
    // the planar crossing makes the self-distance term win over curvature
    let planar = TubularData::new(common::seed("figure_eight:1", 128, 2, DiffScheme::Spectral)).unwrap();
    assert!(planar.radius() < 0.5 / planar.curvature_bound());
}

#[test]
fn far_points_are_rejected() {
    let c = common::seed("circle:1", 64, 2, DiffScheme::Spectral);
    let tub = TubularData::new(c).unwrap();
    match tub.project(&[3.0, 0.0]) {
        Err(Error::OutsideTube { .. }) => {}
        other => panic!("expected OutsideTube, got {other:?}"),
    }
    let p = tub.project(&[1.1, 0.0]).unwrap();
    assert!((p.distance() - 0.1).abs() < 1e-12);
}

#[test]
fn energy_is_transported_by_the_graph() {
    let p = EnergyParams::default();
    for (spec, dim) in [("ellipse:1.2,0.8", 2), ("figure_eight:1", 3)] {
        let gamma = common::seed(spec, 128, dim, DiffScheme::Spectral);
        let tub = TubularData::new(gamma.clone()).unwrap();
        let bump = VectorField::from_fn(&gamma, |_, t| {
            (0..dim).map(|d| ((d + 2) as f64 * t + d as f64).sin()).collect()
        })
        .unwrap();
        let y0 = project_normal(&bump, &gamma).unwrap();
        let y0 = y0.scaled(0.25 * tub.radius() / y0.max_norm());
        let sigma = gamma.displaced(y0.as_vector(), 1.0).unwrap();
        let y = normal_graph(&tub, &sigma).unwrap();
        let back = reconstruct(&tub, &y).unwrap();
        let (es, eb) = (elastic_energy(&sigma, &p), elastic_energy(&back, &p));
        assert!((es - eb).abs() <= 1e-6 * es, "{spec}: {es} vs {eb}");
    }
}
