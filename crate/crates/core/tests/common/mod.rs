// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use elastica_core::{seed_curve, DiffScheme, DiscreteCurve, SeedKind};

pub fn seed(spec: &str, samples: usize, dim: usize, scheme: DiffScheme) -> DiscreteCurve {
    let kind: SeedKind = spec.parse().unwrap();
    seed_curve(&kind, samples, dim, scheme).unwrap()
}

/// The shipped corpus as `(label, curve)`.
pub fn corpus(samples: usize) -> Vec<(String, DiscreteCurve)> {
    let mut out = Vec::new();
    for (spec, dim) in [
        ("circle:1", 2),
        ("ellipse:1.2,0.8", 2),
        ("figure_eight:1", 2),
        ("figure_eight:1", 3),
        ("fourier_perturbed_circle:1,0.05,7,2,3", 2),
        ("fourier_perturbed_circle:1,0.05,11,2,3,5", 3),
        ("w_covered_circle:1,2", 2),
    ] {
        out.push((format!("{spec} (R^{dim})"), seed(spec, samples, dim, DiffScheme::Fd4)));
    }
    out
}

pub fn radial_rhs(r: f64, lambda: f64) -> f64 {
    0.5 / r.powi(3) - lambda / r
}

/// RK4 for `dr/dt = 1/(2r³) − λ/r` on a fine fixed grid, sampled at `times`
/// (increasing).
pub fn radial_ode(r0: f64, lambda: f64, times: &[f64]) -> Vec<f64> {
    let h = 1e-4;
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut r) = (0.0, r0);
    let rk = |r: f64, dt: f64| {
        let f = |r| radial_rhs(r, lambda);
        let k1 = f(r);
        let k2 = f(r + 0.5 * dt * k1);
        let k3 = f(r + 0.5 * dt * k2);
        let k4 = f(r + dt * k3);
        r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    for &target in times {
        while t + h <= target {
            r = rk(r, h);
            t += h;
        }
        out.push(rk(r, target - t));
    }
    out
}

/// Mean distance of the samples from their arithmetic centre.
pub fn mean_radius(c: &DiscreteCurve) -> f64 {
    let dim = c.dim();
    let n = c.samples() as f64;
    let mut centre = vec![0.0; dim];
    for p in c.points().chunks_exact(dim) {
        for (a, x) in centre.iter_mut().zip(p) {
            *a += x / n;
        }
    }
    c.points()
        .chunks_exact(dim)
        .map(|p| p.iter().zip(&centre).map(|(x, a)| (x - a).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / n
}
