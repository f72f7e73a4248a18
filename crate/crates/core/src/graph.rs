// SPDX-License-Identifier: Apache-2.0

//! Tubular neighbourhoods of a reference curve: nearest-point projection and
//! normal-graph coordinates `σ = γ + Y` of nearby curves.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, DiscreteCurve, NormalField, VectorField};
use crate::spectral::{Jet, TrigInterpolant};

/// Residual tolerance on `g(θ) = ⟨x − γ(θ), γ'(θ)⟩` (relative to `|γ'|²`).
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone)]
pub struct TubularData {
    reference: DiscreteCurve,
    radius: f64,
    interp: TrigInterpolant,
    kmax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub theta: f64,
    /// Nearest reference sample the projection was seeded from.
    pub seed: usize,
    pub foot: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Projection {
    pub fn distance(&self) -> f64 {
        norm(&self.offset)
    }
}

fn max_curvature(curve: &DiscreteCurve) -> f64 {
    let k = crate::geometry::curvature(curve);
    (0..k.samples()).map(|i| norm(k.at(i))).fold(0.0, f64::max)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smallest distance between sample pairs that are not joined by an arc of
/// monotonically increasing distance. Leaving each sample in both directions
/// while the distance still grows excludes the trivially close neighbours; the
/// rest of the curve is where the curve comes back towards itself.
pub fn min_self_distance(curve: &DiscreteCurve) -> f64 {
    let n = curve.samples();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let p = curve.point(i);
        let d = |j: usize| dist(p, curve.point(j % n));
        let mut f = 1;
        while f < n - 1 && d(i + f + 1) >= d(i + f) {
            f += 1;
        }
        let mut b = 1;
        while b < n - 1 && d(i + n - b - 1) >= d(i + n - b) {
            b += 1;
        }
        // remaining arc runs from i+f forward to i−b
        let end = n - b;
        if f <= end {
            for off in f..=end {
                best = best.min(d(i + off));
            }
        } else {
            best = best.min(d(i + f).min(d(i + end)));
        }
    }
    best
}

/// `ρ = 0.5 min(1/max|k|, min_self_distance/2)`.
pub fn tubular_radius(reference: &DiscreteCurve) -> Result<f64> {
    let kmax = max_curvature(reference);
    let rho = 0.5 * (1.0 / kmax).min(0.5 * min_self_distance(reference));
    if rho > 0.0 && rho.is_finite() {
        Ok(rho)
    } else {
        Err(Error::DegenerateCurve(format!("tubular radius {rho:e}")))
    }
}

impl TubularData {
    pub fn new(reference: DiscreteCurve) -> Result<Self> {
        let radius = tubular_radius(&reference)?;
        Ok(Self::build(reference, radius))
    }

    /// Uses a caller-chosen radius, e.g. a local one for self-intersecting
    /// references. It must not exceed the curvature bound `0.5/max|k|`.
    pub fn with_radius(reference: DiscreteCurve, radius: f64) -> Result<Self> {
        let kmax = max_curvature(&reference);
        if !(radius > 0.0 && radius <= 0.5 / kmax) {
            return Err(Error::InvalidParameter(format!(
                "radius {radius:e} outside (0, {:e}]",
                0.5 / kmax
            )));
        }
        Ok(Self::build(reference, radius))
    }

    fn build(reference: DiscreteCurve, radius: f64) -> Self {
        let interp = TrigInterpolant::new(reference.points(), reference.dim());
        let kmax = max_curvature(&reference);
        Self {
            reference,
            radius,
            interp,
            kmax,
        }
    }

    pub fn reference(&self) -> &DiscreteCurve {
        &self.reference
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn curvature_bound(&self) -> f64 {
        1.0 / self.kmax
    }

    fn window(&self) -> usize {
        (self.reference.samples() / 8).max(1)
    }

    fn nearest(&self, x: &[f64]) -> usize {
        self.nearest_in(x, 0, self.reference.samples())
    }

    /// Nearest sample among `center ± half` (cyclic); `half ≥ N/2` is global.
    fn nearest_in(&self, x: &[f64], center: usize, half: usize) -> usize {
        let n = self.reference.samples();
        let candidates: Box<dyn Iterator<Item = usize>> = if 2 * half >= n {
            Box::new(0..n)
        } else {
            Box::new((0..=2 * half).map(move |o| (center + n + o - half) % n))
        };
        let mut best = (center % n, f64::INFINITY);
        for j in candidates {
            let d = dist(x, self.reference.point(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    /// Projection seeded from the globally nearest sample.
    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        self.check_point(x)?;
        self.project_from(x, self.nearest(x))
    }

    /// Projection seeded from the nearest sample within `±N/8` of `hint`.
    pub fn project_near(&self, x: &[f64], hint: usize) -> Result<Projection> {
        self.check_point(x)?;
        let seed = self.nearest_in(x, hint, self.window());
        self.project_from(x, seed)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.reference.dim() {
            return Err(crate::error::shape_mismatch(self.reference.dim(), x.len()));
        }
        Ok(())
    }

    fn g(&self, x: &[f64], theta: f64) -> (f64, f64, Jet) {
        let jet = self.interp.jet(theta);
        let r: Vec<f64> = x.iter().zip(&jet.value).map(|(a, b)| a - b).collect();
        let g = dot(&r, &jet.d1);
        let dg = dot(&r, &jet.d2) - dot(&jet.d1, &jet.d1);
        (g, dg, jet)
    }

    fn project_from(&self, x: &[f64], seed: usize) -> Result<Projection> {
        let h = self.reference.d_theta();
        let w = self.window() as f64 * h;
        let t0 = self.reference.theta(seed);
        let speed2 = {
            let j = self.interp.jet(t0);
            dot(&j.d1, &j.d1)
        };
        let tol = NEWTON_TOL * speed2.max(f64::MIN_POSITIVE);
        // d|x − γ|²/dθ = −2g, so the minimiser sits where g changes from + to −
        let (mut lo, mut hi) = (t0 - h, t0 + h);
        let mut bracketed = false;
        for _ in 0..self.window() {
            let (glo, ..) = self.g(x, lo);
            let (ghi, ..) = self.g(x, hi);
            if glo >= 0.0 && ghi <= 0.0 {
                bracketed = true;
                break;
            }
            if glo < 0.0 {
                lo = (lo - h).max(t0 - w);
            }
            if ghi > 0.0 {
                hi = (hi + h).min(t0 + w);
            }
        }
        let mut theta = t0;
        let mut residual = f64::INFINITY;
        let mut jet = self.interp.jet(theta);
        for _ in 0..NEWTON_MAX_ITER {
            let (g, dg, j) = self.g(x, theta);
            jet = j;
            residual = g.abs();
            if residual <= tol {
                break;
            }
            if bracketed {
                if g > 0.0 {
                    lo = theta;
                } else {
                    hi = theta;
                }
            }
            let mut next = theta - g / dg;
            if bracketed && !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if !next.is_finite() || (next - t0).abs() > w {
                return Err(Error::NewtonFailure {
                    iterations: NEWTON_MAX_ITER,
                    residual,
                });
            }
            theta = next;
        }
        if residual > tol {
            return Err(Error::NewtonFailure {
                iterations: NEWTON_MAX_ITER,
                residual,
            });
        }
        let offset: Vec<f64> = x.iter().zip(&jet.value).map(|(a, b)| a - b).collect();
        let d = norm(&offset);
        if d >= self.radius {
            return Err(Error::OutsideTube {
                distance: d,
                radius: self.radius,
            });
        }
        Ok(Projection {
            theta: theta.rem_euclid(TAU),
            seed,
            foot: jet.value,
            offset,
        })
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Normal field `Y` over the reference with `γ + Y` tracing `σ`.
///
/// Each `Y_i` is the intersection of `σ`'s trigonometric interpolant with the
/// normal hyperplane of the reference at `θ_i`.
pub fn normal_graph(tub: &TubularData, sigma: &DiscreteCurve) -> Result<NormalField> {
    let reference = &tub.reference;
    let dim = reference.dim();
    if sigma.dim() != dim {
        return Err(crate::error::shape_mismatch(dim, sigma.dim()));
    }
    let m = sigma.samples();
    let n = reference.samples();

    // parameter map u_j ↦ θ*_j, continued sample to sample
    let mut thetas = Vec::with_capacity(m);
    let mut p = tub.project(sigma.point(0))?;
    thetas.push(p.theta);
    for j in 1..m {
        let hint = ((p.theta / TAU * n as f64).round() as usize) % n;
        p = tub.project_near(sigma.point(j), hint)?;
        thetas.push(p.theta);
    }
    let mut unwrapped = Vec::with_capacity(m + 1);
    unwrapped.push(thetas[0]);
    for j in 0..m {
        let step = wrap_angle(thetas[(j + 1) % m] - thetas[j]);
        if !(step > 0.0) {
            return Err(Error::FoldedGraph { index: j });
        }
        unwrapped.push(unwrapped[j] + step);
    }
    if (unwrapped[m] - unwrapped[0] - TAU).abs() > 1e-6 {
        return Err(Error::FoldedGraph { index: m - 1 });
    }

    let sigma_interp = TrigInterpolant::new(sigma.points(), dim);
    let du = sigma.d_theta();
    let tangents = crate::geometry::tangent(reference);
    let mut values = vec![0.0; n * dim];
    let mut j = 0usize;
    for i in 0..n {
        // target angle in the unwrapped frame starting at θ*_0
        let mut target = reference.theta(i);
        while target < unwrapped[0] {
            target += TAU;
        }
        while target >= unwrapped[0] + TAU {
            target -= TAU;
        }
        while j + 1 < m && unwrapped[j + 1] <= target {
            j += 1;
        }
        let frac = (target - unwrapped[j]) / (unwrapped[j + 1] - unwrapped[j]);
        let (mut lo, mut hi) = (j as f64 * du, (j + 1) as f64 * du);
        let mut u = lo + frac * du;
        let gamma = reference.point(i);
        // discrete unit tangent, so that Y is normal in the curve's own frame
        let gp = tangents.at(i);
        let scale = 1.0;
        let h_at = |u: f64| {
            let v = sigma_interp.eval(u);
            v.iter().zip(gamma).zip(gp).map(|((a, b), t)| (a - b) * t).sum::<f64>()
        };
        let bracketed = h_at(lo) <= 0.0 && h_at(hi) >= 0.0;
        let mut y = Vec::new();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let jet = sigma_interp.jet(u);
            y = jet.value.iter().zip(gamma).map(|(a, b)| a - b).collect();
            let h = dot(&y, gp);
            residual = h.abs();
            if residual <= NEWTON_TOL * scale {
                converged = true;
                break;
            }
            if h < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let dh = dot(&jet.d1, gp);
            let mut next = u - h / dh;
            if bracketed && !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if !next.is_finite() {
                break;
            }
            u = next;
        }
        if !converged {
            return Err(Error::NewtonFailure {
                iterations: NEWTON_MAX_ITER,
                residual,
            });
        }
        let d = norm(&y);
        if d >= tub.radius {
            return Err(Error::OutsideTube {
                distance: d,
                radius: tub.radius,
            });
        }
        values[i * dim..(i + 1) * dim].copy_from_slice(&y);
    }
    NormalField::project(&VectorField::new(dim, values)?, reference)
}

/// `γ + Y` on the reference grid.
pub fn reconstruct(tub: &TubularData, y: &NormalField) -> Result<DiscreteCurve> {
    tub.reference.displaced(y.as_vector(), 1.0)
}

/// ds-weighted barycentre `∫ γ ds / L`.
pub fn barycenter(curve: &DiscreteCurve) -> Vec<f64> {
    let dim = curve.dim();
    let speed = curve.speed();
    let total: f64 = speed.iter().sum();
    let mut c = vec![0.0; dim];
    for (p, s) in curve.points().chunks_exact(dim).zip(&speed) {
        for (a, x) in c.iter_mut().zip(p) {
            *a += x * s;
        }
    }
    c.iter_mut().for_each(|a| *a /= total);
    c
}

/// Subtracts the ds-weighted barycentre.
pub fn quotient_translation(curve: &DiscreteCurve) -> DiscreteCurve {
    let c: Vec<f64> = barycenter(curve).into_iter().map(|x| -x).collect();
    curve
        .translated(&c)
        .expect("translation preserves regularity")
}
