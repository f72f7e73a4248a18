// SPDX-License-Identifier: Apache-2.0

//! Łojasiewicz–Simon diagnostics along a flow: dual gradient norm, exponent
//! fit, `H(t) = gap^α`, L¹-in-time velocity and Cauchy distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::TraceRow;
use crate::geometry::{curvature, inner_l2dtheta, inner_l2ds, nabla_perp, DiscreteCurve};
use crate::graph::{normal_graph, TubularData};
use crate::variation::{gradient, EnergyParams};

/// Gaps below `−GAP_FLOOR` are rejected as negative.
pub const GAP_FLOOR: f64 = 1e-12;

/// `( ∫ |γ'|² |G|² dθ )^{1/2}`.
pub fn dual_grad_norm(curve: &DiscreteCurve, params: &EnergyParams) -> f64 {
    let g = gradient(curve, params);
    let speed = curve.speed();
    let dim = curve.dim();
    let sum: f64 = g
        .values()
        .chunks_exact(dim)
        .zip(&speed)
        .map(|(gi, s)| gi.iter().map(|x| x * x).sum::<f64>() * s * s)
        .sum();
    (sum * curve.d_theta()).sqrt()
}

/// `‖(∇⊥)^m k‖_{L²(ds)}` for `m = 0, 1, 2`.
pub fn curvature_norms(curve: &DiscreteCurve) -> [f64; 3] {
    let k0 = curvature(curve);
    let k1 = nabla_perp(&k0, curve).expect("same curve");
    let k2 = nabla_perp(&k1, curve).expect("same curve");
    let n = |k: &crate::geometry::NormalField| inner_l2ds(k, k, curve).expect("same curve").sqrt();
    [n(&k0), n(&k1), n(&k2)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LojaRow {
    pub t: f64,
    pub energy_gap: f64,
    pub dual_grad_norm: f64,
    pub vel_l2dtheta: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojaTrace {
    pub rows: Vec<LojaRow>,
    pub e_ref: f64,
}

impl LojaTrace {
    /// Checks that `t` increases strictly and that gaps stay above `−GAP_FLOOR`.
    pub fn new(rows: Vec<LojaRow>, e_ref: f64) -> Result<Self> {
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InsufficientData(format!(
                    "time not strictly increasing at row {}",
                    i + 1
                )));
            }
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.energy_gap < -GAP_FLOOR) {
            return Err(Error::NegativeGap {
                row,
                gap: r.energy_gap,
            });
        }
        Ok(Self { rows, e_ref })
    }

    /// Uses the last energy of a flow trace as the limit energy.
    pub fn from_flow(rows: &[TraceRow]) -> Result<Self> {
        let last = rows
            .last()
            .ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
        Self::from_flow_with_ref(rows, last.energy)
    }

    pub fn from_flow_with_ref(rows: &[TraceRow], e_ref: f64) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| LojaRow {
                t: r.t,
                energy_gap: r.energy - e_ref,
                dual_grad_norm: r.dual_grad_norm,
                vel_l2dtheta: r.vel_norm_l2dtheta,
                length: r.length,
            })
            .collect();
        Self::new(rows, e_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub g_min: f64,
    pub g_max: f64,
    /// Multiplier on `C` for the row-wise inequality check.
    pub slack: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            g_min: 1e-10,
            g_max: 1e-2,
            slack: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojaFit {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub window: [f64; 2],
    pub residual: f64,
    pub points: usize,
    pub violations: usize,
    /// Unclipped `1 − slope`.
    pub alpha_raw: f64,
}

/// Total-least-squares line `y = a x + b` through `(x, y)`. Returns `(a, b,
/// rms orthogonal distance)`.
fn tls_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // principal direction of the 2×2 scatter matrix
    let d = syy - sxx;
    let slope = if sxy == 0.0 {
        if syy > sxx { f64::INFINITY } else { 0.0 }
    } else {
        (d + (d * d + 4.0 * sxy * sxy).sqrt()) / (2.0 * sxy)
    };
    let b = my - slope * mx;
    let norm = (1.0 + slope * slope).sqrt();
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, c)| ((c - slope * a - b) / norm).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, b, rms)
}

/// Fits `log dual ≈ (1 − α) log gap − log C` on `g_min ≤ gap ≤ g_max`.
pub fn fit_alpha(trace: &LojaTrace, opts: &FitOptions) -> Result<LojaFit> {
    let picked: Vec<&LojaRow> = trace
        .rows
        .iter()
        .filter(|r| {
            r.energy_gap > 0.0
                && r.dual_grad_norm > 0.0
                && r.energy_gap >= opts.g_min
                && r.energy_gap <= opts.g_max
        })
        .collect();
    if picked.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} rows in gap window [{:e}, {:e}], need 10",
            picked.len(),
            opts.g_min,
            opts.g_max
        )));
    }
    let x: Vec<f64> = picked.iter().map(|r| r.energy_gap.ln()).collect();
    let y: Vec<f64> = picked.iter().map(|r| r.dual_grad_norm.ln()).collect();
    let (slope, intercept, residual) = tls_line(&x, &y);
    let alpha_raw = 1.0 - slope;
    let alpha = alpha_raw.clamp(f64::MIN_POSITIVE, 1.0);
    let c = (-intercept).exp();
    let violations = picked
        .iter()
        .filter(|r| r.energy_gap.powf(1.0 - alpha) > opts.slack * c * r.dual_grad_norm)
        .count();
    Ok(LojaFit {
        alpha,
        c,
        window: [opts.g_min, opts.g_max],
        residual,
        points: picked.len(),
        violations,
        alpha_raw,
    })
}

/// `(t, H(t))` with `H = gap^α`; gaps in `[−GAP_FLOOR, 0]` map to 0.
pub fn h_function(trace: &LojaTrace, alpha: f64) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    trace
        .rows
        .iter()
        .enumerate()
        .map(|(row, r)| {
            if r.energy_gap < -GAP_FLOOR {
                Err(Error::NegativeGap {
                    row,
                    gap: r.energy_gap,
                })
            } else {
                Ok((r.t, r.energy_gap.max(0.0).powf(alpha)))
            }
        })
        .collect()
}

/// Trapezoid rule for `∫_{t0}^{T} ‖∂_tγ‖_{L²(dθ)} dt`.
pub fn l1_velocity(trace: &LojaTrace, t0: f64) -> Result<f64> {
    l1_velocity_between(trace, t0, f64::INFINITY)
}

/// Same integral on `[t0, t1]`, clamped to the end of the trace.
pub fn l1_velocity_between(trace: &LojaTrace, t0: f64, t1: f64) -> Result<f64> {
    let rows = &trace.rows;
    if rows.len() < 2 {
        return Err(Error::InsufficientData("need at least two rows".into()));
    }
    let (first, last) = (rows[0].t, rows[rows.len() - 1].t);
    if !(t0 >= first && t0 <= last) || t1 < t0 {
        return Err(Error::InsufficientData(format!(
            "t0 = {t0} outside trace range [{first}, {last}]"
        )));
    }
    let t1 = t1.min(last);
    let mut total = 0.0;
    for w in rows.windows(2) {
        let (a, b) = (w[0].t.max(t0), w[1].t.min(t1));
        if b <= a {
            continue;
        }
        let lerp = |t: f64| {
            let s = (t - w[0].t) / (w[1].t - w[0].t);
            w[0].vel_l2dtheta + s * (w[1].vel_l2dtheta - w[0].vel_l2dtheta)
        };
        total += 0.5 * (b - a) * (lerp(a) + lerp(b));
    }
    Ok(total)
}

/// Smallest ratio `(H_i − H_{i+1}) / ∫_{t_i}^{t_{i+1}} ‖∂_tγ‖ dt` over rows
/// with positive velocity integral.
pub fn h_decay_constant(trace: &LojaTrace, alpha: f64) -> Result<f64> {
    let h = h_function(trace, alpha)?;
    let mut c = f64::INFINITY;
    for (i, w) in trace.rows.windows(2).enumerate() {
        let v = 0.5 * (w[1].t - w[0].t) * (w[0].vel_l2dtheta + w[1].vel_l2dtheta);
        if v > 0.0 {
            c = c.min((h[i].1 - h[i + 1].1) / v);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    /// `‖Y_{i+1} − Y_i‖_{L²(dθ)}` for consecutive snapshots.
    pub distances: Vec<f64>,
    /// `sup_{j ≥ i} distances[j]`.
    pub tail_sup: Vec<f64>,
    pub tail_decreasing: bool,
}

/// Consecutive snapshot distances in normal-graph coordinates over `reference`.
pub fn cauchy_check(snapshots: &[DiscreteCurve], reference: &TubularData) -> Result<CauchyReport> {
    let graphs = snapshots
        .iter()
        .map(|s| normal_graph(reference, s))
        .collect::<Result<Vec<_>>>()?;
    let mut distances = Vec::with_capacity(graphs.len().saturating_sub(1));
    for w in graphs.windows(2) {
        let d = w[1].as_vector().axpy(-1.0, w[0].as_vector())?;
        distances.push(inner_l2dtheta(&d, &d)?.sqrt());
    }
    let mut tail_sup = distances.clone();
    for i in (0..tail_sup.len().saturating_sub(1)).rev() {
        tail_sup[i] = tail_sup[i].max(tail_sup[i + 1]);
    }
    let tail_decreasing = tail_sup.windows(2).all(|w| w[1] <= w[0]);
    Ok(CauchyReport {
        distances,
        tail_sup,
        tail_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DiffScheme;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};

    fn synthetic(rate: f64) -> LojaTrace {
        let rows = (0..40)
            .map(|i| {
                let t = i as f64 * 0.5 + 5.0;
                LojaRow {
                    t,
                    energy_gap: (-t).exp(),
                    dual_grad_norm: (-rate * t).exp(),
                    vel_l2dtheta: (-rate * t).exp(),
                    length: 1.0,
                }
            })
            .collect();
        LojaTrace::new(rows, 0.0).unwrap()
    }

    #[test]
    fn dual_norm_on_circles() {
        let p = EnergyParams::default();
        let unit = DiscreteCurve::from_fn(2, 128, DiffScheme::Fd4, |t| vec![t.cos(), t.sin()]).unwrap();
        // |γ'| carries the stencil's length factor on the unit circle
        let s1 = DiffScheme::Fd4.symbol(1, 128);
        assert!((dual_grad_norm(&unit, &p) - s1 * TAU.sqrt() / 2.0).abs() < 1e-10);
        let crit = DiscreteCurve::from_fn(2, 128, DiffScheme::Fd4, |t| {
            vec![FRAC_1_SQRT_2 * t.cos(), FRAC_1_SQRT_2 * t.sin()]
        })
        .unwrap();
        assert!(dual_grad_norm(&crit, &p) < 1e-6);
    }

    #[test]
    fn synthetic_power_laws() {
        let fit = fit_alpha(&synthetic(0.5), &FitOptions::default()).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
        assert_eq!(fit.violations, 0);
        let fit = fit_alpha(&synthetic(0.75), &FitOptions::default()).unwrap();
        assert!((fit.alpha - 0.25).abs() < 1e-10);
    }

    #[test]
    fn h_is_gap_power() {
        let tr = synthetic(0.5);
        let h = h_function(&tr, 1.0).unwrap();
        for (r, (_, v)) in tr.rows.iter().zip(&h) {
            assert_eq!(r.energy_gap, *v);
        }
        let h = h_function(&tr, 0.5).unwrap();
        for (r, (_, v)) in tr.rows.iter().zip(&h) {
            assert!((v * v - r.energy_gap).abs() < 1e-12);
        }
        assert!(h_function(&tr, 0.0).is_err());
    }

    #[test]
    fn velocity_integral_of_exponential() {
        let tr = synthetic(0.5);
        let t0 = tr.rows[0].t;
        let t1 = tr.rows.last().unwrap().t;
        let exact = 2.0 * ((-0.5 * t0).exp() - (-0.5 * t1).exp());
        let v = l1_velocity(&tr, t0).unwrap();
        assert!((v - exact).abs() / exact < 0.03);
        assert_eq!(l1_velocity(&tr, t1).unwrap(), 0.0);
        assert!(l1_velocity(&tr, t1 + 1.0).is_err());
    }

    #[test]
    fn negative_gap_rejected() {
        let rows = vec![
            LojaRow { t: 0.0, energy_gap: 1.0, dual_grad_norm: 1.0, vel_l2dtheta: 1.0, length: 1.0 },
            LojaRow { t: 1.0, energy_gap: -1e-9, dual_grad_norm: 1.0, vel_l2dtheta: 1.0, length: 1.0 },
        ];
        assert!(matches!(LojaTrace::new(rows, 0.0), Err(Error::NegativeGap { row: 1, .. })));
    }

    #[test]
    fn too_few_rows() {
        let mut tr = synthetic(0.5);
        tr.rows.truncate(5);
        assert!(matches!(fit_alpha(&tr, &FitOptions::default()), Err(Error::InsufficientData(_))));
    }
}
