// SPDX-License-Identifier: Apache-2.0

//! Time integration of the elastic flow `∂_t γ = −G`.
//!
//! Steps are accepted only when the energy does not increase by more than
//! `energy_tol`; otherwise `dt` is halved and the step retried.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, DiscreteCurve, NormalField, EPS_REG};
use crate::spectral::{self, DiffScheme, TrigInterpolant};
use crate::variation::{gradient, gradient_from_frame, EnergyParams};

/// Consecutive accepted steps before `dt` is doubled.
pub const GROWTH_STREAK: u64 = 10;

/// Speed ratio `max|γ'|/min|γ'| − 1` above which a step redistributes.
pub const REDISTRIBUTE_TRIGGER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical RK4 on the full velocity.
    Explicit,
    /// Implicit frozen-coefficient fourth-order term, explicit remainder.
    #[default]
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub energy_tol: f64,
    pub redistribute: bool,
    pub stop_grad_tol: f64,
    pub stop_t_max: f64,
    /// Accepted steps between checkpoints, 0 disables them.
    pub checkpoint_every: u64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            dt_init: 1e-3,
            dt_min: 1e-14,
            dt_max: 1e-2,
            energy_tol: 1e-12,
            redistribute: true,
            stop_grad_tol: 1e-6,
            stop_t_max: 100.0,
            checkpoint_every: 0,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        positive("stop_grad_tol", self.stop_grad_tol)?;
        positive("stop_t_max", self.stop_t_max)?;
        if !(self.energy_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "energy_tol must be non-negative, got {}",
                self.energy_tol
            )));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidParameter(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub curve: DiscreteCurve,
    pub t: f64,
    pub energy: f64,
    pub grad_norm_l2ds: f64,
    pub dt_last: f64,
    /// Step size the next attempt starts from.
    pub dt_next: f64,
    pub step_count: u64,
    pub accept_streak: u64,
}

impl FlowState {
    pub fn new(curve: DiscreteCurve, params: &EnergyParams, dt_init: f64) -> Self {
        let m = Measures::of(&curve, params);
        Self {
            curve,
            t: 0.0,
            energy: m.energy,
            grad_norm_l2ds: m.grad_l2ds,
            dt_last: 0.0,
            dt_next: dt_init,
            step_count: 0,
            accept_streak: 0,
        }
    }

    /// Everything except the curve, for checkpoints.
    pub fn record(&self) -> StateRecord {
        StateRecord {
            t: self.t,
            energy: self.energy,
            grad_norm_l2ds: self.grad_norm_l2ds,
            dt_last: self.dt_last,
            dt_next: self.dt_next,
            step_count: self.step_count,
            accept_streak: self.accept_streak,
        }
    }

    pub fn from_record(curve: DiscreteCurve, rec: &StateRecord) -> Self {
        Self {
            curve,
            t: rec.t,
            energy: rec.energy,
            grad_norm_l2ds: rec.grad_norm_l2ds,
            dt_last: rec.dt_last,
            dt_next: rec.dt_next,
            step_count: rec.step_count,
            accept_streak: rec.accept_streak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub energy: f64,
    pub grad_norm_l2ds: f64,
    pub dt_last: f64,
    pub dt_next: f64,
    pub step_count: u64,
    pub accept_streak: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub grad_norm_l2ds: f64,
    pub vel_norm_l2dtheta: f64,
    pub vel_norm_l2ds: f64,
    pub length: f64,
    /// `‖ |γ'| G ‖_{L²(dθ)}`.
    pub dual_grad_norm: f64,
}

impl TraceRow {
    /// Row describing `state`, as `evolve_from` records it.
    pub fn of(state: &FlowState, params: &EnergyParams) -> Self {
        Measures::of(&state.curve, params).row(state.step_count, state.t, state.dt_last)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    /// Largest `E_new − E_old` over accepted steps.
    pub max_energy_increase: f64,
    pub rejected_steps: u64,
}

struct Measures {
    energy: f64,
    grad_l2ds: f64,
    grad_l2dtheta: f64,
    dual: f64,
    length: f64,
}

impl Measures {
    fn of(curve: &DiscreteCurve, params: &EnergyParams) -> Self {
        let frame = curve.frame();
        let dim = curve.dim();
        let h = TAU / curve.samples() as f64;
        let g = gradient_from_frame(&frame, params.lambda);
        let k = frame.curvature();
        let (mut energy, mut l2ds, mut l2dt, mut dual, mut length) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((gi, ki), s) in g.chunks_exact(dim).zip(k.chunks_exact(dim)).zip(&frame.speed) {
            let gg = dot(gi, gi);
            energy += (params.lambda + 0.5 * dot(ki, ki)) * s;
            l2ds += gg * s;
            l2dt += gg;
            dual += gg * s * s;
            length += s;
        }
        Self {
            energy: energy * h,
            grad_l2ds: (l2ds * h).sqrt(),
            grad_l2dtheta: (l2dt * h).sqrt(),
            dual: (dual * h).sqrt(),
            length: length * h,
        }
    }

    fn row(&self, step: u64, t: f64, dt: f64) -> TraceRow {
        TraceRow {
            step,
            t,
            dt,
            energy: self.energy,
            grad_norm_l2ds: self.grad_l2ds,
            vel_norm_l2dtheta: self.grad_l2dtheta,
            vel_norm_l2ds: self.grad_l2ds,
            length: self.length,
            dual_grad_norm: self.dual,
        }
    }
}

/// `V = −G`.
pub fn velocity(curve: &DiscreteCurve, params: &EnergyParams) -> Result<NormalField> {
    Ok(gradient(curve, params).scaled(-1.0))
}

fn velocity_raw(curve: &DiscreteCurve, params: &EnergyParams) -> Vec<f64> {
    let mut v = gradient_from_frame(&curve.frame(), params.lambda);
    v.iter_mut().for_each(|x| *x = -*x);
    v
}

/// Explicit step bound `0.9 (Δθ min|γ'|)⁴ / 8`, rescaled for schemes whose
/// fourth-order symbol is larger than the five-point stencil's.
pub fn explicit_dt_bound(curve: &DiscreteCurve) -> f64 {
    let vmin = curve.speed().into_iter().fold(f64::INFINITY, f64::min);
    let base = 0.9 * (curve.d_theta() * vmin).powi(4) / 8.0;
    base * DiffScheme::Fd4.max_symbol4_scaled() / curve.scheme().max_symbol4_scaled()
}

fn axpy(base: &[f64], a: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(x, d)| x + a * d).collect()
}

fn rk4(curve: &DiscreteCurve, dt: f64, params: &EnergyParams) -> Result<DiscreteCurve> {
    let x0 = curve.points();
    let k1 = velocity_raw(curve, params);
    let c2 = curve.with_points(axpy(x0, 0.5 * dt, &k1))?;
    let k2 = velocity_raw(&c2, params);
    let c3 = curve.with_points(axpy(x0, 0.5 * dt, &k2))?;
    let k3 = velocity_raw(&c3, params);
    let c4 = curve.with_points(axpy(x0, dt, &k3))?;
    let k4 = velocity_raw(&c4, params);
    let x1: Vec<f64> = (0..x0.len())
        .map(|i| x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    curve.with_points(x1)
}

/// Symbol of the frozen leading operator: `c q(m) (q(m) − q(1))` with
/// `q(m) = 4 sin²(mh/2)/h²` the symbol of the three-point `−∂_θ²`.
///
/// The `q(1)` shift leaves the rigid and dilation modes `|m| ≤ 1` explicit.
fn frozen_symbol(m: i64, samples: usize, scheme: DiffScheme, c: f64) -> f64 {
    let q = |m: i64| match scheme {
        DiffScheme::Fd4 => {
            let h = TAU / samples as f64;
            let s = (0.5 * m as f64 * h).sin();
            4.0 * s * s / (h * h)
        }
        DiffScheme::Spectral => (m * m) as f64,
    };
    let qm = q(m);
    (c * qm * (qm - q(1))).max(0.0)
}

fn semi_implicit(curve: &DiscreteCurve, dt: f64, params: &EnergyParams) -> Result<DiscreteCurve> {
    let dim = curve.dim();
    let n = curve.samples();
    let speed = curve.speed();
    let c = speed.iter().map(|s| s.powi(-4)).sum::<f64>() / n as f64;
    let v = velocity_raw(curve, params);
    let scheme = curve.scheme();
    let filtered = spectral::apply_multiplier(&v, dim, |m| {
        1.0 / (1.0 + dt * frozen_symbol(m, n, scheme, c))
    });
    curve.with_points(axpy(curve.points(), dt, &filtered))
}

fn advance(curve: &DiscreteCurve, dt: f64, scheme: Scheme, params: &EnergyParams) -> Result<DiscreteCurve> {
    match scheme {
        Scheme::Explicit => rk4(curve, dt, params),
        Scheme::SemiImplicit => semi_implicit(curve, dt, params),
    }
}

fn speed_ratio(curve: &DiscreteCurve) -> f64 {
    let s = curve.speed();
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi / lo
}

/// One accepted step of the flow.
pub fn step(state: &FlowState, config: &StepperConfig, params: &EnergyParams) -> Result<FlowState> {
    step_counting(state, config, params).map(|(s, _)| s)
}

fn step_counting(
    state: &FlowState,
    config: &StepperConfig,
    params: &EnergyParams,
) -> Result<(FlowState, u64)> {
    let mut dt = state.dt_next.min(config.dt_max);
    if config.scheme == Scheme::Explicit {
        dt = dt.min(explicit_dt_bound(&state.curve));
    }
    let mut rejected = 0;
    loop {
        if dt < config.dt_min {
            return Err(Error::StepFailure {
                dt_min: config.dt_min,
                t: state.t,
            });
        }
        if let Ok(cand) = advance(&state.curve, dt, config.scheme, params) {
            let admissible = |e: f64| e - state.energy <= config.energy_tol;
            let mut chosen = None;
            if config.redistribute && speed_ratio(&cand) - 1.0 > REDISTRIBUTE_TRIGGER {
                if let Ok(r) = tangential_redistribute(&cand) {
                    let m = Measures::of(&r, params);
                    if admissible(m.energy) {
                        chosen = Some((r, m));
                    }
                }
            }
            if chosen.is_none() {
                let m = Measures::of(&cand, params);
                if admissible(m.energy) {
                    chosen = Some((cand, m));
                }
            }
            if let Some((curve, m)) = chosen {
                if m.energy.is_finite() {
                    let mut streak = state.accept_streak + 1;
                    let mut dt_next = dt;
                    if streak >= GROWTH_STREAK {
                        dt_next = (2.0 * dt).min(config.dt_max);
                        streak = 0;
                    }
                    let next = FlowState {
                        curve,
                        t: state.t + dt,
                        energy: m.energy,
                        grad_norm_l2ds: m.grad_l2ds,
                        dt_last: dt,
                        dt_next,
                        step_count: state.step_count + 1,
                        accept_streak: streak,
                    };
                    return Ok((next, rejected));
                }
            }
        }
        rejected += 1;
        dt *= 0.5;
    }
}

/// Receives every accepted state together with its trace row.
pub trait FlowObserver {
    fn on_step(&mut self, state: &FlowState, row: &TraceRow) -> Result<()>;

    /// Checked after every accepted step; `true` ends the flow unconverged.
    fn stop_requested(&self) -> bool {
        false
    }
}

impl<F: FnMut(&FlowState, &TraceRow) -> Result<()>> FlowObserver for F {
    fn on_step(&mut self, state: &FlowState, row: &TraceRow) -> Result<()> {
        self(state, row)
    }
}

pub fn evolve(
    initial: DiscreteCurve,
    config: &StepperConfig,
    params: &EnergyParams,
) -> Result<(FlowState, FlowTrace)> {
    config.validate()?;
    let state = FlowState::new(initial, params, config.dt_init);
    evolve_from(state, config, params, &mut |_: &FlowState, _: &TraceRow| Ok(()))
}

/// Continues a flow from `state`. The first trace row describes `state`
/// itself; the observer is not called for it.
pub fn evolve_from(
    mut state: FlowState,
    config: &StepperConfig,
    params: &EnergyParams,
    observer: &mut dyn FlowObserver,
) -> Result<(FlowState, FlowTrace)> {
    config.validate()?;
    params.validate()?;
    let mut trace = FlowTrace::default();
    let m = Measures::of(&state.curve, params);
    trace.rows.push(m.row(state.step_count, state.t, state.dt_last));
    loop {
        if state.grad_norm_l2ds < config.stop_grad_tol {
            trace.converged = true;
            break;
        }
        if state.t >= config.stop_t_max {
            break;
        }
        let (next, rejected) = step_counting(&state, config, params)?;
        trace.rejected_steps += rejected;
        trace.max_energy_increase = if trace.rows.len() == 1 {
            next.energy - state.energy
        } else {
            trace.max_energy_increase.max(next.energy - state.energy)
        };
        let row = Measures::of(&next.curve, params).row(next.step_count, next.t, next.dt_last);
        observer.on_step(&next, &row)?;
        trace.rows.push(row);
        state = next;
        if observer.stop_requested() {
            break;
        }
    }
    Ok((state, trace))
}

/// Reparametrizes by arclength of the trigonometric interpolant, yielding
/// (nearly) constant discrete speed. The sample at θ = 0 stays fixed.
pub fn tangential_redistribute(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let dim = curve.dim();
    let n = curve.samples();
    let interp = TrigInterpolant::new(curve.points(), dim);
    let d = spectral::diff_theta(curve.points(), dim, DiffScheme::Spectral);
    let speed: Vec<f64> = d.chunks_exact(dim).map(norm).collect();
    if let Some(i) = speed.iter().position(|&s| !(s >= EPS_REG)) {
        return Err(Error::DegenerateCurve(format!(
            "interpolant speed {:e} at sample {i}",
            speed[i]
        )));
    }
    let arc = TrigInterpolant::new(&speed, 1);
    let total = arc.integral(TAU);
    let mut points = Vec::with_capacity(n * dim);
    points.extend_from_slice(curve.point(0));
    let mut lo = 0.0;
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        let mut hi = TAU;
        let mut theta = lo + (target - arc.integral(lo)) / arc.eval(lo)[0];
        for _ in 0..100 {
            if !(theta > lo && theta < hi) {
                theta = 0.5 * (lo + hi);
            }
            let f = arc.integral(theta) - target;
            if f.abs() <= 4.0 * f64::EPSILON * total {
                break;
            }
            if f < 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let s = arc.eval(theta)[0];
            theta = if s > 0.0 { theta - f / s } else { f64::NAN };
            if hi - lo < 1e-15 {
                break;
            }
        }
        if !(theta > lo && theta < hi) {
            theta = 0.5 * (lo + hi);
        }
        points.extend(interp.eval(theta));
        lo = theta;
    }
    curve.with_points(points)
}

/// `max|γ'| / min|γ'| − 1`; zero on uniform grids.
pub fn speed_nonuniformity(curve: &DiscreteCurve) -> f64 {
    speed_ratio(curve) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn circle(r: f64, n: usize, scheme: DiffScheme) -> DiscreteCurve {
        DiscreteCurve::from_fn(2, n, scheme, |t| vec![r * t.cos(), r * t.sin()]).unwrap()
    }

    fn ellipse(a: f64, b: f64, n: usize) -> DiscreteCurve {
        DiscreteCurve::from_fn(2, n, DiffScheme::Fd4, |t| vec![a * t.cos(), b * t.sin()]).unwrap()
    }

    fn mean_radius(c: &DiscreteCurve) -> f64 {
        c.points().chunks_exact(2).map(norm).sum::<f64>() / c.samples() as f64
    }

    fn radial_rhs(r: f64) -> f64 {
        0.5 / r.powi(3) - 1.0 / r
    }

    #[test]
    fn velocity_signs_on_circles() {
        let p = EnergyParams::default();
        let crit = circle(FRAC_1_SQRT_2, 128, DiffScheme::Fd4);
        assert!(velocity(&crit, &p).unwrap().max_norm() < 1e-6);
        for (r, sign) in [(1.0, -1.0), (0.5, 1.0)] {
            let c = circle(r, 128, DiffScheme::Fd4);
            let v = velocity(&c, &p).unwrap();
            for i in 0..c.samples() {
                let radial = dot(v.at(i), c.point(i)) / r;
                assert!((radial - radial_rhs(r)).abs() < 1e-8);
                assert!(radial * sign > 0.0);
            }
        }
    }

    #[test]
    fn explicit_step_matches_radial_rk4() {
        let p = EnergyParams::default();
        let dt = 1e-4;
        let c = circle(1.0, 128, DiffScheme::Fd4);
        let next = rk4(&c, dt, &p).unwrap();
        let f = radial_rhs;
        let r0 = 1.0;
        let k1 = f(r0);
        let k2 = f(r0 + 0.5 * dt * k1);
        let k3 = f(r0 + 0.5 * dt * k2);
        let k4 = f(r0 + dt * k3);
        let r1 = r0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        assert!((mean_radius(&next) - r1).abs() < 1e-8);
    }

    #[test]
    fn semi_implicit_is_stable_far_beyond_cfl() {
        let p = EnergyParams::default();
        let c = circle(1.0, 128, DiffScheme::Fd4);
        let dt = 100.0 * explicit_dt_bound(&c);
        let mut state = FlowState::new(c, &p, dt);
        let cfg = StepperConfig {
            dt_init: dt,
            dt_max: dt,
            dt_min: dt * 0.99,
            ..StepperConfig::default()
        };
        for _ in 0..50 {
            let next = step(&state, &cfg, &p).unwrap();
            assert!(next.energy <= state.energy);
            assert_eq!(next.dt_last, dt);
            state = next;
        }
    }

    #[test]
    fn explicit_step_from_critical_circle_is_still() {
        let p = EnergyParams::default();
        let c = circle(FRAC_1_SQRT_2, 64, DiffScheme::Fd4);
        let cfg = StepperConfig {
            scheme: Scheme::Explicit,
            ..StepperConfig::default()
        };
        let state = FlowState::new(c.clone(), &p, cfg.dt_init);
        let next = step(&state, &cfg, &p).unwrap();
        let diff = next
            .curve
            .points()
            .iter()
            .zip(c.points())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8);
    }

    #[test]
    fn redistribution_of_uniform_circle_is_identity() {
        let c = circle(1.3, 64, DiffScheme::Fd4);
        let r = tangential_redistribute(&c).unwrap();
        for (a, b) in r.points().iter().zip(c.points()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn redistribution_equalizes_ellipse_speed() {
        let p = EnergyParams::default();
        let c = ellipse(1.2, 0.8, 256);
        assert!(speed_nonuniformity(&c) > 0.4);
        let r = tangential_redistribute(&c).unwrap();
        let spectral = r.rescheme(DiffScheme::Spectral).unwrap();
        assert!(speed_nonuniformity(&spectral) <= 1e-6, "{}", speed_nonuniformity(&spectral));
        let c = ellipse(1.2, 0.8, 512);
        let r = tangential_redistribute(&c).unwrap();
        assert!(speed_nonuniformity(&r) <= 1e-6, "{}", speed_nonuniformity(&r));
        let energy = |c: &DiscreteCurve| {
            crate::variation::elastic_energy(&c.rescheme(DiffScheme::Spectral).unwrap(), &p)
        };
        let (e0, e1) = (energy(&c), energy(&r));
        assert!(((e1 - e0) / e0).abs() <= 1e-8, "{}", (e1 - e0) / e0);
    }

    #[test]
    fn fd4_energy_gap_after_redistribution_shrinks_at_fourth_order() {
        let p = EnergyParams::default();
        let gap = |n| {
            let c = ellipse(1.2, 0.8, n);
            let r = tangential_redistribute(&c).unwrap();
            let e0 = crate::variation::elastic_energy(&c, &p);
            (crate::variation::elastic_energy(&r, &p) - e0).abs() / e0
        };
        let (g1, g2) = (gap(256), gap(512));
        let order = (g1 / g2).log2();
        assert!((order - 4.0).abs() < 0.3, "{order}");
    }

    #[test]
    fn critical_circle_stops_at_once() {
        let p = EnergyParams::default();
        let (state, trace) = evolve(
            circle(FRAC_1_SQRT_2, 256, DiffScheme::Fd4),
            &StepperConfig::default(),
            &p,
        )
        .unwrap();
        assert!(trace.converged);
        assert!(state.step_count <= 1);
        assert!((state.energy - 2.0 * 2f64.sqrt() * PI).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let mut cfg = StepperConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt_init = 1.0;
        assert!(cfg.validate().is_err());
    }
}
