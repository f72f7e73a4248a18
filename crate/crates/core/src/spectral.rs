// SPDX-License-Identifier: Apache-2.0

//! Periodic differentiation on the uniform θ-grid, Fourier multipliers and
//! trigonometric interpolation of sampled closed curves.
//!
//! All routines act on row-major `N × dim` buffers, one row per sample.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Periodic differentiation scheme used by every θ-derivative in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// Centered five-point stencil, fourth order.
    #[default]
    Fd4,
    /// Trigonometric (FFT) differentiation with the Nyquist mode zeroed.
    Spectral,
}

impl DiffScheme {
    /// Formal order of accuracy, `None` for spectral differentiation.
    pub fn order(self) -> Option<u32> {
        match self {
            DiffScheme::Fd4 => Some(4),
            DiffScheme::Spectral => None,
        }
    }

    /// Real symbol σ(m) of the first derivative: `D e^{imθ} = i σ(m) e^{imθ}`.
    ///
    /// `m` is a signed wavenumber in `(-N/2, N/2]`.
    pub fn symbol(self, m: i64, samples: usize) -> f64 {
        let h = TAU / samples as f64;
        match self {
            DiffScheme::Fd4 => {
                let x = m as f64 * h;
                (8.0 * x.sin() - (2.0 * x).sin()) / (6.0 * h)
            }
            DiffScheme::Spectral => {
                if 2 * m.unsigned_abs() as usize == samples {
                    0.0
                } else {
                    m as f64
                }
            }
        }
    }

    /// Largest value of `(h σ(m))^4` over the grid, used for explicit step bounds.
    pub(crate) fn max_symbol4_scaled(self) -> f64 {
        match self {
            DiffScheme::Fd4 => {
                // extremum of (8 sin x - sin 2x)/6 sits at cos x = 1 - sqrt(6)/2
                let x = (1.0 - 6f64.sqrt() / 2.0).acos();
                ((8.0 * x.sin() - (2.0 * x).sin()) / 6.0).powi(4)
            }
            DiffScheme::Spectral => std::f64::consts::PI.powi(4),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Signed wavenumber of FFT bin `k` for an `n`-point transform.
#[inline]
pub(crate) fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn fft_component(values: &[f64], dim: usize, c: usize, fwd: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values
        .chunks_exact(dim)
        .map(|row| Complex64::new(row[c], 0.0))
        .collect();
    fwd.process(&mut buf);
    buf
}

/// Applies the real, even Fourier multiplier `mult(m)` to every component.
pub(crate) fn apply_multiplier(values: &[f64], dim: usize, mult: impl Fn(i64) -> f64) -> Vec<f64> {
    let n = values.len() / dim;
    let (fwd, inv) = plans(n);
    let scale: Vec<f64> = (0..n).map(|k| mult(wavenumber(k, n))).collect();
    let mut out = vec![0.0; values.len()];
    for c in 0..dim {
        let mut buf = fft_component(values, dim, c, &fwd);
        for (z, s) in buf.iter_mut().zip(&scale) {
            *z *= *s / n as f64;
        }
        inv.process(&mut buf);
        for (i, z) in buf.iter().enumerate() {
            out[i * dim + c] = z.re;
        }
    }
    out
}

/// Periodic θ-derivative of a row-major `N × dim` buffer.
pub fn diff_theta(values: &[f64], dim: usize, scheme: DiffScheme) -> Vec<f64> {
    let n = values.len() / dim;
    match scheme {
        DiffScheme::Fd4 => {
            let inv12h = n as f64 / (12.0 * TAU);
            let mut out = vec![0.0; values.len()];
            for i in 0..n {
                let ip1 = (i + 1) % n;
                let ip2 = (i + 2) % n;
                let im1 = (i + n - 1) % n;
                let im2 = (i + n - 2) % n;
                for c in 0..dim {
                    out[i * dim + c] = (-values[ip2 * dim + c] + 8.0 * values[ip1 * dim + c]
                        - 8.0 * values[im1 * dim + c]
                        + values[im2 * dim + c])
                        * inv12h;
                }
            }
            out
        }
        DiffScheme::Spectral => {
            let (fwd, inv) = plans(n);
            let mut out = vec![0.0; values.len()];
            for c in 0..dim {
                let mut buf = fft_component(values, dim, c, &fwd);
                for (k, z) in buf.iter_mut().enumerate() {
                    let m = wavenumber(k, n);
                    let s = DiffScheme::Spectral.symbol(m, n) / n as f64;
                    *z = Complex64::new(-z.im * s, z.re * s);
                }
                inv.process(&mut buf);
                for (i, z) in buf.iter().enumerate() {
                    out[i * dim + c] = z.re;
                }
            }
            out
        }
    }
}

/// Band-limited resampling of periodic samples onto a uniform grid of `new_n` points.
///
/// Modes above the new Nyquist frequency are dropped; a source Nyquist mode
/// is split evenly between ±N/2 when upsampling.
pub(crate) fn resample_periodic(values: &[f64], dim: usize, new_n: usize) -> Vec<f64> {
    let n = values.len() / dim;
    if new_n == n {
        return values.to_vec();
    }
    let (fwd, _) = plans(n);
    let (_, inv) = plans(new_n);
    let mut out = vec![0.0; new_n * dim];
    for c in 0..dim {
        let spec = fft_component(values, dim, c, &fwd);
        let mut target = vec![Complex64::new(0.0, 0.0); new_n];
        let half_old = n / 2;
        let half_new = new_n / 2;
        for (k, z) in spec.iter().enumerate() {
            let m = wavenumber(k, n);
            if m.unsigned_abs() as usize == half_old {
                continue;
            }
            let ma = m.unsigned_abs() as usize;
            if ma < half_new {
                let idx = if m >= 0 { m as usize } else { (new_n as i64 + m) as usize };
                target[idx] += *z;
            } else if ma == half_new {
                // both ±N'/2 fold onto the new Nyquist bin
                target[half_new] += *z;
            }
        }
        if new_n > n {
            let nyq = spec[half_old];
            target[half_old] += nyq * 0.5;
            target[new_n - half_old] += nyq * 0.5;
        }
        inv.process(&mut target);
        let s = 1.0 / n as f64;
        for (i, z) in target.iter().enumerate() {
            out[i * dim + c] = z.re * s;
        }
    }
    out
}

/// Trigonometric interpolant of periodic samples, evaluable at any θ.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    dim: usize,
    samples: usize,
    /// `a[m*dim + c]` for m in 0..=N/2
    cos_coef: Vec<f64>,
    /// `b[m*dim + c]` for m in 0..N/2 (b[0] unused)
    sin_coef: Vec<f64>,
}

/// Value and first two θ-derivatives of an interpolant at one parameter.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(values: &[f64], dim: usize) -> Self {
        let n = values.len() / dim;
        let (fwd, _) = plans(n);
        let half = n / 2;
        let mut cos_coef = vec![0.0; (half + 1) * dim];
        let mut sin_coef = vec![0.0; (half + 1) * dim];
        let inv_n = 1.0 / n as f64;
        for c in 0..dim {
            let spec = fft_component(values, dim, c, &fwd);
            cos_coef[c] = spec[0].re * inv_n;
            for m in 1..half {
                cos_coef[m * dim + c] = 2.0 * spec[m].re * inv_n;
                sin_coef[m * dim + c] = -2.0 * spec[m].im * inv_n;
            }
            cos_coef[half * dim + c] = spec[half].re * inv_n;
        }
        Self {
            dim,
            samples: n,
            cos_coef,
            sin_coef,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Position only.
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.accumulate(theta, |m, cm, sm, a, b, c| {
            let _ = m;
            out[c] += a * cm + b * sm;
        });
        out
    }

    /// Position, first and second θ-derivatives.
    pub fn jet(&self, theta: f64) -> Jet {
        let mut value = vec![0.0; self.dim];
        let mut d1 = vec![0.0; self.dim];
        let mut d2 = vec![0.0; self.dim];
        self.accumulate(theta, |m, cm, sm, a, b, c| {
            let mf = m as f64;
            value[c] += a * cm + b * sm;
            d1[c] += mf * (b * cm - a * sm);
            d2[c] -= mf * mf * (a * cm + b * sm);
        });
        Jet { value, d1, d2 }
    }

    /// Antiderivative `∫_0^θ` of a scalar (`dim == 1`) interpolant.
    pub fn integral(&self, theta: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut total = self.cos_coef[0] * theta;
        self.accumulate(theta, |m, cm, sm, a, b, _| {
            if m > 0 {
                let mf = m as f64;
                total += (a * sm - b * (cm - 1.0)) / mf;
            }
        });
        total
    }

    fn accumulate(&self, theta: f64, mut f: impl FnMut(usize, f64, f64, f64, f64, usize)) {
        let half = self.samples / 2;
        let (s1, c1) = theta.sin_cos();
        let (mut cm, mut sm) = (1.0, 0.0);
        for m in 0..=half {
            if m > 0 && m % 32 == 0 {
                // re-anchor the rotation recurrence to keep rounding bounded
                let (s, c) = (m as f64 * theta).sin_cos();
                cm = c;
                sm = s;
            }
            for c in 0..self.dim {
                let a = self.cos_coef[m * self.dim + c];
                let b = if m < half { self.sin_coef[m * self.dim + c] } else { 0.0 };
                f(m, cm, sm, a, b, c);
            }
            let nc = cm * c1 - sm * s1;
            sm = sm * c1 + cm * s1;
            cm = nc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| TAU * i as f64 / n as f64)
    }

    #[test]
    fn fd4_symbol_matches_stencil_on_fourier_mode() {
        let n = 64;
        let m = 5;
        let vals: Vec<f64> = grid(n).map(|t| (m as f64 * t).sin()).collect();
        let d = diff_theta(&vals, 1, DiffScheme::Fd4);
        let s = DiffScheme::Fd4.symbol(m, n);
        for (i, t) in grid(n).enumerate() {
            assert!((d[i] - s * (m as f64 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_is_exact_below_nyquist() {
        let n = 32;
        let vals: Vec<f64> = grid(n)
            .flat_map(|t| [(3.0 * t).cos(), (7.0 * t).sin() + 2.0])
            .collect();
        let d = diff_theta(&vals, 2, DiffScheme::Spectral);
        for (i, t) in grid(n).enumerate() {
            assert!((d[2 * i] + 3.0 * (3.0 * t).sin()).abs() < 1e-12);
            assert!((d[2 * i + 1] - 7.0 * (7.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn fd4_max_symbol_bound() {
        let n = 1024;
        let h = TAU / n as f64;
        let max = (0..=n as i64 / 2)
            .map(|m| (h * DiffScheme::Fd4.symbol(m, n)).powi(4))
            .fold(0.0, f64::max);
        assert!(max <= DiffScheme::Fd4.max_symbol4_scaled() * (1.0 + 1e-12));
        assert!(max >= DiffScheme::Fd4.max_symbol4_scaled() * (1.0 - 1e-3));
    }

    #[test]
    fn interpolant_reproduces_samples_and_derivatives() {
        let n = 32;
        let f = |t: f64| (2.0 * t).cos() + 0.3 * (5.0 * t).sin() + 0.1 * (16.0 * t).cos();
        let vals: Vec<f64> = grid(n).map(f).collect();
        let interp = TrigInterpolant::new(&vals, 1);
        for (i, t) in grid(n).enumerate() {
            assert!((interp.eval(t)[0] - vals[i]).abs() < 1e-13);
        }
        let t = 0.123;
        let jet = interp.jet(t);
        assert!((jet.value[0] - f(t)).abs() < 1e-13);
        let df = -2.0 * (2.0 * t).sin() + 1.5 * (5.0 * t).cos() - 1.6 * (16.0 * t).sin();
        assert!((jet.d1[0] - df).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_of_trig_polynomial() {
        let n = 16;
        let vals: Vec<f64> = grid(n).map(|t| 2.0 + t.cos() + 0.5 * (3.0 * t).sin()).collect();
        let interp = TrigInterpolant::new(&vals, 1);
        let t: f64 = 1.7;
        let exact = 2.0 * t + t.sin() + 0.5 * (1.0 - (3.0 * t).cos()) / 3.0;
        assert!((interp.integral(t) - exact).abs() < 1e-13);
        assert!((interp.integral(TAU) - 2.0 * TAU).abs() < 1e-12);
    }

    #[test]
    fn resampling_is_exact_for_band_limited_data() {
        let f = |t: f64| [t.cos() + 0.2 * (3.0 * t).sin(), (2.0 * t).sin()];
        let coarse: Vec<f64> = grid(32).flat_map(f).collect();
        let fine = resample_periodic(&coarse, 2, 96);
        for (i, t) in grid(96).enumerate() {
            let e = f(t);
            assert!((fine[2 * i] - e[0]).abs() < 1e-13);
            assert!((fine[2 * i + 1] - e[1]).abs() < 1e-13);
        }
        let back = resample_periodic(&fine, 2, 32);
        for (a, b) in back.iter().zip(&coarse) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn multiplier_identity_round_trips() {
        let vals: Vec<f64> = grid(16).map(|t| t.sin() + 0.5).collect();
        let out = apply_multiplier(&vals, 1, |_| 1.0);
        for (a, b) in out.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
