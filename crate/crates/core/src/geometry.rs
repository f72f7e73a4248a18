// SPDX-License-Identifier: Apache-2.0

//! Discrete closed curves on a uniform periodic θ-grid and the differential
//! operators living on them: arclength derivative, unit tangent, curvature
//! vector, the normal connection ∇⊥ and ds-weighted quadrature.
//!
//! A curve with `N` samples stores `γ(θ_i)` for `θ_i = 2πi/N`. Closedness is
//! structural: indices wrap and the endpoint is never duplicated.

use std::f64::consts::TAU;

use crate::error::{shape_mismatch, Error, Result};
use crate::spectral::{self, DiffScheme};

/// Regularity floor on the discrete speed `|γ'(θ_i)|`.
pub const EPS_REG: f64 = 1e-12;

/// Default bound on `|⟨X_i, τ_i⟩| / |X_i|` for a [`NormalField`].
pub const TOL_PERP: f64 = 1e-10;

/// Smallest admissible number of samples.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    dim: usize,
    samples: usize,
    points: Vec<f64>,
    scheme: DiffScheme,
}

impl DiscreteCurve {
    /// Builds a curve from row-major `N × dim` samples using the default scheme.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        Self::with_scheme(dim, points, DiffScheme::default())
    }

    pub fn with_scheme(dim: usize, points: Vec<f64>, scheme: DiffScheme) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidCurve(format!("ambient dimension {dim} < 2")));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidCurve(format!(
                "{} coordinates do not split into rows of {dim}",
                points.len()
            )));
        }
        let samples = points.len() / dim;
        if samples < MIN_SAMPLES || !samples.is_multiple_of(2) {
            return Err(Error::InvalidCurve(format!(
                "sample count {samples} must be even and at least {MIN_SAMPLES}"
            )));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "non-finite coordinate at sample {}",
                i / dim
            )));
        }
        let curve = Self {
            dim,
            samples,
            points,
            scheme,
        };
        let speed = curve.speed();
        let (imin, vmin) = speed
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        if vmin < EPS_REG {
            return Err(Error::DegenerateCurve(format!(
                "|γ'| = {vmin:e} at sample {imin}"
            )));
        }
        Ok(curve)
    }

    /// Samples `f(θ)` on the uniform grid.
    pub fn from_fn(
        dim: usize,
        samples: usize,
        scheme: DiffScheme,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(dim * samples);
        for i in 0..samples {
            let p = f(TAU * i as f64 / samples as f64);
            if p.len() != dim {
                return Err(shape_mismatch(dim, p.len()));
            }
            points.extend(p);
        }
        Self::with_scheme(dim, points, scheme)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn scheme(&self) -> DiffScheme {
        self.scheme
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }

    /// Grid spacing `Δθ = 2π/N`.
    pub fn d_theta(&self) -> f64 {
        TAU / self.samples as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.d_theta() * i as f64
    }

    /// Same points, different differentiation scheme.
    pub fn rescheme(&self, scheme: DiffScheme) -> Result<Self> {
        Self::with_scheme(self.dim, self.points.clone(), scheme)
    }

    /// New curve on the same grid and scheme.
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        if points.len() != self.points.len() {
            return Err(shape_mismatch(self.points.len(), points.len()));
        }
        Self::with_scheme(self.dim, points, self.scheme)
    }

    /// `γ + h X`.
    pub fn displaced(&self, field: &VectorField, h: f64) -> Result<Self> {
        self.check_field(field.dim(), field.samples())?;
        let pts = self
            .points
            .iter()
            .zip(field.values())
            .map(|(p, v)| p + h * v)
            .collect();
        Self::with_scheme(self.dim, pts, self.scheme)
    }

    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(shape_mismatch(self.dim, offset.len()));
        }
        let mut pts = self.points.clone();
        for row in pts.chunks_exact_mut(self.dim) {
            for (x, c) in row.iter_mut().zip(offset) {
                *x += c;
            }
        }
        Self::with_scheme(self.dim, pts, self.scheme)
    }

    /// θ-derivative `γ'` of the samples.
    pub fn d_curve(&self) -> Vec<f64> {
        spectral::diff_theta(&self.points, self.dim, self.scheme)
    }

    /// Discrete speed `|γ'(θ_i)|`.
    pub fn speed(&self) -> Vec<f64> {
        self.d_curve().chunks_exact(self.dim).map(norm).collect()
    }

    /// Total length `∫ ds`.
    pub fn length(&self) -> f64 {
        self.speed().iter().sum::<f64>() * self.d_theta()
    }

    pub(crate) fn check_field(&self, dim: usize, samples: usize) -> Result<()> {
        if samples != self.samples || dim != self.dim {
            return Err(shape_mismatch(
                format!("{} x {}", self.samples, self.dim),
                format!("{samples} x {dim}"),
            ));
        }
        Ok(())
    }

    pub(crate) fn frame(&self) -> Frame {
        Frame::new(self)
    }
}

/// Per-sample derivative data shared by the differential operators.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub dim: usize,
    pub scheme: DiffScheme,
    pub speed: Vec<f64>,
    pub tangent: Vec<f64>,
}

impl Frame {
    fn new(curve: &DiscreteCurve) -> Self {
        let dim = curve.dim;
        let d = curve.d_curve();
        let speed: Vec<f64> = d.chunks_exact(dim).map(norm).collect();
        let mut tangent = d;
        for (row, s) in tangent.chunks_exact_mut(dim).zip(&speed) {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        Self {
            dim,
            scheme: curve.scheme,
            speed,
            tangent,
        }
    }

    pub fn tau(&self, i: usize) -> &[f64] {
        &self.tangent[i * self.dim..(i + 1) * self.dim]
    }

    /// `∂_s` of a row-major buffer with `width` components per sample.
    pub fn deriv_s(&self, values: &[f64], width: usize) -> Vec<f64> {
        let mut out = spectral::diff_theta(values, width, self.scheme);
        for (row, s) in out.chunks_exact_mut(width).zip(&self.speed) {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        out
    }

    /// Removes the tangential component in place.
    pub fn project_normal(&self, values: &mut [f64]) {
        for (row, tau) in values
            .chunks_exact_mut(self.dim)
            .zip(self.tangent.chunks_exact(self.dim))
        {
            let p = dot(row, tau);
            for (x, t) in row.iter_mut().zip(tau) {
                *x -= p * t;
            }
        }
    }

    /// Normal projection of `∂_s`.
    pub fn nabla_perp(&self, values: &[f64]) -> Vec<f64> {
        let mut out = self.deriv_s(values, self.dim);
        self.project_normal(&mut out);
        out
    }

    pub fn curvature(&self) -> Vec<f64> {
        self.nabla_perp(&self.tangent)
    }

    /// ds weights `|γ'_i| Δθ`.
    pub fn weights(&self) -> Vec<f64> {
        let h = TAU / self.speed.len() as f64;
        self.speed.iter().map(|s| s * h).collect()
    }
}

/// Vector field sampled along a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(shape_mismatch(format!("multiple of {dim}"), values.len()));
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(dim: usize, samples: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim * samples],
        }
    }

    /// Constant vector at every sample.
    pub fn constant(samples: usize, v: &[f64]) -> Self {
        Self {
            dim: v.len(),
            values: v.iter().copied().cycle().take(v.len() * samples).collect(),
        }
    }

    pub fn from_fn(curve: &DiscreteCurve, f: impl Fn(usize, f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(curve.dim() * curve.samples());
        for i in 0..curve.samples() {
            let v = f(i, curve.theta(i));
            if v.len() != curve.dim() {
                return Err(shape_mismatch(curve.dim(), v.len()));
            }
            values.extend(v);
        }
        Ok(Self {
            dim: curve.dim(),
            values,
        })
    }

    pub(crate) fn from_raw(dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % dim, 0);
        Self { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &VectorField) -> Result<Self> {
        if other.dim != self.dim || other.values.len() != self.values.len() {
            return Err(shape_mismatch(self.values.len(), other.values.len()));
        }
        Ok(Self {
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    /// Pointwise `max_i |X_i|`.
    pub fn max_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .map(norm)
            .fold(0.0, f64::max)
    }

    /// Pointwise squared norms as a scalar field.
    pub fn norm_squared(&self) -> ScalarField {
        ScalarField::from_raw(self.values.chunks_exact(self.dim).map(|v| dot(v, v)).collect())
    }
}

/// Vector field with (numerically) zero tangential component.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField(VectorField);

impl NormalField {
    /// Validates normality with relative tolerance `tol`.
    pub fn try_new(field: VectorField, curve: &DiscreteCurve, tol: f64) -> Result<Self> {
        curve.check_field(field.dim(), field.samples())?;
        let frame = curve.frame();
        for (i, v) in field.values.chunks_exact(field.dim).enumerate() {
            let t = dot(v, frame.tau(i)).abs();
            if t > tol * norm(v) {
                return Err(Error::NotNormal {
                    index: i,
                    tangential: t,
                    tol,
                });
            }
        }
        Ok(Self(field))
    }

    /// Orthogonal projection of `field` onto the normal bundle.
    pub fn project(field: &VectorField, curve: &DiscreteCurve) -> Result<Self> {
        curve.check_field(field.dim(), field.samples())?;
        let frame = curve.frame();
        let mut values = field.values.clone();
        frame.project_normal(&mut values);
        Ok(Self(VectorField::from_raw(field.dim, values)))
    }

    pub(crate) fn from_raw(dim: usize, values: Vec<f64>) -> Self {
        Self(VectorField::from_raw(dim, values))
    }

    pub fn zeros(curve: &DiscreteCurve) -> Self {
        Self(VectorField::zeros(curve.dim(), curve.samples()))
    }

    pub fn as_vector(&self) -> &VectorField {
        &self.0
    }

    pub fn into_vector(self) -> VectorField {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn samples(&self) -> usize {
        self.0.samples()
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        self.0.at(i)
    }

    pub fn max_norm(&self) -> f64 {
        self.0.max_norm()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.scaled(a))
    }
}

impl AsRef<VectorField> for NormalField {
    fn as_ref(&self) -> &VectorField {
        &self.0
    }
}

impl AsRef<VectorField> for VectorField {
    fn as_ref(&self) -> &VectorField {
        self
    }
}

/// Scalar function sampled along a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(samples: usize, c: f64) -> Self {
        Self {
            values: vec![c; samples],
        }
    }

    pub fn from_fn(curve: &DiscreteCurve, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            values: (0..curve.samples()).map(|i| f(i, curve.theta(i))).collect(),
        }
    }

    pub fn samples(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Something that can be differentiated along a curve.
pub trait SampledField: Sized {
    fn width(&self) -> usize;
    fn raw(&self) -> &[f64];
    fn rebuild(&self, values: Vec<f64>) -> Self;
}

impl SampledField for VectorField {
    fn width(&self) -> usize {
        self.dim
    }
    fn raw(&self) -> &[f64] {
        &self.values
    }
    fn rebuild(&self, values: Vec<f64>) -> Self {
        Self::from_raw(self.dim, values)
    }
}

impl SampledField for ScalarField {
    fn width(&self) -> usize {
        1
    }
    fn raw(&self) -> &[f64] {
        &self.values
    }
    fn rebuild(&self, values: Vec<f64>) -> Self {
        Self::from_raw(values)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit tangent `τ = γ'/|γ'|`.
pub fn tangent(curve: &DiscreteCurve) -> VectorField {
    VectorField::from_raw(curve.dim(), curve.frame().tangent)
}

/// Curvature vector `k = ∂_s τ`, projected onto the normal space.
pub fn curvature(curve: &DiscreteCurve) -> NormalField {
    NormalField::from_raw(curve.dim(), curve.frame().curvature())
}

/// Arclength derivative `∂_s = |γ'|^{-1} ∂_θ` of a sampled field.
pub fn deriv_s<F: SampledField>(field: &F, curve: &DiscreteCurve) -> Result<F> {
    let width = field.width();
    if field.raw().len() != width * curve.samples() {
        return Err(shape_mismatch(width * curve.samples(), field.raw().len()));
    }
    Ok(field.rebuild(curve.frame().deriv_s(field.raw(), width)))
}

/// Normal connection `∇⊥X = ∂_s X − ⟨∂_s X, τ⟩τ`.
pub fn nabla_perp(field: &NormalField, curve: &DiscreteCurve) -> Result<NormalField> {
    curve.check_field(field.dim(), field.samples())?;
    Ok(NormalField::from_raw(
        field.dim(),
        curve.frame().nabla_perp(field.values()),
    ))
}

/// `(∇⊥)^m X`.
pub fn nabla_perp_pow(field: &NormalField, curve: &DiscreteCurve, m: usize) -> Result<NormalField> {
    curve.check_field(field.dim(), field.samples())?;
    let frame = curve.frame();
    let mut v = field.values().to_vec();
    for _ in 0..m {
        v = frame.nabla_perp(&v);
    }
    Ok(NormalField::from_raw(field.dim(), v))
}

/// Normal projection `X⊥ = X − ⟨X, τ⟩τ`.
pub fn project_normal(field: &VectorField, curve: &DiscreteCurve) -> Result<NormalField> {
    NormalField::project(field, curve)
}

/// Periodic trapezoid rule `Σ f_i |γ'_i| Δθ`.
pub fn integrate_ds(field: &ScalarField, curve: &DiscreteCurve) -> Result<f64> {
    if field.samples() != curve.samples() {
        return Err(shape_mismatch(curve.samples(), field.samples()));
    }
    let h = curve.d_theta();
    Ok(field
        .values()
        .iter()
        .zip(curve.speed())
        .map(|(f, s)| f * s)
        .sum::<f64>()
        * h)
}

/// `⟨X, Y⟩_{L²(ds)}`.
pub fn inner_l2ds(
    x: &impl AsRef<VectorField>,
    y: &impl AsRef<VectorField>,
    curve: &DiscreteCurve,
) -> Result<f64> {
    let (x, y) = (x.as_ref(), y.as_ref());
    curve.check_field(x.dim(), x.samples())?;
    curve.check_field(y.dim(), y.samples())?;
    let speed = curve.speed();
    Ok(weighted_inner(x.values(), y.values(), x.dim(), &speed) * curve.d_theta())
}

/// `⟨X, Y⟩_{L²(dθ)}`.
pub fn inner_l2dtheta(x: &impl AsRef<VectorField>, y: &impl AsRef<VectorField>) -> Result<f64> {
    let (x, y) = (x.as_ref(), y.as_ref());
    if x.values().len() != y.values().len() || x.dim() != y.dim() {
        return Err(shape_mismatch(x.values().len(), y.values().len()));
    }
    Ok(dot(x.values(), y.values()) * TAU / x.samples() as f64)
}

pub(crate) fn weighted_inner(x: &[f64], y: &[f64], dim: usize, w: &[f64]) -> f64 {
    x.chunks_exact(dim)
        .zip(y.chunks_exact(dim))
        .zip(w)
        .map(|((a, b), w)| w * dot(a, b))
        .sum()
}

/// Band-limited trigonometric resampling onto `samples` uniform nodes.
pub fn resample(curve: &DiscreteCurve, samples: usize) -> Result<DiscreteCurve> {
    if samples < MIN_SAMPLES || !samples.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "resample target {samples} must be even and at least {MIN_SAMPLES}"
        )));
    }
    let pts = spectral::resample_periodic(curve.points(), curve.dim(), samples);
    DiscreteCurve::with_scheme(curve.dim(), pts, curve.scheme())
}
