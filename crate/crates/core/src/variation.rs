// SPDX-License-Identifier: Apache-2.0

//! Elastic energy `E_λ(γ) = ∫ λ + |k|²/2 ds`, its L²(ds) gradient, finite
//! difference oracles and dense operators on the discrete normal bundle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::geometry::{dot, norm, weighted_inner, DiscreteCurve, Frame, NormalField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub lambda: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

impl EnergyParams {
    pub fn new(lambda: f64) -> Result<Self> {
        let p = Self { lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )))
        }
    }
}

fn energy_from_frame(frame: &Frame, lambda: f64) -> f64 {
    let k = frame.curvature();
    let h = std::f64::consts::TAU / frame.speed.len() as f64;
    k.chunks_exact(frame.dim)
        .zip(&frame.speed)
        .map(|(k, s)| (lambda + 0.5 * dot(k, k)) * s)
        .sum::<f64>()
        * h
}

pub fn elastic_energy(curve: &DiscreteCurve, params: &EnergyParams) -> f64 {
    energy_from_frame(&curve.frame(), params.lambda)
}

pub(crate) fn gradient_from_frame(frame: &Frame, lambda: f64) -> Vec<f64> {
    let dim = frame.dim;
    let k = frame.curvature();
    let nk = frame.nabla_perp(&k);
    let mut g = frame.nabla_perp(&nk);
    for (gi, ki) in g.chunks_exact_mut(dim).zip(k.chunks_exact(dim)) {
        let c = 0.5 * dot(ki, ki) - lambda;
        for (a, b) in gi.iter_mut().zip(ki) {
            *a += c * b;
        }
    }
    // the sum of normal fields is normal; re-project to clear rounding
    frame.project_normal(&mut g);
    g
}

/// L²(ds) gradient `G = ∇⊥∇⊥k + |k|²k/2 − λk`.
pub fn gradient(curve: &DiscreteCurve, params: &EnergyParams) -> NormalField {
    NormalField::from_raw(
        curve.dim(),
        gradient_from_frame(&curve.frame(), params.lambda),
    )
}

/// `‖G‖_{L²(ds)}`.
pub fn gradient_norm_l2ds(curve: &DiscreteCurve, params: &EnergyParams) -> f64 {
    let frame = curve.frame();
    let g = gradient_from_frame(&frame, params.lambda);
    weighted_inner(&g, &g, curve.dim(), &frame.weights()).sqrt()
}

/// `δE_γ(X) = ⟨G, X⊥⟩_{L²(ds)}`.
pub fn first_variation(
    curve: &DiscreteCurve,
    field: &impl AsRef<VectorField>,
    params: &EnergyParams,
) -> Result<f64> {
    let x = field.as_ref();
    curve.check_field(x.dim(), x.samples())?;
    let frame = curve.frame();
    let g = gradient_from_frame(&frame, params.lambda);
    Ok(weighted_inner(&g, x.values(), curve.dim(), &frame.weights()))
}

/// Central difference `[E(γ + hX) − E(γ − hX)] / 2h`.
pub fn fd_directional(
    curve: &DiscreteCurve,
    field: &impl AsRef<VectorField>,
    params: &EnergyParams,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("FD step must be positive, got {h}")));
    }
    let x = field.as_ref();
    let plus = curve.displaced(x, h)?;
    let minus = curve.displaced(x, -h)?;
    Ok((elastic_energy(&plus, params) - elastic_energy(&minus, params)) / (2.0 * h))
}

/// Pointwise orthonormal frames `{ν_i^1, …, ν_i^{n−1}}` of the normal spaces.
///
/// The first frame comes from Gram–Schmidt on the ambient axes; every later
/// frame is the previous one projected onto the new normal space and
/// re-orthonormalized, which keeps it continuous along the curve.
#[derive(Debug, Clone)]
pub struct NormalBasis {
    dim: usize,
    samples: usize,
    /// `vectors[((i * (dim-1)) + j) * dim ..]` is `ν_i^j`.
    vectors: Vec<f64>,
}

impl NormalBasis {
    pub fn new(curve: &DiscreteCurve) -> Self {
        let frame = curve.frame();
        let (dim, n) = (curve.dim(), curve.samples());
        let per = dim - 1;
        let mut vectors = vec![0.0; n * per * dim];

        let orthonormalize = |cands: Vec<Vec<f64>>, tau: &[f64], take: usize| -> Vec<Vec<f64>> {
            let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(take);
            let mut pool = cands;
            while chosen.len() < take {
                // residual after removing τ and the vectors already chosen
                let residuals: Vec<Vec<f64>> = pool
                    .iter()
                    .map(|v| {
                        let mut r = v.clone();
                        let p = dot(&r, tau);
                        r.iter_mut().zip(tau).for_each(|(x, t)| *x -= p * t);
                        for c in &chosen {
                            let p = dot(&r, c);
                            r.iter_mut().zip(c).for_each(|(x, t)| *x -= p * t);
                        }
                        r
                    })
                    .collect();
                let best = residuals
                    .iter()
                    .enumerate()
                    .max_by(|a, b| norm(a.1).total_cmp(&norm(b.1)))
                    .map(|(i, _)| i)
                    .unwrap();
                let mut r = residuals[best].clone();
                let nr = norm(&r);
                r.iter_mut().for_each(|x| *x /= nr);
                chosen.push(r);
                pool.remove(best);
            }
            chosen
        };

        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|a| (0..dim).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut prev = orthonormalize(axes, frame.tau(0), per);
        for i in 0..n {
            let tau = frame.tau(i);
            let cur = if i == 0 {
                prev.clone()
            } else {
                // ordered Gram–Schmidt of the transported frame
                let mut out: Vec<Vec<f64>> = Vec::with_capacity(per);
                for v in &prev {
                    let mut r = v.clone();
                    let p = dot(&r, tau);
                    r.iter_mut().zip(tau).for_each(|(x, t)| *x -= p * t);
                    for c in &out {
                        let p = dot(&r, c);
                        r.iter_mut().zip(c).for_each(|(x, t)| *x -= p * t);
                    }
                    let nr = norm(&r);
                    r.iter_mut().for_each(|x| *x /= nr);
                    out.push(r);
                }
                out
            };
            for (j, v) in cur.iter().enumerate() {
                let off = (i * per + j) * dim;
                vectors[off..off + dim].copy_from_slice(v);
            }
            prev = cur;
        }
        Self {
            dim,
            samples: n,
            vectors,
        }
    }

    /// Number of basis fields `M = N (n − 1)`.
    pub fn size(&self) -> usize {
        self.samples * (self.dim - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Sample index of basis field `a`.
    pub fn sample_of(&self, a: usize) -> usize {
        a / (self.dim - 1)
    }

    pub fn vector(&self, a: usize) -> &[f64] {
        &self.vectors[a * self.dim..(a + 1) * self.dim]
    }

    /// Basis field `a`: the unit normal `ν_i^j` at one sample, zero elsewhere.
    pub fn field(&self, a: usize) -> NormalField {
        let mut v = vec![0.0; self.samples * self.dim];
        let i = self.sample_of(a);
        v[i * self.dim..(i + 1) * self.dim].copy_from_slice(self.vector(a));
        NormalField::from_raw(self.dim, v)
    }

    /// Frame coordinates `⟨X_i, ν_i^j⟩` of a field.
    pub fn coords(&self, field: &impl AsRef<VectorField>) -> Result<Vec<f64>> {
        let x = field.as_ref();
        if x.dim() != self.dim || x.samples() != self.samples {
            return Err(shape_mismatch(
                format!("{} x {}", self.samples, self.dim),
                format!("{} x {}", x.samples(), x.dim()),
            ));
        }
        Ok((0..self.size())
            .map(|a| dot(x.at(self.sample_of(a)), self.vector(a)))
            .collect())
    }

    /// Normal field with the given frame coordinates.
    pub fn synthesize(&self, coords: &[f64]) -> Result<NormalField> {
        if coords.len() != self.size() {
            return Err(shape_mismatch(self.size(), coords.len()));
        }
        let mut v = vec![0.0; self.samples * self.dim];
        for (a, c) in coords.iter().enumerate() {
            let i = self.sample_of(a);
            for (x, b) in v[i * self.dim..(i + 1) * self.dim].iter_mut().zip(self.vector(a)) {
                *x += c * b;
            }
        }
        Ok(NormalField::from_raw(self.dim, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Hessian,
    IdPlusNabla4,
}

/// Dense operator on the discrete normal bundle, entries `A_ab = ⟨T b_b, b_a⟩_{L²(ds)}`.
///
/// The ds inner product in frame coordinates is the diagonal matrix
/// `W = diag(|γ'_i| Δθ)`; spectra are those of `A x = μ W x`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    matrix: DMatrix<f64>,
    weights: Vec<f64>,
    basis: NormalBasis,
    symmetry_defect: f64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl OperatorMatrix {
    fn assemble(kind: OperatorKind, raw: DMatrix<f64>, weights: Vec<f64>, basis: NormalBasis) -> Self {
        let skew = &raw - raw.transpose();
        let symmetry_defect = inf_norm(&skew);
        let matrix = (&raw + raw.transpose()) * 0.5;
        Self {
            kind,
            matrix,
            weights,
            basis,
            symmetry_defect,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Symmetrized matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Diagonal of the ds mass matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &NormalBasis {
        &self.basis
    }

    /// `‖A − Aᵀ‖_∞` of the matrix before symmetrization.
    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    /// `‖A‖_∞` of the symmetrized matrix.
    pub fn norm_inf(&self) -> f64 {
        inf_norm(&self.matrix)
    }

    /// Spectral norm of the symmetrized matrix.
    pub fn norm2(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, coords: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(coords))
            .iter()
            .copied()
            .collect()
    }

    /// `xᵀAx / xᵀWx`.
    pub fn rayleigh(&self, coords: &[f64]) -> f64 {
        let ax = self.apply(coords);
        let num: f64 = ax.iter().zip(coords).map(|(a, x)| a * x).sum();
        let den: f64 = coords
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        num / den
    }

    fn scaled(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let m = self.size();
        DMatrix::from_fn(m, m, |i, j| self.matrix[(i, j)] * s[i] * s[j])
    }

    /// Eigenvalues of `A x = μ W x`, ascending.
    pub fn generalized_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.scaled())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Eigenpairs of `A x = μ W x`, ascending, eigenvectors W-orthonormal in frame coordinates.
    pub fn generalized_eigen(&self) -> Vec<(f64, Vec<f64>)> {
        let eig = SymmetricEigen::new(self.scaled());
        let s: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut pairs: Vec<(f64, Vec<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(c, &mu)| {
                let v = eig.eigenvectors.column(c);
                (mu, v.iter().zip(&s).map(|(x, s)| x * s).collect())
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }

    /// Solves the operator equation `W^{-1} A x = f` for frame coordinates `x`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.size() {
            return Err(shape_mismatch(self.size(), rhs.len()));
        }
        let b = DVector::from_iterator(
            rhs.len(),
            rhs.iter().zip(&self.weights).map(|(f, w)| f * w),
        );
        self.matrix
            .clone()
            .lu()
            .solve(&b)
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::InvalidParameter("singular operator".into()))
    }
}

/// Probe step `h = 1e−4 (1 + ‖γ‖_∞) Δθ²`.
///
/// Basis fields are single-sample bumps whose curvature scales like `h/Δθ²`;
/// the `Δθ²` factor keeps the probes in the linear regime under refinement.
pub fn hessian_step(curve: &DiscreteCurve) -> f64 {
    let sup = curve.points().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    1e-4 * (1.0 + sup) * curve.d_theta().powi(2)
}

/// Finite-difference Hessian `H_ab = ⟨DG[b_b], b_a⟩_{L²(ds)}` on the normal basis.
///
/// Each column probes `G(γ ± h b_b)`; columns are assembled in parallel.
pub fn hessian_matrix(curve: &DiscreteCurve, params: &EnergyParams) -> Result<OperatorMatrix> {
    hessian_matrix_with_step(curve, params, hessian_step(curve))
}

pub fn hessian_matrix_with_step(
    curve: &DiscreteCurve,
    params: &EnergyParams,
    h: f64,
) -> Result<OperatorMatrix> {
    let basis = NormalBasis::new(curve);
    let weights = sample_weights(curve, &basis);
    let m = basis.size();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let dir = basis.field(b);
            let gp = gradient(&curve.displaced(dir.as_vector(), h)?, params);
            let gm = gradient(&curve.displaced(dir.as_vector(), -h)?, params);
            let dg: Vec<f64> = gp
                .values()
                .iter()
                .zip(gm.values())
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect();
            let dg = VectorField::from_raw(curve.dim(), dg);
            Ok(basis
                .coords(&dg)?
                .iter()
                .zip(&weights)
                .map(|(c, w)| c * w)
                .collect())
        })
        .collect::<Result<_>>()?;
    let raw = DMatrix::from_fn(m, m, |a, b| columns[b][a]);
    Ok(OperatorMatrix::assemble(OperatorKind::Hessian, raw, weights, basis))
}

/// Matrix of `X ↦ X + (∇⊥)⁴X` on the normal basis.
pub fn id_plus_nabla4_matrix(curve: &DiscreteCurve) -> OperatorMatrix {
    let basis = NormalBasis::new(curve);
    let frame = curve.frame();
    let weights = sample_weights(curve, &basis);
    let m = basis.size();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|b| {
            let x = basis.field(b);
            let mut y = x.values().to_vec();
            for _ in 0..4 {
                y = frame.nabla_perp(&y);
            }
            for (yi, xi) in y.iter_mut().zip(x.values()) {
                *yi += xi;
            }
            let y = VectorField::from_raw(curve.dim(), y);
            basis
                .coords(&y)
                .expect("basis built on this curve")
                .iter()
                .zip(&weights)
                .map(|(c, w)| c * w)
                .collect()
        })
        .collect();
    let raw = DMatrix::from_fn(m, m, |a, b| columns[b][a]);
    OperatorMatrix::assemble(OperatorKind::IdPlusNabla4, raw, weights, basis)
}

fn sample_weights(curve: &DiscreteCurve, basis: &NormalBasis) -> Vec<f64> {
    let w = curve.frame().weights();
    (0..basis.size()).map(|a| w[basis.sample_of(a)]).collect()
}

/// Number of generalized eigenvalues with `|μ| ≤ rel_tol · max|μ|`.
pub fn kernel_dim(op: &OperatorMatrix, rel_tol: f64) -> usize {
    let ev = op.generalized_eigenvalues();
    let max = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    ev.iter().filter(|x| x.abs() <= rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature, inner_l2ds, tangent};
    use crate::spectral::DiffScheme;
    use std::f64::consts::{PI, SQRT_2, TAU};

    fn circle(r: f64, n: usize, scheme: DiffScheme) -> DiscreteCurve {
        DiscreteCurve::from_fn(2, n, scheme, |t| vec![r * t.cos(), r * t.sin()]).unwrap()
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(EnergyParams::new(0.0).is_err());
        assert!(EnergyParams::new(-1.0).is_err());
        assert!(EnergyParams::new(f64::NAN).is_err());
        assert!(EnergyParams::new(2.0).is_ok());
    }

    #[test]
    fn circle_energies() {
        let p = EnergyParams::default();
        let cases = [
            (1.0, 3.0 * PI),
            (1.0 / SQRT_2, 2.0 * SQRT_2 * PI),
        ];
        for (r, e) in cases {
            let c = circle(r, 256, DiffScheme::Spectral);
            let got = elastic_energy(&c, &p);
            assert!((got - e).abs() / e < 1e-8, "{got} vs {e}");
        }
        let r = 1.0 / SQRT_2;
        let double = DiscreteCurve::from_fn(2, 256, DiffScheme::Spectral, |t| {
            vec![r * (2.0 * t).cos(), r * (2.0 * t).sin()]
        })
        .unwrap();
        let e = elastic_energy(&double, &p);
        assert!((e - 4.0 * SQRT_2 * PI).abs() / e < 1e-8);
    }

    #[test]
    fn fd4_circle_energy_is_length_symbol_scaled() {
        // FD4 recovers k exactly on sampled circles; only the length carries σ(1)
        let p = EnergyParams::default();
        let n = 256;
        let c = circle(1.0, n, DiffScheme::Fd4);
        let exact = 3.0 * PI * DiffScheme::Fd4.symbol(1, n);
        assert!((elastic_energy(&c, &p) - exact).abs() < 1e-12);
    }

    #[test]
    fn gradient_on_circles() {
        let p = EnergyParams::default();
        let crit = circle(1.0 / SQRT_2, 256, DiffScheme::Fd4);
        assert!(gradient_norm_l2ds(&crit, &p) < 1e-6);

        let unit = circle(1.0, 256, DiffScheme::Fd4);
        let g = gradient(&unit, &p);
        let k = curvature(&unit);
        for (a, b) in g.values().iter().zip(k.values()) {
            assert!((a + 0.5 * b).abs() < 1e-9);
        }
        let gn = gradient_norm_l2ds(&unit, &p);
        assert!((gn - (PI / 2.0).sqrt()).abs() < 1e-6, "{gn}");

        let r = 1.0 / SQRT_2;
        let double = DiscreteCurve::from_fn(2, 256, DiffScheme::Fd4, |t| {
            vec![r * (2.0 * t).cos(), r * (2.0 * t).sin()]
        })
        .unwrap();
        assert!(gradient_norm_l2ds(&double, &p) < 1e-6);
    }

    #[test]
    fn first_variation_ignores_tangential_part() {
        let p = EnergyParams::default();
        let e = DiscreteCurve::from_fn(2, 128, DiffScheme::Fd4, |t| vec![1.2 * t.cos(), 0.8 * t.sin()])
            .unwrap();
        let tau = tangent(&e);
        assert!(first_variation(&e, &tau, &p).unwrap().abs() < 1e-8);
    }

    #[test]
    fn first_variation_on_unit_circle_inward_normal() {
        // G = −k/2 = ν_out/2, so ⟨G, ν_in⟩_{L²(ds)} = −(1/2)·2π = −π; the FD oracle fixes the sign
        let p = EnergyParams::default();
        let c = circle(1.0, 256, DiffScheme::Spectral);
        let nu_in = VectorField::from_fn(&c, |_, t| vec![-t.cos(), -t.sin()]).unwrap();
        let fv = first_variation(&c, &nu_in, &p).unwrap();
        let fd = fd_directional(&c, &nu_in, &p, 1e-5).unwrap();
        assert!((fv + PI).abs() / PI < 1e-6, "{fv}");
        assert!((fv - fd).abs() / PI < 1e-6, "{fv} vs {fd}");
        // radial oracle: d/dr (2πr + π/r) at r = 1 is π, inward gives −π
    }

    #[test]
    fn fd_directional_edge_cases() {
        let p = EnergyParams::default();
        let c = circle(1.0 / SQRT_2, 128, DiffScheme::Fd4);
        let zero = VectorField::zeros(2, 128);
        assert_eq!(fd_directional(&c, &zero, &p, 1e-5).unwrap(), 0.0);
        let nu = VectorField::from_fn(&c, |_, t| vec![t.cos(), t.sin()]).unwrap();
        assert!(fd_directional(&c, &nu, &p, 1e-5).unwrap().abs() < 1e-8);
        assert!(fd_directional(&c, &nu, &p, 0.0).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_normal() {
        let c = DiscreteCurve::from_fn(3, 64, DiffScheme::Fd4, |t| {
            vec![t.cos(), (2.0 * t).sin() * 0.5, 0.3 * (3.0 * t).cos()]
        })
        .unwrap();
        let basis = NormalBasis::new(&c);
        let tau = tangent(&c);
        assert_eq!(basis.size(), 128);
        for i in 0..64 {
            let v0 = basis.vector(2 * i);
            let v1 = basis.vector(2 * i + 1);
            assert!(dot(v0, tau.at(i)).abs() < 1e-14);
            assert!(dot(v1, tau.at(i)).abs() < 1e-14);
            assert!(dot(v0, v1).abs() < 1e-14);
            assert!((norm(v0) - 1.0).abs() < 1e-14);
            if i > 0 {
                // continuity: consecutive frames are close
                assert!(dot(v0, basis.vector(2 * (i - 1))) > 0.9);
            }
        }
        let x = VectorField::from_fn(&c, |_, t| vec![t.sin(), 1.0, t.cos()]).unwrap();
        let xp = NormalField::project(&x, &c).unwrap();
        let back = basis.synthesize(&basis.coords(&xp).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(xp.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn id_plus_nabla4_is_coercive_and_exactly_symmetric() {
        let e = DiscreteCurve::from_fn(2, 64, DiffScheme::Fd4, |t| vec![1.2 * t.cos(), 0.8 * t.sin()])
            .unwrap();
        let op = id_plus_nabla4_matrix(&e);
        assert!(op.symmetry_defect() <= 1e-10 * op.norm_inf());
        let ev = op.generalized_eigenvalues();
        assert!(ev[0] >= 1.0 - 1e-6, "{}", ev[0]);
        assert_eq!(kernel_dim(&op, 1e-8), 0);

        // constant normal mode on a circle is an eigenvector with eigenvalue 1
        let c = circle(1.0, 64, DiffScheme::Fd4);
        let op = id_plus_nabla4_matrix(&c);
        let nu = VectorField::from_fn(&c, |_, t| vec![t.cos(), t.sin()]).unwrap();
        let x = op.basis().coords(&nu).unwrap();
        assert!((op.rayleigh(&x) - 1.0).abs() < 1e-6);
        assert!((op.generalized_eigenvalues()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hessian_kernel_at_critical_circle() {
        let p = EnergyParams::default();
        let c = circle(1.0 / SQRT_2, 64, DiffScheme::Fd4);
        let h = hessian_matrix(&c, &p).unwrap();
        let norm = h.norm2();
        for e in [[1.0, 0.0], [0.0, 1.0]] {
            let f = VectorField::constant(64, &e);
            let x = h.basis().coords(&f).unwrap();
            let hx = h.apply(&x);
            let r = hx.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= 1e-4 * norm * xn, "{r} vs {norm}");
        }
        assert!(kernel_dim(&h, 1e-4) >= 2);
        assert!(h.symmetry_defect() <= 1e-6 * h.norm_inf());
    }

    #[test]
    fn hessian_matches_directional_fd_of_gradient() {
        let p = EnergyParams::default();
        let c = DiscreteCurve::from_fn(2, 64, DiffScheme::Fd4, |t| {
            let r = 0.8 + 0.05 * (2.0 * t).cos();
            vec![r * t.cos(), r * t.sin()]
        })
        .unwrap();
        let op = hessian_matrix(&c, &p).unwrap();
        let x: Vec<f64> = (0..op.size()).map(|a| (TAU * a as f64 / 64.0 * 3.0).sin()).collect();
        let hx = op.apply(&x);
        let dir = op.basis().synthesize(&x).unwrap();
        let h = 1e-5;
        let gp = gradient(&c.displaced(dir.as_vector(), h).unwrap(), &p);
        let gm = gradient(&c.displaced(dir.as_vector(), -h).unwrap(), &p);
        let dg = VectorField::new(
            2,
            gp.values().iter().zip(gm.values()).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
        )
        .unwrap();
        let reference: Vec<f64> = op
            .basis()
            .coords(&dg)
            .unwrap()
            .iter()
            .zip(op.weights())
            .map(|(a, w)| a * w)
            .collect();
        let num: f64 = hx.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
        // symmetrization moves H·x by half the skew part
        let skew_bound = 0.5 * op.symmetry_defect() * x.iter().map(|v| v.abs()).fold(0.0, f64::max)
            * (op.size() as f64).sqrt();
        assert!(num <= 1e-4 * den + skew_bound, "{num} vs {den}");
    }

    #[test]
    fn second_variation_quadratic_form_of_constant_mode() {
        // d²/dε² E(r + ε) = 2π/r³ at any radius; quadratic form of ν_out
        let p = EnergyParams::default();
        let r = 1.0 / SQRT_2;
        let c = circle(r, 64, DiffScheme::Fd4);
        let op = hessian_matrix(&c, &p).unwrap();
        let nu = VectorField::from_fn(&c, |_, t| vec![t.cos(), t.sin()]).unwrap();
        let x = op.basis().coords(&nu).unwrap();
        let q: f64 = op.apply(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
        let exact = TAU / r.powi(3);
        assert!((q - exact).abs() / exact < 1e-5, "{q} vs {exact}");
        let nn = inner_l2ds(&nu, &nu, &c).unwrap();
        assert!((op.rayleigh(&x) - q / nn).abs() < 1e-9 * q);
    }
}
