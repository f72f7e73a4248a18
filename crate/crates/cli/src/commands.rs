// SPDX-License-Identifier: Apache-2.0

//! The one-shot subcommands. Each returns the process exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use elastica_core::diagnostics::{dual_grad_norm, fit_alpha, FitOptions, LojaTrace};
use elastica_core::geometry::project_normal;
use elastica_core::graph::normal_graph;
use elastica_core::io::{fmt17, read_curve, read_trace_csv, to_json_string, write_curve, write_field, write_json};
use elastica_core::variation::{
    elastic_energy, fd_directional, first_variation, gradient_norm_l2ds, hessian_matrix, id_plus_nabla4_matrix,
    kernel_dim,
};
use elastica_core::{DiscreteCurve, OperatorMatrix, TubularData, VectorField};

use crate::{CurveArgs, SchemeArg};

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => println!("{}", to_json_string(value)?.trim_end()),
    }
    Ok(())
}

#[derive(Serialize)]
struct EnergyReport {
    energy: f64,
    length: f64,
    grad_norm_l2ds: f64,
    dual_grad_norm: f64,
}

pub fn energy(a: CurveArgs) -> anyhow::Result<u8> {
    let p = a.params()?;
    let c = a.load()?;
    emit(
        &EnergyReport {
            energy: elastic_energy(&c, &p),
            length: c.length(),
            grad_norm_l2ds: gradient_norm_l2ds(&c, &p),
            dual_grad_norm: dual_grad_norm(&c, &p),
        },
        None,
    )?;
    Ok(0)
}

#[derive(Args)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Number of random normal probe fields.
    #[arg(long, default_value_t = 20)]
    pub fields: usize,
    #[arg(long, default_value_t = 1)]
    pub rng_seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Pass if every mismatch is within max(tol·|fd|, floor).
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub floor: f64,
}

#[derive(Serialize)]
struct GradCheckReport {
    fields: usize,
    /// max |dE − fd| / max(|fd|, floor/tol)
    max_rel_mismatch: f64,
    max_abs_mismatch: f64,
    pass: bool,
}

/// Random smooth normal field with sup norm 1, modes 0..=4.
fn probe_field(rng: &mut ChaCha8Rng, curve: &DiscreteCurve) -> anyhow::Result<VectorField> {
    let dim = curve.dim();
    let coef: Vec<f64> = (0..dim * 9).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let raw = VectorField::from_fn(curve, |_, t| {
        (0..dim)
            .map(|d| {
                let c = &coef[9 * d..9 * d + 9];
                let mut v = c[0];
                for m in 1..=4 {
                    let mt = m as f64 * t;
                    v += c[2 * m - 1] * mt.cos() + c[2 * m] * mt.sin();
                }
                v
            })
            .collect()
    })?;
    let n = project_normal(&raw, curve)?;
    let s = n.max_norm();
    Ok(n.scaled(1.0 / s).into_vector())
}

pub fn grad_check(mut a: GradCheckArgs) -> anyhow::Result<u8> {
    // the five-point stencil's truncation error is near 1e-5 at N = 256
    a.curve.scheme.get_or_insert(SchemeArg::Spectral);
    let p = a.curve.params()?;
    let c = a.curve.load()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let (mut rel, mut abs): (f64, f64) = (0.0, 0.0);
    let scale_floor = a.floor / a.tol;
    for _ in 0..a.fields {
        let x = probe_field(&mut rng, &c)?;
        let fv = first_variation(&c, &x, &p)?;
        let fd = fd_directional(&c, &x, &p, a.h)?;
        abs = abs.max((fv - fd).abs());
        rel = rel.max((fv - fd).abs() / fd.abs().max(scale_floor));
    }
    let pass = rel <= a.tol;
    emit(
        &GradCheckReport {
            fields: a.fields,
            max_rel_mismatch: rel,
            max_abs_mismatch: abs,
            pass,
        },
        None,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Args)]
pub struct HessianArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Relative tolerance for the kernel count.
    #[arg(long, default_value_t = 1e-4)]
    pub rel_tol: f64,
    /// Dump the operator as binary (u64 LE size, then row-major f64 LE).
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Serialize)]
struct HessianReport {
    size: usize,
    norm_inf: f64,
    symmetry_defect: f64,
    kernel_dim: usize,
    min_eigenvalue: f64,
}

pub fn hessian(a: HessianArgs) -> anyhow::Result<u8> {
    let p = a.curve.params()?;
    let c = a.curve.load()?;
    let h = hessian_matrix(&c, &p)?;
    if let Some(path) = &a.dump {
        elastica_core::io::write_operator(path, h.matrix())?;
    }
    let eig = h.generalized_eigenvalues();
    emit(
        &HessianReport {
            size: h.size(),
            norm_inf: h.norm_inf(),
            symmetry_defect: h.symmetry_defect(),
            kernel_dim: kernel_dim(&h, a.rel_tol),
            min_eigenvalue: eig.first().copied().unwrap_or(f64::NAN),
        },
        None,
    )?;
    Ok(0)
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OperatorArg {
    Hessian,
    IdNabla4,
}

#[derive(Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, value_enum, default_value = "hessian")]
    pub operator: OperatorArg,
    /// CSV output (index, eigenvalue); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump the operator as binary.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

fn build_operator(curve: &CurveArgs, op: OperatorArg) -> anyhow::Result<OperatorMatrix> {
    let c = curve.load()?;
    Ok(match op {
        OperatorArg::Hessian => hessian_matrix(&c, &curve.params()?)?,
        OperatorArg::IdNabla4 => id_plus_nabla4_matrix(&c),
    })
}

pub fn spectrum(a: SpectrumArgs) -> anyhow::Result<u8> {
    let op = build_operator(&a.curve, a.operator)?;
    if let Some(path) = &a.dump {
        elastica_core::io::write_operator(path, op.matrix())?;
    }
    let mut w: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(w, "index,eigenvalue")?;
    for (i, mu) in op.generalized_eigenvalues().iter().enumerate() {
        writeln!(w, "{i},{}", fmt17(*mu))?;
    }
    w.flush()?;
    Ok(0)
}

#[derive(Args)]
pub struct FredholmArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Pass if the smallest Rayleigh eigenvalue is at least 1 − tol.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Serialize)]
struct FredholmReport {
    min_eigenvalue: f64,
    kernel_dim: usize,
    pass: bool,
}

pub fn fredholm_check(a: FredholmArgs) -> anyhow::Result<u8> {
    let op = build_operator(&a.curve, OperatorArg::IdNabla4)?;
    let min = op
        .generalized_eigenvalues()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let pass = min >= 1.0 - a.tol;
    emit(
        &FredholmReport {
            min_eigenvalue: min,
            kernel_dim: kernel_dim(&op, 1e-10),
            pass,
        },
        None,
    )?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Args)]
pub struct GraphArgs {
    /// Reference curve JSON.
    #[arg(long)]
    pub reference: PathBuf,
    /// Curve JSON to express as a normal graph over the reference.
    #[arg(long)]
    pub sigma: PathBuf,
    #[arg(long, value_enum, default_value = "fd4")]
    pub scheme: SchemeArg,
    /// Field JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn graph(a: GraphArgs) -> anyhow::Result<u8> {
    let reference = read_curve(&a.reference, a.scheme.into())?;
    let sigma = read_curve(&a.sigma, a.scheme.into())?;
    let tub = TubularData::new(reference)?;
    let y = normal_graph(&tub, &sigma)?;
    write_field(&a.out, &y)?;
    Ok(0)
}

#[derive(Args)]
pub struct LojaFitArgs {
    /// Trace CSV with a dual_grad_norm column (loja.csv of an evolve run).
    #[arg(long)]
    pub trace: PathBuf,
    /// Fit JSON output; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plot-data CSV (log gap, log dual norm).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Limit energy; defaults to the last row.
    #[arg(long)]
    pub e_ref: Option<f64>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub g_max: Option<f64>,
    #[arg(long)]
    pub slack: Option<f64>,
}

#[derive(Serialize)]
pub struct FitReport {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub window: [f64; 2],
    pub residual: f64,
    pub violations: usize,
    pub points: usize,
}

pub fn fit_options(g_min: Option<f64>, g_max: Option<f64>, slack: Option<f64>) -> FitOptions {
    let d = FitOptions::default();
    FitOptions {
        g_min: g_min.unwrap_or(d.g_min),
        g_max: g_max.unwrap_or(d.g_max),
        slack: slack.unwrap_or(d.slack),
    }
}

/// Fits and writes the JSON report plus optional plot data.
pub fn write_fit(trace: &LojaTrace, opts: &FitOptions, out: Option<&Path>, plot: Option<&Path>) -> anyhow::Result<()> {
    let fit = fit_alpha(trace, opts)?;
    emit(
        &FitReport {
            alpha: fit.alpha,
            c: fit.c,
            window: fit.window,
            residual: fit.residual,
            violations: fit.violations,
            points: fit.points,
        },
        out,
    )?;
    if let Some(p) = plot {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "log_gap,log_dual_grad_norm")?;
        for r in &trace.rows {
            if r.energy_gap > 0.0 && r.dual_grad_norm > 0.0 {
                writeln!(w, "{},{}", fmt17(r.energy_gap.ln()), fmt17(r.dual_grad_norm.ln()))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

pub fn loja_fit(a: LojaFitArgs) -> anyhow::Result<u8> {
    let rows = read_trace_csv(File::open(&a.trace)?)?;
    let mut rows = rows;
    if rows.iter().any(|r| r.dual_grad_norm.is_nan()) {
        // plain trace: at uniform speed |γ'| = L/2π, so ‖|γ'|G‖ = (L/2π)‖G‖_{L²(dθ)}
        for r in &mut rows {
            r.dual_grad_norm = r.length / std::f64::consts::TAU * r.vel_norm_l2dtheta;
        }
        if rows.iter().any(|r| r.dual_grad_norm.is_nan()) {
            anyhow::bail!("{} needs dual_grad_norm or length and vel_norm_l2dtheta columns", a.trace.display());
        }
    }
    let trace = match a.e_ref {
        Some(e) => LojaTrace::from_flow_with_ref(&rows, e)?,
        None => LojaTrace::from_flow(&rows)?,
    };
    let opts = fit_options(a.g_min, a.g_max, a.slack);
    write_fit(&trace, &opts, a.out.as_deref(), a.plot.as_deref())?;
    Ok(0)
}

#[derive(Args)]
pub struct SeedArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Curve JSON output; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn seed(a: SeedArgs) -> anyhow::Result<u8> {
    let c = a.curve.load()?;
    match &a.out {
        Some(p) => write_curve(p, &c)?,
        None => println!("{}", elastica_core::io::curve_to_json(&c)?.trim_end()),
    }
    Ok(0)
}
