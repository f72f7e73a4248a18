// SPDX-License-Identifier: Apache-2.0

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elastica_core::{DiffScheme, DiscreteCurve, EnergyParams, Scheme, SeedKind, SeedSpec, StepperConfig};

#[derive(Parser)]
#[command(name = "elastica", version, about = "Elastic flow of closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the elastic flow and write traces, snapshots and checkpoints.
    Evolve(run::EvolveArgs),
    /// Print energy, length and gradient norms of a curve.
    Energy(CurveArgs),
    /// Compare the first variation with a central difference of the energy.
    GradCheck(commands::GradCheckArgs),
    /// Assemble the Hessian and report its kernel and symmetry defect.
    Hessian(commands::HessianArgs),
    /// Write the ds-weighted spectrum of an operator as CSV.
    Spectrum(commands::SpectrumArgs),
    /// Check coercivity of Id + (nabla_perp)^4.
    FredholmCheck(commands::FredholmArgs),
    /// Write the normal graph of one curve over another.
    Graph(commands::GraphArgs),
    /// Fit the Lojasiewicz exponent to a flow trace.
    LojaFit(commands::LojaFitArgs),
    /// Write a seed curve as JSON.
    Seed(commands::SeedArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Fd4,
    Spectral,
}

impl From<SchemeArg> for DiffScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Fd4 => DiffScheme::Fd4,
            SchemeArg::Spectral => DiffScheme::Spectral,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StepperArg {
    Explicit,
    SemiImplicit,
}

impl From<StepperArg> for Scheme {
    fn from(s: StepperArg) -> Self {
        match s {
            StepperArg::Explicit => Scheme::Explicit,
            StepperArg::SemiImplicit => Scheme::SemiImplicit,
        }
    }
}

/// Where the curve comes from: a seed spec or a curve JSON.
#[derive(Args, Clone, Debug)]
pub struct CurveArgs {
    /// Seed spec such as `circle:1`, `ellipse:1.2,0.8`, `figure_eight:1`.
    #[arg(long, conflicts_with = "curve")]
    pub seed: Option<SeedKind>,
    /// Curve JSON file.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Number of samples.
    #[arg(short = 'N', long, default_value_t = 256)]
    pub samples: usize,
    /// Ambient dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Differentiation scheme [default: fd4; spectral for grad-check]
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Length weight in the energy.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

impl CurveArgs {
    pub fn scheme(&self) -> DiffScheme {
        self.scheme.unwrap_or(SchemeArg::Fd4).into()
    }

    pub fn params(&self) -> anyhow::Result<EnergyParams> {
        Ok(EnergyParams::new(self.lambda)?)
    }

    pub fn seed_spec(&self) -> Option<SeedSpec> {
        self.seed.clone().map(|kind| SeedSpec {
            kind,
            samples: self.samples,
            dim: self.dim,
            scheme: self.scheme(),
        })
    }

    pub fn load(&self) -> anyhow::Result<DiscreteCurve> {
        match (&self.seed_spec(), &self.curve) {
            (Some(spec), _) => Ok(spec.build()?),
            (None, Some(path)) => Ok(elastica_core::io::read_curve(path, self.scheme())?),
            (None, None) => anyhow::bail!("either --seed or --curve is required"),
        }
    }
}

/// Stepper flags shared by `evolve` and sweep defaults.
#[derive(Args, Clone, Debug)]
pub struct StepperArgs {
    #[arg(long, value_enum, default_value = "semi-implicit")]
    pub stepper: StepperArg,
    #[arg(long)]
    pub dt_init: Option<f64>,
    #[arg(long)]
    pub dt_min: Option<f64>,
    #[arg(long)]
    pub dt_max: Option<f64>,
    #[arg(long)]
    pub energy_tol: Option<f64>,
    /// Disable tangential redistribution.
    #[arg(long)]
    pub no_redistribute: bool,
    /// Stop once the L2(ds) gradient norm drops below this.
    #[arg(long)]
    pub stop_grad: Option<f64>,
    /// Stop at this time if not converged.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Accepted steps between checkpoints, 0 disables them.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

impl StepperArgs {
    pub fn config(&self) -> StepperConfig {
        let d = StepperConfig::default();
        StepperConfig {
            scheme: self.stepper.into(),
            dt_init: self.dt_init.unwrap_or(d.dt_init),
            dt_min: self.dt_min.unwrap_or(d.dt_min),
            dt_max: self.dt_max.unwrap_or(d.dt_max),
            energy_tol: self.energy_tol.unwrap_or(d.energy_tol),
            redistribute: !self.no_redistribute,
            stop_grad_tol: self.stop_grad.unwrap_or(d.stop_grad_tol),
            stop_t_max: self.t_max.unwrap_or(d.stop_t_max),
            checkpoint_every: self.checkpoint_every.unwrap_or(d.checkpoint_every),
        }
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ELASTICA_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("ELASTICA_THREADS must be a positive integer, got {v:?}"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    init_threads()?;
    match cli.command {
        Command::Evolve(a) => run::evolve(a),
        Command::Energy(a) => commands::energy(a),
        Command::GradCheck(a) => commands::grad_check(a),
        Command::Hessian(a) => commands::hessian(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::FredholmCheck(a) => commands::fredholm_check(a),
        Command::Graph(a) => commands::graph(a),
        Command::LojaFit(a) => commands::loja_fit(a),
        Command::Seed(a) => commands::seed(a),
    }
}

fn main() -> ExitCode {
    // usage errors exit 1 like any other failure; 2 means "not converged"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
