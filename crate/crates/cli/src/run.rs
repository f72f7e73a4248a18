// SPDX-License-Identifier: Apache-2.0

//! `evolve`: single runs, resumed runs and sweeps.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use elastica_core::diagnostics::{FitOptions, LojaTrace};
use elastica_core::flow::{evolve_from, FlowObserver, StateRecord};
use elastica_core::io::{read_curve, read_json, read_trace_csv, write_curve, write_json, TraceWriter};
use elastica_core::{DiffScheme, DiscreteCurve, EnergyParams, FlowState, SeedSpec, StepperConfig, TraceRow};

use crate::commands::write_fit;
use crate::{CurveArgs, StepperArgs};

const MANIFEST: &str = "manifest.json";
const TRACE: &str = "trace.csv";
const LOJA: &str = "loja.csv";
const SUMMARY: &str = "summary.json";
const CHECKPOINT: &str = "checkpoint";

pub const EXIT_CONVERGED: u8 = 0;
pub const EXIT_UNCONVERGED: u8 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Seed(SeedSpec),
    Curve { path: PathBuf, scheme: DiffScheme },
}

/// Everything that determines a run. Echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub initial: Initial,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub stepper: StepperConfig,
    /// Accepted steps between snapshots; 0 keeps only the initial and final curves.
    #[serde(default)]
    pub snapshot_every: u64,
    /// Fit the Lojasiewicz exponent at the end of the run.
    #[serde(default)]
    pub loja: bool,
    #[serde(default)]
    pub fit: FitOptions,
    /// Output directory. Sweep entries without one go under `--out/run_<i>`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn validate(&self) -> anyhow::Result<()> {
        self.energy.validate()?;
        self.stepper.validate()?;
        anyhow::ensure!(
            self.fit.g_min > 0.0 && self.fit.g_max > self.fit.g_min && self.fit.slack >= 1.0,
            "fit window must satisfy 0 < g_min < g_max and slack >= 1"
        );
        Ok(())
    }

    fn initial_curve(&self) -> anyhow::Result<DiscreteCurve> {
        match &self.initial {
            Initial::Seed(spec) => Ok(spec.build()?),
            Initial::Curve { path, scheme } => {
                read_curve(path, *scheme).with_context(|| format!("reading {}", path.display()))
            }
        }
    }

    fn scheme(&self) -> DiffScheme {
        match &self.initial {
            Initial::Seed(spec) => spec.scheme,
            Initial::Curve { scheme, .. } => *scheme,
        }
    }
}

#[derive(Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub stepper: StepperArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run configuration JSON; replaces the curve and stepper flags.
    #[arg(long, conflicts_with_all = ["seed", "curve", "sweep", "resume"])]
    pub config: Option<PathBuf>,
    /// Continue the run in this directory from its last checkpoint.
    #[arg(long, conflicts_with_all = ["seed", "curve", "sweep"])]
    pub resume: Option<PathBuf>,
    /// JSON array of run configurations, run in parallel.
    #[arg(long, conflicts_with_all = ["seed", "curve"])]
    pub sweep: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: u64,
    /// Fit the Lojasiewicz exponent at the end (fit.json, loja_plot.csv).
    #[arg(long)]
    pub loja: bool,
    /// Stop after this many accepted steps in total, leaving a resumable run.
    #[arg(long)]
    pub halt_after: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    config: RunConfig,
}

#[derive(Serialize)]
struct Summary {
    converged: bool,
    halted: bool,
    t: f64,
    steps: u64,
    energy: f64,
    grad_norm_l2ds: f64,
    rejected_steps: u64,
    max_energy_increase: f64,
}

pub fn evolve(a: EvolveArgs) -> anyhow::Result<u8> {
    if let Some(dir) = &a.resume {
        return resume(dir, a.halt_after);
    }
    if let Some(file) = &a.sweep {
        return sweep(file, a.out.as_deref());
    }
    let mut config = match &a.config {
        Some(p) => read_json::<RunConfig>(p).with_context(|| format!("reading {}", p.display()))?,
        None => flag_config(&a)?,
    };
    if a.out.is_some() {
        config.out = a.out.clone();
    }
    let out = config
        .out
        .clone()
        .ok_or_else(|| anyhow::anyhow!("--out is required"))?;
    run_fresh(&config, &out, a.halt_after)
}

fn flag_config(a: &EvolveArgs) -> anyhow::Result<RunConfig> {
    let initial = match (a.curve.seed_spec(), &a.curve.curve) {
        (Some(spec), _) => Initial::Seed(spec),
        (None, Some(path)) => Initial::Curve {
            path: path.clone(),
            scheme: a.curve.scheme(),
        },
        (None, None) => anyhow::bail!("either --seed, --curve, --config, --resume or --sweep is required"),
    };
    Ok(RunConfig {
        initial,
        energy: a.curve.params()?,
        stepper: a.stepper.config(),
        snapshot_every: a.snapshot_every,
        loja: a.loja,
        fit: FitOptions::default(),
        out: a.out.clone(),
    })
}

fn sweep(file: &Path, out: Option<&Path>) -> anyhow::Result<u8> {
    let configs: Vec<RunConfig> = read_json(file).with_context(|| format!("reading {}", file.display()))?;
    let jobs: Vec<(RunConfig, PathBuf)> = configs
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let dir = match (&c.out, out) {
                (Some(d), _) => d.clone(),
                (None, Some(base)) => base.join(format!("run_{i}")),
                (None, None) => anyhow::bail!("sweep entry {i} has no out directory and --out is not set"),
            };
            Ok((c, dir))
        })
        .collect::<anyhow::Result<_>>()?;
    let codes: Vec<u8> = jobs
        .par_iter()
        .map(|(c, dir)| match run_fresh(c, dir, None) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {}: {e:#}", dir.display());
                1
            }
        })
        .collect();
    // any error wins over any unconverged run
    Ok(if codes.contains(&1) {
        1
    } else {
        codes.into_iter().max().unwrap_or(EXIT_CONVERGED)
    })
}

fn run_fresh(config: &RunConfig, out: &Path, halt_after: Option<u64>) -> anyhow::Result<u8> {
    config.validate()?;
    let curve = config.initial_curve()?;
    fs::create_dir_all(out.join("snapshots"))?;
    write_json(
        out.join(MANIFEST),
        &Manifest {
            version: elastica_core::VERSION.to_string(),
            config: config.clone(),
        },
    )?;
    let state = FlowState::new(curve, &config.energy, config.stepper.dt_init);
    let mut rec = Recorder::create(out, config, halt_after)?;
    let first = TraceRow::of(&state, &config.energy);
    rec.trace.row(&first)?;
    rec.loja.row(&first)?;
    write_curve(rec.snapshot_path(0), &state.curve)?;
    finish(config, out, state, rec)
}

fn resume(dir: &Path, halt_after: Option<u64>) -> anyhow::Result<u8> {
    let manifest: Manifest = read_json(dir.join(MANIFEST)).with_context(|| format!("reading {}", dir.join(MANIFEST).display()))?;
    let config = manifest.config;
    config.validate()?;
    let ck = dir.join(CHECKPOINT);
    let record: StateRecord = read_json(ck.join("state.json")).context("reading checkpoint state")?;
    let curve = read_curve(ck.join("curve.json"), config.scheme()).context("reading checkpoint curve")?;
    let state = FlowState::from_record(curve, &record);
    let kept = truncate_trace(&dir.join(TRACE), record.step_count)?;
    truncate_lines(&dir.join(LOJA), kept + 1)?;
    let rec = Recorder::append(dir, &config, halt_after)?;
    finish(&config, dir, state, rec)
}

fn finish(config: &RunConfig, out: &Path, state: FlowState, mut rec: Recorder) -> anyhow::Result<u8> {
    let (state, trace) = evolve_from(state, &config.stepper, &config.energy, &mut rec)?;
    rec.flush()?;
    write_curve(out.join("final.json"), &state.curve)?;
    let halted = !trace.converged && rec.halted();
    if !trace.converged && !halted && trace.rows.len() > 1 {
        // the last accepted state at t_max is kept even off the snapshot cadence
        write_curve(rec.snapshot_path(state.step_count), &state.curve)?;
    }
    write_json(
        out.join(SUMMARY),
        &Summary {
            converged: trace.converged,
            halted,
            t: state.t,
            steps: state.step_count,
            energy: state.energy,
            grad_norm_l2ds: state.grad_norm_l2ds,
            rejected_steps: trace.rejected_steps,
            max_energy_increase: trace.max_energy_increase,
        },
    )?;
    if config.loja && !halted {
        let rows = read_trace_csv(File::open(out.join(LOJA))?)?;
        let fitted = LojaTrace::from_flow(&rows)
            .map_err(anyhow::Error::from)
            .and_then(|t| write_fit(&t, &config.fit, Some(&out.join("fit.json")), Some(&out.join("loja_plot.csv"))));
        if let Err(e) = fitted {
            eprintln!("warning: no Lojasiewicz fit: {e:#}");
        }
    }
    Ok(if trace.converged { EXIT_CONVERGED } else { EXIT_UNCONVERGED })
}

/// Streams trace rows, snapshots and checkpoints while the flow runs.
struct Recorder {
    dir: PathBuf,
    trace: TraceWriter<BufWriter<File>>,
    loja: TraceWriter<BufWriter<File>>,
    snapshot_every: u64,
    checkpoint_every: u64,
    halt_after: Option<u64>,
    last_step: u64,
}

impl Recorder {
    fn create(dir: &Path, config: &RunConfig, halt_after: Option<u64>) -> anyhow::Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            trace: TraceWriter::new(BufWriter::new(File::create(dir.join(TRACE))?))?,
            loja: TraceWriter::loja(BufWriter::new(File::create(dir.join(LOJA))?))?,
            snapshot_every: config.snapshot_every,
            checkpoint_every: config.stepper.checkpoint_every,
            halt_after,
            last_step: 0,
        })
    }

    /// Appends to existing CSVs without repeating their headers.
    fn append(dir: &Path, config: &RunConfig, halt_after: Option<u64>) -> anyhow::Result<Self> {
        let open = |name: &str| -> anyhow::Result<BufWriter<File>> {
            Ok(BufWriter::new(OpenOptions::new().append(true).open(dir.join(name))?))
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            trace: TraceWriter::headerless(open(TRACE)?),
            loja: TraceWriter::headerless_loja(open(LOJA)?),
            snapshot_every: config.snapshot_every,
            checkpoint_every: config.stepper.checkpoint_every,
            halt_after,
            last_step: 0,
        })
    }

    fn snapshot_path(&self, step: u64) -> PathBuf {
        self.dir.join("snapshots").join(format!("step_{step:08}.json"))
    }

    fn flush(&mut self) -> anyhow::Result<()> {
        self.trace.flush()?;
        self.loja.flush()?;
        Ok(())
    }

    fn halted(&self) -> bool {
        self.halt_after.is_some_and(|h| self.last_step >= h)
    }

    fn checkpoint(&mut self, state: &FlowState) -> elastica_core::Result<()> {
        self.trace.flush()?;
        self.loja.flush()?;
        let ck = self.dir.join(CHECKPOINT);
        fs::create_dir_all(&ck)?;
        // write then rename so an interrupted checkpoint leaves the old one intact
        write_curve(ck.join("curve.json.tmp"), &state.curve)?;
        write_json(ck.join("state.json.tmp"), &state.record())?;
        fs::rename(ck.join("curve.json.tmp"), ck.join("curve.json"))?;
        fs::rename(ck.join("state.json.tmp"), ck.join("state.json"))?;
        Ok(())
    }
}

impl FlowObserver for Recorder {
    fn on_step(&mut self, state: &FlowState, row: &TraceRow) -> elastica_core::Result<()> {
        self.trace.row(row)?;
        self.loja.row(row)?;
        self.last_step = state.step_count;
        if self.snapshot_every > 0 && state.step_count.is_multiple_of(self.snapshot_every) {
            write_curve(self.snapshot_path(state.step_count), &state.curve)?;
        }
        if self.checkpoint_every > 0 && state.step_count.is_multiple_of(self.checkpoint_every) {
            self.checkpoint(state)?;
        }
        Ok(())
    }

    fn stop_requested(&self) -> bool {
        self.halted()
    }
}

/// Drops trace rows past `step`; returns the number of data rows kept.
fn truncate_trace(path: &Path, step: u64) -> anyhow::Result<usize> {
    let lines = read_lines(path)?;
    let mut keep = vec![lines.first().cloned().unwrap_or_default()];
    for l in lines.iter().skip(1) {
        let s: u64 = l
            .split(',')
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| anyhow::anyhow!("malformed row in {}: {l:?}", path.display()))?;
        if s > step {
            break;
        }
        keep.push(l.clone());
    }
    let kept = keep.len() - 1;
    write_lines(path, &keep)?;
    Ok(kept)
}

fn truncate_lines(path: &Path, n: usize) -> anyhow::Result<()> {
    let mut lines = read_lines(path)?;
    lines.truncate(n);
    write_lines(path, &lines)
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BufReader::new(f).lines().collect::<std::io::Result<_>>()?)
}

fn write_lines(path: &Path, lines: &[String]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}
