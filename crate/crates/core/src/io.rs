// SPDX-License-Identifier: Apache-2.0

//! File formats: curve and field JSON, trace CSVs, state JSON and dense
//! operator dumps. Floats are always written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::TraceRow;
use crate::geometry::{DiscreteCurve, VectorField};
use crate::spectral::DiffScheme;

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Formatter17;

impl serde_json::ser::Formatter for Formatter17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }
}

/// Pretty-ish JSON with 17-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Formatter17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let f = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub dim: usize,
    pub samples: usize,
    pub points: Vec<Vec<f64>>,
}

fn rows_of(dim: usize, flat: &[f64]) -> Vec<Vec<f64>> {
    flat.chunks_exact(dim).map(|r| r.to_vec()).collect()
}

fn flatten(dim: usize, samples: usize, rows: &[Vec<f64>], what: &str) -> Result<Vec<f64>> {
    if rows.len() != samples {
        return Err(Error::InvalidCurve(format!(
            "{what}: header says {samples} samples, found {}",
            rows.len()
        )));
    }
    let mut flat = Vec::with_capacity(dim * samples);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::InvalidCurve(format!(
                "{what}: row {i} has {} coordinates, expected {dim}",
                r.len()
            )));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCurve(format!("{what}: non-finite value in row {i}")));
        }
        flat.extend_from_slice(r);
    }
    Ok(flat)
}

impl CurveFile {
    pub fn from_curve(curve: &DiscreteCurve) -> Self {
        Self {
            dim: curve.dim(),
            samples: curve.samples(),
            points: rows_of(curve.dim(), curve.points()),
        }
    }

    pub fn into_curve(self, scheme: DiffScheme) -> Result<DiscreteCurve> {
        if !self.samples.is_multiple_of(2) {
            return Err(Error::InvalidCurve(format!("odd sample count {}", self.samples)));
        }
        let flat = flatten(self.dim, self.samples, &self.points, "curve")?;
        DiscreteCurve::with_scheme(self.dim, flat, scheme)
    }
}

pub fn curve_to_json(curve: &DiscreteCurve) -> Result<String> {
    to_json_string(&CurveFile::from_curve(curve))
}

pub fn curve_from_json(text: &str, scheme: DiffScheme) -> Result<DiscreteCurve> {
    let f: CurveFile = serde_json::from_str(text)?;
    f.into_curve(scheme)
}

pub fn write_curve(path: impl AsRef<Path>, curve: &DiscreteCurve) -> Result<()> {
    write_json(path, &CurveFile::from_curve(curve))
}

pub fn read_curve(path: impl AsRef<Path>, scheme: DiffScheme) -> Result<DiscreteCurve> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    curve_from_json(&text, scheme)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub dim: usize,
    pub samples: usize,
    pub values: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn from_field(field: &impl AsRef<VectorField>) -> Self {
        let f = field.as_ref();
        Self {
            dim: f.dim(),
            samples: f.samples(),
            values: rows_of(f.dim(), f.values()),
        }
    }

    pub fn into_field(self) -> Result<VectorField> {
        let flat = flatten(self.dim, self.samples, &self.values, "field")?;
        VectorField::new(self.dim, flat)
    }
}

pub fn write_field(path: impl AsRef<Path>, field: &impl AsRef<VectorField>) -> Result<()> {
    write_json(path, &FieldFile::from_field(field))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<VectorField> {
    read_json::<FieldFile>(path)?.into_field()
}

pub const TRACE_COLUMNS: [&str; 8] = [
    "step",
    "t",
    "dt",
    "energy",
    "grad_norm_l2ds",
    "vel_norm_l2dtheta",
    "vel_norm_l2ds",
    "length",
];

pub const LOJA_COLUMNS: [&str; 5] = ["t", "energy", "dual_grad_norm", "vel_norm_l2dtheta", "length"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InsufficientData(format!("malformed CSV: {other:?}")),
    }
}

/// Streams trace rows as CSV.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    loja: bool,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(TRACE_COLUMNS).map_err(csv_err)?;
        Ok(Self { inner, loja: false })
    }

    /// Writer for the diagnostics CSV (`LOJA_COLUMNS`).
    pub fn loja(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(LOJA_COLUMNS).map_err(csv_err)?;
        Ok(Self { inner, loja: true })
    }

    /// Continues an existing trace file; no header is written.
    pub fn headerless(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
            loja: false,
        }
    }

    pub fn headerless_loja(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
            loja: true,
        }
    }

    pub fn row(&mut self, r: &TraceRow) -> Result<()> {
        let rec: Vec<String> = if self.loja {
            vec![
                fmt17(r.t),
                fmt17(r.energy),
                fmt17(r.dual_grad_norm),
                fmt17(r.vel_norm_l2dtheta),
                fmt17(r.length),
            ]
        } else {
            vec![
                r.step.to_string(),
                fmt17(r.t),
                fmt17(r.dt),
                fmt17(r.energy),
                fmt17(r.grad_norm_l2ds),
                fmt17(r.vel_norm_l2dtheta),
                fmt17(r.vel_norm_l2ds),
                fmt17(r.length),
            ]
        };
        self.inner.write_record(&rec).map_err(csv_err)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_trace_csv(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?))?;
    for r in rows {
        w.row(r)?;
    }
    w.flush()
}

pub fn write_loja_csv(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let mut w = TraceWriter::loja(BufWriter::new(File::create(path)?))?;
    for r in rows {
        w.row(r)?;
    }
    w.flush()
}

/// Reads a trace CSV or a diagnostics CSV. Columns missing from the file
/// stay `NaN`; `dual_grad_norm` is absent from plain traces.
pub fn read_trace_csv(reader: impl Read) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let idx = [
        col("t"),
        col("dt"),
        col("energy"),
        col("grad_norm_l2ds"),
        col("vel_norm_l2dtheta"),
        col("vel_norm_l2ds"),
        col("length"),
        col("dual_grad_norm"),
    ];
    if idx[0].is_none() || idx[2].is_none() {
        return Err(Error::InsufficientData("CSV needs t and energy columns".into()));
    }
    let step_col = col("step");
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let get = |i: Option<usize>| -> Result<f64> {
            match i {
                None => Ok(f64::NAN),
                Some(i) => rec
                    .get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InsufficientData(format!("bad value in data row {line}"))),
            }
        };
        let step = match step_col {
            Some(i) => rec
                .get(i)
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::InsufficientData(format!("bad step in data row {line}")))?,
            None => line as u64,
        };
        rows.push(TraceRow {
            step,
            t: get(idx[0])?,
            dt: get(idx[1])?,
            energy: get(idx[2])?,
            grad_norm_l2ds: get(idx[3])?,
            vel_norm_l2dtheta: get(idx[4])?,
            vel_norm_l2ds: get(idx[5])?,
            length: get(idx[6])?,
            dual_grad_norm: get(idx[7])?,
        });
    }
    Ok(rows)
}

/// Dense row-major dump: `M` as little-endian `u64`, then `M²` little-endian `f64`.
pub fn write_operator(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_operator_to(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn write_operator_to(w: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(crate::error::shape_mismatch("square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_operator(mut r: impl Read) -> Result<DMatrix<f64>> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let m = u64::from_le_bytes(b8) as usize;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            r.read_exact(&mut b8)?;
            out[(i, j)] = f64::from_le_bytes(b8);
        }
    }
    Ok(out)
}
