//! File formats.
//!
//! A sequence file is a CSV body preceded by one `#`-prefixed JSON header
//! line:
//!
//! ```text
//! # {"format":"csa-sequence","version":1,"dim":2,"scale":1.0,"radius":0.02,...}
//! index,x,y,count
//! 0,3.1415926535897931e-1,2.7182818284590451e-1,0
//! ```
//!
//! Coordinates carry 17 significant digits, which round-trips every `f64`
//! exactly. The `count` column (insertion neighbor count) is present only when
//! the header says `has_counts`.
//!
//! Reports are JSON objects of the form
//! `{"schema":"csa-report","schema_version":1,"kind":...,"data":...}`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{CltReport, IntegralResidual, JammingEstimate, LimitCurves, MinorsReport};
use crate::estimator::{ConfidenceIntervals, MleResult};
use crate::geometry::{Domain, Point};
use crate::params::BetaVector;
use crate::simulator::{PointSequence, GENERATOR};
use crate::statistics::Trajectory;

pub const SEQUENCE_FORMAT: &str = "csa-sequence";
pub const SEQUENCE_VERSION: u32 = 1;
pub const REPORT_SCHEMA: &str = "csa-report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn json(path: &Path, e: impl std::fmt::Display) -> Self {
        IoError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    /// Domain volume `m`.
    pub scale: f64,
    pub radius: f64,
    /// Model order, when the generating weights are known.
    pub order: Option<usize>,
    pub beta: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub generator: Option<String>,
    pub jammed: bool,
    pub requested: Option<usize>,
    pub has_counts: bool,
}

impl SequenceHeader {
    pub fn for_sequence(seq: &PointSequence) -> Self {
        Self {
            format: SEQUENCE_FORMAT.into(),
            version: SEQUENCE_VERSION,
            dim: seq.domain.dim(),
            scale: seq.domain.scale(),
            radius: seq.radius,
            order: seq.beta.as_ref().map(BetaVector::order),
            beta: seq.beta.as_ref().map(|b| b.as_slice().to_vec()),
            seed: seq.seed,
            generator: seq.seed.map(|_| GENERATOR.to_string()),
            jammed: seq.jammed,
            requested: seq.requested,
            has_counts: seq.insertion_counts.is_some(),
        }
    }

    fn columns(&self) -> String {
        let mut s = String::from("index");
        for axis in ["x", "y", "z"].iter().take(self.dim) {
            s.push(',');
            s.push_str(axis);
        }
        if self.has_counts {
            s.push_str(",count");
        }
        s
    }
}

pub fn format_sequence(seq: &PointSequence) -> String {
    let header = SequenceHeader::for_sequence(seq);
    let mut out = String::new();
    let json = serde_json::to_string(&header).expect("header serializes");
    let _ = writeln!(out, "# {json}");
    let _ = writeln!(out, "{}", header.columns());
    for (i, p) in seq.points.iter().enumerate() {
        let _ = write!(out, "{i}");
        for c in p.coords() {
            let _ = write!(out, ",{c:.16e}");
        }
        if let Some(counts) = &seq.insertion_counts {
            let _ = write!(out, ",{}", counts[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_sequence(path: &Path, seq: &PointSequence) -> Result<(), IoError> {
    fs::write(path, format_sequence(seq)).map_err(|e| IoError::io(path, e))
}

pub fn read_sequence(path: &Path) -> Result<PointSequence, IoError> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    parse_sequence(path, BufReader::new(file))
}

/// Parses a sequence from any reader; `path` only labels errors.
pub fn parse_sequence(path: &Path, reader: impl BufRead) -> Result<PointSequence, IoError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = |what: &str| -> Result<(usize, String), IoError> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(IoError::io(path, e)),
            None => Err(IoError::parse(path, 0, format!("missing {what}"))),
        }
    };

    let (n, first) = next_line("header line")?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| IoError::parse(path, n, "header line must start with '#'"))?;
    let header: SequenceHeader =
        serde_json::from_str(json.trim()).map_err(|e| IoError::parse(path, n, format!("malformed header: {e}")))?;
    if header.format != SEQUENCE_FORMAT {
        return Err(IoError::parse(path, n, format!("unknown format {:?}", header.format)));
    }
    if header.version != SEQUENCE_VERSION {
        return Err(IoError::parse(path, n, format!("unsupported version {}", header.version)));
    }
    let domain = Domain::new(header.dim, header.scale).map_err(|e| IoError::parse(path, n, e.to_string()))?;
    if !(header.radius.is_finite() && header.radius > 0.0) {
        return Err(IoError::parse(path, n, format!("invalid radius {}", header.radius)));
    }
    let beta = header
        .beta
        .clone()
        .map(BetaVector::new)
        .transpose()
        .map_err(|e| IoError::parse(path, n, e.to_string()))?;
    if let (Some(b), Some(o)) = (&beta, header.order) {
        if b.order() != o {
            return Err(IoError::parse(path, n, format!("order {o} disagrees with {} weights", b.order())));
        }
    }

    let (n, cols) = next_line("column line")?;
    if cols.trim() != header.columns() {
        return Err(IoError::parse(
            path,
            n,
            format!("expected columns {:?}, found {:?}", header.columns(), cols.trim()),
        ));
    }
    let width = 1 + header.dim + usize::from(header.has_counts);

    let mut points = Vec::new();
    let mut counts = header.has_counts.then(Vec::new);
    for (n, line) in lines {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(IoError::parse(
                path,
                n,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| IoError::parse(path, n, format!("bad index {:?}", fields[0])))?;
        if index != points.len() {
            return Err(IoError::parse(path, n, format!("row index {index}, expected {}", points.len())));
        }
        let mut coords = [0.0; 3];
        for (c, f) in coords.iter_mut().zip(&fields[1..=header.dim]) {
            let v: f64 = f
                .parse()
                .map_err(|_| IoError::parse(path, n, format!("bad coordinate {f:?}")))?;
            if !v.is_finite() {
                return Err(IoError::parse(path, n, format!("non-finite coordinate {f:?} in row {index}")));
            }
            *c = v;
        }
        let p = Point::new(&coords[..header.dim]).map_err(|e| IoError::parse(path, n, e.to_string()))?;
        if !domain.contains(&p) {
            return Err(IoError::parse(path, n, format!("row {index} lies outside the domain")));
        }
        if let Some(counts) = counts.as_mut() {
            let f = fields[width - 1];
            let c: i64 = f
                .parse()
                .map_err(|_| IoError::parse(path, n, format!("bad count {f:?}")))?;
            let c = u32::try_from(c)
                .map_err(|_| IoError::parse(path, n, format!("count {c} in row {index} is negative or too large")))?;
            counts.push(c);
        }
        points.push(p);
    }

    Ok(PointSequence {
        domain,
        radius: header.radius,
        beta,
        points,
        insertion_counts: counts,
        seed: header.seed,
        jammed: header.jammed,
        requested: header.requested,
    })
}

/// Per-sequence statistics written by the replay step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub points: usize,
    pub order: usize,
    pub scale: f64,
    pub radius: f64,
    pub cell_edge: f64,
    pub t: Vec<u64>,
    /// `Gamma_{.,l}` after the last point.
    pub final_gamma: Vec<f64>,
}

impl ReplaySummary {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            points: traj.len(),
            order: traj.order(),
            scale: traj.scale(),
            radius: traj.radius(),
            cell_edge: traj.cell_edge(),
            t: traj.t().to_vec(),
            final_gamma: traj.gamma(traj.len()).to_vec(),
        }
    }
}

/// Fit plus intervals, as written by the estimate step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub fit: MleResult,
    pub intervals: Option<ConfidenceIntervals>,
    pub t: Vec<u64>,
}

/// Curves plus the integral-relation residuals computed from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesReport {
    pub curves: LimitCurves,
    pub residuals: Vec<IntegralResidual>,
    pub limit_information: Vec<Vec<f64>>,
}

/// A value with a stable report kind.
pub trait Report: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

macro_rules! report_kind {
    ($($t:ty => $k:literal),* $(,)?) => {
        $(impl Report for $t { const KIND: &'static str = $k; })*
    };
}

report_kind! {
    MleResult => "mle_result",
    ConfidenceIntervals => "confidence_intervals",
    CltReport => "clt_report",
    LimitCurves => "limit_curves",
    ReplaySummary => "replay_summary",
    EstimateReport => "estimate",
    MinorsReport => "minors",
    CurvesReport => "curves",
    JammingEstimate => "jamming_density",
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    schema: &'a str,
    schema_version: u32,
    kind: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    schema: String,
    schema_version: u32,
    kind: String,
    data: T,
}

pub fn report_json<T: Report>(report: &T) -> String {
    let env = EnvelopeOut {
        schema: REPORT_SCHEMA,
        schema_version: REPORT_SCHEMA_VERSION,
        kind: T::KIND,
        data: report,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_report<T: Report>(path: &Path, report: &T) -> Result<(), IoError> {
    fs::write(path, report_json(report)).map_err(|e| IoError::io(path, e))
}

pub fn read_report<T: Report>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let env: EnvelopeIn<T> = serde_json::from_str(&text).map_err(|e| IoError::json(path, e))?;
    if env.schema != REPORT_SCHEMA || env.schema_version != REPORT_SCHEMA_VERSION {
        return Err(IoError::json(
            path,
            format!("unsupported schema {} v{}", env.schema, env.schema_version),
        ));
    }
    if env.kind != T::KIND {
        return Err(IoError::json(path, format!("expected a {} report, found {}", T::KIND, env.kind)));
    }
    Ok(env.data)
}

/// Curve table with columns `lambda, gamma_0..gamma_N, rho_0..rho_N`.
pub fn write_curves_csv(path: &Path, curves: &LimitCurves) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let n = curves.order();
    let mut head = vec!["lambda".to_string()];
    head.extend((0..=n).map(|j| format!("gamma_{j}")));
    head.extend((0..=n).map(|j| format!("rho_{j}")));
    let mut body = head.join(",");
    body.push('\n');
    for (i, l) in curves.lambda.iter().enumerate() {
        let _ = write!(body, "{l:.16e}");
        for v in curves.gamma[i].iter().chain(&curves.rho[i]) {
            let _ = write!(body, ",{v:.16e}");
        }
        body.push('\n');
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| IoError::io(path, e))
}

/// Writes the curves as a JSON report and a CSV next to it (same stem).
pub fn write_curves(path: &Path, curves: &LimitCurves) -> Result<PathBuf, IoError> {
    write_report(path, curves)?;
    let csv = path.with_extension("csv");
    write_curves_csv(&csv, curves)?;
    Ok(csv)
}
