//! File formats: sequence JSON, sequence references, experiment configs and
//! CSV tables.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angle::Angle;
use crate::ensemble::{
    effective_eps, ensemble_signal, nutation_curve, signal, B1Distribution, ExperimentConfig, Filter, DEFAULT_QUADRATURE,
};
use crate::error::{invalid, Error, Result};
use crate::families::{angle_from_degrees, bb1, compose_word, wn_assemble_degrees, Placement};
use crate::search::refine_phases;
use crate::series::Target;
use crate::su2::{Pulse, PulseSequence};
use crate::tables;

/// One pulse as stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseRecord {
    pub theta_degrees: f64,
    pub phase_degrees: f64,
}

pub fn pulse_records(seq: &PulseSequence) -> Vec<PulseRecord> {
    seq.pulses()
        .iter()
        .map(|p| PulseRecord {
            theta_degrees: p.theta().to_degrees(),
            phase_degrees: p.phi().to_degrees(),
        })
        .collect()
}

pub fn sequence_from_records(records: &[PulseRecord], label: &str) -> Result<PulseSequence> {
    let pulses = records
        .iter()
        .map(|r| Pulse::new(angle_from_degrees(r.theta_degrees), angle_from_degrees(r.phase_degrees)))
        .collect::<Result<Vec<_>>>()?;
    PulseSequence::new(pulses, label)
}

/// Sequence as a pretty-printed JSON list of pulses.
pub fn sequence_to_json(seq: &PulseSequence) -> String {
    let mut s = serde_json::to_string_pretty(&pulse_records(seq)).expect("plain data");
    s.push('\n');
    s
}

pub fn sequence_from_json(text: &str) -> Result<PulseSequence> {
    let records: Vec<PulseRecord> = serde_json::from_str(text).map_err(|e| Error::Format(format!("sequence file: {e}")))?;
    sequence_from_records(&records, "")
}

pub fn read_sequence_file(path: &Path) -> Result<PulseSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let seq = sequence_from_json(&text)?;
    Ok(match path.file_stem() {
        Some(stem) => seq.with_label(stem.to_string_lossy()),
        None => seq,
    })
}

/// W_n correction around a plain pulse, from explicit phases or a
/// reference-table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WnSpec {
    pub angle_degrees: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_degrees: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<String>,
    /// Polish the phases to the nearby exact solution before assembly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub refine: bool,
}

impl WnSpec {
    pub fn placement(&self) -> Result<Placement> {
        self.placement.as_deref().map_or(Ok(Placement::default()), str::parse)
    }

    /// Phases in degrees after table lookup and optional refinement.
    pub fn phases(&self) -> Result<Vec<f64>> {
        let raw = match (&self.phases_degrees, self.table_row) {
            (Some(p), None) => p.clone(),
            (None, Some(row)) => {
                let n = self.n.ok_or_else(|| invalid("a table row needs n"))?;
                tables::row_for(n, self.angle_degrees, row)?.phases_degrees.to_vec()
            }
            (Some(_), Some(_)) => return Err(invalid("give either phases or a table row, not both")),
            (None, None) => return Err(invalid("W_n needs phases or a table row")),
        };
        if let Some(n) = self.n {
            if raw.len() != 2 * n {
                return Err(invalid(format!("W{n} takes {} phases, got {}", 2 * n, raw.len())));
            }
        }
        if self.refine {
            Ok(refine_phases(self.angle_degrees, &raw, self.placement()?)?.0)
        } else {
            Ok(raw)
        }
    }
}

/// Ways to name a sequence in configs and on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceRef {
    /// Family word such as `F2`, `GF` or `N1`.
    Word(String),
    Naive { angle_degrees: f64 },
    Bb1 { angle_degrees: f64 },
    Wn(WnSpec),
    Pulses(Vec<PulseRecord>),
    File(PathBuf),
}

/// A sequence with the gate it is meant to implement.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub sequence: PulseSequence,
    pub target: Target,
}

fn plain(angle_degrees: f64) -> Result<Pulse> {
    if !(angle_degrees.is_finite() && angle_degrees > 0.0) {
        return Err(invalid(format!("rotation angle must be positive, got {angle_degrees}")));
    }
    Pulse::new(angle_from_degrees(angle_degrees), Angle::zero())
}

impl SequenceRef {
    /// Inline pulses and files target a 180° pulse about x.
    pub fn resolve(&self) -> Result<Resolved> {
        match self {
            SequenceRef::Word(w) => Ok(Resolved {
                sequence: compose_word(w)?,
                target: Target::pi_x(),
            }),
            SequenceRef::Naive { angle_degrees } => {
                let p = plain(*angle_degrees)?;
                Ok(Resolved {
                    sequence: PulseSequence::single(p.clone()).with_label(format!("naive{angle_degrees}")),
                    target: p.into(),
                })
            }
            SequenceRef::Bb1 { angle_degrees } => {
                let p = plain(*angle_degrees)?;
                Ok(Resolved {
                    sequence: bb1(p.theta())?,
                    target: p.into(),
                })
            }
            SequenceRef::Wn(spec) => {
                let p = plain(spec.angle_degrees)?;
                let phases = spec.phases()?;
                let label = format!("W{}", phases.len() / 2);
                Ok(Resolved {
                    sequence: wn_assemble_degrees(spec.angle_degrees, &phases, spec.placement()?)?.with_label(label),
                    target: p.into(),
                })
            }
            SequenceRef::Pulses(records) => Ok(Resolved {
                sequence: sequence_from_records(records, "")?,
                target: Target::pi_x(),
            }),
            SequenceRef::File(path) => Ok(Resolved {
                sequence: read_sequence_file(path)?,
                target: Target::pi_x(),
            }),
        }
    }
}

/// Explicit list or inclusive `start:stop:step` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::List(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("grid values must be finite"));
                }
                Ok(v.clone())
            }
            GridSpec::Range { start, stop, step } => Ok(crate::scan::Range::new(*start, *stop, *step)?.values()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub sequence: SequenceRef,
    #[serde(default = "two")]
    pub echo_count: u32,
}

fn two() -> u32 {
    2
}

fn default_quadrature() -> usize {
    DEFAULT_QUADRATURE
}

fn yes() -> bool {
    true
}

/// Experiment description read from JSON. With `durations_us` set the run
/// is a nutation experiment and `sequence`/`eps_len` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_len: Option<GridSpec>,
    pub distribution: B1Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    /// Divide by the naive 90° ensemble signal at zero length error.
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations_us: Option<GridSpec>,
}

impl ExperimentFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ExperimentFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("experiment config: {e}")))?;
        f.distribution.validate()?;
        Ok(f)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the normalized JSON form, hex encoded.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn filter(&self) -> Result<Option<Filter>> {
        self.filter
            .as_ref()
            .map(|f| {
                Ok(Filter {
                    sequence: f.sequence.resolve()?.sequence,
                    echo_count: f.echo_count,
                })
            })
            .transpose()
    }

    pub fn run(&self) -> Result<Table> {
        let hash = self.hash();
        let filter = self.filter()?;
        if let Some(d) = &self.durations_us {
            let t = d.values()?;
            let vals = nutation_curve(&t, &self.distribution, filter.as_ref(), self.quadrature)?;
            let mut table = Table::new(&["duration_us", "signal", "refinement_change", "warning", "config_hash"]);
            for (ti, v) in t.iter().zip(vals) {
                table.push(vec![num(*ti), num(v.value), num(v.refinement_change), v.warning.to_string(), hash.clone()]);
            }
            return Ok(table);
        }
        let seq = self
            .sequence
            .as_ref()
            .ok_or_else(|| invalid("experiment needs a sequence or durations"))?
            .resolve()?
            .sequence;
        let eps = self
            .eps_len
            .as_ref()
            .ok_or_else(|| invalid("experiment needs an eps_len grid"))?
            .values()?;
        let mut config = ExperimentConfig::new(seq.clone(), eps.clone(), self.distribution.clone());
        config.quadrature = self.quadrature;
        config.filter = filter;
        config.validate()?;
        let reference = if self.normalize {
            let naive = PulseSequence::single(plain(90.0)?);
            let r = ensemble_signal(&ExperimentConfig { sequence: naive, ..config.clone() }, 0.0)?.value;
            if r.abs() < 1e-12 {
                return Err(invalid("reference signal vanishes; cannot normalize"));
            }
            r
        } else {
            1.0
        };
        let rows: Vec<Vec<String>> = eps
            .par_iter()
            .map(|&e| {
                let v = ensemble_signal(&config, e)?;
                Ok(vec![
                    num(e),
                    num(v.value / reference),
                    num(signal(&seq, effective_eps(e, 0.0), 0.0)),
                    num(v.refinement_change),
                    v.warning.to_string(),
                    hash.clone(),
                ])
            })
            .collect::<Result<_>>()?;
        let mut table = Table::new(&["eps_len", "signal", "eps_only", "refinement_change", "warning", "config_hash"]);
        table.rows = rows;
        Ok(table)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("plain data");
    hex::encode(Sha256::digest(&bytes))
}

/// Shortest round-trip form, switching to exponent notation for very large
/// or small magnitudes.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite")
    } else {
        format!("{x}")
    }
}

/// Header plus rows, written as RFC 4180 CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8 input")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()).map_err(|e| Error::Format(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Writes `contents` to `path`, or stdout when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, contents).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        _ => {
            use std::io::Write;
            std::io::stdout()
                .write_all(contents.as_bytes())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}
