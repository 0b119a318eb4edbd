//! Long-format CSV records.
//!
//! Files start with a `# sensel-records v1` line followed by a normal CSV
//! header. Floats use the shortest round-trip representation (`inf` for
//! singular values); subsets are `;`-joined 0-based sensor indices.
//! `wall_us` is always the last column and is the only non-reproducible one.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Result, SelectError};

pub const SCHEMA_LINE: &str = "# sensel-records v1";

pub const COLUMNS: [&str; 18] = [
    "scenario",
    "experiment",
    "target",
    "algorithm",
    "kappa",
    "seed",
    "m",
    "value",
    "mse",
    "op_count",
    "subset",
    "weights",
    "converged",
    "relaxed_value",
    "zero_penalty_rate",
    "repaired",
    "error",
    "wall_us",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub scenario: String,
    pub experiment: usize,
    /// Grid target index (dynamic suite only).
    pub target: Option<usize>,
    pub algorithm: String,
    pub kappa: Option<f64>,
    pub seed: u64,
    pub m: usize,
    /// CRLB (dynamic) or worst-case CRLB (robust) of `subset`; for the
    /// `relaxed` row, of `weights`.
    pub value: f64,
    /// Monte-Carlo MSE of the Gauss-Newton estimator (dynamic suite with
    /// `mse_trials` set).
    pub mse: Option<f64>,
    pub op_count: Option<u64>,
    pub subset: Vec<usize>,
    /// Relaxed selection weights (`relaxed` and `dcp` rows).
    pub weights: Vec<f64>,
    pub converged: bool,
    pub relaxed_value: Option<f64>,
    pub zero_penalty_rate: Option<f64>,
    pub repaired: bool,
    pub error: Option<String>,
    pub wall_us: u64,
}

impl ExperimentRecord {
    pub fn new(scenario: &str, experiment: usize, algorithm: &str, seed: u64, m: usize) -> Self {
        ExperimentRecord {
            scenario: scenario.to_string(),
            experiment,
            target: None,
            algorithm: algorithm.to_string(),
            kappa: None,
            seed,
            m,
            value: f64::NAN,
            mse: None,
            op_count: None,
            subset: Vec::new(),
            weights: Vec::new(),
            converged: false,
            relaxed_value: None,
            zero_penalty_rate: None,
            repaired: false,
            error: None,
            wall_us: 0,
        }
    }

    fn to_row(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.scenario.clone(),
            self.experiment.to_string(),
            opt(self.target.map(|t| t.to_string())),
            self.algorithm.clone(),
            opt(self.kappa.map(fmt_f64)),
            self.seed.to_string(),
            self.m.to_string(),
            fmt_f64(self.value),
            opt(self.mse.map(fmt_f64)),
            opt(self.op_count.map(|c| c.to_string())),
            join(self.subset.iter().map(|s| s.to_string())),
            join(self.weights.iter().map(|&w| fmt_f64(w))),
            self.converged.to_string(),
            opt(self.relaxed_value.map(fmt_f64)),
            opt(self.zero_penalty_rate.map(fmt_f64)),
            self.repaired.to_string(),
            opt(self.error.clone()),
            self.wall_us.to_string(),
        ]
    }

    fn from_row(row: &csv::StringRecord, line: usize) -> Result<Self> {
        if row.len() != COLUMNS.len() {
            return Err(bad_row(line, format!("expected {} fields, got {}", COLUMNS.len(), row.len())));
        }
        let f = |i: usize| &row[i];
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let num = |i: usize| -> Result<u64> { f(i).parse().map_err(|_| bad_row(line, format!("bad {}", COLUMNS[i]))) };
        let float = |i: usize| parse_f64(f(i)).ok_or_else(|| bad_row(line, format!("bad {}", COLUMNS[i])));
        let opt_float = |i: usize| -> Result<Option<f64>> {
            if f(i).is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        let flag = |i: usize| -> Result<bool> { f(i).parse().map_err(|_| bad_row(line, format!("bad {}", COLUMNS[i]))) };
        Ok(ExperimentRecord {
            scenario: f(0).to_string(),
            experiment: num(1)? as usize,
            target: if f(2).is_empty() { None } else { Some(num(2)? as usize) },
            algorithm: f(3).to_string(),
            kappa: opt_float(4)?,
            seed: num(5)?,
            m: num(6)? as usize,
            value: float(7)?,
            mse: opt_float(8)?,
            op_count: if f(9).is_empty() { None } else { Some(num(9)?) },
            subset: split(f(10))
                .map(|s| s.parse().map_err(|_| bad_row(line, "bad subset".into())))
                .collect::<Result<_>>()?,
            weights: split(f(11))
                .map(|s| parse_f64(s).ok_or_else(|| bad_row(line, "bad weights".into())))
                .collect::<Result<_>>()?,
            converged: flag(12)?,
            relaxed_value: opt_float(13)?,
            zero_penalty_rate: opt_float(14)?,
            repaired: flag(15)?,
            error: opt(f(16)),
            wall_us: num(17)?,
        })
    }
}

fn bad_row(line: usize, msg: String) -> SelectError {
    SelectError::Config(format!("record line {line}: {msg}"))
}

/// Shortest round-trip decimal; `inf`, `-inf` and `NaN` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "NaN" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').filter(|p| !p.is_empty())
}

pub fn write_records<W: Write>(mut out: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    if reader.read_line(&mut first)? == 0 {
        return Ok(Vec::new());
    }
    if first.trim_end() != SCHEMA_LINE {
        return Err(SelectError::Config(format!("unsupported record schema line {:?}", first.trim_end())));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(SelectError::Config("record header does not match the v1 column list".into()));
    }
    csv.records().enumerate().map(|(i, row)| ExperimentRecord::from_row(&row?, i + 3)).collect()
}

/// The CSV text with the `wall_us` column blanked, for byte comparisons.
pub fn strip_wall_time(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| if l.starts_with('#') { l } else { l.rsplit_once(',').map_or(l, |(head, _)| head) })
        .collect::<Vec<_>>()
        .join("\n")
}
