//! Tabular result emission. CSV is the primary format; JSON mirrors the
//! same rows as an array of objects. Floats are serialized with 9
//! significant digits in both formats.

use crate::adapt::{AdaptiveFrameRecord, FovEntry};
use crate::sim::SweepCell;
use std::io::{self, Write};

/// Bumped whenever any emitted column set changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Output encoding selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One typed cell of an output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    U64(u64),
    F64(f64),
    /// Optional float; empty CSV cell / JSON null when absent.
    OptF64(Option<f64>),
    Bool(bool),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::U64(v) => v.to_string(),
            Field::F64(v) => fmt_float(*v),
            Field::OptF64(Some(v)) => fmt_float(*v),
            Field::OptF64(None) => String::new(),
            Field::Bool(v) => v.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Field::U64(v) => serde_json::json!(v),
            Field::F64(v) => serde_json::json!(round_sig(*v)),
            Field::OptF64(Some(v)) => serde_json::json!(round_sig(*v)),
            Field::OptF64(None) => serde_json::Value::Null,
            Field::Bool(v) => serde_json::json!(v),
        }
    }
}

/// A row type with a fixed column schema.
pub trait Record {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<Field>;
}

/// Format a float with 9 significant digits in plain decimal notation.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

/// Round to the 9-significant-digit value the CSV would carry.
pub fn round_sig(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

/// Write records in the chosen format.
pub fn write_records<R: Record>(
    writer: &mut dyn Write,
    format: OutputFormat,
    records: &[R],
) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(writer, "{}", R::header().join(","))?;
            for record in records {
                let cells: Vec<String> = record.fields().iter().map(Field::csv).collect();
                writeln!(writer, "{}", cells.join(","))?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = records
                .iter()
                .map(|record| {
                    let mut obj = serde_json::Map::new();
                    for (name, field) in R::header().iter().zip(record.fields()) {
                        obj.insert((*name).to_string(), field.json());
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            serde_json::to_writer_pretty(&mut *writer, &rows)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

/// One sweep cell with the seed that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub cell: SweepCell,
    pub seed: u64,
}

impl Record for SweepRecord {
    fn header() -> &'static [&'static str] {
        &["pa", "fov_deg", "p_rec", "p_rec_se", "r_avg", "r_avg_se", "frames", "seed"]
    }

    fn fields(&self) -> Vec<Field> {
        let m = &self.cell.metrics;
        vec![
            Field::F64(self.cell.activation_probability),
            Field::F64(self.cell.fov_deg),
            Field::F64(m.p_rec),
            Field::F64(m.p_rec_se),
            Field::F64(m.r_avg),
            Field::F64(m.r_avg_se),
            Field::U64(m.frames),
            Field::U64(self.seed),
        ]
    }
}

/// One FOV lookup row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookupRecord(pub FovEntry);

impl Record for LookupRecord {
    fn header() -> &'static [&'static str] {
        &["pa", "fov_opt_deg", "r_avg_max", "p_rec_at_opt"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::F64(self.0.activation_probability),
            Field::F64(self.0.fov_opt_deg),
            Field::F64(self.0.r_avg_max),
            Field::F64(self.0.p_rec_at_opt),
        ]
    }
}

/// One closed-loop frame row; `slots_total` is receivers times slots per
/// frame, the throughput denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveRecord {
    pub record: AdaptiveFrameRecord,
    pub slots_total: usize,
}

impl Record for AdaptiveRecord {
    fn header() -> &'static [&'static str] {
        &[
            "frame",
            "pa_true",
            "pa_est",
            "fov_deg",
            "active",
            "sent",
            "decoded",
            "p_rec",
            "r_avg",
            "estimator_error",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        let r = &self.record;
        let p_rec = if r.sent == 0 { 1.0 } else { r.decoded as f64 / r.sent as f64 };
        vec![
            Field::U64(r.frame),
            Field::F64(r.pa_true),
            Field::OptF64(r.pa_estimate),
            Field::F64(r.fov_deg),
            Field::U64(r.active as u64),
            Field::U64(r.sent as u64),
            Field::U64(r.decoded as u64),
            Field::F64(p_rec),
            Field::F64(r.decoded as f64 / self.slots_total as f64),
            Field::Bool(r.estimator_error),
        ]
    }
}

/// One device-to-AP link of the gain matrix dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRecord {
    pub tx_index: usize,
    pub rx_index: usize,
    pub gain: f64,
    pub incidence_deg: f64,
}

impl Record for CoverageRecord {
    fn header() -> &'static [&'static str] {
        &["tx_index", "rx_index", "gain", "incidence_deg"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::U64(self.tx_index as u64),
            Field::U64(self.rx_index as u64),
            Field::F64(self.gain),
            Field::F64(self.incidence_deg),
        ]
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
