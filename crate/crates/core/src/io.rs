//! Prediction dumps and benchmark reports on disk.
//!
//! A dump is a CSV with header `p0,...,p{k-1}` and an optional trailing
//! `label` column, one example per row. JSON dumps hold
//! `{"vectors": [[...], ...], "labels": [...]}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{AggregateRow, RunRecord};
use crate::simplex::{canonical_sum, validate_vector, PredictionSet, ProbabilityVector, DEFAULT_TOLERANCE};

/// Sum tolerance when renormalization is switched off.
pub const STRICT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DumpFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for DumpFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(DumpFormat::Csv),
            "json" => Ok(DumpFormat::Json),
            other => Err(format!("unknown format '{other}' (csv|json)")),
        }
    }
}

impl DumpFormat {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DumpFormat::Json,
            _ => DumpFormat::Csv,
        }
    }
}

fn parse_err(row: Option<usize>, msg: impl Into<String>) -> Error {
    Error::Parse {
        row,
        msg: msg.into(),
    }
}

/// Validates one raw row. With `renormalize` off the sum must be within
/// [`STRICT_TOLERANCE`] of 1.
fn to_vector(raw: Vec<f64>, renormalize: bool) -> Result<ProbabilityVector> {
    if !renormalize && raw.iter().all(|x| x.is_finite()) {
        let sum = canonical_sum(&mut raw.clone());
        if (sum - 1.0).abs() > STRICT_TOLERANCE {
            return Err(Error::NotOnSimplex {
                row: None,
                detail: format!("components sum to {sum}, renormalization is off"),
            });
        }
    }
    validate_vector(raw, DEFAULT_TOLERANCE)
}

fn build_set(vectors: Vec<ProbabilityVector>, labels: Option<Vec<usize>>) -> Result<PredictionSet> {
    if vectors.is_empty() {
        return Err(parse_err(None, "no data rows"));
    }
    PredictionSet::new(vectors, labels)
}

/// Parses a CSV dump. Data rows are numbered from 1.
pub fn read_csv_dump<R: Read>(reader: R, renormalize: bool) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(None, format!("header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_label = names.last() == Some(&"label");
    let k = names.len() - usize::from(has_label);
    if k < 2 {
        return Err(parse_err(None, format!("header needs at least p0,p1, got {names:?}")));
    }
    for (i, name) in names[..k].iter().enumerate() {
        if *name != format!("p{i}") {
            return Err(parse_err(None, format!("header column {i} is '{name}', expected 'p{i}'")));
        }
    }

    let mut vectors = Vec::new();
    let mut labels = has_label.then(Vec::new);
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| parse_err(Some(row), e.to_string()))?;
        if rec.len() != names.len() {
            return Err(parse_err(
                Some(row),
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        let raw = rec
            .iter()
            .take(k)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(Some(row), format!("'{f}' is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        vectors.push(to_vector(raw, renormalize).map_err(|e| e.at_row(row))?);
        if let Some(ls) = labels.as_mut() {
            let f = &rec[k];
            let label: usize = f
                .parse()
                .map_err(|_| parse_err(Some(row), format!("label '{f}' is not a non-negative integer")))?;
            if label >= k {
                return Err(Error::LabelOutOfRange { label, k }.at_row(row));
            }
            ls.push(label);
        }
    }
    build_set(vectors, labels)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDump {
    vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

/// Parses a JSON dump. Rows are numbered from 1 in error messages.
pub fn read_json_dump<R: Read>(reader: R, renormalize: bool) -> Result<PredictionSet> {
    let dump: JsonDump = serde_json::from_reader(reader).map_err(|e| parse_err(None, e.to_string()))?;
    if let Some(ls) = &dump.labels {
        if ls.len() != dump.vectors.len() {
            return Err(parse_err(
                None,
                format!("{} labels for {} vectors", ls.len(), dump.vectors.len()),
            ));
        }
    }
    let k = dump.vectors.first().map_or(0, Vec::len);
    let mut vectors = Vec::with_capacity(dump.vectors.len());
    for (i, raw) in dump.vectors.into_iter().enumerate() {
        let row = i + 1;
        if raw.len() != k {
            return Err(parse_err(Some(row), format!("expected {k} components, found {}", raw.len())));
        }
        vectors.push(to_vector(raw, renormalize).map_err(|e| e.at_row(row))?);
    }
    if let Some(ls) = &dump.labels {
        if let Some((i, &label)) = ls.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::LabelOutOfRange { label, k }.at_row(i + 1));
        }
    }
    build_set(vectors, dump.labels)
}

pub fn read_dump<R: Read>(reader: R, format: DumpFormat, renormalize: bool) -> Result<PredictionSet> {
    match format {
        DumpFormat::Csv => read_csv_dump(reader, renormalize),
        DumpFormat::Json => read_json_dump(reader, renormalize),
    }
}

/// Loads a CSV dump from disk.
pub fn load_dump(path: impl AsRef<Path>, renormalize: bool) -> Result<PredictionSet> {
    load_dump_as(path, DumpFormat::Csv, renormalize)
}

pub fn load_dump_as(path: impl AsRef<Path>, format: DumpFormat, renormalize: bool) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    read_dump(BufReader::new(file), format, renormalize)
}

/// Shortest decimal of `x` rounded to 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    format!("{rounded}")
}

pub fn write_csv_dump<W: Write>(writer: W, data: &PredictionSet) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let k = data.k();
    let mut header: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
    if data.is_labeled() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, v) in data.vectors().iter().enumerate() {
        let mut fields: Vec<String> = v.components().iter().map(|&x| format_sig12(x)).collect();
        if let Some(ls) = data.labels() {
            fields.push(ls[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json_dump<W: Write>(writer: W, data: &PredictionSet) -> Result<()> {
    let dump = JsonDump {
        vectors: data
            .vectors()
            .iter()
            .map(|v| v.components().iter().map(|&x| format_sig12(x).parse().unwrap()).collect())
            .collect(),
        labels: data.labels().map(<[usize]>::to_vec),
    };
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(&mut w, &dump).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dump<W: Write>(writer: W, data: &PredictionSet, format: DumpFormat) -> Result<()> {
    match format {
        DumpFormat::Csv => write_csv_dump(writer, data),
        DumpFormat::Json => write_json_dump(writer, data),
    }
}

pub fn save_dump(path: impl AsRef<Path>, data: &PredictionSet, format: DumpFormat) -> Result<()> {
    write_dump(File::create(path)?, data, format)
}

/// Runs CSV: `dimension,method,run,abs_error`.
pub fn write_runs_csv<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "dimension,method,run,abs_error")?;
    for r in records {
        writeln!(w, "{},{},{},{:?}", r.dimension, r.method, r.run_index, r.abs_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate CSV: `dimension,method,mean,ci_low,ci_high`.
pub fn write_aggregate_csv<W: Write>(writer: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "dimension,method,mean,ci_low,ci_high")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:?},{:?},{:?}",
            r.dimension, r.method, r.mean_abs_error, r.ci_low, r.ci_high
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Method;
    use crate::score::ScoreFunctionId;

    fn csv(s: &str, renorm: bool) -> Result<PredictionSet> {
        read_csv_dump(s.as_bytes(), renorm)
    }

    #[test]
    fn load_examples() {
        let s = csv("p0,p1\n0.9,0.1\n", true).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.vectors()[0].components(), &[0.9, 0.1]);
        assert!(!s.is_labeled());

        let s = csv("p0,p1,p2\n0.3,0.3000004,0.4\n", true).unwrap();
        let sum: f64 = s.vectors()[0].components().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);

        match csv("p0,p1\n0.5,0.5\n0.5,0.6\n", true) {
            Err(Error::NotOnSimplex { row: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_small_drift() {
        assert!(csv("p0,p1\n0.5,0.5000004\n", true).is_ok());
        match csv("p0,p1\n0.5,0.5\n0.5,0.5000004\n", false) {
            Err(Error::NotOnSimplex { row: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(csv("p0,p1\n0.5,0.5\n", false).is_ok());
    }

    #[test]
    fn labels_and_errors() {
        let s = csv("p0,p1,label\n0.9,0.1,0\n0.2,0.8,0\n", true).unwrap();
        assert_eq!(s.labels(), Some(&[0usize, 0][..]));
        match csv("p0,p1,label\n0.9,0.1,2\n", true) {
            Err(Error::Parse { row: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
        match csv("p0,p1\n0.9,abc\n", true) {
            Err(Error::Parse { row: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(csv("p0,p2\n0.9,0.1\n", true), Err(Error::Parse { row: None, .. })));
        assert!(matches!(csv("p0\n1.0\n", true), Err(Error::Parse { .. })));
        assert!(matches!(csv("p0,p1\n", true), Err(Error::Parse { .. })));
    }

    #[test]
    fn sig12_format() {
        assert_eq!(format_sig12(0.1), "0.1");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(2.5e-7), "0.00000025");
    }

    #[test]
    fn json_round_trip() {
        let s = csv("p0,p1,p2,label\n0.2,0.3,0.5,2\n0.6,0.2,0.2,1\n", true).unwrap();
        let mut buf = Vec::new();
        write_json_dump(&mut buf, &s).unwrap();
        assert_eq!(read_json_dump(&buf[..], false).unwrap(), s);
        assert!(matches!(
            read_json_dump(&br#"{"vectors":[[0.5,0.5],[0.3,0.3,0.4]]}"#[..], true),
            Err(Error::Parse { row: Some(2), .. })
        ));
    }

    #[test]
    fn report_csvs() {
        let m = Method::Atc(ScoreFunctionId::MaxConf);
        let mut buf = Vec::new();
        write_runs_csv(
            &mut buf,
            &[RunRecord {
                dimension: 3,
                method: m,
                run_index: 0,
                abs_error: 0.125,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dimension,method,run,abs_error\n3,max,0,0.125\n");
        let mut buf = Vec::new();
        write_aggregate_csv(
            &mut buf,
            &[AggregateRow {
                dimension: 3,
                method: m,
                mean_abs_error: 0.0,
                ci_low: 0.0,
                ci_high: 0.5,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dimension,method,mean,ci_low,ci_high\n3,max,0.0,0.0,0.5\n"
        );
    }
}
