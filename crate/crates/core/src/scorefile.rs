//! Per-model log-density dumps: CSV with an `id,logp` header or JSON lines
//! of the form `{"id": "...", "logp": -12.3}`. Values are nats.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{ScoreEntry, ScoreSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Csv,
    Jsonl,
}

impl ScoreFormat {
    /// Guesses from the extension: `.csv`, or `.jsonl`/`.ndjson`/`.json`.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" => Some(ScoreFormat::Csv),
            "jsonl" | "ndjson" | "json" => Some(ScoreFormat::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub id: String,
    pub logp: f64,
}

/// The records of one file, ids unique, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreFile {
    pub records: Vec<ScoreRecord>,
}

impl ScoreFile {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

struct Builder {
    bits: bool,
    seen: HashSet<String>,
    records: Vec<ScoreRecord>,
}

impl Builder {
    fn push(&mut self, line: u64, id: String, logp: f64) -> Result<()> {
        if !logp.is_finite() {
            return Err(Error::Parse { line, message: format!("logp for id `{id}` is not finite") });
        }
        if !self.seen.insert(id.clone()) {
            return Err(Error::Parse { line, message: format!("duplicate id `{id}`") });
        }
        let logp = if self.bits { logp * std::f64::consts::LN_2 } else { logp };
        self.records.push(ScoreRecord { id, logp });
        Ok(())
    }
}

fn parse_csv<R: Read>(reader: R, b: &mut Builder) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        Error::Parse { line, message: e.to_string() }
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing required column `{name}`") })
    };
    let (id_col, logp_col) = (col("id")?, col("logp")?);
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let raw = field(logp_col);
        let logp: f64 =
            raw.parse().map_err(|_| Error::Parse { line, message: format!("logp `{raw}` is not a number") })?;
        b.push(line, field(id_col).to_string(), logp)?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonId {
    Text(String),
    Int(i64),
    Uint(u64),
}

#[derive(Deserialize)]
struct JsonRecord {
    id: JsonId,
    logp: f64,
}

fn parse_jsonl<R: BufRead>(reader: R, b: &mut Builder) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let id = match rec.id {
            JsonId::Text(s) => s,
            JsonId::Int(v) => v.to_string(),
            JsonId::Uint(v) => v.to_string(),
        };
        b.push(line_no, id, rec.logp)?;
    }
    Ok(())
}

/// Parses one dump. With `bits`, values are read as log₂ and converted to nats.
pub fn parse_scores<R: Read>(reader: R, format: ScoreFormat, bits: bool) -> Result<ScoreFile> {
    let mut b = Builder { bits, seen: HashSet::new(), records: Vec::new() };
    match format {
        ScoreFormat::Csv => parse_csv(reader, &mut b)?,
        ScoreFormat::Jsonl => parse_jsonl(BufReader::new(reader), &mut b)?,
    }
    Ok(ScoreFile { records: b.records })
}

/// Reads a dump, detecting the format from the extension unless given.
pub fn read_score_file(path: &Path, format: Option<ScoreFormat>, bits: bool) -> Result<ScoreFile> {
    let format = format.or_else(|| ScoreFormat::from_path(path)).ok_or_else(|| {
        Error::InvalidParameter(format!("cannot infer format of `{}`; pass it explicitly", path.display()))
    })?;
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scores(file, format, bits)
}

/// Pairs the two files on `id`, in the order of `first`. Every id must appear
/// in both; otherwise the error lists each missing id once, sorted.
pub fn join_scores(first: &ScoreFile, second: &ScoreFile) -> Result<ScoreSample> {
    let lookup: HashMap<&str, f64> = second.records.iter().map(|r| (r.id.as_str(), r.logp)).collect();
    let in_first: HashSet<&str> = first.records.iter().map(|r| r.id.as_str()).collect();
    let mut missing: Vec<String> = first
        .records
        .iter()
        .filter(|r| !lookup.contains_key(r.id.as_str()))
        .chain(second.records.iter().filter(|r| !in_first.contains(r.id.as_str())))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Join { missing });
    }
    if first.is_empty() {
        return Err(Error::EmptySample);
    }
    let entries = first
        .records
        .iter()
        .map(|r| ScoreEntry { id: r.id.clone(), ell1: r.logp, ell2: lookup[r.id.as_str()] })
        .collect();
    ScoreSample::new(entries)
}

/// Writes records so that [`parse_scores`] (without `bits`) reproduces them
/// exactly.
pub fn write_scores<W: Write>(writer: W, records: &[ScoreRecord], format: ScoreFormat) -> Result<()> {
    match format {
        ScoreFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(["id", "logp"]).map_err(io)?;
            for r in records {
                w.write_record([r.id.as_str(), &r.logp.to_string()]).map_err(io)?;
            }
            w.flush()?;
        }
        ScoreFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(writer);
            for r in records {
                let line = serde_json::json!({ "id": r.id, "logp": r.logp });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<ScoreFile> {
        parse_scores(text.as_bytes(), ScoreFormat::Csv, false)
    }

    #[test]
    fn csv_with_extra_columns_and_quoting() {
        let f = csv("model,id,logp\nm,\"a,1\",-1.5\nm,b,2e-3\n").unwrap();
        assert_eq!(f.records[0], ScoreRecord { id: "a,1".into(), logp: -1.5 });
        assert_eq!(f.records[1].logp, 0.002);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        assert_eq!(
            csv("id,logp\na,1\nb,x\n").unwrap_err(),
            Error::Parse { line: 3, message: "logp `x` is not a number".into() }
        );
        assert!(matches!(csv("id,logp\na,1\na,2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(csv("id,score\na,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(csv("id,logp\na,-inf\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn jsonl_parses_numeric_ids_and_skips_blank_lines() {
        let text = "{\"id\": 7, \"logp\": -3.0}\n\n{\"id\": \"x\", \"logp\": 1}\n";
        let f = parse_scores(text.as_bytes(), ScoreFormat::Jsonl, false).unwrap();
        assert_eq!(f.records[0].id, "7");
        assert_eq!(f.records[1].logp, 1.0);
        let bad = "{\"id\": 1, \"logp\": 0}\n{\"id\": 2}\n";
        assert!(matches!(parse_scores(bad.as_bytes(), ScoreFormat::Jsonl, false), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn bits_convert_to_nats() {
        let f = parse_scores("id,logp\na,-2\n".as_bytes(), ScoreFormat::Csv, true).unwrap();
        assert_eq!(f.records[0].logp, -2.0 * std::f64::consts::LN_2);
    }

    #[test]
    fn join_is_total_or_lists_missing() {
        let a = csv("id,logp\nx,1\ny,2\nz,3\n").unwrap();
        let b = csv("id,logp\nz,0\nx,0\nw,0\n").unwrap();
        assert_eq!(join_scores(&a, &b).unwrap_err(), Error::Join { missing: vec!["w".into(), "y".into()] });
        let b = csv("id,logp\nz,0.5\ny,0\nx,0\n").unwrap();
        let s = join_scores(&a, &b).unwrap();
        assert_eq!(s.diffs().collect::<Vec<_>>(), vec![1.0, 2.0, 2.5]);
        assert_eq!(s.id(2), "z");
    }

    #[test]
    fn round_trip_is_exact() {
        let records: Vec<ScoreRecord> = [0.1, -1e-300, 12345.678901234567, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| ScoreRecord { id: format!("id \"{i}\", q"), logp: v })
            .collect();
        for format in [ScoreFormat::Csv, ScoreFormat::Jsonl] {
            let mut buf = Vec::new();
            write_scores(&mut buf, &records, format).unwrap();
            let back = parse_scores(buf.as_slice(), format, false).unwrap();
            assert_eq!(back.records.len(), records.len());
            for (a, b) in back.records.iter().zip(&records) {
                assert_eq!(a.id, b.id);
                assert_eq!(a.logp.to_bits(), b.logp.to_bits());
            }
        }
    }
}
