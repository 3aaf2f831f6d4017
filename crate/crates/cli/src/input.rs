//! Numeric tables from CSV (one column per chain, optional header, `#`
//! comments) or NDJSON records `{"chain": int, "value": real}`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<f64>>,
    /// From a `# resolution: S` comment.
    pub resolution: Option<u64>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.width())
            .map(|c| self.rows.iter().map(|r| r[c]).collect())
            .collect()
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    let table = if matches!(ext, "ndjson" | "jsonl") || first.is_some_and(|l| l.starts_with('{')) {
        parse_ndjson(&text, path)?
    } else {
        parse_csv(&text, path)?
    };
    if table.rows.is_empty() {
        return Err(CliError::parse(path, 1, "no data rows"));
    }
    Ok(table)
}

fn resolution_comment(text: &str, path: &Path) -> Result<Option<u64>> {
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.trim().strip_prefix('#') else {
            continue;
        };
        if let Some(v) = rest.trim().strip_prefix("resolution:") {
            let s = v.trim().parse::<u64>().map_err(|_| {
                CliError::parse(path, i as u64 + 1, format!("bad resolution {:?}", v.trim()))
            })?;
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn parse_csv(text: &str, path: &Path) -> Result<Table> {
    let resolution = resolution_comment(text, path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            // a non-numeric first record is a header
            Err(_) if i == 0 => continue,
            Err(_) => return Err(CliError::parse(path, line, "non-numeric value")),
        };
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(CliError::parse(path, line, format!("non-finite value {v}")));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!(
                        "ragged columns: {} fields, expected {}",
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    Ok(Table { rows, resolution })
}

#[derive(Deserialize)]
struct Record {
    chain: usize,
    value: f64,
}

fn parse_ndjson(text: &str, path: &Path) -> Result<Table> {
    let resolution = resolution_comment(text, path)?;
    let mut chains: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let r: Record = serde_json::from_str(line)
            .map_err(|e| CliError::parse(path, i as u64 + 1, e.to_string()))?;
        if !r.value.is_finite() {
            return Err(CliError::parse(path, i as u64 + 1, "non-finite value"));
        }
        chains.entry(r.chain).or_default().push(r.value);
    }
    let columns: Vec<(usize, Vec<f64>)> = chains.into_iter().collect();
    let n = columns.first().map_or(0, |c| c.1.len());
    if let Some((id, c)) = columns.iter().find(|c| c.1.len() != n) {
        return Err(CliError::parse(
            path,
            0,
            format!(
                "ragged columns: chain {id} has {} draws, expected {n}",
                c.len()
            ),
        ));
    }
    let rows = (0..n)
        .map(|i| columns.iter().map(|c| c.1[i]).collect())
        .collect();
    Ok(Table { rows, resolution })
}

/// Write columns as CSV with a `chain_1, chain_2, ...` header.
pub fn write_columns(out: impl Write, columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=columns.len()).map(|c| format!("chain_{c}")))?;
    let n = columns.first().map_or(0, Vec::len);
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()
        .map_err(|e| CliError::io(Path::new("<output>"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Table> {
        parse_csv(text, Path::new("t.csv"))
    }

    #[test]
    fn header_comments_and_resolution() {
        let t = csv("# resolution: 9\na,b\n# note\n1, 2\n3,4\n").unwrap();
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(t.resolution, Some(9));
        assert_eq!(t.columns(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn ragged_and_garbage_rows_fail() {
        assert!(matches!(
            csv("1,2\n3\n"),
            Err(CliError::Parse { line: 2, .. })
        ));
        assert!(csv("1\nx\n").is_err());
        assert!(csv("1\nNaN\n").is_err());
    }

    #[test]
    fn ndjson_groups_by_chain() {
        let text = "{\"chain\": 2, \"value\": 0.5}\n{\"chain\": 1, \"value\": 0.1}\n{\"chain\": 2, \"value\": 0.7}\n{\"chain\": 1, \"value\": 0.2}\n";
        let t = parse_ndjson(text, Path::new("t.ndjson")).unwrap();
        assert_eq!(t.rows, vec![vec![0.1, 0.5], vec![0.2, 0.7]]);
        let ragged = "{\"chain\": 0, \"value\": 1}\n{\"chain\": 1, \"value\": 1}\n{\"chain\": 1, \"value\": 2}\n";
        assert!(parse_ndjson(ragged, Path::new("t.ndjson")).is_err());
    }
}
