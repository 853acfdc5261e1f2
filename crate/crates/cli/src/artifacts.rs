//! Output files: numeric tables, hashes and the artifact index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// JSON number, or `"inf"`, `"-inf"`, `"nan"` for values JSON cannot hold.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Column-named numeric table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or("empty table")?
            .split(',')
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("row {}: {e}", i + 1))?;
            if row.len() != header.len() {
                return Err(format!("row {} has {} cells, header has {}", i + 1, row.len(), header.len()));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Writes files under one directory and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactDir {
    pub dir: PathBuf,
    pub hashes: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    /// Writes `name` (a relative path) and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn index(&self) -> Value {
        Value::Object(self.hashes.iter().map(|(k, v)| (k.clone(), Value::from(v.as_str()))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        let vals = [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 5e-324, f64::MAX, 2.0];
        let mut t = Table::new(&["a"]);
        for v in vals {
            t.push(vec![v]);
        }
        let back = Table::parse_csv(&t.to_csv()).unwrap();
        for (a, b) in vals.iter().zip(back.column("a").unwrap()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn non_finite_json_values_are_strings() {
        assert_eq!(num(f64::INFINITY), Value::from("inf"));
        assert_eq!(num(f64::NAN), Value::from("nan"));
        assert_eq!(num(0.5), Value::from(0.5));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(Table::parse_csv("a,b\n1,2\n3\n").is_err());
        assert!(Table::parse_csv("a\nx\n").is_err());
    }
}
