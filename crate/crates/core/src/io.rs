//! Plain-text artifacts: CSV tables and `key = value` manifests.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same value, so reruns produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn to_text(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Reads a table, skipping blank lines and lines starting with `#`.
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = r.headers().map_err(|e| Error::parse(path, e.to_string()))?.iter().map(String::from).collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(Error::parse(path, "missing header row"));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| Error::parse(path, e.to_string())))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Table { header, rows })
    }

    pub fn column_index(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column '{name}'")))
    }

    /// Every cell of the given columns parsed as `f64`, row by row.
    pub fn numeric(&self, columns: &[usize], path: &Path) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                columns
                    .iter()
                    .map(|&c| {
                        r[c].parse::<f64>()
                            .map_err(|_| Error::parse(path, format!("row {}: '{}' is not a number", i + 1, r[c])))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Sorted `key = value` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::parse(path, format!("manifest lacks '{key}'")))
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.require(key, path)?;
        raw.parse().map_err(|_| Error::parse(path, format!("'{key}' has unreadable value '{raw}'")))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Manifest::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::parse(path, format!("line {} is not 'key = value'", i + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, -1.5, 1e-300, std::f64::consts::PI, 2.5e22, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push_f64(&[1.0, 2.5e-7]);
        t.push(vec!["x".into(), "3".into()]);
        t.write(&p).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back, t);
        assert!(back.numeric(&[0, 1], &p).is_err());
        assert_eq!(back.column_index("b", &p).unwrap(), 1);
        std::fs::write(&p, "a,b\n1\n").unwrap();
        assert!(matches!(Table::read(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn manifest_round_trip_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let mut m = Manifest::new();
        m.set("zeta", 1).set("alpha", "x y");
        m.write(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "alpha = x y\nzeta = 1\n");
        let back = Manifest::read(&p).unwrap();
        assert_eq!(back.require_parsed::<u32>("zeta", &p).unwrap(), 1);
        assert!(back.require("missing", &p).is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
