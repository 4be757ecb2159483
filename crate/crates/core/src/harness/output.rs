use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// A rectangular table written both as CSV and as JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for line in std::iter::once(&self.columns).chain(&self.rows) {
            w.write_record(line).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_error(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output of UTF-8 cells is UTF-8"))
    }

    /// Rows as objects keyed by column name.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> =
                    self.columns.iter().cloned().zip(r.iter().map(|c| c.clone().into())).collect();
                obj.into()
            })
            .collect();
        rows.into()
    }

    /// Writes `<stem>.csv` and `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv()?)?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(vec![csv, json])
    }
}

fn csv_error(e: impl Into<std::io::Error>) -> crate::error::Error {
    crate::error::Error::Io(e.into())
}

/// Writes whitespace-separated columns with a `#` header, readable by
/// gnuplot. Blank lines separate `blocks` (gnuplot data sets).
pub fn write_gnuplot(path: &Path, header: &[&str], blocks: &[Vec<Vec<f64>>]) -> Result<PathBuf> {
    let mut out = format!("# {}\n", header.join(" "));
    for (i, block) in blocks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        for row in block {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    std::fs::write(path, out)?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(path.to_path_buf())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory when possible.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record for one command's outputs. Contains no timestamps, so
/// identical runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: serde_json::to_value(config)?,
            summary: serde_json::Value::Null,
            files: Vec::new(),
        })
    }

    pub fn add_files(&mut self, dir: &Path, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let rel = p.strip_prefix(dir).unwrap_or(p);
            self.files.push(FileEntry {
                path: rel.to_string_lossy().into_owned(),
                sha256: sha256_file(p)?,
                bytes: std::fs::metadata(p)?.len(),
            });
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_json(&dir.join("manifest.json"), self)
    }
}

/// Published hardware numbers. They are printed next to
/// simulator results for orientation and never asserted.
pub mod reference {
    pub const LABEL: &str = "hardware reference (not reproduced)";

    /// K-fold accuracy, percent, as `(method, mean, std. err.)`.
    pub const KFOLD: &[(&str, f64, f64)] = &[
        ("chance", 62.80, 0.85),
        ("vision_only", 73.03, 0.24),
        ("tactile_only", 79.34, 0.66),
        ("fusion", 80.28, 0.68),
        ("no_action", 76.43, 0.42),
    ];

    /// Aggregate regrasp success, percent, as `(set, method, success)`.
    pub const POLICY: &[(&str, &str, f64)] = &[
        ("easy", "fusion", 94.0),
        ("easy", "vision_only", 63.2),
        ("easy", "cylinder", 75.9),
        ("hard", "vision_only", 50.0),
        ("hard", "fusion", 73.6),
        ("hard", "cylinder", 66.8),
    ];

    /// Minimum-force study: `(model, objective, success %, mean force N)`.
    pub const MIN_FORCE: &[(&str, &str, f64, f64)] = &[
        ("fusion", "max_success", 95.0, 20.0),
        ("fusion", "min_force", 94.0, 10.0),
        ("vision_only", "max_success", 76.0, 18.0),
        ("vision_only", "min_force", 76.0, 6.0),
    ];

    pub fn kfold(method: &str) -> Option<(f64, f64)> {
        KFOLD.iter().find(|r| r.0 == method).map(|r| (r.1, r.2))
    }

    pub fn policy(set: &str, method: &str) -> Option<f64> {
        POLICY.iter().find(|r| r.0 == set && r.1 == method).map(|r| r.2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut t = Table::new(["a", "b"]);
        t.push(["x", "1,5"]);
        t.push(["say \"hi\"", "2"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\nx,\"1,5\"\n\"say \"\"hi\"\"\",2\n");
        assert_eq!(t.to_json()[0]["b"], "1,5");
    }

    #[test]
    fn manifest_hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, "abc").unwrap();
        let mut m = Manifest::new("test", 1, &serde_json::json!({})).unwrap();
        m.add_files(dir.path(), &[p]).unwrap();
        assert_eq!(m.files[0].path, "x.txt");
        // Published SHA-256 test vector for "abc".
        assert_eq!(m.files[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.files[0].bytes, 3);
    }
}
