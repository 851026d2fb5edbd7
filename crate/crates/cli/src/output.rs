//! CSV tables and all-or-nothing writes of an output set.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Comment line with provenance, header row, then the data rows.
    pub fn render(&self, provenance: &str) -> Vec<u8> {
        let mut out = format!("# {provenance}\n").into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        out
    }
}

pub fn provenance(config_hash: &str) -> String {
    format!(
        "lmg-cli {} config_sha256={config_hash}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Files that are written together or not at all.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn add_table(&mut self, path: PathBuf, table: &Table, provenance: &str) {
        self.add(path, table.render(provenance));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file to a temporary name, then renames them in place.
    /// On failure nothing from this set is left behind.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)], done: usize| {
            for (i, (tmp, dst)) in staged.iter().enumerate() {
                let _ = fs::remove_file(if i < done { dst } else { tmp });
            }
        };
        for (path, bytes) in &self.files {
            let tmp = temp_name(path);
            let write = path
                .parent()
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| fs::write(&tmp, bytes));
            if let Err(e) = write {
                let _ = fs::remove_file(&tmp);
                cleanup(&staged, 0);
                return Err(CliError::io(path, e));
            }
            staged.push((tmp, path.clone()));
        }
        for (i, (tmp, dst)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dst) {
                cleanup(&staged, i);
                return Err(CliError::io(dst, e));
            }
        }
        Ok(staged.into_iter().map(|(_, dst)| dst).collect())
    }
}

fn temp_name(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}
