use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_FORMAT: &str = "sqzmem-report-v1";

/// Numeric columns with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn from_csv(bytes: &[u8], name: &str) -> Result<Table> {
        let bad = |msg: String| Error::MissingArtifact(format!("{name}: {msg}"));
        let mut r = csv::Reader::from_reader(bytes);
        let header = r
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("non-numeric field '{f}'"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A reported number and the artifact it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub unit: String,
    pub source: String,
}

/// Summary of one run. Wall-clock time is printed, not stored, so that
/// repeated runs give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
    /// Derived sub-seeds by purpose.
    pub seeds: BTreeMap<String, u64>,
    pub metrics: BTreeMap<String, Metric>,
    pub notes: Vec<String>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn new(command: &str, scenario: &str, seed: u64) -> RunReport {
        RunReport {
            format: REPORT_FORMAT.into(),
            command: command.into(),
            scenario: scenario.into(),
            seed,
            seeds: BTreeMap::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            manifest: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64, unit: &str, source: &str) {
        self.metrics.insert(
            name.into(),
            Metric {
                value,
                unit: unit.into(),
                source: source.into(),
            },
        );
    }

    pub fn load(dir: &Path) -> Result<RunReport> {
        let path = dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
        let r: RunReport = serde_json::from_str(&text)
            .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
        if r.format != REPORT_FORMAT {
            return Err(Error::MissingArtifact(format!(
                "{}: unknown report format '{}'",
                path.display(),
                r.format
            )));
        }
        Ok(r)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Output directory under construction. Files go to `<out>.staging` and are
/// moved into place by [`RunDir::commit`]; `<out>.lock` is held throughout.
/// Dropping without committing removes the staging directory.
#[derive(Debug)]
pub struct RunDir {
    target: PathBuf,
    staging: PathBuf,
    lock: PathBuf,
    committed: bool,
}

impl RunDir {
    pub fn begin(target: &Path) -> Result<RunDir> {
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let lock = sibling(target, ".lock");
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Locked(format!(
                    "{} exists; another run holds {}",
                    lock.display(),
                    target.display()
                )))
            }
            Err(e) => return Err(e.into()),
        }
        let staging = sibling(target, ".staging");
        let run = RunDir {
            target: target.to_path_buf(),
            staging,
            lock,
            committed: false,
        };
        if run.staging.exists() {
            fs::remove_dir_all(&run.staging)?;
        }
        fs::create_dir_all(&run.staging)?;
        Ok(run)
    }

    /// Starts from a copy of the committed directory, for commands that
    /// amend an existing run.
    pub fn amend(target: &Path) -> Result<RunDir> {
        if !target.is_dir() {
            return Err(Error::MissingArtifact(format!("run directory {}", target.display())));
        }
        let run = RunDir::begin(target)?;
        copy_tree(target, &run.staging)?;
        Ok(run)
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Absolute path inside the staging directory.
    pub fn path(&self, rel: &str) -> PathBuf {
        self.staging.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(p, bytes)?;
        Ok(())
    }

    pub fn write_table(&self, rel: &str, t: &Table) -> Result<()> {
        self.write(rel, &t.to_csv()?)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    /// Every file currently staged except the report, sorted by path.
    pub fn manifest(&self) -> Result<Vec<ManifestEntry>> {
        let mut out = Vec::new();
        collect(&self.staging, &self.staging, &mut out)?;
        out.retain(|e| e.path != REPORT_FILE);
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }

    /// Writes the report with the final manifest and moves the staging
    /// directory into place.
    pub fn commit(mut self, mut report: RunReport) -> Result<PathBuf> {
        report.manifest = self.manifest()?;
        self.write_json(REPORT_FILE, &report)?;
        let old = sibling(&self.target, ".old");
        if old.exists() {
            fs::remove_dir_all(&old)?;
        }
        if self.target.exists() {
            fs::rename(&self.target, &old)?;
        }
        fs::rename(&self.staging, &self.target)?;
        if old.exists() {
            fs::remove_dir_all(&old)?;
        }
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
        let _ = fs::remove_file(&self.lock);
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<ManifestEntry>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let p = entry.path();
        if entry.file_type()?.is_dir() {
            collect(root, &p, out)?;
        } else {
            let bytes = fs::read(&p)?;
            let rel = p.strip_prefix(root).expect("walk stays under root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(ManifestEntry {
                path: rel.join("/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
    }
    Ok(())
}

fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let dest = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &dest)?;
        } else {
            fs::copy(entry.path(), dest)?;
        }
    }
    Ok(())
}

/// Reads a manifest-listed artifact, checking size and digest.
pub fn read_artifact(dir: &Path, manifest: &[ManifestEntry], rel: &str) -> Result<Vec<u8>> {
    let entry = manifest
        .iter()
        .find(|e| e.path == rel)
        .ok_or_else(|| Error::MissingArtifact(format!("{rel} is not listed in the manifest")))?;
    let bytes = fs::read(dir.join(rel))
        .map_err(|e| Error::MissingArtifact(format!("{rel} listed in the manifest but unreadable: {e}")))?;
    if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::MissingArtifact(format!("{rel} does not match its manifest digest")));
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![0.1, -2.5e-17]);
        t.push(vec![1.0 / 3.0, 7.0]);
        let bytes = t.to_csv().unwrap();
        assert!(bytes.starts_with(b"a,b\n"));
        let back = Table::from_csv(&bytes, "t.csv").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("b").unwrap(), vec![-2.5e-17, 7.0]);
        assert!(back.column("c").is_none());
        assert!(Table::from_csv(b"a\nx\n", "t.csv").is_err());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn commit_moves_staging_and_releases_lock() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        let run = RunDir::begin(&target).unwrap();
        assert!(matches!(RunDir::begin(&target), Err(Error::Locked(_))));
        run.write("sub/x.csv", b"x\n1\n").unwrap();
        run.write("y.json", b"{}").unwrap();
        assert!(!target.exists());
        run.commit(RunReport::new("c", "s", 1)).unwrap();
        assert!(target.join("sub/x.csv").exists());
        assert!(!root.path().join("run.staging").exists());
        assert!(!root.path().join("run.lock").exists());
        let report = RunReport::load(&target).unwrap();
        let paths: Vec<&str> = report.manifest.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["sub/x.csv", "y.json"]);
        assert_eq!(read_artifact(&target, &report.manifest, "sub/x.csv").unwrap(), b"x\n1\n");
        fs::write(target.join("y.json"), b"[]").unwrap();
        assert!(matches!(
            read_artifact(&target, &report.manifest, "y.json"),
            Err(Error::MissingArtifact(_))
        ));
        assert!(read_artifact(&target, &report.manifest, "z.csv").is_err());
    }

    #[test]
    fn dropped_run_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        {
            let run = RunDir::begin(&target).unwrap();
            run.write("a.csv", b"a\n").unwrap();
        }
        let left: Vec<_> = fs::read_dir(root.path()).unwrap().collect();
        assert!(left.is_empty());
    }

    #[test]
    fn recommit_replaces_previous_run() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        let run = RunDir::begin(&target).unwrap();
        run.write("old.csv", b"a\n").unwrap();
        run.commit(RunReport::new("c", "s", 1)).unwrap();
        let run = RunDir::begin(&target).unwrap();
        run.write("new.csv", b"b\n").unwrap();
        run.commit(RunReport::new("c", "s", 1)).unwrap();
        assert!(!target.join("old.csv").exists());
        assert!(target.join("new.csv").exists());
        let run = RunDir::amend(&target).unwrap();
        assert!(run.path("new.csv").exists());
    }
}
