//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// One file written by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Output(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| CliError::Output(e.to_string()))
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("dictsel-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("dictsel".to_string(), dictsel::VERSION.to_string()),
    ])
}

/// Tracks files written under an output directory so a failed run can
/// remove them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
    entries: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let created = !root.exists();
        std::fs::create_dir_all(root).map_err(|e| CliError::Output(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), created, written: Vec::new(), entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Registers `name` and returns its full path. `extra` lists companion
    /// files (such as JSON sidecars) that the writer creates alongside.
    pub fn register(&mut self, name: &str, kind: &str, extra: &[&str]) -> PathBuf {
        let path = self.root.join(name);
        self.written.push(path.clone());
        for e in extra {
            self.written.push(self.root.join(e));
        }
        self.entries.push(FileEntry { path: name.to_string(), kind: kind.to_string() });
        path
    }

    pub fn entries(&self) -> &[FileEntry] {
        &self.entries
    }

    /// Removes everything this run wrote.
    pub fn discard(self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        let _ = std::fs::remove_file(self.root.join(MANIFEST_FILE));
        if self.created {
            let _ = std::fs::remove_dir(&self.root);
        }
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<PathBuf, CliError> {
        let path = self.root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Output(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discard_removes_only_run_files() {
        let tmp = tempfile::tempdir().unwrap();
        let keep = tmp.path().join("keep.txt");
        std::fs::write(&keep, "x").unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        let p = out.register("a.csv", "trace", &["a.json"]);
        std::fs::write(&p, "1").unwrap();
        std::fs::write(tmp.path().join("a.json"), "{}").unwrap();
        out.discard();
        assert!(keep.exists());
        assert!(!p.exists());
        assert!(!tmp.path().join("a.json").exists());
        assert!(tmp.path().exists());
    }

    #[test]
    fn discard_removes_a_created_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("new");
        let mut out = OutputDir::create(&root).unwrap();
        std::fs::write(out.register("m.json", "models", &[]), "[]").unwrap();
        assert_eq!(out.entries(), [FileEntry { path: "m.json".into(), kind: "models".into() }]);
        out.discard();
        assert!(!root.exists());
    }

    #[test]
    fn manifest_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let out = OutputDir::create(tmp.path()).unwrap();
        let m = Manifest {
            command: "identify".into(),
            config: ExperimentConfig::default(),
            versions: versions(),
            wall_time_seconds: 0.5,
            files: Vec::new(),
            summary: serde_json::json!({"k": 1}),
        };
        let path = out.write_manifest(&m).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);
    }
}
