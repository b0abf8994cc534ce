//! Run manifests: written when a command starts and rewritten when it ends.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    pub exit_code: Option<u8>,
    pub error: Option<String>,
    pub started_unix: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> CliResult<(u64, String)> {
    let mut f = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| io_error(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        h.update(&buf[..n]);
    }
    Ok((total, hex::encode(h.finalize())))
}

/// Owns the output directory and the manifest of one command.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    phase_start: Instant,
    started: Instant,
    /// Result files, written together by [`Run::commit`].
    pending: Vec<(String, Vec<u8>)>,
}

impl Run {
    pub fn start(dir: &Path, command: &str, config: serde_json::Value) -> CliResult<Run> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let run = Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                tool: "salsa2d".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                status: Status::Running,
                exit_code: None,
                error: None,
                started_unix,
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
                warnings: Vec::new(),
                summary: serde_json::Value::Null,
            },
            phase_start: Instant::now(),
            started: Instant::now(),
            pending: Vec::new(),
        };
        run.write_manifest()?;
        Ok(run)
    }

    /// Hashes an input file and records it. Missing files are input errors
    /// naming the path.
    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let (bytes, sha256) = sha256_file(path)?;
        self.manifest.inputs.push(InputHash { role: role.into(), path: path.display().to_string(), bytes, sha256 });
        Ok(())
    }

    /// Closes the current timing phase under `name`.
    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        self.manifest.timings.push(Timing { phase: name.into(), seconds: (now - self.phase_start).as_secs_f64() });
        self.phase_start = now;
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.manifest.warnings.push(msg.into());
    }

    pub fn warnings(&mut self, msgs: &[String]) {
        self.manifest.warnings.extend_from_slice(msgs);
    }

    pub fn summary(&mut self, value: serde_json::Value) {
        self.manifest.summary = value;
    }

    /// Queues a result file; nothing is written until [`Run::commit`].
    pub fn output(&mut self, name: &str, bytes: Vec<u8>) {
        self.pending.push((name.into(), bytes));
    }

    /// Writes the queued outputs and the final manifest.
    pub fn commit(mut self) -> CliResult<()> {
        for (name, bytes) in std::mem::take(&mut self.pending) {
            let path = self.dir.join(&name);
            std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
            self.manifest.outputs.push(name);
        }
        self.phase("write");
        self.manifest.timings.push(Timing { phase: "total".into(), seconds: self.started.elapsed().as_secs_f64() });
        self.manifest.status = Status::Succeeded;
        self.manifest.exit_code = Some(0);
        self.write_manifest()
    }

    /// Records a failure in the manifest; result files are not written.
    pub fn fail(mut self, code: u8, message: &str) {
        self.manifest.timings.push(Timing { phase: "total".into(), seconds: self.started.elapsed().as_secs_f64() });
        self.manifest.status = Status::Failed;
        self.manifest.exit_code = Some(code);
        self.manifest.error = Some(message.into());
        if let Err(e) = self.write_manifest() {
            log::error!("could not write manifest: {e}");
        }
    }

    fn write_manifest(&self) -> CliResult<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, "abc").unwrap();
        let (n, h) = sha256_file(&p).unwrap();
        assert_eq!(n, 3);
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_written_before_and_after() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::start(dir.path(), "grid", serde_json::json!({"spacing": 2.0})).unwrap();
        let first: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(first["status"], "running");
        run.output("x.csv", b"a\n1\n".to_vec());
        assert!(!dir.path().join("x.csv").exists());
        run.commit().unwrap();
        let last: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(last["status"], "succeeded");
        assert_eq!(last["outputs"][0], "x.csv");
    }
}
