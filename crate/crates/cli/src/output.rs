//! Output directory with a content-hashed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    cli_version: &'static str,
    core_version: &'static str,
    kind: &'a str,
    seed: u64,
    config_sha256: &'a str,
    config: &'a serde_json::Value,
    stage_seeds: &'a BTreeMap<String, u64>,
    files: &'a [FileEntry],
    status: &'a str,
    error: Option<String>,
    started_unix_secs: u64,
    wall_clock_secs: f64,
}

pub struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
    pub stage_seeds: BTreeMap<String, u64>,
    started: Instant,
    started_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Output {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            stage_seeds: BTreeMap::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }

    /// Records the child seed of a stage and returns it.
    pub fn stage_seed(&mut self, seed: u64, stage: &str) -> u64 {
        let s = vpsd_core::rng::child_seed(seed, stage);
        self.stage_seeds.insert(stage.to_string(), s);
        s
    }

    /// Writes `name` through `write` and records its hash.
    pub fn file<F>(&mut self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        w.write_all(&buf)?;
        w.flush()?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(&buf),
            bytes: buf.len() as u64,
        });
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        self.file(name, |w| Ok(vpsd_core::io::write_json(w, value)?))
    }

    /// Serializes rows with a header derived from the field names.
    pub fn csv_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        self.file(name, |w| {
            let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
            Ok(())
        })
    }

    pub fn finish(
        mut self,
        kind: &str,
        seed: u64,
        config_sha256: &str,
        config: &serde_json::Value,
        error: Option<String>,
    ) -> anyhow::Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: "vpsd",
            cli_version: env!("CARGO_PKG_VERSION"),
            core_version: vpsd_core::VERSION,
            kind,
            seed,
            config_sha256,
            config,
            stage_seeds: &self.stage_seeds,
            files: &self.files,
            status: if error.is_some() { "failed" } else { "ok" },
            error,
            started_unix_secs: self.started_unix,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        vpsd_core::io::write_json(fs::File::create(&path)?, &manifest)?;
        Ok(())
    }
}
