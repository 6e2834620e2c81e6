use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hitgap::Result;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub enum Outcome {
    Pass,
    Violations,
}

#[derive(Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// What a run did and with which settings. The hash covers the command, the
/// config bytes and the resolved settings, not timings or the output path,
/// so identical runs produce identical files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub resolved: Value,
    pub output_dir: PathBuf,
    pub timings: Vec<Stage>,
    pub manifest_hash: String,
    #[serde(skip)]
    clock: Instant,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, out: &Path) -> Result<Self> {
        let config_sha256 = config
            .and_then(|p| std::fs::read(p).ok())
            .map(|bytes| hex::encode(Sha256::digest(&bytes)));
        Ok(RunManifest {
            command: command.to_string(),
            config_path: config.map(Path::to_path_buf),
            config_sha256,
            resolved: Value::Null,
            output_dir: out.to_path_buf(),
            timings: Vec::new(),
            manifest_hash: String::new(),
            clock: Instant::now(),
        })
    }

    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(Stage {
            name: name.to_string(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }

    /// Fixes the settings, computes the hash and prepares the output directory.
    pub fn resolve(&mut self, resolved: Value) -> Result<Output> {
        let key = json!({
            "command": self.command,
            "config_sha256": self.config_sha256,
            "resolved": resolved,
            "version": env!("CARGO_PKG_VERSION"),
        });
        self.manifest_hash = hex::encode(Sha256::digest(key.to_string().as_bytes()));
        self.resolved = resolved;
        std::fs::create_dir_all(&self.output_dir)?;
        Ok(Output {
            dir: self.output_dir.clone(),
            hash: self.manifest_hash.clone(),
        })
    }

    pub fn write(&self, out: &Output) -> Result<()> {
        out.json("manifest.json", self)
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub hash: String,
}

impl Output {
    /// Writes `value` with a top-level `manifest_hash` field.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(m) = &mut v {
            m.insert("manifest_hash".into(), Value::String(self.hash.clone()));
        } else {
            v = json!({ "manifest_hash": self.hash, "value": v });
        }
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        serde_json::to_writer_pretty(&mut w, &v)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// CSV whose first line is the comment `# manifest_hash=<hex>`.
    pub fn csv<F>(&self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(w, "# manifest_hash={}", self.hash)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
