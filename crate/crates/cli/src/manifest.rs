//! Atomic output files and the run manifest written next to each output.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

/// A line-oriented output that only appears at its final path on `commit`.
pub struct AtomicFile {
    path: PathBuf,
    out: BufWriter<NamedTempFile>,
    lines: usize,
}

impl AtomicFile {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::Builder::new()
            .prefix(".docmend-")
            .tempfile_in(dir)
            .with_context(|| format!("creating temporary file next to {}", path.display()))?;
        Ok(AtomicFile {
            path: path.to_path_buf(),
            out: BufWriter::with_capacity(1 << 20, tmp),
            lines: 0,
        })
    }

    pub fn line(&mut self, line: &str) -> io::Result<()> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.lines += 1;
        Ok(())
    }

    pub fn commit(self) -> anyhow::Result<OutputCount> {
        let tmp = self.out.into_inner().map_err(|e| e.into_error())?;
        tmp.as_file().sync_all()?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
        }
        tmp.persist(&self.path)
            .with_context(|| format!("moving output into place at {}", self.path.display()))?;
        Ok(OutputCount {
            path: self.path.display().to_string(),
            records: self.lines,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputCount {
    pub path: String,
    pub records: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub args: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputCount>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub counts: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn manifest_path(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    /// Write one copy of the manifest next to every output.
    pub fn write(&self) -> anyhow::Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        for out in &self.outputs {
            let path = Self::manifest_path(Path::new(&out.path));
            let mut f = AtomicFile::create(&path)?;
            f.line(&body)?;
            f.commit()?;
        }
        Ok(())
    }
}

fn hash_file(hasher: &mut Sha256, path: &Path) -> io::Result<()> {
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            return Ok(());
        }
        hasher.update(&buf[..n]);
    }
}

/// SHA-256 of a file, or of a directory's files (sorted by name, each
/// prefixed by its name).
pub fn digest(path: &Path) -> anyhow::Result<InputDigest> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<_>>()?;
        entries.sort();
        for e in entries.iter().filter(|e| e.is_file()) {
            hasher.update(e.file_name().unwrap_or_default().as_encoded_bytes());
            hasher.update([0]);
            hash_file(&mut hasher, e)?;
        }
    } else {
        hash_file(&mut hasher, path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
    })
}
