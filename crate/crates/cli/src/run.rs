//! Per-invocation bookkeeping: input digests, output files, the manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use smhd_core::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct Manifest<'a, F: Serialize> {
    subcommand: &'a str,
    flags: &'a F,
    inputs: &'a BTreeMap<String, String>,
    version: &'static str,
    duration_secs: f64,
    outputs: &'a [String],
}

pub struct Run {
    out: PathBuf,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| with_path(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| with_path(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Run {
    pub fn new(out: &Path) -> Result<Run> {
        fs::create_dir_all(out).map_err(|e| with_path(out, e))?;
        Ok(Run {
            out: out.to_path_buf(),
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    /// Records the digest of an input file that is opened elsewhere.
    pub fn track(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| with_path(path, e))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes)
            .map_err(|_| Error::Io(io::Error::new(io::ErrorKind::InvalidData, format!("{}: not UTF-8", path.display()))))
    }

    pub fn read_bytes(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| with_path(path, e))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    /// An asset from `path` when given, the bundled default otherwise.
    pub fn asset(&mut self, path: Option<&Path>, default: &str) -> Result<String> {
        match path {
            Some(p) => self.read_text(p),
            None => Ok(default.to_string()),
        }
    }

    pub fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| with_path(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| with_path(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }

    pub fn finish<F: Serialize>(mut self, subcommand: &str, flags: &F) -> Result<()> {
        let outputs = self.outputs.clone();
        let inputs = std::mem::take(&mut self.inputs);
        let manifest = Manifest {
            subcommand,
            flags,
            inputs: &inputs,
            version: env!("CARGO_PKG_VERSION"),
            duration_secs: self.started.elapsed().as_secs_f64(),
            outputs: &outputs,
        };
        self.write_json(MANIFEST, &manifest)
    }
}
