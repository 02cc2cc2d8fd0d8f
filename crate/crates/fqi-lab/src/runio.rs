//! File formats and run bookkeeping.
//!
//! Numbers are written with `Display`, which for `f64` produces the
//! shortest decimal string that parses back to the identical bits — CSV
//! artifacts therefore round-trip exactly and hash reproducibly.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Failure, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// In-memory CSV builder with a fixed column count.
pub struct Csv {
    text: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        Csv {
            text,
            cols: header.split(',').count(),
        }
    }

    pub fn row(&mut self, cells: &[&dyn Display]) {
        assert_eq!(cells.len(), self.cols, "csv row width != header width");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(&cell.to_string());
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Split CSV text into cell rows after checking the header, rejecting
/// ragged lines. Returns the data rows only.
pub fn parse_csv(text: &str, expect_header: &str) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Failure::Run("csv: empty file".into()))?;
    if header != expect_header {
        return Err(Failure::Run(format!(
            "csv: header `{header}` does not match expected `{expect_header}`"
        )));
    }
    let cols = expect_header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_owned).collect();
        if cells.len() != cols {
            return Err(Failure::Run(format!(
                "csv: line {} has {} cells, expected {cols}",
                i + 2,
                cells.len()
            )));
        }
        rows.push(cells);
    }
    Ok(rows)
}

pub fn parse_f64(cell: &str, what: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Failure::Run(format!("csv: bad {what} value `{cell}`")))
}

pub fn parse_usize(cell: &str, what: &str) -> Result<usize> {
    cell.parse::<usize>()
        .map_err(|_| Failure::Run(format!("csv: bad {what} value `{cell}`")))
}

/// Weight vector as little-endian binary: an 8-byte length header followed
/// by one f64 per entry.
pub fn weights_to_bin(w: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * w.len());
    out.extend_from_slice(&(w.len() as u64).to_le_bytes());
    for v in w {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn weights_from_bin(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 8 {
        return Err(Failure::Run("weights: missing length header".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 8 * len {
        return Err(Failure::Run(format!(
            "weights: expected {} bytes for {len} entries, found {}",
            8 + 8 * len,
            bytes.len()
        )));
    }
    Ok(bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Text alternative to the binary weight block.
pub fn weights_to_csv(w: &[f64]) -> Vec<u8> {
    let mut csv = Csv::new("index,weight");
    for (i, v) in w.iter().enumerate() {
        csv.row(&[&i, v]);
    }
    csv.into_bytes()
}

/// Everything needed to reproduce a run, plus a SHA-256 hash per artifact
/// for checking that a rerun produced bit-identical files. Timings are
/// informational and are the one field expected to differ between reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub package: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub threads: usize,
    /// Raw text of the config file the run was invoked with; empty when the
    /// run used built-in defaults only.
    pub config_text: String,
    pub artifacts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
}

/// Accumulates artifacts for one run directory and finishes by writing
/// `manifest.json`.
pub struct RunWriter {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl RunWriter {
    /// `started` is the command's entry instant, so the manifest's "total"
    /// timing covers the computation, not just the final writes.
    pub fn create(
        dir: &Path,
        command: &str,
        seed: u64,
        threads: usize,
        config_text: &str,
        started: Instant,
    ) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_owned(),
                package: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
                rng_algorithm: fqi_core::rng::ALGORITHM.to_owned(),
                seed,
                threads,
                config_text: config_text.to_owned(),
                artifacts: BTreeMap::new(),
                timings_ms: BTreeMap::new(),
            },
            started,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
        self.manifest
            .artifacts
            .insert(name.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    pub fn note_timing(&mut self, label: &str, ms: u64) {
        self.manifest.timings_ms.insert(label.to_owned(), ms);
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        let total = self.started.elapsed().as_millis() as u64;
        self.manifest.timings_ms.insert("total".into(), total);
        let bytes = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| Failure::Run(format!("manifest serialization failed: {e}")))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, bytes)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path)
        .map_err(|e| Failure::Run(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Run(format!("cannot parse {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_builds_and_parses_back() {
        let mut csv = Csv::new("n,trial,gap,stderr");
        csv.row(&[&36315usize, &0usize, &0.125f64, &(0.1f64 + 0.2f64)]);
        csv.row(&[&36315usize, &1usize, &f64::MIN_POSITIVE, &1.0e308f64]);
        let text = String::from_utf8(csv.into_bytes()).unwrap();
        let rows = parse_csv(&text, "n,trial,gap,stderr").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(parse_usize(&rows[0][0], "n").unwrap(), 36315);
        // Display -> parse is exact for f64, including awkward values.
        assert_eq!(parse_f64(&rows[0][3], "stderr").unwrap(), 0.1 + 0.2);
        assert_eq!(parse_f64(&rows[1][2], "gap").unwrap(), f64::MIN_POSITIVE);
        assert_eq!(parse_f64(&rows[1][3], "stderr").unwrap(), 1.0e308);
    }

    #[test]
    fn csv_rejects_wrong_header_and_ragged_rows() {
        assert!(parse_csv("a,b\n1,2\n", "a,c").is_err());
        assert!(parse_csv("a,b\n1,2,3\n", "a,b").is_err());
        assert!(parse_csv("", "a").is_err());
    }

    #[test]
    fn weights_round_trip_bitwise() {
        let w = vec![0.0, -0.0, 1.5e-300, std::f64::consts::PI, -7.25];
        let bin = weights_to_bin(&w);
        assert_eq!(bin.len(), 8 + 8 * w.len());
        let back = weights_from_bin(&bin).unwrap();
        assert_eq!(w.len(), back.len());
        for (a, b) in w.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(weights_from_bin(&bin[..bin.len() - 1]).is_err());
        assert!(weights_from_bin(&[1, 2, 3]).is_err());
    }

    #[test]
    fn sha256_matches_known_vector() {
        // FIPS 180-2 test vector for "abc".
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn run_writer_records_hashes_and_manifest_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut w =
            RunWriter::create(dir.path(), "demo", 42, 1, "seed = 42\n", Instant::now()).unwrap();
        w.write("a.csv", b"x,y\n1,2\n").unwrap();
        w.note_timing("phase", 3);
        let manifest = w.finish().unwrap();
        assert_eq!(manifest.artifacts["a.csv"], sha256_hex(b"x,y\n1,2\n"));
        assert_eq!(manifest.rng_algorithm, fqi_core::rng::ALGORITHM);
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back.command, "demo");
        assert_eq!(back.seed, 42);
        assert_eq!(back.artifacts, manifest.artifacts);
        assert!(back.timings_ms.contains_key("total"));
    }
}
