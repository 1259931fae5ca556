use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

/// Provenance stamped as the first line of every output file.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
}

impl Manifest {
    pub fn new(canonical_config: &str, seed: u64) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        Self {
            config_hash: hex::encode(&digest[..8]),
            seed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# manifest config_hash={} seed={} version={}",
            self.config_hash,
            self.seed,
            env!("CARGO_PKG_VERSION")
        )
    }
}

pub struct OutputDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `header` and `body` under the manifest line.
    pub fn write_csv(&self, name: &str, header: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut text = format!("{}\n{header}\n", self.manifest.line());
        text.push_str(body);
        if !text.ends_with('\n') {
            text.push('\n');
        }
        self.write_raw(name, &text)
    }

    pub fn write_raw(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
        Ok(p)
    }
}

/// File-name tag for a parameter point, e.g. `m0=0.2_g2=1.5`.
pub fn tag(m0: f64, g2: f64) -> String {
    format!("m0={m0}_g2={g2}")
}

/// Reads a CSV written by [`OutputDir::write_csv`] into header-keyed rows.
pub fn read_table(path: &Path) -> Result<Vec<std::collections::BTreeMap<String, String>>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        rows.push(
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

pub fn field(row: &std::collections::BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    row.get(key)
        .ok_or_else(|| format!("missing column {key}"))?
        .parse::<f64>()
        .map_err(|e| format!("column {key}: {e}"))
}
