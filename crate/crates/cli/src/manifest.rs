use std::path::Path;

use calvalid::io::{to_precise_json, write_file};
use calvalid::{Error, ParseErrorKind, Result, SimConfig};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub rng: String,
    pub config: SimConfig,
    pub sets: Vec<SetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub id: String,
    /// Correspondences, relative to the manifest directory.
    pub corrs: String,
    /// Ground-truth model, relative to the manifest directory.
    pub truth: String,
    pub n_points: usize,
    pub coverage: f64,
    pub distance: f64,
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), (to_precise_json(self) + "\n").as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| json_error(&path, &e))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Parse {
                path: Some(path),
                line: 1,
                field: "schema_version".into(),
                kind: ParseErrorKind::InvalidValue,
                detail: format!("unsupported version {}", m.schema_version),
            });
        }
        Ok(m)
    }
}

pub fn json_error(path: &Path, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: Some(path.to_path_buf()),
        line: e.line(),
        field: String::new(),
        kind: if e.is_data() {
            ParseErrorKind::InvalidValue
        } else {
            ParseErrorKind::Syntax
        },
        detail: e.to_string(),
    }
}
