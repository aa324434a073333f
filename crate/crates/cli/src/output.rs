//! Stamping and writing of command outputs.

use std::io::Write;
use std::path::Path;

use mmfact_core::ingest::write_atomic;
use mmfact_core::{Error, Result, ENGINE_VERSION};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance attached to every output record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub engine_version: &'static str,
    pub config_hash: String,
}

impl Stamp {
    /// Stamp for a resolved configuration. Paths are left out of `config`
    /// by callers so that relocating inputs does not change the hash.
    pub fn new(config: &Value) -> Self {
        Self {
            engine_version: ENGINE_VERSION,
            config_hash: config_hash(config),
        }
    }

    /// `record` with `engine_version` and `config_hash` appended.
    pub fn apply<T: Serialize>(&self, record: &T) -> Result<Value> {
        let mut v = serde_json::to_value(record)?;
        let Value::Object(map) = &mut v else {
            return Err(Error::Format("output record is not a JSON object".into()));
        };
        map.insert("engine_version".into(), Value::from(self.engine_version));
        map.insert("config_hash".into(), Value::from(self.config_hash.clone()));
        Ok(v)
    }
}

/// SHA-256 of the compact JSON form; object keys serialize in sorted order.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Stamped JSON lines, one per record.
pub fn json_lines<T: Serialize>(records: &[T], stamp: &Stamp) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, &stamp.apply(r)?)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

/// One stamped, pretty-printed JSON document.
pub fn json_document<T: Serialize>(record: &T, stamp: &Stamp) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(&stamp.apply(record)?)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Writes to `out` atomically, or to standard output.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
