//! Versioned JSON checkpoints. Floats are written with shortest round-trip
//! formatting, so a save/load cycle is exact.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT: &str = "asris-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
}

pub fn to_json<T: Serialize>(kind: &str, payload: &T) -> Result<String> {
    let env = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: kind.to_string(),
        payload,
    };
    serde_json::to_string(&env).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "not a checkpoint (format {:?})",
            header.format
        )));
    }
    if header.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {VERSION})",
            header.version
        )));
    }
    if header.kind != kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {:?}, expected {kind:?}",
            header.kind
        )));
    }
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(env.payload)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    std::fs::write(path, to_json(kind, payload)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    from_json(kind, &std::fs::read_to_string(path)?)
}
