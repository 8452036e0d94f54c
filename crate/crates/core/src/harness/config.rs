//! Loading run and sweep configuration documents.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Parse a JSON or TOML document, chosen by file extension (`.json`,
/// `.toml`). Unknown fields are rejected by the target types.
pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |msg: String| Error::Parse {
        path: path.display().to_string(),
        msg,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string())),
        Some("toml") => toml::from_str(&text).map_err(|e| parse_err(e.to_string())),
        _ => Err(parse_err("expected a .json or .toml file".into())),
    }
}
