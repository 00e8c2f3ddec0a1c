//! Surrogate bundle files: pretty-printed JSON carrying the schema version,
//! feature names and every tree's node array. Floats are written in
//! shortest round-trip form and parsed exactly, so a loaded bundle predicts
//! bit-identically to the one saved.

use std::path::Path;

use cwloop_core::surrogate::{SurrogateBundle, BUNDLE_SCHEMA_VERSION};

use crate::error::{Error, Result};

pub fn bundle_to_json(bundle: &SurrogateBundle) -> String {
    serde_json::to_string_pretty(bundle).expect("validated bundles hold only finite numbers")
}

pub fn save_bundle(bundle: &SurrogateBundle, path: &Path) -> Result<()> {
    bundle.validate()?;
    std::fs::write(path, bundle_to_json(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<SurrogateBundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    bundle_from_bytes(&bytes, path)
}

/// Checks, in order: JSON syntax, the schema version, the field layout,
/// then the bundle invariants.
pub fn bundle_from_bytes(bytes: &[u8], path: &Path) -> Result<SurrogateBundle> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::format(path, "start", "file is empty"));
    }
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| {
        Error::format(path, format!("line {} column {}", e.line(), e.column()), e)
    })?;
    let version = value
        .get("schema_version")
        .ok_or_else(|| Error::format(path, "field `schema_version`", "missing; not a bundle file"))?;
    let version = version
        .as_u64()
        .ok_or_else(|| Error::format(path, "field `schema_version`", "not an unsigned integer"))?;
    if version != u64::from(BUNDLE_SCHEMA_VERSION) {
        return Err(Error::Version {
            path: path.into(),
            found: version,
            expected: BUNDLE_SCHEMA_VERSION,
        });
    }
    // Deserializing from the text rather than the `Value` keeps float
    // parsing on the exact round-trip path.
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let bundle: SurrogateBundle = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        Error::format(path, format!("field `{field}`"), e.into_inner())
    })?;
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Error {
        bundle_from_bytes(text.as_bytes(), Path::new("b.json")).unwrap_err()
    }

    #[test]
    fn bad_files_are_diagnosed() {
        assert!(load("").to_string().contains("empty"));
        let e = load("{\"schema_version\": 1, \"created_at\": ");
        assert!(e.to_string().contains("line 1 column"), "{e}");
        assert!(matches!(load("{\"schema_version\": 2}"), Error::Version { found: 2, expected: 1, .. }));
        assert!(load("[1, 2]").to_string().contains("schema_version"));
        let e = load("{\"schema_version\": 1, \"created_at\": \"2024-01-01T00:00:00\"}");
        assert!(matches!(e, Error::Format { .. }), "{e}");
    }
}
