//! Atomic file emission: write to a temporary file in the target
//! directory, then rename over the destination.

use std::path::Path;

use fpjpa::spectrum::Spectrum;

use crate::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Validation(format!("cannot create temp file in {}: {e}", dir.display())))?;
    use std::io::Write;
    tmp.write_all(bytes)
        .map_err(|e| CliError::Validation(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| CliError::Validation(format!("cannot move output into place: {e}")))?;
    Ok(())
}

pub fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Validation(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_csv_atomic(path: &Path, spectrum: &Spectrum) -> Result<(), CliError> {
    let mut buf = Vec::new();
    spectrum
        .write_csv(&mut buf)
        .map_err(|e| CliError::Validation(format!("csv serialization failed: {e}")))?;
    write_atomic(path, &buf)
}
