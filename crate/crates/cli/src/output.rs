//! Atomic artifact writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use barrierlab::{Error, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(dir: &Path, name: &str, fill: impl FnOnce(&mut NamedTempFile) -> Result<()>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    fill(&mut tmp)?;
    tmp.as_file_mut().flush()?;
    // temp files are created owner-only; artifacts should read like ordinary files
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| Error::Io(e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write_atomic(dir, name, |f| {
        serde_json::to_writer_pretty(&mut *f, value)?;
        f.write_all(b"\n")?;
        Ok(())
    })
}

pub fn write_csv<I, R>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(dir, name, |f| {
        let mut w = csv::Writer::from_writer(f);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Shortest round-trip representation, so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
