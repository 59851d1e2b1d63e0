//! Reproducible experiment drivers and their file formats.

pub mod ct_demo;
pub mod sidecar;
pub mod sources;
pub mod toeplitz;

use std::path::{Path, PathBuf};

use crate::error::Result;

/// Writes every file under `dir`, creating it if needed.
///
/// Each file goes to a temporary name first; the renames happen only after all
/// writes succeeded, so a failure leaves no partial outputs behind.
pub fn write_outputs(dir: &Path, files: &[(PathBuf, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, text) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{}.partial", name.display()));
        if let Err(e) = std::fs::write(&tmp, text) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            let _ = std::fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, target));
    }
    for (tmp, target) in staged {
        std::fs::rename(tmp, target)?;
    }
    Ok(())
}
