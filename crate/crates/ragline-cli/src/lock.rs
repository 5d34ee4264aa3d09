//! Advisory lock serializing writers of one index directory.
//!
//! The lock is a sibling file (`<index_dir>.lock`) created with
//! `create_new`, so it survives the directory itself being atomically
//! swapped during a rebuild. Readers do not take it; two concurrent
//! writers must not share an index directory.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug)]
pub struct IndexLock {
    path: PathBuf,
}

impl IndexLock {
    /// Acquire the advisory lock for `index_dir`, failing immediately when
    /// another process holds it.
    pub fn acquire(index_dir: &Path) -> Result<Self, CliError> {
        let file_name = match index_dir.file_name() {
            Some(name) => {
                let mut name = name.to_os_string();
                name.push(".lock");
                name
            }
            None => {
                return Err(CliError::Input(format!(
                    "cannot lock index directory {}",
                    index_dir.display()
                )))
            }
        };
        let path = index_dir.with_file_name(file_name);
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::Input(format!("creating {}: {e}", parent.display())))?;
            }
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = writeln!(file, "{}", std::process::id());
                Ok(IndexLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Input(format!(
                "index directory is locked by another command ({} exists); remove the file if that command is no longer running",
                path.display()
            ))),
            Err(e) => Err(CliError::Input(format!(
                "acquiring lock {}: {e}",
                path.display()
            ))),
        }
    }
}

impl Drop for IndexLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
