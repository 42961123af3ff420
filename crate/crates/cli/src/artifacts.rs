//! All-or-nothing artifact writing: every file goes to a temporary sibling
//! first and is renamed into place only once all of them were written.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Category, CliError, CliResult};

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_owned()).unwrap_or_default();
    name.push(format!(".partial-{}", std::process::id()));
    path.with_file_name(name)
}

fn output_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(Category::OutputError, format!("{}: {e}", path.display()))
}

impl Artifacts {
    pub fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.files.push((path, contents.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn commit(self) -> CliResult<()> {
        let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
        let discard = |staged: &[(PathBuf, &Path)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (path, bytes) in &self.files {
            let tmp = temp_sibling(path);
            if let Err(e) = fs::write(&tmp, bytes) {
                let _ = fs::remove_file(&tmp);
                discard(&staged);
                return Err(output_error(path, e));
            }
            staged.push((tmp, path));
        }
        for (k, (tmp, path)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, path) {
                for (_, done) in &staged[..k] {
                    let _ = fs::remove_file(done);
                }
                discard(&staged[k..]);
                return Err(output_error(path, e));
            }
        }
        Ok(())
    }
}
