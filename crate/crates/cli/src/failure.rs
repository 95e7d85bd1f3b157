use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use stigmergy_core::Error;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Malformed input or configuration (exit 2).
    Input(String),
    /// An upstream artifact or referenced file does not exist (exit 3).
    Missing(PathBuf),
    /// Anything else (exit 1).
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Internal(_) => 1,
            Failure::Input(_) => 2,
            Failure::Missing(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Missing(p) => write!(f, "missing artifact: {}", p.display()),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::Missing(path)
            }
            Error::Io { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// The path if it exists, otherwise a missing-artifact failure.
pub fn require(path: &Path) -> CmdResult<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::Missing(path.to_path_buf()))
    }
}

pub fn read(path: &Path) -> CmdResult<String> {
    std::fs::read_to_string(require(path)?)
        .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

/// Paths of the regular files directly inside `dir` ending in `ext`, sorted.
pub fn list_files(dir: &Path, ext: &str) -> CmdResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(require(dir)?)
        .map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}
