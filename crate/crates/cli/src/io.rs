//! Exit codes, error reports, input reading and atomic output.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

pub const SCHEMA: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Failed validation or computation.
    Core(tomoforge::Error),
    /// Arguments that parse but make no sense together.
    Usage(String),
    Read { path: PathBuf, source: std::io::Error },
    Write { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Read { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            CliError::Write { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl From<tomoforge::Error> for CliError {
    fn from(e: tomoforge::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(tomoforge::Error::Json(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Read { .. } => EXIT_NO_INPUT,
            CliError::Write { .. } => EXIT_CANT_CREATE,
        }
    }

    pub fn report(&self) -> Value {
        let kind = match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Read { .. } => "io-read",
            CliError::Write { .. } => "io-write",
        };
        let mut error = json!({ "kind": kind, "message": self.to_string() });
        if let CliError::Core(tomoforge::Error::UnderDetermined {
            rank,
            required,
            determined,
        }) = self
        {
            error["rank"] = json!(rank);
            error["required"] = json!(required);
            error["determined"] = json!(determined);
        }
        json!({ "schema": SCHEMA, "error": error })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Write to `path` via a sibling temporary file and a rename, so readers
/// never see a partial file. `None` writes to stdout.
pub fn emit(path: Option<&Path>, body: &str) -> CliResult<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            });
    };
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(body.as_bytes()).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn to_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialise");
    s.push('\n');
    s
}
