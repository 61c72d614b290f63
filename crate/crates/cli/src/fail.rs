use std::fmt::Display;
use std::path::Path;

use latent_edit::Error;

/// A command failure tagged with its exit class.
#[derive(Debug)]
pub enum Fail {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Fail {
    pub fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 2,
            Fail::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Fail::Usage(e) | Fail::Runtime(e) => e,
        }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::UnknownTag(_)
            | Error::DimensionMismatch { .. }
            | Error::ShapeMismatch { .. }
            | Error::ImageTooSmall { .. }
            | Error::ImageBelowMinimum { .. }
            | Error::MissingPlugin(_) => Fail::Usage(e.into()),
            _ => Fail::Runtime(e.into()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::Runtime(e.into())
    }
}

pub fn usage(msg: impl Display) -> Fail {
    Fail::Usage(anyhow::anyhow!("{msg}"))
}

/// Reads a user-supplied input; any failure is a usage error naming the path.
pub fn input<'a, T>(path: &'a Path, read: impl FnOnce(&'a Path) -> latent_edit::Result<T>) -> Result<T, Fail> {
    read(path).map_err(|e| Fail::Usage(anyhow::Error::new(e).context(format!("cannot use input {}", path.display()))))
}

/// Attaches the output path to a write failure.
pub fn output<T>(path: &Path, r: latent_edit::Result<T>) -> Result<T, Fail> {
    r.map_err(|e| Fail::Runtime(anyhow::Error::new(e).context(format!("cannot write {}", path.display()))))
}

pub fn write_err(path: &Path, e: std::io::Error) -> Fail {
    Fail::Runtime(anyhow::Error::new(e).context(format!("cannot write {}", path.display())))
}
