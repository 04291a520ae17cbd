use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with 1-based line numbers. A single trailing newline is
/// fine; blank lines elsewhere are rejected.
pub(crate) fn lines<'a>(path: &'a Path, text: &'a str) -> impl Iterator<Item = Result<(usize, &'a str)>> + 'a {
    text.lines().enumerate().map(move |(k, l)| {
        let l = l.trim();
        if l.is_empty() {
            Err(parse_error(path, k + 1, "blank line"))
        } else {
            Ok((k + 1, l))
        }
    })
}

pub(crate) fn field<T: FromStr>(path: &Path, line: usize, token: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    token
        .trim()
        .parse()
        .map_err(|e| parse_error(path, line, format!("cannot parse `{token}`: {e}")))
}

/// Parses a file holding one value per line.
pub(crate) fn column<T: FromStr>(path: &Path) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let text = read(path)?;
    lines(path, &text)
        .map(|r| {
            let (n, l) = r?;
            field(path, n, l)
        })
        .collect()
}

pub(crate) fn data_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}
