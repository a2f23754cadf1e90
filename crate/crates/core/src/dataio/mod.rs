//! Plain-text file formats.
//!
//! Every file starts with `# format: <name> v1`. Other lines starting with
//! `#` are comments, except `# key: value` directives (grids, species) that
//! a format declares. Floats are written in scientific notation with 8
//! significant digits.

pub mod config;
pub mod tables;

use std::path::Path;

use crate::error::{Error, Result};

pub use config::{load_config, parse_config, write_config, PhysicalConstants, PipelineConfig};
pub use tables::*;

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// 8 significant digits, scientific.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.7e}")
}

/// Consumes lines up to and including the format line.
pub(crate) fn check_format<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    name: &str,
    path: &Path,
) -> Result<()> {
    let expected = format!("# format: {name} v1");
    for (_, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == expected {
            return Ok(());
        }
        return Err(Error::Format {
            path: path.to_path_buf(),
            expected: name.to_string(),
            found: line.to_string(),
        });
    }
    Err(Error::Format {
        path: path.to_path_buf(),
        expected: name.to_string(),
        found: String::new(),
    })
}

/// The lines of a file after its format line.
pub(crate) struct Body<'a> {
    directives: Vec<(usize, &'a str, &'a str)>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Body<'a> {
    pub(crate) fn parse(text: &'a str, name: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        check_format(&mut lines, name, path)?;
        let mut body = Body {
            directives: Vec::new(),
            rows: Vec::new(),
        };
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once(':') {
                    if !key.is_empty() && !key.contains(char::is_whitespace) {
                        body.directives.push((n, key, value.trim()));
                    }
                }
                continue;
            }
            body.rows.push((n, line.split_whitespace().collect()));
        }
        Ok(body)
    }

    pub(crate) fn directive(&self, key: &str) -> Option<(usize, &'a str)> {
        self.directives
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|&(n, _, v)| (n, v))
    }

    pub(crate) fn rows(&self) -> &[(usize, Vec<&'a str>)] {
        &self.rows
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} {field:?}")))
}
