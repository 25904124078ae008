//! Structured-text file formats: set specifications, problem files, and
//! field rasters. Parsers are strict — unknown directives and malformed
//! values are errors that name the offending line.

mod problem_file;
mod raster;
mod set_file;

pub use problem_file::{DtSpec, InitialSpec, OperatorConfig, ProblemSpec};
pub use raster::{parse_field, write_field};
pub use set_file::{GridSpec, Primitive, SetBody, SetSpec};

use thiserror::Error;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Splits a `key=value` token.
pub(crate) fn key_value(token: &str, line: usize) -> Result<(&str, &str), ParseError> {
    token
        .split_once('=')
        .ok_or_else(|| ParseError::new(line, format!("expected key=value, found `{token}`")))
}

pub(crate) fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64, ParseError> {
    value
        .parse()
        .map_err(|_| ParseError::new(line, format!("`{key}` is not a number: `{value}`")))
}

pub(crate) fn parse_usize(value: &str, key: &str, line: usize) -> Result<usize, ParseError> {
    value
        .parse()
        .map_err(|_| ParseError::new(line, format!("`{key}` is not an integer: `{value}`")))
}

pub(crate) fn parse_f64_list(value: &str, key: &str, line: usize) -> Result<Vec<f64>, ParseError> {
    value
        .split(',')
        .map(|v| parse_f64(v.trim(), key, line))
        .collect()
}
