//! JSON and CSV emission. Every float is printed with 17 significant digits
//! so parsing the output reproduces the exact bit pattern, and the same
//! input always yields byte-identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// Scientific-notation float formatting for serde_json: one leading digit
/// plus 16 fractional digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

pub fn to_json(value: &impl Serialize) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

/// Cell formatting for CSV dumps, matching the JSON float precision.
pub fn cell(value: f64) -> String {
    format!("{value:.16e}")
}

#[derive(Serialize)]
pub struct Versions {
    pub lagsweep: &'static str,
    pub cli: &'static str,
}

/// Common wrapper around every command's result: what ran, with which seed
/// and tolerance, produced by which versions.
#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub command: String,
    pub seed: u64,
    pub tol: Option<f64>,
    pub versions: Versions,
    pub result: T,
}

pub fn envelope<T: Serialize>(command: &str, seed: u64, tol: Option<f64>, result: T) -> Envelope<T> {
    Envelope {
        command: command.to_string(),
        seed,
        tol,
        versions: Versions {
            lagsweep: lagsweep::version(),
            cli: env!("CARGO_PKG_VERSION"),
        },
        result,
    }
}

/// Writes the JSON document to `--out` or standard output, newline-terminated.
pub fn emit(envelope: &impl Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = to_json(envelope)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Minimal CSV writer: all cells are numeric or bare identifiers, so no
/// quoting is needed.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
