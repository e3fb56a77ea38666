//! JSON emission with every float written to 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default)]
struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON followed by a newline.
pub fn to_string<T: Serialize>(value: &T) -> CliResult<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::runtime("serialization", e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| CliError::runtime("serialization", e.to_string()))
}
