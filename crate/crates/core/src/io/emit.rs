// SPDX-License-Identifier: Apache-2.0

//! Report emission: JSON with 17 significant digits and CSV series files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::analysis::AnalysisReport;
use crate::error::{Error, Result};

/// Pretty JSON whose floats are written as `{:.16e}`, i.e. 17 significant
/// digits, which round-trips every finite `f64` exactly.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serializes any value with the report float format.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    CsvSeries,
}

fn file_stem(index: usize, name: &str) -> String {
    let clean: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect();
    format!("series_{index:03}_{clean}")
}

pub fn series_csv(values: &[f64], in_set: &[bool]) -> String {
    let mut out = String::from("n,c_n,in_set\n");
    for (n, (c, s)) in values.iter().zip(in_set).enumerate() {
        out.push_str(&format!("{n},{c:.16e},{}\n", u8::from(*s)));
    }
    out
}

/// Writes `report.json` into `destination`, or one CSV file per correlation
/// series. Returns the files written.
pub fn emit(report: &AnalysisReport, format: Format, destination: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(destination)?;
    match format {
        Format::Json => {
            let path = destination.join("report.json");
            fs::write(&path, to_json_string(report)?)?;
            Ok(vec![path])
        }
        Format::CsvSeries => {
            let mut written = Vec::with_capacity(report.series.len());
            for (k, s) in report.series.iter().enumerate() {
                let path = destination.join(format!("{}.csv", file_stem(k, &s.name)));
                fs::write(&path, series_csv(&s.values, &s.in_set))?;
                written.push(path);
            }
            Ok(written)
        }
    }
}
