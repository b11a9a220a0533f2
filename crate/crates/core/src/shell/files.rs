//! CSV files: `#` comment lines on top, one mandatory header row, numeric rows.

use std::fs;
use std::path::{Path, PathBuf};

use crate::collection::EfficiencyTable;
use crate::error::{Error, Result};
use crate::series::{AbscissaUnit, Spectrum, TimeTrace};

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: usize = 9;

pub const TRACE_HEADER: [&str; 2] = ["time_ns", "signal"];
pub const EFFICIENCY_HEADER: [&str; 4] = ["wavelength_nm", "eps_x", "eps_y", "eps_z"];
pub const SATURATION_HEADER: [&str; 2] = ["power_uw", "count_rate_khz"];

/// Shortest decimal rendering of `x` rounded to [`SIGNIFICANT_DIGITS`].
/// Plain notation for exponents in [-5, 15), scientific otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        let rounded: f64 = sci.parse().expect("scientific format parses");
        trim_zeros(format!("{:.*}", decimals, rounded))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A parsed CSV file, keeping its comment block for byte-identical rewrites.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDoc {
    /// Comment lines without the leading `#` and one optional space.
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvDoc {
    pub fn new(header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        CsvDoc {
            comments: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    pub fn with_comments(mut self, comments: &[&str]) -> Self {
        self.comments = comments.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn parse(text: &str, origin: &Path) -> Result<CsvDoc> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut comments = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix('#') else { break };
            let rest = rest.trim_end_matches('\n').trim_end_matches('\r');
            comments.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            body_start += line.len();
        }
        let offset = comments.len();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(&text.as_bytes()[body_start..]);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(offset + 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(parse_err(offset + 1, "missing header row".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(offset + line, e.to_string())
            })?;
            let line = offset + record.position().map_or(0, |p| p.line() as usize);
            let row = record
                .iter()
                .enumerate()
                .map(|(i, field)| {
                    field.parse::<f64>().map_err(|_| {
                        parse_err(line, format!("column {}: `{field}` is not a number", header[i]))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(CsvDoc {
            comments,
            header,
            rows,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            if c.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str("# ");
                out.push_str(c);
                out.push('\n');
            }
        }
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|v| format_number(*v)))
                .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 output"));
        out
    }

    pub fn read(path: &Path) -> Result<CsvDoc> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        CsvDoc::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    fn expect_header(&self, path: &Path, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: self.comments.len() + 1,
                message: format!("expected header `{}`, found `{}`", expected.join(","), self.header.join(",")),
            });
        }
        Ok(())
    }
}

fn located(path: &Path, err: Error) -> Error {
    match err {
        Error::InvariantViolation { field, message } => Error::InvariantViolation {
            field: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    }
}

pub fn spectrum_doc(s: &Spectrum) -> CsvDoc {
    CsvDoc::new(
        &[s.unit().column_name(), "intensity"],
        s.abscissa().iter().zip(s.intensity()).map(|(x, y)| vec![*x, *y]).collect(),
    )
}

pub fn spectrum_from_doc(doc: &CsvDoc, path: &Path) -> Result<Spectrum> {
    let unit = doc
        .header
        .first()
        .and_then(|h| AbscissaUnit::from_column_name(h))
        .filter(|_| doc.header.len() == 2 && doc.header[1] == "intensity")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: doc.comments.len() + 1,
            message: format!(
                "expected header `wavelength_nm,intensity` or `frequency_ghz,intensity`, found `{}`",
                doc.header.join(",")
            ),
        })?;
    Spectrum::new(unit, doc.column(0), doc.column(1)).map_err(|e| located(path, e))
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum> {
    spectrum_from_doc(&CsvDoc::read(path)?, path)
}

pub fn save_spectrum(s: &Spectrum, path: &Path) -> Result<()> {
    spectrum_doc(s).write(path)
}

pub fn trace_doc(t: &TimeTrace) -> CsvDoc {
    CsvDoc::new(
        &TRACE_HEADER,
        t.times().iter().zip(t.values()).map(|(x, y)| vec![*x, *y]).collect(),
    )
}

pub fn load_trace(path: &Path) -> Result<TimeTrace> {
    let doc = CsvDoc::read(path)?;
    doc.expect_header(path, &TRACE_HEADER)?;
    TimeTrace::new(doc.column(0), doc.column(1)).map_err(|e| located(path, e))
}

pub fn save_trace(t: &TimeTrace, path: &Path) -> Result<()> {
    trace_doc(t).write(path)
}

pub fn efficiency_doc(t: &EfficiencyTable) -> CsvDoc {
    let rows = (0..t.wavelength().len())
        .map(|i| vec![t.wavelength()[i], t.column(0)[i], t.column(1)[i], t.column(2)[i]])
        .collect();
    CsvDoc::new(&EFFICIENCY_HEADER, rows)
}

pub fn load_efficiency_table(path: &Path) -> Result<EfficiencyTable> {
    let doc = CsvDoc::read(path)?;
    doc.expect_header(path, &EFFICIENCY_HEADER)?;
    EfficiencyTable::new(doc.column(0), doc.column(1), doc.column(2), doc.column(3))
        .map_err(|e| located(path, e))
}

pub fn save_efficiency_table(t: &EfficiencyTable, path: &Path) -> Result<()> {
    efficiency_doc(t).write(path)
}

/// Excitation power (µW) against detected count rate (kHz).
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationData {
    pub power: Vec<f64>,
    pub count_rate: Vec<f64>,
}

pub fn load_saturation(path: &Path) -> Result<SaturationData> {
    let doc = CsvDoc::read(path)?;
    doc.expect_header(path, &SATURATION_HEADER)?;
    Ok(SaturationData {
        power: doc.column(0),
        count_rate: doc.column(1),
    })
}

pub fn saturation_doc(d: &SaturationData) -> CsvDoc {
    CsvDoc::new(
        &SATURATION_HEADER,
        d.power.iter().zip(&d.count_rate).map(|(p, c)| vec![*p, *c]).collect(),
    )
}

/// Resolves `p` against `base` unless it is already absolute.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(637.4), "637.4");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(123456789012.0), "123456789000");
        assert_eq!(format_number(1e15), "1e15");
        assert_eq!(format_number(1.5e-7), "1.5e-7");
        assert_eq!(format_number(0.00012345), "0.00012345");
        assert_eq!(format_number(2.0 / 3.0 * 1e-9), "6.66666667e-10");
        assert_eq!(format_number(9.9999999999), "10");
    }

    #[test]
    fn formatted_numbers_are_fixed_points() {
        for x in [1.0 / 7.0, 6.02214076e23, -3.3e-12, 644.8, 0.078, 1e-5, 99999.99999] {
            let once = format_number(x);
            assert_eq!(format_number(once.parse().unwrap()), once, "{x}");
        }
    }

    #[test]
    fn parse_reports_lines() {
        let p = Path::new("x.csv");
        let err = CsvDoc::parse("# note\ntime_ns,signal\n0,1\n1,oops\n", p).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
        let err = CsvDoc::parse("time_ns,signal\n0,1\n1\n", p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(CsvDoc::parse("time_ns,signal\n1,000,2\n", p).is_err());
    }

    #[test]
    fn comments_survive_rewrite() {
        let text = "# provenance: synthetic\n#\ntime_ns,signal\n0,1.5\n2,3\n";
        let doc = CsvDoc::parse(text, Path::new("t.csv")).unwrap();
        assert_eq!(doc.comments, vec!["provenance: synthetic".to_string(), String::new()]);
        assert_eq!(doc.render(), text);
    }
}
