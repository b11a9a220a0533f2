//! Command reports: every value tagged with a unit and its origin.

use std::fmt::Write as _;

use super::files::{format_number, CsvDoc};

/// Where a reported value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Config,
    Default,
    Flag,
    Data,
    Computed,
}

impl Source {
    pub fn id(self) -> &'static str {
        match self {
            Source::Config => "config",
            Source::Default => "default",
            Source::Flag => "flag",
            Source::Data => "data",
            Source::Computed => "computed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Integer(u64),
    Text(String),
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Number(x) => format_number(*x),
            Value::Integer(n) => n.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub name: String,
    pub value: Value,
    /// `"1"` for dimensionless numbers, `""` for text.
    pub unit: String,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub entries: Vec<Entry>,
    /// Data files produced alongside the report, by file name.
    pub artifacts: Vec<(String, CsvDoc)>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            entries: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn number(&mut self, section: &str, name: &str, value: f64, unit: &str, source: Source) {
        self.push(section, name, Value::Number(value), unit, source);
    }

    pub fn integer(&mut self, section: &str, name: &str, value: u64, unit: &str, source: Source) {
        self.push(section, name, Value::Integer(value), unit, source);
    }

    pub fn text(&mut self, section: &str, name: &str, value: &str, source: Source) {
        self.push(section, name, Value::Text(value.to_string()), "", source);
    }

    fn push(&mut self, section: &str, name: &str, value: Value, unit: &str, source: Source) {
        self.entries.push(Entry {
            section: section.to_string(),
            name: name.to_string(),
            value,
            unit: unit.to_string(),
            source,
        });
    }

    pub fn get(&self, section: &str, name: &str) -> Option<&Value> {
        self.entries
            .iter()
            .find(|e| e.section == section && e.name == name)
            .map(|e| &e.value)
    }

    pub fn number_of(&self, section: &str, name: &str) -> Option<f64> {
        match self.get(section, name)? {
            Value::Number(x) => Some(*x),
            Value::Integer(n) => Some(*n as f64),
            Value::Text(_) => None,
        }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.render_text(),
            ReportFormat::Csv => self.render_csv(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = format!("nvreadout {}\n", self.command);
        let width = self
            .entries
            .iter()
            .map(|e| e.section.len() + e.name.len() + 1)
            .max()
            .unwrap_or(0);
        let mut section = "";
        for e in &self.entries {
            if e.section != section {
                section = &e.section;
                let _ = writeln!(out, "\n[{section}]");
            }
            let key = format!("{}.{}", e.section, e.name);
            let value = match (&e.value, e.unit.as_str()) {
                (Value::Text(s), _) => s.clone(),
                (v, "1") => format!("{} (dimensionless)", v.render()),
                (v, unit) => format!("{} {unit}", v.render()),
            };
            let _ = writeln!(out, "{key:<width$} = {value}  [{}]", e.source.id());
        }
        if !self.artifacts.is_empty() {
            out.push_str("\n[artifacts]\n");
            for (name, _) in &self.artifacts {
                let _ = writeln!(out, "{name}");
            }
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["section", "name", "value", "unit", "source"])
            .expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.section.as_str(),
                e.name.as_str(),
                &e.value.render(),
                e.unit.as_str(),
                e.source.id(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
    }
}
