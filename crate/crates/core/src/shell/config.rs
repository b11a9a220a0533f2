//! Run configuration: TOML sections with a closed set of keys.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value as Toml};

use super::files::resolve;
use super::report::{Entry, Source, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Number,
    Integer,
    /// Existing file, relative paths resolved against the config directory.
    Path,
    Triple,
    Choice(&'static [&'static str]),
}

const VARIANTS: &[&str] = &["radiative", "nonradiative"];
const MODELS: &[&str] = &[
    "lorentzian",
    "gaussian",
    "gaussian_pair",
    "odmr",
    "rabi",
    "double_exponential",
    "saturation",
];
const AXES: &[&str] = &["x", "y", "z"];

/// Every accepted section and key.
pub const SCHEMA: &[(&str, &[(&str, Kind)])] = &[
    ("run", &[("seed", Kind::Integer)]),
    (
        "rates",
        &[
            ("k_e", Kind::Number),
            ("k_f", Kind::Number),
            ("k_s", Kind::Number),
            ("k_0", Kind::Number),
            ("k_m", Kind::Number),
            ("variant", Kind::Choice(VARIANTS)),
            ("polarization", Kind::Number),
            ("duration_ns", Kind::Number),
            ("step_ns", Kind::Number),
            ("gate_start_ns", Kind::Number),
            ("gate_width_ns", Kind::Number),
            ("purcell_factor", Kind::Number),
        ],
    ),
    ("fit", &[("model", Kind::Choice(MODELS)), ("data", Kind::Path)]),
    (
        "rates_fit",
        &[
            ("trace_ms0", Kind::Path),
            ("trace_ms1", Kind::Path),
            ("k_f", Kind::Number),
            ("variant", Kind::Choice(VARIANTS)),
        ],
    ),
    ("spectrum", &[("data", Kind::Path)]),
    (
        "cavity",
        &[
            ("q_factor", Kind::Number),
            ("mode_volume", Kind::Number),
            ("wavelength_nm", Kind::Number),
            ("refractive_index", Kind::Number),
            ("emitter_fwhm_ghz", Kind::Number),
            ("zpl_fraction", Kind::Number),
        ],
    ),
    (
        "collection",
        &[
            ("table", Kind::Path),
            ("k_x", Kind::Number),
            ("k_y", Kind::Number),
            ("k_z", Kind::Number),
            ("off_wavelength_nm", Kind::Number),
            ("on_wavelength_nm", Kind::Number),
            ("purcell_off", Kind::Triple),
            ("purcell_on", Kind::Triple),
            ("coupled_axis", Kind::Choice(AXES)),
            ("zpl_fraction_off", Kind::Number),
            ("zpl_fraction_on", Kind::Number),
        ],
    ),
    (
        "scenario",
        &[
            ("lifetime_factor", Kind::Number),
            ("collection_factor_zpl", Kind::Number),
            ("collection_factor_broadband", Kind::Number),
            ("zpl_fraction_off", Kind::Number),
            ("zpl_fraction_on", Kind::Number),
            ("contrast_ratio", Kind::Number),
            ("contrast_off", Kind::Number),
        ],
    ),
    ("mc", &[("n0", Kind::Number), ("n1", Kind::Number), ("trials", Kind::Integer)]),
    (
        "tuning",
        &[
            ("current_nm", Kind::Number),
            ("target_nm", Kind::Number),
            ("red_rate_nm_per_h", Kind::Number),
            ("blue_shift_per_nm", Kind::Number),
        ],
    ),
];

fn kind_of(section: &str, key: &str) -> Option<Kind> {
    SCHEMA
        .iter()
        .find(|(s, _)| *s == section)?
        .1
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, kind)| *kind)
}

/// Parsed and schema-checked configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    table: Table,
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        RunConfig::parse(&text, path, &base)
    }

    /// Parses `text`; `origin` names it in messages, `base_dir` anchors relative paths.
    pub fn parse(text: &str, origin: &Path, base_dir: &Path) -> Result<RunConfig> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        let cfg = RunConfig {
            table,
            base_dir: base_dir.to_path_buf(),
        };
        let mut errors = cfg.schema_errors();
        if cfg.table.is_empty() {
            errors.push("configuration defines no sections".into());
        }
        if errors.is_empty() {
            errors.extend(super::pipeline::validate_sections(&cfg));
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    fn schema_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for (name, value) in &self.table {
            let Some(keys) = SCHEMA.iter().find(|(s, _)| s == name).map(|(_, k)| k) else {
                errors.push(format!("[{name}]: unknown section"));
                continue;
            };
            let Some(section) = value.as_table() else {
                errors.push(format!("{name}: expected a [{name}] section"));
                continue;
            };
            for (key, v) in section {
                let Some(kind) = keys.iter().find(|(k, _)| k == key).map(|(_, k)| *k) else {
                    errors.push(format!("{name}.{key}: unknown key"));
                    continue;
                };
                if let Err(msg) = self.check_kind(kind, v) {
                    errors.push(format!("{name}.{key}: {msg}"));
                }
            }
        }
        errors
    }

    fn check_kind(&self, kind: Kind, v: &Toml) -> std::result::Result<(), String> {
        match kind {
            Kind::Number => number(v).map(|_| ()),
            Kind::Integer => match v.as_integer() {
                Some(n) if n >= 0 => Ok(()),
                _ => Err(format!("expected a non-negative integer, found {v}")),
            },
            Kind::Path => {
                let s = v.as_str().ok_or_else(|| format!("expected a file path string, found {v}"))?;
                let p = resolve(&self.base_dir, s);
                if p.is_file() {
                    Ok(())
                } else {
                    Err(format!("file {} does not exist", p.display()))
                }
            }
            Kind::Triple => match v.as_array() {
                Some(a) if a.len() == 3 => a.iter().try_for_each(|x| number(x).map(|_| ())),
                _ => Err(format!("expected an array of three numbers, found {v}")),
            },
            Kind::Choice(options) => match v.as_str() {
                Some(s) if options.contains(&s) => Ok(()),
                _ => Err(format!("expected one of {}, found {v}", options.join(", "))),
            },
        }
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.table.contains_key(name)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&Toml> {
        self.table.get(section)?.as_table()?.get(key)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Seed from `[run] seed`, if set.
    pub fn seed(&self) -> Option<u64> {
        self.raw("run", "seed").and_then(Toml::as_integer).map(|n| n as u64)
    }
}

fn number(v: &Toml) -> std::result::Result<f64, String> {
    let x = match v {
        Toml::Float(x) => *x,
        Toml::Integer(n) => *n as f64,
        _ => return Err(format!("expected a number, found {v}")),
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{x} is not finite"))
    }
}

/// Reads one section's keys, recording each resolved value and its origin
/// and collecting field-level errors.
pub struct SectionReader<'a> {
    cfg: &'a RunConfig,
    section: &'static str,
    pub entries: Vec<Entry>,
    errors: Vec<String>,
}

impl<'a> SectionReader<'a> {
    pub fn new(cfg: &'a RunConfig, section: &'static str) -> Self {
        SectionReader {
            cfg,
            section,
            entries: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn key_kind(&self, key: &str) -> Kind {
        kind_of(self.section, key).unwrap_or_else(|| panic!("{}.{key} missing from the schema", self.section))
    }

    fn record(&mut self, key: &str, value: Value, unit: &str, source: Source) {
        self.entries.push(Entry {
            section: self.section.to_string(),
            name: key.to_string(),
            value,
            unit: unit.to_string(),
            source,
        });
    }

    pub fn error(&mut self, key: &str, message: impl std::fmt::Display) {
        self.errors.push(format!("{}.{key}: {message}", self.section));
    }

    fn missing(&mut self, key: &str) {
        self.error(key, "required");
    }

    /// Number, falling back to `default`; required when `default` is `None`.
    pub fn number(&mut self, key: &str, default: Option<f64>, unit: &str) -> f64 {
        debug_assert_eq!(self.key_kind(key), Kind::Number);
        let (x, source) = match self.cfg.raw(self.section, key) {
            Some(v) => (number(v).unwrap_or(f64::NAN), Source::Config),
            None => match default {
                Some(d) => (d, Source::Default),
                None => {
                    self.missing(key);
                    return f64::NAN;
                }
            },
        };
        self.record(key, Value::Number(x), unit, source);
        x
    }

    pub fn optional_number(&mut self, key: &str, unit: &str) -> Option<f64> {
        debug_assert_eq!(self.key_kind(key), Kind::Number);
        let x = number(self.cfg.raw(self.section, key)?).ok()?;
        self.record(key, Value::Number(x), unit, Source::Config);
        Some(x)
    }

    pub fn integer(&mut self, key: &str, default: u64, unit: &str) -> u64 {
        debug_assert_eq!(self.key_kind(key), Kind::Integer);
        let (n, source) = match self.cfg.raw(self.section, key).and_then(Toml::as_integer) {
            Some(n) => (n as u64, Source::Config),
            None => (default, Source::Default),
        };
        self.record(key, Value::Integer(n), unit, source);
        n
    }

    pub fn choice(&mut self, key: &str, default: Option<&'static str>) -> String {
        debug_assert!(matches!(self.key_kind(key), Kind::Choice(_)));
        let (s, source) = match self.cfg.raw(self.section, key).and_then(Toml::as_str) {
            Some(s) => (s.to_string(), Source::Config),
            None => match default {
                Some(d) => (d.to_string(), Source::Default),
                None => {
                    self.missing(key);
                    return String::new();
                }
            },
        };
        self.record(key, Value::Text(s.clone()), "", source);
        s
    }

    pub fn path(&mut self, key: &str) -> PathBuf {
        debug_assert_eq!(self.key_kind(key), Kind::Path);
        match self.cfg.raw(self.section, key).and_then(Toml::as_str) {
            Some(s) => {
                self.record(key, Value::Text(s.to_string()), "", Source::Config);
                resolve(&self.cfg.base_dir, s)
            }
            None => {
                self.missing(key);
                PathBuf::new()
            }
        }
    }

    pub fn optional_triple(&mut self, key: &str, unit: &str) -> Option<[f64; 3]> {
        debug_assert_eq!(self.key_kind(key), Kind::Triple);
        let a = self.cfg.raw(self.section, key)?.as_array()?;
        let mut t = [f64::NAN; 3];
        for (i, v) in a.iter().take(3).enumerate() {
            t[i] = number(v).unwrap_or(f64::NAN);
        }
        for (axis, x) in ["x", "y", "z"].iter().zip(t) {
            self.record(&format!("{key}_{axis}"), Value::Number(x), unit, Source::Config);
        }
        Some(t)
    }

    /// Turns a domain error into a field-level message for `key`.
    pub fn check<T>(&mut self, key: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(key, e);
                None
            }
        }
    }

    pub fn finish(self) -> std::result::Result<Vec<Entry>, Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.entries)
        } else {
            Err(self.errors)
        }
    }
}
