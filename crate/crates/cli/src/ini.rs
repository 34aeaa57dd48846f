//! Sectioned `key = value` text.
//!
//! ```text
//! # comment          (also ';')
//! [section]
//! key = value        trailing comments are not stripped
//! ```
//!
//! Keys must live inside a section; a section or key may appear only once.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ini {
    pub sections: Vec<Section>,
}

/// A problem found in a config, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub section: Option<String>,
    pub key: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            section: None,
            key: None,
            message: message.into(),
        }
    }

    pub fn at(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn in_section(mut self, section: &str) -> Self {
        self.section = Some(section.to_string());
        self
    }

    pub fn for_key(mut self, key: &str) -> Self {
        self.key = Some(key.to_string());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        match (&self.section, &self.key) {
            (Some(s), Some(k)) => write!(f, "[{s}] {k}: ")?,
            (Some(s), None) => write!(f, "[{s}]: ")?,
            (None, Some(k)) => write!(f, "{k}: ")?,
            (None, None) => {}
        }
        f.write_str(&self.message)
    }
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut ini = Ini::default();
        let mut diags = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    diags.push(Diagnostic::new(format!("unterminated section header '{s}'")).at(line));
                    continue;
                };
                let name = name.trim();
                if name.is_empty() {
                    diags.push(Diagnostic::new("empty section name").at(line));
                    continue;
                }
                if ini.section(name).is_some() {
                    diags.push(Diagnostic::new("section defined twice").at(line).in_section(name));
                    continue;
                }
                ini.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((k, v)) = s.split_once('=') else {
                diags.push(Diagnostic::new(format!("expected 'key = value', got '{s}'")).at(line));
                continue;
            };
            let key = k.trim();
            let value = v.trim();
            if key.is_empty() {
                diags.push(Diagnostic::new("empty key").at(line));
                continue;
            }
            let Some(section) = ini.sections.last_mut() else {
                diags.push(Diagnostic::new("key outside any section").at(line).for_key(key));
                continue;
            };
            if section.entries.iter().any(|e| e.key == key) {
                diags.push(Diagnostic::new("key defined twice").at(line).in_section(&section.name).for_key(key));
                continue;
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        if diags.is_empty() {
            Ok(ini)
        } else {
            Err(diags)
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    /// Sets `section.key`, creating the section if needed. Overrides carry
    /// no line number.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: 0,
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.to_string();
                e.line = 0;
            }
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), Diagnostic> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Diagnostic::new(format!("override '{spec}' is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Diagnostic::new(format!("override '{spec}' lacks a section (section.key=value)")))?;
        if section.is_empty() || key.is_empty() {
            return Err(Diagnostic::new(format!("override '{spec}' has an empty section or key")));
        }
        self.set(section.trim(), key.trim(), value.trim());
        Ok(())
    }
}
