//! Run manifests: `key = value` lines written next to every artifact.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;
use crate::io::sha256_file;

fn unix_now() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, options: &[(String, String)]) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("started_unix", unix_now());
        for (k, v) in options {
            m.push(format!("option.{k}"), v);
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        let value = value.to_string().replace(['\n', '\r'], " ");
        self.entries.push((key.into(), value));
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        self.push(format!("input.{name}.path"), path.display());
        self.push(format!("input.{name}.sha256"), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        self.push(format!("output.{name}.path"), path.display());
        self.push(format!("output.{name}.sha256"), sha256_file(path)?);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `option.*` entries with the prefix removed.
    pub fn options(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|(k, v)| k.strip_prefix("option.").map(|k| (k, v.as_str())))
    }

    pub fn write(mut self, path: &Path) -> Result<(), CliError> {
        self.push("finished_unix", unix_now());
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut m = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| CliError::Usage(format!("{}: line {} is not 'key = value'", path.display(), n + 1)))?;
            m.entries.push((k.trim().to_string(), v.to_string()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let mut m = Manifest::new("fit", &[("frailty".into(), "gamma".into()), ("covariates".into(), "a,b".into())]);
        m.push("note", "two\nlines");
        m.write(&p).unwrap();
        let r = Manifest::read(&p).unwrap();
        assert_eq!(r.get("command"), Some("fit"));
        assert_eq!(r.get("note"), Some("two lines"));
        assert!(r.get("finished_unix").is_some());
        let opts: Vec<_> = r.options().collect();
        assert_eq!(opts, vec![("frailty", "gamma"), ("covariates", "a,b")]);
    }
}
