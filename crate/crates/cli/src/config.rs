//! `--config FILE`: a TOML table per subcommand whose keys are flag names.
//! Values are spliced in ahead of the command-line flags, which win.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::error::CliError;

fn value_args(flag: &str, v: &toml::Value) -> Result<Vec<String>, CliError> {
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(x) => Ok(x.to_string()),
            toml::Value::Boolean(b) => Ok(b.to_string()),
            _ => Err(CliError::Usage(format!("--config: '{flag}' must be a scalar or a list of scalars"))),
        }
    };
    let name = format!("--{}", flag.replace('_', "-"));
    Ok(match v {
        toml::Value::Boolean(true) => vec![name],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            vec![name, parts.join(",")]
        }
        other => vec![name, scalar(other)?],
    })
}

/// Removes `--config` from `argv` and inserts the subcommand's table as flags.
pub fn expand(argv: Vec<OsString>) -> Result<(Vec<OsString>, Option<PathBuf>), CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok((rest, None));
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    let doc: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    let Some(sub_pos) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Ok((rest, Some(path)));
    };
    let sub = rest[sub_pos].to_string_lossy().into_owned();
    let mut injected = Vec::new();
    if let Some(v) = doc.get(&sub) {
        let table = v.as_table().ok_or_else(|| CliError::Usage(format!("--config: [{sub}] must be a table")))?;
        for (k, v) in table {
            injected.extend(value_args(k, v)?.into_iter().map(OsString::from));
        }
    }
    rest.splice(sub_pos + 1..sub_pos + 1, injected);
    Ok((rest, Some(path)))
}
