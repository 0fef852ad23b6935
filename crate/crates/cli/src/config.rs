//! `key = value` configuration files merged into the command line.
//!
//! Entries become `--key value` arguments inserted directly after the
//! subcommand name, ahead of the user's own flags. Options are parsed with
//! last-occurrence-wins semantics, so explicit flags override the file.
//! `key = true` becomes a bare `--key`; `key = false` is dropped.

use std::path::Path;

use crate::error::CliError;

/// Parses a configuration file body into ordered `(key, value)` pairs.
/// Blank lines and lines starting with `#` are ignored; keys may carry a
/// leading `--`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key `{}`", lineno + 1, key)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn config_args(pairs: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

/// Removes `--config <path>` (or `--config=<path>`) from `argv` and splices
/// the file's entries in after the subcommand. `argv[0]` is the program
/// name and `argv[1]` the subcommand.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it
                .next()
                .ok_or_else(|| CliError::Usage("--config requires a path".into()))?;
            path = Some(p);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    if rest.len() < 2 {
        return Err(CliError::Usage("--config must follow a subcommand".into()));
    }
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| CliError::io(Path::new(&path), e))?;
    let extra = config_args(&parse_config(&text)?);
    let mut out = rest[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&rest[2..]);
    Ok(out)
}
