//! Flat `key = value` run configuration.
//!
//! Each key is a long flag name of the chosen subcommand. The file's entries
//! are spliced in ahead of the user's own arguments, so with
//! `args_override_self` any flag also given on the command line wins.
//! `true`/`false` switch boolean flags on or leave them off.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("{}:{}: expected `key = value`", origin.display(), i + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Input(format!("{}:{}: invalid key", origin.display(), i + 1)));
        }
        out.push((key, value.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(2);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Returns `args` with the config file's entries inserted after the
/// subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text, &path)? {
        match value.to_ascii_lowercase().as_str() {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out: Vec<OsString> = args[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_booleans() {
        let kv = parse_config("# run\nbasis = exponential\nstart_knots=30 # inline\n\nsweep = true\n", Path::new("c")).unwrap();
        assert_eq!(
            kv,
            vec![
                ("basis".to_string(), "exponential".to_string()),
                ("start-knots".to_string(), "30".to_string()),
                ("sweep".to_string(), "true".to_string()),
            ]
        );
        assert!(parse_config("no equals sign", Path::new("c")).is_err());
    }

    #[test]
    fn config_entries_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "basis = exponential\nstrict-delta = true\nsweep = false\n").unwrap();
        let args = os(&["salsa2d", "fit", "--config", p.to_str().unwrap(), "--basis", "gaussian"]);
        let out = expand_args(args).unwrap();
        let s: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(&s[2..5], &["--basis", "exponential", "--strict-delta"]);
        assert_eq!(s.last().unwrap(), "gaussian");
    }

    #[test]
    fn missing_config_names_path() {
        let err = expand_args(os(&["salsa2d", "fit", "--config=/nonexistent/x.cfg"])).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.cfg"));
    }
}
