//! `--config <file>` support. The file holds `key=value` lines naming long
//! flags; its entries are spliced in right after the subcommand so that
//! flags given on the command line, which come later, override them.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::Failure;

/// Returns `args` with the config file's flags inserted.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
    let injected = parse(&text)?;
    // program name, then the subcommand
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(args[split..].iter().cloned());
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    let mut found = None;
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(rest));
        }
    }
    found
}

/// Blank lines and `#` comments are skipped. `flag=true` becomes a bare
/// switch and `flag=false` is dropped.
pub fn parse(text: &str) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "config line {}: expected key=value, got `{line}`",
                n + 1
            )));
        };
        let (key, value) = (key.trim().trim_start_matches("--"), value.trim());
        if key.is_empty() || key == "config" {
            return Err(Failure::Usage(format!(
                "config line {}: invalid key `{key}`",
                n + 1
            )));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}
