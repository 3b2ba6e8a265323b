//! Plain `key = value` configuration files, merged into argv as flags so
//! that anything given on the command line wins.

use std::path::Path;

/// Subcommands whose leaf is one level further down.
const GROUPS: [&str; 2] = ["lde", "ed"];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax(String),
}

/// `key = value` pairs in file order; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax(format!("line {}: expected key = value, got `{line}`", n + 1)));
        };
        let k = k.trim();
        if k.is_empty() || k.starts_with('-') {
            return Err(ConfigError::Syntax(format!("line {}: bad key `{k}`", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Index just past the leaf subcommand, skipping `--config <path>`.
fn leaf_end(args: &[String]) -> Option<usize> {
    let mut i = 1;
    let mut depth = 0;
    let mut group = false;
    while i < args.len() {
        let a = &args[i];
        if a == "--config" {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            i += 1;
            continue;
        }
        depth += 1;
        if depth == 1 {
            group = GROUPS.contains(&a.as_str());
            if !group {
                return Some(i + 1);
            }
        } else if group {
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

/// Splices config entries in front of the leaf's own flags. `key = true`
/// becomes a bare switch and `key = false` is dropped.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let entries = load_config(Path::new(&path))?;
    let Some(at) = leaf_end(&args) else {
        return Ok(args);
    };
    let mut flags = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => flags.push(format!("--{k}")),
            "false" => {}
            _ => {
                flags.push(format!("--{k}"));
                flags.push(v);
            }
        }
    }
    let mut out = args[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
