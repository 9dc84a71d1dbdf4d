//! Flat `key = value` config files, merged in front of the command-line flags.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Parses config text into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped; keys may use `_` or `-`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", lineno + 1)));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

/// Pulls `--config PATH` / `--config=PATH` out of `argv`.
fn take_config(argv: &mut Vec<OsString>) -> Result<Option<OsString>, CliError> {
    let mut found = None;
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy().into_owned();
        if s == "--" {
            break;
        }
        if s == "--config" {
            if i + 1 >= argv.len() {
                return Err(CliError::Usage("--config needs a path".into()));
            }
            found = Some(argv.remove(i + 1));
            argv.remove(i);
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(OsString::from(p));
            argv.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Turns config pairs into flags for `subcommand`. Boolean flags accept
/// `true`/`false`; the `command` key must name the subcommand if present.
fn config_flags(subcommand: &str, pairs: &[(String, String)]) -> Result<Vec<OsString>, CliError> {
    let root = Cli::command();
    let sub = root
        .find_subcommand(subcommand)
        .ok_or_else(|| CliError::Usage(format!("unknown command '{subcommand}'")))?;
    let mut flags = Vec::new();
    for (key, value) in pairs {
        if key == "command" {
            if value != subcommand {
                return Err(CliError::Usage(format!(
                    "config is for '{value}' but the command is '{subcommand}'"
                )));
            }
            continue;
        }
        if key == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Usage(format!("unknown config key '{key}' for '{subcommand}'")))?;
        if arg.get_action().takes_values() {
            flags.push(OsString::from(format!("--{key}")));
            flags.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => flags.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!("config key '{key}' expects true or false, got '{other}'")))
                }
            }
        }
    }
    Ok(flags)
}

/// Position of the subcommand name: the first argument after the program
/// name that is not a flag.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    (1..argv.len()).find(|&i| !argv[i].to_string_lossy().starts_with('-'))
}

/// Returns `argv` with the config file's flags inserted right after the
/// subcommand, so flags given on the command line override them.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut argv = argv;
    let Some(path) = take_config(&mut argv)? else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let pairs = parse_config(&text)?;
    let Some(idx) = subcommand_index(&argv) else {
        return Err(CliError::Usage("a command is required".into()));
    };
    let name = argv[idx].to_string_lossy().into_owned();
    let flags = config_flags(&name, &pairs)?;
    let tail = argv.split_off(idx + 1);
    argv.extend(flags);
    argv.extend(tail);
    Ok(argv)
}
