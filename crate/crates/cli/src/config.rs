//! `key = value` config files merged underneath the command line.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

/// Removes `--config <path>` from `args` and appends the file's settings as
/// flags of the chosen subcommand, skipping any flag already given.
///
/// Keys that belong to another subcommand are ignored so one file can
/// serve several commands; keys no subcommand knows are an error.
pub fn merge_config(mut args: Vec<String>, cli: &Command) -> Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a path");
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let entries = parse_config(&text)?;

    let Some(sub) = args.get(1).and_then(|name| cli.find_subcommand(name)) else {
        return Ok(args);
    };
    for (key, value) in entries {
        let flag = format!("--{key}");
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            let known =
                cli.get_subcommands().any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
            if !known {
                bail!("config key `{key}` matches no option");
            }
            continue;
        };
        let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            args.push(flag);
            args.push(value);
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => args.push(flag),
                "false" | "no" | "0" => {}
                _ => bail!("config key `{key}` is a switch; use true or false"),
            }
        }
    }
    Ok(args)
}
