//! `key = value` config files, merged into argv underneath explicit flags.

use std::fs;
use std::path::Path;

use clap::Command;

/// Parsed `key = value` pairs in file order. `#` starts a comment.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("{}:{}: empty key", path.display(), i + 1));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn leaf<'a>(root: &'a Command, path: &[String]) -> &'a Command {
    path.iter().fold(root, |cmd, name| {
        cmd.find_subcommand(name)
            .expect("path came from a successful parse")
    })
}

/// Rewrites `argv` so that the config entries appear as flags right after the
/// subcommand path; since later occurrences override earlier ones, flags
/// given on the command line win.
pub fn merge(
    root: &Command,
    argv: &[String],
    path: &[String],
    pairs: &[(String, String)],
) -> Result<Vec<String>, String> {
    let cmd = leaf(root, path);
    let mut injected = Vec::new();
    for (key, value) in pairs {
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("unknown config key `{key}` for `{}`", path.join(" ")))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value.clone());
        } else {
            match value.as_str() {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(format!("config key `{key}` is a switch; got `{other}`"));
                }
            }
        }
    }
    // Subcommand names appear in argv in order; the config goes after the last.
    let mut at = 1;
    for name in path {
        at += argv[at..]
            .iter()
            .position(|a| a == name)
            .expect("subcommand present in argv")
            + 1;
    }
    let mut out = argv[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
