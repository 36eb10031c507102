//! `key = value` experiment manifests.
//!
//! Every key is the long name of a command-line flag. Entries are spliced
//! into the argument list right after the subcommand, so flags given on the
//! command line (which come later) take precedence.

use std::path::Path;

use clap::CommandFactory;

use crate::cli::Cli;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", n + 1));
            };
            let key = k.trim().trim_start_matches("--").to_string();
            if key.is_empty() {
                return Err(format!("line {}: empty key", n + 1));
            }
            entries.push((key, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Long flag names accepted by the subcommand at `path` (e.g. `["generate", "grid"]`).
fn flags_of(path: &[&str]) -> Option<Vec<String>> {
    let mut cmd = Cli::command();
    for name in path {
        cmd = cmd.find_subcommand(name)?.clone();
    }
    Some(cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect())
}

fn all_flags(cmd: &clap::Command, out: &mut Vec<String>) {
    out.extend(cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)));
    for sub in cmd.get_subcommands() {
        all_flags(sub, out);
    }
}

/// Pulls `--config PATH` out of `args` and splices the file's entries in
/// after the subcommand. Keys that belong to other subcommands are ignored;
/// keys no subcommand knows are an error.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or("--config needs a file path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(config) = config else { return Ok(rest) };
    let file = ConfigFile::load(Path::new(&config))?;

    const COMMANDS: [&str; 5] = ["generate", "prune", "optimize", "eval", "montecarlo"];
    let Some(at) = rest.iter().position(|a| COMMANDS.contains(&a.as_str())) else {
        return Ok(rest);
    };
    let mut path = vec![rest[at].clone()];
    if rest[at] == "generate" {
        match rest.get(at + 1) {
            Some(kind) if !kind.starts_with('-') => path.push(kind.clone()),
            _ => return Ok(rest),
        }
    }
    let path_refs: Vec<&str> = path.iter().map(String::as_str).collect();
    let Some(known) = flags_of(&path_refs) else { return Ok(rest) };
    let mut everything = Vec::new();
    all_flags(&Cli::command(), &mut everything);

    let mut injected = Vec::new();
    for (key, value) in file.entries {
        if !everything.contains(&key) {
            return Err(format!("{config}: unknown key `{key}`"));
        }
        if !known.contains(&key) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
        }
    }
    let split = at + path.len();
    let mut out: Vec<String> = rest[..split].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}
