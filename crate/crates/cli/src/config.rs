//! `key=value` run-config files.
//!
//! Every key is a long flag name of the chosen subcommand. Entries are spliced
//! into the argument list right after the subcommand, so anything given on the
//! command line later wins.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str, path: &Path) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value, got `{raw}`", path.display(), n + 1);
        };
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if k == "config" {
            bail!("{}:{}: config files cannot include other config files", path.display(), n + 1);
        }
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    Ok(out)
}

/// Finds `--config FILE` (or `--config=FILE`) after the subcommand, removes
/// it and splices in the file's flags. The subcommand is the first argument
/// not starting with `-` after the program name, global options aside.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut cfg_path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut k = 0;
    while k < args.len() {
        if strs[k] == "--config" {
            let Some(p) = args.get(k + 1) else {
                bail!("--config needs a file");
            };
            cfg_path = Some(p.clone());
            k += 2;
            continue;
        }
        if let Some(p) = strs[k].strip_prefix("--config=") {
            cfg_path = Some(p.into());
            k += 1;
            continue;
        }
        rest.push(args[k].clone());
        k += 1;
    }
    let Some(cfg_path) = cfg_path else {
        return Ok(rest);
    };
    let path = Path::new(&cfg_path);
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let injected = parse(&text, path)?;
    // position right after the subcommand token
    let mut at = None;
    let mut k = 1;
    while k < rest.len() {
        let s = rest[k].to_string_lossy();
        if s == "--threads" || s == "--seed" {
            k += 2;
            continue;
        }
        if !s.starts_with('-') {
            at = Some(k + 1);
            break;
        }
        k += 1;
    }
    let Some(at) = at else {
        bail!("--config given without a subcommand");
    };
    rest.splice(at..at, injected);
    Ok(rest)
}
