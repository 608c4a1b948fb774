//! `manifest.json` in the output directory: for each command run there,
//! the effective configuration, its inputs and the files it wrote.
//! Keys are sorted and nothing time-dependent is recorded, so identical
//! runs leave identical manifests.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};

use crate::config::PipelineConfig;

pub const FILE_NAME: &str = "manifest.json";

pub struct Entry<'a> {
    pub command: &'a str,
    pub config: &'a PipelineConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

fn names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// Adds or replaces this command's entry, keeping the others.
pub fn record(out_dir: &Path, entry: Entry<'_>) -> anyhow::Result<()> {
    let path = out_dir.join(FILE_NAME);
    let mut commands = match std::fs::read_to_string(&path) {
        Ok(text) => match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(mut root)) => match root.remove("commands") {
                Some(Value::Object(c)) => c,
                _ => Map::new(),
            },
            _ => Map::new(),
        },
        Err(_) => Map::new(),
    };
    commands.insert(
        entry.command.to_string(),
        json!({
            "config": entry.config,
            "inputs": names(&entry.inputs),
            "outputs": names(&entry.outputs),
        }),
    );
    let root = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "commands": commands,
    });
    let mut text = serde_json::to_string_pretty(&root)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
