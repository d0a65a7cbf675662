//! Run manifests: the resolved inputs of one invocation, written next to its
//! outputs so the run can be replayed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use irst_core::{io::atomic_write, kv};

pub const TOOL: &str = "irst";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Resolved settings, inputs, outputs and seeds in insertion order.
    pub entries: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    s.replace('%', "%25").replace('#', "%23").replace('\n', "%0A")
}

fn unescape(s: &str) -> String {
    s.replace("%0A", "\n").replace("%23", "#").replace("%25", "%")
}

impl RunManifest {
    pub fn new(subcommand: &str, args: &[String]) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            args: args.to_vec(),
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_path(&mut self, key: &str, path: &Path) -> &mut Self {
        self.set(key, path.display())
    }

    /// Adds every `key = value` line of an already resolved config text.
    pub fn set_config(&mut self, prefix: &str, text: &str) -> Result<&mut Self> {
        let blocks = kv::parse(text)?;
        for (i, b) in blocks.iter().enumerate() {
            let scope = if b.name.is_empty() {
                prefix.to_string()
            } else {
                format!("{prefix}.{}{i}", b.name)
            };
            for e in &b.entries {
                self.set(&format!("{scope}.{}", e.key), &e.value);
            }
        }
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "tool = {TOOL}").unwrap();
        writeln!(out, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "subcommand = {}", escape(&self.subcommand)).unwrap();
        writeln!(out, "argc = {}", self.args.len()).unwrap();
        for (i, a) in self.args.iter().enumerate() {
            writeln!(out, "arg.{i} = {}", escape(a)).unwrap();
        }
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {}", escape(v)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let blocks = kv::parse(text)?;
        if blocks.len() != 1 {
            bail!("manifest must not contain blocks");
        }
        let get = |key: &str| {
            blocks[0]
                .entries
                .iter()
                .find(|e| e.key == key)
                .map(|e| unescape(&e.value))
                .with_context(|| format!("manifest lacks `{key}`"))
        };
        if get("tool")? != TOOL {
            bail!("not an {TOOL} manifest");
        }
        let argc: usize = get("argc")?.parse().context("bad argc")?;
        let args = (0..argc)
            .map(|i| get(&format!("arg.{i}")))
            .collect::<Result<Vec<_>>>()?;
        let fixed = |k: &str| k == "tool" || k == "version" || k == "subcommand" || k == "argc" || k.starts_with("arg.");
        Ok(Self {
            subcommand: get("subcommand")?,
            args,
            entries: blocks[0]
                .entries
                .iter()
                .filter(|e| !fixed(&e.key))
                .map(|e| (e.key.clone(), unescape(&e.value)))
                .collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_text().as_bytes())
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// Manifest location for a file output: `<file>.manifest`.
pub fn beside_file(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest");
    path.with_file_name(name)
}

/// Manifest location for a directory output.
pub fn inside_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.txt")
}
