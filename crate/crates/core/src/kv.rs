//! Flat `key = value` configuration text.
//!
//! `#` starts a comment, blank lines are ignored, and a `[name]` line opens a
//! new block; blocks may repeat. Keys before the first block belong to the
//! root block, whose name is empty.

use std::collections::HashSet;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

pub fn parse(text: &str) -> Result<Vec<Block>> {
    let mut blocks = vec![Block {
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Config { line, msg: "empty block name".into() });
            }
            blocks.push(Block {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config { line, msg: "missing key".into() });
        }
        let block = blocks.last_mut().expect("root block");
        if block.entries.iter().any(|e| e.key == key) {
            return Err(Error::Config { line, msg: format!("duplicate key `{key}`") });
        }
        block.entries.push(Entry {
            key: key.to_string(),
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(blocks)
}

/// Typed access to one block that rejects keys nobody asked for.
pub struct Reader<'a> {
    block: &'a Block,
    used: HashSet<&'a str>,
}

impl<'a> Reader<'a> {
    pub fn new(block: &'a Block) -> Self {
        Self {
            block,
            used: HashSet::new(),
        }
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.block.entries.iter().find(|e| e.key == key)?;
        self.used.insert(e.key.as_str());
        Some(e)
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| Error::Config {
                line: e.line,
                msg: format!("cannot parse `{}` for `{key}`", e.value),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: self.block.line,
            msg: format!("missing `{key}` in block [{}]", self.block.name),
        })
    }

    /// Fails on the first key that was never read.
    pub fn finish(self) -> Result<()> {
        match self
            .block
            .entries
            .iter()
            .find(|e| !self.used.contains(e.key.as_str()))
        {
            Some(e) => Err(Error::Config {
                line: e.line,
                msg: format!("unknown key `{}`", e.key),
            }),
            None => Ok(()),
        }
    }
}
