//! Flat key-value text blocks: the on-disk format shared by configs,
//! descriptor headers, library files, checkpoints, and reports.
//!
//! A block is a version line followed by `key = value` lines. Keys use
//! dotted section prefixes (`train.gamma`). Writers emit keys sorted, so
//! identical content always produces identical bytes. Floats are written
//! with `{}` (shortest round-trip form) and therefore reparse bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered key-value block with a format tag checked on read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvBlock {
    map: BTreeMap<String, String>,
}

impl KvBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.map.insert(key.to_string(), format_f64(value));
    }

    pub fn set_f64_list(&mut self, key: &str, values: &[f64]) {
        let joined = values.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(",");
        self.map.insert(key.to_string(), joined);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        parse_with(self.require(key)?, key)
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        parse_with(self.require(key)?, key)
    }

    pub fn get_u32(&self, key: &str) -> Result<u32> {
        parse_with(self.require(key)?, key)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        parse_with(self.require(key)?, key)
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("key `{key}`: bad float `{tok}`: {e}"),
                })
            })
            .collect()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    /// Merge `other` into `self`, overwriting existing keys.
    pub fn apply_overrides(&mut self, other: &KvBlock) {
        for (k, v) in other.iter() {
            self.map.insert(k.clone(), v.clone());
        }
    }

    /// Render with a version header line, keys sorted.
    pub fn render(&self, version_tag: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{version_tag}");
        for (k, v) in &self.map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parse a block, checking the version line matches `expected_tag`.
    pub fn parse(text: &str, expected_tag: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty block".into() })?;
        if first.trim() != expected_tag {
            return Err(Error::VersionMismatch {
                expected: expected_tag.to_string(),
                got: first.trim().to_string(),
            });
        }
        let mut block = Self::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            block.map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(block)
    }

    pub fn save(&self, path: &Path, version_tag: &str) -> Result<()> {
        std::fs::write(path, self.render(version_tag))?;
        Ok(())
    }

    pub fn load(path: &Path, expected_tag: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, expected_tag)
    }
}

fn parse_with<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::Parse {
        line: 0,
        msg: format!("key `{key}`: cannot parse `{raw}`: {e}"),
    })
}

/// Shortest decimal form that reparses to the same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// FNV-1a over the rendered block: stable across platforms and runs, used
/// for run-directory naming.
pub fn content_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut kv = KvBlock::new();
        kv.set("b.two", 2usize);
        kv.set_f64("a.one", 0.1 + 0.2);
        kv.set_f64_list("c.list", &[1.0, -0.5, 3.25e-9]);
        let text = kv.render("test-kv v1");
        let back = KvBlock::parse(&text, "test-kv v1").unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.get_f64("a.one").unwrap(), 0.1 + 0.2);
        assert_eq!(back.get_f64_list("c.list").unwrap(), vec![1.0, -0.5, 3.25e-9]);
    }

    #[test]
    fn version_guard() {
        let err = KvBlock::parse("wrong v9\na = 1\n", "test-kv v1").unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { .. }));
    }

    #[test]
    fn render_is_sorted_and_deterministic() {
        let mut kv = KvBlock::new();
        kv.set("z", 1usize);
        kv.set("a", 2usize);
        let t1 = kv.render("t v1");
        let t2 = kv.render("t v1");
        assert_eq!(t1, t2);
        assert!(t1.find("a = 2").unwrap() < t1.find("z = 1").unwrap());
    }

    #[test]
    fn hash_stable() {
        assert_eq!(content_hash("abc"), content_hash("abc"));
        assert_ne!(content_hash("abc"), content_hash("abd"));
    }
}
