//! Segment library: reusable trajectory segments stored with their matrix
//! increments and metadata, serving action-conditioned candidate futures.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::descriptor::{descriptor_of_segment, MatrixDescriptor};
use crate::error::{Error, Result};
use crate::kv::{format_f64, KvBlock};
use crate::lift::{Lift, LiftConfig};
use crate::linalg::SymMat;
use crate::segment::TrajectorySegment;

pub const LIBRARY_FILE_TAG: &str = "trajmat-library v1";

pub const DEFAULT_CAPACITY: usize = 5000;
pub const DEFAULT_CONTEXT_RADIUS: f64 = 0.15;

/// One stored segment: its matrix increment, head action, embedded entry
/// and exit observations, environment tag, and length.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEntry {
    pub id: u64,
    pub increment: MatrixDescriptor,
    pub head_action: usize,
    pub entry_context: Vec<f64>,
    pub exit_obs: Vec<f64>,
    pub env_tag: String,
    pub length: usize,
}

/// A candidate future served by the library: the stored exit observation
/// and the composed matrix `Z + M(sigma)`.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub entry_id: u64,
    pub exit_obs: Vec<f64>,
    pub matrix: MatrixDescriptor,
    /// Entry-context distance to the query observation.
    pub context_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SegmentLibrary {
    config: LiftConfig,
    entries: VecDeque<SegmentEntry>,
    capacity: usize,
    context_radius: f64,
    next_id: u64,
}

impl SegmentLibrary {
    pub fn new(config: &LiftConfig) -> Self {
        Self::with_limits(config, DEFAULT_CAPACITY, DEFAULT_CONTEXT_RADIUS)
    }

    pub fn with_limits(config: &LiftConfig, capacity: usize, context_radius: f64) -> Self {
        assert!(capacity > 0, "library capacity must be positive");
        Self {
            config: config.clone(),
            entries: VecDeque::new(),
            capacity,
            context_radius,
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn context_radius(&self) -> f64 {
        self.context_radius
    }

    pub fn config(&self) -> &LiftConfig {
        &self.config
    }

    pub fn entries(&self) -> impl Iterator<Item = &SegmentEntry> {
        self.entries.iter()
    }

    /// Insert a segment: computes its increment and metadata. Oldest entries
    /// are evicted once the library is at capacity (FIFO).
    pub fn insert(&mut self, seg: &TrajectorySegment, lift: &Lift) -> Result<&SegmentEntry> {
        if seg.is_empty() {
            return Err(Error::EmptyInput("library insert"));
        }
        if lift.config() != &self.config {
            return Err(Error::ConfigMismatch("library insert under a different lift".into()));
        }
        let increment = descriptor_of_segment(seg, lift)?;
        let first = &seg.transitions[0];
        let last = &seg.transitions[seg.len() - 1];
        let head_action = first
            .action
            .discrete()
            .ok_or_else(|| Error::InvalidEnvParam("library requires discrete head actions".into()))?;
        let entry = SegmentEntry {
            id: self.next_id,
            increment,
            head_action,
            entry_context: lift.embed_observation(&seg.env_tag, &first.obs)?,
            exit_obs: lift.embed_observation(&seg.env_tag, &last.next_obs)?,
            env_tag: seg.env_tag.clone(),
            length: seg.len(),
        };
        self.next_id += 1;
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(self.entries.back().unwrap())
    }

    /// Action-conditioned candidate futures for the lifted state `(o, Z)`:
    /// entries whose head action matches and whose entry context lies within
    /// the context radius of `o`, each composed onto `Z`.
    pub fn candidates(
        &self,
        obs_emb: &[f64],
        z: &MatrixDescriptor,
        action: usize,
    ) -> Result<Vec<Candidate>> {
        let mut out = Vec::new();
        for e in &self.entries {
            if e.head_action != action {
                continue;
            }
            let gap = l2_distance(&e.entry_context, obs_emb);
            if gap > self.context_radius {
                continue;
            }
            out.push(Candidate {
                entry_id: e.id,
                exit_obs: e.exit_obs.clone(),
                matrix: z.compose(&e.increment)?,
                context_gap: gap,
            });
        }
        Ok(out)
    }

    /// Library file: versioned header followed by one record line per entry.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut kv = self.config.to_kv();
        kv.set("library.capacity", self.capacity);
        kv.set_f64("library.context_radius", self.context_radius);
        kv.set("library.len", self.entries.len());
        kv.set("library.next_id", self.next_id);
        f.write_all(kv.render(LIBRARY_FILE_TAG).as_bytes())?;
        writeln!(f)?;
        for e in &self.entries {
            writeln!(
                f,
                "id={} env={} head={} len={} entry={} exit={} tri={}",
                e.id,
                e.env_tag,
                e.head_action,
                e.length,
                join_f64(&e.entry_context),
                join_f64(&e.exit_obs),
                join_f64(e.increment.sym().triangle()),
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut header = String::new();
        loop {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse { line: 0, msg: "truncated library file".into() });
            }
            if line.trim().is_empty() {
                break;
            }
            header.push_str(&line);
        }
        let kv = KvBlock::parse(&header, LIBRARY_FILE_TAG)?;
        let config = LiftConfig::from_kv(&kv)?;
        let mut lib = Self::with_limits(
            &config,
            kv.get_usize("library.capacity")?,
            kv.get_f64("library.context_radius")?,
        );
        lib.next_id = kv.get_u64("library.next_id")?;
        let expected = kv.get_usize("library.len")?;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            lib.entries.push_back(parse_entry(&line, &config, i + 1)?);
        }
        if lib.entries.len() != expected {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {expected} entries, found {}", lib.entries.len()),
            });
        }
        Ok(lib)
    }
}

fn parse_entry(line: &str, config: &LiftConfig, lineno: usize) -> Result<SegmentEntry> {
    let mut id = None;
    let mut env = None;
    let mut head = None;
    let mut len = None;
    let mut entry_ctx = None;
    let mut exit = None;
    let mut tri = None;
    for field in line.split_whitespace() {
        let (key, val) = field.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("bad field `{field}`"),
        })?;
        match key {
            "id" => id = Some(parse_num::<u64>(val, lineno)?),
            "env" => env = Some(val.to_string()),
            "head" => head = Some(parse_num::<usize>(val, lineno)?),
            "len" => len = Some(parse_num::<usize>(val, lineno)?),
            "entry" => entry_ctx = Some(split_f64(val, lineno)?),
            "exit" => exit = Some(split_f64(val, lineno)?),
            "tri" => tri = Some(split_f64(val, lineno)?),
            other => {
                return Err(Error::Parse { line: lineno, msg: format!("unknown field `{other}`") })
            }
        }
    }
    let missing = |what: &str| Error::Parse { line: lineno, msg: format!("missing field `{what}`") };
    let tri = tri.ok_or_else(|| missing("tri"))?;
    let increment = MatrixDescriptor::from_sym(SymMat::from_triangle(config.dim(), tri)?, config)?;
    Ok(SegmentEntry {
        id: id.ok_or_else(|| missing("id"))?,
        increment,
        head_action: head.ok_or_else(|| missing("head"))?,
        entry_context: entry_ctx.ok_or_else(|| missing("entry"))?,
        exit_obs: exit.ok_or_else(|| missing("exit"))?,
        env_tag: env.ok_or_else(|| missing("env"))?,
        length: len.ok_or_else(|| missing("len"))?,
    })
}

fn parse_num<T: std::str::FromStr>(val: &str, lineno: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    val.parse::<T>().map_err(|e| Error::Parse { line: lineno, msg: format!("`{val}`: {e}") })
}

fn split_f64(val: &str, lineno: usize) -> Result<Vec<f64>> {
    val.split(',').map(|t| parse_num::<f64>(t, lineno)).collect()
}

fn join_f64(vals: &[f64]) -> String {
    vals.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
