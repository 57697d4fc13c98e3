//! Trajectory segments: ordered finite blocks of transitions whose raw
//! observations chain (each transition's `next_obs` equals the following
//! transition's `obs` within tolerance).

use crate::error::{Error, Result};
use crate::lift::Transition;

/// Tolerance for the observation-chain check (max-abs gap between the exit
/// observation of one step and the entry observation of the next).
pub const CHAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub transitions: Vec<Transition>,
    pub env_tag: String,
}

impl TrajectorySegment {
    pub fn new(env_tag: &str, transitions: Vec<Transition>) -> Self {
        Self { transitions, env_tag: env_tag.to_string() }
    }

    pub fn empty(env_tag: &str) -> Self {
        Self::new(env_tag, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Verify the observation chain; returns the index of the first broken
    /// junction on failure.
    pub fn check_chain(&self) -> Result<()> {
        for (i, pair) in self.transitions.windows(2).enumerate() {
            let exit = &pair[0].next_obs;
            let entry = &pair[1].obs;
            if exit.len() != entry.len() {
                return Err(Error::BrokenChain { index: i, gap: f64::INFINITY });
            }
            let gap = exit
                .iter()
                .zip(entry.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > CHAIN_TOL {
                return Err(Error::BrokenChain { index: i, gap });
            }
        }
        Ok(())
    }

    /// Contiguous sub-segment over the given local transition indices,
    /// preserving order. An empty index set yields the empty segment.
    pub fn restrict(&self, indices: &[usize]) -> Result<TrajectorySegment> {
        if indices.is_empty() {
            return Ok(Self::empty(&self.env_tag));
        }
        for pair in indices.windows(2) {
            if pair[1] != pair[0] + 1 {
                return Err(Error::InvalidIndexSet(format!(
                    "indices not contiguous ascending: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        let last = *indices.last().unwrap();
        if last >= self.len() {
            return Err(Error::InvalidIndexSet(format!(
                "index {last} out of range for segment of length {}",
                self.len()
            )));
        }
        let first = indices[0];
        Ok(Self::new(&self.env_tag, self.transitions[first..=last].to_vec()))
    }

    /// Contiguous sub-segment over `[start, end)`.
    pub fn restrict_range(&self, start: usize, end: usize) -> Result<TrajectorySegment> {
        if start > end || end > self.len() {
            return Err(Error::InvalidIndexSet(format!(
                "range [{start}, {end}) invalid for segment of length {}",
                self.len()
            )));
        }
        Ok(Self::new(&self.env_tag, self.transitions[start..end].to_vec()))
    }

    /// Concatenate two segments, validating the junction.
    pub fn concat(&self, other: &TrajectorySegment) -> Result<TrajectorySegment> {
        let mut transitions = self.transitions.clone();
        transitions.extend(other.transitions.iter().cloned());
        let joined = Self::new(&self.env_tag, transitions);
        joined.check_chain()?;
        Ok(joined)
    }
}
