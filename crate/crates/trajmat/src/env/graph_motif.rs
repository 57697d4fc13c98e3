//! Directed graph MDPs over small structural motifs (paths, cycles,
//! branches, reversal pairs, lollipops). Nodes carry fixed 2-D embeddings;
//! the observation IS the embedding (identity adapter). Actions follow the
//! out-edge with the matching label, or self-loop with zero reward when no
//! such edge exists.

use std::collections::HashMap;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lift::{AdapterRegistry, ObsAdapter};

use super::{obs_key, Dynamics};

/// Size of the edge-label alphabet (shared across all motifs).
pub const MOTIF_ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotifClass {
    Path,
    Cycle,
    Branch,
    ReversalPair,
    Lollipop,
}

impl MotifClass {
    pub const ALL: [MotifClass; 5] = [
        MotifClass::Path,
        MotifClass::Cycle,
        MotifClass::Branch,
        MotifClass::ReversalPair,
        MotifClass::Lollipop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotifClass::Path => "path",
            MotifClass::Cycle => "cycle",
            MotifClass::Branch => "branch",
            MotifClass::ReversalPair => "reversal_pair",
            MotifClass::Lollipop => "lollipop",
        }
    }
}

impl FromStr for MotifClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "path" => MotifClass::Path,
            "cycle" => MotifClass::Cycle,
            "branch" => MotifClass::Branch,
            "reversal_pair" => MotifClass::ReversalPair,
            "lollipop" => MotifClass::Lollipop,
            other => return Err(Error::InvalidEnvParam(format!("unknown motif class `{other}`"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct GraphMotif {
    tag: String,
    class: MotifClass,
    nodes: Vec<[f64; 2]>,
    /// edges[node][label] = (target, reward)
    edges: Vec<Vec<Option<(usize, f64)>>>,
    lookup: HashMap<Vec<u64>, usize>,
    start: usize,
}

impl GraphMotif {
    fn new(class: MotifClass, nodes: Vec<[f64; 2]>, edge_list: Vec<(usize, usize, usize, f64)>) -> Result<Self> {
        let mut edges = vec![vec![None; MOTIF_ACTIONS]; nodes.len()];
        for (u, v, label, reward) in edge_list {
            if u >= nodes.len() || v >= nodes.len() || label >= MOTIF_ACTIONS {
                return Err(Error::InvalidEnvParam("edge out of range".into()));
            }
            if edges[u][label].is_some() {
                return Err(Error::InvalidEnvParam(format!(
                    "node {u} already has an out-edge labeled {label}"
                )));
            }
            edges[u][label] = Some((v, reward));
        }
        let mut lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if lookup.insert(obs_key(n), i).is_some() {
                return Err(Error::InvalidEnvParam("duplicate node embedding".into()));
            }
        }
        Ok(Self { tag: "graph_motif".to_string(), class, nodes, edges, lookup, start: 0 })
    }

    pub fn class(&self) -> MotifClass {
        self.class
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn embedding(&self, node: usize) -> [f64; 2] {
        self.nodes[node]
    }

    /// Directed edge list as (tail embedding, head embedding, label, reward).
    pub fn edge_list(&self) -> Vec<([f64; 2], [f64; 2], usize, f64)> {
        let mut out = Vec::new();
        for (u, labels) in self.edges.iter().enumerate() {
            for (label, edge) in labels.iter().enumerate() {
                if let Some((v, r)) = edge {
                    out.push((self.nodes[u], self.nodes[*v], label, *r));
                }
            }
        }
        out
    }

    fn node_of(&self, obs: &[f64]) -> usize {
        *self.lookup.get(&obs_key(obs)).expect("observation is not a node embedding")
    }
}

impl Dynamics for GraphMotif {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn action_count(&self) -> usize {
        MOTIF_ACTIONS
    }

    fn fixed_start(&self) -> Vec<f64> {
        self.nodes[self.start].to_vec()
    }

    fn sample_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.nodes[rng.random_range(0..self.nodes.len())].to_vec()
    }

    fn transition(&self, obs: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
        let u = self.node_of(obs);
        match self.edges[u][action] {
            Some((v, reward)) => (self.nodes[v].to_vec(), reward, false),
            None => (obs.to_vec(), 0.0, false),
        }
    }

    fn register_adapter(&self, reg: &mut AdapterRegistry) {
        reg.register(&self.tag, ObsAdapter::Identity, 1.0);
    }

    fn enumerate_observations(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.nodes.iter().map(|n| n.to_vec()).collect())
    }
}

fn reward(rng: &mut ChaCha8Rng) -> f64 {
    // Seeded edge-reward distribution; documented here as uniform on
    // [-0.2, 0.8].
    rng.random_range(-0.2..0.8)
}

fn jitter(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    rng.random_range(-scale..scale)
}

/// Generate a motif environment of the given class and node count, fully
/// determined by `seed`. Each instance is placed in its own seeded region
/// of the embedding plane, so descriptors from different instances are
/// separated at first order.
pub fn motif_env(class: MotifClass, n: usize, seed: u64) -> Result<GraphMotif> {
    use rand::SeedableRng;
    if n < 3 {
        return Err(Error::InvalidEnvParam("motif needs at least 3 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_7469_6600 ^ (class.name().len() as u64));
    let center = [jitter(&mut rng, 1.2), jitter(&mut rng, 1.2)];
    let (mut nodes, edges) = match class {
        MotifClass::Path => {
            let nodes = scatter_path(&mut rng, n);
            let edges = (0..n - 1)
                .map(|i| (i, i + 1, i % MOTIF_ACTIONS, reward(&mut rng)))
                .collect();
            (nodes, edges)
        }
        MotifClass::Cycle => {
            let nodes = polygon(&mut rng, n);
            let edges = (0..n)
                .map(|i| (i, (i + 1) % n, i % MOTIF_ACTIONS, reward(&mut rng)))
                .collect();
            (nodes, edges)
        }
        MotifClass::Branch => {
            // Root with three path arms.
            let root = [jitter(&mut rng, 0.2), jitter(&mut rng, 0.2)];
            let mut nodes = vec![root];
            let mut edges = Vec::new();
            let arms = 3usize.min(n - 1);
            let per_arm = (n - 1) / arms;
            let mut extra = (n - 1) % arms;
            for arm in 0..arms {
                let mut len = per_arm;
                if extra > 0 {
                    len += 1;
                    extra -= 1;
                }
                let angle = 2.0 * std::f64::consts::PI * (arm as f64) / (arms as f64)
                    + jitter(&mut rng, 0.2);
                let mut prev = 0usize;
                for k in 0..len {
                    let radius = 0.5 * (k as f64 + 1.0);
                    nodes.push([
                        root[0] + radius * angle.cos() + jitter(&mut rng, 0.03),
                        root[1] + radius * angle.sin() + jitter(&mut rng, 0.03),
                    ]);
                    let idx = nodes.len() - 1;
                    // First hop uses the arm index as its label so the root
                    // keeps distinct out-labels.
                    let label = if k == 0 { arm } else { (arm + k) % MOTIF_ACTIONS };
                    edges.push((prev, idx, label, reward(&mut rng)));
                    prev = idx;
                }
            }
            (nodes, edges)
        }
        MotifClass::ReversalPair => {
            // A path carrying both orientations of every edge, with matched
            // labels and rewards across the pair.
            let nodes = scatter_path(&mut rng, n);
            let mut edges = Vec::new();
            for i in 0..n - 1 {
                let fwd_label = (2 * i) % MOTIF_ACTIONS;
                let rev_label = (2 * i + 1) % MOTIF_ACTIONS;
                let r = reward(&mut rng);
                edges.push((i, i + 1, fwd_label, r));
                edges.push((i + 1, i, rev_label, r));
            }
            (nodes, edges)
        }
        MotifClass::Lollipop => {
            let head = n.div_ceil(2).max(3);
            let tail = n - head;
            let mut nodes = polygon(&mut rng, head);
            let mut edges: Vec<(usize, usize, usize, f64)> = (0..head)
                .map(|i| (i, (i + 1) % head, i % MOTIF_ACTIONS, reward(&mut rng)))
                .collect();
            let dir = rng.random_range(0.0..(2.0 * std::f64::consts::PI));
            let mut prev = 0usize;
            for k in 0..tail {
                let radius = 1.0 + 0.5 * (k as f64 + 1.0);
                nodes.push([
                    radius * dir.cos() + jitter(&mut rng, 0.03),
                    radius * dir.sin() + jitter(&mut rng, 0.03),
                ]);
                let idx = nodes.len() - 1;
                // The cycle already uses label 0 at node 0; leave from it on
                // a distinct label.
                let label = if k == 0 { MOTIF_ACTIONS - 1 } else { (k + 1) % MOTIF_ACTIONS };
                edges.push((prev, idx, label, reward(&mut rng)));
                prev = idx;
            }
            (nodes, edges)
        }
    };
    for node in &mut nodes {
        node[0] += center[0];
        node[1] += center[1];
    }
    GraphMotif::new(class, nodes, edges)
}

fn scatter_path(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    let mut x = [jitter(rng, 0.4), jitter(rng, 0.4)];
    let heading = rng.random_range(0.0..(2.0 * std::f64::consts::PI));
    let mut nodes = vec![x];
    let mut theta = heading;
    for _ in 1..n {
        theta += jitter(rng, 0.5);
        x = [x[0] + 0.5 * theta.cos(), x[1] + 0.5 * theta.sin()];
        nodes.push(x);
    }
    nodes
}

fn polygon(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    let cx = jitter(rng, 0.3);
    let cy = jitter(rng, 0.3);
    let phase = rng.random_range(0.0..(2.0 * std::f64::consts::PI));
    let radius = 0.8 + jitter(rng, 0.15);
    (0..n)
        .map(|i| {
            let t = phase + 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            [cx + radius * t.cos(), cy + radius * t.sin()]
        })
        .collect()
}
