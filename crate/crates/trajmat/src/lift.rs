//! Step lifting: maps one raw transition to a fixed-dimensional vector with
//! a fixed channel order (midpoint, displacement, action-conditioned blocks,
//! reward, constant). Two layouts are supported: the full Kronecker lift and
//! a compact lift that stores the action vector directly.
//!
//! Channel offsets are frozen here; every descriptor, block accessor, and
//! gauge matrix in the crate derives its indexing from this module.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kv::KvBlock;
use crate::linalg::{abs_determinant, kron, kron_vec};

pub const LIFT_KV_TAG: &str = "trajmat-lift v1";

/// Absolute-determinant floor below which a gauge factor is rejected.
pub const DEFAULT_DET_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftMode {
    /// Full lift: [c; delta; xi (x) c; xi (x) delta; r; 1], m = 2d + 2qd + 2.
    FullKronecker,
    /// Compact lift: [x_bar; dx_bar; a_bar; r_bar; 1], m = 2 d_x + d_a + 2.
    Compact,
}

/// Named channel blocks of the lift. `ActMid`/`ActDisp` exist only in the
/// full Kronecker layout, `Action` only in the compact layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Mid,
    Disp,
    ActMid,
    ActDisp,
    Action,
    Reward,
    Const,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Mid => "mid",
            Channel::Disp => "disp",
            Channel::ActMid => "act_mid",
            Channel::ActDisp => "act_disp",
            Channel::Action => "action",
            Channel::Reward => "reward",
            Channel::Const => "const",
        }
    }
}

/// Fixed lift configuration. Descriptors carry a copy; any binary operation
/// on descriptors requires equal configs (including the adapter version).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftConfig {
    pub mode: LiftMode,
    /// Observation embedding dimension (full Kronecker mode).
    pub d: usize,
    /// Action embedding dimension (full Kronecker mode).
    pub q: usize,
    /// Geometric channel dimension (compact mode).
    pub d_x: usize,
    /// Action channel dimension (compact mode).
    pub d_a: usize,
    /// Version of the observation-adapter registry this lift was built with.
    /// Changing an adapter invalidates stored descriptors.
    pub adapter_version: u32,
}

impl LiftConfig {
    pub fn full_kronecker(d: usize, q: usize) -> Self {
        assert!(d > 0 && q > 0, "lift dimensions must be positive");
        Self { mode: LiftMode::FullKronecker, d, q, d_x: 0, d_a: 0, adapter_version: 1 }
    }

    pub fn compact(d_x: usize, d_a: usize) -> Self {
        assert!(d_x > 0 && d_a > 0, "lift dimensions must be positive");
        Self { mode: LiftMode::Compact, d: 0, q: 0, d_x, d_a, adapter_version: 1 }
    }

    /// Compact lift at the reference experimental dimensions (8, 10), m = 28.
    pub fn compact_default() -> Self {
        Self::compact(8, 10)
    }

    /// Total lift dimension m.
    pub fn dim(&self) -> usize {
        match self.mode {
            LiftMode::FullKronecker => 2 * self.d + 2 * self.q * self.d + 2,
            LiftMode::Compact => 2 * self.d_x + self.d_a + 2,
        }
    }

    /// Dimension of the embedded observation channel (d or d_x).
    pub fn obs_dim(&self) -> usize {
        match self.mode {
            LiftMode::FullKronecker => self.d,
            LiftMode::Compact => self.d_x,
        }
    }

    /// Dimension of the embedded action vector (q or d_a).
    pub fn action_dim(&self) -> usize {
        match self.mode {
            LiftMode::FullKronecker => self.q,
            LiftMode::Compact => self.d_a,
        }
    }

    /// Offset range of a channel block; `None` when the channel does not
    /// exist in this mode.
    pub fn channel_range(&self, ch: Channel) -> Option<Range<usize>> {
        let o = self.obs_dim();
        match self.mode {
            LiftMode::FullKronecker => {
                let qd = self.q * self.d;
                match ch {
                    Channel::Mid => Some(0..o),
                    Channel::Disp => Some(o..2 * o),
                    Channel::ActMid => Some(2 * o..2 * o + qd),
                    Channel::ActDisp => Some(2 * o + qd..2 * o + 2 * qd),
                    Channel::Action => None,
                    Channel::Reward => Some(2 * o + 2 * qd..2 * o + 2 * qd + 1),
                    Channel::Const => Some(2 * o + 2 * qd + 1..2 * o + 2 * qd + 2),
                }
            }
            LiftMode::Compact => match ch {
                Channel::Mid => Some(0..o),
                Channel::Disp => Some(o..2 * o),
                Channel::Action => Some(2 * o..2 * o + self.d_a),
                Channel::ActMid | Channel::ActDisp => None,
                Channel::Reward => Some(2 * o + self.d_a..2 * o + self.d_a + 1),
                Channel::Const => Some(2 * o + self.d_a + 1..2 * o + self.d_a + 2),
            },
        }
    }

    pub fn require_channel(&self, ch: Channel) -> Result<Range<usize>> {
        self.channel_range(ch).ok_or(Error::InvalidChannel(ch.name()))
    }

    /// Index of the constant channel (last slot).
    pub fn const_index(&self) -> usize {
        self.dim() - 1
    }

    pub fn reward_index(&self) -> usize {
        self.dim() - 2
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        match self.mode {
            LiftMode::FullKronecker => {
                kv.set("lift.mode", "full_kronecker");
                kv.set("lift.d", self.d);
                kv.set("lift.q", self.q);
            }
            LiftMode::Compact => {
                kv.set("lift.mode", "compact");
                kv.set("lift.d_x", self.d_x);
                kv.set("lift.d_a", self.d_a);
            }
        }
        kv.set("lift.adapter_version", self.adapter_version);
        kv.set("lift.m", self.dim());
        kv
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let mode = kv.require("lift.mode")?;
        let mut cfg = match mode {
            "full_kronecker" => {
                Self::full_kronecker(kv.get_usize("lift.d")?, kv.get_usize("lift.q")?)
            }
            "compact" => Self::compact(kv.get_usize("lift.d_x")?, kv.get_usize("lift.d_a")?),
            other => {
                return Err(Error::Parse { line: 0, msg: format!("unknown lift mode `{other}`") })
            }
        };
        cfg.adapter_version = kv.get_u32("lift.adapter_version")?;
        let m = kv.get_usize("lift.m")?;
        if m != cfg.dim() {
            return Err(Error::DimMismatch { context: "lift.m", expected: cfg.dim(), got: m });
        }
        Ok(cfg)
    }
}

/// Action attached to a transition: a discrete index or a raw vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionValue {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl ActionValue {
    pub fn discrete(&self) -> Option<usize> {
        match self {
            ActionValue::Discrete(a) => Some(*a),
            ActionValue::Continuous(_) => None,
        }
    }
}

/// One raw transition (pre-adapter observations).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: ActionValue,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

impl Transition {
    pub fn discrete(obs: Vec<f64>, action: usize, reward: f64, next_obs: Vec<f64>) -> Self {
        Self { obs, action: ActionValue::Discrete(action), reward, next_obs }
    }

    pub fn is_finite(&self) -> bool {
        let act_ok = match &self.action {
            ActionValue::Discrete(_) => true,
            ActionValue::Continuous(v) => v.iter().all(|x| x.is_finite()),
        };
        act_ok
            && self.reward.is_finite()
            && self.obs.iter().all(|x| x.is_finite())
            && self.next_obs.iter().all(|x| x.is_finite())
    }
}

/// The lifted step vector psi, tagged with its lift config.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedStep {
    pub psi: Vec<f64>,
    pub config: LiftConfig,
}

/// Embed a discrete or continuous action into a vector of length `dim`.
/// Discrete actions are one-hot (then implicitly zero-padded); continuous
/// actions are clipped to [-1, 1] and zero-padded.
pub fn embed_action(action: &ActionValue, dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    match action {
        ActionValue::Discrete(a) => {
            if *a >= dim {
                return Err(Error::UnknownAction { action: *a, count: dim });
            }
            out[*a] = 1.0;
        }
        ActionValue::Continuous(v) => {
            if v.len() > dim {
                return Err(Error::DimMismatch {
                    context: "embed_action",
                    expected: dim,
                    got: v.len(),
                });
            }
            for (slot, x) in out.iter_mut().zip(v.iter()) {
                *slot = x.clamp(-1.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Build the lifted step from already-embedded quantities.
///
/// `x` and `x_plus` are the embedded observations, `xi` the embedded action
/// vector, `reward` the (already normalized, in compact mode) reward.
pub fn lift_step(
    x: &[f64],
    x_plus: &[f64],
    xi: &[f64],
    reward: f64,
    cfg: &LiftConfig,
) -> Result<LiftedStep> {
    let o = cfg.obs_dim();
    if x.len() != o || x_plus.len() != o {
        return Err(Error::DimMismatch {
            context: "lift_step observation",
            expected: o,
            got: if x.len() != o { x.len() } else { x_plus.len() },
        });
    }
    if xi.len() != cfg.action_dim() {
        return Err(Error::DimMismatch {
            context: "lift_step action",
            expected: cfg.action_dim(),
            got: xi.len(),
        });
    }
    if !reward.is_finite()
        || x.iter().any(|v| !v.is_finite())
        || x_plus.iter().any(|v| !v.is_finite())
        || xi.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("lift_step input"));
    }

    let mut c = vec![0.0; o];
    let mut delta = vec![0.0; o];
    for i in 0..o {
        c[i] = 0.5 * (x[i] + x_plus[i]);
        delta[i] = x_plus[i] - x[i];
    }

    let m = cfg.dim();
    let mut psi = vec![0.0; m];
    psi[cfg.channel_range(Channel::Mid).unwrap()].copy_from_slice(&c);
    psi[cfg.channel_range(Channel::Disp).unwrap()].copy_from_slice(&delta);
    match cfg.mode {
        LiftMode::FullKronecker => {
            let am = cfg.channel_range(Channel::ActMid).unwrap();
            let ad = cfg.channel_range(Channel::ActDisp).unwrap();
            kron_vec(xi, &c, &mut psi[am]);
            kron_vec(xi, &delta, &mut psi[ad]);
        }
        LiftMode::Compact => {
            let act = cfg.channel_range(Channel::Action).unwrap();
            psi[act].copy_from_slice(xi);
        }
    }
    psi[cfg.reward_index()] = reward;
    psi[cfg.const_index()] = 1.0;
    Ok(LiftedStep { psi, config: cfg.clone() })
}

/// A joint invertible change of observation and action coordinates.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    pub s: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

impl GaugeTransform {
    /// Validates numerical invertibility: |det| of each factor must be at
    /// least `DEFAULT_DET_FLOOR`.
    pub fn new(s: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        Self::with_det_floor(s, u, DEFAULT_DET_FLOOR)
    }

    pub fn with_det_floor(s: DMatrix<f64>, u: DMatrix<f64>, floor: f64) -> Result<Self> {
        let ds = abs_determinant(&s);
        let du = abs_determinant(&u);
        if ds < floor || du < floor {
            return Err(Error::SingularGauge(ds.min(du)));
        }
        Ok(Self { s, u })
    }
}

/// Block-diagonal gauge action on the full Kronecker lift:
/// H = BlkDiag(S, S, U (x) S, U (x) S, 1, 1).
///
/// Only defined for the full lift; the compact lift has no stated gauge law.
pub fn gauge_matrix(g: &GaugeTransform, cfg: &LiftConfig) -> Result<DMatrix<f64>> {
    if cfg.mode != LiftMode::FullKronecker {
        return Err(Error::CompactModeUnsupported);
    }
    if g.s.nrows() != cfg.d || g.s.ncols() != cfg.d {
        return Err(Error::DimMismatch { context: "gauge S", expected: cfg.d, got: g.s.nrows() });
    }
    if g.u.nrows() != cfg.q || g.u.ncols() != cfg.q {
        return Err(Error::DimMismatch { context: "gauge U", expected: cfg.q, got: g.u.nrows() });
    }
    let m = cfg.dim();
    let us = kron(&g.u, &g.s);
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut place = |range: Range<usize>, block: &DMatrix<f64>| {
        for i in 0..block.nrows() {
            for j in 0..block.ncols() {
                h[(range.start + i, range.start + j)] = block[(i, j)];
            }
        }
    };
    place(cfg.channel_range(Channel::Mid).unwrap(), &g.s);
    place(cfg.channel_range(Channel::Disp).unwrap(), &g.s);
    place(cfg.channel_range(Channel::ActMid).unwrap(), &us);
    place(cfg.channel_range(Channel::ActDisp).unwrap(), &us);
    h[(cfg.reward_index(), cfg.reward_index())] = 1.0;
    h[(cfg.const_index(), cfg.const_index())] = 1.0;
    Ok(h)
}

/// Observation adapters: fixed, versioned maps from raw per-environment
/// observations into the shared embedded space. Learned adapters and image
/// observations are out of scope.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsAdapter {
    /// Copy the raw vector, zero-padded to the embedded dimension.
    Identity,
    /// Raw `[row, col, flag...]` on a grid: coordinates normalized by the
    /// grid extent so that all grids share the unit square, trailing flags
    /// copied, zero-padded.
    GridCell { rows: usize, cols: usize },
    /// Raw `[x, y, theta]`: heading unrolled to `[x, y, cos t, sin t]`,
    /// zero-padded.
    PlanarPose,
    /// Identity with the embedded coordinates reversed. Deliberately breaks
    /// channel alignment; used as a negative control.
    Reversed,
}

impl ObsAdapter {
    pub fn apply(&self, raw: &[f64], out_dim: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; out_dim];
        match self {
            ObsAdapter::Identity => {
                if raw.len() > out_dim {
                    return Err(Error::DimMismatch {
                        context: "identity adapter",
                        expected: out_dim,
                        got: raw.len(),
                    });
                }
                out[..raw.len()].copy_from_slice(raw);
            }
            ObsAdapter::GridCell { rows, cols } => {
                if raw.len() < 2 || raw.len() > out_dim {
                    return Err(Error::DimMismatch {
                        context: "grid adapter",
                        expected: out_dim,
                        got: raw.len(),
                    });
                }
                out[0] = if *rows > 1 { raw[0] / (*rows as f64 - 1.0) } else { 0.0 };
                out[1] = if *cols > 1 { raw[1] / (*cols as f64 - 1.0) } else { 0.0 };
                out[2..raw.len()].copy_from_slice(&raw[2..]);
            }
            ObsAdapter::PlanarPose => {
                if raw.len() != 3 || out_dim < 4 {
                    return Err(Error::DimMismatch {
                        context: "planar pose adapter",
                        expected: 3,
                        got: raw.len(),
                    });
                }
                out[0] = raw[0];
                out[1] = raw[1];
                out[2] = raw[2].cos();
                out[3] = raw[2].sin();
            }
            ObsAdapter::Reversed => {
                if raw.len() > out_dim {
                    return Err(Error::DimMismatch {
                        context: "reversed adapter",
                        expected: out_dim,
                        got: raw.len(),
                    });
                }
                for (i, v) in raw.iter().enumerate() {
                    out[out_dim - 1 - i] = *v;
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adapter output"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AdapterEntry {
    adapter: ObsAdapter,
    reward_scale: f64,
}

/// Per-environment adapter registry. Part of the lift: two descriptors are
/// comparable only if they were built with the same registry version.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdapterRegistry {
    map: BTreeMap<String, AdapterEntry>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, env_tag: &str, adapter: ObsAdapter, reward_scale: f64) {
        assert!(reward_scale > 0.0, "reward scale must be positive");
        self.map.insert(env_tag.to_string(), AdapterEntry { adapter, reward_scale });
    }

    fn entry(&self, env_tag: &str) -> Result<&AdapterEntry> {
        self.map.get(env_tag).ok_or_else(|| Error::UnknownEnv(env_tag.to_string()))
    }
}

/// A fixed lift: configuration plus the adapter registry it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    config: LiftConfig,
    registry: AdapterRegistry,
}

impl Lift {
    pub fn new(config: LiftConfig, registry: AdapterRegistry) -> Self {
        Self { config, registry }
    }

    pub fn config(&self) -> &LiftConfig {
        &self.config
    }

    /// Deterministic embedding of a raw observation for a registered
    /// environment.
    pub fn embed_observation(&self, env_tag: &str, raw: &[f64]) -> Result<Vec<f64>> {
        let entry = self.registry.entry(env_tag)?;
        entry.adapter.apply(raw, self.config.obs_dim())
    }

    pub fn embed_action(&self, action: &ActionValue) -> Result<Vec<f64>> {
        embed_action(action, self.config.action_dim())
    }

    /// Reward normalization constant for an environment (applied in compact
    /// mode only; the full lift carries the raw reward).
    pub fn reward_scale(&self, env_tag: &str) -> Result<f64> {
        Ok(match self.config.mode {
            LiftMode::Compact => self.registry.entry(env_tag)?.reward_scale,
            LiftMode::FullKronecker => 1.0,
        })
    }

    /// Embed both endpoints and the action, then lift.
    pub fn lift_transition(&self, env_tag: &str, t: &Transition) -> Result<LiftedStep> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition"));
        }
        let x = self.embed_observation(env_tag, &t.obs)?;
        let x_plus = self.embed_observation(env_tag, &t.next_obs)?;
        let xi = self.embed_action(&t.action)?;
        let r = t.reward / self.reward_scale(env_tag)?;
        lift_step(&x, &x_plus, &xi, r, &self.config)
    }
}
