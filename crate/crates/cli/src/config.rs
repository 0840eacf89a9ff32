//! Experiment configuration: one JSON document per run.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vpsd_core::discovery::{LossWeights, NormEstimate, ReplaySampler};
use vpsd_core::dynprog::Lattice;
use vpsd_core::envs::{AnnulusParams, DoubleWell, DoubleWellParams, Dynamics, Overdamped2D, PostConstraintRot2D, Rot2D, SimConfig, SymNav};
use vpsd_core::flows::Retraction;
use vpsd_core::generator::GeneratorRecord;
use vpsd_core::{GeneratorPair, LossConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Discover,
    FlowOrder,
    Mismatch,
    Semigroup,
    Vi,
    AugmentVi,
    SymnavRollout,
    Invariants,
    Pipeline,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Discover => "discover",
            Kind::FlowOrder => "flow-order",
            Kind::Mismatch => "mismatch",
            Kind::Semigroup => "semigroup",
            Kind::Vi => "vi",
            Kind::AugmentVi => "augment-vi",
            Kind::SymnavRollout => "symnav-rollout",
            Kind::Invariants => "invariants",
            Kind::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    #[serde(default)]
    pub semigroup: SemigroupSection,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub invariants: InvariantSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Rot2d {
        #[serde(default)]
        sim: SimConfig,
    },
    Doublewell {
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        sim: SimConfig,
    },
    Postconstraint {
        #[serde(default)]
        annulus: AnnulusParams,
        #[serde(default)]
        sim: SimConfig,
    },
    Symnav {
        variant: i64,
        #[serde(default = "SimConfig::symnav_default")]
        sim: SimConfig,
    },
    OverdampedRadial {
        #[serde(default = "overdamped_sim")]
        sim: SimConfig,
    },
    OverdampedDoubleWell {
        #[serde(default)]
        delta: f64,
        #[serde(default = "overdamped_sim")]
        sim: SimConfig,
    },
}

fn overdamped_sim() -> SimConfig {
    SimConfig {
        dt: 0.1,
        sigma: 0.3,
        ..SimConfig::default()
    }
}

impl EnvSpec {
    pub fn sim(&self) -> &SimConfig {
        match self {
            EnvSpec::Rot2d { sim }
            | EnvSpec::Doublewell { sim, .. }
            | EnvSpec::Postconstraint { sim, .. }
            | EnvSpec::Symnav { sim, .. }
            | EnvSpec::OverdampedRadial { sim }
            | EnvSpec::OverdampedDoubleWell { sim, .. } => sim,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, EnvSpec::OverdampedRadial { .. } | EnvSpec::OverdampedDoubleWell { .. })
    }

    pub fn dynamics(&self) -> anyhow::Result<Box<dyn Dynamics>> {
        Ok(match self {
            EnvSpec::Rot2d { sim } => Box::new(Rot2D::new(*sim)),
            EnvSpec::Doublewell { delta, sim } => Box::new(DoubleWell::new(*sim, DoubleWellParams { delta: *delta })),
            EnvSpec::Postconstraint { annulus, sim } => Box::new(PostConstraintRot2D::new(*sim, *annulus)),
            EnvSpec::Symnav { variant, sim } => Box::new(SymNav::from_variant(*sim, *variant)?),
            EnvSpec::OverdampedRadial { sim } => Box::new(Overdamped2D::radial(*sim)),
            EnvSpec::OverdampedDoubleWell { delta, sim } => Box::new(Overdamped2D::double_well(*sim, *delta)),
        })
    }

    /// Known exact continuous symmetry, used for alignment reports.
    pub fn reference_generator(&self) -> Option<GeneratorPair> {
        match self {
            EnvSpec::Rot2d { .. } | EnvSpec::Postconstraint { .. } => GeneratorPair::rotation(4, 2).ok(),
            EnvSpec::OverdampedRadial { .. } => GeneratorPair::rotation(2, 2).ok(),
            _ => None,
        }
    }

    pub fn state_retraction(&self) -> Option<Retraction> {
        match self {
            EnvSpec::Postconstraint { annulus, .. } => Some(Retraction::Annulus(*annulus)),
            _ => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            EnvSpec::Doublewell { delta, .. } | EnvSpec::OverdampedDoubleWell { delta, .. } => Some(*delta),
            _ => None,
        }
    }

    pub fn with_delta(&self, d: f64) -> Self {
        let mut out = self.clone();
        if let EnvSpec::Doublewell { delta, .. } | EnvSpec::OverdampedDoubleWell { delta, .. } = &mut out {
            *delta = d;
        }
        out
    }

    /// The planar grid model matching a four-dimensional environment.
    pub fn default_grid_env(&self) -> Self {
        match self {
            EnvSpec::Doublewell { delta, .. } => EnvSpec::OverdampedDoubleWell {
                delta: *delta,
                sim: overdamped_sim(),
            },
            g if g.is_grid() => g.clone(),
            _ => EnvSpec::OverdampedRadial { sim: overdamped_sim() },
        }
    }

    fn validate(&self, path: &str) -> Result<(), String> {
        self.sim().validate().map_err(|e| format!("{path}.sim: {e}"))?;
        match self {
            EnvSpec::Postconstraint { annulus, .. } => annulus.validate().map_err(|e| format!("{path}.annulus: {e}")),
            EnvSpec::Symnav { variant, .. } if !(1..=15).contains(variant) => {
                Err(format!("{path}.variant: must be in 1..=15, got {variant}"))
            }
            EnvSpec::Doublewell { delta, .. } | EnvSpec::OverdampedDoubleWell { delta, .. } => finite(&format!("{path}.delta"), *delta),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub weights: LossWeights,
    pub batch_size: usize,
    pub step_size: f64,
    pub steps: usize,
    /// Replay box `[-w, w]^d` for states.
    pub state_half_width: f64,
    pub action_half_width: f64,
    pub norm_estimate: NormEstimate,
    /// Scale of the random initial generator.
    pub init_scale: f64,
    /// Independent SGD runs; the one with the lowest final residual loss is kept.
    pub restarts: usize,
    /// Probe count for the alignment report.
    pub alignment_probes: usize,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            batch_size: 256,
            step_size: 1e-2,
            steps: 5000,
            state_half_width: 2.0,
            action_half_width: 1.0,
            norm_estimate: NormEstimate::Exact,
            init_scale: 0.3,
            restarts: 1,
            alignment_probes: 2000,
        }
    }
}

impl LossSection {
    pub fn loss_config(&self, d: usize, m: usize) -> LossConfig {
        LossConfig {
            weights: self.weights,
            batch_size: self.batch_size,
            step_size: self.step_size,
            steps: self.steps,
            replay: ReplaySampler::symmetric_box(d, self.state_half_width, m, self.action_half_width),
            norm_estimate: self.norm_estimate,
        }
    }

    fn validate(&self) -> Result<(), String> {
        self.loss_config(1, 1).validate().map_err(|e| format!("loss: {e}"))?;
        positive("loss.state_half_width", self.state_half_width)?;
        positive("loss.action_half_width", self.action_half_width)?;
        positive("loss.init_scale", self.init_scale)?;
        at_least("loss.steps", self.steps, 1)?;
        at_least("loss.restarts", self.restarts, 1)?;
        at_least("loss.alignment_probes", self.alignment_probes, 1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub alpha: f64,
    pub h: f64,
    /// Step sizes for order estimation.
    pub h_list: Vec<f64>,
    pub s0: Option<Vec<f64>>,
    /// Generator to integrate; the canonical rotation when absent.
    pub generator: Option<GeneratorRecord>,
    /// `exact` compares against the matrix exponential of the affine field,
    /// `self` against an RK4 run at `min(h_list) / 16`.
    pub reference: OrderReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderReference {
    Exact,
    #[serde(rename = "self")]
    SelfReferenced,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            h: 1e-3,
            h_list: vec![0.1, 0.05, 0.025, 0.0125],
            s0: None,
            generator: None,
            reference: OrderReference::Exact,
        }
    }
}

impl FlowSection {
    pub fn generator(&self) -> anyhow::Result<GeneratorPair> {
        match &self.generator {
            Some(r) => Ok(GeneratorPair::try_from(r)?),
            None => Ok(GeneratorPair::rotation(4, 2)?),
        }
    }

    fn validate(&self) -> Result<(), String> {
        finite("flow.alpha", self.alpha)?;
        positive("flow.h", self.h)?;
        if self.h_list.len() < 4 {
            return Err(format!("flow.h_list: need at least 4 step sizes, got {}", self.h_list.len()));
        }
        for (i, h) in self.h_list.iter().enumerate() {
            positive(&format!("flow.h_list[{i}]"), *h)?;
        }
        let g = self.generator().map_err(|e| format!("flow.generator: {e}"))?;
        if let Some(s0) = &self.s0 {
            if s0.len() != g.dim_s() {
                return Err(format!("flow.s0: expected {} entries, got {}", g.dim_s(), s0.len()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Points per axis.
    pub n: usize,
    pub half_width: f64,
    /// Number of compass actions.
    pub actions: usize,
    pub dt: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Send transformed actions to the nearest compass action instead of
    /// requiring an exact match (augment-vi; the pipeline always snaps).
    pub snap_actions: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 21,
            half_width: 2.0,
            actions: 8,
            dt: 0.1,
            gamma: 0.95,
            max_iter: 100_000,
            tol: 1e-10,
            snap_actions: false,
        }
    }
}

impl GridSection {
    pub fn lattice(&self, n: usize) -> anyhow::Result<Lattice> {
        Ok(Lattice::cube(2, -self.half_width, self.half_width, n)?)
    }

    fn validate(&self) -> Result<(), String> {
        at_least("grid.n", self.n, 3)?;
        positive("grid.half_width", self.half_width)?;
        at_least("grid.actions", self.actions, 1)?;
        positive("grid.dt", self.dt)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("grid.gamma: must be in (0, 1), got {}", self.gamma));
        }
        at_least("grid.max_iter", self.max_iter, 1)?;
        positive("grid.tol", self.tol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub count: usize,
    pub state_half_width: f64,
    pub action_half_width: f64,
    /// Radius of the disk used for grid-value probes.
    pub disk_radius: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            count: 1000,
            state_half_width: 2.0,
            action_half_width: 1.0,
            disk_radius: 1.2,
        }
    }
}

impl ProbeSection {
    fn validate(&self) -> Result<(), String> {
        at_least("probes.count", self.count, 1)?;
        positive("probes.state_half_width", self.state_half_width)?;
        positive("probes.action_half_width", self.action_half_width)?;
        positive("probes.disk_radius", self.disk_radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Identity,
    /// Simultaneous rotation of every planar block and of the action.
    Rotation { angle: f64 },
    ReflectionX,
    /// Flow of an affine generator pair for time `alpha`.
    Flow {
        #[serde(default)]
        generator: Option<GeneratorRecord>,
        alpha: f64,
        #[serde(default = "default_h")]
        h: f64,
    },
}

fn default_h() -> f64 {
    1e-3
}

impl TransformSpec {
    fn validate(&self, path: &str) -> Result<(), String> {
        match self {
            TransformSpec::Rotation { angle } => finite(&format!("{path}.angle"), *angle),
            TransformSpec::Flow { generator, alpha, h } => {
                finite(&format!("{path}.alpha"), *alpha)?;
                positive(&format!("{path}.h"), *h)?;
                if let Some(g) = generator {
                    GeneratorPair::try_from(g).map_err(|e| format!("{path}.generator: {e}"))?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `coef · s_i` or `coef · s_i s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub i: usize,
    #[serde(default)]
    pub j: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupSection {
    pub s0: Vec<f64>,
    pub a0: Vec<f64>,
    pub t: f64,
    pub paths: usize,
    /// Test function as a sum of monomials of degree at most two.
    pub f: Vec<Term>,
}

impl Default for SemigroupSection {
    fn default() -> Self {
        Self {
            s0: vec![1.0, 0.5, 0.2, -0.1],
            a0: vec![0.3, -0.2],
            t: 1.0,
            paths: 10_000,
            f: vec![Term { coef: 1.0, i: 0, j: None }],
        }
    }
}

impl SemigroupSection {
    pub fn eval(&self, s: &[f64]) -> f64 {
        self.f.iter().map(|t| t.coef * s[t.i] * t.j.map_or(1.0, |j| s[j])).sum()
    }

    fn validate(&self, d: usize, m: usize) -> Result<(), String> {
        if self.s0.len() != d {
            return Err(format!("semigroup.s0: expected {d} entries, got {}", self.s0.len()));
        }
        if self.a0.len() != m {
            return Err(format!("semigroup.a0: expected {m} entries, got {}", self.a0.len()));
        }
        if let Some(x) = self.a0.iter().find(|x| x.abs() > 1.0) {
            return Err(format!("semigroup.a0: component {x} is outside [-1, 1]"));
        }
        positive("semigroup.t", self.t)?;
        at_least("semigroup.paths", self.paths, 2)?;
        if self.f.is_empty() {
            return Err("semigroup.f: need at least one term".into());
        }
        for (k, t) in self.f.iter().enumerate() {
            if t.i >= d || t.j.is_some_and(|j| j >= d) {
                return Err(format!("semigroup.f[{k}]: index out of range for state dimension {d}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    pub steps: Option<usize>,
    pub s0: Vec<f64>,
    pub policy: PolicySpec,
}

impl Default for RolloutSection {
    fn default() -> Self {
        Self {
            steps: None,
            s0: vec![0.0; 4],
            policy: PolicySpec::GoalSeek { gain: 1.0, damping: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Zero,
    /// `a = clamp(gain (goal − p) − damping v)`.
    GoalSeek { gain: f64, damping: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantSection {
    /// Rotation angles of the orbit.
    pub alphas: Vec<f64>,
    /// Fine lattice for the interpolation budget; `2n − 1` when absent.
    pub n_fine: Option<usize>,
    pub bins: usize,
    /// Non-invariance passes when it is at most this multiple of the budget.
    pub budget_factor: f64,
}

impl Default for InvariantSection {
    fn default() -> Self {
        Self {
            alphas: vec![PI / 8.0, PI / 4.0, PI / 3.0, PI / 2.0, 2.0],
            n_fine: None,
            bins: 12,
            budget_factor: 5.0,
        }
    }
}

impl InvariantSection {
    pub fn n_fine(&self, n: usize) -> usize {
        self.n_fine.unwrap_or(2 * n - 1)
    }

    fn validate(&self, n: usize) -> Result<(), String> {
        if self.alphas.is_empty() {
            return Err("invariants.alphas: need at least one angle".into());
        }
        for (i, a) in self.alphas.iter().enumerate() {
            finite(&format!("invariants.alphas[{i}]"), *a)?;
        }
        if self.n_fine(n) <= n {
            return Err(format!("invariants.n_fine: must exceed grid.n = {n}"));
        }
        at_least("invariants.bins", self.bins, 1)?;
        positive("invariants.budget_factor", self.budget_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSource {
    Discovered,
    Rotation,
    ReflectionX,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub source: TransformSource,
    /// Planar grid model; derived from `env` when absent.
    pub grid_env: Option<EnvSpec>,
    /// Tilt values to sweep; each entry reruns every stage after discovery.
    pub deltas: Option<Vec<f64>>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            source: TransformSource::Discovered,
            grid_env: None,
            deltas: None,
        }
    }
}

fn finite(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name}: must be finite, got {v}"))
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name}: must be positive and finite, got {v}"))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), String> {
    if v >= min {
        Ok(())
    } else {
        Err(format!("{name}: must be at least {min}, got {v}"))
    }
}

impl ExperimentConfig {
    pub fn env(&self) -> Result<&EnvSpec, String> {
        self.env.as_ref().ok_or_else(|| format!("env: required for kind `{}`", self.kind.name()))
    }

    pub fn grid_env(&self) -> Result<EnvSpec, String> {
        let env = match &self.pipeline.grid_env {
            Some(g) => g.clone(),
            None => self.env()?.default_grid_env(),
        };
        Ok(env)
    }

    fn transform(&self) -> Result<&TransformSpec, String> {
        self.transform.as_ref().ok_or_else(|| format!("transform: required for kind `{}`", self.kind.name()))
    }

    fn env_dims(&self) -> Result<(usize, usize), String> {
        let env = self.env()?;
        let model = env.dynamics().map_err(|e| format!("env: {e}"))?;
        Ok((model.dim_s(), model.dim_a()))
    }

    /// Checks every field the chosen kind reads before any computation.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(env) = &self.env {
            env.validate("env")?;
        }
        let need_grid_env = |env: &EnvSpec| {
            if env.is_grid() {
                Ok(())
            } else {
                Err(format!("env.id: kind `{}` needs overdamped_radial or overdamped_double_well", self.kind.name()))
            }
        };
        match self.kind {
            Kind::Discover => {
                self.env()?;
                self.loss.validate()?;
            }
            Kind::FlowOrder => self.flow.validate()?,
            Kind::Mismatch => {
                self.env()?;
                self.probes.validate()?;
                self.transform()?.validate("transform")?;
            }
            Kind::Semigroup => {
                let (d, m) = self.env_dims()?;
                self.semigroup.validate(d, m)?;
                self.transform()?.validate("transform")?;
            }
            Kind::Vi => {
                need_grid_env(self.env()?)?;
                self.grid.validate()?;
            }
            Kind::AugmentVi => {
                need_grid_env(self.env()?)?;
                self.grid.validate()?;
                self.transform()?.validate("transform")?;
            }
            Kind::SymnavRollout => {
                if !matches!(self.env()?, EnvSpec::Symnav { .. }) {
                    return Err("env.id: kind `symnav-rollout` needs symnav".into());
                }
                if self.rollout.s0.len() != 4 {
                    return Err(format!("rollout.s0: expected 4 entries, got {}", self.rollout.s0.len()));
                }
                if self.rollout.steps == Some(0) {
                    return Err("rollout.steps: must be at least 1".into());
                }
                if let PolicySpec::GoalSeek { gain, damping } = self.rollout.policy {
                    finite("rollout.policy.gain", gain)?;
                    finite("rollout.policy.damping", damping)?;
                }
            }
            Kind::Invariants => {
                need_grid_env(self.env()?)?;
                self.grid.validate()?;
                self.probes.validate()?;
                self.invariants.validate(self.grid.n)?;
            }
            Kind::Pipeline => self.validate_pipeline()?,
        }
        Ok(())
    }

    fn validate_pipeline(&self) -> Result<(), String> {
        let env = self.env()?;
        if env.is_grid() || matches!(env, EnvSpec::Symnav { .. }) {
            return Err("env.id: pipeline needs rot2d, doublewell or postconstraint".into());
        }
        if self.pipeline.source == TransformSource::Discovered {
            self.loss.validate()?;
        }
        finite("flow.alpha", self.flow.alpha)?;
        positive("flow.h", self.flow.h)?;
        self.probes.validate()?;
        self.grid.validate()?;
        self.invariants.validate(self.grid.n)?;
        let grid_env = self.grid_env()?;
        grid_env.validate("pipeline.grid_env")?;
        if !grid_env.is_grid() {
            return Err("pipeline.grid_env.id: needs overdamped_radial or overdamped_double_well".into());
        }
        if let Some(deltas) = &self.pipeline.deltas {
            if deltas.is_empty() {
                return Err("pipeline.deltas: need at least one value".into());
            }
            if env.delta().is_none() || grid_env.delta().is_none() {
                return Err("pipeline.deltas: needs a doublewell env and an overdamped_double_well grid".into());
            }
            for (i, d) in deltas.iter().enumerate() {
                finite(&format!("pipeline.deltas[{i}]"), *d)?;
            }
        }
        Ok(())
    }
}
