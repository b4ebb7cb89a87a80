//! Receding-horizon signature MPC.
//!
//! At every replanning point the planner minimises
//!
//! ```text
//! J = |s - s*|^2 - w1 |s|^2 + w2 |u|^2,    s = past ⊗ S(rollout) ⊗ u
//! ```
//!
//! over the next `n_actions` constant action segments, where `u` is the
//! terminal signature standing in for the path beyond the planning horizon and
//! `s*` is the signature of the reference. Only the first segment is executed
//! before replanning.
//!
//! Two cost backends are supported. `Truncated` works on truncated tensors
//! directly. `Kernel` keeps realised node sequences and evaluates every norm
//! through the PDE signature kernel, so the chain is a concatenated path.
//! All observation coordinates are multiplied by `state_scale` before either
//! backend sees them.

use serde::{Deserialize, Serialize};

use crate::envs::{ActionSegment, EnvKind, EnvState, Environment};
use crate::error::{Error, Result};
use crate::optimize::{minimize, OptimizerSpec};
use crate::paths::{euclidean, PiecewisePath};
use crate::sigkernel::{self, SignatureKernelConfig};
use crate::tensor::TruncatedTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CostBackend {
    Truncated { depth: usize },
    Kernel(SignatureKernelConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalStrategy {
    /// Coarse-reference remainder from the point closest to the rollout end.
    ReferenceSubpath,
    Unit,
    /// Segment from the rollout end to the reference end.
    StraightLine,
    /// Segment that keeps the rollout end state and advances coordinate 0
    /// (time) to `until`.
    HoldState { until: f64 },
    /// Free two-node path from the rollout end, optimised per evaluation.
    NestedOpt {
        inner_iterations: usize,
        #[serde(default = "default_inner_step")]
        step_size: f64,
    },
}

fn default_inner_step() -> f64 {
    0.05
}

fn default_eval_points() -> usize {
    1
}

fn default_arrival_tolerance() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub n_actions: usize,
    pub backend: CostBackend,
    #[serde(default)]
    pub w1: f64,
    #[serde(default)]
    pub w2: f64,
    pub state_scale: f64,
    pub terminal: TerminalStrategy,
    pub optimizer: OptimizerSpec,
    /// Initial (or fixed) duration of every action segment.
    pub action_duration: f64,
    #[serde(default)]
    pub optimize_durations: bool,
    /// Upper clamp for optimised durations; the lower clamp is the env `dt`.
    #[serde(default)]
    pub max_duration: Option<f64>,
    /// Rollout nodes per action segment, evenly spaced in time.
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    /// Time executed before replanning; defaults to the first segment's duration.
    #[serde(default)]
    pub execute_interval: Option<f64>,
    /// Start the past path at the reference start with a connecting segment.
    #[serde(default)]
    pub anchor_to_reference: bool,
    /// Arrival radius as a fraction of the reference diameter.
    #[serde(default = "default_arrival_tolerance")]
    pub arrival_tolerance: f64,
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_actions == 0 {
            return Err(Error::InvalidInput("n_actions must be at least 1".into()));
        }
        if self.eval_points == 0 {
            return Err(Error::InvalidInput("eval_points must be at least 1".into()));
        }
        if !(self.w1.is_finite() && self.w2.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite".into()));
        }
        if !(self.state_scale > 0.0 && self.state_scale.is_finite()) {
            return Err(Error::InvalidInput("state_scale must be positive".into()));
        }
        if !(self.action_duration > 0.0 && self.action_duration.is_finite()) {
            return Err(Error::InvalidInput("action_duration must be positive".into()));
        }
        if let Some(e) = self.execute_interval {
            if !(e > 0.0) {
                return Err(Error::InvalidInput("execute_interval must be positive".into()));
            }
        }
        match self.backend {
            CostBackend::Truncated { depth: 0 } => {
                return Err(Error::InvalidInput("truncation depth must be at least 1".into()))
            }
            CostBackend::Kernel(k) => k.validate()?,
            _ => {}
        }
        self.optimizer.validate()
    }

    pub fn variables_per_action(&self, action_dim: usize) -> usize {
        action_dim + usize::from(self.optimize_durations)
    }
}

/// What to track and how the world behaves.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingProblem {
    /// Reference in observation coordinates.
    pub reference: PiecewisePath,
    /// Sparser reference used for terminal suffixes.
    pub coarse_reference: PiecewisePath,
    /// Plant used for execution.
    pub env: EnvKind,
    /// Model used for planning; may differ from `env` (e.g. no disturbance).
    pub model: EnvKind,
    pub initial: EnvState,
    pub max_time: f64,
}

impl TrackingProblem {
    pub fn validate(&self) -> Result<()> {
        let d = self.env.observation_dim();
        for (name, p) in [("reference", &self.reference), ("coarse reference", &self.coarse_reference)] {
            if p.dim() != d {
                return Err(Error::InvalidInput(format!(
                    "{name} has dimension {}, observations have {d}",
                    p.dim()
                )));
            }
        }
        if self.model.observation_dim() != d || self.model.action_dim() != self.env.action_dim() {
            return Err(Error::InvalidInput("planning model and plant disagree on layout".into()));
        }
        if self.initial.x.len() != self.env.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.env.state_dim(),
                found: self.initial.x.len(),
            });
        }
        if !(self.max_time >= 0.0) {
            return Err(Error::InvalidInput("max_time must be non-negative".into()));
        }
        Ok(())
    }
}

/// `|s - s*|^2 - w1 |s|^2` on truncated tensors.
pub fn surrogate_cost(s: &TruncatedTensor, s_star: &TruncatedTensor, w1: f64) -> Result<f64> {
    Ok(s.distance_squared(s_star)? - w1 * s.norm_squared())
}

/// `w2 |u|^2` on a terminal signature.
pub fn regularizer(terminal: &TruncatedTensor, w2: f64) -> f64 {
    w2 * terminal.norm_squared()
}

/// Signature-to-date bookkeeping, in scaled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Past {
    Signature(TruncatedTensor),
    /// Nodes at the replanning points; the last one is the current observation.
    Nodes(Vec<Vec<f64>>),
}

/// Result of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub segments: Vec<ActionSegment>,
    /// Decision vector the segments decode from.
    pub z: Vec<f64>,
    pub objective: f64,
    pub warm_objective: f64,
}

/// Planner with the reference-side quantities precomputed.
pub struct Planner<'a> {
    problem: &'a TrackingProblem,
    cfg: &'a MpcConfig,
    scaled_reference: PiecewisePath,
    s_star: Option<TruncatedTensor>,
    k_ref: f64,
}

impl<'a> Planner<'a> {
    pub fn new(problem: &'a TrackingProblem, cfg: &'a MpcConfig) -> Result<Self> {
        problem.validate()?;
        cfg.validate()?;
        let scaled_reference = problem.reference.scale(cfg.state_scale);
        let (s_star, k_ref) = match cfg.backend {
            CostBackend::Truncated { depth } => (Some(scaled_reference.signature(depth)), 0.0),
            CostBackend::Kernel(k) => (None, sigkernel::kernel(&scaled_reference, &scaled_reference, &k)?),
        };
        Ok(Planner {
            problem,
            cfg,
            scaled_reference,
            s_star,
            k_ref,
        })
    }

    fn scale(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| v * self.cfg.state_scale).collect()
    }

    /// Past bookkeeping at the start of an episode.
    pub fn initial_past(&self, state: &EnvState) -> Past {
        let obs = self.scale(&self.problem.env.observe(state));
        let mut nodes = Vec::new();
        if self.cfg.anchor_to_reference {
            nodes.push(self.scaled_reference.first().to_vec());
        }
        nodes.push(obs);
        match self.cfg.backend {
            CostBackend::Truncated { depth } => {
                let mut s = TruncatedTensor::unit(nodes[0].len(), depth);
                for w in nodes.windows(2) {
                    let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
                    s.mul_segment(&inc).expect("observation dimension");
                }
                Past::Signature(s)
            }
            CostBackend::Kernel(_) => Past::Nodes(nodes),
        }
    }

    /// Extends the past by executed observations (unscaled, the first being
    /// the observation before execution).
    pub fn extend_past(&self, past: &mut Past, executed: &[Vec<f64>]) -> Result<()> {
        match past {
            Past::Signature(s) => {
                for w in executed.windows(2) {
                    let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * self.cfg.state_scale).collect();
                    s.mul_segment(&inc)?;
                }
            }
            Past::Nodes(nodes) => {
                if let Some(last) = executed.last() {
                    nodes.push(self.scale(last));
                }
            }
        }
        Ok(())
    }

    fn n_vars(&self) -> usize {
        self.cfg.n_actions * self.cfg.variables_per_action(self.problem.model.action_dim())
    }

    /// Warm start for the first plan: zero actions at the configured duration.
    pub fn initial_guess(&self) -> Vec<f64> {
        let k = self.problem.model.action_dim();
        let per = self.cfg.variables_per_action(k);
        let mut z = vec![0.0; self.n_vars()];
        if self.cfg.optimize_durations {
            for i in 0..self.cfg.n_actions {
                z[i * per + k] = self.cfg.action_duration.ln();
            }
        }
        z
    }

    /// Drops the first segment and repeats the last one.
    pub fn shift(&self, z: &[f64]) -> Vec<f64> {
        let per = self.cfg.variables_per_action(self.problem.model.action_dim());
        let mut out = z[per..].to_vec();
        out.extend_from_slice(&z[z.len() - per..]);
        out
    }

    fn clamp_actions(&self, z: &mut [f64]) {
        let k = self.problem.model.action_dim();
        let per = self.cfg.variables_per_action(k);
        let u = self.problem.model.u_max();
        for chunk in z.chunks_mut(per) {
            for a in &mut chunk[..k] {
                *a = a.clamp(-u, u);
            }
        }
    }

    pub fn decode(&self, z: &[f64]) -> Vec<ActionSegment> {
        let k = self.problem.model.action_dim();
        let per = self.cfg.variables_per_action(k);
        let u = self.problem.model.u_max();
        let dt = self.problem.model.dt();
        let t_max = self.cfg.max_duration.unwrap_or(f64::INFINITY).max(dt);
        z.chunks(per)
            .map(|c| ActionSegment {
                action: c[..k].iter().map(|a| a.clamp(-u, u)).collect(),
                duration: if self.cfg.optimize_durations {
                    c[k].exp().clamp(dt, t_max)
                } else {
                    self.cfg.action_duration
                },
            })
            .collect()
    }

    /// Planned observation nodes (unscaled), starting with the current one.
    pub fn rollout_nodes(&self, current: &EnvState, segments: &[ActionSegment]) -> Result<(Vec<Vec<f64>>, EnvState)> {
        let model = &self.problem.model;
        let mut nodes = vec![model.observe(current)];
        let mut state = current.clone();
        let n = self.cfg.eval_points;
        for seg in segments {
            let piece = ActionSegment {
                action: seg.action.clone(),
                duration: seg.duration / n as f64,
            };
            for _ in 0..n {
                state = model.rollout(&state, &piece)?.pop().expect("positive duration");
                nodes.push(model.observe(&state));
            }
        }
        Ok((nodes, state))
    }

    /// Terminal path (unscaled) starting at `end`, or `None` for the unit.
    fn fixed_terminal(&self, end: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        let reference = &self.problem.reference;
        Ok(match self.cfg.terminal {
            TerminalStrategy::Unit | TerminalStrategy::NestedOpt { .. } => None,
            TerminalStrategy::StraightLine => Some(vec![end.to_vec(), reference.last().to_vec()]),
            TerminalStrategy::HoldState { until } => {
                let mut target = end.to_vec();
                target[0] = target[0].max(until);
                Some(vec![end.to_vec(), target])
            }
            TerminalStrategy::ReferenceSubpath => {
                let coarse = &self.problem.coarse_reference;
                let (i, f) = coarse.project(end);
                Some(coarse.suffix_from(i, f))
            }
        })
    }

    /// Terminal signature in truncated mode, given the chain so far.
    pub fn terminal_signature(&self, end: &[f64], chain: &TruncatedTensor) -> Result<TruncatedTensor> {
        let depth = chain.depth();
        let mut u = TruncatedTensor::unit(chain.dim(), depth);
        if let TerminalStrategy::NestedOpt {
            inner_iterations,
            step_size,
        } = self.cfg.terminal
        {
            let (x0, start) = self.nested_init(end);
            let cost = |x: &[f64]| {
                let u = free_path_signature(&start, x, depth);
                let s = chain.product(&u).expect("same algebra");
                self.truncated_cost(&s, &u)
            };
            let spec = OptimizerSpec::adam(step_size, inner_iterations);
            let best = minimize(cost, &x0, &spec)?;
            return Ok(free_path_signature(&start, &best.x, depth));
        }
        if let Some(path) = self.fixed_terminal(end)? {
            let scaled: Vec<Vec<f64>> = path.iter().map(|p| self.scale(p)).collect();
            for w in scaled.windows(2) {
                let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
                u.mul_segment(&inc)?;
            }
        }
        Ok(u)
    }

    /// Initial free nodes (scaled, flattened) and the scaled start point.
    fn nested_init(&self, end: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let start = self.scale(end);
        let goal = self.scaled_reference.last();
        let mid: Vec<f64> = start.iter().zip(goal).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut x0 = mid;
        x0.extend_from_slice(goal);
        (x0, start)
    }

    fn truncated_cost(&self, s: &TruncatedTensor, u: &TruncatedTensor) -> f64 {
        let s_star = self.s_star.as_ref().expect("truncated backend");
        surrogate_cost(s, s_star, self.cfg.w1).expect("same algebra") + regularizer(u, self.cfg.w2)
    }

    fn kernel_cost(&self, chain: &[Vec<f64>], terminal: &[Vec<f64>], k: &SignatureKernelConfig) -> Result<f64> {
        let mut full = chain.to_vec();
        full.extend(terminal.iter().skip(1).cloned());
        let x = PiecewisePath::new(full)?;
        let kxx = sigkernel::kernel(&x, &x, k)?;
        let kxy = sigkernel::kernel(&x, &self.scaled_reference, k)?;
        let reg = if terminal.len() > 1 {
            let t = PiecewisePath::new(terminal.to_vec())?;
            sigkernel::kernel(&t, &t, k)?
        } else {
            1.0
        };
        Ok(kxx - 2.0 * kxy + self.k_ref - self.cfg.w1 * kxx + self.cfg.w2 * reg)
    }

    /// Objective for planned observation nodes (unscaled, first = current).
    pub fn cost_of_nodes(&self, past: &Past, nodes: &[Vec<f64>]) -> Result<f64> {
        let end = nodes.last().expect("non-empty rollout");
        match (past, self.cfg.backend) {
            (Past::Signature(p), CostBackend::Truncated { .. }) => {
                let mut s = p.clone();
                for w in nodes.windows(2) {
                    let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * self.cfg.state_scale).collect();
                    s.mul_segment(&inc)?;
                }
                let u = self.terminal_signature(end, &s)?;
                let chain = s.product(&u)?;
                Ok(self.truncated_cost(&chain, &u))
            }
            (Past::Nodes(p), CostBackend::Kernel(k)) => {
                let mut chain = p.clone();
                chain.extend(nodes.iter().skip(1).map(|n| self.scale(n)));
                let scaled_end = self.scale(end);
                let terminal: Vec<Vec<f64>> = match self.cfg.terminal {
                    TerminalStrategy::NestedOpt {
                        inner_iterations,
                        step_size,
                    } => {
                        let (x0, start) = self.nested_init(end);
                        let d = start.len();
                        let build = |x: &[f64]| {
                            let mut t = vec![start.clone()];
                            t.extend(x.chunks(d).map(<[f64]>::to_vec));
                            t
                        };
                        let cost = |x: &[f64]| self.kernel_cost(&chain, &build(x), &k).unwrap_or(f64::INFINITY);
                        let best = minimize(cost, &x0, &OptimizerSpec::adam(step_size, inner_iterations))?;
                        build(&best.x)
                    }
                    // translated so the suffix starts where the rollout ends
                    _ => match self.fixed_terminal(end)? {
                        Some(path) => {
                            let first = self.scale(&path[0]);
                            path.iter()
                                .map(|p| {
                                    self.scale(p)
                                        .iter()
                                        .zip(&first)
                                        .zip(&scaled_end)
                                        .map(|((v, f), e)| v - f + e)
                                        .collect()
                                })
                                .collect()
                        }
                        None => vec![scaled_end],
                    },
                };
                self.kernel_cost(&chain, &terminal, &k)
            }
            _ => Err(Error::InvalidInput("past bookkeeping does not match the cost backend".into())),
        }
    }

    pub fn objective(&self, segments: &[ActionSegment], past: &Past, current: &EnvState) -> Result<f64> {
        if segments.len() != self.cfg.n_actions {
            return Err(Error::InvalidInput(format!(
                "expected {} action segments, got {}",
                self.cfg.n_actions,
                segments.len()
            )));
        }
        let (nodes, _) = self.rollout_nodes(current, segments)?;
        self.cost_of_nodes(past, &nodes)
    }

    /// Minimises the objective from `warm` (clamped into the action box).
    pub fn plan(&self, current: &EnvState, past: &Past, warm: &[f64]) -> Result<Plan> {
        if warm.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: warm.len(),
            });
        }
        let mut z0 = warm.to_vec();
        self.clamp_actions(&mut z0);
        let f = |z: &[f64]| {
            self.objective(&self.decode(z), past, current)
                .unwrap_or(f64::INFINITY)
        };
        let best = minimize(f, &z0, &self.cfg.optimizer)?;
        Ok(Plan {
            segments: self.decode(&best.x),
            z: best.x,
            objective: best.value,
            warm_objective: best.trace[0],
        })
    }

    pub fn arrived(&self, state: &EnvState) -> bool {
        let reference = &self.problem.reference;
        let obs = self.problem.env.observe(state);
        euclidean(&obs, reference.last()) <= self.cfg.arrival_tolerance * reference.diameter()
    }
}

fn free_path_signature(start: &[f64], x: &[f64], depth: usize) -> TruncatedTensor {
    let d = start.len();
    let mut u = TruncatedTensor::unit(d, depth);
    let mut prev = start;
    for node in x.chunks(d) {
        let inc: Vec<f64> = node.iter().zip(prev).map(|(a, b)| a - b).collect();
        u.mul_segment(&inc).expect("dimension");
        prev = node;
    }
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    /// Simulation time at the start of the step.
    pub time: f64,
    pub objective: f64,
    /// Distance from the current observation to the nearest reference node.
    pub deviation: f64,
    pub action: Vec<f64>,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Executed observations (unscaled) with simulation timestamps.
    pub executed: PiecewisePath,
    pub final_state: EnvState,
    pub log: Vec<StepLog>,
    /// Past signature at the end (truncated backend only).
    pub past_signature: Option<TruncatedTensor>,
    pub reached_end: bool,
}

pub fn run_episode(problem: &TrackingProblem, cfg: &MpcConfig) -> Result<Episode> {
    let planner = Planner::new(problem, cfg)?;
    let env = &problem.env;
    let mut state = problem.initial.clone();
    let mut past = planner.initial_past(&state);
    let mut executed =
        PiecewisePath::with_times(vec![env.observe(&state)], vec![state.time]).expect("finite initial state");
    let mut warm = planner.initial_guess();
    let mut log = Vec::new();
    let end_time = problem.initial.time + problem.max_time;
    let mut reached_end = planner.arrived(&state);

    while !reached_end && state.time < end_time - 1e-9 {
        let plan = planner.plan(&state, &past, &warm)?;
        let first = &plan.segments[0];
        let duration = cfg.execute_interval.unwrap_or(first.duration).min(end_time - state.time);
        let obs = env.observe(&state);
        log.push(StepLog {
            step: log.len(),
            time: state.time,
            objective: plan.objective,
            deviation: euclidean(&obs, problem.reference.point(problem.reference.nearest_node(&obs))),
            action: first.action.clone(),
            duration,
        });
        let states = env.rollout(
            &state,
            &ActionSegment {
                action: first.action.clone(),
                duration,
            },
        )?;
        let mut observed = vec![obs];
        for s in states {
            let o = env.observe(&s);
            executed.push(o.clone(), Some(s.time))?;
            observed.push(o);
            reached_end = planner.arrived(&s);
            state = s;
            // stop mid-segment once the reference end is reached
            if reached_end {
                break;
            }
        }
        planner.extend_past(&mut past, &observed)?;
        warm = planner.shift(&plan.z);
    }

    Ok(Episode {
        executed,
        final_state: state,
        log,
        past_signature: match past {
            Past::Signature(s) => Some(s),
            Past::Nodes(_) => None,
        },
        reached_end,
    })
}

/// Distances from each reference node to the closest executed node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
}

pub fn deviation_stats(reference: &PiecewisePath, executed: &PiecewisePath) -> DeviationStats {
    let d: Vec<f64> = reference
        .points()
        .iter()
        .map(|r| euclidean(r, executed.point(executed.nearest_node(r))))
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let variance = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    DeviationStats {
        mean,
        variance,
        max: d.iter().copied().fold(0.0, f64::max),
    }
}
