//! Deterministic simulation environments.
//!
//! * [`PointMass`]: planar double integrator, explicit Euler with projection
//!   onto the box `[0, 100]^2 x [0, 5]^2`. State `(p1, p2, v1, v2)`,
//!   observation `(p1, p2)`.
//! * [`SpringDamper`]: two masses coupled by springs and dampers, RK4.
//!   State `(p1, v1, p2, v2)`, observation `(t, p1, v1, p2, v2)`.
//!
//! Both integrate a constant action over a segment in sub-steps of `dt`; a
//! trailing partial sub-step covers durations that are not multiples of `dt`,
//! so rollouts depend continuously on the duration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PiecewisePath;
use crate::sigdp::{mdp_path, DeterministicPolicy, FiniteSignatureMdp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub x: Vec<f64>,
    /// Simulation time in seconds.
    pub time: f64,
}

impl EnvState {
    pub fn new(x: Vec<f64>) -> Self {
        EnvState { x, time: 0.0 }
    }
}

/// A constant action held for `duration` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSegment {
    pub action: Vec<f64>,
    pub duration: f64,
}

pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn dt(&self) -> f64;
    fn u_max(&self) -> f64;
    /// States after each sub-step of the segment (the start state excluded).
    fn rollout(&self, state: &EnvState, segment: &ActionSegment) -> Result<Vec<EnvState>>;
    /// Coordinates the tracking cost sees.
    fn observe(&self, state: &EnvState) -> Vec<f64>;
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn check_segment(segment: &ActionSegment, action_dim: usize, u_max: f64) -> Result<Vec<f64>> {
    if segment.action.len() != action_dim {
        return Err(Error::DimensionMismatch {
            expected: action_dim,
            found: segment.action.len(),
        });
    }
    if !(segment.duration > 0.0 && segment.duration.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "action duration must be positive, got {}",
            segment.duration
        )));
    }
    if segment.action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action".into()));
    }
    Ok(segment.action.iter().map(|a| a.clamp(-u_max, u_max)).collect())
}

fn check_state(state: &EnvState, dim: usize) -> Result<()> {
    if state.x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.x.len(),
        });
    }
    if state.x.iter().any(|v| !v.is_finite()) || !state.time.is_finite() {
        return Err(Error::NonFinite("environment state".into()));
    }
    Ok(())
}

/// Full `dt` sub-steps plus a trailing partial one.
fn substeps(duration: f64, dt: f64) -> impl Iterator<Item = f64> {
    let full = (duration / dt + 1e-9).floor() as usize;
    let rest = duration - full as f64 * dt;
    let partial = (rest > 1e-9 * dt).then_some(rest);
    std::iter::repeat_n(dt, full).chain(partial)
}

fn integrate(state: &EnvState, duration: f64, dt: f64, mut step: impl FnMut(&[f64], f64) -> Vec<f64>) -> Vec<EnvState> {
    let mut x = state.x.clone();
    let mut time = state.time;
    substeps(duration, dt)
        .map(|h| {
            x = step(&x, h);
            time += h;
            EnvState { x: x.clone(), time }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub dt: f64,
    pub u_max: f64,
    pub position_max: f64,
    pub velocity_max: f64,
}

impl Default for PointMass {
    fn default() -> Self {
        PointMass {
            dt: 0.1,
            u_max: 1.0,
            position_max: 100.0,
            velocity_max: 5.0,
        }
    }
}

impl PointMass {
    /// Coordinatewise clamping, which is the orthogonal projection onto the box.
    pub fn project(&self, x: &mut [f64]) {
        for p in &mut x[..2] {
            *p = p.clamp(0.0, self.position_max);
        }
        for v in &mut x[2..] {
            *v = v.clamp(0.0, self.velocity_max);
        }
    }
}

/// One projected Euler step of the point mass, `x = (p1, p2, v1, v2)`.
pub fn pointmass_step(env: &PointMass, x: &[f64], a: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![x[0] + x[2] * h, x[1] + x[3] * h, x[2] + a[0] * h, x[3] + a[1] * h];
    env.project(&mut out);
    out
}

impl Environment for PointMass {
    fn state_dim(&self) -> usize {
        4
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn observation_dim(&self) -> usize {
        2
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn u_max(&self) -> f64 {
        self.u_max
    }

    fn rollout(&self, state: &EnvState, segment: &ActionSegment) -> Result<Vec<EnvState>> {
        check_dt(self.dt)?;
        check_state(state, 4)?;
        let a = check_segment(segment, 2, self.u_max)?;
        Ok(integrate(state, segment.duration, self.dt, |x, h| pointmass_step(self, x, &a, h)))
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.x[..2].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringDamperParams {
    pub k1: f64,
    pub b1: f64,
    pub m1: f64,
    pub k2: f64,
    pub b2: f64,
    pub m2: f64,
}

impl Default for SpringDamperParams {
    fn default() -> Self {
        SpringDamperParams {
            k1: 2.0,
            b1: 0.05,
            m1: 1.0,
            k2: 1.0,
            b2: 0.05,
            m2: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringDamper {
    #[serde(default)]
    pub params: SpringDamperParams,
    pub dt: f64,
    pub u_max: f64,
    /// Constant accelerations added to both mass equations.
    #[serde(default)]
    pub disturbance: [f64; 2],
}

impl Default for SpringDamper {
    fn default() -> Self {
        SpringDamper {
            params: SpringDamperParams::default(),
            dt: 0.1,
            u_max: 1.0,
            disturbance: [0.0; 2],
        }
    }
}

impl SpringDamper {
    pub fn with_disturbance(mut self, w: [f64; 2]) -> Self {
        self.disturbance = w;
        self
    }

    /// Mechanical energy: kinetic plus both spring potentials.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let SpringDamperParams { k1, m1, k2, m2, .. } = self.params;
        let (p1, v1, p2, v2) = (x[0], x[1], x[2], x[3]);
        0.5 * (m1 * v1 * v1 + m2 * v2 * v2 + k1 * p1 * p1 + k2 * (p2 - p1).powi(2))
    }
}

/// Time derivative of `(p1, v1, p2, v2)`. The control on the second mass is
/// scaled by `1/m1`, not `1/m2`.
fn spring_damper_rhs(p: &SpringDamperParams, x: &[f64], a: &[f64], w: &[f64; 2]) -> [f64; 4] {
    let (p1, v1, p2, v2) = (x[0], x[1], x[2], x[3]);
    let dv1 = -(p.k1 + p.k2) * p1 / p.m1 - (p.b1 + p.b2) * v1 / p.m1 + p.k2 * p2 / p.m1 + p.b2 * v2 / p.m1
        + a[0] / p.m1
        + w[0];
    let dv2 = p.k2 * p1 / p.m2 + p.b2 * v1 / p.m2 - p.k2 * p2 / p.m2 - p.b2 * v2 / p.m2 + a[1] / p.m1 + w[1];
    [v1, dv1, v2, dv2]
}

/// One classical RK4 step of the spring-damper system.
pub fn spring_damper_step(env: &SpringDamper, x: &[f64], a: &[f64], h: f64) -> Vec<f64> {
    let f = |y: &[f64]| spring_damper_rhs(&env.params, y, a, &env.disturbance);
    let shift = |k: &[f64; 4], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + s * ki).collect() };
    let k1 = f(x);
    let k2 = f(&shift(&k1, h / 2.0));
    let k3 = f(&shift(&k2, h / 2.0));
    let k4 = f(&shift(&k3, h));
    (0..4)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

impl Environment for SpringDamper {
    fn state_dim(&self) -> usize {
        4
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn observation_dim(&self) -> usize {
        5
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn u_max(&self) -> f64 {
        self.u_max
    }

    fn rollout(&self, state: &EnvState, segment: &ActionSegment) -> Result<Vec<EnvState>> {
        check_dt(self.dt)?;
        check_state(state, 4)?;
        let a = check_segment(segment, 2, self.u_max)?;
        Ok(integrate(state, segment.duration, self.dt, |x, h| spring_damper_step(self, x, &a, h)))
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        let mut o = Vec::with_capacity(5);
        o.push(state.time);
        o.extend_from_slice(&state.x);
        o
    }
}

/// Either environment, selected by `kind` in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    PointMass(PointMass),
    SpringDamper(SpringDamper),
}

impl EnvKind {
    fn inner(&self) -> &dyn Environment {
        match self {
            EnvKind::PointMass(e) => e,
            EnvKind::SpringDamper(e) => e,
        }
    }
}

impl Environment for EnvKind {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner().action_dim()
    }
    fn observation_dim(&self) -> usize {
        self.inner().observation_dim()
    }
    fn dt(&self) -> f64 {
        self.inner().dt()
    }
    fn u_max(&self) -> f64 {
        self.inner().u_max()
    }
    fn rollout(&self, state: &EnvState, segment: &ActionSegment) -> Result<Vec<EnvState>> {
        self.inner().rollout(state, segment)
    }
    fn observe(&self, state: &EnvState) -> Vec<f64> {
        self.inner().observe(state)
    }
}

/// Path `x, f(x) + eps, ...` of `n_steps + 1` points for `f(x) = x^1.1`
/// coordinatewise.
pub fn toy_power_map(x: &[f64], n_steps: usize, eps: f64) -> Result<PiecewisePath> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("power map needs at least one step".into()));
    }
    let mut cur = x.to_vec();
    let mut points = Vec::with_capacity(n_steps + 1);
    for _ in 0..=n_steps {
        if cur.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput(format!("power map needs positive coordinates, got {cur:?}")));
        }
        points.push(cur.clone());
        cur = cur.iter().map(|v| v.powf(1.1) + eps).collect();
    }
    PiecewisePath::new(points)
}

/// Observations along the policy chain from `start`.
pub fn mdp_observation_path(
    mdp: &FiniteSignatureMdp,
    policy: &DeterministicPolicy,
    start: usize,
    n_steps: usize,
) -> Result<PiecewisePath> {
    if n_steps > mdp.horizon() {
        return Err(Error::InvalidInput(format!(
            "{n_steps} steps exceed the horizon {}",
            mdp.horizon()
        )));
    }
    if start >= mdp.n_states() || policy.n_states() != mdp.n_states() {
        return Err(Error::InvalidInput("start state or policy does not fit the mdp".into()));
    }
    mdp_path(mdp, policy, start, n_steps)
}
