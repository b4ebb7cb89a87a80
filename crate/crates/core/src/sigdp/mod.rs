//! Signature dynamic programming on finite, deterministic MDPs.
//!
//! The S-table stores, for every time and state, the truncated signature of
//! the path-to-go under a fixed policy. It satisfies the backward recursion
//! `S[t][x] = exp(o(pi(x)) - o(x)) ⊗ S[t+1][pi(x)]` with `S[T] = 1`, which is
//! Chen's identity applied to the first segment.
//!
//! Classical policy evaluation is recovered by running the same recursion on
//! a 2D (time, discounted reward) staircase whose `(1,2)` coefficient is minus
//! the discounted return.

pub mod example;

use crate::error::{Error, Result};
use crate::paths::PiecewisePath;
use crate::tensor::TruncatedTensor;

/// Maximum distance between a value-row entry and a reward for them to match.
pub const REWARD_MATCH_TOLERANCE: f64 = 0.02;

/// States carry fixed observation vectors; transitions are chosen by a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSignatureMdp {
    observations: Vec<Vec<f64>>,
    horizon: usize,
}

impl FiniteSignatureMdp {
    pub fn new(observations: Vec<Vec<f64>>, horizon: usize) -> Result<Self> {
        let p = observations
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("an mdp needs at least one state".into()))?;
        if p == 0 {
            return Err(Error::InvalidInput("observations must have positive dimension".into()));
        }
        if let Some(bad) = observations.iter().find(|o| o.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        if observations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mdp observation".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        Ok(FiniteSignatureMdp { observations, horizon })
    }

    pub fn n_states(&self) -> usize {
        self.observations.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn observation(&self, state: usize) -> &[f64] {
        &self.observations[state]
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    /// Per-state reward: the sum of the observation coordinates.
    pub fn rewards(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.iter().sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicPolicy {
    next_state: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(next_state: Vec<usize>) -> Result<Self> {
        let n = next_state.len();
        if n == 0 {
            return Err(Error::InvalidInput("a policy needs at least one state".into()));
        }
        if let Some(&bad) = next_state.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidInput(format!("policy maps to state {bad}, but there are only {n}")));
        }
        Ok(DeterministicPolicy { next_state })
    }

    pub fn next(&self, state: usize) -> usize {
        self.next_state[state]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.next_state
    }

    pub fn n_states(&self) -> usize {
        self.next_state.len()
    }

    /// Copy with one transition replaced.
    pub fn with_transition(&self, state: usize, next: usize) -> Result<Self> {
        let mut next_state = self.next_state.clone();
        *next_state
            .get_mut(state)
            .ok_or_else(|| Error::InvalidInput(format!("state {state} out of range")))? = next;
        Self::new(next_state)
    }

    /// `start` followed by `n_steps` successors.
    pub fn chain(&self, start: usize, n_steps: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n_steps + 1);
        let mut s = start;
        out.push(s);
        for _ in 0..n_steps {
            s = self.next_state[s];
            out.push(s);
        }
        out
    }
}

fn check_policy(mdp: &FiniteSignatureMdp, policy: &DeterministicPolicy) -> Result<()> {
    if policy.n_states() != mdp.n_states() {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_states(),
            found: policy.n_states(),
        });
    }
    Ok(())
}

/// `(horizon + 1) x n_states` grid of signatures-to-go.
#[derive(Debug, Clone, PartialEq)]
pub struct STable {
    entries: Vec<Vec<TruncatedTensor>>,
}

impl STable {
    pub fn horizon(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, t: usize, state: usize) -> &TruncatedTensor {
        &self.entries[t][state]
    }

    pub fn rows(&self) -> &[Vec<TruncatedTensor>] {
        &self.entries
    }

    /// One coefficient across the table, e.g. `&[0, 1]` for `s_{1,2}`.
    pub fn coefficient_table(&self, index: &[usize]) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|s| s.coeff(index)).collect())
            .collect()
    }

    pub fn truncate(&self, depth: usize) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|s| s.truncate(depth)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(STable { entries })
    }
}

/// Backward recursion with an arbitrary per-transition signature
/// `step(t, x, pi(x))`.
pub fn evaluate_stable_with<F>(
    policy: &DeterministicPolicy,
    horizon: usize,
    dim: usize,
    depth: usize,
    step: F,
) -> STable
where
    F: Fn(usize, usize, usize) -> TruncatedTensor,
{
    let n = policy.n_states();
    let mut entries = vec![vec![TruncatedTensor::unit(dim, depth); n]; horizon + 1];
    for t in (0..horizon).rev() {
        let (head, tail) = entries.split_at_mut(t + 1);
        let next_row = &tail[0];
        for (x, slot) in head[t].iter_mut().enumerate() {
            let y = policy.next(x);
            *slot = step(t, x, y).product(&next_row[y]).expect("step signature has the table's shape");
        }
    }
    STable { entries }
}

/// S-table of the linearly interpolated observation path.
pub fn evaluate_stable(mdp: &FiniteSignatureMdp, policy: &DeterministicPolicy, depth: usize) -> Result<STable> {
    check_policy(mdp, policy)?;
    if depth == 0 {
        return Err(Error::InvalidInput("S-table depth must be at least 1".into()));
    }
    Ok(evaluate_stable_with(policy, mdp.horizon(), mdp.obs_dim(), depth, |_, x, y| {
        let inc: Vec<f64> = mdp.observation(y).iter().zip(mdp.observation(x)).map(|(b, a)| b - a).collect();
        TruncatedTensor::segment_exponential(&inc, depth)
    }))
}

/// Recovers a policy from a value row equal to `r(pi(x))`: each entry must
/// match exactly one state's reward within `tolerance`.
pub fn derive_policy(rewards: &[f64], value_row: &[f64], tolerance: f64) -> Result<DeterministicPolicy> {
    if rewards.len() != value_row.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            found: value_row.len(),
        });
    }
    let next = value_row
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            let mut hits = rewards.iter().enumerate().filter(|(_, r)| (*r - value).abs() <= tolerance);
            match (hits.next(), hits.next()) {
                (Some((state, _)), None) => Ok(state),
                (None, _) => Err(Error::UnmatchedValue { index, value }),
                (Some(_), Some(_)) => Err(Error::AmbiguousValue { index, value }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DeterministicPolicy::new(next)
}

/// Signature of one staircase step: up by `height`, one unit of time, back down.
fn reward_step_signature(height: f64, depth: usize) -> TruncatedTensor {
    let mut s = TruncatedTensor::unit(2, depth);
    for inc in [[0.0, height], [1.0, 0.0], [0.0, -height]] {
        s.mul_segment(&inc).expect("two-dimensional increment");
    }
    s
}

/// Staircase over coordinates (time, discounted reward): for each step the
/// reward coordinate rises to `gamma^t r_t`, time advances by one, and the
/// reward drops back to zero. The enclosed area is the discounted return, so
/// `-s_{1,2} = sum_t gamma^t r_t`.
pub fn build_reward_time_path(rewards: &[f64], gamma: f64) -> Result<PiecewisePath> {
    check_gamma(gamma)?;
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward".into()));
    }
    let mut points = vec![vec![0.0, 0.0]];
    let mut discount = 1.0;
    for (t, r) in rewards.iter().enumerate() {
        let t = t as f64;
        let h = discount * r;
        points.push(vec![t, h]);
        points.push(vec![t + 1.0, h]);
        points.push(vec![t + 1.0, 0.0]);
        discount *= gamma;
    }
    PiecewisePath::new(points)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!("discount must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// Classical backward policy evaluation with the reward collected on arrival:
/// `V[t][x] = r(pi(x)) + gamma V[t+1][pi(x)]`, `V[T] = 0`.
pub fn policy_evaluation(rewards: &[f64], policy: &DeterministicPolicy, horizon: usize, gamma: f64) -> Vec<Vec<f64>> {
    let n = policy.n_states();
    let mut v = vec![vec![0.0; n]; horizon + 1];
    for t in (0..horizon).rev() {
        for x in 0..n {
            let y = policy.next(x);
            v[t][x] = rewards[y] + gamma * v[t + 1][y];
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellmanGrids {
    /// `-gamma^{-t} s_{1,2}` of the depth-2 staircase S-table.
    pub signature: Vec<Vec<f64>>,
    pub classical: Vec<Vec<f64>>,
}

impl BellmanGrids {
    pub fn max_abs_difference(&self) -> f64 {
        max_abs_difference(&self.signature, &self.classical)
    }
}

pub fn max_abs_difference(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Value grids by the signature route and by classical policy evaluation,
/// with rewards `o1 + ... + op`.
pub fn bellman_check(mdp: &FiniteSignatureMdp, policy: &DeterministicPolicy, gamma: f64) -> Result<BellmanGrids> {
    check_policy(mdp, policy)?;
    check_gamma(gamma)?;
    let rewards = mdp.rewards();
    let table = evaluate_stable_with(policy, mdp.horizon(), 2, 2, |t, _, y| {
        reward_step_signature(gamma.powi(t as i32) * rewards[y], 2)
    });
    let signature = table
        .coefficient_table(&[0, 1])
        .into_iter()
        .enumerate()
        .map(|(t, row)| {
            let rescale = gamma.powi(-(t as i32));
            row.into_iter().map(|s| -s * rescale).collect()
        })
        .collect();
    Ok(BellmanGrids {
        signature,
        classical: policy_evaluation(&rewards, policy, mdp.horizon(), gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChenCandidate {
    pub state: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChenOptimum {
    pub best: ChenCandidate,
    /// Every candidate in the order given.
    pub candidates: Vec<ChenCandidate>,
}

/// For each candidate successor of `branch_state`, the cost `|s_{1,2}|` of the
/// observation path from `branch_state` over the remaining `horizon - t` steps
/// under the base policy with that one transition replaced. Ties go to the
/// earliest candidate.
pub fn chen_optimality_eval(
    mdp: &FiniteSignatureMdp,
    base_policy: &DeterministicPolicy,
    branch_state: usize,
    candidates: &[usize],
    t: usize,
    depth: usize,
) -> Result<ChenOptimum> {
    check_policy(mdp, base_policy)?;
    if candidates.is_empty() {
        return Err(Error::InvalidInput("chen optimality needs at least one candidate".into()));
    }
    if t >= mdp.horizon() {
        return Err(Error::InvalidInput(format!("time {t} is not before the horizon {}", mdp.horizon())));
    }
    if depth < 2 {
        return Err(Error::InvalidInput("the (1,2) coefficient needs depth at least 2".into()));
    }
    if mdp.obs_dim() < 2 {
        return Err(Error::InvalidInput("the (1,2) coefficient needs two observation coordinates".into()));
    }
    let candidates = candidates
        .iter()
        .map(|&state| {
            let policy = base_policy.with_transition(branch_state, state)?;
            let tail = mdp_path(mdp, &policy, branch_state, mdp.horizon() - t)?;
            Ok(ChenCandidate {
                state,
                cost: tail.signature(depth).coeff(&[0, 1]).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = candidates
        .iter()
        .copied()
        .reduce(|best, c| if c.cost < best.cost { c } else { best })
        .expect("non-empty");
    Ok(ChenOptimum { best, candidates })
}

/// Observation path along the policy chain from `start`.
pub(crate) fn mdp_path(
    mdp: &FiniteSignatureMdp,
    policy: &DeterministicPolicy,
    start: usize,
    n_steps: usize,
) -> Result<PiecewisePath> {
    PiecewisePath::new(
        policy
            .chain(start, n_steps)
            .into_iter()
            .map(|s| mdp.observation(s).to_vec())
            .collect(),
    )
}
