//! Optimisation-based path construction: penalised smoothing of waypoints and
//! reconstruction of a path from (possibly corrupted) signature coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PiecewisePath;
use crate::error::{Error, Result};
use crate::optimize::{minimize, OptimizerSpec};
use crate::tensor::TruncatedTensor;

/// Sum of squared second differences of the node sequence.
pub fn roughness(path: &PiecewisePath) -> f64 {
    path.points()
        .windows(3)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .zip(&w[2])
                .map(|((a, b), c)| (a - 2.0 * b + c).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Resamples the polyline at `n` points evenly spaced in arc length.
fn resample(waypoints: &PiecewisePath, n: usize) -> Vec<Vec<f64>> {
    let pts = waypoints.points();
    let mut cumulative = vec![0.0];
    for w in pts.windows(2) {
        let seg = super::euclidean(&w[0], &w[1]);
        cumulative.push(cumulative[cumulative.len() - 1] + seg);
    }
    let total = cumulative[cumulative.len() - 1];
    if total == 0.0 {
        return vec![pts[0].clone(); n];
    }
    let mut seg = 0;
    (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
                seg += 1;
            }
            let len = cumulative[seg + 1] - cumulative[seg];
            let u = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            pts[seg]
                .iter()
                .zip(&pts[seg + 1])
                .map(|(a, b)| a + u * (b - a))
                .collect()
        })
        .collect()
}

/// Smooths waypoints into an `n_nodes` path minimising
/// `sum |x_i - y_i|^2 + smooth_weight * roughness(x)`, where `y` is the
/// arc-length resampling of the waypoints. The objective is quadratic, so the
/// normal equations `(I + w D'D) x = y` are solved per coordinate by conjugate
/// gradients.
pub fn smoothing_spline(waypoints: &PiecewisePath, n_nodes: usize, smooth_weight: f64) -> Result<PiecewisePath> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidInput("smoothing needs at least two waypoints".into()));
    }
    if n_nodes < waypoints.len() {
        return Err(Error::InvalidInput(format!(
            "{n_nodes} nodes cannot represent {} waypoints",
            waypoints.len()
        )));
    }
    if !(smooth_weight >= 0.0 && smooth_weight.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing weight must be non-negative, got {smooth_weight}")));
    }
    let d = waypoints.dim();
    let target = resample(waypoints, n_nodes);
    let mut out = target.clone();
    for c in 0..d {
        let y: Vec<f64> = target.iter().map(|p| p[c]).collect();
        let x = conjugate_gradient(|v| smoothing_operator(v, smooth_weight), &y);
        for (p, v) in out.iter_mut().zip(x) {
            p[c] = v;
        }
    }
    PiecewisePath::new(out)
}

/// `(I + w D'D) v` with `D` the second-difference operator.
fn smoothing_operator(v: &[f64], w: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    for i in 1..v.len().saturating_sub(1) {
        let second = w * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
        out[i - 1] += second;
        out[i] -= 2.0 * second;
        out[i + 1] += second;
    }
    out
}

fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = b.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let tol = 1e-28 * dot(b, b).max(1.0);
    for _ in 0..4 * n + 10 {
        if rr <= tol {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

/// Settings for [`reconstruct_from_signature`].
#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    /// Node count including the fixed first node.
    pub n_nodes: usize,
    pub start: Vec<f64>,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Initial free nodes (all but the first); defaults to a jittered straight
    /// line along the target's level-1 displacement.
    pub init: Option<Vec<Vec<f64>>>,
}

/// Finds a path with fixed first node whose signature is closest (squared
/// tensor distance) to `target`. Returns the best iterate found.
pub fn reconstruct_from_signature(target: &TruncatedTensor, opts: &ReconstructOptions) -> Result<PiecewisePath> {
    if !target.is_finite() {
        return Err(Error::NonFinite("reconstruction target".into()));
    }
    if target.scalar() != 1.0 {
        return Err(Error::InvalidInput("reconstruction target must have level 0 equal to 1".into()));
    }
    if opts.n_nodes < 2 {
        return Err(Error::InvalidInput("reconstruction needs at least two nodes".into()));
    }
    let d = target.dim();
    if opts.start.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: opts.start.len(),
        });
    }
    let depth = target.depth();
    let free = opts.n_nodes - 1;

    let x0: Vec<f64> = match &opts.init {
        Some(init) => {
            if init.len() != free || init.iter().any(|p| p.len() != d) {
                return Err(Error::InvalidInput(format!("initial guess must be {free} points of dimension {d}")));
            }
            init.iter().flatten().copied().collect()
        }
        None => {
            let disp: Vec<f64> = if depth >= 1 { target.level(1).to_vec() } else { vec![0.0; d] };
            let scale = disp.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let noise = Normal::new(0.0, 0.05 * scale).expect("positive stddev");
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (1..=free)
                .flat_map(|i| {
                    let s = i as f64 / free as f64;
                    opts.start
                        .iter()
                        .zip(&disp)
                        .map(|(a, v)| a + s * v)
                        .collect::<Vec<_>>()
                })
                .map(|v| v + noise.sample(&mut rng))
                .collect()
        }
    };

    let start = opts.start.clone();
    let cost = |x: &[f64]| -> f64 {
        let mut sig = TruncatedTensor::unit(d, depth);
        let mut prev = start.as_slice();
        for node in x.chunks(d) {
            let inc: Vec<f64> = node.iter().zip(prev).map(|(a, b)| a - b).collect();
            sig.mul_segment(&inc).expect("dimension checked");
            prev = node;
        }
        sig.distance_squared(target).expect("shapes match")
    };
    let spec = OptimizerSpec::adam(opts.step_size, opts.iterations).with_seed(opts.seed);
    let best = minimize(cost, &x0, &spec)?;
    let mut points = vec![opts.start.clone()];
    points.extend(best.x.chunks(d).map(<[f64]>::to_vec));
    PiecewisePath::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(points: &[[f64; 2]]) -> PiecewisePath {
        PiecewisePath::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn collinear_waypoints_stay_straight() {
        let wp = path(&[[0.0, 0.0], [3.0, 1.5]]);
        let s = smoothing_spline(&wp, 11, 0.5).unwrap();
        assert_eq!(s.len(), 11);
        assert!(roughness(&s) < 1e-12);
        assert!((s.point(5)[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_interpolates_resampling() {
        let wp = path(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        let s = smoothing_spline(&wp, 5, 0.0).unwrap();
        let expected = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 0.5], [1.0, 1.0]];
        for (p, e) in s.points().iter().zip(expected) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn smoothing_reduces_roughness() {
        let wp = path(&[[0.0, 0.0], [1.0, 1.0], [2.0, -1.0], [3.0, 1.0], [4.0, -1.0], [5.0, 0.0]]);
        let raw = smoothing_spline(&wp, 41, 0.0).unwrap();
        let smooth = smoothing_spline(&wp, 41, 0.5).unwrap();
        assert!(roughness(&smooth) < roughness(&raw), "{} vs {}", roughness(&smooth), roughness(&raw));
    }

    #[test]
    fn smoothing_solves_normal_equations() {
        let wp = path(&[[0.0, 0.0], [1.0, 2.0], [3.0, -1.0], [4.0, 0.5]]);
        let w = 3.0;
        let s = smoothing_spline(&wp, 9, w).unwrap();
        let target = resample(&wp, 9);
        for c in 0..2 {
            let x: Vec<f64> = s.points().iter().map(|p| p[c]).collect();
            let lhs = smoothing_operator(&x, w);
            for (l, t) in lhs.iter().zip(&target) {
                assert!((l - t[c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn smoothing_rejects_degenerate_input() {
        assert!(smoothing_spline(&path(&[[1.0, 1.0]]), 4, 0.5).is_err());
        assert!(smoothing_spline(&path(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), 2, 0.5).is_err());
    }

    #[test]
    fn reconstruction_round_trip() {
        let truth = path(&[[0.0, 0.0], [1.0, 0.4], [1.5, 1.5]]);
        let target = truth.signature(4);
        let opts = ReconstructOptions {
            n_nodes: 3,
            start: vec![0.0, 0.0],
            iterations: 400,
            step_size: 0.01,
            seed: 1,
            init: Some(vec![vec![1.05, 0.35], vec![1.45, 1.55]]),
        };
        let rec = reconstruct_from_signature(&target, &opts).unwrap();
        for (p, q) in rec.points().iter().zip(truth.points()) {
            assert!(super::super::euclidean(p, q) < 1e-3, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn unit_target_gives_tree_like_path() {
        let opts = ReconstructOptions {
            n_nodes: 3,
            start: vec![0.5, -0.5],
            iterations: 300,
            step_size: 0.05,
            seed: 2,
            init: Some(vec![vec![0.8, -0.2], vec![0.3, -0.9]]),
        };
        let unit = TruncatedTensor::unit(2, 3);
        let rec = reconstruct_from_signature(&unit, &opts).unwrap();
        // any out-and-back path has the unit signature, so only the endpoint is pinned
        assert!(rec.signature(3).distance_squared(&unit).unwrap() < 1e-4);
        assert!(super::super::euclidean(rec.last(), &[0.5, -0.5]) < 2e-2, "{:?}", rec.last());
    }

    #[test]
    fn reconstruction_rejects_bad_targets() {
        let opts = ReconstructOptions {
            n_nodes: 3,
            start: vec![0.0, 0.0],
            iterations: 1,
            step_size: 0.1,
            seed: 0,
            init: None,
        };
        let mut t = TruncatedTensor::unit(2, 2);
        t.level_mut(1)[0] = f64::INFINITY;
        assert!(matches!(reconstruct_from_signature(&t, &opts), Err(Error::NonFinite(_))));
        assert!(reconstruct_from_signature(&TruncatedTensor::zero(2, 2), &opts).is_err());
    }
}
