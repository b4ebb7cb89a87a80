//! Piecewise-linear paths and their truncated signatures.
//!
//! Signatures are computed exactly: every segment contributes its tensor
//! exponential and the segments are folded left to right with the truncated
//! product (Chen's identity), so no numerical quadrature is involved.

mod csv_io;
mod fit;

pub use csv_io::{read_csv, read_csv_from, write_csv, write_csv_to};
pub use fit::{reconstruct_from_signature, roughness, smoothing_spline, ReconstructOptions};

use crate::error::{Error, Result};
use crate::tensor::TruncatedTensor;

/// Absolute tolerance for the junction point in [`PiecewisePath::concat`].
pub const JUNCTION_TOLERANCE: f64 = 1e-9;

/// Ordered nodes in `R^d`, linearly interpolated, with optional timestamps.
///
/// Without timestamps the nodes are taken to be evenly spaced over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    dim: usize,
    points: Vec<Vec<f64>>,
    times: Option<Vec<f64>>,
}

impl PiecewisePath {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("a path needs at least one point".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput("path points must have positive dimension".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("path point".into()));
            }
        }
        Ok(PiecewisePath {
            dim,
            points,
            times: None,
        })
    }

    pub fn with_times(points: Vec<Vec<f64>>, times: Vec<f64>) -> Result<Self> {
        let mut path = Self::new(points)?;
        if times.len() != path.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} timestamps for {} points",
                times.len(),
                path.points.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("timestamp".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("timestamps must strictly increase".into()));
        }
        path.times = Some(times);
        Ok(path)
    }

    /// A one-dimensional path from scalar samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn first(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    /// Timestamps, falling back to even spacing over `[0, 1]`.
    pub fn resolved_times(&self) -> Vec<f64> {
        match &self.times {
            Some(t) => t.clone(),
            None if self.points.len() == 1 => vec![0.0],
            None => {
                let n = (self.points.len() - 1) as f64;
                (0..self.points.len()).map(|i| i as f64 / n).collect()
            }
        }
    }

    pub fn increments(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.points
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
    }

    /// Depth-`depth` signature; a single-point path gives the unit.
    pub fn signature(&self, depth: usize) -> TruncatedTensor {
        let mut sig = TruncatedTensor::unit(self.dim, depth);
        for inc in self.increments() {
            sig.mul_segment(&inc).expect("increment dimension matches path");
        }
        sig
    }

    /// Joins `other` onto the end of `self`. The first point of `other` must
    /// coincide with the last point of `self`; it is dropped from the result.
    /// Timestamps of `other` are shifted so it continues where `self` ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let gap = euclidean(self.last(), other.first());
        if gap > JUNCTION_TOLERANCE {
            return Err(Error::EndpointMismatch { gap });
        }
        let mut points = self.points.clone();
        points.extend(other.points[1..].iter().cloned());
        let times = match (&self.times, &other.times) {
            (None, None) => None,
            _ => {
                let mut t = self.resolved_times();
                let other_t = other.resolved_times();
                let shift = t[t.len() - 1] - other_t[0];
                t.extend(other_t[1..].iter().map(|s| s + shift));
                Some(t)
            }
        };
        Ok(PiecewisePath {
            dim: self.dim,
            points,
            times,
        })
    }

    /// Prepends the (possibly default) time coordinate as axis 0.
    pub fn time_augment(&self) -> Self {
        let times = self.resolved_times();
        let points = self
            .points
            .iter()
            .zip(&times)
            .map(|(p, &t)| std::iter::once(t).chain(p.iter().copied()).collect())
            .collect();
        PiecewisePath {
            dim: self.dim + 1,
            points,
            times: self.times.clone(),
        }
    }

    /// Inserts `factor - 1` evenly spaced collinear nodes inside every segment.
    pub fn subdivide(&self, factor: usize) -> Self {
        assert!(factor >= 1, "subdivision factor must be at least 1");
        if factor == 1 || self.points.len() < 2 {
            return self.clone();
        }
        let times = self.times.as_ref();
        let mut points = Vec::with_capacity((self.points.len() - 1) * factor + 1);
        let mut new_times = Vec::new();
        for i in 0..self.points.len() - 1 {
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            for j in 0..factor {
                let s = j as f64 / factor as f64;
                points.push(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
                if let Some(t) = times {
                    new_times.push(t[i] + s * (t[i + 1] - t[i]));
                }
            }
        }
        points.push(self.last().to_vec());
        if let Some(t) = times {
            new_times.push(t[t.len() - 1]);
        }
        PiecewisePath {
            dim: self.dim,
            points,
            times: times.map(|_| new_times),
        }
    }

    pub fn translate(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: offset.len(),
            });
        }
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(offset).map(|(x, c)| x + c).collect())
            .collect();
        Ok(PiecewisePath {
            dim: self.dim,
            points,
            times: self.times.clone(),
        })
    }

    /// Multiplies every coordinate by `alpha` (timestamps are untouched).
    pub fn scale(&self, alpha: f64) -> Self {
        PiecewisePath {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|x| alpha * x).collect())
                .collect(),
            times: self.times.clone(),
        }
    }

    /// Nodes `range.start..range.end` as a new path.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.points.len() {
            return Err(Error::InvalidInput(format!(
                "slice {range:?} out of bounds for {} points",
                self.points.len()
            )));
        }
        Ok(PiecewisePath {
            dim: self.dim,
            points: self.points[range.clone()].to_vec(),
            times: self.times.as_ref().map(|t| t[range].to_vec()),
        })
    }

    /// Total Euclidean length (1-variation).
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| euclidean(&w[0], &w[1])).sum()
    }

    /// Largest distance between any two nodes.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(euclidean(a, b));
            }
        }
        best
    }

    /// Index of the node closest to `x`; ties go to the lowest index.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = squared_distance(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Closest point on the polyline as `(segment, fraction)`; ties go to the
    /// earliest segment. A single node projects to `(0, 0.0)`.
    pub fn project(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, 0.0, f64::INFINITY);
        for (i, w) in self.points.windows(2).enumerate() {
            let seg: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            let len2: f64 = seg.iter().map(|v| v * v).sum();
            let lambda = if len2 > 0.0 {
                let dot: f64 = x.iter().zip(&w[0]).zip(&seg).map(|((xi, a), s)| (xi - a) * s).sum();
                (dot / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d: f64 = x
                .iter()
                .zip(&w[0])
                .zip(&seg)
                .map(|((xi, a), s)| (xi - a - lambda * s).powi(2))
                .sum();
            if d < best.2 {
                best = (i, lambda, d);
            }
        }
        (best.0, best.1)
    }

    /// Nodes of the remainder of the path from `(segment, fraction)`.
    pub fn suffix_from(&self, segment: usize, fraction: f64) -> Vec<Vec<f64>> {
        if segment + 1 >= self.points.len() {
            return vec![self.last().to_vec()];
        }
        let (a, b) = (&self.points[segment], &self.points[segment + 1]);
        let mut out = vec![a.iter().zip(b).map(|(p, q)| p + fraction * (q - p)).collect::<Vec<f64>>()];
        let rest = if fraction >= 1.0 { segment + 2 } else { segment + 1 };
        out.extend(self.points[rest.min(self.points.len())..].iter().cloned());
        out
    }

    /// Drops timestamps, keeping the node sequence.
    pub fn without_times(&self) -> Self {
        PiecewisePath {
            dim: self.dim,
            points: self.points.clone(),
            times: None,
        }
    }

    /// Appends a node (and a timestamp when the path is timed).
    pub fn push(&mut self, point: Vec<f64>, time: Option<f64>) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        match (&mut self.times, time) {
            (Some(t), Some(s)) => {
                if s <= t[t.len() - 1] {
                    return Err(Error::InvalidInput("timestamps must strictly increase".into()));
                }
                t.push(s);
            }
            (None, None) => {}
            _ => return Err(Error::InvalidInput("timestamp presence must match the path".into())),
        }
        self.points.push(point);
        Ok(())
    }
}

/// Extends a running signature by the signature of the subpath traversed
/// since the last update.
pub fn update_signature(
    past: &TruncatedTensor,
    subpath: &PiecewisePath,
    depth: usize,
) -> Result<TruncatedTensor> {
    if past.depth() != depth {
        return Err(Error::DepthMismatch {
            expected: depth,
            found: past.depth(),
        });
    }
    if past.dim() != subpath.dim() {
        return Err(Error::DimensionMismatch {
            expected: past.dim(),
            found: subpath.dim(),
        });
    }
    let mut out = past.clone();
    for inc in subpath.increments() {
        out.mul_segment(&inc)?;
    }
    Ok(out)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(points: &[&[f64]]) -> PiecewisePath {
        PiecewisePath::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn max_diff(a: &TruncatedTensor, b: &TruncatedTensor) -> f64 {
        a.flatten()
            .iter()
            .zip(b.flatten())
            .map(|(x, y)| (x - y).abs() / (1.0 + y.abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_path_has_unit_signature() {
        let p = path(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(p.signature(3), TruncatedTensor::unit(2, 3));
        let single = path(&[&[4.0]]);
        assert_eq!(single.signature(2), TruncatedTensor::unit(1, 2));
    }

    #[test]
    fn one_dimensional_signature_depends_on_displacement() {
        let p = PiecewisePath::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        let s = p.signature(4);
        let mut fact = 1.0;
        for k in 1..=4 {
            fact *= k as f64;
            assert!((s.level(k)[0] - 3f64.powi(k as i32) / fact).abs() < 1e-12);
        }
        assert!((s.level(2)[0] - 4.5).abs() < 1e-12);
    }

    /// Iterated integrals of a piecewise-linear path by fine left Riemann sums.
    fn riemann_signature(p: &PiecewisePath, depth: usize, steps_per_segment: usize) -> TruncatedTensor {
        let fine = p.subdivide(steps_per_segment);
        let d = p.dim();
        let mut running = TruncatedTensor::unit(d, depth);
        for inc in fine.increments() {
            for k in (1..=depth).rev() {
                let prev = running.level(k - 1).to_vec();
                let cur = running.level_mut(k);
                for (r, pv) in prev.iter().enumerate() {
                    for c in 0..d {
                        cur[r * d + c] += pv * inc[c];
                    }
                }
            }
        }
        running
    }

    #[test]
    fn l_shaped_path_matches_riemann_oracle() {
        let p = path(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let s = p.signature(2);
        assert_eq!(s.level(1), &[1.0, 1.0]);
        assert_eq!(s.level(2), &[0.5, 1.0, 0.0, 0.5]);
        let oracle = riemann_signature(&p, 2, 20_000);
        for (x, y) in s.level(2).iter().zip(oracle.level(2)) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn concat_joins_and_satisfies_chen() {
        let a = path(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = path(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let l = a.concat(&b).unwrap();
        assert_eq!(l, path(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]]));
        let chen = a.signature(3).product(&b.signature(3)).unwrap();
        assert!(max_diff(&l.signature(3), &chen) < 1e-14);

        let end = path(&[&[1.0, 1.0]]);
        assert_eq!(l.concat(&end).unwrap(), l);
        let far = path(&[&[2.0, 1.0], &[3.0, 3.0]]);
        assert!(matches!(l.concat(&far), Err(Error::EndpointMismatch { .. })));
    }

    #[test]
    fn concat_shifts_timestamps() {
        let a = PiecewisePath::with_times(vec![vec![0.0], vec![1.0]], vec![0.0, 2.0]).unwrap();
        let b = PiecewisePath::with_times(vec![vec![1.0], vec![3.0]], vec![5.0, 6.0]).unwrap();
        assert_eq!(a.concat(&b).unwrap().times().unwrap(), &[0.0, 2.0, 3.0]);
    }

    #[test]
    fn incremental_updates_match_one_shot() {
        let p = path(&[&[0.0, 0.0], &[1.0, 0.5], &[0.2, 2.0], &[-1.0, 1.0], &[0.3, -0.4]]);
        let mut s = TruncatedTensor::unit(2, 4);
        for i in 0..p.len() - 1 {
            s = update_signature(&s, &p.slice(i..i + 2).unwrap(), 4).unwrap();
        }
        assert!(max_diff(&s, &p.signature(4)) < 1e-12);
        let constant = path(&[&[0.3, -0.4], &[0.3, -0.4]]);
        assert_eq!(update_signature(&s, &constant, 4).unwrap(), s);
        assert!(update_signature(&s, &constant, 3).is_err());
    }

    #[test]
    fn time_augmentation() {
        let p = PiecewisePath::from_scalars(&[2.0, 2.0]).unwrap();
        assert_eq!(p.time_augment().points(), &[vec![0.0, 2.0], vec![1.0, 2.0]]);

        let fast = PiecewisePath::with_times(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let slow = PiecewisePath::with_times(vec![vec![0.0], vec![1.0]], vec![0.0, 3.0]).unwrap();
        assert_eq!(fast.signature(3), slow.signature(3));
        assert_ne!(fast.time_augment().signature(3), slow.time_augment().signature(3));
        assert_eq!(slow.time_augment().signature(1).level(1), &[3.0, 1.0]);
    }

    #[test]
    fn subdivide_preserves_image_and_signature() {
        let p = path(&[&[0.0, 0.0], &[1.0, 2.0], &[3.0, -1.0]]);
        assert_eq!(p.subdivide(1), p);
        let q = p.subdivide(7);
        assert_eq!(q.len(), (p.len() - 1) * 7 + 1);
        assert!(max_diff(&q.signature(5), &p.signature(5)) < 1e-10);
    }

    #[test]
    fn projection_and_suffix() {
        let p = PiecewisePath::new(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(p.project(&[0.5, 1.0]), (0, 0.25));
        assert_eq!(p.project(&[3.0, 1.0]), (1, 0.5));
        assert_eq!(p.suffix_from(0, 0.25), vec![vec![0.5, 0.0], vec![2.0, 0.0], vec![2.0, 2.0]]);
        assert_eq!(p.suffix_from(1, 1.0), vec![vec![2.0, 2.0]]);
        let (i, f) = p.project(&[5.0, 5.0]);
        assert_eq!(p.suffix_from(i, f), vec![vec![2.0, 2.0]]);
        assert_eq!(PiecewisePath::from_scalars(&[1.0]).unwrap().project(&[3.0]), (0, 0.0));
    }

    #[test]
    fn nearest_node_prefers_lowest_index() {
        let p = path(&[&[0.0], &[2.0], &[1.0], &[0.0]]);
        assert_eq!(p.nearest_node(&[0.1]), 0);
        assert_eq!(p.nearest_node(&[1.5]), 1);
    }

    #[test]
    fn rejects_malformed_paths() {
        assert!(PiecewisePath::new(vec![]).is_err());
        assert!(PiecewisePath::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PiecewisePath::with_times(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).is_err());
        assert!(PiecewisePath::new(vec![vec![f64::NAN]]).is_err());
    }
}
