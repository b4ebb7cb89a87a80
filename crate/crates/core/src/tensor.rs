//! Dense truncated tensor algebra `T^m(R^d)`.
//!
//! A [`TruncatedTensor`] stores levels `0..=depth`; level `k` is a flat,
//! row-major block of `dim^k` coefficients where the multi-index
//! `(i_1, .., i_k)` lives at offset `sum_j i_j * dim^(k - j)` (leftmost index
//! most significant). Level 0 is a single scalar and is stored explicitly so
//! that addition and scaling stay closed; signature constructors always set
//! it to exactly 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of coefficients in the top level.
pub const MAX_LEVEL_LEN: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor", into = "RawTensor")]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TryFrom<RawTensor> for TruncatedTensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        TruncatedTensor::from_levels(raw.dim, raw.depth, raw.levels)
    }
}

impl From<TruncatedTensor> for RawTensor {
    fn from(t: TruncatedTensor) -> Self {
        RawTensor {
            dim: t.dim,
            depth: t.depth,
            levels: t.levels,
        }
    }
}

fn level_len(dim: usize, k: usize) -> usize {
    dim.checked_pow(k as u32)
        .filter(|&n| n <= MAX_LEVEL_LEN)
        .unwrap_or_else(|| panic!("tensor level {k} of dimension {dim} exceeds {MAX_LEVEL_LEN} entries"))
}

impl TruncatedTensor {
    /// The zero tensor (every level, including level 0, is zero).
    pub fn zero(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1, "tensor dimension must be positive");
        let levels = (0..=depth).map(|k| vec![0.0; level_len(dim, k)]).collect();
        TruncatedTensor { dim, depth, levels }
    }

    /// The algebra unit `(1, 0, 0, ..)`.
    pub fn unit(dim: usize, depth: usize) -> Self {
        let mut t = Self::zero(dim, depth);
        t.levels[0][0] = 1.0;
        t
    }

    /// Builds a tensor from explicit level blocks, validating their shapes and
    /// finiteness.
    pub fn from_levels(dim: usize, depth: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("tensor dimension must be positive".into()));
        }
        if levels.len() != depth + 1 {
            return Err(Error::DepthMismatch {
                expected: depth + 1,
                found: levels.len(),
            });
        }
        for (k, block) in levels.iter().enumerate() {
            let want = dim
                .checked_pow(k as u32)
                .filter(|&n| n <= MAX_LEVEL_LEN)
                .ok_or_else(|| Error::InvalidInput(format!("level {k} too large")))?;
            if block.len() != want {
                return Err(Error::InvalidInput(format!(
                    "level {k} has {} entries, expected {want}",
                    block.len()
                )));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("level {k} of tensor")));
            }
        }
        Ok(TruncatedTensor { dim, depth, levels })
    }

    /// Rebuilds a tensor from the flat coefficient vector produced by
    /// [`TruncatedTensor::flatten`].
    pub fn from_flat(dim: usize, depth: usize, flat: &[f64]) -> Result<Self> {
        let mut levels = Vec::with_capacity(depth + 1);
        let mut offset = 0;
        for k in 0..=depth {
            let n = level_len(dim, k);
            let block = flat.get(offset..offset + n).ok_or_else(|| {
                Error::InvalidInput(format!("flat vector too short for depth {depth}"))
            })?;
            levels.push(block.to_vec());
            offset += n;
        }
        if offset != flat.len() {
            return Err(Error::InvalidInput(format!(
                "flat vector has {} entries, expected {offset}",
                flat.len()
            )));
        }
        Self::from_levels(dim, depth, levels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    /// Level-0 coefficient.
    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    /// Total number of stored coefficients, level 0 included.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major offset of a multi-index inside its level block.
    pub fn offset(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &i| {
            assert!(i < self.dim, "axis {i} out of range for dimension {}", self.dim);
            acc * self.dim + i
        })
    }

    /// Coefficient addressed by a 0-based multi-index; the index length selects
    /// the level.
    pub fn coeff(&self, index: &[usize]) -> f64 {
        self.levels[index.len()][self.offset(index)]
    }

    /// All coefficients concatenated in ascending level order.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(|v| v.is_finite())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.depth != other.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: other.depth,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels,
        })
    }

    /// Multiplies every coefficient, level 0 included, by `lambda`.
    pub fn scale(&self, lambda: f64) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|block| block.iter().map(|v| lambda * v).collect())
            .collect();
        TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels,
        }
    }

    /// Truncated tensor product: level `k` of the result is
    /// `sum_{l=0..=k} a_l (x) b_{k-l}`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.dim, self.depth);
        for k in 0..=self.depth {
            let target = &mut out.levels[k];
            for l in 0..=k {
                let a = &self.levels[l];
                let b = &other.levels[k - l];
                let width = b.len();
                for (i, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let row = &mut target[i * width..(i + 1) * width];
                    for (slot, &bv) in row.iter_mut().zip(b) {
                        *slot += av * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Right-multiplies in place by the exponential of a single increment,
    /// i.e. `self (x) exp(v)`. Equivalent to
    /// `self.product(&segment_exponential(v, depth))` without the temporary.
    pub fn mul_segment(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        // Horner form: for k descending, a_k <- a_k + (a_{k-1} + (a_{k-2} + ..)/2 (x) v)/1 ...
        // Computed as a_k += sum_{j>=1} a_{k-j} (x) v^{(x)j} / j!, highest k first so
        // lower levels are still the old values when read.
        let d = self.dim;
        for k in (1..=self.depth).rev() {
            // acc holds (a_{k-j} (x) v^{(x)j}) / j! for growing j, built up from
            // j = k down to j = 1 via the recursion
            //   t_0 = a_0, t_i = a_i + t_{i-1} (x) v / (k - i + 1)   (i = 1..k-1)
            //   a_k += t_{k-1} (x) v
            let mut acc = self.levels[0].clone();
            for i in 1..k {
                let factor = 1.0 / (k - i + 1) as f64;
                let mut next = self.levels[i].clone();
                for (r, &av) in acc.iter().enumerate() {
                    let scaled = av * factor;
                    for (c, &vc) in v.iter().enumerate() {
                        next[r * d + c] += scaled * vc;
                    }
                }
                acc = next;
            }
            let top = &mut self.levels[k];
            for (r, &av) in acc.iter().enumerate() {
                for (c, &vc) in v.iter().enumerate() {
                    top[r * d + c] += av * vc;
                }
            }
        }
        Ok(())
    }

    /// Sum over levels of the Euclidean dot product of matching blocks.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum())
    }

    /// Squared Euclidean norm of the flattened coefficient vector.
    pub fn norm_squared(&self) -> f64 {
        self.levels.iter().flatten().map(|v| v * v).sum()
    }

    /// Squared distance `<A - B, A - B>`, computed without a temporary.
    pub fn distance_squared(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum())
    }

    /// Dilation `alpha <> A = (a_0, alpha a_1, alpha^2 a_2, ..)`.
    pub fn dilate(&self, alpha: f64) -> Self {
        let mut factor = 1.0;
        let levels = self
            .levels
            .iter()
            .map(|block| {
                let f = factor;
                factor *= alpha;
                block.iter().map(|v| f * v).collect()
            })
            .collect();
        TruncatedTensor {
            dim: self.dim,
            depth: self.depth,
            levels,
        }
    }

    /// Signature of the straight segment with increment `v`: level `k` is
    /// `v^(x)k / k!`.
    pub fn segment_exponential(v: &[f64], depth: usize) -> Self {
        let dim = v.len();
        let mut out = Self::unit(dim, depth);
        for k in 1..=depth {
            let inv_k = 1.0 / k as f64;
            let (lower, upper) = out.levels.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for (r, &pv) in prev.iter().enumerate() {
                for (c, &vc) in v.iter().enumerate() {
                    cur[r * dim + c] = pv * vc * inv_k;
                }
            }
        }
        out
    }

    /// Projection onto a lower truncation depth.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: depth,
            });
        }
        Ok(TruncatedTensor {
            dim: self.dim,
            depth,
            levels: self.levels[..=depth].to_vec(),
        })
    }
}
