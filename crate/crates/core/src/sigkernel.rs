//! Signature kernel `k(X, Y) = <S(X), S(Y)>` of two piecewise-linear paths.
//!
//! The kernel is the value at the far corner of the Goursat problem
//! `d^2 u / ds dt = delta(s, t) u`, `u = 1` on both axes, where `delta` is the
//! mixed second increment of the static-kernel Gram surface. The PDE is
//! solved with the explicit second-order scheme
//!
//! ```text
//! u[i+1][j+1] = (u[i+1][j] + u[i][j+1]) (1 + delta/2 + delta^2/12) - u[i][j] (1 - delta^2/12)
//! ```
//!
//! on a grid where every input cell is split `2^dyadic_order` times per axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{squared_distance, PiecewisePath};

/// Default cap on grid cells along either axis.
pub const DEFAULT_MAX_AXIS_CELLS: usize = 1 << 14;
const MAX_DYADIC_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StaticKernel {
    Linear,
    /// `exp(-|x - y|^2 / (2 bandwidth^2))`
    Rbf { bandwidth: f64 },
}

impl StaticKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            StaticKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            StaticKernel::Rbf { bandwidth } => (-squared_distance(x, y) / (2.0 * bandwidth * bandwidth)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureKernelConfig {
    pub static_kernel: StaticKernel,
    pub dyadic_order: u32,
    #[serde(default = "default_max_axis_cells")]
    pub max_axis_cells: usize,
}

fn default_max_axis_cells() -> usize {
    DEFAULT_MAX_AXIS_CELLS
}

impl SignatureKernelConfig {
    pub fn linear(dyadic_order: u32) -> Self {
        SignatureKernelConfig {
            static_kernel: StaticKernel::Linear,
            dyadic_order,
            max_axis_cells: DEFAULT_MAX_AXIS_CELLS,
        }
    }

    pub fn rbf(bandwidth: f64, dyadic_order: u32) -> Self {
        SignatureKernelConfig {
            static_kernel: StaticKernel::Rbf { bandwidth },
            dyadic_order,
            max_axis_cells: DEFAULT_MAX_AXIS_CELLS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StaticKernel::Rbf { bandwidth } = self.static_kernel {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::InvalidInput(format!("rbf bandwidth must be positive, got {bandwidth}")));
            }
        }
        if self.dyadic_order > MAX_DYADIC_ORDER {
            return Err(Error::InvalidInput(format!(
                "dyadic order {} exceeds {MAX_DYADIC_ORDER}",
                self.dyadic_order
            )));
        }
        Ok(())
    }
}

/// Static-kernel evaluations between every node of `x` (rows) and `y` (columns).
pub fn static_gram(x: &PiecewisePath, y: &PiecewisePath, cfg: &SignatureKernelConfig) -> Result<Vec<Vec<f64>>> {
    check_dims(x, y)?;
    Ok(x.points()
        .iter()
        .map(|a| y.points().iter().map(|b| cfg.static_kernel.eval(a, b)).collect())
        .collect())
}

fn check_dims(x: &PiecewisePath, y: &PiecewisePath) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// PDE signature kernel.
pub fn kernel(x: &PiecewisePath, y: &PiecewisePath, cfg: &SignatureKernelConfig) -> Result<f64> {
    cfg.validate()?;
    check_dims(x, y)?;
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Ok(1.0);
    }
    let refine = 1usize << cfg.dyadic_order;
    let rows = (m - 1) * refine;
    let cols = (n - 1) * refine;
    if rows > cfg.max_axis_cells || cols > cfg.max_axis_cells {
        return Err(Error::GridOverflow {
            rows,
            cols,
            cap: cfg.max_axis_cells,
        });
    }

    let gram = static_gram(x, y, cfg)?;
    let scale = 1.0 / (refine * refine) as f64;
    // increments per coarse cell, already divided among the refined subcells
    let incs: Vec<Vec<f64>> = (0..m - 1)
        .map(|i| {
            (0..n - 1)
                .map(|j| (gram[i + 1][j + 1] - gram[i + 1][j] - gram[i][j + 1] + gram[i][j]) * scale)
                .collect()
        })
        .collect();

    let mut prev = vec![1.0; cols + 1];
    let mut cur = vec![1.0; cols + 1];
    for i in 0..rows {
        let row_incs = &incs[i / refine];
        cur[0] = 1.0;
        for j in 0..cols {
            let delta = row_incs[j / refine];
            let d2 = delta * delta / 12.0;
            cur[j + 1] = (cur[j] + prev[j + 1]) * (1.0 + 0.5 * delta + d2) - prev[j] * (1.0 - d2);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[cols])
}

/// Squared signature distance through the kernel trick, clamped at zero.
pub fn distance2(x: &PiecewisePath, y: &PiecewisePath, cfg: &SignatureKernelConfig) -> Result<f64> {
    let xx = kernel(x, x, cfg)?;
    let xy = kernel(x, y, cfg)?;
    let yy = kernel(y, y, cfg)?;
    Ok((xx - 2.0 * xy + yy).max(0.0))
}

/// Exact inner product of the depth-`depth` truncated signatures.
pub fn truncated_inner(x: &PiecewisePath, y: &PiecewisePath, depth: usize) -> Result<f64> {
    check_dims(x, y)?;
    x.signature(depth).inner(&y.signature(depth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(points: &[&[f64]]) -> PiecewisePath {
        PiecewisePath::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    /// sum_k c^k / (k!)^2, the kernel of two straight segments with <a, b> = c.
    fn segment_series(c: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= c / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn static_gram_values() {
        let x = path(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let g = static_gram(&x, &x, &SignatureKernelConfig::linear(0)).unwrap();
        assert_eq!(g, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = path(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let g = static_gram(&x, &y, &SignatureKernelConfig::rbf(0.5, 0)).unwrap();
        assert_eq!(g[0][0], 1.0);
        assert!((g[0][1] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((g[0][1] - 0.1353).abs() < 1e-4);
        assert!(static_gram(&x, &path(&[&[1.0]]), &SignatureKernelConfig::linear(0)).is_err());
    }

    #[test]
    fn constant_path_kernel_is_one() {
        let c = path(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let y = path(&[&[0.0, 0.0], &[2.0, -1.0], &[3.0, 0.5]]);
        assert_eq!(kernel(&c, &y, &SignatureKernelConfig::linear(3)).unwrap(), 1.0);
    }

    #[test]
    fn single_segments_match_series() {
        let a = path(&[&[0.0, 0.0], &[0.8, -0.3]]);
        let b = path(&[&[1.0, 1.0], &[1.5, 0.6]]);
        let c = 0.8 * 0.5 + (-0.3) * (-0.4);
        let exact = segment_series(c);
        let errors: Vec<f64> = (0..=5)
            .map(|order| (kernel(&a, &b, &SignatureKernelConfig::linear(order)).unwrap() - exact).abs())
            .collect();
        assert!(errors[4] < 1e-4, "{errors:?}");
        assert!(errors[2..].windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn self_kernel_at_least_one() {
        let x = path(&[&[0.0, 0.0], &[0.3, 0.9], &[-0.5, 0.2], &[0.1, -0.4]]);
        assert!(kernel(&x, &x, &SignatureKernelConfig::linear(2)).unwrap() >= 1.0);
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_diagonal() {
        let cfg = SignatureKernelConfig::rbf(0.5, 2);
        let x = path(&[&[0.0, 0.0], &[0.3, 0.9], &[-0.5, 0.2]]);
        let y = path(&[&[0.1, 0.0], &[0.4, -0.2], &[0.7, 0.1]]);
        assert_eq!(distance2(&x, &x, &cfg).unwrap(), 0.0);
        let dxy = distance2(&x, &y, &cfg).unwrap();
        let dyx = distance2(&y, &x, &cfg).unwrap();
        assert!((dxy - dyx).abs() < 1e-12);
        assert!(dxy > 0.0);
    }

    #[test]
    fn truncated_inner_depth_one() {
        let a = path(&[&[0.0, 0.0], &[1.0, 2.0]]);
        let b = path(&[&[0.0, 0.0], &[-0.5, 1.5]]);
        assert!((truncated_inner(&a, &b, 1).unwrap() - (1.0 + 2.5)).abs() < 1e-15);
    }

    #[test]
    fn grid_cap_and_config_validation() {
        let x = PiecewisePath::from_scalars(&(0..200).map(f64::from).collect::<Vec<_>>()).unwrap();
        let mut cfg = SignatureKernelConfig::linear(6);
        cfg.max_axis_cells = 1000;
        assert!(matches!(kernel(&x, &x, &cfg), Err(Error::GridOverflow { .. })));
        assert!(kernel(&x, &x, &SignatureKernelConfig::linear(7)).is_err());
        assert!(kernel(&x, &x, &SignatureKernelConfig::rbf(0.0, 1)).is_err());
    }
}
