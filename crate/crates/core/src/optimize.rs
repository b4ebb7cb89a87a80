//! Deterministic optimizers shared by planning, terminal-path search, path
//! reconstruction and similar-path generation.
//!
//! Two methods are provided: an adaptive-moment (Adam) update driven by
//! central finite-difference gradients, and the cross-entropy method. Both
//! return the best point ever evaluated, so the reported value never exceeds
//! `f(x0)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    AdaptiveMomentFd {
        step_size: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_fd_step")]
        fd_step: f64,
    },
    CrossEntropy {
        population: usize,
        elites: usize,
        init_stddev: f64,
        #[serde(default)]
        stddev_floor: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_fd_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    #[serde(flatten)]
    pub method: Method,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
}

impl OptimizerSpec {
    /// Adam with finite-difference gradients and the usual constants.
    pub fn adam(step_size: f64, iterations: usize) -> Self {
        OptimizerSpec {
            method: Method::AdaptiveMomentFd {
                step_size,
                beta1: default_beta1(),
                beta2: default_beta2(),
                epsilon: default_epsilon(),
                fd_step: default_fd_step(),
            },
            iterations,
            seed: 0,
        }
    }

    pub fn cross_entropy(population: usize, elites: usize, init_stddev: f64, iterations: usize) -> Self {
        OptimizerSpec {
            method: Method::CrossEntropy {
                population,
                elites,
                init_stddev,
                stddev_floor: 0.0,
            },
            iterations,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::AdaptiveMomentFd {
                step_size, fd_step, ..
            } => {
                if !(fd_step > 0.0) || !step_size.is_finite() {
                    return Err(Error::InvalidInput("adam needs fd_step > 0 and a finite step size".into()));
                }
            }
            Method::CrossEntropy {
                population,
                elites,
                init_stddev,
                ..
            } => {
                if elites == 0 || population < elites {
                    return Err(Error::InvalidInput("cross-entropy needs population >= elites >= 1".into()));
                }
                if !(init_stddev >= 0.0) {
                    return Err(Error::InvalidInput("cross-entropy stddev must be non-negative".into()));
                }
            }
        }
        Ok(())
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value seen so far: entry 0 is `f(x0)`, then one entry per iteration.
    pub trace: Vec<f64>,
}

struct Best {
    x: Vec<f64>,
    value: f64,
}

impl Best {
    fn offer(&mut self, x: &[f64], value: f64) {
        if value.is_finite() && value < self.value {
            self.value = value;
            self.x.clear();
            self.x.extend_from_slice(x);
        }
    }
}

pub fn minimize<F>(f: F, x0: &[f64], spec: &OptimizerSpec) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("objective at the initial point is {f0}")));
    }
    let mut best = Best {
        x: x0.to_vec(),
        value: f0,
    };
    let mut trace = Vec::with_capacity(spec.iterations + 1);
    trace.push(f0);

    match spec.method {
        Method::AdaptiveMomentFd {
            step_size,
            beta1,
            beta2,
            epsilon,
            fd_step,
        } => {
            let mut adam = Adam::new(x0.len(), step_size, beta1, beta2, epsilon);
            let mut x = x0.to_vec();
            for it in 0..spec.iterations {
                if it > 0 {
                    best.offer(&x, f(&x));
                }
                let grad = central_difference_gradient(&f, &x, fd_step);
                adam.step(&mut x, &grad);
                if it + 1 == spec.iterations {
                    best.offer(&x, f(&x));
                }
                trace.push(best.value);
            }
        }
        Method::CrossEntropy {
            population,
            elites,
            init_stddev,
            stddev_floor,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let n = x0.len();
            let mut mean = x0.to_vec();
            let mut std = vec![init_stddev; n];
            let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(population);
            for _ in 0..spec.iterations {
                samples.clear();
                for _ in 0..population {
                    let x: Vec<f64> = mean
                        .iter()
                        .zip(&std)
                        .map(|(m, s)| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            m + s * z
                        })
                        .collect();
                    let v = f(&x);
                    best.offer(&x, v);
                    samples.push((if v.is_finite() { v } else { f64::INFINITY }, x));
                }
                // stable sort keeps sampling order among ties
                samples.sort_by(|a, b| a.0.total_cmp(&b.0));
                let elite = &samples[..elites];
                for j in 0..n {
                    let m = elite.iter().map(|(_, x)| x[j]).sum::<f64>() / elites as f64;
                    let var = elite.iter().map(|(_, x)| (x[j] - m).powi(2)).sum::<f64>() / elites as f64;
                    mean[j] = m;
                    std[j] = var.sqrt().max(stddev_floor);
                }
                trace.push(best.value);
            }
        }
    }

    Ok(Minimum {
        x: best.x,
        value: best.value,
        trace,
    })
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`. Components whose
/// probes are non-finite are reported as zero.
pub fn central_difference_gradient<F>(f: &F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            let g = (up - down) / (2.0 * h);
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
        .collect()
}

/// Adaptive-moment update state, usable with any gradient source.
#[derive(Debug, Clone)]
pub struct Adam {
    step_size: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, step_size: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            step_size,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn with_step_size(n: usize, step_size: f64) -> Self {
        Self::new(n, step_size, default_beta1(), default_beta2(), default_epsilon())
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            x[i] -= self.step_size * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
