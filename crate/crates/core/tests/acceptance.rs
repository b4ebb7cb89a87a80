//! One line per acceptance criterion. Red criteria are reported, not hidden;
//! set `SIGCTL_STRICT_ACCEPTANCE=1` to turn any red line into a failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sigctl::config::{preset, ExperimentConfig};
use sigctl::envs::mdp_observation_path;
use sigctl::experiments::{self, random_mdp};
use sigctl::sigdp::evaluate_stable;
use sigctl::sigkernel::{self, SignatureKernelConfig};
use sigctl::{PiecewisePath, Result, TruncatedTensor};

const TABLE_TOLERANCE: f64 = 0.01;
const CHEN_TOLERANCE: f64 = 0.01;
const BELLMAN_TOLERANCE: f64 = 1e-9;
const PERTURBATION_TOLERANCE: f64 = 0.01;
const MISSPECIFICATION_TOLERANCE: f64 = 0.05;
const CHEN_IDENTITY_TOLERANCE: f64 = 1e-10;
const SHIFT_TOLERANCE: f64 = 1e-10;
const REPARAMETERIZATION_TOLERANCE: f64 = 1e-8;
const STABLE_ROLLOUT_TOLERANCE: f64 = 1e-10;
const SHOELACE_TOLERANCE: f64 = 1e-9;
const KERNEL_TOLERANCE: f64 = 1e-4;
const KERNEL_PATHS: usize = 20;
const KERNEL_DYADIC_ORDER: u32 = 4;
const KERNEL_REFERENCE_DEPTH: usize = 12;
const INTEGRAL_FINAL_TOLERANCE: f64 = 0.02;
const TRACKING_DEVIATION_FRACTION: f64 = 0.05;
/// Mean deviation fraction of the bundled point-mass preset at seed 1234.
const POINTMASS_BASELINE_FRACTION: f64 = 0.0052;
const SIMILAR_COST_RATIO: f64 = 0.1;
const SIMILAR_DISPLACEMENT_TOLERANCE: f64 = 0.02;

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(id: usize, name: &str, budget: Duration, run: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(o) => (o.pass && elapsed <= budget, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id} {name}: {} ({detail}; {:.2}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn track_preset(name: &str) -> Result<experiments::TrackResult> {
    match preset(name)? {
        ExperimentConfig::Track(c) => experiments::track(&c),
        _ => unreachable!("{name} is a tracking preset"),
    }
}

fn max_gap(a: &TruncatedTensor, b: &TruncatedTensor) -> f64 {
    a.flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn random_path(rng: &mut ChaCha8Rng, dim: usize, nodes: usize) -> PiecewisePath {
    PiecewisePath::new(
        (0..nodes)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn stable_criterion() -> Result<Outcome> {
    let r = experiments::stable(&sigctl::config::StableConfig {
        depth: 2,
        observations: Default::default(),
    })?;
    let misses: Vec<String> = r
        .failures()
        .map(|c| format!("{} t={} s{} {:.3} vs {:.2}", c.table, c.t, c.state, c.computed, c.golden))
        .collect();
    let passed = r.checks.iter().filter(|c| c.deviation <= TABLE_TOLERANCE + 1e-9).count();
    Ok(Outcome {
        pass: misses.is_empty(),
        detail: format!("{passed}/{} entries within {TABLE_TOLERANCE}; misses: [{}]", r.checks.len(), misses.join(", ")),
    })
}

fn chen_criterion() -> Result<Outcome> {
    let cfg = match preset("chen_opt")? {
        ExperimentConfig::ChenOpt(c) => c,
        _ => unreachable!(),
    };
    let r = experiments::chen_opt(&cfg)?;
    let costs: Vec<String> = r.candidates.iter().map(|c| format!("s{}={:.3}", c.state, c.cost)).collect();
    Ok(Outcome {
        pass: (r.best.cost - 0.85).abs() <= CHEN_TOLERANCE,
        detail: format!("best s{} cost {:.4}, expected 0.85; {}", r.best.state, r.best.cost, costs.join(" ")),
    })
}

fn bellman_criterion() -> Result<Outcome> {
    let r = experiments::bellman(&sigctl::config::BellmanConfig {
        gamma: 1.0,
        observations: Default::default(),
        random_trials: 100,
        seed: 1234,
    })?;
    let gap = r.random_gap.max(r.example_gap);
    Ok(Outcome {
        pass: gap <= BELLMAN_TOLERANCE,
        detail: format!("max gap {gap:.2e} over {} random mdps and the example", r.trials),
    })
}

fn error_explosion_criterion() -> Result<Outcome> {
    let cfg = match preset("error_explosion")? {
        ExperimentConfig::ErrorExplosion(mut c) => {
            c.reconstruction = None;
            c
        }
        _ => unreachable!(),
    };
    let r = experiments::error_explosion(&cfg)?;
    Ok(Outcome {
        pass: (r.perturbation_error - 4.52).abs() <= PERTURBATION_TOLERANCE
            && (r.misspecification_error - 147.96).abs() <= MISSPECIFICATION_TOLERANCE,
        detail: format!(
            "coefficient perturbation {:.4}, dynamics misspecification {:.4}",
            r.perturbation_error, r.misspecification_error
        ),
    })
}

fn property_criterion() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut worst = [0.0f64; 8];
    let mut factorial_ok = true;
    for _ in 0..200 {
        let dim = rng.gen_range(1..=3);
        let n = rng.gen_range(3..=8);
        let p = random_path(&mut rng, dim, n);
        let s = p.signature(5);

        let k = rng.gen_range(1..n - 1);
        let chen = p.slice(0..k + 1)?.signature(5).product(&p.slice(k..n)?.signature(5))?;
        worst[0] = worst[0].max(max_gap(&chen, &s));

        let shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        worst[1] = worst[1].max(max_gap(&p.translate(&shift)?.signature(5), &s));
        worst[2] = worst[2].max(max_gap(&p.subdivide(rng.gen_range(2..5)).signature(5), &s));

        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s1 = PiecewisePath::from_scalars(&xs)?.signature(6);
        let dx = xs[n - 1] - xs[0];
        let mut term = 1.0;
        for k in 1..=6 {
            term *= dx / k as f64;
            worst[3] = worst[3].max((s1.level(k)[0] - term).abs());
        }

        let l = p.length();
        let mut bound = 1.0;
        for k in 1..=5 {
            bound *= l / k as f64;
            let norm = s.level(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            factorial_ok &= norm <= bound * (1.0 + 1e-12) + 1e-12;
        }

        let alpha = rng.gen_range(-3.0..3.0);
        worst[4] = worst[4].max(max_gap(&p.scale(alpha).signature(5), &s.dilate(alpha)));

        let m = rng.gen_range(1..5);
        worst[5] = worst[5].max(max_gap(&s.truncate(m)?, &p.signature(m)));

        let mut pts = random_path(&mut rng, 2, n).points().to_vec();
        pts.push(pts[0].clone());
        let area = PiecewisePath::new(pts.clone())?.signature(2);
        let levy = 0.5 * (area.coeff(&[0, 1]) - area.coeff(&[1, 0]));
        let shoelace: f64 = pts.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0;
        worst[6] = worst[6].max((levy - shoelace).abs());
    }
    for _ in 0..50 {
        let (mdp, policy) = random_mdp(&mut rng);
        let table = evaluate_stable(&mdp, &policy, 3)?;
        for t in 0..=mdp.horizon() {
            for x in 0..mdp.n_states() {
                let s = mdp_observation_path(&mdp, &policy, x, mdp.horizon() - t)?.signature(3);
                let scale = s.flatten().iter().fold(1.0f64, |a, v| a.max(v.abs()));
                worst[7] = worst[7].max(max_gap(table.get(t, x), &s) / scale);
            }
        }
    }
    let checks = [
        ("chen", worst[0], CHEN_IDENTITY_TOLERANCE),
        ("shift", worst[1], SHIFT_TOLERANCE),
        ("reparam", worst[2], REPARAMETERIZATION_TOLERANCE),
        ("1d", worst[3], 1e-10),
        ("dilation", worst[4], 1e-9),
        ("truncation", worst[5], 0.0),
        ("shoelace", worst[6], SHOELACE_TOLERANCE),
        ("stable-rollout", worst[7], STABLE_ROLLOUT_TOLERANCE),
    ];
    let detail: Vec<String> = checks.iter().map(|(n, w, _)| format!("{n} {w:.1e}")).collect();
    Ok(Outcome {
        pass: factorial_ok && checks.iter().all(|(_, w, tol)| w <= tol),
        detail: format!("{}, factorial bound {}", detail.join(", "), if factorial_ok { "holds" } else { "violated" }),
    })
}

fn kernel_criterion() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut errors = vec![0.0f64; KERNEL_DYADIC_ORDER as usize + 1];
    for _ in 0..KERNEL_PATHS {
        let mut pair = Vec::new();
        for _ in 0..2 {
            let n = rng.gen_range(3..=6);
            let p = random_path(&mut rng, 2, n);
            // 1-variation at most 2
            let target = rng.gen_range(0.5..2.0);
            pair.push(p.scale(target / p.length()));
        }
        let exact = sigkernel::truncated_inner(&pair[0], &pair[1], KERNEL_REFERENCE_DEPTH)?;
        for (order, e) in errors.iter_mut().enumerate() {
            let k = sigkernel::kernel(&pair[0], &pair[1], &SignatureKernelConfig::linear(order as u32))?;
            *e = e.max((k - exact).abs());
        }
    }
    let last = errors[KERNEL_DYADIC_ORDER as usize];
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let seq: Vec<String> = errors.iter().map(|e| format!("{e:.1e}")).collect();
    Ok(Outcome {
        pass: last <= KERNEL_TOLERANCE && decreasing,
        detail: format!(
            "max error by dyadic order 0..={KERNEL_DYADIC_ORDER}: [{}]{}",
            seq.join(", "),
            if decreasing { "" } else { ", not monotone" }
        ),
    })
}

fn integral_control_criterion() -> Result<Outcome> {
    let d1 = track_preset("springdamper_d1")?.episode.final_state;
    let d2 = track_preset("springdamper_d2")?.episode.final_state;
    let pos = |x: &[f64]| [x[0].abs(), x[2].abs()];
    let (p1, p2) = (pos(&d1.x), pos(&d2.x));
    let smaller = p2[0] < p1[0] && p2[1] < p1[1];
    let small = p2.iter().all(|v| *v < INTEGRAL_FINAL_TOLERANCE);
    let offset = p1.iter().any(|v| *v > INTEGRAL_FINAL_TOLERANCE);
    Ok(Outcome {
        pass: smaller && small && offset,
        detail: format!(
            "t={:.1}: depth-1 |p|=({:.4}, {:.4}), depth-2 |p|=({:.4}, {:.4})",
            d2.time, p1[0], p1[1], p2[0], p2[1]
        ),
    })
}

fn pointmass_criterion() -> Result<Outcome> {
    let r = track_preset("pointmass")?;
    let fraction = r.deviation.mean / r.reference_diameter;
    Ok(Outcome {
        pass: fraction < TRACKING_DEVIATION_FRACTION,
        detail: format!(
            "mean deviation {:.3} = {:.4} of diameter (baseline {POINTMASS_BASELINE_FRACTION}), arrived {} at t={:.1}",
            r.deviation.mean, fraction, r.episode.reached_end, r.episode.final_state.time
        ),
    })
}

fn similar_path_criterion() -> Result<Outcome> {
    let cfg = match preset("similar_path")? {
        ExperimentConfig::SimilarPath(c) => c,
        _ => unreachable!(),
    };
    let r = experiments::similar_path(&cfg)?;
    let ratio = r.final_cost / r.initial_cost;
    let disp = r.displacement_error();
    Ok(Outcome {
        pass: ratio < SIMILAR_COST_RATIO && disp <= SIMILAR_DISPLACEMENT_TOLERANCE,
        detail: format!("cost ratio {ratio:.2e}, displacement error {disp:.2e}"),
    })
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        line(1, "s-table reproduction", secs(1), stable_criterion),
        line(2, "chen optimality", secs(1), chen_criterion),
        line(3, "bellman reduction", secs(5), bellman_criterion),
        line(4, "error explosion", secs(1), error_explosion_criterion),
        line(5, "property suite", secs(60), property_criterion),
        line(6, "kernel convergence", secs(30), kernel_criterion),
        line(7, "integral-control effect", secs(300), integral_control_criterion),
        line(8, "point-mass tracking", secs(600), pointmass_criterion),
        line(9, "similar-path generation", secs(120), similar_path_criterion),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if std::env::var_os("SIGCTL_STRICT_ACCEPTANCE").is_some() && passed < results.len() {
        std::process::exit(1);
    }
}
