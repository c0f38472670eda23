//! Monte Carlo simulation of regime-switching capacity reflected at the
//! regime-dependent investment barrier.
//!
//! The state is propagated in `z = ln X`. Regime switches happen at exact
//! exponential event times (steps are split there) and trigger a lump-sum
//! jump up to the new barrier when capacity sits below it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{ModelParams, Regime};
use crate::stationary::StationaryLaw;

/// Coefficients driving the simulated process; decoupled from
/// [`ModelParams`] so degenerate limits (no noise, no switching) can be run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dynamics {
    pub delta: f64,
    pub sigma: [f64; 2],
    pub p: [f64; 2],
}

impl From<&ModelParams> for Dynamics {
    fn from(p: &ModelParams) -> Self {
        Dynamics {
            delta: p.delta,
            sigma: [p.regimes[0].sigma, p.regimes[1].sigma],
            p: [p.regimes[0].p, p.regimes[1].p],
        }
    }
}

/// Discretisation of the barrier constraint within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Reflection {
    /// Samples the increment jointly with its running minimum (Brownian
    /// bridge), which reproduces the reflected transition law exactly.
    #[default]
    Exact,
    /// `z <- max(z, b)` at grid times only.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Fraction of the horizon discarded before collecting statistics.
    pub burn_in: f64,
    pub barriers: [f64; 2],
    pub x0: f64,
    pub i0: Regime,
    pub reflection: Reflection,
    /// Keep a post-burn-in sample for the empirical law every this many
    /// steps (0 disables sampling).
    pub sample_every: usize,
    /// Record a trajectory point every this many steps for the first
    /// `trajectories` paths.
    pub record_every: usize,
    pub trajectories: usize,
}

impl SimConfig {
    pub fn new(barriers: [f64; 2]) -> Self {
        SimConfig {
            dt: 1e-2,
            horizon: 1e4,
            n_paths: 100,
            seed: 0,
            burn_in: 0.2,
            barriers,
            x0: barriers[0].max(barriers[1]),
            i0: Regime::One,
            reflection: Reflection::Exact,
            sample_every: 100,
            record_every: 100,
            trajectories: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, value: f64| Err(Error::Domain { what, value });
        if !(self.dt > 0.0) {
            return bad("dt", self.dt);
        }
        if !(self.horizon > 0.0) {
            return bad("horizon", self.horizon);
        }
        if !(self.burn_in >= 0.0 && self.burn_in < 1.0) {
            return Err(Error::Config(format!("burn_in {} outside [0,1)", self.burn_in)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if !(self.x0 > 0.0) {
            return bad("x0", self.x0);
        }
        for &a in &self.barriers {
            if !(a > 0.0) {
                return bad("barrier", a);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajPoint {
    pub t: f64,
    pub x: f64,
    pub regime: Regime,
    pub invested: f64,
}

/// Per-path accumulators.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PathAccum {
    pub count: [u64; 2],
    pub sum_x: [f64; 2],
    pub sum_x2: [f64; 2],
    pub corridor_count: u64,
    pub corridor_x: f64,
    /// Smallest recorded `z - b`.
    pub min_margin: f64,
    pub invested: f64,
    pub switches: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathStats {
    pub paths: Vec<PathAccum>,
    /// Post-burn-in samples `(x, regime)` in path order.
    #[serde(skip)]
    pub samples: Vec<(f64, Regime)>,
    pub trajectories: Vec<Vec<TrajPoint>>,
    pub barriers: [f64; 2],
}

impl PathStats {
    fn total(&self) -> PathAccum {
        let mut t = PathAccum {
            min_margin: f64::INFINITY,
            ..Default::default()
        };
        for p in &self.paths {
            for i in 0..2 {
                t.count[i] += p.count[i];
                t.sum_x[i] += p.sum_x[i];
                t.sum_x2[i] += p.sum_x2[i];
            }
            t.corridor_count += p.corridor_count;
            t.corridor_x += p.corridor_x;
            t.min_margin = t.min_margin.min(p.min_margin);
            t.invested += p.invested;
            t.switches += p.switches;
        }
        t
    }

    pub fn n_records(&self) -> u64 {
        let t = self.total();
        t.count[0] + t.count[1]
    }

    /// Fraction of post-burn-in time spent in each regime.
    pub fn occupation(&self) -> [f64; 2] {
        let t = self.total();
        let n = (t.count[0] + t.count[1]) as f64;
        [t.count[0] as f64 / n, t.count[1] as f64 / n]
    }

    /// Long-run time average of capacity given the regime.
    pub fn conditional_means(&self) -> [f64; 2] {
        let t = self.total();
        [t.sum_x[0] / t.count[0] as f64, t.sum_x[1] / t.count[1] as f64]
    }

    /// Standard errors of [`Self::conditional_means`] from across-path
    /// variation (each path is one batch).
    pub fn conditional_mean_stderr(&self) -> [f64; 2] {
        let means = self.conditional_means();
        let mut out = [f64::NAN; 2];
        for i in 0..2 {
            let vals: Vec<f64> = self
                .paths
                .iter()
                .filter(|p| p.count[i] > 0)
                .map(|p| p.sum_x[i] / p.count[i] as f64)
                .collect();
            let n = vals.len() as f64;
            if n > 1.0 {
                let var = vals.iter().map(|v| (v - means[i]).powi(2)).sum::<f64>() / (n - 1.0);
                out[i] = (var / n).sqrt();
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        let t = self.total();
        (t.sum_x[0] + t.sum_x[1]) / (t.count[0] + t.count[1]) as f64
    }

    pub fn corridor_probability(&self) -> f64 {
        let t = self.total();
        t.corridor_count as f64 / (t.count[0] + t.count[1]) as f64
    }

    pub fn corridor_share(&self) -> f64 {
        let t = self.total();
        t.corridor_x / (t.sum_x[0] + t.sum_x[1])
    }

    /// Largest recorded undershoot of the barrier in log units (0 when the
    /// constraint always held).
    pub fn max_reflection_violation(&self) -> f64 {
        (-self.total().min_margin).max(0.0)
    }

    /// Sorted sample capacities for regime `i`, or all regimes.
    pub fn sorted_samples(&self, i: Option<Regime>) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| i.is_none_or(|r| r == s.1))
            .map(|s| s.0)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Kolmogorov–Smirnov distance between the empirical marginal law of
    /// the samples and `law`.
    pub fn ks_distance(&self, law: &StationaryLaw) -> f64 {
        ks_against(&self.sorted_samples(None), |x| law.marginal_cdf(x))
    }

    /// Largest gap between the empirical joint CDF `P(X <= x, regime = i)`
    /// and the closed form, over both regimes.
    pub fn joint_ks_distance(&self, law: &StationaryLaw) -> f64 {
        let n = self.samples.len() as f64;
        Regime::BOTH
            .iter()
            .map(|&i| {
                let xs = self.sorted_samples(Some(i));
                let mut worst: f64 = 0.0;
                for (k, &x) in xs.iter().enumerate() {
                    let f = law.cdf(x, i);
                    worst = worst.max((k as f64 / n - f).abs()).max(((k + 1) as f64 / n - f).abs());
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

/// `sup |F_n - F|` for sorted samples.
pub fn ks_against(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((k as f64 / n - f).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    worst
}

struct PathOut {
    acc: PathAccum,
    samples: Vec<(f64, Regime)>,
    traj: Vec<TrajPoint>,
}

struct Walker<'a> {
    dyn_: &'a Dynamics,
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    b: [f64; 2],
    z: f64,
    i: usize,
    clock: f64,
    invested: f64,
    switches: u64,
}

impl Walker<'_> {
    fn draw_clock(&mut self) -> f64 {
        let p = self.dyn_.p[self.i];
        if p > 0.0 {
            let e: f64 = self.rng.sample(Exp1);
            e / p
        } else {
            f64::INFINITY
        }
    }

    /// Lump-sum jump to the current barrier.
    fn catch_up(&mut self) {
        let b = self.b[self.i];
        if self.z < b {
            self.invested += b.exp() - self.z.exp();
            self.z = b;
        }
    }

    fn advance(&mut self, h: f64) {
        let s = self.dyn_.sigma[self.i];
        let mu = -(self.dyn_.delta + 0.5 * s * s);
        let n: f64 = self.rng.sample(StandardNormal);
        let w = mu * h + s * h.sqrt() * n;
        let b = self.b[self.i];
        match self.cfg.reflection {
            Reflection::Exact => {
                let u: f64 = 1.0 - self.rng.random::<f64>();
                let m = 0.5 * (w - (w * w - 2.0 * s * s * h * u.ln()).sqrt());
                let push = b - self.z - m;
                if push > 0.0 {
                    self.invested += b.exp() * push;
                    self.z = self.z + w + push;
                } else {
                    self.z += w;
                }
            }
            Reflection::Projection => {
                self.z += w;
                if self.z < b {
                    self.invested += b.exp() * (b - self.z);
                    self.z = b;
                }
            }
        }
    }

    /// One grid step with exact switching inside it.
    fn step(&mut self) {
        let mut left = self.cfg.dt;
        while self.clock < left {
            let h = self.clock;
            if h > 0.0 {
                self.advance(h);
            }
            left -= h;
            self.i = 1 - self.i;
            self.switches += 1;
            self.catch_up();
            self.clock = self.draw_clock();
        }
        self.advance(left);
        self.clock -= left;
    }
}

fn run_path(dyn_: &Dynamics, cfg: &SimConfig, path: usize) -> PathOut {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);
    let mut w = Walker {
        dyn_,
        cfg,
        rng,
        b: [cfg.barriers[0].ln(), cfg.barriers[1].ln()],
        z: cfg.x0.ln(),
        i: cfg.i0.index(),
        clock: 0.0,
        invested: 0.0,
        switches: 0,
    };
    w.clock = w.draw_clock();
    w.catch_up();

    let n_steps = (cfg.horizon / cfg.dt).round() as usize;
    let burn = (cfg.burn_in * n_steps as f64).round() as usize;
    let (lo, hi) = (
        cfg.barriers[0].min(cfg.barriers[1]),
        cfg.barriers[0].max(cfg.barriers[1]),
    );
    let mut acc = PathAccum {
        min_margin: f64::INFINITY,
        ..Default::default()
    };
    let mut samples = Vec::new();
    if let Some(n) = (n_steps - burn).checked_div(cfg.sample_every) {
        samples.reserve(n + 1);
    }
    let mut traj = Vec::new();
    let keep_traj = path < cfg.trajectories && cfg.record_every > 0;
    if keep_traj {
        traj.push(TrajPoint {
            t: 0.0,
            x: w.z.exp(),
            regime: Regime::from_index(w.i),
            invested: w.invested,
        });
    }
    for k in 1..=n_steps {
        w.step();
        acc.min_margin = acc.min_margin.min(w.z - w.b[w.i]);
        let x = w.z.exp();
        if keep_traj && k % cfg.record_every == 0 {
            traj.push(TrajPoint {
                t: k as f64 * cfg.dt,
                x,
                regime: Regime::from_index(w.i),
                invested: w.invested,
            });
        }
        if k <= burn {
            continue;
        }
        acc.count[w.i] += 1;
        acc.sum_x[w.i] += x;
        acc.sum_x2[w.i] += x * x;
        if x > lo && x < hi {
            acc.corridor_count += 1;
            acc.corridor_x += x;
        }
        if cfg.sample_every > 0 && (k - burn).is_multiple_of(cfg.sample_every) {
            samples.push((x, Regime::from_index(w.i)));
        }
    }
    acc.invested = w.invested;
    acc.switches = w.switches;
    PathOut { acc, samples, traj }
}

/// Simulates `cfg.n_paths` independent paths. Results are bit-identical for
/// a given seed regardless of `exec`.
pub fn simulate(dynamics: &Dynamics, cfg: &SimConfig, exec: Execution) -> Result<PathStats> {
    cfg.validate()?;
    for (k, &s) in dynamics.sigma.iter().enumerate() {
        if !(s >= 0.0) || !(dynamics.p[k] >= 0.0) {
            return Err(Error::Config("negative volatility or intensity".into()));
        }
    }
    let outs = exec.map_range(cfg.n_paths, |k| run_path(dynamics, cfg, k));
    let mut stats = PathStats {
        paths: Vec::with_capacity(outs.len()),
        samples: Vec::with_capacity(outs.iter().map(|o| o.samples.len()).sum()),
        trajectories: Vec::new(),
        barriers: cfg.barriers,
    };
    for o in outs {
        stats.paths.push(o.acc);
        stats.samples.extend(o.samples);
        if !o.traj.is_empty() {
            stats.trajectories.push(o.traj);
        }
    }
    Ok(stats)
}

pub fn simulate_params(params: &ModelParams, cfg: &SimConfig, exec: Execution) -> Result<PathStats> {
    simulate(&Dynamics::from(params), cfg, exec)
}
