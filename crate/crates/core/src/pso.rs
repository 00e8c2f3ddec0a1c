//! Mixed-integer particle swarm over (condenser supply setpoint, fan count).
//!
//! Particles are spread over the setpoint range within every fan stratum and
//! keep their fan count for life, so every stratum is searched for the whole
//! run. Only the continuous coordinate moves:
//!
//! ```text
//! V ← w·V + c1·r1·(Best_i − X) + c2·r2·(Best_all − X)
//! X ← X + V
//! ```
//!
//! with `r1 = r2 = 1` in deterministic mode and uniform draws otherwise.
//! `Best_all` is shared across strata, which pulls every stratum's particles
//! toward the best setpoint found anywhere. Positions are scored at the
//! nearest step of `resolution` (0.1 °F by default), the finest setpoint an
//! operator would enter, so the search and the grid oracle see the same
//! candidates.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::units::FAN_STAGES;
use crate::{math, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub n_particles_per_stratum: usize,
    pub n_iterations: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub t_cws_bounds: (f64, f64),
    pub fan_strata: Vec<u8>,
    pub seed: u64,
    /// Multiply the attraction terms by uniform draws (canonical PSO);
    /// `false` applies the update with unit multipliers.
    pub stochastic: bool,
    /// Improvement of the global best below which an iteration counts as
    /// converged in the trace.
    pub convergence_tolerance: f64,
    /// Velocity limit as a fraction of the bounds width.
    pub velocity_clamp_fraction: f64,
    /// Setpoint step the objective is evaluated on (`lo + k · resolution`);
    /// particles move continuously but are scored at the nearest step.
    /// Zero scores positions as they are.
    pub resolution: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles_per_stratum: 10,
            n_iterations: 50,
            w: 0.7,
            c1: 1.5,
            c2: 1.5,
            t_cws_bounds: (60.0, 90.0),
            fan_strata: FAN_STAGES.to_vec(),
            seed: 0,
            stochastic: true,
            convergence_tolerance: 1e-6,
            velocity_clamp_fraction: 0.25,
            resolution: 0.1,
        }
    }
}

impl SwarmConfig {
    pub fn deterministic() -> Self {
        Self {
            stochastic: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::Config(m));
        let (lo, hi) = self.t_cws_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("setpoint bounds ({lo}, {hi}) not ordered"));
        }
        if self.n_particles_per_stratum == 0 || self.n_iterations == 0 {
            return bad("particle and iteration counts must be positive".into());
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.w >= 0.0 && self.w < 1.0) {
            return bad(format!(
                "coefficients need c1, c2 ≥ 0 and 0 ≤ w < 1 (w={}, c1={}, c2={})",
                self.w, self.c1, self.c2
            ));
        }
        if self.fan_strata.is_empty() {
            return bad("no fan strata".into());
        }
        if !(self.velocity_clamp_fraction > 0.0) || !(self.convergence_tolerance >= 0.0) {
            return bad("velocity clamp must be positive and tolerance non-negative".into());
        }
        if !(self.resolution >= 0.0 && self.resolution.is_finite()) {
            return bad(format!("resolution {} must be finite and non-negative", self.resolution));
        }
        Ok(())
    }
}

/// An objective value with the part of it that is an infeasibility penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub penalty: f64,
}

impl From<f64> for Score {
    fn from(value: f64) -> Self {
        Score { value, penalty: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub t_cws: f64,
    pub n_fans: u8,
    /// Objective including any penalty.
    pub objective_value: f64,
    pub feasible: bool,
    pub penalty: f64,
}

impl Candidate {
    fn new(t_cws: f64, n_fans: u8, s: Score) -> Self {
        Candidate {
            t_cws,
            n_fans,
            objective_value: s.value,
            feasible: s.penalty <= 0.0,
            penalty: s.penalty.max(0.0),
        }
    }

    /// Better by value, then lower setpoint, then fewer fans.
    pub fn better_than(&self, other: &Candidate) -> bool {
        match self.objective_value.total_cmp(&other.objective_value) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.t_cws, self.n_fans) < (other.t_cws, other.n_fans),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Global best after initialization, then after each iteration.
    pub global_best: Vec<f64>,
    /// First iteration from which the global best never improved by more
    /// than the tolerance.
    pub converged_at: usize,
    pub evaluations: usize,
    /// Objective evaluations per fan stratum, in `fan_strata` order.
    pub evaluations_per_stratum: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub best: Candidate,
    pub trace: ConvergenceTrace,
}

struct Particle {
    x: f64,
    v: f64,
    stratum: usize,
    best: Candidate,
}

/// Minimizes `objective(t_cws, n_fans)` over the bounds and strata.
///
/// `baseline`, when given, seeds the first particle of its stratum and is
/// scored exactly as given (clamped to bounds, not snapped to the
/// resolution), so the result is never worse than it.
pub fn optimize<S, F>(mut objective: F, config: &SwarmConfig, baseline: Option<(f64, u8)>) -> Result<Optimum>
where
    F: FnMut(f64, u8) -> S,
    S: Into<Score>,
{
    config.validate()?;
    if let Some((_, n)) = baseline {
        if !config.fan_strata.contains(&n) {
            return Err(Error::Config(format!("baseline fan count {n} not among the strata")));
        }
    }
    let (lo, hi) = config.t_cws_bounds;
    let width = hi - lo;
    let vmax = config.velocity_clamp_fraction * width;
    let per = config.n_particles_per_stratum;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evals = alloc::vec![0usize; config.fan_strata.len()];
    let last_step = grid_steps(lo, hi, config.resolution);
    let snap = |x: f64| {
        if config.resolution > 0.0 {
            let k = math::round((x - lo) / config.resolution).clamp(0.0, last_step as f64);
            lo + k * config.resolution
        } else {
            x
        }
    };
    let mut eval = |t: f64, s: usize, evals: &mut Vec<usize>| {
        evals[s] += 1;
        let n = config.fan_strata[s];
        Candidate::new(t, n, objective(t, n).into())
    };

    let mut swarm: Vec<Particle> = Vec::with_capacity(per * config.fan_strata.len());
    for (s, &n) in config.fan_strata.iter().enumerate() {
        for k in 0..per {
            let (x, c) = match baseline {
                Some((t, bn)) if bn == n && k == 0 => {
                    let x = t.clamp(lo, hi);
                    (x, eval(x, s, &mut evals))
                }
                _ => {
                    let x = if config.stochastic {
                        lo + width * (k as f64 + rng.random::<f64>()) / per as f64
                    } else if per == 1 {
                        lo + 0.5 * width
                    } else {
                        lo + width * k as f64 / (per - 1) as f64
                    };
                    (x, eval(snap(x), s, &mut evals))
                }
            };
            swarm.push(Particle {
                x,
                v: 0.0,
                stratum: s,
                best: c,
            });
        }
    }
    let mut global = swarm[0].best;
    for p in &swarm[1..] {
        if p.best.better_than(&global) {
            global = p.best;
        }
    }

    let mut trace = alloc::vec![global.objective_value];
    let mut converged_at = 0;
    for iter in 1..=config.n_iterations {
        // Synchronous update: every particle moves against the same
        // global best, then the global best is refreshed.
        for p in swarm.iter_mut() {
            let (r1, r2) = if config.stochastic {
                (rng.random::<f64>(), rng.random::<f64>())
            } else {
                (1.0, 1.0)
            };
            let v = config.w * p.v
                + config.c1 * r1 * (p.best.t_cws - p.x)
                + config.c2 * r2 * (global.t_cws - p.x);
            p.v = v.clamp(-vmax, vmax);
            p.x = (p.x + p.v).clamp(lo, hi);
            let c = eval(snap(p.x), p.stratum, &mut evals);
            if c.better_than(&p.best) {
                p.best = c;
            }
        }
        let previous = global.objective_value;
        for p in &swarm {
            if p.best.better_than(&global) {
                global = p.best;
            }
        }
        if previous - global.objective_value > config.convergence_tolerance {
            converged_at = iter;
        }
        trace.push(global.objective_value);
    }

    Ok(Optimum {
        best: global,
        trace: ConvergenceTrace {
            global_best: trace,
            converged_at,
            evaluations: evals.iter().sum(),
            evaluations_per_stratum: evals,
        },
    })
}

/// Exhaustive search over `lo, lo + step, ...` (up to `hi`) in every
/// stratum. Ties go to the lower setpoint, then fewer fans.
pub fn grid_oracle<S, F>(mut objective: F, bounds: (f64, f64), step: f64, strata: &[u8]) -> Result<(Candidate, usize)>
where
    F: FnMut(f64, u8) -> S,
    S: Into<Score>,
{
    let (lo, hi) = bounds;
    if !(step > 0.0) || !(lo <= hi) || strata.is_empty() {
        return Err(Error::Config(format!("bad grid: bounds ({lo}, {hi}), step {step}")));
    }
    let steps = grid_steps(lo, hi, step);
    let mut strata = strata.to_vec();
    strata.sort_unstable();
    let mut best: Option<Candidate> = None;
    let mut count = 0;
    for k in 0..=steps {
        let t = lo + k as f64 * step;
        for &n in &strata {
            count += 1;
            let c = Candidate::new(t, n, objective(t, n).into());
            if best.is_none_or(|b| c.better_than(&b)) {
                best = Some(c);
            }
        }
    }
    Ok((best.expect("at least one grid point"), count))
}

/// Index of the last grid point `lo + k · step` not beyond `hi`.
fn grid_steps(lo: f64, hi: f64, step: f64) -> usize {
    if step > 0.0 {
        math::floor((hi - lo) / step + 1e-9) as usize
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bowl(t: f64, n: u8) -> f64 {
        (t - 3.2).powi(2) + (f64::from(n) - 4.0).powi(2)
    }

    fn unit_box() -> SwarmConfig {
        SwarmConfig {
            t_cws_bounds: (0.0, 10.0),
            ..SwarmConfig::default()
        }
    }

    #[test]
    fn convex_bowl_optimum() {
        let r = optimize(bowl, &unit_box(), None).unwrap();
        assert_eq!(r.best.n_fans, 4);
        assert!((r.best.t_cws - 3.2).abs() < 1e-2);
        assert!(r.best.objective_value < 1e-4);
        assert!(r.best.feasible);
    }

    #[test]
    fn constant_objective_converges_immediately() {
        let r = optimize(|_, _| 7.5, &unit_box(), None).unwrap();
        assert_eq!(r.best.objective_value, 7.5);
        assert_eq!(r.trace.converged_at, 0);
        assert_eq!(r.trace.global_best.len(), 51);
        // ties resolve to the lowest setpoint and fewest fans
        assert_eq!(r.best.n_fans, 2);
    }

    #[test]
    fn oracle_counts_and_exact_optimum() {
        let (c, count) = grid_oracle(|_, _| 0.0, (65.0, 85.0), 0.1, &FAN_STAGES).unwrap();
        assert_eq!(count, 804);
        assert_eq!((c.t_cws, c.n_fans), (65.0, 2));
        let (c, _) = grid_oracle(bowl, (0.0, 10.0), 0.1, &FAN_STAGES).unwrap();
        assert_eq!(c.n_fans, 4);
        assert!((c.t_cws - 3.2).abs() < 1e-12);
    }

    #[test]
    fn zero_counts_rejected() {
        let cfg = SwarmConfig {
            n_iterations: 0,
            ..SwarmConfig::default()
        };
        assert!(matches!(optimize(bowl, &cfg, None), Err(Error::Config(_))));
        let cfg = SwarmConfig {
            w: 1.0,
            ..SwarmConfig::default()
        };
        assert!(optimize(bowl, &cfg, None).is_err());
    }

    #[test]
    fn deterministic_mode_ignores_seed() {
        let a = optimize(bowl, &SwarmConfig { seed: 1, ..SwarmConfig::deterministic() }, None).unwrap();
        let b = optimize(bowl, &SwarmConfig { seed: 2, ..SwarmConfig::deterministic() }, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_is_never_beaten_by_worse() {
        // A spike of low value at one point only the baseline knows about.
        let f = |t: f64, n: u8| if n == 6 && t == 71.37 { -100.0 } else { bowl(t, n) };
        let cfg = SwarmConfig {
            t_cws_bounds: (60.0, 90.0),
            ..SwarmConfig::default()
        };
        let r = optimize(f, &cfg, Some((71.37, 6))).unwrap();
        assert_eq!((r.best.t_cws, r.best.n_fans), (71.37, 6));
        assert!(optimize(f, &cfg, Some((71.37, 5))).is_err());
    }

    #[test]
    fn penalty_marks_infeasible() {
        let (c, _) = grid_oracle(
            |t: f64, _| Score {
                value: 10.0 - t,
                penalty: if t > 5.0 { 1.0 } else { 0.0 },
            },
            (0.0, 10.0),
            1.0,
            &[2],
        )
        .unwrap();
        assert!(!c.feasible);
        assert_eq!(c.penalty, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn swarm_invariants(
            seed in any::<u64>(),
            stochastic in any::<bool>(),
            a in 60.0f64..90.0,
            weights in prop::collection::vec(0.0f64..5.0, 4),
            lo in 55.0f64..70.0,
            width in 0.0f64..30.0,
        ) {
            let cfg = SwarmConfig { seed, stochastic, t_cws_bounds: (lo, lo + width), ..SwarmConfig::default() };
            let mut seen = Vec::new();
            let f = |t: f64, n: u8| {
                seen.push(t);
                (t - a).abs().sqrt() + weights[usize::from(n / 2 - 1)] + (t * 0.7).sin()
            };
            let r = optimize(f, &cfg, None).unwrap();
            // bounds safety, and every score taken on the resolution grid
            prop_assert!(seen.iter().all(|t| *t >= lo && *t <= lo + width));
            let on_grid = seen.iter().all(|t| *t == lo + libm::round((t - lo) / 0.1) * 0.1);
            prop_assert!(on_grid);
            // non-increasing trace
            prop_assert!(r.trace.global_best.windows(2).all(|w| w[1] <= w[0]));
            // equal stratum coverage
            let per = r.trace.evaluations_per_stratum.clone();
            prop_assert!(per.iter().all(|e| *e == per[0]));
            prop_assert_eq!(r.trace.evaluations, per.iter().sum::<usize>());
            // reproducible given the seed
            let again = optimize(
                |t: f64, n: u8| (t - a).abs().sqrt() + weights[usize::from(n / 2 - 1)] + (t * 0.7).sin(),
                &cfg,
                None,
            ).unwrap();
            prop_assert_eq!(again, r);
        }

        #[test]
        fn swarm_never_beats_the_oracle_on_its_grid(
            seed in any::<u64>(),
            a in 60.0f64..90.0,
            freq in 0.5f64..5.0,
        ) {
            let f = |t: f64, n: u8| (t - a).abs() + (freq * t).sin() * f64::from(n) / 4.0;
            let cfg = SwarmConfig { seed, ..SwarmConfig::default() };
            let r = optimize(f, &cfg, None).unwrap();
            let (best, _) = grid_oracle(f, cfg.t_cws_bounds, cfg.resolution, &FAN_STAGES).unwrap();
            prop_assert!(r.best.objective_value >= best.objective_value);
        }

        #[test]
        fn oracle_is_a_lower_bound_on_its_grid(
            a in 60.0f64..90.0,
            samples in prop::collection::vec((0usize..301, 0usize..4), 20),
        ) {
            let f = |t: f64, n: u8| (t - a).powi(2) * f64::from(n) + f64::from(n);
            let (best, _) = grid_oracle(f, (60.0, 90.0), 0.1, &FAN_STAGES).unwrap();
            for (k, s) in samples {
                let t = 60.0 + k as f64 * 0.1;
                prop_assert!(best.objective_value <= f(t, FAN_STAGES[s]));
            }
        }
    }
}
