//! Branching random walk engines.
//!
//! * particle mode keeps every position (the literal definition);
//! * lattice-cohort mode keeps per-site counts and moves whole cohorts with
//!   multinomial draws, switching large cohorts to mean-field growth.

use serde::{Deserialize, Serialize};

use crate::distributions::{multinomial, Lattice, LogMgf, OffspringLaw, StepLaw};
use crate::error::{Error, Result};
use crate::rate_fn::RateFunction;
use crate::rng::StreamKey;

/// Level `y(n)` defining the set `[y(n), ∞)` counted at generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// Whole population.
    All,
    /// `y(n) = slope·n + offset`.
    Affine { slope: f64, offset: f64 },
}

impl Threshold {
    pub fn level(&self, n: usize) -> f64 {
        match *self {
            Threshold::All => f64::NEG_INFINITY,
            Threshold::Affine { slope, offset } => slope * n as f64 + offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Particle,
    LatticeCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    ExactParticles,
    LatticeCohort,
    MeanField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub n: usize,
    pub total: f64,
    pub log_total: f64,
    /// `Z_n([y_i(n), ∞))` for each requested threshold.
    pub level_counts: Vec<f64>,
    pub mode: RecordMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrwConfig {
    pub n_max: usize,
    pub mode: Mode,
    /// Largest expected (and actual) population allowed in particle mode.
    pub particle_cap: f64,
    /// Cohort size above which a site grows by its expectation.
    pub mean_field_threshold: f64,
}

impl BrwConfig {
    pub fn new(n_max: usize, mode: Mode) -> Self {
        Self { n_max, mode, particle_cap: 1e7, mean_field_threshold: 1e6 }
    }
}

/// Position tolerance when comparing particle positions with a level.
const LEVEL_TOL: f64 = 1e-9;

/// Particle positions of one generation.
#[derive(Debug, Clone)]
pub struct Particles {
    pub positions: Vec<f64>,
}

impl Particles {
    pub fn single(x: f64) -> Self {
        Self { positions: vec![x] }
    }

    pub fn advance(&mut self, off: &OffspringLaw, step: &StepLaw, key: StreamKey, generation: u64) {
        let mut rng = key.stream(generation, 0);
        let mut next = Vec::with_capacity((self.positions.len() as f64 * off.mean() * 1.1) as usize + 4);
        for &x in &self.positions {
            for _ in 0..off.sample(&mut rng) {
                next.push(x + step.sample(&mut rng));
            }
        }
        self.positions = next;
    }

    pub fn count_at_least(&self, y: f64) -> f64 {
        self.positions.iter().filter(|&&x| x >= y - LEVEL_TOL).count() as f64
    }
}

/// Per-site counts on the lattice `origin + steps·base + span·j`.
#[derive(Debug, Clone)]
pub struct Cohort {
    lattice: Lattice,
    origin: f64,
    steps: usize,
    counts: Vec<f64>,
    threshold: f64,
    mean: f64,
    pub mean_field_used: bool,
}

impl Cohort {
    /// `count` particles at `origin`.
    pub fn new(step: &StepLaw, origin: f64, count: f64, threshold: f64, off: &OffspringLaw) -> Result<Self> {
        let lattice = step.lattice().ok_or(Error::NonLatticeStep)?;
        Ok(Self { lattice, origin, steps: 0, counts: vec![count], threshold, mean: off.mean(), mean_field_used: false })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn position(&self, j: usize) -> f64 {
        self.origin + self.steps as f64 * self.lattice.base + self.lattice.span * j as f64
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Smallest site index at or above level `y`.
    fn first_index(&self, y: f64) -> usize {
        if y == f64::NEG_INFINITY {
            return 0;
        }
        let z = (y - self.origin - self.steps as f64 * self.lattice.base) / self.lattice.span;
        let j = (z - 1e-9).ceil();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.counts.len())
        }
    }

    pub fn count_at_least(&self, y: f64) -> f64 {
        self.counts[self.first_index(y)..].iter().sum()
    }

    pub fn advance(&mut self, off: &OffspringLaw, key: StreamKey, generation: u64) {
        let max_off = *self.lattice.offsets.iter().max().expect("non-empty lattice") as usize;
        let mut next = vec![0.0; self.counts.len() + max_off];
        for (j, &c) in self.counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if c < self.threshold {
                let mut rng = key.stream(generation, j as u64);
                let kids = off.sample_total(c as u64, &mut rng);
                let split = multinomial(kids, self.lattice.probs.iter().copied(), &mut rng);
                for (o, s) in self.lattice.offsets.iter().zip(split) {
                    next[j + *o as usize] += s as f64;
                }
            } else {
                self.mean_field_used = true;
                let mut rng = key.stream(generation, j as u64);
                for (o, p) in self.lattice.offsets.iter().zip(&self.lattice.probs) {
                    next[j + *o as usize] += stochastic_round(c * self.mean * p, &mut rng);
                }
            }
        }
        while next.len() > 1 && next[next.len() - 1] == 0.0 {
            next.pop();
        }
        self.counts = next;
        self.steps += 1;
    }
}

fn stochastic_round<R: rand::Rng + ?Sized>(x: f64, rng: &mut R) -> f64 {
    if x >= 4.5e15 {
        return x;
    }
    let f = x.floor();
    if rng.random::<f64>() < x - f {
        f + 1.0
    } else {
        f
    }
}

/// Runs one replica from a single particle at the origin, recording
/// generations `0..=n_max`.
pub fn run_brw(
    off: &OffspringLaw,
    step: &StepLaw,
    cfg: &BrwConfig,
    thresholds: &[Threshold],
    key: StreamKey,
) -> Result<Vec<GenerationRecord>> {
    let mut out = Vec::with_capacity(cfg.n_max + 1);
    match cfg.mode {
        Mode::Particle => {
            let expected = off.mean().powi(cfg.n_max as i32);
            if expected > cfg.particle_cap {
                return Err(Error::PopulationCapExceeded { population: expected, cap: cfg.particle_cap });
            }
            let mut p = Particles::single(0.0);
            for n in 0..=cfg.n_max {
                if n > 0 {
                    p.advance(off, step, key, n as u64);
                    let size = p.positions.len() as f64;
                    if size > cfg.particle_cap {
                        return Err(Error::PopulationCapExceeded { population: size, cap: cfg.particle_cap });
                    }
                }
                let total = p.positions.len() as f64;
                out.push(GenerationRecord {
                    n,
                    total,
                    log_total: total.ln(),
                    level_counts: thresholds.iter().map(|t| p.count_at_least(t.level(n))).collect(),
                    mode: RecordMode::ExactParticles,
                });
            }
        }
        Mode::LatticeCohort => {
            let mut c = Cohort::new(step, 0.0, 1.0, cfg.mean_field_threshold, off)?;
            for n in 0..=cfg.n_max {
                if n > 0 {
                    c.advance(off, key, n as u64);
                }
                let total = c.total();
                out.push(GenerationRecord {
                    n,
                    total,
                    log_total: total.ln(),
                    level_counts: thresholds.iter().map(|t| c.count_at_least(t.level(n))).collect(),
                    mode: if c.mean_field_used { RecordMode::MeanField } else { RecordMode::LatticeCohort },
                });
            }
        }
    }
    Ok(out)
}

/// `count` particles at `x0` on a lattice law, run for `generations`;
/// returns the final count at or above `y`.
pub fn lattice_final_count(
    off: &OffspringLaw,
    step: &StepLaw,
    x0: f64,
    count: f64,
    generations: usize,
    y: f64,
    mean_field_threshold: f64,
    key: StreamKey,
) -> Result<f64> {
    let mut c = Cohort::new(step, x0, count, mean_field_threshold, off)?;
    for g in 1..=generations {
        c.advance(off, key, g as u64);
    }
    Ok(c.count_at_least(y))
}

/// Lower bound on `P(Z_r([y, ∞)) < e^{log_cap})` for one replica started
/// from `start` positions, for arbitrary step laws.
///
/// The walk is simulated exactly while the population stays below
/// `particle_cap`, discarding particles that cannot reach `y` even with
/// maximal steps. If the cap is hit at generation `k`, the conditional
/// probability is bounded below by Markov's inequality with the Chernoff
/// bound `E[count | F_k] ≤ Σ_i m^{r−k} exp(−(r−k) I((y − x_i)/(r−k)))`.
#[allow(clippy::too_many_arguments)]
pub fn residual_lower_bound(
    off: &OffspringLaw,
    rf: &RateFunction,
    start: Vec<f64>,
    generations: usize,
    y: f64,
    log_cap: f64,
    particle_cap: usize,
    key: StreamKey,
) -> f64 {
    let step = rf.source();
    let sup = step.ess_sup();
    let mut p = Particles { positions: start };
    for k in 0..=generations {
        let left = (generations - k) as f64;
        if sup.is_finite() {
            p.positions.retain(|&x| x + left * sup >= y - LEVEL_TOL);
        }
        if k == generations {
            return if p.count_at_least(y).ln() < log_cap { 1.0 } else { 0.0 };
        }
        if p.positions.len() > particle_cap || p.positions.is_empty() {
            if p.positions.is_empty() {
                return 1.0;
            }
            let log_growth = left * off.mean().ln();
            let mut terms = Vec::with_capacity(p.positions.len());
            for &x in &p.positions {
                let z = (y - x) / left;
                let log_tail = if z <= 0.0 { 0.0 } else { -left * rf.eval(z) };
                terms.push(log_growth + log_tail);
            }
            let log_mean = crate::numeric::log_sum_exp(&terms);
            return (1.0 - (log_mean - log_cap).exp()).max(0.0);
        }
        p.advance(off, step, key, (k + 1) as u64);
    }
    unreachable!("loop returns at the final generation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_record() {
        let off = OffspringLaw::new(vec![(1, 0.5), (2, 0.5)]).unwrap();
        let step = StepLaw::rademacher(1.0).unwrap();
        for mode in [Mode::Particle, Mode::LatticeCohort] {
            let recs = run_brw(&off, &step, &BrwConfig::new(3, mode), &[Threshold::All], StreamKey::new(1)).unwrap();
            assert_eq!(recs[0].total, 1.0);
            assert_eq!(recs[0].level_counts, vec![1.0]);
            assert_eq!(recs.len(), 4);
        }
    }

    #[test]
    fn binary_tree_total_is_deterministic() {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::rademacher(1.0).unwrap();
        let recs = run_brw(&off, &step, &BrwConfig::new(3, Mode::Particle), &[], StreamKey::new(2)).unwrap();
        assert_eq!(recs[3].total, 8.0);
        let recs = run_brw(&off, &step, &BrwConfig::new(30, Mode::LatticeCohort), &[], StreamKey::new(2)).unwrap();
        assert_eq!(recs[30].total, 2f64.powi(30));
    }

    #[test]
    fn cohort_rejects_non_lattice() {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::gaussian(1.0).unwrap();
        let e = run_brw(&off, &step, &BrwConfig::new(3, Mode::LatticeCohort), &[], StreamKey::new(3));
        assert_eq!(e.unwrap_err(), Error::NonLatticeStep);
    }

    #[test]
    fn particle_cap_enforced() {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::rademacher(1.0).unwrap();
        let e = run_brw(&off, &step, &BrwConfig::new(30, Mode::Particle), &[], StreamKey::new(3));
        assert!(matches!(e, Err(Error::PopulationCapExceeded { .. })));
    }

    #[test]
    fn lattice_threshold_alignment() {
        // after 2 Rademacher steps sites are −2, 0, 2; a level of 0.5 must
        // count only the site at 2
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::rademacher(1.0).unwrap();
        let t = [Threshold::Affine { slope: 0.25, offset: 0.0 }, Threshold::Affine { slope: 0.0, offset: 0.0 }];
        let recs = run_brw(&off, &step, &BrwConfig::new(2, Mode::LatticeCohort), &t, StreamKey::new(4)).unwrap();
        let recp = run_brw(&off, &step, &BrwConfig::new(2, Mode::Particle), &t, StreamKey::new(4)).unwrap();
        for r in [&recs[2], &recp[2]] {
            assert!(r.level_counts[0] <= r.level_counts[1]);
            assert!(r.level_counts[1] <= r.total);
        }
    }

    #[test]
    fn mean_field_switch_keeps_expectation() {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::rademacher(1.0).unwrap();
        let mut cfg = BrwConfig::new(40, Mode::LatticeCohort);
        cfg.mean_field_threshold = 1e3;
        let recs = run_brw(&off, &step, &cfg, &[Threshold::All], StreamKey::new(5)).unwrap();
        assert_eq!(recs[40].mode, RecordMode::MeanField);
        assert!((recs[40].total / 2f64.powi(40) - 1.0).abs() < 1e-6);
    }
}
