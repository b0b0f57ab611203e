//! Lower bounds on `P(Z_n([θx*n, ∞)) < e^{an})` from explicit survival
//! strategies: force a thin population, push it down, and let the
//! residual growth fall short of the level.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::deviation::{weibull_c_factor, ModelSpec, Regime};
use crate::distributions::TailClass;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::rng::StreamKey;
use crate::simulator::{cramer_is_estimate, lattice_final_count, residual_lower_bound, Particles};
use crate::stats::mean_se;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SchroderSingleLine,
    BottcherUniform,
    BottcherGeometric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySchedule {
    pub kind: StrategyKind,
    pub n: usize,
    pub t_n: i64,
    /// Per-generation displacement targets `a_1..a_{t_n}` (geometric), or
    /// the single depth `(d+ε)n` (single line).
    pub targets: Vec<f64>,
    pub delta: f64,
    pub b_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedFactor {
    /// `log p̂`.
    pub log_estimate: f64,
    /// 95% interval for `log p`.
    pub log_ci: (f64, f64),
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub strategy: StrategyKind,
    pub n: usize,
    pub params: BTreeMap<String, f64>,
    /// Log-probability factors computed in closed form.
    pub analytic: BTreeMap<String, f64>,
    pub simulated: BTreeMap<String, SimulatedFactor>,
    /// `log L`.
    pub log_bound: f64,
    /// `L` on the scale of the regime: `−log L / n`,
    /// `log(−log L) / n`, or `−log L / n^α`.
    pub normalized: f64,
    pub theory_constant: f64,
    pub ratio: f64,
}

fn proportion_factor(values: &[f64]) -> SimulatedFactor {
    let (m, se) = mean_se(values);
    let se = if se.is_finite() { se } else { 0.0 };
    let lo = (m - 1.96 * se).max(0.0);
    let hi = (m + 1.96 * se).min(1.0);
    SimulatedFactor { log_estimate: m.ln(), log_ci: (lo.ln(), hi.ln()), reps: values.len() }
}

/// Probability of `Z_r([y, ∞)) < e^{log_cap}` for `count` particles at `x0`,
/// one value per replica (an indicator for lattice laws, a conditional lower
/// bound otherwise).
fn residual_samples(
    spec: &ModelSpec,
    x0: f64,
    count: u64,
    generations: usize,
    y: f64,
    log_cap: f64,
    reps: usize,
    key: StreamKey,
) -> Vec<f64> {
    let step = spec.step();
    let off = spec.offspring();
    if step.lattice().is_some() {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let c = lattice_final_count(off, step, x0, count as f64, generations, y, 1e6, key.replica(r as u64))
                    .expect("lattice law");
                if c.ln() < log_cap {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let start = vec![x0; count as usize];
                residual_lower_bound(off, spec.rate_fn(), start, generations, y, log_cap, 200_000, key.replica(r as u64))
            })
            .collect()
    }
}

fn sum_logs(parts: &[f64]) -> f64 {
    if parts.contains(&f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    parts.iter().copied().collect::<KahanSum>().value()
}

/// Single-line strategy: one child per generation up to `⌊ρn⌋`, the lone
/// walker ends below `−(d+ε)n`, and its descendants miss the level.
pub fn schroder_strategy_bound(
    spec: &ModelSpec,
    rho: f64,
    eps: Option<f64>,
    n: usize,
    reps: usize,
    key: StreamKey,
) -> Result<BoundReport> {
    if spec.classify_regime()? != Regime::SchroderLight {
        return Err(Error::RegimeMismatch { expected: "SchroderLight".into(), found: spec.classify_regime()? });
    }
    let theory = spec.schroder_light_rate()?.constant;
    let k = (rho * n as f64).floor() as usize;
    let d = spec.d_of_rho(rho);
    let eps = eps.unwrap_or(0.05 * d);
    let depth = (d + eps) * n as f64;
    let log_line = k as f64 * spec.offspring().p1().ln();
    let walk = if k == 0 {
        let p = if depth <= 0.0 { 0.0 } else { f64::NEG_INFINITY };
        SimulatedFactor { log_estimate: p, log_ci: (p, p), reps: 0 }
    } else {
        let w = cramer_is_estimate(spec.rate_fn(), depth / k as f64, k, reps, key.child(1))?;
        let p = w.log_prob_estimate;
        let half = 1.96 * w.rel_std_error;
        SimulatedFactor { log_estimate: p, log_ci: (p + (1.0 - half).max(0.0).ln(), p + (1.0 + half).ln()), reps }
    };
    let y = spec.theta() * spec.x_star() * n as f64;
    let log_cap = spec.a() * n as f64;
    let res = proportion_factor(&residual_samples(spec, -depth, 1, n - k, y, log_cap, reps, key.child(2)));
    let log_bound = sum_logs(&[log_line, walk.log_estimate, res.log_estimate]);
    let normalized = -log_bound / n as f64;
    let mut params = BTreeMap::new();
    params.insert("rho".into(), rho);
    params.insert("d".into(), d);
    params.insert("eps".into(), eps);
    params.insert("k".into(), k as f64);
    Ok(BoundReport {
        strategy: StrategyKind::SchroderSingleLine,
        n,
        params,
        analytic: BTreeMap::from([("single_line".to_string(), log_line)]),
        simulated: BTreeMap::from([("walk".to_string(), walk), ("residual".to_string(), res)]),
        log_bound,
        normalized,
        theory_constant: theory,
        ratio: normalized / theory,
    })
}

/// Best single-line bound over `points` values of `ρ` in `(0, ρ̄]`.
pub fn optimize_schroder_bound(
    spec: &ModelSpec,
    eps: Option<f64>,
    n: usize,
    points: usize,
    reps: usize,
    key: StreamKey,
) -> Result<(BoundReport, Vec<BoundReport>)> {
    let rho_bar = spec.rho_bar()?;
    let mut all = Vec::with_capacity(points);
    for i in 1..=points {
        let rho = rho_bar * i as f64 / points as f64;
        all.push(schroder_strategy_bound(spec, rho, eps, n, reps, key.child(100 + i as u64))?);
    }
    let best = all
        .iter()
        .max_by(|a, b| a.log_bound.total_cmp(&b.log_bound))
        .cloned()
        .expect("at least one grid point");
    Ok((best, all))
}

/// Uniform strategy: every particle has exactly `b` children and steps at
/// most `−L′` for `t_n = ⌊(c*(L′) + δ)n⌋` generations.
pub fn bottcher_uniform_bound(
    spec: &ModelSpec,
    l_prime: f64,
    delta: f64,
    n: usize,
    reps: usize,
    key: StreamKey,
) -> Result<BoundReport> {
    if spec.classify_regime()? != Regime::BottcherBounded {
        return Err(Error::RegimeMismatch { expected: "BottcherBounded".into(), found: spec.classify_regime()? });
    }
    if !(l_prime > 0.0 && l_prime <= spec.l()) {
        return Err(Error::InvalidSpec(format!("L' = {l_prime} must lie in (0, L]")));
    }
    let theory = spec.bottcher_bounded_rate()?.constant;
    let c_star = spec.c_star_for(l_prime)?;
    let t = ((c_star + delta) * n as f64).floor() as i64;
    if t < 1 || t as usize > n {
        return Err(Error::ScheduleTooShort { n, horizon: t });
    }
    let t = t as usize;
    let b = spec.offspring().b() as f64;
    let step = spec.step();
    // forced births: Σ_{k<t} b^k parents; forced steps: Σ_{1≤k≤t} b^k children
    let births = (b.powi(t as i32) - 1.0) / (b - 1.0);
    let moves = b * births;
    let log_pb = spec.offspring().p_b().ln();
    let log_step = step.cdf(-l_prime + 1e-12 * l_prime).ln();
    let log_births = births * log_pb;
    let log_moves = moves * log_step;
    // highest point the forced steps can reach
    let z = match step.lattice() {
        Some(lat) => lat
            .offsets
            .iter()
            .map(|o| lat.base + lat.span * *o as f64)
            .filter(|x| *x <= -l_prime + 1e-12)
            .fold(f64::NEG_INFINITY, f64::max),
        None => -l_prime,
    };
    let count = b.powi(t as i32);
    if count > 1e15 {
        return Err(Error::PopulationCapExceeded { population: count, cap: 1e15 });
    }
    let y = spec.theta() * spec.x_star() * n as f64;
    let res = proportion_factor(&residual_samples(
        spec,
        z * t as f64,
        count as u64,
        n - t,
        y,
        spec.a() * n as f64,
        reps,
        key.child(3),
    ));
    let log_bound = sum_logs(&[log_births, log_moves, res.log_estimate]);
    let normalized = (-log_bound).ln() / n as f64;
    let mut params = BTreeMap::new();
    params.insert("L_prime".into(), l_prime);
    params.insert("delta".into(), delta);
    params.insert("c_star".into(), c_star);
    params.insert("t_n".into(), t as f64);
    params.insert("predicted".into(), (c_star + delta) * b.ln());
    Ok(BoundReport {
        strategy: StrategyKind::BottcherUniform,
        n,
        params,
        analytic: BTreeMap::from([("births".to_string(), log_births), ("steps".to_string(), log_moves)]),
        simulated: BTreeMap::from([("residual".to_string(), res)]),
        log_bound,
        normalized,
        theory_constant: theory,
        ratio: normalized / theory,
    })
}

fn weibull_alpha(spec: &ModelSpec) -> Result<(f64, f64)> {
    let found = spec.classify_regime()?;
    match (found, spec.step().tail_class()) {
        (Regime::BottcherWeibull, TailClass::Weibull { lambda, alpha }) if alpha > 1.0 => Ok((lambda, alpha)),
        _ => Err(Error::RegimeMismatch { expected: "BottcherWeibull with alpha > 1".into(), found }),
    }
}

/// Smallest `δ` for which the truncated schedule still satisfies
/// `Σ a_k ≥ (ĉ + δ/2)n`, or `None` when `b_α^{−t_n} ≥ ½`.
pub fn geometric_delta_floor(spec: &ModelSpec, n: usize) -> Result<Option<f64>> {
    let (_, alpha) = weibull_alpha(spec)?;
    let b = spec.offspring().b() as f64;
    let t = geometric_horizon(b, alpha, n);
    let r = b.powf(-(t as f64) / (alpha - 1.0));
    if t < 1 || r >= 0.5 {
        return Ok(None);
    }
    Ok(Some(spec.c_hat() * r / (0.5 - r)))
}

fn geometric_horizon(b: f64, alpha: f64, n: usize) -> i64 {
    (alpha / (2.0 * b.ln()) * (n as f64).ln()).floor() as i64
}

/// Default slack: `0.05·ĉ`, raised to the truncation floor when needed.
pub fn default_geometric_delta(spec: &ModelSpec, n: usize) -> Result<f64> {
    let base = 0.05 * spec.c_hat();
    Ok(match geometric_delta_floor(spec, n)? {
        Some(floor) => base.max(floor * (1.0 + 1e-9)),
        None => base,
    })
}

/// Schedule `a_k = ((b_α − 1)/b_α^k)(ĉ + δ)n`, `k = 1..t_n`, with
/// `t_n = ⌊(α / (2 log b)) log n⌋`; both schedule sums are checked.
pub fn bottcher_geometric_schedule(spec: &ModelSpec, n: usize, delta: f64) -> Result<StrategySchedule> {
    let (_, alpha) = weibull_alpha(spec)?;
    let b = spec.offspring().b() as f64;
    let t = geometric_horizon(b, alpha, n);
    if t < 1 {
        return Err(Error::ScheduleTooShort { n, horizon: t });
    }
    let b_alpha = b.powf(1.0 / (alpha - 1.0));
    let total = (spec.c_hat() + delta) * n as f64;
    let targets: Vec<f64> = (1..=t).map(|k| (b_alpha - 1.0) / b_alpha.powi(k as i32) * total).collect();
    let sum: f64 = targets.iter().copied().collect::<KahanSum>().value();
    let lower = (spec.c_hat() + delta / 2.0) * n as f64;
    if sum < lower || sum > total * (1.0 + 1e-12) {
        return Err(Error::ScheduleInvariant(format!(
            "Σ a_k = {sum} outside [{lower}, {total}]; increase δ or n"
        )));
    }
    let cost: f64 = targets.iter().enumerate().map(|(i, a)| a.powf(alpha) * b.powi(i as i32 + 1)).sum();
    let cap = weibull_c_factor(b, alpha) * total.powf(alpha);
    if cost > cap * (1.0 + 1e-12) {
        return Err(Error::ScheduleInvariant(format!("Σ a_k^α b^k = {cost} exceeds {cap}")));
    }
    Ok(StrategySchedule { kind: StrategyKind::BottcherGeometric, n, t_n: t, targets, delta, b_alpha })
}

/// Geometric strategy bound on the `n^α` scale.
pub fn bottcher_geometric_bound(
    spec: &ModelSpec,
    n: usize,
    delta: Option<f64>,
    reps: usize,
    key: StreamKey,
) -> Result<BoundReport> {
    let (lambda, alpha) = weibull_alpha(spec)?;
    let delta = match delta {
        Some(d) => d,
        None => default_geometric_delta(spec, n)?,
    };
    let sched = bottcher_geometric_schedule(spec, n, delta)?;
    let theory = spec.bottcher_weibull_rate()?.constant;
    let b = spec.offspring().b() as f64;
    let t = sched.t_n as usize;
    let step = spec.step();
    let births = (b.powi(t as i32) - 1.0) / (b - 1.0);
    let log_births = births * spec.offspring().p_b().ln();
    let log_tails: f64 = sched
        .targets
        .iter()
        .enumerate()
        .map(|(i, a)| b.powi(i as i32 + 1) * step.ln_left_tail(*a))
        .collect::<KahanSum>()
        .value();
    let depth: f64 = sched.targets.iter().sum();
    let count = b.powi(t as i32);
    let y = spec.theta() * spec.x_star() * n as f64;
    let res = proportion_factor(&residual_samples(
        spec,
        -depth,
        count as u64,
        n - t,
        y,
        spec.a() * n as f64,
        reps,
        key.child(4),
    ));
    let log_bound = sum_logs(&[log_births, log_tails, res.log_estimate]);
    let scale = (n as f64).powf(alpha);
    let normalized = -log_bound / scale;
    let mut params = BTreeMap::new();
    params.insert("delta".into(), delta);
    params.insert("t_n".into(), t as f64);
    params.insert("b_alpha".into(), sched.b_alpha);
    params.insert("c_hat".into(), spec.c_hat());
    params.insert(
        "predicted".into(),
        lambda * weibull_c_factor(b, alpha) * (spec.c_hat() + delta).powf(alpha),
    );
    Ok(BoundReport {
        strategy: StrategyKind::BottcherGeometric,
        n,
        params,
        analytic: BTreeMap::from([("births".to_string(), log_births), ("tails".to_string(), log_tails)]),
        simulated: BTreeMap::from([("residual".to_string(), res)]),
        log_bound,
        normalized,
        theory_constant: theory,
        ratio: normalized / theory,
    })
}

/// Geometric bound for each `δ` in `deltas`; invalid schedules are skipped.
pub fn geometric_delta_sweep(
    spec: &ModelSpec,
    n: usize,
    deltas: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        match bottcher_geometric_bound(spec, n, Some(d), reps, key.child(200 + i as u64)) {
            Ok(r) => out.push(r),
            Err(Error::ScheduleInvariant(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub n: usize,
    pub direct_prob: f64,
    pub direct_reps: usize,
    pub log_bound: f64,
    /// Share of bootstrap resamples of the direct estimate at or above the bound.
    pub fraction_above: f64,
}

/// Direct Monte Carlo of `P(Z_n([θx*n, ∞)) < e^{an})` in particle mode.
pub fn direct_event_probability(spec: &ModelSpec, n: usize, reps: usize, key: StreamKey) -> f64 {
    let y = spec.theta() * spec.x_star() * n as f64;
    let log_cap = spec.a() * n as f64;
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let k = key.replica(r as u64);
            let mut p = Particles::single(0.0);
            for g in 1..=n {
                p.advance(spec.offspring(), spec.step(), k, g as u64);
            }
            (p.count_at_least(y).ln() < log_cap) as usize
        })
        .sum();
    hits as f64 / reps as f64
}

/// Compares the optimized single-line bound with a direct estimate of the
/// event probability at small `n`, by binomial bootstrap of the latter.
pub fn tiny_scale_crosscheck(
    spec: &ModelSpec,
    n: usize,
    direct_reps: usize,
    bound_reps: usize,
    boots: usize,
    key: StreamKey,
) -> Result<CrosscheckReport> {
    use rand_distr::{Binomial, Distribution};
    let p = direct_event_probability(spec, n, direct_reps, key.child(5));
    let (best, _) = optimize_schroder_bound(spec, None, n, 20, bound_reps, key.child(6))?;
    let bound = best.log_bound.exp();
    let mut rng = key.child(7).rng();
    let binom = Binomial::new(direct_reps as u64, p).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let above = (0..boots).filter(|_| binom.sample(&mut rng) as f64 / direct_reps as f64 >= bound).count();
    Ok(CrosscheckReport {
        n,
        direct_prob: p,
        direct_reps,
        log_bound: best.log_bound,
        fraction_above: above as f64 / boots as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{OffspringLaw, StepFamily, StepLaw};

    fn weibull_spec(alpha: f64) -> ModelSpec {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let step = StepLaw::new(StepFamily::NegWeibull { lambda: 1.0, alpha, q: 0.5, x0: 1.0 }).unwrap();
        ModelSpec::new(off, step, 0.0, 0.0).unwrap()
    }

    #[test]
    fn geometric_schedule_sums() {
        let s = weibull_spec(2.0);
        let n = 40;
        let d = default_geometric_delta(&s, n).unwrap();
        let sched = bottcher_geometric_schedule(&s, n, d).unwrap();
        assert_eq!(sched.t_n, 5);
        assert_eq!(sched.b_alpha, 2.0);
        let total = (s.c_hat() + d) * n as f64;
        for (k, a) in sched.targets.iter().enumerate() {
            assert!((a - total / 2f64.powi(k as i32 + 1)).abs() < 1e-12 * total);
        }
        let sum: f64 = sched.targets.iter().sum();
        assert!(sum >= (s.c_hat() + d / 2.0) * n as f64 && sum <= total);
    }

    #[test]
    fn geometric_schedule_too_short() {
        let s = weibull_spec(2.0);
        assert!(matches!(bottcher_geometric_schedule(&s, 1, 0.1), Err(Error::ScheduleTooShort { .. })));
        assert!(matches!(bottcher_geometric_schedule(&weibull_spec(0.5), 40, 0.1), Err(Error::RegimeMismatch { .. })));
    }

    #[test]
    fn schroder_components_multiply() {
        let off = OffspringLaw::new(vec![(1, 0.5), (2, 0.5)]).unwrap();
        let spec = ModelSpec::new(off, StepLaw::rademacher(1.0).unwrap(), 0.3, 0.1).unwrap();
        let r = schroder_strategy_bound(&spec, 0.35, None, 30, 2000, StreamKey::new(1)).unwrap();
        let parts = r.analytic["single_line"] + r.simulated["walk"].log_estimate + r.simulated["residual"].log_estimate;
        assert!((parts - r.log_bound).abs() < 1e-12);
        assert_eq!(r.analytic["single_line"], 10.0 * 0.5f64.ln());
    }

    #[test]
    fn uniform_skeleton() {
        let off = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let spec = ModelSpec::new(off, StepLaw::rademacher(1.0).unwrap(), 0.0, 0.1).unwrap();
        let r = bottcher_uniform_bound(&spec, 0.999, 0.05 * 0.5, 24, 50, StreamKey::new(2)).unwrap();
        let t = r.params["t_n"] as i32;
        // p_b = 1 and P(X ≤ −L') = ½ over 2(2^t − 1) forced steps
        let expect = (2f64.powi(t) - 1.0) * 2.0 * 2f64.ln();
        assert!((-(r.analytic["births"] + r.analytic["steps"]) - expect).abs() < 1e-9 * expect);
    }
}
