//! Importance-sampling estimates of walk lower deviations, plus a direct
//! Monte Carlo check of heavy-tailed sums.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{LogMgf, StepLaw, TailClass, TiltedStep};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rate_fn::RateFunction;
use crate::rng::StreamKey;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkOracleResult {
    pub n: usize,
    pub x: f64,
    /// `log P̂(S_n ≤ −xn)`.
    pub log_prob_estimate: f64,
    /// Standard error of `P̂`, relative to `P̂`.
    pub rel_std_error: f64,
    /// `n·I(−x)`.
    pub theory: f64,
    pub tilt: f64,
    pub reps: usize,
}

impl WalkOracleResult {
    /// `−(1/n) log P̂`.
    pub fn rate_estimate(&self) -> f64 {
        -self.log_prob_estimate / self.n as f64
    }
}

const CHUNK: usize = 4096;

/// Estimates `P(S_n ≤ −xn)` by sampling the walk under the law tilted to
/// mean `−x` and reweighting with the exact likelihood ratio.
pub fn cramer_is_estimate(rf: &RateFunction, x: f64, n: usize, reps: usize, key: StreamKey) -> Result<WalkOracleResult> {
    let step = rf.source();
    let theory = n as f64 * rf.eval(-x);
    let l = -step.ess_inf();
    let done = |log_p: f64, tilt: f64| WalkOracleResult {
        n,
        x,
        log_prob_estimate: log_p,
        rel_std_error: 0.0,
        theory,
        tilt,
        reps,
    };
    if x > l {
        return Ok(done(f64::NEG_INFINITY, f64::NEG_INFINITY));
    }
    if x == l {
        return Ok(done(n as f64 * step.atom_at_inf().ln(), f64::NEG_INFINITY));
    }
    let t = if x > 0.0 {
        if step.domain().lo >= 0.0 {
            return Err(Error::TiltOutsideDomain { t: -f64::MIN_POSITIVE });
        }
        rf.eval_with_tilt(-x).1
    } else {
        0.0
    };
    let tilted = TiltedStep::new(step, t)?;
    let level = -x * n as f64;
    let chunks = reps.div_ceil(CHUNK);
    // log-weights of successful replicas
    let logw: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = key.replica(c as u64).rng();
            let m = CHUNK.min(reps - c * CHUNK);
            let mut out = Vec::with_capacity(m);
            for _ in 0..m {
                let mut s = 0.0;
                for _ in 0..n {
                    s += tilted.sample(&mut rng);
                }
                if s <= level + 1e-9 * (1.0 + level.abs()) {
                    out.push(n as f64 * tilted.lambda_t() - t * s);
                }
            }
            out
        })
        .collect();
    if logw.is_empty() {
        let mut r = done(f64::NEG_INFINITY, t);
        r.rel_std_error = f64::INFINITY;
        return Ok(r);
    }
    let log_sum = log_sum_exp(&logw);
    let log_p = log_sum - (reps as f64).ln();
    // second moment of the weights, relative to the mean squared
    let sq: Vec<f64> = logw.iter().map(|w| 2.0 * w).collect();
    let log_m2 = log_sum_exp(&sq) - (reps as f64).ln();
    let rel_var = ((log_m2 - 2.0 * log_p).exp() - 1.0).max(0.0);
    Ok(WalkOracleResult { n, x, log_prob_estimate: log_p, rel_std_error: (rel_var / reps as f64).sqrt(), theory, tilt: t, reps })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheckPoint {
    pub x: f64,
    pub p_hat: f64,
    pub std_error: f64,
    /// Value of the bound shape at this point.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyTailReport {
    pub n: usize,
    pub points: Vec<TailCheckPoint>,
    /// Fitted constant for the Pareto shape `C n² x^{−α}`.
    pub fitted_constant: Option<f64>,
    pub all_hold: bool,
}

/// Direct Monte Carlo of `P(S_n ≤ −x)` for heavy left tails, compared with
/// `C n² x^{−α}` (Pareto; `C` fitted at the first point) or with
/// `exp(−(1−ε) λ x^α)` (Weibull, `ε = 0.2`).
pub fn heavy_tail_sum_check(step: &StepLaw, n: usize, xs: &[f64], reps: usize, key: StreamKey) -> Result<HeavyTailReport> {
    let class = step.tail_class();
    if !matches!(class, TailClass::Pareto { .. } | TailClass::Weibull { .. }) {
        return Err(Error::InvalidStep(format!("heavy-tail check needs a Pareto or Weibull tail, got {class:?}")));
    }
    let chunks = reps.div_ceil(CHUNK);
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = key.replica(c as u64).rng();
            let m = CHUNK.min(reps - c * CHUNK);
            (0..m).map(|_| (0..n).map(|_| step.sample(&mut rng)).sum::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    let mut points = Vec::with_capacity(xs.len());
    let mut fitted = None;
    for (i, &x) in xs.iter().enumerate() {
        let hits = sums.iter().filter(|&&s| s <= -x).count() as f64;
        let p = hits / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        let bound = match class {
            TailClass::Pareto { alpha } => {
                if x <= 0.0 {
                    1.0
                } else {
                    if i == 0 {
                        fitted = Some(p * x.powf(alpha) / (n * n) as f64);
                    }
                    fitted.unwrap_or(0.0) * (n * n) as f64 * x.powf(-alpha)
                }
            }
            TailClass::Weibull { lambda, alpha } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(0.8) * lambda * x.powf(alpha)).exp()
                }
            }
            _ => unreachable!(),
        };
        let holds = p <= bound + 3.0 * se + 1e-15;
        points.push(TailCheckPoint { x, p_hat: p, std_error: se, bound, holds });
    }
    let all_hold = points.iter().all(|p| p.holds);
    Ok(HeavyTailReport { n, points, fitted_constant: fitted, all_hold })
}
