//! Legendre transform `I(x) = sup_t {tx − Λ(t)}` with tail classification.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::distributions::{LogMgf, OffspringLaw, StepLaw};
use crate::error::{Error, Result};
use crate::numeric::{bisect_boundary, golden_max};

/// Behaviour of `Λ'` as `λ ↑ λ*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCase {
    /// `Λ'(λ) → ∞`; `I(x)/x → λ*`.
    SteepTail,
    /// `λ* = ∞` and `Λ'(λ) → ess sup X < ∞`.
    InfiniteLambdaFiniteSlope,
    /// `λ* < ∞` and `Λ'(λ) → T < ∞`; `I` is affine beyond `T`.
    FiniteLambdaFiniteSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub case: RateCase,
    pub lambda_star: f64,
    /// Limit slope `T` in the finite-λ* case.
    pub slope_limit: Option<f64>,
    pub ess_sup: f64,
}

/// Lazily evaluated, memoized rate function of a mean-zero step law.
#[derive(Debug)]
pub struct RateFunction<S: LogMgf = StepLaw> {
    source: S,
    class: Classification,
    cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl<S: LogMgf + Clone> Clone for RateFunction<S> {
    fn clone(&self) -> Self {
        Self {
            source: self.source.clone(),
            class: self.class,
            cache: Mutex::new(self.cache.lock().expect("cache lock").clone()),
        }
    }
}

/// Centered finite-difference derivative of `Λ`, with the step shrunk so
/// the stencil stays inside a finite domain edge.
pub fn log_mgf_derivative<S: LogMgf + ?Sized>(law: &S, t: f64) -> f64 {
    let mut h = 1e-5 * t.abs().max(1.0);
    let dom = law.domain();
    if dom.hi.is_finite() {
        h = h.min(0.5 * (dom.hi - t));
    }
    if dom.lo.is_finite() {
        h = h.min(0.5 * (t - dom.lo));
    }
    (law.log_mgf(t + h) - law.log_mgf(t - h)) / (2.0 * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verdict {
    Converges(f64),
    Diverges,
    Unclear,
}

fn verdict(values: &[f64]) -> Verdict {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let last = values[values.len() - 1];
    let tiny = 1e-11 * (1.0 + last.abs());
    if d.iter().any(|v| !v.is_finite()) {
        return Verdict::Unclear;
    }
    if d[d.len() - 1].abs() <= tiny {
        return Verdict::Converges(last);
    }
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().all(|&r| (0.0..=0.8).contains(&r) || !r.is_finite()) {
        let r = ratios[ratios.len() - 1].clamp(0.0, 0.8);
        return Verdict::Converges(last + d[d.len() - 1] * r / (1.0 - r));
    }
    if ratios.iter().all(|&r| r >= 0.9) {
        return Verdict::Diverges;
    }
    Verdict::Unclear
}

/// Classifies a law by probing `Λ'` along a grid approaching `λ*`.
pub fn classify<S: LogMgf + ?Sized>(law: &S) -> Result<Classification> {
    let dom = law.domain();
    let lambda_star = dom.hi;
    let ess_sup = law.ess_sup();
    let probe = |k: i32| -> f64 {
        let lam = if lambda_star.is_finite() {
            lambda_star * (1.0 - 2f64.powi(-k))
        } else {
            2f64.powi(k)
        };
        log_mgf_derivative(law, lam)
    };
    let levels: [i32; 2] = if lambda_star.is_finite() { [12, 20] } else { [12, 18] };
    let mut verdicts = Vec::new();
    for top in levels {
        let vals: Vec<f64> = (top - 5..=top).map(probe).collect();
        verdicts.push(verdict(&vals));
    }
    let v = match (verdicts[0], verdicts[1]) {
        (Verdict::Diverges, Verdict::Diverges) => Verdict::Diverges,
        (Verdict::Converges(_), Verdict::Converges(b)) => Verdict::Converges(b),
        (a, b) => {
            return Err(Error::ClassificationInconclusive(format!(
                "Λ' probes disagree across refinement levels: {a:?} then {b:?}"
            )))
        }
    };
    let class = match (v, lambda_star.is_finite()) {
        (Verdict::Diverges, _) => {
            if ess_sup.is_finite() {
                return Err(Error::ClassificationInconclusive(
                    "Λ' appears to diverge for a law bounded above".into(),
                ));
            }
            Classification { case: RateCase::SteepTail, lambda_star, slope_limit: None, ess_sup }
        }
        (Verdict::Converges(lim), false) => {
            if ess_sup.is_finite() && (lim - ess_sup).abs() > 1e-3 * (1.0 + ess_sup.abs()) {
                return Err(Error::ClassificationInconclusive(format!(
                    "Λ' tends to {lim}, not to ess sup X = {ess_sup}"
                )));
            }
            Classification { case: RateCase::InfiniteLambdaFiniteSlope, lambda_star, slope_limit: None, ess_sup }
        }
        (Verdict::Converges(lim), true) => {
            Classification { case: RateCase::FiniteLambdaFiniteSlope, lambda_star, slope_limit: Some(lim), ess_sup }
        }
        (Verdict::Unclear, _) => unreachable!(),
    };
    Ok(class)
}

impl<S: LogMgf> RateFunction<S> {
    pub fn new(source: S) -> Result<Self> {
        let class = classify(&source)?;
        Ok(Self { source, class, cache: Mutex::new(HashMap::new()) })
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn classification(&self) -> Classification {
        self.class
    }

    pub fn case(&self) -> RateCase {
        self.class.case
    }

    pub fn lambda_star(&self) -> f64 {
        self.class.lambda_star
    }

    pub fn ess_sup(&self) -> f64 {
        self.source.ess_sup()
    }

    pub fn ess_inf(&self) -> f64 {
        self.source.ess_inf()
    }

    pub fn log_mgf(&self, t: f64) -> f64 {
        self.source.log_mgf(t)
    }

    /// `I(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_tilt(x).0
    }

    /// `I(x)` together with the maximizing tilt (`±inf` when the supremum
    /// is only approached).
    pub fn eval_with_tilt(&self, x: f64) -> (f64, f64) {
        let key = x.to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return *v;
        }
        let v = self.compute(x);
        self.cache.lock().expect("cache lock").insert(key, v);
        v
    }

    fn compute(&self, x: f64) -> (f64, f64) {
        if x.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        if x == 0.0 {
            return (0.0, 0.0);
        }
        let (sup, inf) = (self.source.ess_sup(), self.source.ess_inf());
        if x > sup {
            return (f64::INFINITY, f64::INFINITY);
        }
        if x < inf {
            return (f64::INFINITY, f64::NEG_INFINITY);
        }
        if x == sup {
            return (-self.source.atom_at_sup().ln(), f64::INFINITY);
        }
        if x == inf {
            return (-self.source.atom_at_inf().ln(), f64::NEG_INFINITY);
        }
        // The maximizing tilt has the sign of x; search on that half-line.
        let sign = x.signum();
        let dom = self.source.domain();
        let (edge, edge_closed) = if sign > 0.0 { (dom.hi, dom.hi_closed) } else { (-dom.lo, dom.lo_closed) };
        let obj = |s: f64| -> f64 {
            if s > edge || (s == edge && !edge_closed) {
                return f64::NEG_INFINITY;
            }
            let l = self.source.log_mgf(sign * s);
            if l.is_finite() {
                sign * s * x - l
            } else {
                f64::NEG_INFINITY
            }
        };
        if edge <= 0.0 {
            // Λ infinite on this side except at 0.
            return (0.0, 0.0);
        }
        let cap = if edge.is_finite() {
            if edge_closed {
                edge
            } else {
                edge * (1.0 - 1e-15)
            }
        } else {
            f64::MAX
        };
        let mut s = 1.0f64.min(cap);
        let mut lo;
        let hi;
        if obj(s) < obj(0.5 * s) {
            // maximizer below s
            loop {
                if s < 1e-300 {
                    return (0.0, 0.0);
                }
                if obj(0.5 * s) >= obj(0.25 * s) {
                    lo = 0.25 * s;
                    hi = s;
                    break;
                }
                s *= 0.5;
            }
        } else {
            lo = 0.5 * s;
            loop {
                let next = (2.0 * s).min(cap);
                if next == s || obj(next) < obj(s) {
                    hi = next;
                    break;
                }
                lo = s;
                s = next;
                if s > 1e300 {
                    hi = s;
                    break;
                }
            }
        }
        if lo > hi {
            lo = 0.0;
        }
        let tol = (1e-12f64).max(4.0 * f64::EPSILON * hi);
        let (arg, val) = golden_max(obj, lo, hi, tol);
        let val = val.max(0.0);
        // Case iii affine branch: the maximizer sits at the domain edge.
        (val, sign * arg)
    }

    /// Writes all cached `(x, I(x))` pairs, sorted by `x`.
    pub fn dump_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut rows: Vec<(f64, f64)> =
            self.cache.lock().expect("cache lock").iter().map(|(k, v)| (f64::from_bits(*k), v.0)).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        writeln!(w, "x,I")?;
        for (x, i) in rows {
            writeln!(w, "{x},{i}")?;
        }
        Ok(())
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

/// `x* = sup{x ≥ 0 : I(x) ≤ log m}`.
pub fn x_star<S: LogMgf>(off: &OffspringLaw, rf: &RateFunction<S>) -> f64 {
    x_star_for_log_mean(off.mean().ln(), rf)
}

pub fn x_star_for_log_mean<S: LogMgf>(log_m: f64, rf: &RateFunction<S>) -> f64 {
    let sup = rf.ess_sup();
    if sup.is_finite() && rf.eval(sup) <= log_m {
        return sup;
    }
    let mut hi = 1.0f64.min(sup);
    while rf.eval(hi) <= log_m {
        hi = (2.0 * hi).min(sup);
    }
    bisect_boundary(|x| rf.eval(x) <= log_m, 0.0, hi, 1e-12 * hi.max(1.0))
}
