use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric::{ln_cosh, ln_sinhc, log_add_exp, log_integral_exp, log_sum_exp};

/// Serialized description of a step law, tagged by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepFamily {
    /// `±s` with probability ½ each.
    Rademacher { s: f64 },
    /// Arbitrary finite law given as `(x, p)` pairs; shifted to mean zero.
    FiniteSupport { points: Vec<(f64, f64)> },
    Gaussian { sigma: f64 },
    /// `P(X ≤ −x) = q·exp(−λ x^α)` for `x ≥ x0`.
    NegWeibull { lambda: f64, alpha: f64, q: f64, x0: f64 },
    /// `P(X < −x) = q·x^{−α}` for `x ≥ x0`; needs `α > 1`.
    NegPareto { alpha: f64, q: f64, x0: f64 },
    /// `P(X ≤ −x) = q·exp(−e^{x^α})` for `x ≥ x0`.
    NegGumbel {
        alpha: f64,
        #[serde(default = "one")]
        q: f64,
        x0: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Left-tail class, used for regime dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    Bounded,
    /// Unbounded with a Gaussian-type left tail.
    Gaussian,
    Weibull { lambda: f64, alpha: f64 },
    Pareto { alpha: f64 },
    Gumbel { alpha: f64 },
}

/// Support `base + span·j` for integer `j ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub base: f64,
    pub span: f64,
    pub offsets: Vec<i64>,
    pub probs: Vec<f64>,
}

/// Domain of a log-MGF: the interval on which it is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfDomain {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl MgfDomain {
    pub const WHOLE_LINE: MgfDomain =
        MgfDomain { lo: f64::NEG_INFINITY, lo_closed: false, hi: f64::INFINITY, hi_closed: false };

    pub fn contains(&self, t: f64) -> bool {
        let above = t > self.lo || (self.lo_closed && t == self.lo);
        let below = t < self.hi || (self.hi_closed && t == self.hi);
        above && below
    }
}

/// Anything with a log moment generating function the rate-function engine
/// can transform.
pub trait LogMgf: Send + Sync {
    /// `Λ(t) = log E[e^{tX}]`, `+inf` outside the domain.
    fn log_mgf(&self, t: f64) -> f64;
    fn domain(&self) -> MgfDomain;
    fn ess_sup(&self) -> f64;
    fn ess_inf(&self) -> f64;
    /// `P(X = ess sup X)`.
    fn atom_at_sup(&self) -> f64 {
        0.0
    }
    /// `P(X = ess inf X)`.
    fn atom_at_inf(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum TailShape {
    Weibull { lambda: f64, alpha: f64 },
    Pareto { alpha: f64 },
    Gumbel { alpha: f64 },
}

impl TailShape {
    /// Tail magnitude `Y ≥ x0` as a function of a unit exponential `u`.
    pub(crate) fn h(&self, x0: f64, u: f64) -> f64 {
        match *self {
            TailShape::Weibull { lambda, alpha } => (x0.powf(alpha) + u / lambda).powf(1.0 / alpha),
            TailShape::Pareto { alpha } => x0 * (u / alpha).exp(),
            TailShape::Gumbel { alpha } => {
                let a = x0.powf(alpha);
                (a + (u * (-a).exp()).ln_1p()).powf(1.0 / alpha)
            }
        }
    }

    /// Log of the tail form without the constant `q`, for `x ≥ x0`.
    pub(crate) fn ln_form(&self, x: f64) -> f64 {
        match *self {
            TailShape::Weibull { lambda, alpha } => -lambda * x.powf(alpha),
            TailShape::Pareto { alpha } => -alpha * x.ln(),
            TailShape::Gumbel { alpha } => -x.powf(alpha).exp(),
        }
    }

    /// Infimum of the tilts with `E[e^{-tY}] < ∞`, and whether it is attained.
    fn left_abscissa(&self) -> (f64, bool) {
        match *self {
            TailShape::Weibull { alpha, .. } if alpha < 1.0 => (0.0, true),
            TailShape::Weibull { lambda, alpha } if alpha == 1.0 => (-lambda, false),
            TailShape::Pareto { .. } => (0.0, true),
            _ => (f64::NEG_INFINITY, false),
        }
    }
}

/// Uniform core on `[c − x0, c + x0]` with mass `1 − τ`, plus the tail piece
/// `−Y`, `Y ≥ x0`, with mass `τ`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TailMix {
    pub(crate) shape: TailShape,
    pub(crate) q: f64,
    pub(crate) x0: f64,
    pub(crate) tau: f64,
    pub(crate) c: f64,
}

impl TailMix {
    fn new(shape: TailShape, q: f64, x0: f64) -> Result<Self> {
        if !(q > 0.0 && x0 > 0.0 && q.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidStep("tail needs q > 0 and x0 > 0".into()));
        }
        let tau = q * shape.ln_form(x0).exp();
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidStep(format!("tail mass q·form(x0) = {tau} must lie in (0, 1)")));
        }
        let mean_y = match shape {
            TailShape::Pareto { alpha } => x0 * alpha / (alpha - 1.0),
            _ => log_integral_exp(|u| shape.h(x0, u).ln() - u).exp(),
        };
        let c = tau * mean_y / (1.0 - tau);
        Ok(Self { shape, q, x0, tau, c })
    }

    /// `log E[e^{-tY}]`.
    pub(crate) fn ln_tail_mgf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let (lo, closed) = self.shape.left_abscissa();
        if t < lo || (t == lo && !closed) {
            return f64::INFINITY;
        }
        match self.shape {
            TailShape::Weibull { lambda, alpha } if alpha == 1.0 => -t * self.x0 - (t / lambda).ln_1p(),
            shape => log_integral_exp(|u| -t * shape.h(self.x0, u) - u),
        }
    }

    fn ln_core_mgf(&self, t: f64) -> f64 {
        t * self.c + ln_sinhc(t * self.x0)
    }

    fn log_mgf(&self, t: f64) -> f64 {
        let tail = self.ln_tail_mgf(t);
        if tail == f64::INFINITY {
            return f64::INFINITY;
        }
        log_add_exp((1.0 - self.tau).ln() + self.ln_core_mgf(t), self.tau.ln() + tail)
    }

    fn cdf(&self, x: f64) -> f64 {
        let lo = self.c - self.x0;
        if x <= -self.x0 {
            self.q * self.shape.ln_form(-x).exp()
        } else if x < lo {
            self.tau
        } else if x < self.c + self.x0 {
            self.tau + (1.0 - self.tau) * (x - lo) / (2.0 * self.x0)
        } else {
            1.0
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u < self.tau {
            let e: f64 = Exp1.sample(rng);
            -self.shape.h(self.x0, e)
        } else {
            self.c + self.x0 * (2.0 * rng.random::<f64>() - 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Discrete {
    pub(crate) xs: Vec<f64>,
    pub(crate) ps: Vec<f64>,
    cdf: Vec<f64>,
}

impl Discrete {
    fn log_mgf(&self, t: f64) -> f64 {
        if self.xs.len() == 2 && (self.ps[0] - 0.5).abs() < 1e-15 && (self.xs[0] + self.xs[1]).abs() < 1e-15 {
            return ln_cosh(t * self.xs[1]);
        }
        let terms: Vec<f64> = self.xs.iter().zip(&self.ps).map(|(x, p)| p.ln() + t * x).collect();
        log_sum_exp(&terms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    Discrete(Discrete),
    Gaussian { sigma: f64 },
    Tail(TailMix),
}

/// A validated, mean-zero step law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFamily", into = "StepFamily")]
pub struct StepLaw {
    family: StepFamily,
    pub(crate) kind: Kind,
    center_shift: f64,
}

impl TryFrom<StepFamily> for StepLaw {
    type Error = Error;
    fn try_from(f: StepFamily) -> Result<Self> {
        StepLaw::new(f)
    }
}

impl From<StepLaw> for StepFamily {
    fn from(s: StepLaw) -> Self {
        s.family
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStep(format!("{name} must be positive and finite, got {v}")))
    }
}

impl StepLaw {
    pub fn new(family: StepFamily) -> Result<Self> {
        let (kind, center_shift) = match &family {
            StepFamily::Rademacher { s } => {
                positive("s", *s)?;
                (Kind::Discrete(Discrete { xs: vec![-s, *s], ps: vec![0.5, 0.5], cdf: vec![0.5, 1.0] }), 0.0)
            }
            StepFamily::FiniteSupport { points } => {
                let mut pts: Vec<(f64, f64)> = Vec::new();
                for &(x, p) in points {
                    if !(x.is_finite() && p.is_finite() && p >= 0.0) {
                        return Err(Error::InvalidStep(format!("bad support point ({x}, {p})")));
                    }
                    if p > 0.0 {
                        pts.push((x, p));
                    }
                }
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.dedup_by(|a, b| {
                    if a.0 == b.0 {
                        b.1 += a.1;
                        true
                    } else {
                        false
                    }
                });
                let total: f64 = pts.iter().map(|e| e.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidStep(format!("probabilities sum to {total}")));
                }
                if pts.len() < 2 {
                    return Err(Error::InvalidStep("step law is degenerate".into()));
                }
                let mean: f64 = pts.iter().map(|(x, p)| x * p).sum();
                let xs: Vec<f64> = pts.iter().map(|(x, _)| x - mean).collect();
                let ps: Vec<f64> = pts.iter().map(|e| e.1).collect();
                let mut acc = 0.0;
                let cdf = ps
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                (Kind::Discrete(Discrete { xs, ps, cdf }), -mean)
            }
            StepFamily::Gaussian { sigma } => {
                positive("sigma", *sigma)?;
                (Kind::Gaussian { sigma: *sigma }, 0.0)
            }
            StepFamily::NegWeibull { lambda, alpha, q, x0 } => {
                positive("lambda", *lambda)?;
                positive("alpha", *alpha)?;
                let t = TailMix::new(TailShape::Weibull { lambda: *lambda, alpha: *alpha }, *q, *x0)?;
                let shift = t.c;
                (Kind::Tail(t), shift)
            }
            StepFamily::NegPareto { alpha, q, x0 } => {
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::InvalidStep(format!("Pareto exponent must exceed 1, got {alpha}")));
                }
                let t = TailMix::new(TailShape::Pareto { alpha: *alpha }, *q, *x0)?;
                let shift = t.c;
                (Kind::Tail(t), shift)
            }
            StepFamily::NegGumbel { alpha, q, x0 } => {
                positive("alpha", *alpha)?;
                let t = TailMix::new(TailShape::Gumbel { alpha: *alpha }, *q, *x0)?;
                let shift = t.c;
                (Kind::Tail(t), shift)
            }
        };
        Ok(Self { family, kind, center_shift })
    }

    pub fn rademacher(s: f64) -> Result<Self> {
        Self::new(StepFamily::Rademacher { s })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(StepFamily::Gaussian { sigma })
    }

    pub fn family(&self) -> &StepFamily {
        &self.family
    }

    /// Shift applied so the law has mean zero (zero for symmetric families;
    /// for tail families this is the center of the core).
    pub fn center_shift(&self) -> f64 {
        self.center_shift
    }

    pub fn tail_class(&self) -> TailClass {
        match &self.kind {
            Kind::Discrete(_) => TailClass::Bounded,
            Kind::Gaussian { .. } => TailClass::Gaussian,
            Kind::Tail(t) => match t.shape {
                TailShape::Weibull { lambda, alpha } => TailClass::Weibull { lambda, alpha },
                TailShape::Pareto { alpha } => TailClass::Pareto { alpha },
                TailShape::Gumbel { alpha } => TailClass::Gumbel { alpha },
            },
        }
    }

    /// `L = −ess inf X`.
    pub fn l(&self) -> f64 {
        -self.ess_inf()
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => {
                let i = d.xs.partition_point(|&v| v <= x);
                if i == 0 {
                    0.0
                } else {
                    d.cdf[i - 1]
                }
            }
            Kind::Gaussian { sigma } => Normal::new(0.0, *sigma).expect("sigma > 0").cdf(x),
            Kind::Tail(t) => t.cdf(x),
        }
    }

    /// `log P(X ≤ −x)`; exact closed form on the analytic tail.
    pub fn ln_left_tail(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Tail(t) if x >= t.x0 => t.q.ln() + t.shape.ln_form(x),
            Kind::Gaussian { sigma } => {
                let z = x / sigma;
                if z > 30.0 {
                    // Mills-ratio asymptotics
                    -0.5 * z * z - z.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
                        + (-1.0 / (z * z) + 3.0 / z.powi(4)).ln_1p()
                } else {
                    self.cdf(-x).ln()
                }
            }
            _ => self.cdf(-x).ln(),
        }
    }

    /// Mean, computed from the representation (zero up to rounding).
    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => d.xs.iter().zip(&d.ps).map(|(x, p)| x * p).sum(),
            Kind::Gaussian { .. } => 0.0,
            Kind::Tail(t) => {
                let ey = log_integral_exp(|u| t.shape.h(t.x0, u).ln() - u).exp();
                (1.0 - t.tau) * t.c - t.tau * ey
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => {
                let u: f64 = rng.random();
                let i = d.cdf.partition_point(|&c| c <= u).min(d.xs.len() - 1);
                d.xs[i]
            }
            Kind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            Kind::Tail(t) => t.sample(rng),
        }
    }

    /// Lattice representation for finite laws whose support points are
    /// commensurate; `None` otherwise.
    pub fn lattice(&self) -> Option<Lattice> {
        let Kind::Discrete(d) = &self.kind else { return None };
        let base = d.xs[0];
        let diffs: Vec<f64> = d.xs.iter().map(|x| x - base).collect();
        let scale = diffs[diffs.len() - 1];
        let tol = 1e-9 * scale;
        let mut span = diffs[1];
        for &v in &diffs[2..] {
            let (mut a, mut b) = (v.max(span), v.min(span));
            while b > tol {
                let r = a % b;
                a = b;
                b = if r > b - tol { 0.0 } else { r };
            }
            span = a;
        }
        if !(span > tol) || scale / span > 1e6 {
            return None;
        }
        let mut offsets = Vec::with_capacity(diffs.len());
        for &v in &diffs {
            let j = (v / span).round();
            if (v - j * span).abs() > 1e-8 * scale {
                return None;
            }
            offsets.push(j as i64);
        }
        Some(Lattice { base, span, offsets, probs: d.ps.clone() })
    }
}

impl LogMgf for StepLaw {
    fn log_mgf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Discrete(d) => d.log_mgf(t),
            Kind::Gaussian { sigma } => 0.5 * sigma * sigma * t * t,
            Kind::Tail(m) => m.log_mgf(t),
        }
    }

    fn domain(&self) -> MgfDomain {
        match &self.kind {
            Kind::Tail(m) => {
                let (lo, lo_closed) = m.shape.left_abscissa();
                MgfDomain { lo, lo_closed, hi: f64::INFINITY, hi_closed: false }
            }
            _ => MgfDomain::WHOLE_LINE,
        }
    }

    fn ess_sup(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => d.xs[d.xs.len() - 1],
            Kind::Gaussian { .. } => f64::INFINITY,
            Kind::Tail(t) => t.c + t.x0,
        }
    }

    fn ess_inf(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => d.xs[0],
            _ => f64::NEG_INFINITY,
        }
    }

    fn atom_at_sup(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => d.ps[d.ps.len() - 1],
            _ => 0.0,
        }
    }

    fn atom_at_inf(&self) -> f64 {
        match &self.kind {
            Kind::Discrete(d) => d.ps[0],
            _ => 0.0,
        }
    }
}
