//! Rate constants for `P(Z_n([θx*n, ∞)) < e^{an})` in every regime.

mod bottcher;
mod schroder;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{LogMgf, OffspringLaw, StepLaw, TailClass};
use crate::error::{Error, Result};
use crate::rate_fn::{x_star, RateFunction};

pub use bottcher::weibull_c_factor;
pub use table::{emit_regime_table, regime_rows, RegimeRow, TableFormat};

/// Which limit law governs the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    SchroderLight,
    SchroderPareto,
    SchroderWeibull,
    BottcherBounded,
    BottcherWeibull,
    BottcherGumbel,
    BottcherPareto,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Normalization under which `log P` (or `log(−log P)`) converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `−(1/n) log P → constant`.
    N,
    /// `−log P / log n → constant`.
    LogN,
    /// `−log P / n^α → constant`, with `α` in `exponent`.
    NAlpha,
    /// `(1/n) log(−log P) → constant`.
    LoglogLinearN,
    /// `log(−log P) / n^β → constant`, with `β` in `exponent`.
    LoglogNPower,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scale::N => "n",
            Scale::LogN => "log_n",
            Scale::NAlpha => "n_alpha",
            Scale::LoglogLinearN => "loglog_linear_n",
            Scale::LoglogNPower => "loglog_n_power",
        };
        f.write_str(s)
    }
}

/// Which side of a phase transition in `a` the model sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Single formula, no branching in `a`.
    Only,
    /// `a` at or below the threshold.
    LowA,
    /// `a` above the threshold.
    HighA,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Only => "only",
            Branch::LowA => "low_a",
            Branch::HighA => "high_a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationResult {
    pub regime: Regime,
    pub scale: Scale,
    pub constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    pub branch: Branch,
    pub aux: BTreeMap<String, f64>,
}

impl DeviationResult {
    fn new(regime: Regime, scale: Scale, constant: f64, branch: Branch) -> Self {
        Self { regime, scale, constant, exponent: None, branch, aux: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.aux.insert(key.to_string(), v);
        self
    }
}

/// Offspring law, step law, `θ` and `a`, with the derived speed `x*`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    off: OffspringLaw,
    rf: Arc<RateFunction>,
    theta: f64,
    a: f64,
    x_star: f64,
    log_m: f64,
}

impl ModelSpec {
    pub fn new(off: OffspringLaw, step: StepLaw, theta: f64, a: f64) -> Result<Self> {
        Self::with_rate_fn(off, Arc::new(RateFunction::new(step)?), theta, a)
    }

    /// Builds a model sharing an already classified rate function.
    pub fn with_rate_fn(off: OffspringLaw, rf: Arc<RateFunction>, theta: f64, a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidSpec(format!("theta = {theta} must lie in [0, 1)")));
        }
        let log_m = off.mean().ln();
        let x_star = x_star(&off, &rf);
        let spec = Self { off, rf, theta, a, x_star, log_m };
        let bound = spec.log_m - spec.i(theta * x_star);
        if !(a >= 0.0 && a < bound) {
            return Err(Error::InvalidSpec(format!("a = {a} must lie in [0, {bound})")));
        }
        Ok(spec)
    }

    /// Same laws with a different `a`.
    pub fn with_a(&self, a: f64) -> Result<Self> {
        Self::with_rate_fn(self.off.clone(), self.rf.clone(), self.theta, a)
    }

    /// Same laws with a different `θ` and `a`.
    pub fn with_theta_a(&self, theta: f64, a: f64) -> Result<Self> {
        Self::with_rate_fn(self.off.clone(), self.rf.clone(), theta, a)
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.off
    }

    pub fn step(&self) -> &StepLaw {
        self.rf.source()
    }

    pub fn rate_fn(&self) -> &Arc<RateFunction> {
        &self.rf
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn log_m(&self) -> f64 {
        self.log_m
    }

    /// `L = −ess inf X`.
    pub fn l(&self) -> f64 {
        -self.rf.ess_inf()
    }

    /// `I(x)`, treating arguments within rounding of the support edge as
    /// the edge itself.
    pub fn i(&self, x: f64) -> f64 {
        let sup = self.rf.ess_sup();
        let inf = self.rf.ess_inf();
        let snap = |edge: f64, x: f64| (x - edge).abs() <= 1e-13 * edge.abs().max(1.0);
        if sup.is_finite() && x > sup && snap(sup, x) {
            return self.rf.eval(sup);
        }
        if inf.is_finite() && x < inf && snap(inf, x) {
            return self.rf.eval(inf);
        }
        self.rf.eval(x)
    }

    /// Largest `a` allowed by the model, `log m − I(θx*)`.
    pub fn a_upper(&self) -> f64 {
        self.log_m - self.i(self.theta * self.x_star)
    }

    /// Branch threshold `log m − I(x*)` (zero unless `x*` sits on the
    /// support edge).
    pub fn a_branch(&self) -> f64 {
        (self.log_m - self.i(self.x_star)).max(0.0)
    }

    fn mismatch(&self, expected: &str) -> Error {
        match self.classify_regime() {
            Ok(found) => Error::RegimeMismatch { expected: expected.to_string(), found },
            Err(e) => e,
        }
    }

    /// Selects the regime from `p1` and the left-tail class.
    pub fn classify_regime(&self) -> Result<Regime> {
        let schroder = self.off.p1() > 0.0;
        let class = self.step().tail_class();
        let light_left = self.step().log_mgf(-1e-3).is_finite()
            || self.step().domain().lo < 0.0;
        Ok(match (schroder, class) {
            (true, TailClass::Pareto { .. }) => Regime::SchroderPareto,
            (true, TailClass::Weibull { alpha, .. }) if alpha < 1.0 => Regime::SchroderWeibull,
            (true, _) if light_left => Regime::SchroderLight,
            (true, c) => return Err(Error::UnsupportedRegime(format!("p1 > 0 with left tail {c:?}"))),
            (false, TailClass::Bounded) => Regime::BottcherBounded,
            (false, TailClass::Weibull { .. }) => Regime::BottcherWeibull,
            (false, TailClass::Gumbel { .. }) => Regime::BottcherGumbel,
            (false, TailClass::Pareto { .. }) => Regime::BottcherPareto,
            (false, c) => {
                return Err(Error::UnsupportedRegime(format!(
                    "p1 = 0 with unbounded {c:?} left tail is not covered"
                )))
            }
        })
    }

    /// The rate constant for the model's regime.
    pub fn rate(&self) -> Result<DeviationResult> {
        match self.classify_regime()? {
            Regime::SchroderLight => self.schroder_light_rate(),
            Regime::SchroderPareto | Regime::SchroderWeibull => self.schroder_heavy_rate(),
            Regime::BottcherBounded => self.bottcher_bounded_rate(),
            Regime::BottcherWeibull => self.bottcher_weibull_rate(),
            Regime::BottcherGumbel | Regime::BottcherPareto => self.bottcher_remark_rates(),
        }
    }

    /// `ĉ`: `(1−θ)x*` when `a ≤ log m − I(x*)`, else the root of
    /// `log m − I(θx* + c) = a` on `(0, (1−θ)x*)`.
    pub fn c_hat(&self) -> f64 {
        let full = (1.0 - self.theta) * self.x_star;
        if self.a <= self.a_branch() {
            return full;
        }
        let g = |c: f64| self.log_m - self.i(self.theta * self.x_star + c) - self.a;
        crate::numeric::bisect_boundary(|c| g(c) >= 0.0, 0.0, full, 1e-13 * full.max(1.0))
    }

    fn tail_branch(&self) -> (Branch, f64) {
        if self.a <= self.a_branch() {
            (Branch::LowA, (1.0 - self.theta) * self.x_star)
        } else {
            (Branch::HighA, self.c_hat())
        }
    }
}
