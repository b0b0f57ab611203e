//! Böttcher regime (`p1 = 0`): every particle has at least `b ≥ 2` children.

use std::io::Write;

use super::{Branch, DeviationResult, ModelSpec, Regime, Scale};
use crate::distributions::TailClass;
use crate::error::{Error, Result};
use crate::numeric::bisect_boundary;

/// `b` for `α ≤ 1`, `(b^{1/(α−1)} − 1)^{α−1}` for `α > 1`, evaluated in
/// log space so `α` near 1 does not overflow.
pub fn weibull_c_factor(b: f64, alpha: f64) -> f64 {
    if alpha <= 1.0 {
        return b;
    }
    let lb = b.ln();
    (lb + (alpha - 1.0) * (-(-lb / (alpha - 1.0)).exp()).ln_1p()).exp()
}

impl ModelSpec {
    fn log_b(&self) -> f64 {
        (self.off.b() as f64).ln()
    }

    fn require(&self, regime: Regime) -> Result<()> {
        if self.classify_regime()? == regime {
            Ok(())
        } else {
            Err(self.mismatch(&regime.to_string()))
        }
    }

    /// Right end `(1−θ)x*/(L+x*)` of the interval holding `c̄(L)`.
    pub fn c_max_for(&self, l: f64) -> f64 {
        (1.0 - self.theta) * self.x_star / (l + self.x_star)
    }

    /// Phase-transition point `a*` for a displacement bound `L`.
    pub fn a_star_for(&self, l: f64) -> f64 {
        let xs = self.x_star;
        let first = self.a_branch() * (l + self.theta * xs) / (l + xs) + self.c_max_for(l) * self.log_b();
        first.min(self.a_upper())
    }

    pub fn a_star(&self) -> Result<f64> {
        self.require(Regime::BottcherBounded)?;
        Ok(self.a_star_for(self.l()))
    }

    /// `F_L(c) = log m − I((θx* + Lc)/(1−c)) − (a − c log b)/(1−c)`.
    pub fn f_l(&self, c: f64, l: f64) -> f64 {
        let x = (self.theta * self.x_star + l * c) / (1.0 - c);
        let r = self.log_m - self.i(x) - (self.a - c * self.log_b()) / (1.0 - c);
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    }

    /// Root `c̄(L)` of `F_L` on `(0, (1−θ)x*/(L+x*)]`.
    pub fn c_bar_for(&self, l: f64) -> Result<f64> {
        let hi = self.c_max_for(l);
        let (f_lo, f_hi) = (self.f_l(0.0, l), self.f_l(hi, l));
        if f_hi.abs() <= 1e-14 {
            return Ok(hi);
        }
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::NoBracket { function: "F_L", lo: 0.0, hi, f_lo, f_hi });
        }
        Ok(bisect_boundary(|c| self.f_l(c, l) >= 0.0, 0.0, hi, 1e-14))
    }

    pub fn c_bar(&self) -> Result<f64> {
        self.require(Regime::BottcherBounded)?;
        self.c_bar_for(self.l())
    }

    /// Exponent of the uniform strategy with displacement bound `L`:
    /// `(1−θ)x*/(L+x*)` below `a*(L)`, `c̄(L)` from `a*(L)` on.
    pub fn c_star_for(&self, l: f64) -> Result<f64> {
        if self.a < self.a_star_for(l) {
            Ok(self.c_max_for(l))
        } else {
            self.c_bar_for(l)
        }
    }

    /// Bounded steps: `(1/n) log(−log P) → c·log b`.
    pub fn bottcher_bounded_rate(&self) -> Result<DeviationResult> {
        self.require(Regime::BottcherBounded)?;
        let l = self.l();
        let a_star = self.a_star_for(l);
        let (branch, c) = if self.a < a_star {
            (Branch::LowA, self.c_max_for(l))
        } else {
            (Branch::HighA, self.c_bar_for(l)?)
        };
        let mut r = DeviationResult::new(Regime::BottcherBounded, Scale::LoglogLinearN, c * self.log_b(), branch)
            .with("a_star", a_star)
            .with("L", l)
            .with("x_star", self.x_star);
        if branch == Branch::HighA {
            r = r.with("c_bar", c);
        }
        Ok(r)
    }

    /// Weibull left tail: `−log P / n^α → λ·C`.
    pub fn bottcher_weibull_rate(&self) -> Result<DeviationResult> {
        self.require(Regime::BottcherWeibull)?;
        let TailClass::Weibull { lambda, alpha } = self.step().tail_class() else {
            return Err(self.mismatch("BottcherWeibull"));
        };
        let (branch, depth) = self.tail_branch();
        let c = weibull_c_factor(self.off.b() as f64, alpha) * depth.powf(alpha);
        let mut r = DeviationResult::new(Regime::BottcherWeibull, Scale::NAlpha, lambda * c, branch)
            .with("C", c)
            .with("c_hat", self.c_hat())
            .with("x_star", self.x_star);
        r.exponent = Some(alpha);
        Ok(r)
    }

    /// Gumbel left tail: `log(−log P)/n^β → (β log b)^β·depth^β` with
    /// `β = α/(1+α)`; Pareto left tail: `−log P / log n → αb`.
    pub fn bottcher_remark_rates(&self) -> Result<DeviationResult> {
        let regime = self.classify_regime()?;
        let b = self.off.b() as f64;
        match (regime, self.step().tail_class()) {
            (Regime::BottcherGumbel, TailClass::Gumbel { alpha }) => {
                let beta = alpha / (1.0 + alpha);
                let (branch, depth) = self.tail_branch();
                let constant = (beta * b.ln()).powf(beta) * depth.powf(beta);
                let mut r = DeviationResult::new(regime, Scale::LoglogNPower, constant, branch)
                    .with("c_hat", self.c_hat())
                    .with("x_star", self.x_star);
                r.exponent = Some(beta);
                Ok(r)
            }
            (Regime::BottcherPareto, TailClass::Pareto { alpha }) => {
                Ok(DeviationResult::new(regime, Scale::LogN, alpha * b, Branch::Only))
            }
            _ => Err(self.mismatch("BottcherGumbel or BottcherPareto")),
        }
    }

    /// CSV of `c, F_L(c)` over `(0, (1−θ)x*/(L+x*)]`.
    pub fn f_l_curve_csv<W: Write>(&self, mut w: W, points: usize) -> Result<()> {
        let l = self.l();
        let hi = self.c_max_for(l);
        let io = |e: std::io::Error| Error::InvalidSpec(format!("write failed: {e}"));
        writeln!(w, "c,F_L").map_err(io)?;
        for k in 0..=points {
            let c = hi * k as f64 / points as f64;
            writeln!(w, "{c},{}", self.f_l(c, l)).map_err(io)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{OffspringLaw, StepLaw};

    fn binary(theta: f64, a: f64) -> ModelSpec {
        let o = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        ModelSpec::new(o, StepLaw::rademacher(1.0).unwrap(), theta, a).unwrap()
    }

    #[test]
    fn a_star_binary_rademacher() {
        let s = binary(0.0, 0.1);
        assert!((s.a_star().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
        let r = s.bottcher_bounded_rate().unwrap();
        assert!((r.constant - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.branch, Branch::LowA);
    }

    #[test]
    fn c_bar_root() {
        let s = binary(0.0, 0.6);
        let c = s.c_bar().unwrap();
        assert!(c > 0.0 && c < 0.5);
        assert!(s.f_l(c, 1.0).abs() < 1e-9);
        assert!(s.f_l(c - 1e-3, 1.0) > 0.0 && s.f_l(c + 1e-3, 1.0) < 0.0);
    }

    #[test]
    fn half_theta() {
        let r = binary(0.5, 0.0).bottcher_bounded_rate().unwrap();
        assert!((r.constant - 0.25 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn weibull_factor_limits() {
        assert_eq!(weibull_c_factor(2.0, 0.5), 2.0);
        assert!((weibull_c_factor(2.0, 2.0) - 1.0).abs() < 1e-15);
        let below = weibull_c_factor(3.0, 1.0 - 1e-4);
        let above = weibull_c_factor(3.0, 1.0 + 1e-4);
        assert!(((above - below) / below).abs() < 1e-3);
        // (b^{1/(α−1)} − 1)^{α−1} evaluated directly away from α = 1
        let direct = (3f64.powf(1.0 / 1.5) - 1.0).powf(1.5);
        assert!((weibull_c_factor(3.0, 2.5) - direct).abs() < 1e-13);
    }

    #[test]
    fn regime_mismatch_is_reported() {
        let o = OffspringLaw::new(vec![(1, 0.5), (2, 0.5)]).unwrap();
        let s = ModelSpec::new(o, StepLaw::rademacher(1.0).unwrap(), 0.3, 0.1).unwrap();
        assert!(matches!(s.a_star(), Err(Error::RegimeMismatch { .. })));
        assert!(matches!(s.bottcher_weibull_rate(), Err(Error::RegimeMismatch { .. })));
    }
}
