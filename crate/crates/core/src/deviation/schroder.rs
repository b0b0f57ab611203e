//! Schröder regime (`p1 > 0`): single-lineage strategy constants.

use std::io::Write;

use super::{Branch, DeviationResult, ModelSpec, Regime, Scale};
use crate::distributions::TailClass;
use crate::error::{Error, Result};
use crate::numeric::{bisect_boundary, golden_min};

impl ModelSpec {
    /// `f(ρ) = log m − I(θx*/(1−ρ)) − a/(1−ρ)`.
    pub fn f_rho(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let r = self.log_m - self.i(self.theta * self.x_star / (1.0 - rho)) - self.a / (1.0 - rho);
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    }

    /// `g_ρ(h) = log m − I((h + θx*)/(1−ρ)) − a/(1−ρ)`.
    pub fn g_rho(&self, rho: f64, h: f64) -> f64 {
        if rho >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let r = self.log_m - self.i((h + self.theta * self.x_star) / (1.0 - rho)) - self.a / (1.0 - rho);
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    }

    /// `ρ̄ = sup{ρ ∈ (0,1) : f(ρ) ≥ 0}`.
    pub fn rho_bar(&self) -> Result<f64> {
        if self.theta == 0.0 && self.a == 0.0 {
            return Err(Error::DegenerateSpec("f(ρ) is constant when θ = 0 and a = 0".into()));
        }
        let sup = self.rf.ess_sup();
        if self.theta > 0.0 && sup.is_finite() {
            // beyond the support edge f = −∞, so the edge itself may be ρ̄
            let edge = 1.0 - self.theta * self.x_star / sup;
            if edge > 0.0 && self.f_rho(edge) >= 0.0 {
                return Ok(edge);
            }
        }
        Ok(bisect_boundary(|r| self.f_rho(r) >= 0.0, 0.0, 1.0, 1e-14))
    }

    /// `d(ρ) = sup{h ≥ 0 : g_ρ(h) ≥ 0}`.
    pub fn d_of_rho(&self, rho: f64) -> f64 {
        if self.g_rho(rho, 0.0) < 0.0 {
            return 0.0;
        }
        let sup = self.rf.ess_sup();
        if sup.is_finite() {
            let edge = (1.0 - rho) * sup - self.theta * self.x_star;
            if edge >= 0.0 && self.g_rho(rho, edge) >= 0.0 {
                return edge;
            }
        }
        let mut hi = 1.0;
        while self.g_rho(rho, hi) >= 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        bisect_boundary(|h| self.g_rho(rho, h) >= 0.0, 0.0, hi, 1e-14 * hi)
    }

    /// `ρ log(1/p1) + ρ I(−d(ρ)/ρ)`.
    pub fn schroder_objective(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return f64::INFINITY;
        }
        let d = self.d_of_rho(rho);
        rho * (-self.off.p1().ln()) + rho * self.i(-d / rho)
    }

    /// Light-tailed Schröder constant `inf_{ρ ∈ (0, ρ̄]} ρ log(1/p1) + ρ I(−d/ρ)`.
    pub fn schroder_light_rate(&self) -> Result<DeviationResult> {
        if self.classify_regime()? != Regime::SchroderLight {
            return Err(self.mismatch("SchroderLight"));
        }
        let rho_bar = self.rho_bar()?;
        let n = 200;
        let grid: Vec<f64> = (1..=n).map(|k| rho_bar * k as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| self.schroder_objective(r)).collect();
        let k = (0..n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).expect("non-empty grid");
        let lo = if k == 0 { 1e-3 * grid[0] } else { grid[k - 1] };
        let hi = grid[(k + 1).min(n - 1)];
        let (mut rho, mut val) = golden_min(|r| self.schroder_objective(r), lo, hi, 1e-12);
        if vals[k] < val {
            rho = grid[k];
            val = vals[k];
        }
        Ok(DeviationResult::new(Regime::SchroderLight, Scale::N, val, Branch::Only)
            .with("rho_bar", rho_bar)
            .with("rho_opt", rho)
            .with("d_opt", self.d_of_rho(rho))
            .with("x_star", self.x_star))
    }

    /// Heavy left tails with `p1 > 0`: Pareto gives `(log n, α)`, Weibull
    /// with `α < 1` gives `(n^α, λ(1−θ)x*)` or `(n^α, λĉ)`.
    pub fn schroder_heavy_rate(&self) -> Result<DeviationResult> {
        let regime = self.classify_regime()?;
        match (regime, self.step().tail_class()) {
            (Regime::SchroderPareto, TailClass::Pareto { alpha }) => {
                Ok(DeviationResult::new(regime, Scale::LogN, alpha, Branch::Only))
            }
            (Regime::SchroderWeibull, TailClass::Weibull { lambda, alpha }) => {
                let (branch, depth) = self.tail_branch();
                let mut r = DeviationResult::new(regime, Scale::NAlpha, lambda * depth, branch)
                    .with("c_hat", self.c_hat())
                    .with("x_star", self.x_star);
                r.exponent = Some(alpha);
                Ok(r)
            }
            _ => Err(self.mismatch("SchroderPareto or SchroderWeibull")),
        }
    }

    /// CSV of `ρ, f(ρ), d(ρ), objective(ρ)` on `points` grid nodes of `(0, ρ̄]`.
    pub fn schroder_curves_csv<W: Write>(&self, mut w: W, points: usize) -> Result<()> {
        let rho_bar = self.rho_bar()?;
        let io = |e: std::io::Error| Error::InvalidSpec(format!("write failed: {e}"));
        writeln!(w, "rho,f,d,objective").map_err(io)?;
        for k in 1..=points {
            let r = rho_bar * k as f64 / points as f64;
            writeln!(w, "{r},{},{},{}", self.f_rho(r), self.d_of_rho(r), self.schroder_objective(r)).map_err(io)?;
        }
        Ok(())
    }
}
