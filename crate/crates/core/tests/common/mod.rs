//! Closed-form oracles shared by integration tests.
#![allow(dead_code)]

use lowdev_core::distributions::StepLaw;

/// Closed-form rate function of the oracle specs.
#[derive(Clone, Copy)]
pub enum Closed {
    Rademacher(f64),
    Gaussian(f64),
}

impl Closed {
    pub fn i(self, x: f64) -> f64 {
        match self {
            Closed::Rademacher(s) => {
                let u = x / s;
                if u.abs() > 1.0 {
                    return f64::INFINITY;
                }
                let f = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
                (f(1.0 + u) + f(1.0 - u)) / 2.0
            }
            Closed::Gaussian(s) => x * x / (2.0 * s * s),
        }
    }

    pub fn law(self) -> StepLaw {
        match self {
            Closed::Rademacher(s) => StepLaw::rademacher(s).unwrap(),
            Closed::Gaussian(s) => StepLaw::gaussian(s).unwrap(),
        }
    }

    pub fn sup(self) -> f64 {
        match self {
            Closed::Rademacher(s) => s,
            Closed::Gaussian(_) => f64::INFINITY,
        }
    }
}

/// Last point in `[lo, hi]` where the nonincreasing predicate holds.
pub fn bisect(holds: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub struct Oracle {
    pub law: Closed,
    pub log_m: f64,
    pub p1: f64,
    pub theta: f64,
    pub a: f64,
    pub x_star: f64,
}

impl Oracle {
    pub fn new(law: Closed, probs: &[(u32, f64)], theta: f64, a: f64) -> Self {
        let m: f64 = probs.iter().map(|(k, p)| *k as f64 * p).sum();
        let p1 = probs.iter().find(|(k, _)| *k == 1).map_or(0.0, |(_, p)| *p);
        let cap = if law.sup().is_finite() { law.sup() } else { 100.0 };
        let x_star = bisect(|x| law.i(x) <= m.ln(), 0.0, cap);
        Self { law, log_m: m.ln(), p1, theta, a, x_star }
    }

    pub fn rho_bar(&self) -> f64 {
        bisect(
            |r| self.log_m - self.law.i(self.theta * self.x_star / (1.0 - r)) - self.a / (1.0 - r) >= 0.0,
            0.0,
            1.0 - 1e-12,
        )
    }

    pub fn d(&self, r: f64) -> f64 {
        let g = |h: f64| self.log_m - self.law.i((h + self.theta * self.x_star) / (1.0 - r)) - self.a / (1.0 - r);
        bisect(|h| g(h) >= 0.0, 0.0, 100.0)
    }

    /// Dense `ρ` grid with step 1e-3.
    pub fn brute_force(&self) -> f64 {
        let rb = self.rho_bar();
        let mut best = f64::INFINITY;
        let mut r = 1e-3;
        while r <= rb {
            let v = r * (-self.p1.ln()) + r * self.law.i(-self.d(r) / r);
            best = best.min(v);
            r += 1e-3;
        }
        best.min(rb * (-self.p1.ln()) + rb * self.law.i(-self.d(rb) / rb))
    }
}

pub fn fixtures() -> Vec<(Closed, Vec<(u32, f64)>, f64, f64)> {
    vec![
        (Closed::Rademacher(1.0), vec![(1, 0.5), (2, 0.5)], 0.3, 0.1),
        (Closed::Rademacher(1.0), vec![(1, 0.3), (2, 0.7)], 0.5, 0.05),
        (Closed::Rademacher(2.0), vec![(1, 0.5), (2, 0.2), (3, 0.3)], 0.0, 0.2),
        (Closed::Gaussian(1.0), vec![(1, 0.5), (2, 0.5)], 0.3, 0.1),
        (Closed::Gaussian(1.5), vec![(1, 0.2), (2, 0.8)], 0.6, 0.02),
    ]
}

