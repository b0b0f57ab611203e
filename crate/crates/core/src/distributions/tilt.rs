//! Exponentially tilted step laws `dP_t = e^{tx − Λ(t)} dP`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};

use super::step::{Kind, LogMgf, StepLaw, TailMix};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, log_integral_exp};

#[derive(Debug, Clone)]
enum Sampler {
    Discrete { xs: Vec<f64>, cdf: Vec<f64> },
    Gaussian { mean: f64, sigma: f64 },
    Tail(TiltedTail),
}

#[derive(Debug, Clone)]
struct TiltedTail {
    mix: TailMix,
    t: f64,
    /// Probability that a tilted draw comes from the tail piece.
    tail_weight: f64,
    /// Rate of the exponential proposal for the tail coordinate `u`.
    beta: f64,
    /// Upper bound of `−t·h(u) − u + βu`.
    envelope: f64,
}

/// Sampler for the tilted law plus the per-sample log-likelihood ratio
/// `log dP/dP_t (x) = Λ(t) − t x`.
#[derive(Debug, Clone)]
pub struct TiltedStep {
    t: f64,
    lambda_t: f64,
    sampler: Sampler,
}

impl TiltedStep {
    pub fn new(law: &StepLaw, t: f64) -> Result<Self> {
        let lambda_t = law.log_mgf(t);
        if !lambda_t.is_finite() {
            return Err(Error::TiltOutsideDomain { t });
        }
        let sampler = match &law.kind {
            Kind::Discrete(d) => {
                let mut acc = 0.0;
                let cdf = d
                    .xs
                    .iter()
                    .zip(&d.ps)
                    .map(|(x, p)| {
                        acc += (p.ln() + t * x - lambda_t).exp();
                        acc
                    })
                    .collect();
                Sampler::Discrete { xs: d.xs.clone(), cdf }
            }
            Kind::Gaussian { sigma } => Sampler::Gaussian { mean: sigma * sigma * t, sigma: *sigma },
            Kind::Tail(m) => Sampler::Tail(TiltedTail::new(m.clone(), t, lambda_t)?),
        };
        Ok(Self { t, lambda_t, sampler })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda_t(&self) -> f64 {
        self.lambda_t
    }

    /// Probabilities of the tilted law on its support, for finite laws.
    pub fn discrete_probs(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.sampler {
            Sampler::Discrete { xs, cdf } => {
                let mut prev = 0.0;
                let ps = cdf
                    .iter()
                    .map(|c| {
                        let p = c - prev;
                        prev = *c;
                        p
                    })
                    .collect();
                Some((xs.clone(), ps))
            }
            _ => None,
        }
    }

    /// `log dP/dP_t` at a single draw.
    pub fn log_ratio(&self, x: f64) -> f64 {
        self.lambda_t - self.t * x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            Sampler::Discrete { xs, cdf } => {
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                let i = cdf.partition_point(|&c| c <= u).min(xs.len() - 1);
                xs[i]
            }
            Sampler::Gaussian { mean, sigma } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                mean + sigma * z
            }
            Sampler::Tail(tt) => tt.sample(rng),
        }
    }
}

impl TiltedTail {
    fn new(mix: TailMix, t: f64, lambda_t: f64) -> Result<Self> {
        let ln_tail = mix.ln_tail_mgf(t);
        let tail_weight = (mix.tau.ln() + ln_tail - lambda_t).exp().clamp(0.0, 1.0);
        let shape = mix.shape;
        let x0 = mix.x0;
        let phi = |u: f64| -t * shape.h(x0, u) - u;
        // Pick the proposal rate with the tightest envelope.
        let mut best: Option<(f64, f64)> = None;
        for beta in [1.0, 0.9, 0.7, 0.5, 0.35, 0.2, 0.1, 0.05, 0.02, 0.01, 0.003, 0.001] {
            let psi = |u: f64| phi(u) + beta * u;
            let mut arg = 0.0;
            let mut top = psi(0.0);
            let mut bounded = true;
            let mut u = 2f64.powi(-20);
            let mut last = top;
            while u < 1e12 {
                let v = psi(u);
                if v > top {
                    top = v;
                    arg = u;
                }
                last = v;
                u *= 2.0;
            }
            if last >= top - 1e-9 {
                bounded = false;
            }
            if !bounded || !top.is_finite() {
                continue;
            }
            if arg > 0.0 {
                let (_, v) = golden_max(psi, 0.5 * arg, 2.0 * arg, 1e-12 * arg);
                top = top.max(v);
            }
            // log of expected proposals per acceptance: envelope − ln β − ln Z
            let envelope = top + 1e-9 * top.abs().max(1.0);
            let cost = envelope - beta.ln();
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, beta));
            }
        }
        let Some((cost, beta)) = best else { return Err(Error::TiltOutsideDomain { t }) };
        let envelope = cost + beta.ln();
        debug_assert!(cost - log_integral_exp(phi) > -1e-6);
        Ok(Self { mix, t, tail_weight, beta, envelope })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = &self.mix;
        if rng.random::<f64>() < self.tail_weight {
            let prop = Exp::new(self.beta).expect("positive rate");
            loop {
                let u: f64 = if self.beta == 1.0 { Exp1.sample(rng) } else { prop.sample(rng) };
                let y = m.shape.h(m.x0, u);
                let log_acc = -self.t * y - u + self.beta * u - self.envelope;
                if rng.random::<f64>().ln() < log_acc {
                    return -y;
                }
            }
        }
        // core: density ∝ e^{tx} on [c − x0, c + x0]
        let lo = m.c - m.x0;
        let w = 2.0 * m.x0;
        let v: f64 = rng.random();
        let s = self.t * w;
        if s.abs() < 1e-12 {
            return lo + v * w;
        }
        // inverse CDF, written to avoid overflow for large |s|
        let off = if s > 0.0 {
            w + (v + (1.0 - v) * (-s).exp()).ln() / self.t
        } else {
            (v * s.exp_m1()).ln_1p() / self.t
        };
        lo + off.clamp(0.0, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::StepFamily;
    use crate::rng::StreamKey;

    #[test]
    fn rademacher_tilt_formula() {
        let r = StepLaw::rademacher(1.0).unwrap();
        for t in [-2.0, -0.3, 0.7] {
            let (xs, ps) = TiltedStep::new(&r, t).unwrap().discrete_probs().unwrap();
            assert_eq!(xs, vec![-1.0, 1.0]);
            let expect = t.exp() / (t.exp() + (-t).exp());
            assert!((ps[1] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_tilt_is_identity() {
        let r = StepLaw::rademacher(1.0).unwrap();
        let tt = TiltedStep::new(&r, 0.0).unwrap();
        assert_eq!(tt.log_ratio(1.0), 0.0);
        assert_eq!(tt.log_ratio(-1.0), 0.0);
        let (_, ps) = tt.discrete_probs().unwrap();
        assert_eq!(ps, vec![0.5, 0.5]);
    }

    #[test]
    fn gaussian_tilt_shifts_mean() {
        let g = StepLaw::gaussian(1.0).unwrap();
        let tt = TiltedStep::new(&g, -1.0).unwrap();
        let mut rng = StreamKey::new(5).rng();
        let n = 1_000_000;
        let mean = (0..n).map(|_| tt.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean + 1.0).abs() < 0.005, "{mean}");
    }

    #[test]
    fn outside_domain_is_an_error() {
        let w = StepLaw::new(StepFamily::NegWeibull { lambda: 1.0, alpha: 0.5, q: 0.2, x0: 1.0 }).unwrap();
        assert_eq!(TiltedStep::new(&w, -0.5).unwrap_err(), Error::TiltOutsideDomain { t: -0.5 });
    }

    #[test]
    fn tail_tilt_mean_matches_derivative() {
        let fams = [
            (StepFamily::NegWeibull { lambda: 1.0, alpha: 2.0, q: 0.5, x0: 1.0 }, -1.5),
            (StepFamily::NegWeibull { lambda: 1.0, alpha: 1.0, q: 0.5, x0: 1.0 }, -0.5),
            (StepFamily::NegWeibull { lambda: 1.0, alpha: 0.5, q: 0.2, x0: 1.0 }, 0.8),
            (StepFamily::NegGumbel { alpha: 1.0, q: 1.0, x0: 1.0 }, -2.0),
        ];
        for (f, t) in fams {
            let s = StepLaw::new(f.clone()).unwrap();
            let h = 1e-5;
            let deriv = (s.log_mgf(t + h) - s.log_mgf(t - h)) / (2.0 * h);
            let tt = TiltedStep::new(&s, t).unwrap();
            let mut rng = StreamKey::new(6).rng();
            let n = 400_000;
            let xs: Vec<f64> = (0..n).map(|_| tt.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let se = sd / (n as f64).sqrt();
            assert!((mean - deriv).abs() < 4.0 * se + 1e-6, "{f:?}: {mean} vs {deriv} (se {se})");
        }
    }
}
