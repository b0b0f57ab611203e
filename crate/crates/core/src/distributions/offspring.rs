use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-support reproduction law `{p_k}` with `p_0 = 0`, `p_1 < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OffspringRepr", into = "OffspringRepr")]
pub struct OffspringLaw {
    probs: Vec<(u32, f64)>,
    cdf: Vec<f64>,
    m: f64,
}

#[derive(Serialize, Deserialize)]
struct OffspringRepr {
    probs: Vec<(u32, f64)>,
}

impl TryFrom<OffspringRepr> for OffspringLaw {
    type Error = Error;
    fn try_from(r: OffspringRepr) -> Result<Self> {
        OffspringLaw::new(r.probs)
    }
}

impl From<OffspringLaw> for OffspringRepr {
    fn from(l: OffspringLaw) -> Self {
        OffspringRepr { probs: l.probs }
    }
}

impl OffspringLaw {
    /// Builds a law from `(k, p_k)` pairs. Zero-mass entries are dropped and
    /// duplicate `k` are merged.
    pub fn new(pairs: Vec<(u32, f64)>) -> Result<Self> {
        let mut probs: Vec<(u32, f64)> = Vec::new();
        for (k, p) in pairs {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidOffspring(format!("p_{k} = {p} is not a probability")));
            }
            if p == 0.0 {
                continue;
            }
            match probs.iter_mut().find(|(j, _)| *j == k) {
                Some(e) => e.1 += p,
                None => probs.push((k, p)),
            }
        }
        probs.sort_by_key(|e| e.0);
        let total: f64 = probs.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidOffspring(format!("probabilities sum to {total}")));
        }
        if probs.first().map(|e| e.0) == Some(0) {
            return Err(Error::InvalidOffspring("p_0 must be 0".into()));
        }
        if probs.len() == 1 && probs[0].0 == 1 {
            return Err(Error::InvalidOffspring("p_1 must be < 1".into()));
        }
        let m: f64 = probs.iter().map(|&(k, p)| k as f64 * p).sum();
        if !(m > 1.0) {
            return Err(Error::InvalidOffspring(format!("mean {m} must exceed 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|e| {
                acc += e.1;
                acc
            })
            .collect();
        Ok(Self { probs, cdf, m })
    }

    pub fn probs(&self) -> &[(u32, f64)] {
        &self.probs
    }

    /// Mean offspring number.
    pub fn mean(&self) -> f64 {
        self.m
    }

    /// Smallest possible offspring number.
    pub fn b(&self) -> u32 {
        self.probs[0].0
    }

    pub fn p(&self, k: u32) -> f64 {
        self.probs.iter().find(|e| e.0 == k).map_or(0.0, |e| e.1)
    }

    pub fn p1(&self) -> f64 {
        self.p(1)
    }

    /// Mass at the minimal offspring number `b`.
    pub fn p_b(&self) -> f64 {
        self.probs[0].1
    }

    pub fn max_k(&self) -> u32 {
        self.probs[self.probs.len() - 1].0
    }

    /// Probability generating function `E[s^K]`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().map(|&(k, p)| p * s.powi(k as i32)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
        self.probs[i].0
    }

    /// Multinomial counts of parents choosing each support point, for `n`
    /// parents. Entry `i` pairs with `probs()[i]`.
    pub fn sample_counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<u64> {
        multinomial(n, self.probs.iter().map(|e| e.1), rng)
    }

    /// Total offspring of `n` independent parents.
    pub fn sample_total<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        if n < 16 {
            return (0..n).map(|_| self.sample(rng) as u64).sum();
        }
        self.sample_counts(n, rng)
            .iter()
            .zip(&self.probs)
            .map(|(c, e)| c * e.0 as u64)
            .sum()
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(
    n: u64,
    probs: impl IntoIterator<Item = f64>,
    rng: &mut R,
) -> Vec<u64> {
    let probs: Vec<f64> = probs.into_iter().collect();
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = probs.iter().sum::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn validation() {
        assert!(OffspringLaw::new(vec![(0, 0.5), (2, 0.5)]).is_err());
        assert!(OffspringLaw::new(vec![(1, 1.0)]).is_err());
        assert!(OffspringLaw::new(vec![(1, 0.5), (2, 0.4)]).is_err());
        let l = OffspringLaw::new(vec![(2, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(l.b(), 1);
        assert_eq!(l.p1(), 0.5);
        assert_eq!(l.mean(), 1.5);
    }

    #[test]
    fn degenerate_law_always_two() {
        let l = OffspringLaw::new(vec![(2, 1.0)]).unwrap();
        let mut rng = StreamKey::new(1).rng();
        assert!((0..1000).all(|_| l.sample(&mut rng) == 2));
        assert_eq!(l.sample_total(1000, &mut rng), 2000);
    }

    #[test]
    fn empirical_mean_and_p1() {
        let l = OffspringLaw::new(vec![(1, 0.5), (2, 0.5)]).unwrap();
        let mut rng = StreamKey::new(2).rng();
        let n = 1_000_000;
        let mut ones = 0u64;
        let mut sum = 0u64;
        for _ in 0..n {
            let k = l.sample(&mut rng);
            sum += k as u64;
            ones += (k == 1) as u64;
        }
        assert!((sum as f64 / n as f64 - 1.5).abs() < 0.002);
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = StreamKey::new(3).rng();
        let c = multinomial(12345, [0.2, 0.3, 0.5], &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 12345);
    }

    #[test]
    fn serde_round_trip() {
        let l = OffspringLaw::new(vec![(1, 0.25), (3, 0.75)]).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: OffspringLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(l, back);
        assert!(serde_json::from_str::<OffspringLaw>(r#"{"probs":[[0,1.0]]}"#).is_err());
    }
}
