//! Exact Galton–Watson population laws by generating-function iteration.

use crate::distributions::OffspringLaw;

/// Law of `|Z_n|` on `{0, …, cap}` with the mass above `cap` lumped.
#[derive(Debug, Clone, PartialEq)]
pub struct GwDistribution {
    pub n: usize,
    /// `probs[k] = P(|Z_n| = k)` for `k ≤ cap`.
    pub probs: Vec<f64>,
    pub overflow: f64,
}

impl GwDistribution {
    /// `P(|Z_n| < k)` for `k ≤ cap + 1`.
    pub fn prob_below(&self, k: usize) -> f64 {
        self.probs[..k.min(self.probs.len())].iter().sum()
    }
}

/// Convolution of two truncated vectors, keeping indices `≤ cap`.
fn convolve(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0; cap + 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(cap + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact law of `|Z_n|` truncated at `cap`, via
/// `Z_n = Σ_{i ≤ Z_1} Z_{n−1}^{(i)}` with truncated convolution powers.
/// Since `p_0 = 0` every convolution is monotone, so truncation never
/// feeds mass back below `cap`.
pub fn gw_pgf_iterate(off: &OffspringLaw, n: usize, cap: usize) -> GwDistribution {
    let mut dist = vec![0.0; cap + 1];
    if cap >= 1 {
        dist[1] = 1.0;
    }
    for _ in 0..n {
        let mut next = vec![0.0; cap + 1];
        let mut power = vec![0.0; cap + 1];
        power[0] = 1.0;
        let mut have = 0u32;
        for &(k, p) in off.probs() {
            while have < k {
                power = convolve(&power, &dist, cap);
                have += 1;
            }
            for (s, v) in next.iter_mut().zip(&power) {
                *s += p * v;
            }
        }
        dist = next;
    }
    let inside: f64 = dist.iter().sum();
    GwDistribution { n, probs: dist, overflow: (1.0 - inside).max(0.0) }
}

/// `E[s^{|Z_k|}]` for `k = 0..=n`, by iterating the offspring PGF.
pub fn pgf_iterates(off: &OffspringLaw, s: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut v = s;
    out.push(v);
    for _ in 0..n {
        v = off.pgf(v);
        out.push(v);
    }
    out
}

/// `E[s^{|Z_k|}] / p1^k` for `k = 0..=n`.
pub fn pgf_ratios(off: &OffspringLaw, s: f64, n: usize) -> Vec<f64> {
    let lp = off.p1().ln();
    pgf_iterates(off, s, n).iter().enumerate().map(|(k, v)| (v.ln() - k as f64 * lp).exp()).collect()
}
