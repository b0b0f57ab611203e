//! Scalar numerics shared by the rate-function and deviation engines:
//! bracketed searches, adaptive Gauss–Kronrod quadrature, and log-space
//! helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// `f` may return `-inf` (outside an effective domain). Stops once the
/// bracket is narrower than `tol`. Returns `(argmax, max)`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 400 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        iters += 1;
    }
    let (mut best_x, mut best_f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best_f {
            best_x = x;
            best_f = fx;
        }
    }
    (best_x, best_f)
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), lo, hi, tol);
    (x, -v)
}

/// Bisection for the boundary of a predicate that holds on `[lo, b)` and
/// fails on `(b, hi]`. Requires `holds(lo)`; returns the last point known
/// to satisfy the predicate.
pub fn bisect_boundary(holds: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut iters = 0;
    while hi - lo > tol && iters < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    lo
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over a finite `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: (f64, f64),
        abs_tol: f64,
        rel_tol: f64,
        depth: u32,
    ) -> f64 {
        let (val, err) = whole;
        if err <= abs_tol.max(rel_tol * val.abs()) || depth >= 48 || b - a <= 1e-15 * a.abs().max(1e-300) {
            return val;
        }
        let mid = 0.5 * (a + b);
        let left = gk15(f, a, mid);
        let right = gk15(f, mid, b);
        recurse(f, a, mid, left, 0.5 * abs_tol, rel_tol, depth + 1)
            + recurse(f, mid, b, right, 0.5 * abs_tol, rel_tol, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    recurse(&f, a, b, whole, abs_tol, rel_tol, 0)
}

/// `ln ∫_0^∞ exp(phi(u)) du` for a log-integrand that is eventually
/// decreasing. Returns `+inf` when the integrand does not decay.
///
/// The peak is located on a geometric grid and refined; the integral is
/// then accumulated on segments whose widths are scaled to the local
/// decay length around the peak, so very sharp peaks are resolved.
pub fn log_integral_exp(phi: impl Fn(f64) -> f64) -> f64 {
    let mut best_u = 0.0;
    let mut best = phi(0.0);
    let mut grid = Vec::with_capacity(128);
    grid.push(0.0);
    let mut u = 2f64.powi(-24);
    let mut fell_off = false;
    while u < 1e18 {
        let v = phi(u);
        grid.push(u);
        if v.is_nan() {
            return f64::NAN;
        }
        if v > best {
            best = v;
            best_u = u;
        } else if v < best - 200.0 && u > 4.0 * best_u.max(1.0) {
            fell_off = true;
            break;
        }
        u *= 2.0;
    }
    if !fell_off || best == f64::INFINITY {
        return f64::INFINITY;
    }
    if best == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if best_u > 0.0 {
        let (u_ref, v_ref) = golden_max(&phi, 0.5 * best_u, 2.0 * best_u, 1e-13 * best_u);
        if v_ref > best {
            best_u = u_ref;
            best = v_ref;
        }
    }
    let peak = best;
    let g = |u: f64| (phi(u) - peak).exp();
    // phi itself carries rounding error of order eps·|phi|, which bounds
    // the attainable relative accuracy
    let rel_tol = (1e-12f64).max(8.0 * f64::EPSILON * (peak.abs() + 1.0));

    // Distance over which phi drops by one unit on either side.
    let decay_len = |dir: f64, limit: f64| -> f64 {
        let mut w = 1.0f64.min(limit);
        if phi(best_u + dir * w) < peak - 1.0 {
            while w > 1e-300 && phi(best_u + dir * w * 0.5) < peak - 1.0 {
                w *= 0.5;
            }
            w
        } else {
            while w < limit && phi(best_u + dir * w) >= peak - 1.0 {
                w = (2.0 * w).min(limit);
            }
            w
        }
    };

    let mut total = 0.0;
    // right of the peak
    let w = decay_len(1.0, 1e18);
    let mut a = best_u;
    let mut width = w;
    loop {
        let b = a + width;
        total += integrate(g, a, b, 0.1 * rel_tol * total, rel_tol);
        if phi(b) < peak - 80.0 {
            break;
        }
        if b > 1e18 {
            return f64::INFINITY;
        }
        a = b;
        width *= 2.0;
    }
    // left of the peak, down to zero
    if best_u > 0.0 {
        let w = decay_len(-1.0, best_u);
        let mut b = best_u;
        let mut width = w;
        while b > 0.0 {
            let a = (b - width).max(0.0);
            total += integrate(g, a, b, 0.1 * rel_tol * total, rel_tol);
            if a <= 0.0 || phi(a) < peak - 80.0 {
                break;
            }
            b = a;
            width *= 2.0;
        }
    }
    peak + total.ln()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_infinite() {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `ln(sinh(u) / u)`, stable for all `u`.
pub fn ln_sinhc(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-4 {
        let a2 = a * a;
        a2 / 6.0 - a2 * a2 / 180.0
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2 - a.ln()
    }
}

/// `ln cosh(u)`, stable for all `u`.
pub fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if !x.is_finite() || !self.sum.is_finite() {
            self.sum += x;
            return;
        }
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}
