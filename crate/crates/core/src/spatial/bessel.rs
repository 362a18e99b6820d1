//! Modified Bessel function of the second kind `K_ν(x)` for real order.
//!
//! The fractional order `μ = ν − round(ν)` in `[−½, ½]` is evaluated with
//! Temme's series for `x ≤ 2` and Steed's continued fraction (CF2) above,
//! then raised to `ν` by forward recurrence, which is stable for `K`.

use core::f64::consts::PI;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

// Chebyshev expansions on ν = (t + 1)/4, −1 < t < 1, of
// (1/Γ(1−ν) − 1/Γ(1+ν)) / (2ν) and (1/Γ(1−ν) + 1/Γ(1+ν)) / 2.
const G1: [f64; 14] = [
    -1.145_164_083_662_683,
    0.006_360_853_113_470_843,
    0.001_862_451_930_072_068_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_21e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];
const G2: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn chebyshev(c: &[f64], t: f64) -> f64 {
    let t2 = 2.0 * t;
    let (mut d, mut dd) = (0.0, 0.0);
    for &cj in c[1..].iter().rev() {
        let tmp = d;
        d = t2 * d - dd + cj;
        dd = tmp;
    }
    t * d - dd + 0.5 * c[0]
}

/// `(1/Γ(1+μ), 1/Γ(1−μ), g1, g2)` for `|μ| ≤ ½`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let t = 4.0 * mu.abs() - 1.0;
    let g1 = chebyshev(&G1, t);
    let g2 = chebyshev(&G2, t);
    let inv_gamma_1pmu = g2 - mu * g1;
    let inv_gamma_1mmu = g2 + mu * g1;
    (inv_gamma_1pmu, inv_gamma_1mmu, g1, g2)
}

/// `(K_μ(x), K_{μ+1}(x))` by Temme's series, `x ≤ 2`, `|μ| ≤ ½`.
fn temme(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let sigma = -mu * ln_half_x;
    let pi_mu = PI * mu;
    let sinrat = if pi_mu.abs() < f64::EPSILON {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let sinhrat = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let (inv_g1p, inv_g1m, g1, g2) = temme_gamma(mu);
    let half_x_mu = sigma.exp().recip(); // (x/2)^μ
    let mut f = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut p = 0.5 / (half_x_mu * inv_g1p);
    let mut q = 0.5 * half_x_mu / inv_g1m;
    let mut c = 1.0;
    let d = half_x * half_x;
    let mut sum0 = f;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for k in 1..=10_000 {
        let kf = k as f64;
        f = (kf * f + p + q) / (kf * kf - mu2);
        c *= d / kf;
        p /= kf - mu;
        q /= kf + mu;
        let del0 = c * f;
        sum0 += del0;
        sum1 += c * (p - kf * f);
        if del0.abs() < sum0.abs() * f64::EPSILON {
            break;
        }
    }
    (sum0, sum1 * 2.0 / x)
}

/// `(e^x K_μ(x), e^x K_{μ+1}(x))` by Steed's CF2, `x ≥ 2`, `|μ| ≤ ½`.
fn steed_cf2_scaled(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut a = -a1;
    let mut q = a1;
    let mut c = a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=10_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// `K_ν(x)` for `ν ≥ 0`, `x > 0`. Returns `+∞` at `x = 0` and NaN for
/// invalid arguments.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    if !(nu >= 0.0) || !(x >= 0.0) || !nu.is_finite() {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x > 745.0 {
        return 0.0;
    }
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k_lo, mut k_hi) = if x <= 2.0 {
        temme(mu, x)
    } else {
        let (a, b) = steed_cf2_scaled(mu, x);
        let e = (-x).exp();
        (a * e, b * e)
    };
    // K_{μ+j+1} = 2(μ+j)/x K_{μ+j} + K_{μ+j−1}
    for j in 1..=(nl as usize) {
        let next = 2.0 * (mu + j as f64) / x * k_hi + k_lo;
        k_lo = k_hi;
        k_hi = next;
    }
    k_lo
}
