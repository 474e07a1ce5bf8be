//! Scalar special functions: Gaussian tails in log space, the normal
//! quantile, a truncated-normal sampler and the Student t tail.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - Phi(x))`, accurate far into the upper tail.
///
/// Beyond `x = 8` the Mills ratio is evaluated by its continued fraction.
pub fn log_norm_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x <= 8.0 {
        return libm::log(norm_sf(x));
    }
    let mut t = x;
    for k in (1..=64).rev() {
        t = x + k as f64 / t;
    }
    -0.5 * x * x - LN_SQRT_2PI - libm::log(t)
}

/// `ln(Phi(x))`.
pub fn log_norm_cdf(x: f64) -> f64 {
    log_norm_sf(-x)
}

/// `ln(1 - exp(x))` for `x <= 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -core::f64::consts::LN_2 {
        libm::log(-libm::expm1(x))
    } else {
        libm::log1p(-libm::exp(x))
    }
}

/// `ln(Q(a) - Q(b))` for `a <= b`, where `Q = 1 - Phi`.
///
/// Equals `ln(Phi(b) - Phi(a))`; stable when both ends sit in the same tail.
pub fn log_norm_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let la = log_norm_sf(a);
        la + ln_one_minus_exp(log_norm_sf(b) - la)
    } else if b <= 0.0 {
        log_norm_mass(-b, -a)
    } else {
        libm::log1p(-(norm_sf(b) + norm_sf(-a)))
    }
}

/// Truncated-Gaussian upper tail `P(Z >= x | lo <= Z <= up)` for standardized
/// limits. `x` is clamped into `[lo, up]`.
pub fn truncated_tail(lo: f64, x: f64, up: f64) -> f64 {
    let x = x.clamp(lo, up);
    let den = log_norm_mass(lo, up);
    if den == f64::NEG_INFINITY {
        return f64::NAN;
    }
    let num = log_norm_mass(x, up);
    libm::exp(num - den).clamp(0.0, 1.0)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Standard normal quantile (Wichura's AS 241, ~1e-16 relative accuracy).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = libm::sqrt(-libm::log(r));
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Draw from a standard normal truncated to `[lo, hi]`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if hi - lo < 1e-12 {
        return 0.5 * (lo + hi);
    }
    if lo >= 5.0 {
        return tail_sample(rng, lo, hi);
    }
    if hi <= -5.0 {
        return -tail_sample(rng, -hi, -lo);
    }
    let u: f64 = rng.random();
    if lo > 0.0 {
        let qlo = norm_sf(lo);
        let qhi = norm_sf(hi);
        let q = qlo - u * (qlo - qhi);
        (-norm_quantile(q)).clamp(lo, hi)
    } else {
        let plo = norm_cdf(lo);
        let phi = norm_cdf(hi);
        norm_quantile(plo + u * (phi - plo)).clamp(lo, hi)
    }
}

// Exponential-proposal rejection sampler for `[lo, hi]` with `lo >= 5`.
fn tail_sample<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let rate = 0.5 * (lo + libm::sqrt(lo * lo + 4.0));
    if (hi - lo) * rate < 0.5 {
        // Narrow window: uniform proposal, density ratio bounded by exp(-lo*(z-lo)).
        loop {
            let z = lo + (hi - lo) * rng.random::<f64>();
            let accept = libm::exp(0.5 * (lo * lo - z * z));
            if rng.random::<f64>() <= accept {
                return z;
            }
        }
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = lo + e / rate;
        if z > hi {
            continue;
        }
        let accept = libm::exp(-0.5 * (z - rate) * (z - rate));
        if rng.random::<f64>() <= accept {
            return z;
        }
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Upper tail `P(T >= t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * inc_beta(0.5 * df, 0.5, x);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.18 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = libm::exp(-2.0 * k * k * x * x);
        if k as u32 % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Two-sided version of a one-sided p-value.
pub fn two_sided(p: f64) -> f64 {
    (2.0 * p.min(1.0 - p)).clamp(0.0, 1.0)
}

pub(crate) const TAU: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_sf(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((norm_cdf(-1.96) - 0.024_997_895_148_220_435).abs() < 1e-15);
    }

    #[test]
    fn log_sf_matches_direct_evaluation_near_switch() {
        for &x in &[7.5, 8.0, 8.000001, 9.0, 12.0, 20.0] {
            let direct = libm::log(norm_sf(x));
            assert!((log_norm_sf(x) - direct).abs() < 1e-10, "x={x}");
        }
        // far tail where erfc underflows
        let x = 40.0;
        let x2 = x * x;
        let asym = -0.5 * x2 - LN_SQRT_2PI - libm::log(x) + libm::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
        assert!((log_norm_sf(x) - asym).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-20, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-12] {
            let x = norm_quantile(p);
            let back = norm_cdf(x);
            assert!(((back - p) / p).abs() < 1e-9, "p={p} x={x} back={back}");
        }
    }

    #[test]
    fn truncated_tail_examples() {
        assert!((truncated_tail(f64::NEG_INFINITY, 1.0, f64::INFINITY) - 0.158_655_253_931_457).abs() < 1e-12);
        assert!((truncated_tail(0.0, 1.0, f64::INFINITY) - 0.317_310_507_862_914).abs() < 1e-12);
        assert_eq!(truncated_tail(-0.3, -0.3, 2.0), 1.0);
        assert_eq!(truncated_tail(-0.3, 2.0, 2.0), 0.0);
        // deep tail: ratio is well defined where the raw CDF difference is 0/0
        let p = truncated_tail(40.0, 40.1, f64::INFINITY);
        let expect = libm::exp(log_norm_sf(40.1) - log_norm_sf(40.0));
        assert!((p - expect).abs() < 1e-9 && p > 0.0);
        let q = truncated_tail(f64::NEG_INFINITY, -40.1, -40.0);
        assert!((q - (1.0 - expect)).abs() < 1e-9);
    }

    #[test]
    fn truncated_sampler_stays_in_bounds_and_has_right_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(lo, hi) in &[(-1.0, 2.0), (6.0, f64::INFINITY), (6.0, 6.01), (-f64::INFINITY, -7.0), (0.5, 0.6)] {
            let n = 20000;
            let mut mean = 0.0;
            for _ in 0..n {
                let z = sample_truncated_normal(&mut rng, lo, hi);
                assert!(z >= lo && z <= hi);
                mean += z / n as f64;
            }
            // analytic mean of a truncated standard normal
            let phi = |x: f64| if x.is_finite() { libm::exp(-0.5 * x * x) / (2.0 * PI).sqrt() } else { 0.0 };
            let mass = libm::exp(log_norm_mass(lo, hi));
            let expect = (phi(lo) - phi(hi)) / mass;
            assert!((mean - expect).abs() < 0.02, "lo={lo} hi={hi} mean={mean} expect={expect}");
        }
    }

    #[test]
    fn student_t_reference() {
        // t = 2.0, df = 10: upper tail 0.036694017385370
        assert!((student_t_sf(2.0, 10.0) - 0.036_694_017_385_370).abs() < 1e-10);
        assert!((student_t_sf(0.0, 7.0) - 0.5).abs() < 1e-14);
        assert!((student_t_sf(-1.5, 4.0) - (1.0 - student_t_sf(1.5, 4.0))).abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_reference() {
        // the familiar 1.358 critical value at alpha = 0.05
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
    }
}
