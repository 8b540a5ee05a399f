//! Scalar distribution helpers shared by the samplers and the baselines.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::function::erf::erfc;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[inline]
pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// log N(y; mean, sd).
#[inline]
pub fn normal_ln_density(y: f64, mean: f64, sd: f64) -> f64 {
    normal_ln_pdf((y - mean) / sd) - sd.ln()
}

#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// log Φ(z), accurate far into the lower tail.
pub fn normal_ln_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        normal_ln_pdf(z) - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// log(1 − Φ(z)).
#[inline]
pub fn normal_ln_sf(z: f64) -> f64 {
    normal_ln_cdf(-z)
}

/// φ(z) / (1 − Φ(z)).
#[inline]
pub fn normal_hazard(z: f64) -> f64 {
    (normal_ln_pdf(z) - normal_ln_sf(z)).exp()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Draws from N(mean, sd²) restricted to (lower, ∞).
pub fn sample_truncated_normal_below<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lower: f64,
) -> f64 {
    let a = (lower - mean) / sd;
    loop {
        let z = if a < 0.45 {
            let z: f64 = StandardNormal.sample(rng);
            if z <= a {
                continue;
            }
            z
        } else {
            // Exponential proposal with the optimal rate.
            let rate = 0.5 * (a + (a * a + 4.0).sqrt());
            let z = a + Exp::new(rate).expect("positive rate").sample(rng);
            let u: f64 = rng.random();
            if u.ln() > -0.5 * (z - rate) * (z - rate) {
                continue;
            }
            z
        };
        let y = mean + sd * z;
        if y > lower {
            return y;
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator n − 1.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    assert!(!v.is_empty(), "quantile of empty slice");
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Sum in a fixed pairwise order, so parallel producers reduce identically.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn ln_cdf_matches_direct_and_tail() {
        for &z in &[-5.0, -1.0, 0.0, 2.0] {
            assert!((normal_ln_cdf(z) - normal_cdf(z).ln()).abs() < 1e-12);
        }
        // Continuity across the branch point.
        let a = normal_ln_cdf(-29.999_999);
        let b = normal_ln_cdf(-30.000_001);
        assert!((a - b).abs() < 1e-4);
        assert!(normal_ln_cdf(-60.0).is_finite());
    }

    #[test]
    fn truncated_normal_respects_bound_and_mean() {
        let mut rng = stream(1, &[]);
        for &lower in &[-3.0, 0.0, 1.0, 6.0] {
            let draws: Vec<f64> = (0..20_000)
                .map(|_| sample_truncated_normal_below(&mut rng, 0.0, 1.0, lower))
                .collect();
            assert!(draws.iter().all(|&y| y > lower));
            let expected = normal_hazard(lower);
            assert!((mean(&draws) - expected).abs() < 0.03, "lower={lower}");
        }
    }

    #[test]
    fn quantiles() {
        let xs = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((median(&xs) - 2.5).abs() < 1e-15);
    }
}
