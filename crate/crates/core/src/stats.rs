//! Welch's two-sample t-test and the Student t distribution.

use crate::model::{mean, sample_std};

/// Result of a Welch (unequal variance) two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t_stat: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's t-test of `mean(a) - mean(b)`. Both samples need at least 2 points.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> WelchTest {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (sample_std(a, ma), sample_std(b, mb));
    welch_from_moments(ma, sa, na, mb, sb, nb)
}

pub fn welch_from_moments(ma: f64, sa: f64, na: f64, mb: f64, sb: f64, nb: f64) -> WelchTest {
    let va = sa * sa / na;
    let vb = sb * sb / nb;
    let se2 = va + vb;
    let diff = ma - mb;
    if se2 == 0.0 {
        // Both samples constant.
        let dof = na + nb - 2.0;
        return if diff == 0.0 {
            WelchTest { t_stat: 0.0, dof, p_value: 1.0 }
        } else {
            WelchTest { t_stat: f64::INFINITY.copysign(diff), dof, p_value: 0.0 }
        };
    }
    let t_stat = diff / libm::sqrt(se2);
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    WelchTest { t_stat, dof, p_value: t_two_sided_p(t_stat, dof) }
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(x, dof / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Cumulative distribution function of Student's t.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, dof);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
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
    // The continued fraction converges fast for x < (a + 1) / (a + b + 2).
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=500 {
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
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_variance_groups_of_ten_have_eighteen_dof() {
        let a: [f64; 10] = core::array::from_fn(|i| i as f64);
        let b: [f64; 10] = core::array::from_fn(|i| i as f64 + 3.0);
        let w = welch_t_test(&a, &b);
        assert!((w.dof - 18.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_have_zero_t_and_unit_p() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let w = welch_t_test(&a, &a);
        assert_eq!(w.t_stat, 0.0);
        assert_eq!(w.p_value, 1.0);
    }

    #[test]
    fn known_t_quantiles() {
        // t_{0.975, 10} = 2.228138851986...
        let p = t_two_sided_p(2.228138851986, 10.0);
        assert!((p - 0.05).abs() < 1e-10, "{p}");
        // Cauchy: P(|T| > 1) = 0.5.
        assert!((t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
        assert!((t_cdf(0.0, 7.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn p_decreases_with_abs_t() {
        let mut prev = 1.0;
        for i in 1..50 {
            let p = t_two_sided_p(i as f64 * 0.2, 18.0);
            assert!(p < prev);
            prev = p;
        }
    }
}
