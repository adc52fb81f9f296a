//! Special functions and small numerical utilities shared across modules.

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

const CF_MAX_ITER: usize = 300;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// ln B(a, b) via log-gamma.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    beta_reg_pair(a, b, x).map(|(lower, _)| lower)
}

/// Both tails `(I_x(a,b), 1 - I_x(a,b))`. The continued fraction is evaluated
/// on whichever side converges fastest and the tail it yields is exact; the
/// other is its complement.
pub fn beta_reg_pair(a: f64, b: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == 1.0 {
        return Ok((1.0, 0.0));
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        let upper = beta_cf(b, a, 1.0 - x)?;
        Ok((1.0 - upper, upper))
    } else {
        let lower = beta_cf(a, b, x)?;
        Ok((lower, 1.0 - lower))
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_prefix = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;

        if (delta - 1.0).abs() < CF_EPS {
            return Ok((ln_prefix.exp() / a * f).clamp(0.0, 1.0));
        }
    }

    Err(Error::Numeric {
        routine: "incomplete beta continued fraction",
        detail: format!("no convergence after {CF_MAX_ITER} iterations at a={a}, b={b}, x={x}"),
    })
}

/// Adaptive Simpson quadrature of `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    if hi <= lo {
        return 0.0;
    }
    // Split into panels first so narrow features are not skipped.
    let panels = 16;
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|k| {
            let a = lo + k as f64 * width;
            let b = if k + 1 == panels { hi } else { a + width };
            let fa = f(a);
            let fb = f(b);
            let fm = f(0.5 * (a + b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            step(&f, a, b, fa, fm, fb, whole, tol / panels as f64, 22)
        })
        .sum()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2, "Gauss-Legendre rule needs at least two nodes");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n, P_{n-1}
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre quadrature over `panels` equal panels.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    (0..panels)
        .map(|k| {
            let mid = lo + (k as f64 + 0.5) * width;
            nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * f(mid + half * x))
                .sum::<f64>()
                * half
        })
        .sum()
}

/// Survival function of the Kolmogorov distribution, P(K > lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = sign * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov sup-distance between the empirical cdf of
/// `sample` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let fx = cdf(x);
            let above = (i + 1) as f64 / n - fx;
            let below = fx - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value for a KS statistic `d` from a sample of size `n`,
/// with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_reg_closed_forms() {
        assert!((beta_reg(1.0, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((beta_reg(1.0, 2.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
        // I_x(a, 1) = x^a
        for &(a, x) in &[(0.3, 0.01), (0.5, 0.25), (0.9, 0.99)] {
            let v = beta_reg(a, 1.0, x).unwrap();
            let want: f64 = f64::powf(x, a);
            assert!((v - want).abs() <= 1e-13 * want, "{a} {x}: {v} vs {want}");
        }
        // upper tail of (1, b) at 1 - y is y^b
        let (_, upper) = beta_reg_pair(1.0, 4.0, 1.0 - 1e-3).unwrap();
        assert!((upper - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn beta_reg_rejects_bad_input() {
        assert!(beta_reg(0.0, 1.0, 0.5).is_err());
        assert!(beta_reg(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn ln_beta_matches_rational_value() {
        // B(0.5, 3) = 16/15
        assert!((ln_beta(0.5, 3.0).exp() - 16.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_integrates_polynomial() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact through degree 19
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let v = integrate_gl(|t| (-t).exp(), 0.0, 30.0, 30, 10);
        assert!((v - (1.0 - (-30.0_f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn ks_single_point() {
        assert!((ks_statistic(&[0.5], |x| x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_sf_known_quantile() {
        // Standard critical value: P(K > 1.628) ~ 0.01
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 2e-4);
    }
}
