//! Hurwitz zeta near its pole and the first generalized Stieltjes constant.

use crate::error::{out_of_range, Result};

/// Euler-Mascheroni constant, 0.57721566490153286061 (20 digits).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Terms summed directly before the Euler-Maclaurin tail.
const EM_TERMS: usize = 50;

/// B_2, B_4, ..., B_20.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Euler-Maclaurin tail without the `(M+a)^{1-s}/(s-1)` term.
fn tail(s: f64, x: f64) -> f64 {
    let mut sum = 0.5 * x.powf(-s);
    // rising = s (s+1) ... (s+2j-2), fact = (2j)!, pow = x^{-s-2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut pow = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        if j > 0 {
            let k = (2 * j) as f64;
            rising *= (s + k - 1.0) * (s + k);
            fact *= (k + 1.0) * (k + 2.0);
            pow /= x * x;
        }
        sum += b / fact * rising * pow;
    }
    sum
}

/// Hurwitz zeta ζ(s, a) minus its pole, `ζ(s,a) - 1/(s-1)`. Smooth through
/// s = 1, where it equals γ₀(a) = -ψ(a).
pub fn hurwitz_zeta_regular(s: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(out_of_range(format!("Hurwitz parameter a = {a} must be positive")));
    }
    let direct: f64 = (0..EM_TERMS).map(|k| (k as f64 + a).powf(-s)).sum();
    let x = EM_TERMS as f64 + a;
    let u = s - 1.0;
    // ((M+a)^{1-s} - 1)/(s-1), with the removable singularity at s = 1.
    let pole = if u == 0.0 { -x.ln() } else { (-u * x.ln()).exp_m1() / u };
    Ok(direct + pole + tail(s, x))
}

/// Hurwitz zeta ζ(s, a) for s ≠ 1, a > 0.
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64> {
    if s == 1.0 {
        return Err(out_of_range("ζ(s, a) has a pole at s = 1"));
    }
    Ok(hurwitz_zeta_regular(s, a)? + 1.0 / (s - 1.0))
}

/// Generalized Stieltjes constant γ₁(a), 0 < a ≤ 1.
///
/// With R(s) = ζ(s,a) - 1/(s-1) = γ₀ - γ₁ (s-1) + ..., the symmetric
/// difference [R(1-h) - R(1+h)]/(2h) is γ₁ + O(h²). Three step sizes and two
/// rounds of Richardson extrapolation remove the h² and h⁴ terms.
pub fn stieltjes_gamma1(a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(out_of_range(format!("stieltjes_gamma1 needs 0 < a <= 1, got {a}")));
    }
    let steps = [1e-3, 5e-4, 2.5e-4];
    let mut d = [0.0; 3];
    for (k, h) in steps.iter().enumerate() {
        d[k] = (hurwitz_zeta_regular(1.0 - h, a)? - hurwitz_zeta_regular(1.0 + h, a)?) / (2.0 * h);
    }
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    Ok((16.0 * r1[1] - r1[0]) / 15.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::function::gamma::digamma;

    // High-precision reference values (50-digit arithmetic, rounded).
    const GAMMA1_ONE: f64 = -0.072_815_845_483_676_724_860_586_375_874_9;
    const GAMMA1_THIRD: f64 = -3.259_557_515_917_910_195_250_872_582_68;
    const GAMMA1_TWO_THIRDS: f64 = -0.598_906_284_285_989_292_567_876_021_269;

    /// d/ds of the Euler-Maclaurin sum, differentiated term by term, at s = 1
    /// with M = 80 terms: an independent route to -γ₁(a).
    fn gamma1_by_analytic_derivative(a: f64) -> f64 {
        let m = 80usize;
        let x = m as f64 + a;
        let lx = x.ln();
        // d/ds Σ (k+a)^{-s} at s=1
        let mut v: f64 = (0..m).map(|k| -(k as f64 + a).ln() / (k as f64 + a)).sum();
        // d/ds ((x^{1-s} - 1)/(s-1)) at s=1 is (ln x)^2 / 2
        v += lx * lx / 2.0;
        // d/ds x^{-s}/2
        v += -0.5 * lx / x;
        // Bernoulli tail with 6 terms: derivative of B/(2j)! * r(s) * x^{-s-2j+1}
        let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
        for (j, bj) in b.iter().enumerate() {
            let n = 2 * (j + 1);
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            // r(s) = prod_{i=0}^{n-2} (s+i); r(1) and r'(1)
            let factors: Vec<f64> = (0..n - 1).map(|i| 1.0 + i as f64).collect();
            let r: f64 = factors.iter().product();
            let dr: f64 = factors.iter().map(|f| r / f).sum();
            let p = x.powf(-(n as f64));
            v += bj / fact * (dr * p - r * lx * p);
        }
        -v
    }

    #[test]
    fn gamma1_matches_reference_values() {
        assert_abs_diff_eq!(stieltjes_gamma1(1.0).unwrap(), GAMMA1_ONE, epsilon = 1e-10);
        assert_abs_diff_eq!(stieltjes_gamma1(1.0 / 3.0).unwrap(), GAMMA1_THIRD, epsilon = 1e-10);
        assert_abs_diff_eq!(stieltjes_gamma1(2.0 / 3.0).unwrap(), GAMMA1_TWO_THIRDS, epsilon = 1e-10);
    }

    #[test]
    fn gamma1_matches_analytic_derivative() {
        for a in [0.1, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0] {
            let oracle = gamma1_by_analytic_derivative(a);
            assert_abs_diff_eq!(stieltjes_gamma1(a).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn pole_subtraction_even_part() {
        // R(1+h) + R(1-h) = 2γ₀(a) + O(h²), and γ₀(a) = -ψ(a). A power of two
        // keeps 1 ± h exact, so the added 1/h cancels the pole exactly.
        let h = 2f64.powi(-17);
        for a in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
            let even = (hurwitz_zeta(1.0 + h, a).unwrap() - 1.0 / h) + (hurwitz_zeta(1.0 - h, a).unwrap() + 1.0 / h);
            assert_abs_diff_eq!(even, -2.0 * digamma(a), epsilon = 1e-8);
        }
        assert_abs_diff_eq!(hurwitz_zeta_regular(1.0, 1.0).unwrap(), EULER_GAMMA, epsilon = 1e-14);
    }

    #[test]
    fn zeta_values() {
        assert_abs_diff_eq!(hurwitz_zeta(2.0, 1.0).unwrap(), std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hurwitz_zeta(0.0, 0.25).unwrap(), 0.25, epsilon = 1e-13);
        assert!(stieltjes_gamma1(0.0).is_err());
        assert!(stieltjes_gamma1(1.5).is_err());
    }
}
