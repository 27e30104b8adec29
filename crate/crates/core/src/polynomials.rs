//! Chebyshev machinery behind the 2-Toeplitz characteristic polynomials,
//! and the angle-domain root conditions for a line with one load.
//!
//! Determinants of the line matrix scale like `(LC)^{-n}`, which leaves the
//! f64 range for realistic section counts. Everything that can grow that
//! large is returned as a [`Scaled`] value: a complex significand times a
//! power of two. The angle-domain functions [`f1`] and [`f2`] stay bounded
//! for real angles and are what the root finders use.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::line_model::SectionParams;

/// `significand · 2^exponent`, with `max(|re|, |im|)` of the significand in
/// `[1, 2)` unless the value is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub significand: Complex64,
    pub exponent: i64,
}

#[allow(clippy::should_implement_trait)]
impl Scaled {
    pub const ZERO: Scaled = Scaled {
        significand: Complex64::new(0.0, 0.0),
        exponent: 0,
    };
    pub const ONE: Scaled = Scaled {
        significand: Complex64::new(1.0, 0.0),
        exponent: 0,
    };

    pub fn new(value: Complex64) -> Self {
        Scaled {
            significand: value,
            exponent: 0,
        }
        .normalized()
    }

    fn normalized(self) -> Self {
        let m = self.significand.re.abs().max(self.significand.im.abs());
        if m == 0.0 || !m.is_finite() {
            return if m == 0.0 { Scaled::ZERO } else { self };
        }
        let shift = m.log2().floor() as i64;
        let mut s = Scaled {
            significand: self.significand * ldexp(1.0, -shift),
            exponent: self.exponent + shift,
        };
        // log2 can be off by one ulp near powers of two.
        let m = s.significand.re.abs().max(s.significand.im.abs());
        if m >= 2.0 {
            s.significand /= 2.0;
            s.exponent += 1;
        } else if m < 1.0 {
            s.significand *= 2.0;
            s.exponent -= 1;
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.significand.re == 0.0 && self.significand.im == 0.0
    }

    pub fn mul(self, other: Scaled) -> Scaled {
        Scaled {
            significand: self.significand * other.significand,
            exponent: self.exponent + other.exponent,
        }
        .normalized()
    }

    pub fn scale(self, factor: Complex64) -> Scaled {
        self.mul(Scaled::new(factor))
    }

    pub fn add(self, other: Scaled) -> Scaled {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.exponent >= other.exponent {
            (self, other)
        } else {
            (other, self)
        };
        let gap = big.exponent - small.exponent;
        let tail = if gap > 1100 {
            Complex64::new(0.0, 0.0)
        } else {
            small.significand * ldexp(1.0, -gap)
        };
        Scaled {
            significand: big.significand + tail,
            exponent: big.exponent,
        }
        .normalized()
    }

    pub fn sub(self, other: Scaled) -> Scaled {
        self.add(Scaled {
            significand: -other.significand,
            exponent: other.exponent,
        })
    }

    /// `log2 |value|`, or `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.significand.norm().log2() + self.exponent as f64
        }
    }

    /// Plain complex value, or an overflow error if it does not fit in f64.
    pub fn to_complex(&self) -> Result<Complex64> {
        if self.is_zero() {
            return Ok(self.significand);
        }
        if self.exponent > 1023 {
            return Err(Error::Overflow(format!(
                "{} * 2^{}",
                self.significand, self.exponent
            )));
        }
        Ok(self.significand * ldexp(1.0, self.exponent))
    }

    /// `x^k` for real `x ≠ 0`, kept in scaled form.
    pub fn powi(x: f64, k: i64) -> Scaled {
        let base = Scaled::new(Complex64::new(if k >= 0 { x } else { 1.0 / x }, 0.0));
        let mut acc = Scaled::ONE;
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(base);
        }
        acc
    }
}

/// `x · 2^k` without intermediate overflow for |k| up to a few thousand.
pub(crate) fn ldexp(x: f64, mut k: i64) -> f64 {
    let mut v = x;
    while k > 1000 {
        v *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        v *= 2f64.powi(-1000);
        k += 1000;
    }
    v * 2f64.powi(k as i32)
}

/// Chebyshev polynomial of the second kind, `U_{k+1} = 2x U_k − U_{k−1}`.
pub fn chebyshev_u(n: usize, x: Complex64) -> Complex64 {
    let mut prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// [`chebyshev_u`] with the running pair rescaled so large degrees and
/// arguments never overflow.
pub fn chebyshev_u_scaled(n: usize, x: Complex64) -> Scaled {
    let mut prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return Scaled::ONE;
    }
    let mut cur = 2.0 * x;
    let mut exponent: i64 = 0;
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
        let m = cur.re.abs().max(cur.im.abs());
        if m > 1e100 {
            let shift = m.log2().floor() as i64;
            let f = ldexp(1.0, -shift);
            cur *= f;
            prev *= f;
            exponent += shift;
        }
    }
    Scaled {
        significand: cur,
        exponent,
    }
    .normalized()
}

/// `g(λ) = (λ + R/L)(λ + G/C)`.
pub fn g_poly(lambda: Complex64, sec: &SectionParams) -> Complex64 {
    (lambda + sec.series_rate()) * (lambda + sec.shunt_rate())
}

/// `P_n(μ) = (LC)^{-n} U_n(½ LC μ + 1)`, with `P_{-1} = 0`.
pub fn p_n(n: i64, mu: Complex64, sec: &SectionParams) -> Scaled {
    if n < 0 {
        return Scaled::ZERO;
    }
    let x = 0.5 * sec.lc() * mu + 1.0;
    chebyshev_u_scaled(n as usize, x).mul(Scaled::powi(sec.lc(), -n))
}

/// `Δ_{2n+1}(λ) = (λ + R/L) P_n(g(λ))`: the characteristic polynomial of
/// the unloaded `(2n+1)`-state line.
pub fn char_poly_odd(n: usize, lambda: Complex64, sec: &SectionParams) -> Scaled {
    p_n(n as i64, g_poly(lambda, sec), sec).scale(lambda + sec.series_rate())
}

/// `Δ_{2n}(λ) = P_n(g) − (LC)^{-1} P_{n−1}(g)`. `Δ_0 = 1`.
pub fn char_poly_even(n: usize, lambda: Complex64, sec: &SectionParams) -> Scaled {
    let mu = g_poly(lambda, sec);
    let lower = p_n(n as i64 - 1, mu, sec).scale(Complex64::new(1.0 / sec.lc(), 0.0));
    p_n(n as i64, mu, sec).sub(lower)
}

/// Leading-block determinant `Δ_m` for any size `m ≥ 0`.
pub fn char_poly(m: usize, lambda: Complex64, sec: &SectionParams) -> Scaled {
    if m % 2 == 1 {
        char_poly_odd((m - 1) / 2, lambda, sec)
    } else {
        char_poly_even(m / 2, lambda, sec)
    }
}

/// Characteristic polynomial of the loaded line by cofactor expansion
/// around the loaded node (state `j + 1`), with `g_total = G + g_load`:
/// `(λ + G_L/C) Δ_j Δ_{2n−j} + (LC)^{-1}(Δ_{j−1} Δ_{2n−j} + Δ_j Δ_{2n−j−1})`.
pub fn char_poly_loaded(lambda: Complex64, g_total: f64, j: usize, sec: &SectionParams) -> Scaled {
    let n = sec.n;
    let right = 2 * n - j;
    let dj = char_poly(j, lambda, sec);
    let dr = char_poly(right, lambda, sec);
    let inv_lc = Complex64::new(1.0 / sec.lc(), 0.0);
    let node = dj.mul(dr).scale(lambda + g_total / sec.capacitance);
    let left_cut = char_poly(j - 1, lambda, sec).mul(dr).scale(inv_lc);
    let right_cut = dj.mul(char_poly(right - 1, lambda, sec)).scale(inv_lc);
    node.add(left_cut).add(right_cut)
}

/// `h(G_L, λ) = LC (λ + G_L/C)(λ + R/L) + 2`.
pub fn h_factor(g_total: f64, lambda: Complex64, sec: &SectionParams) -> Complex64 {
    sec.lc() * (lambda + g_total / sec.capacitance) * (lambda + sec.series_rate()) + 2.0
}

fn half_sin(m: i64, theta: Complex64) -> Complex64 {
    (theta * (m as f64 / 2.0)).sin()
}

fn half_cos(m: i64, theta: Complex64) -> Complex64 {
    (theta * (m as f64 / 2.0)).cos()
}

/// The three products making up [`f1`], before summation.
pub fn f1_terms(
    theta: Complex64,
    g_total: f64,
    lambda: Complex64,
    j: usize,
    n: usize,
    sec: &SectionParams,
) -> [Complex64; 3] {
    let (j, n) = (j as i64, n as i64);
    let h = h_factor(g_total, lambda, sec);
    let s_jp = half_sin(j + 1, theta);
    let s_jm = half_sin(j - 1, theta);
    let s_rp = half_sin(2 * n - j + 1, theta);
    let s_rm = half_sin(2 * n - j - 1, theta);
    [h * s_jp * s_rp, -(s_jm * s_rp), -(s_jp * s_rm)]
}

/// Angle-domain root condition of the loaded line.
///
/// Up to the factor `(λ + R/L) / ((LC)^n sin²θ)` this is the characteristic
/// polynomial, when `θ` and `λ` are tied together by [`f2`] = 0.
pub fn f1(
    theta: Complex64,
    g_total: f64,
    lambda: Complex64,
    j: usize,
    n: usize,
    sec: &SectionParams,
) -> Complex64 {
    f1_terms(theta, g_total, lambda, j, n, sec).iter().sum()
}

/// [`f1`] multiplied by `e^{i s (n+1) θ}` with `s = sign(im θ)`, together
/// with its derivatives and the scale its residual is judged against.
///
/// The factor is holomorphic and cancels the exponential growth of the
/// sines, so the evaluation stays finite for strongly complex angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1Normalized {
    pub value: Complex64,
    pub d_theta: Complex64,
    pub d_lambda: Complex64,
    /// Bound on the term magnitudes; positive even where all terms vanish.
    pub scale: f64,
}

pub fn f1_normalized(
    theta: Complex64,
    g_total: f64,
    lambda: Complex64,
    j: usize,
    n: usize,
    sec: &SectionParams,
) -> F1Normalized {
    let s = if theta.im >= 0.0 { 1.0 } else { -1.0 };
    let i_s = Complex64::new(0.0, s);
    let phase = |m: i64| (i_s * theta * m as f64).exp();
    // sin(mθ/2) e^{i s mθ/2} and its θ-derivative.
    let sin_hat = |m: i64| (phase(m) - 1.0) / (2.0 * i_s);
    let d_sin_hat = |m: i64| phase(m) * (m as f64 / 2.0);

    let (j, n) = (j as i64, n as i64);
    let (a, b, c, d) = (j + 1, 2 * n - j + 1, j - 1, 2 * n - j - 1);
    let (sa, sb, sc, sd) = (sin_hat(a), sin_hat(b), sin_hat(c), sin_hat(d));
    let (da, db, dc, dd) = (d_sin_hat(a), d_sin_hat(b), d_sin_hat(c), d_sin_hat(d));
    // Left-over phase on the two cut terms, since a − c = b − d = 2.
    let e = phase(1);
    let de = i_s * e;

    let h = h_factor(g_total, lambda, sec);
    let value = h * sa * sb - e * (sc * sb + sa * sd);
    let d_theta = h * (da * sb + sa * db)
        - de * (sc * sb + sa * sd)
        - e * (dc * sb + sc * db + da * sd + sa * dd);
    let dh = sec.lc() * (2.0 * lambda + g_total / sec.capacitance + sec.series_rate());
    let h_mag = sec.lc()
        * (lambda.norm() + g_total.abs() / sec.capacitance)
        * (lambda.norm() + sec.series_rate())
        + 2.0;
    F1Normalized {
        value,
        d_theta,
        d_lambda: dh * sa * sb,
        scale: h_mag + 2.0 * e.norm(),
    }
}

/// `(∂F1/∂θ, ∂F1/∂λ)` at an arbitrary point, from the product form.
pub fn f1_gradient(
    theta: Complex64,
    g_total: f64,
    lambda: Complex64,
    j: usize,
    n: usize,
    sec: &SectionParams,
) -> (Complex64, Complex64) {
    let (j, n) = (j as i64, n as i64);
    let h = h_factor(g_total, lambda, sec);
    let (a, b, c, d) = (j + 1, 2 * n - j + 1, j - 1, 2 * n - j - 1);
    let (sa, sb, sc, sd) = (
        half_sin(a, theta),
        half_sin(b, theta),
        half_sin(c, theta),
        half_sin(d, theta),
    );
    let da = half_cos(a, theta) * (a as f64 / 2.0);
    let db = half_cos(b, theta) * (b as f64 / 2.0);
    let dc = half_cos(c, theta) * (c as f64 / 2.0);
    let dd = half_cos(d, theta) * (d as f64 / 2.0);
    let d_theta = h * (da * sb + sa * db) - (dc * sb + sc * db) - (da * sd + sa * dd);
    let dh = sec.lc() * (2.0 * lambda + g_total / sec.capacitance + sec.series_rate());
    (d_theta, dh * sa * sb)
}

/// `F2(θ, λ) = cos θ − ½ LC (λ + R/L)(λ + G/C) − 1`; zero exactly when
/// `θ` is the Chebyshev angle of `λ`.
pub fn f2(theta: Complex64, lambda: Complex64, sec: &SectionParams) -> Complex64 {
    theta.cos() - 0.5 * sec.lc() * g_poly(lambda, sec) - 1.0
}

/// The Chebyshev argument `cos θ = ½ LC g(λ) + 1`.
pub fn cos_theta(lambda: Complex64, sec: &SectionParams) -> Complex64 {
    0.5 * sec.lc() * g_poly(lambda, sec) + 1.0
}

/// An angle with `cos θ = ½ LC g(λ) + 1`, in `[0, π]` while the argument
/// stays in [-1, 1] and complex beyond.
///
/// Uses `θ = −i ln w` with `w = z ± √(z−1)√(z+1)`, taking the larger root
/// so the sum does not cancel for large `|z|`. Both signs of `θ` satisfy the
/// root conditions, so the branch is immaterial.
pub fn theta_of(lambda: Complex64, sec: &SectionParams) -> Complex64 {
    let z = cos_theta(lambda, sec);
    let r = (z - 1.0).sqrt() * (z + 1.0).sqrt();
    let w = if (z + r).norm() >= (z - r).norm() {
        z + r
    } else {
        z - r
    };
    Complex64::new(0.0, -1.0) * w.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit() -> SectionParams {
        SectionParams::new(1.0, 1.0, 1.0, 0.0, 1).unwrap()
    }

    #[test]
    fn chebyshev_values() {
        assert_eq!(chebyshev_u(0, Complex64::new(3.0, -2.0)), c(1.0));
        assert_eq!(chebyshev_u(1, c(0.5)), c(1.0));
        assert!(chebyshev_u(2, c(0.5)).norm() < 1e-15);
        let theta: f64 = 0.3;
        let expected = (6.0 * theta).sin() / theta.sin();
        let got = chebyshev_u(5, c(theta.cos()));
        assert!((got.re - expected).abs() <= 1e-12 * expected.abs());
    }

    #[test]
    fn scaled_chebyshev_matches_plain() {
        let x = Complex64::new(1.3, 0.7);
        for n in [0, 1, 2, 7, 30] {
            let plain = chebyshev_u(n, x);
            let scaled = chebyshev_u_scaled(n, x).to_complex().unwrap();
            assert!((plain - scaled).norm() <= 1e-12 * plain.norm());
        }
        // U_2000(3) ≈ (3 + √8)^2000 overflows f64 but not the scaled form.
        let big = chebyshev_u_scaled(2000, c(3.0));
        let expected = 2000.0 * (3.0 + 8f64.sqrt()).log2();
        assert!((big.log2_abs() - expected).abs() < 1.0);
        assert!(big.to_complex().is_err());
    }

    #[test]
    fn g_poly_values() {
        let sec = SectionParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        assert_eq!(g_poly(c(-1.0), &sec), c(0.0));
        assert_eq!(g_poly(c(0.0), &sec), c(2.0));
    }

    #[test]
    fn p_n_values() {
        let sec = SectionParams::new(0.1, 2e-3, 5e-6, 0.0, 3).unwrap();
        assert_eq!(p_n(0, Complex64::new(4.0, 1.0), &sec), Scaled::ONE);
        assert!(p_n(-1, c(1.0), &sec).is_zero());
        // ½ LC μ + 1 = cos(π/4) puts the argument on a zero of U_3.
        let mu = c(((PI / 4.0).cos() - 1.0) * 2.0 / sec.lc());
        let v = p_n(3, mu, &sec).to_complex().unwrap();
        let magnitude = sec.lc().powi(-3);
        assert!(v.norm() <= 1e-12 * magnitude);
    }

    #[test]
    fn odd_poly_roots() {
        let sec = unit();
        assert!(char_poly_odd(1, c(-1.0), &sec).is_zero());
        // λ² + λ + 2 = 0.
        let root = Complex64::new(-0.5, 7f64.sqrt() / 2.0);
        let v = char_poly_odd(1, root, &sec).to_complex().unwrap();
        assert!(v.norm() < 1e-9);
        let v = char_poly_odd(1, Complex64::new(-0.5, 1.3229), &sec)
            .to_complex()
            .unwrap();
        assert!(v.norm() < 1e-3);
    }

    #[test]
    fn even_poly_first_order() {
        let sec = SectionParams::new(0.3, 1.5, 0.7, 0.2, 1).unwrap();
        let lambda = Complex64::new(-0.4, 1.1);
        let got = char_poly_even(1, lambda, &sec).to_complex().unwrap();
        let expected = g_poly(lambda, &sec) + 1.0 / sec.lc();
        assert!((got - expected).norm() < 1e-12);
        assert_eq!(char_poly_even(0, lambda, &sec), Scaled::ONE);
    }

    #[test]
    fn even_poly_is_monic() {
        let sec = SectionParams::new(0.3, 1.5, 0.7, 0.2, 4).unwrap();
        for n in 1..5 {
            let lambda = c(1e6);
            let ratio = char_poly_even(n, lambda, &sec)
                .mul(Scaled::powi(1e6, -(2 * n as i64)))
                .to_complex()
                .unwrap();
            assert!((ratio - 1.0).norm() < 1e-4, "n={n}: {ratio}");
        }
    }

    #[test]
    fn f2_values() {
        let sec = SectionParams::new(0.3, 1.5, 0.7, 0.0, 4).unwrap();
        assert!(f2(c(0.0), c(-sec.series_rate()), &sec).norm() < 1e-15);
        let free = SectionParams::new(0.0, 1.5, 0.7, 0.0, 4).unwrap();
        assert!((f2(c(PI / 2.0), c(0.0), &free) - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn f1_vanishes_at_zero_angle() {
        let sec = SectionParams::new(0.3, 1.5, 0.7, 0.1, 6).unwrap();
        for j in [1, 5, 11] {
            let v = f1(c(0.0), 4.0, Complex64::new(-0.2, 3.0), j, 6, &sec);
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn scaled_arithmetic() {
        let a = Scaled::new(c(3.0));
        let b = Scaled::new(Complex64::new(-1.0, 0.5));
        assert_eq!(a.mul(b).to_complex().unwrap(), Complex64::new(-3.0, 1.5));
        assert_eq!(a.add(b).to_complex().unwrap(), Complex64::new(2.0, 0.5));
        assert_eq!(a.sub(a), Scaled::ZERO);
        let p = Scaled::powi(2.0, -1100);
        assert_eq!(p.exponent, -1100);
        assert_eq!(p.significand, c(1.0));
    }
}
