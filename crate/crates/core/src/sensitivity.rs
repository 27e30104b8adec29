//! First-order sensitivity of the line's eigenvalues to a small shunt load.
//!
//! Linearizing `F1 = 0` and `F2 = 0` around the unloaded operating point
//! `(θ*, λ*, G_L = G)` and eliminating `Δθ` gives
//!
//! ```text
//! Δλ/ΔG_L = (∂F1/∂G_L) / ((∂F1/∂θ)(∂F2/∂λ)/(∂F2/∂θ) − ∂F1/∂λ)
//! ```
//!
//! For the first mode (`θ* = π/(n+1)`) this collapses to a closed form whose
//! location dependence involves only `n` and `j`, which is what makes the
//! center of the line optimal.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::line_model::{assemble, SectionParams};
use crate::polynomials::f2;
use crate::spectra::{closed_form_pair, mode_angle, numeric_spectrum};

/// Load step used by the finite-difference cross-check, in siemens.
pub const FD_STEP: f64 = 1e-6;

/// Unloaded expansion point of mode `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub k: usize,
    pub theta_star: f64,
    /// Upper member of the pair (positive imaginary part).
    pub lambda_star: Complex64,
}

impl OperatingPoint {
    pub fn new(sec: &SectionParams, k: usize) -> Result<Self> {
        check_mode(sec, k)?;
        let theta_star = mode_angle(k, sec.n);
        let [upper, _] = closed_form_pair(theta_star, sec);
        Ok(OperatingPoint {
            k,
            theta_star,
            lambda_star: upper,
        })
    }

    /// `F2` residual at the operating point; zero up to rounding.
    pub fn coupling_residual(&self, sec: &SectionParams) -> f64 {
        f2(Complex64::new(self.theta_star, 0.0), self.lambda_star, sec).norm()
    }
}

/// The five partial derivatives at the unloaded operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartialDerivatives {
    pub df1_dgl: Complex64,
    pub df1_dlambda: Complex64,
    pub df1_dtheta: Complex64,
    pub df2_dtheta: Complex64,
    pub df2_dlambda: Complex64,
}

fn check_mode(sec: &SectionParams, k: usize) -> Result<()> {
    if k == 0 || k > sec.n {
        return Err(Error::ModeOutOfRange { k, n: sec.n });
    }
    Ok(())
}

fn check_index(sec: &SectionParams, j: usize) -> Result<()> {
    if j.is_multiple_of(2) || j == 0 || j > 2 * sec.n - 1 {
        return Err(Error::invalid(
            "j",
            format!("must be odd and in 1..={}, got {j}", 2 * sec.n - 1),
        ));
    }
    Ok(())
}

/// Closed-form partials at `(θ*, λ*, G_L = G)` for a load at index `j`.
pub fn partial_derivatives(
    op: &OperatingPoint,
    j: usize,
    sec: &SectionParams,
) -> Result<PartialDerivatives> {
    check_index(sec, j)?;
    let n = sec.n as f64;
    let j = j as f64;
    let theta = op.theta_star;
    let lambda = op.lambda_star;
    let lc = sec.lc();
    let rl = sec.series_rate();
    let gc = sec.shunt_rate();
    let h = lc * (lambda + gc) * (lambda + rl) + 2.0;

    let bracket = 0.5 * (((n - j) * theta).cos() - ((n + 1.0) * theta).cos());
    let df1_dgl = sec.inductance * (lambda + rl) * bracket;
    let df1_dlambda = lc * (2.0 * lambda + (gc + rl)) * bracket;
    let df1_dtheta =
        h * 0.5 * (-(n - j) * ((n - j) * theta).sin() + (n + 1.0) * ((n + 1.0) * theta).sin())
            - n * (n * theta).sin()
            - 0.5
                * (-(n - j + 1.0) * ((n - j + 1.0) * theta).sin()
                    - (n - j - 1.0) * ((n - j - 1.0) * theta).sin());
    Ok(PartialDerivatives {
        df1_dgl,
        df1_dlambda,
        df1_dtheta,
        df2_dtheta: Complex64::new(-theta.sin(), 0.0),
        df2_dlambda: -lc * (lambda + 0.5 * (gc + rl)),
    })
}

/// `Δλ/ΔG_L` for a load at index `j`.
///
/// With `approximate` set, returns the first-mode closed form with its
/// leading factor replaced by `1/2C`; only defined for `k = 1`.
pub fn eigenvalue_sensitivity(
    op: &OperatingPoint,
    j: usize,
    sec: &SectionParams,
    approximate: bool,
) -> Result<Complex64> {
    if approximate {
        if op.k != 1 {
            return Err(Error::UnsupportedMode { k: op.k });
        }
        check_index(sec, j)?;
        let value = location_factor(sec.n, j) / (2.0 * sec.capacitance);
        return Ok(Complex64::new(value, 0.0));
    }
    let d = partial_derivatives(op, j, sec)?;
    Ok(d.df1_dgl / (d.df1_dtheta * d.df2_dlambda / d.df2_dtheta - d.df1_dlambda))
}

/// The parameter-free part of the first-mode sensitivity:
/// `(cos((n−j)θ) + 1) / ((−(n−j) cos θ sin((n−j)θ) − n sin(nθ))/sin θ − cos((n−j)θ) − 1)`
/// at `θ = π/(n+1)`.
pub fn location_factor(n: usize, j: usize) -> f64 {
    let theta = mode_angle(1, n);
    let (n, j) = (n as f64, j as f64);
    let c = ((n - j) * theta).cos();
    let num = c + 1.0;
    let den = (-(n - j) * theta.cos() * ((n - j) * theta).sin() - n * (n * theta).sin())
        / theta.sin()
        - c
        - 1.0;
    num / den
}

/// Exact location factor of the first mode. At `θ = π/(n+1)` the
/// `(n−j) cos θ sin((n−j)θ)` contributions to `∂F1/∂θ` cancel and the exact
/// sensitivity reduces to the leading factor times `−(1 + cos((n−j)θ))/(n+1)`.
/// [`location_factor`] keeps those terms and is smaller in magnitude,
/// most of all near the line ends.
pub fn exact_location_factor(n: usize, j: usize) -> f64 {
    let theta = mode_angle(1, n);
    let (n, j) = (n as f64, j as f64);
    -(1.0 + ((n - j) * theta).cos()) / (n + 1.0)
}

/// First-mode sensitivity in closed form, with the exact leading factor
/// `L(λ* + R/L)/2 / (LC(λ* + (G/C + R/L)/2))` and [`exact_location_factor`].
pub fn first_mode_closed_form(sec: &SectionParams, j: usize) -> Result<Complex64> {
    check_index(sec, j)?;
    let op = OperatingPoint::new(sec, 1)?;
    let lambda = op.lambda_star;
    let lead = sec.inductance * (lambda + sec.series_rate()) * 0.5
        / (sec.lc() * (lambda + 0.5 * (sec.shunt_rate() + sec.series_rate())));
    Ok(lead * exact_location_factor(sec.n, j))
}

/// Sensitivity at one load index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub j: usize,
    pub z: usize,
    pub dlambda_dgl: Complex64,
}

/// `Δλ/ΔG_L` of one mode for every odd `j` in `1..=2n−1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityProfile {
    pub n: usize,
    pub k: usize,
    pub sections: SectionParams,
    pub points: Vec<SensitivityPoint>,
}

impl SensitivityProfile {
    pub fn at_j(&self, j: usize) -> Option<&SensitivityPoint> {
        self.points.iter().find(|p| p.j == j)
    }
}

pub fn sensitivity_profile(sec: &SectionParams, k: usize) -> Result<SensitivityProfile> {
    let op = OperatingPoint::new(sec, k)?;
    let points = (1..2 * sec.n)
        .step_by(2)
        .map(|j| {
            Ok(SensitivityPoint {
                j,
                z: j.div_ceil(2),
                dlambda_dgl: eigenvalue_sensitivity(&op, j, sec, false)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityProfile {
        n: sec.n,
        k,
        sections: *sec,
        points,
    })
}

/// Best load node for a mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Placement {
    pub k: usize,
    pub z: usize,
    /// Most negative `re(Δλ/ΔG_L)` over all nodes.
    pub dlambda_dgl: Complex64,
    /// Backed by the first-mode monotonicity argument. For higher modes
    /// the location is an empirical observation only.
    pub established: bool,
}

/// Node maximizing `−re(Δλ/ΔG_L)`, ties to the smaller `z`.
pub fn optimal_location(sec: &SectionParams, k: usize) -> Result<Placement> {
    let profile = sensitivity_profile(sec, k)?;
    let mut best = profile.points[0];
    for p in &profile.points[1..] {
        let (cur, cand) = (-best.dlambda_dgl.re, -p.dlambda_dgl.re);
        if cand > cur + 1e-12 * cur.abs() {
            best = *p;
        }
    }
    Ok(Placement {
        k,
        z: best.z,
        dlambda_dgl: best.dlambda_dgl,
        established: k == 1,
    })
}

/// Central difference of the numerically computed mode-`k` eigenvalue with
/// respect to the load at index `j`, with loads `±step` around the
/// unloaded line.
pub fn finite_difference_sensitivity(
    sec: &SectionParams,
    k: usize,
    j: usize,
    step: f64,
) -> Result<Complex64> {
    check_index(sec, j)?;
    let op = OperatingPoint::new(sec, k)?;
    let z = j.div_ceil(2);
    let eigen_at = |g: f64| -> Result<Complex64> {
        let spec = numeric_spectrum(&assemble(sec, Some((z, g))))?;
        Ok(spec
            .eigenvalues()
            .iter()
            .copied()
            .min_by(|a, b| {
                (a - op.lambda_star)
                    .norm()
                    .total_cmp(&(b - op.lambda_star).norm())
            })
            .expect("spectrum is never empty"))
    };
    let (plus, minus) = rayon::join(|| eigen_at(step), || eigen_at(-step));
    Ok((plus? - minus?) / (2.0 * step))
}

/// Relative error of the closed-form sensitivity against finite differences
/// at every requested index.
pub fn validate_against_fd(
    sec: &SectionParams,
    k: usize,
    indices: &[usize],
    step: f64,
) -> Result<Vec<(usize, Complex64, Complex64, f64)>> {
    let op = OperatingPoint::new(sec, k)?;
    indices
        .par_iter()
        .map(|&j| {
            let analytic = eigenvalue_sensitivity(&op, j, sec, false)?;
            let fd = finite_difference_sensitivity(sec, k, j, step)?;
            Ok((j, analytic, fd, (analytic - fd).norm() / fd.norm()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_model::{section_params, LineParams};
    use crate::polynomials::f1;
    use std::f64::consts::PI;

    fn reference(n: usize) -> SectionParams {
        section_params(&LineParams::reference_110kv(n)).unwrap()
    }

    #[test]
    fn operating_point_satisfies_coupling() {
        for n in [1, 9, 60] {
            let sec = reference(n);
            for k in [1, n / 2 + 1, n] {
                let op = OperatingPoint::new(&sec, k).unwrap();
                assert!(op.coupling_residual(&sec) < 1e-12);
                assert!(op.lambda_star.im > 0.0);
            }
        }
        assert!(OperatingPoint::new(&reference(5), 0).is_err());
        assert!(OperatingPoint::new(&reference(5), 6).is_err());
    }

    #[test]
    fn closed_form_partials() {
        let sec = reference(9);
        let op = OperatingPoint::new(&sec, 1).unwrap();
        let d = partial_derivatives(&op, 9, &sec).unwrap();
        assert!((d.df2_dtheta.re + (PI / 10.0).sin()).abs() < 1e-15);
        let expected = sec.inductance * (op.lambda_star + sec.series_rate());
        assert!((d.df1_dgl - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn partials_match_finite_differences() {
        for (n, k) in [(9, 1), (9, 4), (60, 1), (60, 2)] {
            let sec = reference(n);
            let op = OperatingPoint::new(&sec, k).unwrap();
            let theta = Complex64::new(op.theta_star, 0.0);
            let lambda = op.lambda_star;
            let g = sec.conductance;
            for j in [1, n - 1 + n % 2, 2 * n - 1] {
                let d = partial_derivatives(&op, j, &sec).unwrap();
                let f = |t: Complex64, gl: f64, l: Complex64| f1(t, gl, l, j, n, &sec);
                let ht = 1e-6 * op.theta_star;
                let hl = 1e-6 * lambda.norm();
                let hg = 1e-6;
                let fd_t = (f(theta + ht, g, lambda) - f(theta - ht, g, lambda)) / (2.0 * ht);
                let fd_g = (f(theta, g + hg, lambda) - f(theta, g - hg, lambda)) / (2.0 * hg);
                let fd_l = (f(theta, g, lambda + hl) - f(theta, g, lambda - hl)) / (2.0 * hl);
                let f2t =
                    (f2(theta + ht, lambda, &sec) - f2(theta - ht, lambda, &sec)) / (2.0 * ht);
                let f2l =
                    (f2(theta, lambda + hl, &sec) - f2(theta, lambda - hl, &sec)) / (2.0 * hl);
                // Natural magnitude of each partial, so exact zeros are
                // judged against a meaningful scale.
                let lc = sec.lc();
                for (name, exact, fd, natural) in [
                    ("dF1/dtheta", d.df1_dtheta, fd_t, 4.0 * n as f64),
                    ("dF1/dG", d.df1_dgl, fd_g, sec.inductance * lambda.norm()),
                    ("dF1/dlambda", d.df1_dlambda, fd_l, 2.0 * lc * lambda.norm()),
                    ("dF2/dtheta", d.df2_dtheta, f2t, 1.0),
                    ("dF2/dlambda", d.df2_dlambda, f2l, lc * lambda.norm()),
                ] {
                    let err = (exact - fd).norm() / exact.norm().max(natural);
                    assert!(err <= 1e-5, "n={n} k={k} j={j} {name}: {exact} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn center_value_closed_form() {
        for n in [5, 9, 21, 61] {
            let sec = reference(n);
            let op = OperatingPoint::new(&sec, 1).unwrap();
            let approx = eigenvalue_sensitivity(&op, n, &sec, true).unwrap();
            let expected = -1.0 / (sec.capacitance * (n as f64 + 2.0));
            assert!((approx.re - expected).abs() <= 1e-12 * expected.abs());
        }
    }

    #[test]
    fn printed_center_value_is_close_to_exact() {
        let sec = reference(60);
        let op = OperatingPoint::new(&sec, 1).unwrap();
        let exact = eigenvalue_sensitivity(&op, 59, &sec, false).unwrap();
        let approx = Complex64::new(-1.0 / (sec.capacitance * 62.0), 0.0);
        assert!((approx - exact).norm() <= 0.02 * exact.norm());
    }

    #[test]
    fn exact_matches_first_mode_closed_form() {
        for n in [4, 9, 60] {
            let sec = reference(n);
            let op = OperatingPoint::new(&sec, 1).unwrap();
            for j in (1..2 * n).step_by(2) {
                let a = eigenvalue_sensitivity(&op, j, &sec, false).unwrap();
                let b = first_mode_closed_form(&sec, j).unwrap();
                assert!((a - b).norm() <= 1e-9 * b.norm(), "n={n} j={j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn approximation_requires_first_mode() {
        let sec = reference(9);
        let op = OperatingPoint::new(&sec, 2).unwrap();
        assert!(matches!(
            eigenvalue_sensitivity(&op, 3, &sec, true),
            Err(Error::UnsupportedMode { k: 2 })
        ));
    }

    #[test]
    fn rejects_even_or_out_of_range_j() {
        let sec = reference(4);
        let op = OperatingPoint::new(&sec, 1).unwrap();
        for j in [0, 2, 9] {
            assert!(eigenvalue_sensitivity(&op, j, &sec, false).is_err());
        }
    }

    #[test]
    fn first_mode_sign_and_growth() {
        let sec = reference(60);
        let profile = sensitivity_profile(&sec, 1).unwrap();
        let head: Vec<_> = profile.points.iter().filter(|p| p.j <= 60).collect();
        assert!(head.iter().all(|p| p.dlambda_dgl.re < 0.0));
        for w in head.windows(2) {
            assert!(w[1].dlambda_dgl.re.abs() > w[0].dlambda_dgl.re.abs());
        }
        for p in &head {
            assert!((p.dlambda_dgl.im / p.dlambda_dgl.re).abs() <= 0.05);
        }
    }

    #[test]
    fn profile_symmetry() {
        for n in [1, 8, 9] {
            let sec = reference(n);
            for k in 1..=n.min(3) {
                let profile = sensitivity_profile(&sec, k).unwrap();
                assert_eq!(profile.points.len(), n);
                for p in &profile.points {
                    let mirror = profile.at_j(2 * n - p.j).unwrap();
                    let scale = p.dlambda_dgl.norm();
                    assert!((p.dlambda_dgl - mirror.dlambda_dgl).norm() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn optimal_nodes() {
        assert_eq!(optimal_location(&reference(9), 1).unwrap().z, 5);
        let p = optimal_location(&reference(60), 1).unwrap();
        assert!(p.z == 30 || p.z == 31);
        assert!(p.established);
        let one = optimal_location(&reference(1), 1).unwrap();
        assert_eq!(one.z, 1);
    }

    #[test]
    fn finite_difference_agreement() {
        let sec = reference(60);
        let rows = validate_against_fd(&sec, 1, &[29], FD_STEP).unwrap();
        assert!(rows[0].3 <= 0.05, "{rows:?}");
    }
}
