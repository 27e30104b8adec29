//! Eigenvalue spectra of the line by three independent routes, and the
//! resonance bookkeeping built on top of them.
//!
//! * [`unloaded_spectrum`]: closed form from the Chebyshev angles
//!   `θ_k = kπ/(n+1)`.
//! * [`numeric_spectrum`]: dense QR on the assembled state matrix.
//! * [`loaded_spectrum_analytic`]: roots of the angle-domain conditions
//!   `F1 = F2 = 0`, refined by Newton from numeric seeds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::eigen;
use crate::error::{Error, Result};
use crate::line_model::{build_state_space, LoadSpec, SectionParams, StateSpaceModel};
use crate::polynomials::{f1_normalized, f2, theta_of};

/// Eigenvalues with |im| at or below this fraction of ‖A‖_F count as real.
pub const REAL_TOLERANCE: f64 = 1e-9;

const NEWTON_MAX_STEPS: usize = 60;
const F1_TOLERANCE: f64 = 1e-9;
const F2_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    ClosedForm,
    AnalyticRoots,
    NumericOracle,
}

impl std::fmt::Display for SpectrumMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpectrumMethod::ClosedForm => "closed-form",
            SpectrumMethod::AnalyticRoots => "analytic-roots",
            SpectrumMethod::NumericOracle => "numeric-oracle",
        })
    }
}

/// The `2n + 1` eigenvalues of one line configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
    method: SpectrumMethod,
    sections: SectionParams,
    load: Option<LoadSpec>,
    scale: f64,
}

impl Spectrum {
    fn new(
        mut eigenvalues: Vec<Complex64>,
        method: SpectrumMethod,
        sections: SectionParams,
        load: Option<LoadSpec>,
    ) -> Self {
        let scale = frobenius_norm(&sections, load.as_ref());
        sort_canonical(&mut eigenvalues);
        Spectrum {
            eigenvalues,
            method,
            sections,
            load,
            scale,
        }
    }

    /// Real eigenvalues first (ascending), then conjugate pairs by
    /// increasing |im|, each pair as (+im, −im).
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn method(&self) -> SpectrumMethod {
        self.method
    }

    pub fn sections(&self) -> &SectionParams {
        &self.sections
    }

    pub fn load(&self) -> Option<&LoadSpec> {
        self.load.as_ref()
    }

    /// ‖A‖_F of the model this spectrum belongs to.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Distance from `target` to the closest eigenvalue.
    pub fn distance_to(&self, target: Complex64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| (e - target).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resonances(&self) -> Vec<ResonanceMode> {
        identify_resonances(self)
    }
}

fn sort_canonical(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        a.im.abs()
            .total_cmp(&b.im.abs())
            .then(b.im.total_cmp(&a.im))
            .then(a.re.total_cmp(&b.re))
    });
}

/// ‖A‖_F computed from the section values without assembling A.
pub fn frobenius_norm(sec: &SectionParams, load: Option<&LoadSpec>) -> f64 {
    let n = sec.n as f64;
    let rl = sec.series_rate();
    let gc = sec.shunt_rate();
    let mut sum = (n + 1.0) * rl * rl
        + n * gc * gc
        + 2.0 * n / (sec.inductance * sec.inductance)
        + 2.0 * n / (sec.capacitance * sec.capacitance);
    if let Some(load) = load {
        let loaded = load.total_conductance(sec) / sec.capacitance;
        sum += loaded * loaded - gc * gc;
    }
    sum.sqrt()
}

/// The pair `λ_{±k}` for Chebyshev angle `theta`.
pub fn closed_form_pair(theta: f64, sec: &SectionParams) -> [Complex64; 2] {
    let rl = sec.series_rate();
    let gc = sec.shunt_rate();
    let center = -0.5 * (rl + gc);
    // 2(1 − cos θ) = 4 sin²(θ/2), without cancellation for small θ.
    let half = (0.5 * theta).sin();
    let radicand = 0.25 * (rl - gc).powi(2) - 4.0 * half * half / sec.lc();
    if radicand >= 0.0 {
        let root = radicand.sqrt();
        [
            Complex64::new(center + root, 0.0),
            Complex64::new(center - root, 0.0),
        ]
    } else {
        let root = (-radicand).sqrt();
        [Complex64::new(center, root), Complex64::new(center, -root)]
    }
}

/// Chebyshev angle `kπ/(n+1)` of mode `k`.
pub fn mode_angle(k: usize, n: usize) -> f64 {
    k as f64 * PI / (n as f64 + 1.0)
}

/// Closed-form spectrum of the unloaded line: `−R/L` and the pairs at
/// `θ_k = kπ/(n+1)`, `k = 1..n`.
pub fn unloaded_spectrum(sec: &SectionParams) -> Result<Spectrum> {
    sec.validate()?;
    let mut values = Vec::with_capacity(sec.dim());
    values.push(Complex64::new(-sec.series_rate(), 0.0));
    for k in 1..=sec.n {
        values.extend(closed_form_pair(mode_angle(k, sec.n), sec));
    }
    Ok(Spectrum::new(
        values,
        SpectrumMethod::ClosedForm,
        *sec,
        None,
    ))
}

/// Eigenvalues of the assembled A by dense QR.
pub fn numeric_spectrum(model: &StateSpaceModel) -> Result<Spectrum> {
    let values = eigen::eigenvalues(model.a())?;
    Ok(Spectrum::new(
        values,
        SpectrumMethod::NumericOracle,
        *model.sections(),
        model.load().copied(),
    ))
}

/// A root of the coupled angle-domain system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnglePair {
    pub theta: Complex64,
    pub lambda: Complex64,
}

/// Newton iteration on `(θ, λ)` for `F1 = 0 ∧ F2 = 0` with backtracking.
/// Returns `None` if the tolerances are not met.
pub fn refine_root(
    seed: Complex64,
    g_total: f64,
    j: usize,
    sec: &SectionParams,
) -> Option<AnglePair> {
    let n = sec.n;
    let lc = sec.lc();
    let mean_rate = 0.5 * (sec.series_rate() + sec.shunt_rate());
    let residual = |theta: Complex64, lambda: Complex64| {
        let r1 = f1_normalized(theta, g_total, lambda, j, n, sec);
        let r2 = f2(theta, lambda, sec);
        let s2 = theta.cos().norm().max(1.0);
        (r1, r2, r1.value.norm() / r1.scale, r2.norm() / s2)
    };
    let converged = |e1: f64, e2: f64| e1 <= F1_TOLERANCE && e2 <= F2_TOLERANCE;

    let mut theta = theta_of(seed, sec);
    let mut lambda = seed;
    let (mut r1, mut r2, mut e1, mut e2) = residual(theta, lambda);
    for _ in 0..NEWTON_MAX_STEPS {
        if !(e1.is_finite() && e2.is_finite()) {
            return None;
        }
        let (a_theta, a_lambda) = (r1.d_theta, r1.d_lambda);
        let b_theta = -theta.sin();
        let b_lambda = -lc * (lambda + mean_rate);
        let det = a_theta * b_lambda - a_lambda * b_theta;
        if det.norm() == 0.0 || !det.is_finite() {
            break;
        }
        let d_theta = -(b_lambda * r1.value - a_lambda * r2) / det;
        let d_lambda = -(a_theta * r2 - b_theta * r1.value) / det;
        let merit = e1 + e2;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let t = theta + d_theta * step;
            let l = lambda + d_lambda * step;
            let next = residual(t, l);
            if next.2 + next.3 < merit || converged(next.2, next.3) {
                theta = t;
                lambda = l;
                (r1, r2, e1, e2) = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if converged(e1, e2) && (!accepted || d_lambda.norm() * step <= 1e-15 * lambda.norm()) {
            break;
        }
        if !accepted {
            break;
        }
    }
    converged(e1, e2).then_some(AnglePair { theta, lambda })
}

/// Spectrum of the loaded line from the angle-domain root conditions.
///
/// Every eigenvalue other than the persistent `−R/L` is a certified root of
/// `F1 = F2 = 0`; seeds come from [`numeric_spectrum`] so the root set is
/// complete.
pub fn loaded_spectrum_analytic(sec: &SectionParams, load: &LoadSpec) -> Result<Spectrum> {
    let model = build_state_space(sec, Some(load))?;
    let seeds = numeric_spectrum(&model)?;
    let tol = REAL_TOLERANCE * seeds.scale();
    let persistent = Complex64::new(-sec.series_rate(), 0.0);
    let skip = seeds
        .eigenvalues()
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - persistent)
                .norm()
                .total_cmp(&(b.1 - persistent).norm())
        })
        .map(|(i, _)| i);

    let g_total = load.total_conductance(sec);
    let j = load.index_j();
    let mut values = vec![persistent];
    let mut failed = Vec::new();
    for (i, &seed) in seeds.eigenvalues().iter().enumerate() {
        if Some(i) == skip || seed.im < -tol {
            continue;
        }
        let real = seed.im.abs() <= tol;
        let seed = if real {
            Complex64::new(seed.re, 0.0)
        } else {
            seed
        };
        let nearest_other = seeds
            .eigenvalues()
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, e)| (e - seed).norm())
            .fold(f64::INFINITY, f64::min);
        let allowed = (0.5 * nearest_other).max(1e-8 * seeds.scale());
        match refine_root(seed, g_total, j, sec) {
            Some(root) if (root.lambda - seed).norm() <= allowed => {
                if real {
                    values.push(Complex64::new(root.lambda.re, 0.0));
                } else {
                    values.push(root.lambda);
                    values.push(root.lambda.conj());
                }
            }
            _ => failed.push(seed),
        }
    }
    if !failed.is_empty() {
        return Err(Error::SeedDivergence { seeds: failed });
    }
    Ok(Spectrum::new(
        values,
        SpectrumMethod::AnalyticRoots,
        *sec,
        Some(*load),
    ))
}

/// `σ = −re(λ) / |λ|`.
pub fn damping_factor(lambda: Complex64) -> Result<f64> {
    if lambda.re == 0.0 && lambda.im == 0.0 {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(-lambda.re / lambda.re.hypot(lambda.im))
}

/// One oscillatory mode: the upper member of a conjugate pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonanceMode {
    /// 1 for the lowest damped frequency.
    pub k: usize,
    pub lambda: Complex64,
    /// Natural frequency |λ|, rad/s.
    pub omega_n: f64,
    /// Damped frequency im(λ)/2π, Hz.
    pub f_damped: f64,
    pub sigma: f64,
}

impl ResonanceMode {
    pub fn from_eigenvalue(k: usize, lambda: Complex64) -> Self {
        let omega_n = lambda.norm();
        ResonanceMode {
            k,
            lambda,
            omega_n,
            f_damped: lambda.im / (2.0 * PI),
            sigma: -lambda.re / omega_n,
        }
    }
}

/// Oscillatory modes sorted by ascending damped frequency.
pub fn identify_resonances(spec: &Spectrum) -> Vec<ResonanceMode> {
    let tol = REAL_TOLERANCE * spec.scale();
    let mut upper: Vec<Complex64> = spec
        .eigenvalues()
        .iter()
        .copied()
        .filter(|e| e.im > tol)
        .collect();
    upper.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    upper
        .into_iter()
        .enumerate()
        .map(|(i, e)| ResonanceMode::from_eigenvalue(i + 1, e))
        .collect()
}

/// Greedy nearest-pair bijection between two eigenvalue sets; returns
/// `(reference index, perturbed index)` sorted by reference index.
pub fn match_eigenvalues(
    reference: &[Complex64],
    perturbed: &[Complex64],
) -> Result<Vec<(usize, usize)>> {
    if reference.len() != perturbed.len() {
        return Err(Error::CardinalityMismatch {
            left: reference.len(),
            right: perturbed.len(),
        });
    }
    let n = reference.len();
    let mut candidates = Vec::with_capacity(n * n);
    for (i, a) in reference.iter().enumerate() {
        for (j, b) in perturbed.iter().enumerate() {
            candidates.push(((a - b).norm(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_ref = vec![false; n];
    let mut used_pert = vec![false; n];
    let mut pairs = Vec::with_capacity(n);
    for (_, i, j) in candidates {
        if !used_ref[i] && !used_pert[j] {
            used_ref[i] = true;
            used_pert[j] = true;
            pairs.push((i, j));
            if pairs.len() == n {
                break;
            }
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// [`match_eigenvalues`] on two spectra.
pub fn match_modes(reference: &Spectrum, perturbed: &Spectrum) -> Result<Vec<(usize, usize)>> {
    match_eigenvalues(reference.eigenvalues(), perturbed.eigenvalues())
}

/// Sum of pair distances for a matching.
pub fn pairing_distance(a: &[Complex64], b: &[Complex64], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| (a[i] - b[j]).norm()).sum()
}
