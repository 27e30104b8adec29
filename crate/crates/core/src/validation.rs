//! Randomized self-check of the library's invariants on small lines.
//!
//! Each check reports a measured residual and the tolerance it is held to.
//! Draws come from a seeded ChaCha stream, so a given seed always produces
//! the same report.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::line_model::{assemble, build_state_space, LoadSpec, SectionParams};
use crate::polynomials::{char_poly_loaded, char_poly_odd, chebyshev_u, f1, Scaled};
use crate::sensitivity::{sensitivity_profile, OperatingPoint};
use crate::spectra::{
    closed_form_pair, damping_factor, loaded_spectrum_analytic, match_modes, numeric_spectrum,
    unloaded_spectrum, Spectrum,
};

#[derive(Clone, Copy, Debug, Default)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Negative control: evaluate Chebyshev polynomials with the
    /// recurrence `U_{k+1} = x U_k − U_{k−1}` (missing factor 2).
    pub corrupt_recurrence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `name,status,measured,tolerance` lines with a header.
    pub fn render(&self) -> String {
        let mut out = String::from("name,status,measured,tolerance\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{:.6e},{:.1e}\n",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.measured,
                c.tolerance
            ));
        }
        out
    }
}

fn check(name: &'static str, measured: f64, tolerance: f64) -> InvariantCheck {
    InvariantCheck {
        name,
        passed: measured <= tolerance,
        measured,
        tolerance,
    }
}

fn random_sections(rng: &mut ChaCha8Rng, n: usize) -> SectionParams {
    SectionParams {
        resistance: rng.random_range(0.005..0.5),
        inductance: rng.random_range(1e-4..1e-2),
        capacitance: rng.random_range(1e-7..1e-5),
        conductance: rng.random_range(0.0..1e-3),
        n,
    }
}

fn random_lambda(rng: &mut ChaCha8Rng, sec: &SectionParams) -> Complex64 {
    let w = 2.0 / sec.lc().sqrt();
    Complex64::new(rng.random_range(-w..w), rng.random_range(-w..w))
}

fn det_shifted(a: &DMatrix<f64>, lambda: Complex64) -> Complex64 {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(-a[(i, j)], 0.0);
        if i == j {
            v + lambda
        } else {
            v
        }
    });
    m.determinant()
}

fn relative(a: Scaled, b: Complex64) -> f64 {
    let b_scaled = Scaled::new(b);
    let diff = a.sub(b_scaled);
    (diff.log2_abs() - b_scaled.log2_abs()).exp2()
}

fn spectrum_gap(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    let pairs = match_modes(a, b)?;
    Ok(pairs
        .iter()
        .map(|&(i, j)| (a.eigenvalues()[i] - b.eigenvalues()[j]).norm())
        .fold(0.0, f64::max))
}

fn printed_recurrence(n: usize, x: Complex64) -> Complex64 {
    let mut prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for _ in 1..n {
        let next = x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();

    // U_n(cos θ) against sin((n+1)θ)/sin θ.
    let cheb = |n: usize, x: Complex64| {
        if opts.corrupt_recurrence {
            printed_recurrence(n, x)
        } else {
            chebyshev_u(n, x)
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let theta = rng.random_range(1e-3..std::f64::consts::PI - 1e-3);
        let n = rng.random_range(0..=200usize);
        let got = cheb(n, Complex64::new(theta.cos(), 0.0));
        let want = ((n + 1) as f64 * theta).sin() / theta.sin();
        worst = worst.max((got.re - want).abs() / (n + 1) as f64);
    }
    checks.push(check("chebyshev_consistency", worst, 1e-9));

    // Closed-form determinants against LU.
    let mut worst_odd: f64 = 0.0;
    let mut worst_loaded: f64 = 0.0;
    for n in 1..=8 {
        let sec = random_sections(&mut rng, n);
        let a = build_state_space(&sec, None)?.a().clone();
        for _ in 0..20 {
            let lambda = random_lambda(&mut rng, &sec);
            worst_odd = worst_odd.max(relative(
                char_poly_odd(n, lambda, &sec),
                det_shifted(&a, lambda),
            ));
        }
        if n <= 6 {
            let z = rng.random_range(1..=n);
            let g_load = rng.random_range(0.0..1.0);
            let load = LoadSpec::new(z, g_load);
            let a = build_state_space(&sec, Some(&load))?.a().clone();
            for _ in 0..20 {
                let lambda = random_lambda(&mut rng, &sec);
                let analytic =
                    char_poly_loaded(lambda, load.total_conductance(&sec), load.index_j(), &sec);
                worst_loaded = worst_loaded.max(relative(analytic, det_shifted(&a, lambda)));
            }
        }
    }
    checks.push(check("determinant_oracle", worst_odd, 1e-8));
    checks.push(check("cofactor_identity", worst_loaded, 1e-8));

    // F1 at G_L = G equals sin θ sin((n+1)θ) wherever F2 = 0.
    let mut worst_f1: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12usize);
        let sec = random_sections(&mut rng, n);
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let j = 2 * rng.random_range(1..=n) - 1;
        for lambda in closed_form_pair(theta, &sec) {
            let t = Complex64::new(theta, 0.0);
            let got = f1(t, sec.conductance, lambda, j, n, &sec);
            let want = theta.sin() * ((n + 1) as f64 * theta).sin();
            worst_f1 = worst_f1.max((got - want).norm());
        }
    }
    checks.push(check("f1_unloaded_factorization", worst_f1, 1e-10));

    // Closed form vs numeric oracle, plus spectrum-wide invariants.
    let mut worst_gap: f64 = 0.0;
    let mut worst_conj: f64 = 0.0;
    let mut sigma_violation: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=8usize);
        let sec = random_sections(&mut rng, n);
        let closed = unloaded_spectrum(&sec)?;
        let numeric = numeric_spectrum(&build_state_space(&sec, None)?)?;
        worst_gap = worst_gap.max(spectrum_gap(&closed, &numeric)? / numeric.scale());
        for spec in [&closed, &numeric] {
            for e in spec.eigenvalues() {
                let partner = spec
                    .eigenvalues()
                    .iter()
                    .map(|o| (o - e.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                worst_conj = worst_conj.max(partner);
                let s = damping_factor(*e)?;
                sigma_violation = sigma_violation.max((-s).max(s - 1.0));
            }
        }
    }
    checks.push(check("oracle_agreement", worst_gap, 1e-7));
    checks.push(check("conjugate_closure", worst_conj, 0.0));
    checks.push(check("damping_bound", sigma_violation.max(0.0), 0.0));

    // −R/L survives any single load; mirrored loads share a spectrum.
    let mut worst_persist: f64 = 0.0;
    let mut worst_mirror: f64 = 0.0;
    let mut worst_analytic: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=8usize);
        let sec = random_sections(&mut rng, n);
        let z = rng.random_range(1..=n);
        let g_load = 10f64.powf(rng.random_range(-4.0..4.0));
        let load = LoadSpec::new(z, g_load);
        let spec = numeric_spectrum(&build_state_space(&sec, Some(&load))?)?;
        let persistent = Complex64::new(-sec.series_rate(), 0.0);
        worst_persist = worst_persist.max(spec.distance_to(persistent) / spec.scale());
        let mirror = numeric_spectrum(&build_state_space(
            &sec,
            Some(&LoadSpec::new(n + 1 - z, g_load)),
        )?)?;
        worst_mirror = worst_mirror.max(spectrum_gap(&spec, &mirror)? / spec.scale());
        if g_load <= 1.0 {
            let analytic = loaded_spectrum_analytic(&sec, &load)?;
            worst_analytic = worst_analytic.max(spectrum_gap(&analytic, &spec)? / spec.scale());
        }
    }
    checks.push(check("persistent_real_eigenvalue", worst_persist, 1e-7));
    checks.push(check("reversal_similarity", worst_mirror, 1e-9));
    checks.push(check("analytic_loaded_roots", worst_analytic, 1e-6));

    // First-mode sensitivity: negative, symmetric, growing toward the center,
    // and consistent with a finite difference of the numeric spectrum.
    let mut sign_violation: f64 = 0.0;
    let mut asym: f64 = 0.0;
    let mut monotone_violation: f64 = 0.0;
    let mut fd_error: f64 = 0.0;
    for n in 1..=8 {
        let sec = SectionParams {
            conductance: 0.0,
            ..random_sections(&mut rng, n)
        };
        let profile = sensitivity_profile(&sec, 1)?;
        for p in &profile.points {
            let mirror = profile.at_j(2 * n - p.j).expect("mirror index exists");
            asym = asym.max((p.dlambda_dgl - mirror.dlambda_dgl).norm() / p.dlambda_dgl.norm());
            if p.j <= n {
                sign_violation = sign_violation.max(p.dlambda_dgl.re.max(0.0));
            }
        }
        let head: Vec<f64> = profile
            .points
            .iter()
            .filter(|p| p.j <= n)
            .map(|p| p.dlambda_dgl.re.abs())
            .collect();
        for w in head.windows(2) {
            monotone_violation = monotone_violation.max((w[0] - w[1]).max(0.0) / w[0]);
        }
        let op = OperatingPoint::new(&sec, 1)?;
        let j = 2 * rng.random_range(1..=n) - 1;
        let step = 1e-6 * sec.capacitance / (sec.lc().sqrt());
        let z = j.div_ceil(2);
        let near = |g: f64| -> Result<Complex64> {
            let spec = numeric_spectrum(&assemble(&sec, Some((z, g))))?;
            Ok(*spec
                .eigenvalues()
                .iter()
                .min_by(|a, b| {
                    (*a - op.lambda_star)
                        .norm()
                        .total_cmp(&(*b - op.lambda_star).norm())
                })
                .expect("non-empty"))
        };
        let fd = (near(step)? - near(-step)?) / (2.0 * step);
        let analytic = profile.at_j(j).expect("odd j in range").dlambda_dgl;
        fd_error = fd_error.max((analytic - fd).norm() / fd.norm());
    }
    checks.push(check("sensitivity_sign", sign_violation, 0.0));
    checks.push(check("sensitivity_symmetry", asym, 1e-9));
    checks.push(check("sensitivity_monotone", monotone_violation, 0.0));
    checks.push(check("sensitivity_finite_difference", fd_error, 0.05));

    Ok(ValidationReport {
        seed: opts.seed,
        checks,
    })
}
