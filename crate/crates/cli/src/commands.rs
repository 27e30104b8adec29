use std::f64::consts::PI;
use std::path::PathBuf;

use line_resonance::export;
use line_resonance::line_model::build_state_space;
use line_resonance::sensitivity::{
    eigenvalue_sensitivity, optimal_location, sensitivity_profile, validate_against_fd,
    OperatingPoint, FD_STEP,
};
use line_resonance::spectra::{
    frobenius_norm, identify_resonances, loaded_spectrum_analytic, match_modes, numeric_spectrum,
    unloaded_spectrum,
};
use line_resonance::sweeps::{
    asymptotic_spectrum_large_load, placement_sweep, root_locus, LoadGrid, RootLocusTrace,
};
use line_resonance::timesim::{bin_width, simulate_energization, spectral_peaks, SourceWaveform};
use line_resonance::validation::{run_validation, ValidationOptions};
use line_resonance::{Complex64, LoadSpec, SectionParams, Spectrum};

use crate::config::{RunConfig, DEFAULT_DT, DEFAULT_SWEEP_LOAD, DEFAULT_T_END};
use crate::{Method, Outcome, Sink, UsageError};

/// Relative tolerance for calling two mirrored σ values equal.
const TIE_TOLERANCE: f64 = 1e-9;
/// Traces moving less than this fraction of ‖A‖_F count as stationary.
const STATIONARY_TOLERANCE: f64 = 1e-7;

fn fmt_lambda(l: Complex64) -> String {
    format!(
        "{:.6} {} {:.6}i",
        l.re,
        if l.im < 0.0 { '-' } else { '+' },
        l.im.abs()
    )
}

fn fmt_freq(omega: f64) -> String {
    format!("{omega:.4} rad/s ({:.4} Hz)", omega / (2.0 * PI))
}

fn max_matched_gap(a: &Spectrum, b: &Spectrum) -> line_resonance::Result<f64> {
    Ok(match_modes(a, b)?
        .iter()
        .map(|&(i, j)| (a.eigenvalues()[i] - b.eigenvalues()[j]).norm())
        .fold(0.0, f64::max))
}

pub fn spectrum(
    sink: &Sink,
    cfg: &RunConfig,
    sec: &SectionParams,
    method: Method,
) -> anyhow::Result<Outcome> {
    let loaded = cfg.load.filter(|l| l.g_load != 0.0);
    let spec = match method {
        Method::ClosedForm => {
            if loaded.is_some() {
                return Err(UsageError(
                    "closed-form applies to the unloaded line; use --method analytic or numeric"
                        .into(),
                )
                .into());
            }
            unloaded_spectrum(sec)?
        }
        Method::Analytic => {
            let load = cfg.load.unwrap_or(LoadSpec::new(1, 0.0));
            loaded_spectrum_analytic(sec, &load)?
        }
        Method::Numeric => numeric_spectrum(&build_state_space(sec, cfg.load.as_ref())?)?,
    };
    sink.emit(|w| export::write_spectrum(w, &spec))?;

    let modes = identify_resonances(&spec);
    let real = spec.len() - 2 * modes.len();
    sink.say(format!(
        "method: {}; n = {}; {} eigenvalues ({} real, {} oscillatory modes); ||A||_F = {:.6e}",
        spec.method(),
        sec.n,
        spec.len(),
        real,
        modes.len(),
        spec.scale()
    ));
    if let Some(load) = &cfg.load {
        sink.say(format!("load: {} S at z = {}", load.g_load, load.z));
    }
    match modes.first() {
        Some(m) => sink.say(format!(
            "first resonance: lambda = {}; damped {}; natural {}; sigma = {:.6e}",
            fmt_lambda(m.lambda),
            fmt_freq(m.lambda.im),
            fmt_freq(m.omega_n),
            m.sigma
        )),
        None => sink.say("no oscillatory modes"),
    }
    if method != Method::Numeric {
        let oracle = numeric_spectrum(&build_state_space(sec, cfg.load.as_ref())?)?;
        let gap = max_matched_gap(&spec, &oracle)?;
        sink.say(format!(
            "oracle check: max matched |dlambda| = {gap:.3e} ({:.3e} * ||A||_F)",
            gap / oracle.scale()
        ));
    }
    Ok(Outcome::Success)
}

pub fn sweep(sink: &Sink, cfg: &RunConfig, sec: &SectionParams) -> anyhow::Result<Outcome> {
    let modes = cfg.modes.clone().unwrap_or_else(|| vec![1]);
    let g_load = cfg
        .g_load
        .or(cfg.load.map(|l| l.g_load))
        .unwrap_or(DEFAULT_SWEEP_LOAD);
    let result = placement_sweep(sec, g_load, &modes)?;
    sink.emit(|w| export::write_sweep(w, &result))?;

    sink.say(format!(
        "placement sweep: n = {}, g_load = {g_load} S",
        sec.n
    ));
    if g_load == 0.0 {
        sink.say("degenerate sweep: no load, sigma does not depend on z");
    }
    for &k in &modes {
        let z = result.argmax(k).expect("sweep covers every requested mode");
        let sigma = result.sigma(z, k).expect("argmax row exists");
        let base = result.baseline(k).expect("baseline row exists").sigma;
        let mirror = sec.n + 1 - z;
        let tie = mirror != z
            && result
                .sigma(mirror, k)
                .is_some_and(|s| (s - sigma).abs() <= TIE_TOLERANCE * sigma);
        let place = if tie {
            format!("{z} (or {mirror})")
        } else {
            z.to_string()
        };
        let mut line =
            format!("mode {k}: optimal z = {place}; sigma = {sigma:.6e} (unloaded {base:.6e})");
        if k >= 2 {
            let expected = sec.n as f64 / (2.0 * k as f64);
            let agrees =
                (z as f64 - expected).abs() <= 1.0 || (mirror as f64 - expected).abs() <= 1.0;
            line.push_str(&format!(
                " [conjecture: near n/(2k) = {expected:.1}: {}]",
                if agrees { "agrees" } else { "differs" }
            ));
        }
        sink.say(line);
    }
    Ok(Outcome::Success)
}

pub fn locus(sink: &Sink, cfg: &RunConfig, sec: &SectionParams) -> anyhow::Result<Outcome> {
    let z = cfg.z.or(cfg.load.map(|l| l.z)).unwrap_or(sec.n.div_ceil(2));
    let grid = match &cfg.g_grid {
        Some(g) => g.points()?,
        None => LoadGrid::default().points()?,
    };
    let locus = root_locus(sec, z, &grid)?;
    sink.emit(|w| export::write_locus(w, &locus))?;

    let scale = frobenius_norm(sec, None);
    let g_max = *grid.last().expect("grid is non-empty");
    let finals: Vec<_> = locus.final_traces().collect();
    let (stationary, moving): (Vec<&RootLocusTrace>, Vec<&RootLocusTrace>) = finals
        .iter()
        .partition(|t| t.excursion() <= STATIONARY_TOLERANCE * scale);
    sink.say(format!(
        "root locus: n = {}, z = {z}, {} grid points up to {g_max} S, {} traces",
        sec.n,
        grid.len(),
        locus.traces.len()
    ));
    let stationary_freqs: Vec<String> = stationary
        .iter()
        .filter(|t| t.start().im > 0.0)
        .map(|t| format!("{:.2} Hz", t.start().im / (2.0 * PI)))
        .collect();
    sink.say(format!(
        "stationary traces: {} (pairs at {})",
        stationary.len(),
        if stationary_freqs.is_empty() {
            "none".to_string()
        } else {
            stationary_freqs.join(", ")
        }
    ));
    sink.say(format!("moving traces: {}", moving.len()));

    if grid.len() > 1 && !moving.is_empty() {
        let limit = asymptotic_spectrum_large_load(sec, z)?;
        let pole = limit.load_pole(g_max);
        let pole_trace = moving
            .iter()
            .min_by(|a, b| (a.end() - pole).norm().total_cmp(&(b.end() - pole).norm()))
            .expect("moving is non-empty");
        sink.say(format!(
            "load-pole trace {}: ends at {} vs -(G+g)/C = {pole:.6e} (rel. error {:.3e})",
            pole_trace.id,
            fmt_lambda(pole_trace.end()),
            (pole_trace.end() - pole).norm() / pole.abs()
        ));
        let worst = moving
            .iter()
            .filter(|t| t.id != pole_trace.id)
            .map(|t| limit.distance_to(t.end()))
            .fold(0.0, f64::max);
        sink.say(format!(
            "asymptotic targets: decoupled sub-blocks of sizes {} and {}; \
             farthest moving trace end is {worst:.3e} ({:.3e} * ||A||_F) from a target",
            limit.left.len(),
            limit.right.len(),
            worst / scale
        ));
    }
    // Breaks occur where modes coalesce on the real axis; they are part of
    // the result, not a failure, so they are reported without a warning code.
    for b in &locus.breaks {
        eprintln!(
            "note: trace break at grid index {} (g_load = {}): trace {} ended, trace {} started \
             (step {:.3e} vs spacing {:.3e})",
            b.grid_index, b.g_load, b.ended_trace, b.started_trace, b.distance, b.spacing
        );
    }
    Ok(Outcome::Success)
}

pub fn sensitivity(sink: &Sink, cfg: &RunConfig, sec: &SectionParams) -> anyhow::Result<Outcome> {
    let k = cfg.mode_k.unwrap_or(1);
    let profile = sensitivity_profile(sec, k)?;
    sink.emit(|w| export::write_sensitivity(w, &profile))?;

    let n = sec.n;
    let best = optimal_location(sec, k)?;
    let mirror = n + 1 - best.z;
    let tie = mirror != best.z
        && profile.points.iter().any(|p| {
            p.z == mirror
                && (p.dlambda_dgl.re - best.dlambda_dgl.re).abs()
                    <= TIE_TOLERANCE * best.dlambda_dgl.re.abs()
        });
    sink.say(format!(
        "sensitivity of mode {k}: n = {n}, {} load positions",
        profile.points.len()
    ));
    sink.say(format!(
        "optimal z = {}{}; dlambda/dG_L = {}{}",
        best.z,
        if tie {
            format!(" or {mirror}")
        } else {
            String::new()
        },
        fmt_lambda(best.dlambda_dgl),
        if best.established {
            ""
        } else {
            " [empirical for k >= 2]"
        }
    ));

    // Odd load indices at or next to the center.
    let center: Vec<usize> = if n % 2 == 1 {
        vec![n]
    } else {
        vec![n - 1, n + 1]
    };
    if k == 1 {
        let reference = -1.0 / (sec.capacitance * (n as f64 + 2.0));
        let op = OperatingPoint::new(sec, 1)?;
        for &j in &center {
            let exact = eigenvalue_sensitivity(&op, j, sec, false)?;
            sink.say(format!(
                "center reference -1/(C(n+2)) = {reference:.6e}; exact at j = {j}: {} \
                 (rel. difference {:.3e})",
                fmt_lambda(exact),
                (exact - reference).norm() / exact.norm()
            ));
        }
    }
    let mut indices = vec![1, center[0], 2 * n - 1];
    indices.sort_unstable();
    indices.dedup();
    let checks = validate_against_fd(sec, k, &indices, FD_STEP)?;
    let worst = checks.iter().map(|c| c.3).fold(0.0, f64::max);
    let at: Vec<String> = indices.iter().map(|j| j.to_string()).collect();
    sink.say(format!(
        "FD validation error (j = {}, dG_L = {FD_STEP:e} S): {:.3}% ({})",
        at.join(", "),
        100.0 * worst,
        if worst <= 0.05 {
            "within 5%"
        } else {
            "exceeds 5%"
        }
    ));
    Ok(Outcome::Success)
}

pub fn simulate(
    sink: &Sink,
    cfg: &RunConfig,
    sec: &SectionParams,
    peaks_path: Option<PathBuf>,
) -> anyhow::Result<Outcome> {
    let out = sink
        .out_path()
        .ok_or_else(|| UsageError("simulate needs --out for the trajectory CSV".into()))?
        .to_path_buf();
    let peaks_path = peaks_path.unwrap_or_else(|| {
        let stem = out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.with_file_name(format!("{stem}_peaks.csv"))
    });
    let dt = cfg.dt.unwrap_or(DEFAULT_DT);
    let t_end = cfg.t_end.unwrap_or(DEFAULT_T_END);
    let source = cfg.source.unwrap_or(SourceWaveform::step(1.0));
    let stride = cfg.stride.unwrap_or(1);
    if stride == 0 {
        return Err(UsageError("stride must be >= 1".into()).into());
    }
    let probe = cfg
        .probe
        .clone()
        .unwrap_or_else(|| format!("v_{}", sec.n.div_ceil(2)));

    let model = build_state_space(sec, cfg.load.as_ref())?;
    let traj = simulate_energization(&model, &source, dt, t_end)?;
    let state = traj
        .labels
        .iter()
        .position(|l| *l == probe)
        .ok_or_else(|| UsageError(format!("unknown probe state `{probe}`")))?;
    let peaks = spectral_peaks(&traj, state)?;
    sink.emit(|w| export::write_trajectory(w, &traj, stride))?;
    let mut buf = Vec::new();
    export::write_peaks(&mut buf, &peaks)?;
    crate::write_atomic(&peaks_path, &buf)?;

    let bin = bin_width(traj.sample_count(), dt);
    sink.say(format!(
        "simulated {} states for {t_end} s at dt = {dt} s ({} samples, bin {bin:.4} Hz)",
        traj.n_states(),
        traj.sample_count()
    ));
    sink.say(format!(
        "peaks of {probe} written to {}",
        peaks_path.display()
    ));
    let first = identify_resonances(&numeric_spectrum(&model)?)
        .into_iter()
        .next();
    match (peaks.first(), first) {
        (Some(p), Some(m)) => sink.say(format!(
            "top peak {} vs first resonance {}: {:.2} bins apart",
            fmt_freq(2.0 * PI * p.f_hz),
            fmt_freq(m.lambda.im),
            (p.f_hz - m.f_damped).abs() / bin
        )),
        (Some(p), None) => sink.say(format!("top peak {}", fmt_freq(2.0 * PI * p.f_hz))),
        (None, _) => sink.say("no spectral peaks"),
    }
    let mut warnings = traj.warnings.clone();
    if !traj.is_finite() {
        warnings.push("trajectory contains non-finite samples".into());
    }
    Ok(if warnings.is_empty() {
        Outcome::Success
    } else {
        Outcome::Warnings(warnings)
    })
}

pub fn validate(sink: &Sink, seed: u64, corrupt_recurrence: bool) -> anyhow::Result<Outcome> {
    let report = run_validation(&ValidationOptions {
        seed,
        corrupt_recurrence,
    })?;
    sink.emit(|w| {
        w.extend_from_slice(report.render().as_bytes());
        Ok(())
    })?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        sink.say(format!(
            "all {} invariants pass (seed {seed})",
            report.checks.len()
        ));
        Ok(Outcome::Success)
    } else {
        sink.say(format!(
            "{failed} of {} invariants failed (seed {seed})",
            report.checks.len()
        ));
        Ok(Outcome::InvariantFailure)
    }
}
