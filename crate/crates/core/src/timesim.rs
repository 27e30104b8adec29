//! Time-domain energization of the line and spectral peak extraction.
//!
//! Integration uses the exact zero-order-hold map
//! `x_{k+1} = e^{A dt} x_k + (∫_0^dt e^{A s} ds) B u_k`, obtained from one
//! exponential of the block matrix `[[A, B], [0, 0]] dt`. The dynamics are
//! therefore exact; only the input is sampled.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line_model::StateSpaceModel;
use crate::spectra::numeric_spectrum;

/// Minimum record length accepted by [`spectral_peaks`].
pub const MIN_PEAK_SAMPLES: usize = 1024;

/// Peaks below this fraction of the largest one are dropped.
pub const PEAK_FLOOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Step,
    Ramp,
}

/// Voltage reference applied at the sending end (`v_a`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceWaveform {
    pub kind: WaveformKind,
    /// Final voltage, V.
    pub amplitude: f64,
    /// Rise time for ramps, s. Ignored for steps.
    #[serde(default)]
    pub ramp_duration: f64,
    /// Drive `v_b` with the same waveform instead of holding it at zero.
    #[serde(default)]
    pub mirrored: bool,
}

impl SourceWaveform {
    pub fn step(amplitude: f64) -> Self {
        SourceWaveform {
            kind: WaveformKind::Step,
            amplitude,
            ramp_duration: 0.0,
            mirrored: false,
        }
    }

    pub fn ramp(amplitude: f64, ramp_duration: f64) -> Self {
        SourceWaveform {
            kind: WaveformKind::Ramp,
            amplitude,
            ramp_duration,
            mirrored: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        if !(self.ramp_duration.is_finite() && self.ramp_duration >= 0.0) {
            return Err(Error::invalid("ramp_duration", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Sending-end voltage at time `t ≥ 0`.
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            WaveformKind::Step => self.amplitude,
            WaveformKind::Ramp if self.ramp_duration == 0.0 => self.amplitude,
            WaveformKind::Ramp => self.amplitude * (t / self.ramp_duration).min(1.0),
        }
    }

    /// `(v_a, v_b)` at time `t`.
    pub fn inputs(&self, t: f64) -> [f64; 2] {
        let v = self.value(t);
        [v, if self.mirrored { v } else { 0.0 }]
    }
}

/// Sampled state history, row-major by sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t_end: f64,
    pub labels: Vec<String>,
    data: Vec<f64>,
    /// Set when the discretized dynamics are not contractive.
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn sample_count(&self) -> usize {
        self.data.len() / self.n_states()
    }

    pub fn time(&self, sample: usize) -> f64 {
        sample as f64 * self.dt
    }

    pub fn sample(&self, sample: usize) -> &[f64] {
        let n = self.n_states();
        &self.data[sample * n..(sample + 1) * n]
    }

    pub fn series(&self, state: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(state)
            .step_by(self.n_states())
            .copied()
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Number of samples on `[0, t_end]` at spacing `dt`, endpoints included.
pub fn sample_count(dt: f64, t_end: f64) -> usize {
    (t_end / dt + 1e-9).floor() as usize + 1
}

/// Zero-order-hold pair `(A_d, B_d)`.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    block.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = block.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Propagate `ẋ = A x + B u(t)` with inputs held over each step.
pub fn simulate_lti(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    input: impl Fn(f64) -> DVector<f64>,
    dt: f64,
    t_end: f64,
    labels: Vec<String>,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::invalid(
            "t_end",
            format!("must be >= dt, got {t_end}"),
        ));
    }
    let n = a.nrows();
    let (ad, bd) = discretize(a, b, dt);
    let samples = sample_count(dt, t_end);
    let mut data = Vec::with_capacity(samples * n);
    let mut x = x0.clone();
    let mut next = DVector::zeros(n);
    data.extend(x.iter());
    for k in 0..samples - 1 {
        let u = input(k as f64 * dt);
        next.gemv(1.0, &ad, &x, 0.0);
        next.gemv(1.0, &bd, &u, 1.0);
        std::mem::swap(&mut x, &mut next);
        data.extend(x.iter());
    }
    Ok(Trajectory {
        dt,
        t_end,
        labels,
        data,
        warnings: Vec::new(),
    })
}

/// Energize the line from rest with the given source.
pub fn simulate_energization(
    model: &StateSpaceModel,
    src: &SourceWaveform,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    src.validate()?;
    let x0 = DVector::zeros(model.dim());
    let input = |t: f64| DVector::from_row_slice(&src.inputs(t));
    let mut traj = simulate_lti(
        model.a(),
        model.b(),
        &x0,
        input,
        dt,
        t_end,
        model.state_labels(),
    )?;
    let spectrum = numeric_spectrum(model)?;
    let worst = spectrum
        .eigenvalues()
        .iter()
        .map(|l| (l * dt).exp().norm())
        .fold(0.0, f64::max);
    if worst >= 1.0 {
        traj.warnings.push(format!(
            "unstable discretization: max |exp(lambda dt)| = {worst:.6}"
        ));
    }
    Ok(traj)
}

/// A local maximum of the magnitude spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    /// Interpolated frequency, Hz.
    pub f_hz: f64,
    /// Bin magnitude relative to the largest peak.
    pub rel_mag: f64,
    /// Absolute bin magnitude of the windowed transform.
    pub magnitude: f64,
    pub bin: usize,
}

/// Frequency resolution of a record of `samples` points at spacing `dt`.
pub fn bin_width(samples: usize, dt: f64) -> f64 {
    1.0 / (samples as f64 * dt)
}

/// Peaks of the windowed magnitude spectrum of one state's history.
pub fn spectral_peaks(traj: &Trajectory, state: usize) -> Result<Vec<Peak>> {
    if state >= traj.n_states() {
        return Err(Error::invalid(
            "state",
            format!("index {state} outside 0..{}", traj.n_states()),
        ));
    }
    series_peaks(&traj.series(state), traj.dt)
}

/// Magnitude of the Hann-windowed, mean-removed transform at bins
/// `0..=len/2`. Bin `i` sits at `i · bin_width(len, dt)`.
pub fn windowed_magnitudes(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < MIN_PEAK_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: n,
            need: MIN_PEAK_SAMPLES,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..n / 2 + 1].iter().map(|c| c.norm()).collect())
}

/// [`spectral_peaks`] on a bare sample series.
pub fn series_peaks(series: &[f64], dt: f64) -> Result<Vec<Peak>> {
    let n = series.len();
    let mags = windowed_magnitudes(series)?;

    let mut peaks = Vec::new();
    for i in 1..mags.len() - 1 {
        if mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] {
            let (l, c, r) = (mags[i - 1], mags[i], mags[i + 1]);
            let denom = l - 2.0 * c + r;
            let offset = if denom != 0.0 {
                0.5 * (l - r) / denom
            } else {
                0.0
            };
            peaks.push(Peak {
                f_hz: (i as f64 + offset) * bin_width(n, dt),
                rel_mag: 0.0,
                magnitude: c,
                bin: i,
            });
        }
    }
    let top = peaks.iter().map(|p| p.magnitude).fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(Vec::new());
    }
    peaks.retain(|p| p.magnitude >= PEAK_FLOOR * top);
    for p in &mut peaks {
        p.rel_mag = p.magnitude / top;
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line_model::{build_state_space, SectionParams};

    #[test]
    fn zero_input_stays_at_rest() {
        let sec = SectionParams::new(0.1, 1e-3, 1e-6, 0.0, 4).unwrap();
        let model = build_state_space(&sec, None).unwrap();
        let traj = simulate_energization(&model, &SourceWaveform::step(0.0), 1e-5, 1e-3).unwrap();
        assert_eq!(traj.sample_count(), 101);
        assert!(traj.sample(100).iter().all(|&v| v == 0.0));
        assert!(traj.warnings.is_empty());
    }

    #[test]
    fn first_order_step() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let x0 = DVector::zeros(1);
        let traj = simulate_lti(
            &a,
            &b,
            &x0,
            |_| DVector::from_element(1, 1.0),
            0.1,
            5.0,
            vec!["x".into()],
        )
        .unwrap();
        assert_eq!(traj.sample_count(), 51);
        for k in 0..traj.sample_count() {
            let t = traj.time(k);
            assert!((traj.sample(k)[0] - (1.0 - (-t).exp())).abs() <= 1e-12);
        }
    }

    #[test]
    fn ramp_waveform() {
        let r = SourceWaveform::ramp(2.0, 1.0);
        assert_eq!(r.value(0.0), 0.0);
        assert_eq!(r.value(0.5), 1.0);
        assert_eq!(r.value(3.0), 2.0);
        let mut m = r;
        m.mirrored = true;
        assert_eq!(m.inputs(0.5), [1.0, 1.0]);
        assert_eq!(r.inputs(0.5), [1.0, 0.0]);
        assert!(SourceWaveform::ramp(1.0, -1.0).validate().is_err());
    }

    #[test]
    fn rejects_bad_steps() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let x0 = DVector::zeros(1);
        let u = |_| DVector::from_element(1, 1.0);
        assert!(simulate_lti(&a, &b, &x0, u, 0.0, 1.0, vec!["x".into()]).is_err());
        assert!(simulate_lti(&a, &b, &x0, u, 0.1, 0.05, vec!["x".into()]).is_err());
    }

    #[test]
    fn unstable_model_warns() {
        // Negative conductance makes the line grow.
        let sec = SectionParams::new(0.0, 1e-3, 1e-6, 0.0, 2).unwrap();
        let model = crate::line_model::assemble(&sec, Some((1, -0.5)));
        let traj = simulate_energization(&model, &SourceWaveform::step(1.0), 1e-5, 1e-3).unwrap();
        assert_eq!(traj.warnings.len(), 1);
    }

    #[test]
    fn sinusoid_peak() {
        let dt = 1e-4;
        let series: Vec<f64> = (0..10_000)
            .map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 * dt).sin())
            .collect();
        let peaks = series_peaks(&series, dt).unwrap();
        assert!((peaks[0].f_hz - 100.0).abs() <= bin_width(series.len(), dt));
        assert_eq!(peaks[0].rel_mag, 1.0);
        assert!(series_peaks(&series[..1000], dt).is_err());
    }
}
