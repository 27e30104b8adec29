//! CSV writers. Every float is written with 17 significant digits in
//! scientific notation, so parsing a file back yields the exact values.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use crate::error::Result;
use crate::sensitivity::SensitivityProfile;
use crate::spectra::{Spectrum, REAL_TOLERANCE};
use crate::sweeps::{PlacementSweepResult, RootLocus};
use crate::timesim::{Peak, Trajectory};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_spectrum<W: Write>(mut w: W, spec: &Spectrum) -> Result<()> {
    writeln!(w, "re,im,omega_n,f_damped_hz,sigma,mode_k")?;
    let tol = REAL_TOLERANCE * spec.scale();
    let modes: HashMap<(u64, u64), usize> = spec
        .resonances()
        .iter()
        .map(|m| ((m.lambda.re.to_bits(), m.lambda.im.to_bits()), m.k))
        .collect();
    for e in spec.eigenvalues() {
        let upper = if e.im < 0.0 { e.conj() } else { *e };
        let k = if e.im.abs() > tol {
            modes
                .get(&(upper.re.to_bits(), upper.im.to_bits()))
                .copied()
        } else {
            None
        };
        let omega = e.norm();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(e.re),
            fmt_f64(e.im),
            fmt_f64(omega),
            fmt_f64(e.im / (2.0 * PI)),
            fmt_f64(-e.re / omega),
            k.map(|k| k.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(mut w: W, sweep: &PlacementSweepResult) -> Result<()> {
    writeln!(w, "z,mode_k,sigma,re,im")?;
    for r in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.z,
            r.mode_k,
            fmt_f64(r.sigma),
            fmt_f64(r.re),
            fmt_f64(r.im)
        )?;
    }
    Ok(())
}

pub fn write_sensitivity<W: Write>(mut w: W, profile: &SensitivityProfile) -> Result<()> {
    writeln!(w, "j,z,dlambda_re,dlambda_im,mode_k")?;
    for p in &profile.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.j,
            p.z,
            fmt_f64(p.dlambda_dgl.re),
            fmt_f64(p.dlambda_dgl.im),
            profile.k
        )?;
    }
    Ok(())
}

pub fn write_locus<W: Write>(mut w: W, locus: &RootLocus) -> Result<()> {
    writeln!(w, "trace_id,g_load,re,im")?;
    for t in &locus.traces {
        for p in &t.points {
            writeln!(
                w,
                "{},{},{},{}",
                t.id,
                fmt_f64(p.g_load),
                fmt_f64(p.lambda.re),
                fmt_f64(p.lambda.im)
            )?;
        }
    }
    Ok(())
}

/// Every `stride`-th sample, starting with the first.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory, stride: usize) -> Result<()> {
    writeln!(w, "t,{}", traj.labels.join(","))?;
    for k in (0..traj.sample_count()).step_by(stride.max(1)) {
        write!(w, "{}", fmt_f64(traj.time(k)))?;
        for v in traj.sample(k) {
            write!(w, ",{}", fmt_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_peaks<W: Write>(mut w: W, peaks: &[Peak]) -> Result<()> {
    writeln!(w, "f_hz,rel_mag")?;
    for p in peaks {
        writeln!(w, "{},{}", fmt_f64(p.f_hz), fmt_f64(p.rel_mag))?;
    }
    Ok(())
}
