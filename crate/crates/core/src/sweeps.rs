//! Load-placement sweeps, root loci over load magnitude, and the
//! decoupled large-load limit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen;
use crate::error::{Error, Result};
use crate::line_model::{build_state_space, LoadSpec, SectionParams};
use crate::spectra::{damping_factor, match_eigenvalues, numeric_spectrum};

/// One `(z, k)` cell of a placement sweep; `z = 0` is the unloaded line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub z: usize,
    pub mode_k: usize,
    pub sigma: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlacementSweepResult {
    pub n: usize,
    pub g_load: f64,
    pub modes: Vec<usize>,
    /// Baseline rows first (`z = 0`), then `z = 1..n` for each mode.
    pub rows: Vec<SweepRow>,
}

impl PlacementSweepResult {
    pub fn baseline(&self, k: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.z == 0 && r.mode_k == k)
    }

    pub fn sigma(&self, z: usize, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.z == z && r.mode_k == k)
            .map(|r| r.sigma)
    }

    /// σ for `z = 1..n`, in order.
    pub fn curve(&self, k: usize) -> Vec<f64> {
        (1..=self.n).filter_map(|z| self.sigma(z, k)).collect()
    }

    /// Node with the largest σ for mode `k`; ties go to the smaller `z`.
    pub fn argmax(&self, k: usize) -> Option<usize> {
        let curve = self.curve(k);
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in curve.iter().enumerate() {
            match best {
                Some((_, b)) if s <= b * (1.0 + 1e-12) => {}
                _ => best = Some((i + 1, s)),
            }
        }
        best.map(|(z, _)| z)
    }
}

/// Damping of the requested modes with the load at every node.
///
/// Modes are identified by matching each loaded spectrum to the unloaded
/// one, not by frequency rank.
pub fn placement_sweep(
    sec: &SectionParams,
    g_load: f64,
    modes: &[usize],
) -> Result<PlacementSweepResult> {
    sec.validate()?;
    if !(g_load.is_finite() && g_load >= 0.0) {
        return Err(Error::invalid(
            "g_load",
            format!("must be >= 0, got {g_load}"),
        ));
    }
    if modes.is_empty() {
        return Err(Error::invalid("modes", "at least one mode is required"));
    }
    if let Some(&k) = modes.iter().find(|&&k| k == 0 || k > sec.n) {
        return Err(Error::ModeOutOfRange { k, n: sec.n });
    }
    let baseline = numeric_spectrum(&build_state_space(sec, None)?)?;
    let resonances = baseline.resonances();
    let mut targets = Vec::with_capacity(modes.len());
    for &k in modes {
        let mode = resonances.get(k - 1).ok_or(Error::ModeOutOfRange {
            k,
            n: resonances.len(),
        })?;
        let index = baseline
            .eigenvalues()
            .iter()
            .position(|e| *e == mode.lambda)
            .expect("resonance comes from this spectrum");
        targets.push((k, index));
    }

    let mut rows = Vec::with_capacity((sec.n + 1) * modes.len());
    for &(k, index) in &targets {
        rows.push(row(0, k, baseline.eigenvalues()[index])?);
    }
    let per_node: Vec<Vec<SweepRow>> = (1..=sec.n)
        .into_par_iter()
        .map(|z| {
            let wrap = |e: Error| Error::SweepPoint {
                z,
                source: Box::new(e),
            };
            let model = build_state_space(sec, Some(&LoadSpec::new(z, g_load))).map_err(wrap)?;
            let loaded = numeric_spectrum(&model).map_err(wrap)?;
            let pairs = match_eigenvalues(baseline.eigenvalues(), loaded.eigenvalues())?;
            targets
                .iter()
                .map(|&(k, index)| row(z, k, loaded.eigenvalues()[pairs[index].1]))
                .collect()
        })
        .collect::<Result<_>>()?;
    for &(k, _) in &targets {
        for node_rows in &per_node {
            rows.extend(node_rows.iter().filter(|r| r.mode_k == k));
        }
    }
    Ok(PlacementSweepResult {
        n: sec.n,
        g_load,
        modes: modes.to_vec(),
        rows,
    })
}

fn row(z: usize, mode_k: usize, lambda: Complex64) -> Result<SweepRow> {
    // Report the upper member of the pair.
    let lambda = if lambda.im < 0.0 {
        lambda.conj()
    } else {
        lambda
    };
    Ok(SweepRow {
        z,
        mode_k,
        sigma: damping_factor(lambda)?,
        re: lambda.re,
        im: lambda.im,
    })
}

/// Log-spaced load values, optionally preceded by zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_true")]
    pub include_zero: bool,
}

fn default_true() -> bool {
    true
}

impl Default for LoadGrid {
    fn default() -> Self {
        LoadGrid {
            min: 1e-4,
            max: 1e4,
            count: 60,
            include_zero: true,
        }
    }
}

impl LoadGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max >= self.min && self.min.is_finite() && self.max.is_finite())
        {
            return Err(Error::invalid(
                "g_grid",
                format!("need 0 < min <= max, got {}..{}", self.min, self.max),
            ));
        }
        let mut pts = Vec::with_capacity(self.count + 1);
        if self.include_zero {
            pts.push(0.0);
        }
        match self.count {
            0 => {}
            1 => pts.push(self.min),
            c => {
                let (a, b) = (self.min.ln(), self.max.ln());
                for i in 0..c {
                    pts.push((a + (b - a) * i as f64 / (c - 1) as f64).exp());
                }
                let first = pts.len() - c;
                pts[first] = self.min;
                *pts.last_mut().unwrap() = self.max;
            }
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocusPoint {
    pub g_load: f64,
    pub lambda: Complex64,
}

/// One eigenvalue followed along the load grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootLocusTrace {
    pub id: usize,
    pub z: usize,
    pub points: Vec<LocusPoint>,
}

impl RootLocusTrace {
    pub fn start(&self) -> Complex64 {
        self.points[0].lambda
    }

    pub fn end(&self) -> Complex64 {
        self.points[self.points.len() - 1].lambda
    }

    /// Largest distance from the starting point along the trace.
    pub fn excursion(&self) -> f64 {
        let s = self.start();
        self.points
            .iter()
            .map(|p| (p.lambda - s).norm())
            .fold(0.0, f64::max)
    }
}

/// Place where chaining could not resolve mode identity; the affected
/// trace ends and a new one starts at `grid_index`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceBreak {
    pub grid_index: usize,
    pub g_load: f64,
    pub ended_trace: usize,
    pub started_trace: usize,
    pub distance: f64,
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootLocus {
    pub z: usize,
    pub grid: Vec<f64>,
    pub traces: Vec<RootLocusTrace>,
    pub breaks: Vec<TraceBreak>,
}

impl RootLocus {
    /// Traces that reach the last grid point.
    pub fn final_traces(&self) -> impl Iterator<Item = &RootLocusTrace> {
        let last = *self.grid.last().expect("grid is never empty");
        self.traces
            .iter()
            .filter(move |t| t.points.last().map(|p| p.g_load) == Some(last))
    }
}

/// Bisection depth used to resolve ambiguous steps.
const MAX_REFINE_DEPTH: usize = 10;

/// Track every eigenvalue as the load at node `z` runs over `g_grid`.
pub fn root_locus(sec: &SectionParams, z: usize, g_grid: &[f64]) -> Result<RootLocus> {
    sec.validate()?;
    if g_grid.is_empty() {
        return Err(Error::invalid("g_grid", "must contain at least one value"));
    }
    if g_grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::invalid("g_grid", "values must be finite and >= 0"));
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("g_grid", "must be strictly increasing"));
    }
    LoadSpec::new(z, 0.0).validate(sec.n)?;

    let spectrum_at = |g: f64| -> Result<Vec<Complex64>> {
        let model = build_state_space(sec, Some(&LoadSpec::new(z, g)))?;
        Ok(numeric_spectrum(&model)?.eigenvalues().to_vec())
    };
    let spectra: Vec<Vec<Complex64>> = g_grid
        .par_iter()
        .map(|&g| spectrum_at(g))
        .collect::<Result<_>>()?;

    let dim = spectra[0].len();
    let mut traces: Vec<RootLocusTrace> = spectra[0]
        .iter()
        .enumerate()
        .map(|(id, &lambda)| RootLocusTrace {
            id,
            z,
            points: vec![LocusPoint {
                g_load: g_grid[0],
                lambda,
            }],
        })
        .collect();
    // active[s] = trace currently holding slot s of the previous spectrum.
    let mut active: Vec<usize> = (0..dim).collect();
    let mut breaks = Vec::new();

    for step in 1..g_grid.len() {
        let (g0, g1) = (g_grid[step - 1], g_grid[step]);
        let prev = &spectra[step - 1];
        let next = &spectra[step];
        let link = chain(prev, next, g0, g1, &spectrum_at, 0)?;
        let mut next_active = vec![usize::MAX; dim];
        for (slot, &target) in link.map.iter().enumerate() {
            let mut trace = active[slot];
            if let Some(&(distance, spacing)) = link.unresolved.get(&slot) {
                let id = traces.len();
                breaks.push(TraceBreak {
                    grid_index: step,
                    g_load: g1,
                    ended_trace: trace,
                    started_trace: id,
                    distance,
                    spacing,
                });
                traces.push(RootLocusTrace {
                    id,
                    z,
                    points: Vec::new(),
                });
                trace = id;
            }
            traces[trace].points.push(LocusPoint {
                g_load: g1,
                lambda: next[target],
            });
            next_active[target] = trace;
        }
        active = next_active;
    }
    Ok(RootLocus {
        z,
        grid: g_grid.to_vec(),
        traces,
        breaks,
    })
}

struct Link {
    /// prev slot → next slot.
    map: Vec<usize>,
    /// prev slots whose identity could not be resolved: (distance, spacing).
    unresolved: std::collections::BTreeMap<usize, (f64, f64)>,
}

fn chain(
    prev: &[Complex64],
    next: &[Complex64],
    g0: f64,
    g1: f64,
    spectrum_at: &dyn Fn(f64) -> Result<Vec<Complex64>>,
    depth: usize,
) -> Result<Link> {
    let pairs = match_eigenvalues(prev, next)?;
    let mut map = vec![0; prev.len()];
    let mut unresolved = std::collections::BTreeMap::new();
    for &(i, j) in &pairs {
        map[i] = j;
        let distance = (prev[i] - next[j]).norm();
        let spacing = prev
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, e)| (e - prev[i]).norm())
            .fold(f64::INFINITY, f64::min);
        if distance > 0.5 * spacing {
            unresolved.insert(i, (distance, spacing));
        }
    }
    if unresolved.is_empty() || depth >= MAX_REFINE_DEPTH {
        return Ok(Link { map, unresolved });
    }
    let mid = if g0 > 0.0 { (g0 * g1).sqrt() } else { 0.5 * g1 };
    let middle = spectrum_at(mid)?;
    let first = chain(prev, &middle, g0, mid, spectrum_at, depth + 1)?;
    let second = chain(&middle, next, mid, g1, spectrum_at, depth + 1)?;
    let map = first.map.iter().map(|&m| second.map[m]).collect();
    let mut unresolved = first.unresolved;
    for (slot, &m) in first.map.iter().enumerate() {
        if let Some(&v) = second.unresolved.get(&m) {
            unresolved.entry(slot).or_insert(v);
        }
    }
    Ok(Link { map, unresolved })
}

/// Limit of the spectrum as the load conductance grows without bound: the
/// loaded node decouples the line into two unloaded sub-lines, plus one
/// real eigenvalue at `−G_L/C` that runs off to −∞.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticSpectrum {
    pub z: usize,
    pub j: usize,
    /// Eigenvalues of the leading `j × j` block.
    pub left: Vec<Complex64>,
    /// Eigenvalues of the trailing `(2n − j) × (2n − j)` block.
    pub right: Vec<Complex64>,
    pub sections: SectionParams,
}

impl AsymptoticSpectrum {
    /// All `2n` finite limit points.
    pub fn finite(&self) -> Vec<Complex64> {
        self.left.iter().chain(&self.right).copied().collect()
    }

    /// The load-dependent real eigenvalue `−(G + g_load)/C`.
    pub fn load_pole(&self, g_load: f64) -> f64 {
        -(self.sections.conductance + g_load) / self.sections.capacitance
    }

    pub fn distance_to(&self, target: Complex64) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .map(|e| (e - target).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn asymptotic_spectrum_large_load(sec: &SectionParams, z: usize) -> Result<AsymptoticSpectrum> {
    LoadSpec::new(z, 0.0).validate(sec.n)?;
    let model = build_state_space(sec, None)?;
    let a = model.a();
    let j = 2 * z - 1;
    let dim = a.nrows();
    let left: DMatrix<f64> = a.view((0, 0), (j, j)).into_owned();
    let right: DMatrix<f64> = a
        .view((j + 1, j + 1), (dim - j - 1, dim - j - 1))
        .into_owned();
    Ok(AsymptoticSpectrum {
        z,
        j,
        left: eigen::eigenvalues(&left)?,
        right: eigen::eigenvalues(&right)?,
        sections: *sec,
    })
}
