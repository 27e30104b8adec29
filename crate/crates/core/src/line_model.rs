//! Lumped π-section model of an energized transmission line.
//!
//! The state vector alternates branch currents and node voltages,
//! `(i_1, v_1, i_2, v_2, …, v_n, i_{n+1})`, so a line of `n` sections has
//! `2n + 1` states. Inputs are the two terminal sources `(v_a, v_b)`.
//!
//! Positions in this module are 1-based wherever they name a state or a
//! node, so that `entry(2z, 2z)` is the diagonal term of node `z`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-kilometre electrical constants of a line and its discretization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineParams {
    /// Series resistance, Ω/km.
    pub r_per_km: f64,
    /// Series inductance, H/km.
    pub l_per_km: f64,
    /// Shunt capacitance, F/km.
    pub c_per_km: f64,
    /// Shunt conductance, S/km.
    pub g_per_km: f64,
    pub length_km: f64,
    pub n_sections: usize,
}

impl LineParams {
    /// The 100 km, 110 kV line used throughout the load-placement study.
    pub fn reference_110kv(n_sections: usize) -> Self {
        LineParams {
            r_per_km: 0.02,
            l_per_km: 0.5e-3,
            c_per_km: 0.4e-6,
            g_per_km: 0.0,
            length_km: 100.0,
            n_sections,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("l_per_km", self.l_per_km)?;
        positive("c_per_km", self.c_per_km)?;
        non_negative("r_per_km", self.r_per_km)?;
        non_negative("g_per_km", self.g_per_km)?;
        positive("length_km", self.length_km)?;
        if self.n_sections == 0 {
            return Err(Error::invalid("n_sections", "must be at least 1"));
        }
        Ok(())
    }
}

/// Lumped values of a single π-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionParams {
    /// Series resistance R, Ω.
    pub resistance: f64,
    /// Series inductance L, H.
    pub inductance: f64,
    /// Shunt capacitance C, F.
    pub capacitance: f64,
    /// Shunt conductance G, S.
    pub conductance: f64,
    /// Number of cascaded sections.
    pub n: usize,
}

impl SectionParams {
    pub fn new(
        resistance: f64,
        inductance: f64,
        capacitance: f64,
        conductance: f64,
        n: usize,
    ) -> Result<Self> {
        let sec = SectionParams {
            resistance,
            inductance,
            capacitance,
            conductance,
            n,
        };
        sec.validate()?;
        Ok(sec)
    }

    pub fn validate(&self) -> Result<()> {
        positive("inductance", self.inductance)?;
        positive("capacitance", self.capacitance)?;
        non_negative("resistance", self.resistance)?;
        non_negative("conductance", self.conductance)?;
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok(())
    }

    /// R/L, the decay rate of an isolated branch current (s⁻¹).
    pub fn series_rate(&self) -> f64 {
        self.resistance / self.inductance
    }

    /// G/C, the decay rate of an isolated node voltage (s⁻¹).
    pub fn shunt_rate(&self) -> f64 {
        self.conductance / self.capacitance
    }

    /// The product LC (s²).
    pub fn lc(&self) -> f64 {
        self.inductance * self.capacitance
    }

    /// Same sections, different count. Used for principal sub-blocks.
    pub fn with_sections(&self, n: usize) -> Self {
        SectionParams { n, ..*self }
    }

    /// Number of states, `2n + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }
}

/// A shunt load of conductance `g_load` at node `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// Node index, 1 ≤ z ≤ n.
    pub z: usize,
    /// Added conductance in siemens.
    pub g_load: f64,
}

impl LoadSpec {
    pub fn new(z: usize, g_load: f64) -> Self {
        LoadSpec { z, g_load }
    }

    /// The odd index j = 2z − 1; the load sits at state j + 1.
    pub fn index_j(&self) -> usize {
        2 * self.z - 1
    }

    /// Total shunt conductance at the loaded node, G + g_load.
    pub fn total_conductance(&self, sec: &SectionParams) -> f64 {
        sec.conductance + self.g_load
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.z == 0 || self.z > n {
            return Err(Error::PositionOutOfRange { z: self.z, n });
        }
        non_negative("g_load", self.g_load)
    }
}

/// Line description as stored on disk: the [`LineParams`] keys at top level
/// plus an optional `load` object. Conductances are in siemens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub r_per_km: f64,
    pub l_per_km: f64,
    pub c_per_km: f64,
    pub g_per_km: f64,
    pub length_km: f64,
    pub n_sections: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadSpec>,
}

impl LineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: LineConfig = serde_json::from_str(text)?;
        cfg.line().validate()?;
        if let Some(load) = &cfg.load {
            load.validate(cfg.n_sections)?;
        }
        Ok(cfg)
    }

    pub fn line(&self) -> LineParams {
        LineParams {
            r_per_km: self.r_per_km,
            l_per_km: self.l_per_km,
            c_per_km: self.c_per_km,
            g_per_km: self.g_per_km,
            length_km: self.length_km,
            n_sections: self.n_sections,
        }
    }
}

/// Divide a line into `n_sections` equal π-sections.
pub fn section_params(params: &LineParams) -> Result<SectionParams> {
    params.validate()?;
    let scale = params.length_km / params.n_sections as f64;
    Ok(SectionParams {
        resistance: params.r_per_km * scale,
        inductance: params.l_per_km * scale,
        capacitance: params.c_per_km * scale,
        conductance: params.g_per_km * scale,
        n: params.n_sections,
    })
}

/// `ẋ = A x + B u` for the cascaded line, with an optional single load.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sections: SectionParams,
    load: Option<LoadSpec>,
}

impl StateSpaceModel {
    /// Dense view of A.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Dense view of B, `(2n+1) × 2`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// A entry at 1-based `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.a[(row - 1, col - 1)]
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn sections(&self) -> &SectionParams {
        &self.sections
    }

    pub fn load(&self) -> Option<&LoadSpec> {
        self.load.as_ref()
    }

    /// ‖A‖_F, the scale every spectral tolerance is quoted against.
    pub fn frobenius_norm(&self) -> f64 {
        self.a.norm()
    }

    pub fn state_labels(&self) -> Vec<String> {
        state_labels(self.sections.n)
    }

    /// Zero-based state index of node voltage `v_z`.
    pub fn voltage_index(&self, z: usize) -> usize {
        2 * z - 1
    }
}

/// Labels `i_1, v_1, …, v_n, i_{n+1}`.
pub fn state_labels(n: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(2 * n + 1);
    for k in 1..=n {
        labels.push(format!("i_{k}"));
        labels.push(format!("v_{k}"));
    }
    labels.push(format!("i_{}", n + 1));
    labels
}

/// Build A and B. A zero `g_load` reproduces the unloaded model exactly.
pub fn build_state_space(sec: &SectionParams, load: Option<&LoadSpec>) -> Result<StateSpaceModel> {
    sec.validate()?;
    if let Some(load) = load {
        load.validate(sec.n)?;
    }
    let extra = load.map(|l| (l.z, l.g_load));
    let mut model = assemble(sec, extra);
    model.load = load.copied();
    Ok(model)
}

/// Unchecked assembly; `extra` may carry a signed conductance so that
/// finite-difference probes can step to either side of the unloaded line.
pub(crate) fn assemble(sec: &SectionParams, extra: Option<(usize, f64)>) -> StateSpaceModel {
    let n = sec.n;
    let dim = 2 * n + 1;
    let (r, l, c, g) = (
        sec.resistance,
        sec.inductance,
        sec.capacitance,
        sec.conductance,
    );
    let mut a = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        // p even (0-based) is a current state, p odd a node voltage.
        let current = p % 2 == 0;
        a[(p, p)] = if current { -r / l } else { -g / c };
        if p + 1 < dim {
            a[(p, p + 1)] = if current { -1.0 / l } else { -1.0 / c };
            a[(p + 1, p)] = if current { 1.0 / c } else { 1.0 / l };
        }
    }
    if let Some((z, g_load)) = extra {
        if g_load != 0.0 {
            let p = 2 * z - 1;
            a[(p, p)] = -(g + g_load) / c;
        }
    }
    let mut b = DMatrix::zeros(dim, 2);
    b[(0, 0)] = 1.0 / l;
    b[(dim - 1, 1)] = -1.0 / l;
    StateSpaceModel {
        a,
        b,
        sections: *sec,
        load: None,
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and >= 0, got {value}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sections(n: usize) -> SectionParams {
        SectionParams::new(1.0, 1.0, 1.0, 0.0, n).unwrap()
    }

    #[test]
    fn reference_line_section_values() {
        let sec = section_params(&LineParams::reference_110kv(60)).unwrap();
        assert!((sec.resistance - 1.0 / 30.0).abs() < 1e-15);
        assert!((sec.inductance - 5e-4 * 100.0 / 60.0).abs() < 1e-18);
        assert!((sec.capacitance - 4e-7 * 100.0 / 60.0).abs() < 1e-21);
        assert_eq!(sec.conductance, 0.0);
        assert!((sec.inductance - 8.3333e-4).abs() < 1e-8);
        assert!((sec.capacitance - 6.6667e-7).abs() < 1e-11);
    }

    #[test]
    fn single_section_keeps_line_totals() {
        let mut p = LineParams::reference_110kv(1);
        p.g_per_km = 3e-9;
        let sec = section_params(&p).unwrap();
        assert_eq!(sec.resistance, p.r_per_km * p.length_km);
        assert_eq!(sec.inductance, p.l_per_km * p.length_km);
        assert_eq!(sec.capacitance, p.c_per_km * p.length_km);
        assert_eq!(sec.conductance, p.g_per_km * p.length_km);
    }

    #[test]
    fn ten_sections() {
        let sec = section_params(&LineParams::reference_110kv(10)).unwrap();
        assert!((sec.resistance - 0.2).abs() < 1e-15);
        assert!((sec.inductance - 5e-3).abs() < 1e-18);
        assert!((sec.capacitance - 4e-6).abs() < 1e-21);
    }

    #[test]
    fn rejects_bad_line_params() {
        let base = LineParams::reference_110kv(60);
        let cases = [
            LineParams {
                l_per_km: 0.0,
                ..base
            },
            LineParams {
                c_per_km: -1.0,
                ..base
            },
            LineParams {
                r_per_km: -0.1,
                ..base
            },
            LineParams {
                g_per_km: f64::NAN,
                ..base
            },
            LineParams {
                length_km: 0.0,
                ..base
            },
            LineParams {
                n_sections: 0,
                ..base
            },
        ];
        for p in cases {
            assert!(matches!(
                section_params(&p),
                Err(Error::InvalidParameter { .. })
            ));
        }
    }

    #[test]
    fn one_section_matrix() {
        let m = build_state_space(&unit_sections(1), None).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[-1.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, -1.0]);
        assert_eq!(m.a(), &expected);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!(m.b(), &b);
    }

    #[test]
    fn load_changes_only_its_node() {
        let sec = unit_sections(2);
        let bare = build_state_space(&sec, None).unwrap();
        let loaded = build_state_space(&sec, Some(&LoadSpec::new(1, 0.5))).unwrap();
        assert_eq!(loaded.entry(2, 2), -0.5);
        assert_eq!(loaded.entry(4, 4), 0.0);
        let diff = loaded.a() - bare.a();
        let nonzero: Vec<_> = diff
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
    }

    #[test]
    fn zero_load_is_bit_exact() {
        let sec = section_params(&LineParams::reference_110kv(7)).unwrap();
        let bare = build_state_space(&sec, None).unwrap();
        let zero = build_state_space(&sec, Some(&LoadSpec::new(4, 0.0))).unwrap();
        assert_eq!(bare.a(), zero.a());
        assert_eq!(bare.b(), zero.b());
    }

    #[test]
    fn reference_trace() {
        let sec = section_params(&LineParams::reference_110kv(60)).unwrap();
        let m = build_state_space(&sec, None).unwrap();
        assert_eq!(m.dim(), 121);
        let trace = m.a().trace();
        let independent =
            -61.0 * sec.resistance / sec.inductance - 60.0 * sec.conductance / sec.capacitance;
        assert!((trace - independent).abs() < 1e-9);
        assert!((trace + 2440.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_positions() {
        let sec = unit_sections(4);
        for z in [0, 5] {
            let err = build_state_space(&sec, Some(&LoadSpec::new(z, 1.0))).unwrap_err();
            assert!(matches!(err, Error::PositionOutOfRange { .. }));
        }
        let err = build_state_space(&sec, Some(&LoadSpec::new(2, -1.0))).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
    }

    #[test]
    fn labels_alternate() {
        assert_eq!(state_labels(2), ["i_1", "v_1", "i_2", "v_2", "i_3"]);
    }

    #[test]
    fn load_spec_parses_from_json() {
        let load: LoadSpec = serde_json::from_str(r#"{"z": 3, "g_load": 0.01}"#).unwrap();
        assert_eq!(load.index_j(), 5);
        assert!(serde_json::from_str::<LoadSpec>(r#"{"z": 3, "g": 0.01}"#).is_err());
    }

    #[test]
    fn line_config_round_trip_and_validation() {
        let text = r#"{"r_per_km": 0.02, "l_per_km": 5e-4, "c_per_km": 4e-7,
            "g_per_km": 0.0, "length_km": 100, "n_sections": 60,
            "load": {"z": 30, "g_load": 0.01}}"#;
        let cfg = LineConfig::from_json(text).unwrap();
        assert_eq!(cfg.line(), LineParams::reference_110kv(60));
        assert_eq!(cfg.load, Some(LoadSpec::new(30, 0.01)));

        let out_of_range = text.replace("\"z\": 30", "\"z\": 61");
        assert!(matches!(
            LineConfig::from_json(&out_of_range),
            Err(Error::PositionOutOfRange { .. })
        ));
        let unknown = text.replace("\"length_km\"", "\"extra\": 1, \"length_km\"");
        assert!(matches!(
            LineConfig::from_json(&unknown),
            Err(Error::Json(_))
        ));
    }
}
