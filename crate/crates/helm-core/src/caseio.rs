//! JSON case files and solver reports.
//!
//! Case schema (all quantities per-unit, angles in degrees in files):
//!
//! ```json
//! {
//!   "base_mva": 100.0,
//!   "buses": [
//!     {"id": 1, "type": "swing", "v": [1.0, 0.0]},
//!     {"id": 2, "type": "pq", "p": -0.5, "q": -0.4, "gsh": 0.0, "bsh": 0.0},
//!     {"id": 3, "type": "pv", "p": 0.3, "vsp": 1.02}
//!   ],
//!   "branches": [
//!     {"from": 1, "to": 2, "r": 0.0, "x": 1.0, "b": 0.0, "tap": 1.0, "shift_deg": 0.0}
//!   ]
//! }
//! ```
//!
//! Omitted `tap`, `shift_deg`, `b`, `gsh`, `bsh`, `p`, `q` default to their
//! neutral values (`tap = 1`, everything else `0`).
//!
//! Reports are emitted with a stable key order and reals printed with 17
//! significant digits, so identical solves produce byte-identical output and
//! every numeric field round-trips bit-exactly.

use num_complex::Complex;
use serde::Deserialize;
use thiserror::Error;

use crate::network::{BranchSpec, BusSpec, Network, NetworkError};
use crate::scalar::Scalar;
use crate::series::{EmbeddingKind, GermSeries};
use crate::solver::{SolveReport, SolveStatus};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bus {id}: swing bus requires a complex voltage \"v\"")]
    MissingSwingVoltage { id: u32 },
    #[error("bus {id}: PV bus requires a voltage setpoint \"vsp\"")]
    MissingSetpoint { id: u32 },
    #[error("bus {id}: unknown bus type \"{kind}\"")]
    UnknownBusType { id: u32, kind: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Raw case document, mirroring the file schema before validation.
#[derive(Debug, Clone, Deserialize)]
pub struct CaseDocument {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BusRecord {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: String,
    pub v: Option<[f64; 2]>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub vsp: Option<f64>,
    #[serde(default)]
    pub gsh: f64,
    #[serde(default)]
    pub bsh: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BranchRecord {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_tap")]
    pub tap: f64,
    #[serde(default)]
    pub shift_deg: f64,
}

fn default_tap() -> f64 {
    1.0
}

impl CaseDocument {
    /// Validate the document into a solvable network.
    pub fn to_network<T: Scalar>(&self) -> Result<Network<T>, CaseError> {
        let mut buses = Vec::with_capacity(self.buses.len());
        for rec in &self.buses {
            let bus = match rec.kind.as_str() {
                "swing" => {
                    let v = rec.v.ok_or(CaseError::MissingSwingVoltage { id: rec.id })?;
                    BusSpec::swing(rec.id, Complex::new(T::fr(v[0]), T::fr(v[1])))
                }
                "pq" => BusSpec::pq(
                    rec.id,
                    T::fr(rec.p.unwrap_or(0.0)),
                    T::fr(rec.q.unwrap_or(0.0)),
                ),
                "pv" => {
                    let vsp = rec.vsp.ok_or(CaseError::MissingSetpoint { id: rec.id })?;
                    BusSpec::pv(rec.id, T::fr(rec.p.unwrap_or(0.0)), T::fr(vsp))
                }
                other => {
                    return Err(CaseError::UnknownBusType { id: rec.id, kind: other.to_string() })
                }
            };
            buses.push(bus.with_shunt(T::fr(rec.gsh), T::fr(rec.bsh)));
        }
        let branches = self
            .branches
            .iter()
            .map(|b| BranchSpec {
                from: b.from,
                to: b.to,
                r: T::fr(b.r),
                x: T::fr(b.x),
                b: T::fr(b.b),
                tap: T::fr(b.tap),
                shift_deg: T::fr(b.shift_deg),
            })
            .collect();
        Ok(Network::new(buses, branches)?)
    }
}

/// Parse a case file into a validated network.
pub fn parse_case<T: Scalar>(text: &str) -> Result<Network<T>, CaseError> {
    let doc: CaseDocument = serde_json::from_str(text)?;
    doc.to_network()
}

fn real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x)
}

fn pair<T: Scalar>(z: Complex<T>) -> String {
    format!("[{},{}]", real(z.re), real(z.im))
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::NoSolution => "no_solution",
        SolveStatus::OrderBudgetExhausted => "order_budget_exhausted",
    }
}

fn embedding_str(embedding: EmbeddingKind) -> &'static str {
    match embedding {
        EmbeddingKind::Minimal => "minimal",
        EmbeddingKind::Canonical => "canonical",
    }
}

/// Serialize a solve report deterministically: stable key order, 17
/// significant digits, voltages in rectangular and polar (degrees) form.
pub fn write_report<T: Scalar>(report: &SolveReport<T>) -> String {
    let mut s = String::with_capacity(1024);
    s.push_str("{\n");
    s.push_str(&format!("  \"status\": \"{}\",\n", status_str(report.status)));
    s.push_str(&format!("  \"embedding\": \"{}\",\n", embedding_str(report.embedding)));
    s.push_str(&format!("  \"order_used\": {},\n", report.order_used));
    s.push_str(&format!("  \"mismatch_norm\": {},\n", real(report.mismatch_norm)));

    s.push_str("  \"buses\": [\n");
    for (k, (&id, &v)) in report.bus_ids.iter().zip(report.v.iter()).enumerate() {
        s.push_str(&format!(
            "    {{\"id\": {}, \"v_re\": {}, \"v_im\": {}, \"v_mag\": {}, \"v_deg\": {}}}{}\n",
            id,
            real(v.re),
            real(v.im),
            real(v.norm()),
            real(v.arg().to_degrees()),
            if k + 1 < report.bus_ids.len() { "," } else { "" }
        ));
    }
    s.push_str("  ],\n");

    s.push_str("  \"pv\": [\n");
    for (k, (&id, &q)) in report.pv_bus_ids.iter().zip(report.q_pv.iter()).enumerate() {
        s.push_str(&format!(
            "    {{\"id\": {}, \"q\": {}}}{}\n",
            id,
            real(q),
            if k + 1 < report.pv_bus_ids.len() { "," } else { "" }
        ));
    }
    s.push_str("  ],\n");

    s.push_str("  \"pade\": {\n");
    for (section, list, last) in [
        ("buses", &report.bus_pade, false),
        ("q", &report.q_pade, true),
    ] {
        s.push_str(&format!("    \"{section}\": [\n"));
        for (k, d) in list.iter().enumerate() {
            s.push_str(&format!(
                "      {{\"id\": {}, \"status\": \"{}\", \"diagonal_len\": {}, \"final\": {}}}{}\n",
                d.bus_id,
                d.pade.status.as_str(),
                d.pade.values.len(),
                pair(d.pade.final_value),
                if k + 1 < list.len() { "," } else { "" }
            ));
        }
        s.push_str(&format!("    ]{}\n", if last { "" } else { "," }));
    }
    s.push_str("  },\n");

    s.push_str("  \"pole_estimates\": [");
    for (k, p) in report.pole_estimates.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&pair(*p));
    }
    s.push_str("]\n}\n");
    s
}

/// Numeric mirror of a written report, for loss-free round-trip checks.
#[derive(Debug, Deserialize)]
pub struct ParsedReport {
    pub status: String,
    pub embedding: String,
    pub order_used: usize,
    pub mismatch_norm: f64,
    pub buses: Vec<ParsedBusVoltage>,
    pub pv: Vec<ParsedPvInjection>,
    pub pade: ParsedPadeBlock,
    pub pole_estimates: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
pub struct ParsedBusVoltage {
    pub id: u32,
    pub v_re: f64,
    pub v_im: f64,
    pub v_mag: f64,
    pub v_deg: f64,
}

#[derive(Debug, Deserialize)]
pub struct ParsedPvInjection {
    pub id: u32,
    pub q: f64,
}

#[derive(Debug, Deserialize)]
pub struct ParsedPadeBlock {
    pub buses: Vec<ParsedPadeEntry>,
    pub q: Vec<ParsedPadeEntry>,
}

#[derive(Debug, Deserialize)]
pub struct ParsedPadeEntry {
    pub id: u32,
    pub status: String,
    pub diagonal_len: usize,
    pub r#final: [f64; 2],
}

/// Parse a written report back into its numeric mirror.
pub fn parse_report(text: &str) -> Result<ParsedReport, CaseError> {
    Ok(serde_json::from_str(text)?)
}

/// Series dump: voltage coefficients as `[re, im]` pairs, order ascending,
/// plus the real reactive series per PV bus.
pub fn write_series_dump<T: Scalar>(germ: &GermSeries<T>, network: &Network<T>) -> String {
    let mut s = String::with_capacity(1024);
    s.push_str("{\n");
    s.push_str(&format!("  \"embedding\": \"{}\",\n", embedding_str(germ.embedding())));
    s.push_str(&format!("  \"order\": {},\n", germ.order()));
    s.push_str("  \"buses\": [\n");
    let n = network.n();
    for i in 0..n {
        s.push_str(&format!("    {{\"id\": {}, \"coeffs\": [", network.buses()[i].id));
        for (k, c) in germ.voltage_coeffs(i).iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&pair(*c));
        }
        s.push_str(&format!("]}}{}\n", if i + 1 < n { "," } else { "" }));
    }
    s.push_str("  ],\n  \"q\": [\n");
    let npv = germ.pv_positions().len();
    for (slot, &pos) in germ.pv_positions().iter().enumerate() {
        s.push_str(&format!("    {{\"id\": {}, \"coeffs\": [", network.buses()[pos].id));
        for (k, &q) in germ.q_coeffs(slot).iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&real(q));
        }
        s.push_str(&format!("]}}{}\n", if slot + 1 < npv { "," } else { "" }));
    }
    s.push_str("  ]\n}\n");
    s
}

/// Padé diagnostics dump: the full diagonal value sequence and pole
/// estimates per continued series.
pub fn write_pade_dump<T: Scalar>(report: &SolveReport<T>) -> String {
    let mut s = String::with_capacity(1024);
    s.push_str("{\n");
    for (section, list, last) in [
        ("buses", &report.bus_pade, false),
        ("q", &report.q_pade, true),
    ] {
        s.push_str(&format!("  \"{section}\": [\n"));
        for (k, d) in list.iter().enumerate() {
            s.push_str(&format!(
                "    {{\"id\": {}, \"status\": \"{}\", \"values\": [",
                d.bus_id,
                d.pade.status.as_str()
            ));
            for (j, v) in d.pade.values.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&pair(*v));
            }
            s.push_str("], \"pole_estimates\": ");
            match &d.pade.pole_estimates {
                None => s.push_str("null"),
                Some(poles) => {
                    s.push('[');
                    for (j, p) in poles.iter().enumerate() {
                        if j > 0 {
                            s.push(',');
                        }
                        s.push_str(&pair(*p));
                    }
                    s.push(']');
                }
            }
            s.push_str(&format!("}}{}\n", if k + 1 < list.len() { "," } else { "" }));
        }
        s.push_str(&format!("  ]{}\n", if last { "" } else { "," }));
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolveOptions};

    const TWO_BUS: &str = r#"{
        "base_mva": 100.0,
        "buses": [
            {"id": 1, "type": "swing", "v": [1.0, 0.0]},
            {"id": 2, "type": "pq", "p": -0.5, "q": -0.4}
        ],
        "branches": [
            {"from": 1, "to": 2, "r": 0.0, "x": 1.0}
        ]
    }"#;

    #[test]
    fn minimal_two_bus_document_parses() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        assert_eq!(net.n(), 2);
        assert_eq!(net.swing_index(), 0);
        assert_eq!(net.buses()[1].p, -0.5);
        assert_eq!(net.buses()[1].q, -0.4);
    }

    #[test]
    fn defaults_applied_for_omitted_fields() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let br = &net.branches()[0];
        assert_eq!(br.tap, 1.0);
        assert_eq!(br.shift_deg, 0.0);
        assert_eq!(br.b, 0.0);
        assert_eq!(net.buses()[1].gsh, 0.0);
        assert_eq!(net.buses()[1].bsh, 0.0);
    }

    #[test]
    fn multiple_swing_buses_is_a_distinct_error() {
        let text = r#"{
            "base_mva": 100.0,
            "buses": [
                {"id": 1, "type": "swing", "v": [1.0, 0.0]},
                {"id": 2, "type": "swing", "v": [1.0, 0.0]}
            ],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 1.0}]
        }"#;
        let err = parse_case::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("multiple swing buses"), "{err}");
    }

    #[test]
    fn distinct_validation_errors_surface() {
        let bad_json = parse_case::<f64>("{not json");
        assert!(matches!(bad_json, Err(CaseError::Json(_))));

        let dup = r#"{"base_mva": 1.0, "buses": [
            {"id": 1, "type": "swing", "v": [1.0, 0.0]},
            {"id": 1, "type": "pq"}], "branches": []}"#;
        assert!(parse_case::<f64>(dup).unwrap_err().to_string().contains("duplicate bus id"));

        let unknown = r#"{"base_mva": 1.0, "buses": [
            {"id": 1, "type": "swing", "v": [1.0, 0.0]},
            {"id": 2, "type": "pq"}],
            "branches": [{"from": 1, "to": 3, "r": 0.0, "x": 0.5}]}"#;
        assert!(parse_case::<f64>(unknown).unwrap_err().to_string().contains("unknown bus id 3"));

        let zero_z = r#"{"base_mva": 1.0, "buses": [
            {"id": 1, "type": "swing", "v": [1.0, 0.0]},
            {"id": 2, "type": "pq"}],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 0.0}]}"#;
        assert!(parse_case::<f64>(zero_z).unwrap_err().to_string().contains("zero series impedance"));

        let no_vsp = r#"{"base_mva": 1.0, "buses": [
            {"id": 1, "type": "swing", "v": [1.0, 0.0]},
            {"id": 2, "type": "pv", "p": 0.1}],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 0.5}]}"#;
        assert!(matches!(parse_case::<f64>(no_vsp), Err(CaseError::MissingSetpoint { id: 2 })));
    }

    #[test]
    fn converged_report_contains_status_and_round_trips_bit_exactly() {
        let case = r#"{
            "base_mva": 100.0,
            "buses": [
                {"id": 1, "type": "swing", "v": [1.0, 0.0]},
                {"id": 2, "type": "pq", "p": 0.4, "q": 0.5}
            ],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 1.0}]
        }"#;
        let net = parse_case::<f64>(case).unwrap();
        let report = solve(&net, &SolveOptions::default()).unwrap();
        let text = write_report(&report);
        assert!(text.contains("\"status\": \"converged\""));

        let parsed = parse_report(&text).unwrap();
        assert_eq!(parsed.status, "converged");
        assert_eq!(parsed.order_used, report.order_used);
        assert_eq!(parsed.mismatch_norm.to_bits(), report.mismatch_norm.to_bits());
        for (pb, (&id, &v)) in parsed.buses.iter().zip(report.bus_ids.iter().zip(report.v.iter())) {
            assert_eq!(pb.id, id);
            assert_eq!(pb.v_re.to_bits(), v.re.to_bits());
            assert_eq!(pb.v_im.to_bits(), v.im.to_bits());
            assert_eq!(pb.v_mag.to_bits(), v.norm().to_bits());
            assert_eq!(pb.v_deg.to_bits(), v.arg().to_degrees().to_bits());
        }

        // identical solves produce byte-identical reports
        let report2 = solve(&net, &SolveOptions::default()).unwrap();
        assert_eq!(text, write_report(&report2));
    }

    #[test]
    fn infeasible_report_has_no_solution_status_and_diagnostics() {
        let case = r#"{
            "base_mva": 100.0,
            "buses": [
                {"id": 1, "type": "swing", "v": [1.0, 0.0]},
                {"id": 2, "type": "pq", "p": 0.0, "q": -0.3}
            ],
            "branches": [{"from": 1, "to": 2, "r": 0.0, "x": 1.0}]
        }"#;
        let net = parse_case::<f64>(case).unwrap();
        let report = solve(&net, &SolveOptions::default()).unwrap();
        let text = write_report(&report);
        assert!(text.contains("\"status\": \"no_solution\""));
        let parsed = parse_report(&text).unwrap();
        assert!(!parsed.pole_estimates.is_empty());
        for (pp, rp) in parsed.pole_estimates.iter().zip(report.pole_estimates.iter()) {
            assert_eq!(pp[0].to_bits(), rp.re.to_bits());
            assert_eq!(pp[1].to_bits(), rp.im.to_bits());
        }
    }
}
