//! Report payloads, content digests, and the JSON/CSV emitters.
//!
//! Reports are deterministic for fixed input and flags: the payload carries
//! no timestamps, maps are ordered, and floats go through serde_json's
//! round-trip encoding. Wall time lives outside the payload so byte
//! comparison of payloads is meaningful. CSV cells print 17 significant
//! digits, enough to round-trip an f64 exactly.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::extension::ValidationReport;
use crate::schatten::{DiscreteSpectrumReport, MembershipVerdict, SingularValueSeries};
use crate::spectrum::SpectrumSlice;

#[derive(Debug, Clone, Serialize)]
pub struct RecordOut {
    pub block: usize,
    pub m: usize,
    pub k: i64,
    pub re: f64,
    pub im: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumOut {
    pub k_max: u32,
    pub m_max: usize,
    pub complete_modes: bool,
    pub block_lengths: Vec<f64>,
    pub records: Vec<RecordOut>,
}

pub fn spectrum_payload(slice: &SpectrumSlice) -> SpectrumOut {
    SpectrumOut {
        k_max: slice.k_max,
        m_max: slice.m_max,
        complete_modes: slice.complete_modes,
        block_lengths: slice.block_lengths.clone(),
        records: slice
            .records
            .iter()
            .map(|r| RecordOut {
                block: r.block_index,
                m: r.mode_index,
                k: r.fourier_index,
                re: r.lambda.re,
                im: r.lambda.im,
                delta: r.delta,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesOut {
    pub p: f64,
    pub partial_sum: f64,
    /// Serialized as `null` when infinite (p ≤ 1).
    pub tail_bound: Option<f64>,
    pub total_upper: Option<f64>,
    pub mode_tail_note: bool,
    pub mu: Vec<f64>,
}

pub fn series_payload(series: &SingularValueSeries) -> SeriesOut {
    let finite = |x: f64| x.is_finite().then_some(x);
    SeriesOut {
        p: series.p,
        partial_sum: series.partial_sum,
        tail_bound: finite(series.tail_bound),
        total_upper: finite(series.partial_sum + series.tail_bound),
        mode_tail_note: series.mode_tail_note,
        mu: series.mu.clone(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockValidationOut {
    pub block: usize,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOut {
    pub name: String,
    pub pass: bool,
    /// Measured value the check compares.
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOut {
    pub checks: Vec<CheckOut>,
    pub max_set_distance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Validate {
        blocks: Vec<BlockValidationOut>,
        all_valid: bool,
    },
    Spectrum {
        spectrum: SpectrumOut,
    },
    Schatten {
        series: SeriesOut,
        membership: MembershipVerdict,
        resolvent: Option<DiscreteSpectrumReport>,
    },
    Verify {
        verify: VerifyOut,
    },
    Bundle {
        blocks: Vec<BlockValidationOut>,
        spectrum: SpectrumOut,
        series: SeriesOut,
        membership: MembershipVerdict,
        resolvent: Option<DiscreteSpectrumReport>,
        verify: VerifyOut,
    },
}

/// The full report written by the CLI. Everything except `wall_time_ms` is
/// deterministic for fixed input and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub instance_digest: String,
    pub tool_version: String,
    pub payload: Payload,
    pub wall_time_ms: f64,
}

impl Report {
    /// JSON of the deterministic part (drops wall time).
    pub fn payload_json(&self) -> String {
        #[derive(Serialize)]
        struct Stable<'a> {
            command: &'a str,
            instance_digest: &'a str,
            tool_version: &'a str,
            payload: &'a Payload,
        }
        serde_json::to_string_pretty(&Stable {
            command: &self.command,
            instance_digest: &self.instance_digest,
            tool_version: &self.tool_version,
            payload: &self.payload,
        })
        .expect("report payloads always serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Hex SHA-256 of the canonical instance serialization.
pub fn instance_digest(canonical_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_json.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with columns `block,m,k,re,im,delta`, one row per record.
pub fn spectrum_csv(out: &SpectrumOut) -> String {
    let mut s = String::from("block,m,k,re,im,delta\n");
    for r in &out.records {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.block,
            r.m,
            r.k,
            sig17(r.re),
            sig17(r.im),
            sig17(r.delta)
        ));
    }
    s
}

/// CSV with columns `q,mu`, one row per singular value (descending).
pub fn series_csv(out: &SeriesOut) -> String {
    let mut s = String::from("q,mu\n");
    for (q, mu) in out.mu.iter().enumerate() {
        s.push_str(&format!("{},{}\n", q + 1, sig17(*mu)));
    }
    s
}

/// CSV with columns `name,pass,value,threshold`.
pub fn checks_csv(checks: &[CheckOut]) -> String {
    let mut s = String::from("name,pass,value,threshold\n");
    for c in checks {
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            c.pass,
            sig17(c.value),
            sig17(c.threshold)
        ));
    }
    s
}

/// CSV with columns `block,hermitian_defect,positivity_margin,unitarity_defect,commutation_defect,valid`.
pub fn validation_csv(blocks: &[BlockValidationOut]) -> String {
    let mut s = String::from(
        "block,hermitian_defect,positivity_margin,unitarity_defect,commutation_defect,valid\n",
    );
    for b in blocks {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.block,
            sig17(b.report.hermitian_defect),
            sig17(b.report.positivity_margin),
            sig17(b.report.unitarity_defect),
            sig17(b.report.commutation_defect),
            b.report.is_valid(),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_hexadecimal() {
        let d = instance_digest("{}");
        assert_eq!(d.len(), 64);
        assert_eq!(d, instance_digest("{}"));
        assert_ne!(d, instance_digest("{} "));
    }

    #[test]
    fn csv_prints_17_significant_digits() {
        let s = sig17(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn payload_json_excludes_wall_time() {
        let report = Report {
            command: "spectrum".into(),
            instance_digest: "00".into(),
            tool_version: "0".into(),
            payload: Payload::Spectrum {
                spectrum: SpectrumOut {
                    k_max: 0,
                    m_max: 1,
                    complete_modes: true,
                    block_lengths: vec![1.0],
                    records: vec![],
                },
            },
            wall_time_ms: 12.5,
        };
        assert!(!report.payload_json().contains("wall_time"));
        assert!(report.to_json().contains("wall_time_ms"));
    }
}
