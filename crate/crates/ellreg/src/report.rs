//! Machine-readable report schema shared by every CLI command.
//!
//! Field names are stable; identical invocations produce byte-identical JSON
//! except for the `timing_ms` field.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub command: String,
    pub tau: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<StepReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<SeriesLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<Vec<ConstantLine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_hint: i32,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepReport {
    pub var: u32,
    pub result: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleReport {
    pub value: [f64; 2],
    pub per_eps: Vec<PerEps>,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerEps {
    pub eps: f64,
    pub value: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub got: [f64; 2],
    pub want: [f64; 2],
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesLine {
    pub exponent: i64,
    pub coeff: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstantLine {
    pub name: String,
    pub value: [f64; 2],
}

pub fn c2a(z: num_complex::Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Plain-text rendering `re+imi` of a complex number.
pub fn fmt_complex(z: num_complex::Complex64) -> String {
    if z.im >= 0.0 || z.im.is_nan() {
        format!("{}+{}i", z.re, z.im)
    } else {
        format!("{}-{}i", z.re, -z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trips() {
        let r = Report {
            command: "integrate".into(),
            tau: [0.0, 2.0],
            expr: Some("wp(1-2)".into()),
            value: Some([-1.7, 0.0]),
            steps: Some(vec![StepReport {
                var: 1,
                result: "-eta1h".into(),
            }]),
            oracle: None,
            checks: None,
            series: None,
            constants: None,
            error: None,
            exit_hint: 0,
            timing_ms: 1.25,
        };
        let s = serde_json::to_string(&r).unwrap();
        let back: Report = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn complex_formatting() {
        use num_complex::Complex64;
        assert_eq!(fmt_complex(Complex64::new(1.5, -0.25)), "1.5-0.25i");
        assert_eq!(fmt_complex(Complex64::new(-2.0, 3.0)), "-2+3i");
    }
}
