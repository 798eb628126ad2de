//! JSON views of results. Non-finite numbers are written as the strings
//! `"inf"`, `"-inf"` and `"nan"` because JSON has no literal for them.

use fpcrel_core::multiplicity::{Method, MultiTestResult};
use fpcrel_core::selfnorm::{Side, TestKind, TestResult, Warning};
use serde::{Serialize, Serializer};

pub const FORMAT_VERSION: u32 = 1;

pub fn number<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn describe(w: &Warning) -> String {
    let side = |s: &Side| match s {
        Side::X => "X",
        Side::Y => "Y",
    };
    match w {
        Warning::Uncentered { side: s } => format!("sample {} is not centered", side(s)),
        Warning::IllSeparated { side: s, lambda } => {
            format!("sample {}: eigenvalue of this order is not separated at lambda = {lambda:.2}", side(s))
        }
        Warning::RankDeficientPartial { side: s, lambda } => {
            format!("sample {}: fewer curves than the order at lambda = {lambda:.2}", side(s))
        }
        Warning::DegenerateNormalizer => "degenerate normalizer (V = 0)".into(),
        Warning::UnreliableLongRunVariance => "diagnostic only: the long-run variance estimate is unreliable".into(),
        Warning::DegenerateLongRunVariance => "long-run variance estimate is zero; no decision".into(),
    }
}

fn kind_name(k: TestKind) -> &'static str {
    match k {
        TestKind::Eigenfunction => "eigenfunction",
        TestKind::Eigenvalue => "eigenvalue",
        TestKind::LongRunVariancePlugin => "plugin",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestView {
    pub statistic: &'static str,
    pub order: usize,
    #[serde(serialize_with = "number")]
    pub d_hat: f64,
    #[serde(serialize_with = "number")]
    pub v_hat: f64,
    #[serde(serialize_with = "number")]
    pub w_hat: f64,
    #[serde(serialize_with = "number")]
    pub critical_value: f64,
    #[serde(serialize_with = "number")]
    pub p_value: f64,
    pub reject: bool,
    pub delta: f64,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl From<&TestResult> for TestView {
    fn from(r: &TestResult) -> Self {
        TestView {
            statistic: kind_name(r.kind),
            order: r.order,
            d_hat: r.d_hat,
            v_hat: r.v_hat,
            w_hat: r.w_hat,
            critical_value: r.critical_value,
            p_value: r.p_value,
            reject: r.reject,
            delta: r.delta,
            alpha: r.alpha,
            m: r.m,
            n: r.n,
            warnings: r.warnings.iter().map(describe).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyView {
    pub method: &'static str,
    pub alpha: f64,
    pub reject: Vec<bool>,
    pub global_reject: bool,
}

impl From<&MultiTestResult> for FamilyView {
    fn from(r: &MultiTestResult) -> Self {
        FamilyView {
            method: match r.method {
                Method::Bonferroni => "bonferroni",
                Method::Holm => "holm",
            },
            alpha: r.alpha,
            reject: r.reject.clone(),
            global_reject: r.global_reject,
        }
    }
}

/// Provenance of the null table used for a decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullView {
    pub lower: f64,
    pub points: usize,
    pub path_steps: usize,
    pub replicates: usize,
    pub seed: u64,
    pub cache: &'static str,
}
