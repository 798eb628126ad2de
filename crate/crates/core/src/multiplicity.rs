//! Family-wise error control across several eigen orders.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bonferroni,
    Holm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTestResult {
    pub method: Method,
    pub alpha: f64,
    pub p_values: Vec<f64>,
    pub reject: Vec<bool>,
    pub global_reject: bool,
}

fn validate(p_values: &[f64], alpha: f64) -> Result<()> {
    if p_values.is_empty() {
        return Err(Error::invalid("no p-values given"));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("level {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn finish(method: Method, alpha: f64, p_values: &[f64], reject: Vec<bool>) -> MultiTestResult {
    let global_reject = reject.iter().any(|&r| r);
    MultiTestResult { method, alpha, p_values: p_values.to_vec(), reject, global_reject }
}

/// Rejects order `k` when `p_k < α/p`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<MultiTestResult> {
    validate(p_values, alpha)?;
    let cut = alpha / p_values.len() as f64;
    let reject = p_values.iter().map(|&p| p < cut).collect();
    Ok(finish(Method::Bonferroni, alpha, p_values, reject))
}

/// Holm's step-down procedure; ties are ordered by position.
pub fn holm(p_values: &[f64], alpha: f64) -> Result<MultiTestResult> {
    validate(p_values, alpha)?;
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut reject = vec![false; n];
    for (k, &idx) in order.iter().enumerate() {
        if p_values[idx] < alpha / (n - k) as f64 {
            reject[idx] = true;
        } else {
            break;
        }
    }
    Ok(finish(Method::Holm, alpha, p_values, reject))
}

pub fn adjust(method: Method, p_values: &[f64], alpha: f64) -> Result<MultiTestResult> {
    match method {
        Method::Bonferroni => bonferroni(p_values, alpha),
        Method::Holm => holm(p_values, alpha),
    }
}
