//! Discrete `W^{α,p}(0, T)` norm of a sampled path.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, ZkError};
use crate::integrator::SamplePath;

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = alloc::vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (times[i] - times[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// `(∫|h|^p dt + ∬ |h(t)−h(s)|^p / |t−s|^{1+αp} dt ds)^{1/p}` for samples of a
/// vector-valued `h`, measured in the Euclidean norm. Trapezoidal weights in
/// both variables; pairs closer than the smallest time step are dropped.
pub fn fractional_norm_samples(times: &[f64], values: &[&[f64]], alpha: f64, p: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ZkError::validation(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(ZkError::validation(format!("p = {p} must be at least 2")));
    }
    if times.len() != values.len() {
        return Err(ZkError::validation("times and values differ in length"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ZkError::validation("times must be strictly increasing"));
    }
    if times.len() < 2 {
        return Ok(0.0);
    }
    let band = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) * (1.0 - 1e-9);
    let w = trapezoid_weights(times);
    let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum());
    let dist = |a: &[f64], b: &[f64]| libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());

    let mut total: f64 = w.iter().zip(values).map(|(wi, v)| wi * libm::pow(norm(v), p)).sum();
    let expo = 1.0 + alpha * p;
    let mut double = 0.0;
    for i in 0..times.len() {
        for j in 0..i {
            let gap = times[i] - times[j];
            if gap < band {
                continue;
            }
            double += w[i] * w[j] * libm::pow(dist(values[i], values[j]), p) / libm::pow(gap, expo);
        }
    }
    total += 2.0 * double;
    Ok(libm::pow(total, 1.0 / p))
}

/// Fractional norm of the coefficient path in L².
pub fn fractional_norm(path: &SamplePath, alpha: f64, p: f64) -> Result<f64> {
    let values: Vec<&[f64]> = path.fields.iter().map(|f| f.coeffs.as_slice()).collect();
    fractional_norm_samples(&path.times, &values, alpha, p)
}

/// Scalar convenience wrapper.
pub fn fractional_norm_scalar(times: &[f64], values: &[f64], alpha: f64, p: f64) -> Result<f64> {
    let v: Vec<&[f64]> = values.iter().map(core::slice::from_ref).collect();
    fractional_norm_samples(times, &v, alpha, p)
}
