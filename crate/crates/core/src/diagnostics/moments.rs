//! Monte Carlo estimates of `E sup_{t ≤ T} |u(t)|^p`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Result, ZkError};
use crate::integrator::{Forcing, SamplePath};
use crate::stats::Welford;

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub p: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl MomentReport {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(ZkError::validation(format!("moment exponent p = {p} must be positive")));
    }
    Ok(())
}

fn report(p: f64, w: &Welford) -> MomentReport {
    let se = w.std_err();
    MomentReport {
        p,
        estimate: w.mean(),
        std_err: se,
        ci_low: (w.mean() - Z95 * se).max(0.0),
        ci_high: w.mean() + Z95 * se,
        samples: w.count() as usize,
    }
}

/// `E sup |u|^p` over each whole path.
pub fn moment_estimate(paths: &[SamplePath], p: f64) -> Result<MomentReport> {
    check_p(p)?;
    if paths.is_empty() {
        return Err(ZkError::validation("moment estimate needs a nonempty ensemble"));
    }
    let w: Welford = paths
        .iter()
        .map(|path| libm::pow(path.l2_norms().iter().fold(0.0f64, |a, &n| a.max(n)), p))
        .collect();
    Ok(report(p, &w))
}

/// `E sup_{s ≤ t} |u(s)|^p` at every recorded time, from per-path norm series
/// sampled on a common time grid.
pub fn running_moments(norms: &[Vec<f64>], p: f64) -> Result<Vec<MomentReport>> {
    check_p(p)?;
    let first = norms
        .first()
        .ok_or_else(|| ZkError::validation("moment estimate needs a nonempty ensemble"))?;
    let len = first.len();
    if norms.iter().any(|n| n.len() != len) {
        return Err(ZkError::validation("norm series have different lengths"));
    }
    let mut acc = alloc::vec![Welford::new(); len];
    for series in norms {
        let mut sup = 0.0f64;
        for (a, &n) in acc.iter_mut().zip(series) {
            sup = sup.max(n);
            a.push(libm::pow(sup, p));
        }
    }
    Ok(acc.iter().map(|w| report(p, w)).collect())
}

/// Functional form `exp(c′ t) (E|u₀|^p + ∫₀ᵗ |f|^p + c′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBound {
    pub p: f64,
    pub initial_moment: f64,
    /// `∫₀ᵗ |f|^p` at each time of the grid.
    pub forcing_integral: Vec<f64>,
    pub times: Vec<f64>,
}

impl MomentBound {
    pub fn new(p: f64, initial_moment: f64, forcing: &Forcing, n: usize, times: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut forcing_integral = Vec::with_capacity(times.len());
        let norm_p = |t: f64| {
            let f = forcing.at(t, n);
            libm::pow(libm::sqrt(f.iter().map(|v| v * v).sum()), p)
        };
        for (i, &t) in times.iter().enumerate() {
            if i > 0 {
                let s = times[i - 1];
                acc += 0.5 * (t - s) * (norm_p(s) + norm_p(t));
            }
            forcing_integral.push(acc);
        }
        MomentBound {
            p,
            initial_moment,
            forcing_integral,
            times: times.to_vec(),
        }
    }

    pub fn value(&self, c: f64, i: usize) -> f64 {
        libm::exp(c * self.times[i]) * (self.initial_moment + self.forcing_integral[i] + c)
    }

    /// Smallest `c′ ≥ 0` with `estimates[i] ≤ bound(c′, i)` for all i.
    pub fn fit(&self, estimates: &[f64]) -> f64 {
        let ok = |c: f64| estimates.iter().enumerate().all(|(i, &e)| e <= self.value(c, i));
        if ok(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while !ok(hi) {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Outcome of fitting `c′` on a pilot ensemble and checking it on an
/// independent one.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundCheck {
    pub fitted_c: f64,
    /// Largest `(estimate − 2 SE) / bound` over the validation grid.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Fit on `pilot`, then require `estimate − 2·SE ≤ bound` on `validation`.
pub fn check_moment_bound(
    bound: &MomentBound,
    pilot: &[MomentReport],
    validation: &[MomentReport],
) -> Result<MomentBoundCheck> {
    if pilot.len() != bound.times.len() || validation.len() != bound.times.len() {
        return Err(ZkError::validation("moment series and bound grid differ in length"));
    }
    let est: Vec<f64> = pilot.iter().map(|r| r.estimate).collect();
    let c = bound.fit(&est);
    let worst_ratio = validation
        .iter()
        .enumerate()
        .map(|(i, r)| (r.estimate - 2.0 * r.std_err) / bound.value(c, i))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MomentBoundCheck {
        fitted_c: c,
        worst_ratio,
        pass: c.is_finite() && worst_ratio <= 1.0,
    })
}
