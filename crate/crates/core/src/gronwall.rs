//! Deterministic and stochastic Gronwall bounds over sampled processes.
//!
//! The stochastic variant follows the partition argument: stopping times
//! `τ_1 < … < τ_N = τ` are chosen greedily so that `∫ M < 1/(2C₀)` on every
//! cell, which caps `N` at `⌈2C₀κ + 1⌉` with `κ = ∫₀^τ M`.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, ZkError};

fn check_grid(times: &[f64], series: &[&[f64]]) -> Result<()> {
    if series.iter().any(|s| s.len() != times.len()) {
        return Err(ZkError::validation("sampled series do not share the time grid"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ZkError::validation("times must be strictly increasing"));
    }
    Ok(())
}

/// Cumulative trapezoidal integral, starting at 0.
fn cumulative(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (f[i] + f[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// `t ↦ (u(0) + ∫₀ᵗ b) exp(∫₀ᵗ a)` on the sample grid.
pub fn deterministic_gronwall(times: &[f64], u0: f64, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_grid(times, &[a, b])?;
    let ia = cumulative(times, a);
    let ib = cumulative(times, b);
    Ok(ia.iter().zip(&ib).map(|(x, y)| (u0 + y) * libm::exp(*x)).collect())
}

/// Greedy partition of `[0, τ]` by the mass of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTimes {
    /// `τ_1 < … < τ_N`, the last one equal to the final grid time.
    pub times: Vec<f64>,
    pub indices: Vec<usize>,
    pub n: usize,
    pub kappa: f64,
    /// `⌈2C₀κ + 1⌉`.
    pub n_bound: usize,
    /// Mass of `M` on each cell `[τ_{j−1}, τ_j]`.
    pub cell_masses: Vec<f64>,
}

/// `τ_j` is the first grid time at which `∫_{τ_{j−1}} M ≥ 1/(2C₀)`, capped at
/// the last grid time.
///
/// # Panics
///
/// If the count exceeds `⌈2C₀κ + 1⌉`, which the construction rules out.
pub fn build_stopping_times(times: &[f64], m: &[f64], c0: f64) -> Result<StoppingTimes> {
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(ZkError::validation(format!("C0 = {c0} must be positive")));
    }
    check_grid(times, &[m])?;
    if times.is_empty() {
        return Err(ZkError::validation("empty time grid"));
    }
    if m.iter().any(|v| !(*v >= 0.0)) {
        return Err(ZkError::validation("M must be nonnegative"));
    }
    let threshold = 1.0 / (2.0 * c0);
    let last = times.len() - 1;
    let mut indices = Vec::new();
    let mut cell_masses = Vec::new();
    let mut acc = 0.0;
    for i in 1..=last {
        acc += 0.5 * (times[i] - times[i - 1]) * (m[i] + m[i - 1]);
        if acc >= threshold || i == last {
            indices.push(i);
            cell_masses.push(acc);
            acc = 0.0;
        }
    }
    if indices.is_empty() {
        indices.push(last);
        cell_masses.push(0.0);
    }
    let kappa: f64 = cell_masses.iter().sum();
    let n = indices.len();
    let n_bound = libm::ceil(2.0 * c0 * kappa + 1.0) as usize;
    assert!(n <= n_bound, "stopping-time count {n} exceeds ⌈2C₀κ + 1⌉ = {n_bound}");
    Ok(StoppingTimes {
        times: indices.iter().map(|&i| times[i]).collect(),
        indices,
        n,
        kappa,
        n_bound,
        cell_masses,
    })
}

/// Nonnegative processes `X, Y, Z, M` on a shared grid ending at `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProcess {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub m: Vec<f64>,
}

impl PathProcess {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.times, &[&self.x, &self.y, &self.z, &self.m])?;
        if self.times.is_empty() {
            return Err(ZkError::validation("empty process"));
        }
        for (name, s) in [("X", &self.x), ("Y", &self.y), ("Z", &self.z), ("M", &self.m)] {
            if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(ZkError::validation(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallVariant {
    /// Hypothesis over all windows `[τ_a, τ_b]`.
    Full,
    /// `X(0) = 0`, `Z = 0`, hypothesis only for `τ_a = 0`.
    Weakened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub variant: GronwallVariant,
    pub c0: f64,
    /// Largest observed `∫₀^τ M`.
    pub kappa: f64,
    /// Stopping times of the member with the most cells.
    pub stopping_times: Vec<f64>,
    pub n: usize,
    pub n_bound: usize,
    pub windows: usize,
    pub violations: usize,
    pub hypothesis_ok: bool,
    pub conclusion_lhs: f64,
    pub conclusion_rhs: f64,
    /// Constant `C` of the conclusion (zero for the weakened variant).
    pub constant: f64,
    pub pass: bool,
}

/// Share of violated windows above which the hypothesis is declared failed.
pub const HYPOTHESIS_FAILURE_SHARE: f64 = 0.05;
const RANDOM_WINDOWS: usize = 256;
const WINDOW_SEED: u64 = 0x005e_ed0f_9a11;

/// Index pairs `(a, b)`, `a ≤ b`, standing in for stopping-time pairs.
fn windows(len: usize, variant: GronwallVariant) -> Vec<(usize, usize)> {
    let last = len - 1;
    if variant == GronwallVariant::Weakened {
        return (0..=last).map(|b| (0, b)).collect();
    }
    let mut out = Vec::new();
    let mut step = 1;
    while step <= last {
        let mut a = 0;
        while a + step <= last {
            out.push((a, a + step));
            a += step;
        }
        out.push((0, step));
        step *= 2;
    }
    out.push((0, last));
    let mut rng = ChaCha8Rng::seed_from_u64(WINDOW_SEED);
    for _ in 0..RANDOM_WINDOWS {
        let i = (rng.next_u64() % len as u64) as usize;
        let j = (rng.next_u64() % len as u64) as usize;
        out.push((i.min(j), i.max(j)));
    }
    out
}

/// Check the window hypothesis on ensemble means, then evaluate the conclusion.
pub fn verify_stochastic_gronwall(
    ensemble: &[PathProcess],
    c0: f64,
    variant: GronwallVariant,
) -> Result<GronwallReport> {
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(ZkError::validation(format!("C0 = {c0} must be positive")));
    }
    let first = ensemble
        .first()
        .ok_or_else(|| ZkError::validation("Gronwall check needs a nonempty ensemble"))?;
    for p in ensemble {
        p.validate()?;
        if p.times != first.times {
            return Err(ZkError::validation("ensemble members must share the time grid"));
        }
        if variant == GronwallVariant::Weakened && (p.x[0] != 0.0 || p.z.iter().any(|&v| v != 0.0)) {
            return Err(ZkError::validation("weakened variant requires X(0) = 0 and Z = 0"));
        }
    }
    let times = &first.times;
    let len = times.len();
    let count = ensemble.len() as f64;

    struct Cum {
        y: Vec<f64>,
        mx_z: Vec<f64>,
        z: Vec<f64>,
    }
    let cums: Vec<Cum> = ensemble
        .iter()
        .map(|p| {
            let mx_z: Vec<f64> = p.m.iter().zip(&p.x).zip(&p.z).map(|((m, x), z)| m * x + z).collect();
            Cum {
                y: cumulative(times, &p.y),
                mx_z: cumulative(times, &mx_z),
                z: cumulative(times, &p.z),
            }
        })
        .collect();

    let wins = windows(len, variant);
    let mut violations = 0;
    for &(a, b) in &wins {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (p, c) in ensemble.iter().zip(&cums) {
            let sup = p.x[a..=b].iter().fold(0.0f64, |s, &v| s.max(v));
            lhs += sup + (c.y[b] - c.y[a]);
            rhs += p.x[a] + (c.mx_z[b] - c.mx_z[a]);
        }
        lhs /= count;
        rhs *= c0 / count;
        if lhs > rhs + 1e-12 * (lhs + rhs) {
            violations += 1;
        }
    }
    let hypothesis_ok = (violations as f64) <= HYPOTHESIS_FAILURE_SHARE * wins.len() as f64;

    let mut best: Option<StoppingTimes> = None;
    let mut kappa = 0.0f64;
    for p in ensemble {
        let st = build_stopping_times(times, &p.m, c0)?;
        kappa = kappa.max(st.kappa);
        if best.as_ref().is_none_or(|b| st.n > b.n) {
            best = Some(st);
        }
    }
    let best = best.expect("nonempty ensemble");
    let n_bound = libm::ceil(2.0 * c0 * kappa + 1.0) as usize;

    let last = len - 1;
    let mut lhs = 0.0;
    let mut data = 0.0;
    let mut scale = 1.0;
    for (p, c) in ensemble.iter().zip(&cums) {
        lhs += p.x.iter().fold(0.0f64, |s, &v| s.max(v)) + c.y[last];
        data += p.x[0] + c.z[last];
        scale += cumulative(times, &p.m)[last] / count;
    }
    lhs /= count;
    data /= count;
    let (constant, rhs, conclusion_ok) = match variant {
        GronwallVariant::Full => {
            let q = (2.0 * c0).max(1.0);
            let c = n_bound as f64 * libm::pow(q, n_bound as f64);
            (c, c * data, lhs <= c * data * (1.0 + 1e-12))
        }
        GronwallVariant::Weakened => (0.0, 0.0, lhs <= 1e-8 * scale),
    };
    Ok(GronwallReport {
        variant,
        c0,
        kappa,
        stopping_times: best.times,
        n: best.n,
        n_bound,
        windows: wins.len(),
        violations,
        hypothesis_ok,
        conclusion_lhs: lhs,
        conclusion_rhs: rhs,
        constant,
        pass: hypothesis_ok && conclusion_ok,
    })
}
