//! Parallel Monte Carlo over trajectories and the ε, n, dt sweeps.
//!
//! Trajectory `j` always draws its noise from `NoiseKey(master_seed, j)`, and
//! results are collected in trajectory order before any reduction, so every
//! output is independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;
use zk_core::basis::{ModeIndex, TraceKind};
use zk_core::diagnostics::{running_moments, MomentReport};
use zk_core::integrator::BLOWUP_FACTOR;
use zk_core::{
    CoeffField, GalerkinOperators, ImexStepper, NoiseKey, NoiseModel, SolverConfig, SpectralBasis, Welford,
    WienerIncrement, ZkError,
};

use crate::config::{RunConfig, SweepSpec};
use crate::error::{AppError, Result};
use crate::format::csv_bytes;
use crate::setup::{initial_field, Setup};

/// Share of blown-up trajectories above which an ensemble is failed.
pub const BLOWUP_FAILURE_SHARE: f64 = 0.10;

pub const STATS_COLUMNS: [&str; 6] = ["time", "mean_l2sq", "var_l2sq", "mean_xi1sq", "mean_trace0", "n_blowups"];
pub const MOMENT_COLUMNS: [&str; 7] = ["p", "time", "estimate", "std_err", "ci_low", "ci_high", "samples"];
pub const SWEEP_COLUMNS: [&str; 6] = ["parameter", "value", "mean_distance", "std_err", "n_paths", "n_blowups"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub time: f64,
    pub mean_l2sq: f64,
    pub var_l2sq: f64,
    pub mean_xi1sq: f64,
    pub mean_trace0: f64,
    pub n_blowups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub time: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

/// Per-trajectory series at the recorded times (shorter after a blow-up).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub l2sq: Vec<f64>,
    pub xi1sq: Vec<f64>,
    pub trace0: Vec<f64>,
    pub blowup_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub m: usize,
    pub master_seed: u64,
    pub rows: Vec<StatsRow>,
    /// Running `E sup_{s ≤ t} |u(s)|^p` over trajectories that never blew
    /// up, one series per exponent.
    pub moments: Vec<Vec<MomentReport>>,
    pub times: Vec<f64>,
    pub blowups: Vec<(u64, f64)>,
    pub failed: bool,
}

impl EnsembleStats {
    pub fn stats_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&STATS_COLUMNS, &self.rows)
    }

    pub fn moment_rows(&self) -> Vec<MomentRow> {
        let mut out = Vec::new();
        for series in &self.moments {
            for (r, &time) in series.iter().zip(&self.times) {
                out.push(MomentRow {
                    p: r.p,
                    time,
                    estimate: r.estimate,
                    std_err: r.std_err,
                    ci_low: r.ci_low,
                    ci_high: r.ci_high,
                    samples: r.samples,
                });
            }
        }
        out
    }

    pub fn moments_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&MOMENT_COLUMNS, &self.moment_rows())
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Map `f` over trajectory ids on `workers` threads, keeping id order.
pub fn par_trajectories<T, F>(m: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    pool(workers)?.install(|| (0..m as u64).into_par_iter().map(&f).collect())
}

/// Snapshot times of a run with the given solver settings.
pub fn record_times(cfg: &SolverConfig) -> Vec<f64> {
    let steps = cfg.steps();
    let stride = cfg.record_every.max(1) as u64;
    let mut out: Vec<f64> = (0..=steps)
        .filter(|&s| s % stride == 0 || s == steps)
        .map(|s| s as f64 * cfg.dt)
        .collect();
    out.dedup();
    out
}

fn summarize(basis: &SpectralBasis, fields: &[CoeffField]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut l2 = Vec::with_capacity(fields.len());
    let mut xi = Vec::with_capacity(fields.len());
    let mut tr = Vec::with_capacity(fields.len());
    for f in fields {
        let c = &f.coeffs;
        l2.push(c.iter().map(|v| v * v).sum());
        xi.push(basis.xi1_norm_sq(c));
        tr.push(basis.eval_trace(f, TraceKind::UxAt0)?.norm);
    }
    Ok((l2, xi, tr))
}

pub fn run_trajectory(stepper: &ImexStepper, setup: &Setup, key: NoiseKey) -> Result<TrajectorySummary> {
    let (fields, blowup_time) = match stepper.solve_path(&setup.u0, &setup.model, key) {
        Ok(p) => (p.fields, None),
        Err(f) => match f.error {
            ZkError::BlowUp { time, .. } => (f.partial.fields, Some(time)),
            e => return Err(e.into()),
        },
    };
    let (l2sq, xi1sq, trace0) = summarize(&setup.basis, &fields)?;
    Ok(TrajectorySummary {
        l2sq,
        xi1sq,
        trace0,
        blowup_time,
    })
}

/// `M` trajectories with keys `(master_seed, 0..M)`.
pub fn run_ensemble(setup: &Setup, m: usize, master_seed: u64, workers: usize, moments: &[f64]) -> Result<EnsembleStats> {
    if m == 0 {
        return Err(AppError::Config("ensemble.M must be at least 1".into()));
    }
    let runs = run_summaries(setup, m, master_seed, workers)?;
    aggregate(&runs, record_times(&setup.solver), m, master_seed, moments)
}

/// Trajectory summaries for keys `(master_seed, 0..M)`, in key order.
pub fn run_summaries(setup: &Setup, m: usize, master_seed: u64, workers: usize) -> Result<Vec<TrajectorySummary>> {
    let stepper = ImexStepper::new(&setup.basis, &setup.ops, &setup.solver)?;
    par_trajectories(m, workers, |j| run_trajectory(&stepper, setup, NoiseKey::new(master_seed, j)))
}

/// Sequential reduction of trajectory summaries.
pub fn aggregate(
    runs: &[TrajectorySummary],
    times: Vec<f64>,
    m: usize,
    master_seed: u64,
    moments: &[f64],
) -> Result<EnsembleStats> {
    let mut rows = Vec::with_capacity(times.len());
    for (i, &time) in times.iter().enumerate() {
        let mut l2 = Welford::new();
        let mut xi = Welford::new();
        let mut tr = Welford::new();
        let mut n_blowups = 0;
        for r in runs {
            if i < r.l2sq.len() {
                l2.push(r.l2sq[i]);
                xi.push(r.xi1sq[i]);
                tr.push(r.trace0[i]);
            } else {
                n_blowups += 1;
            }
        }
        rows.push(StatsRow {
            time,
            mean_l2sq: l2.mean(),
            var_l2sq: if l2.count() > 1 { l2.variance() } else { 0.0 },
            mean_xi1sq: xi.mean(),
            mean_trace0: tr.mean(),
            n_blowups,
        });
    }
    let blowups: Vec<(u64, f64)> = runs
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.blowup_time.map(|t| (j as u64, t)))
        .collect();
    let survivors: Vec<Vec<f64>> = runs
        .iter()
        .filter(|r| r.blowup_time.is_none())
        .map(|r| r.l2sq.iter().map(|v| v.sqrt()).collect())
        .collect();
    let moments = if survivors.is_empty() {
        Vec::new()
    } else {
        moments
            .iter()
            .map(|&p| running_moments(&survivors, p))
            .collect::<zk_core::Result<_>>()?
    };
    Ok(EnsembleStats {
        m,
        master_seed,
        rows,
        moments,
        times,
        failed: blowups.len() as f64 > BLOWUP_FAILURE_SHARE * m as f64,
        blowups,
    })
}

/// Convergence table for one sweep. `distances[v][j]` is trajectory `j`'s
/// `L²(0,T; L²)` distance between the run at `values[v]` and the reference
/// run (the last value), NaN after a blow-up.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: String,
    pub values: Vec<f64>,
    pub distances: Vec<Vec<f64>>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub mean_distance: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub n_blowups: usize,
}

impl SweepTable {
    fn new(parameter: &str, values: &[f64], per_traj: Vec<Vec<f64>>) -> Self {
        let distances: Vec<Vec<f64>> = (0..values.len())
            .map(|v| per_traj.iter().map(|d| d[v]).collect())
            .collect();
        let rows = values
            .iter()
            .zip(&distances)
            .map(|(&value, d)| {
                let w: Welford = d.iter().copied().filter(|x| x.is_finite()).collect();
                SweepRow {
                    parameter: parameter.to_string(),
                    value,
                    mean_distance: w.mean(),
                    std_err: if w.count() > 1 { w.std_err() } else { 0.0 },
                    n_paths: w.count() as usize,
                    n_blowups: d.len() - w.count() as usize,
                }
            })
            .collect();
        SweepTable {
            parameter: parameter.to_string(),
            values: values.to_vec(),
            distances,
            rows,
        }
    }

    pub fn csv(tables: &[SweepTable]) -> Result<Vec<u8>> {
        let rows: Vec<&SweepRow> = tables.iter().flat_map(|t| &t.rows).collect();
        csv_bytes(&SWEEP_COLUMNS, &rows)
    }
}

/// Trapezoid `(∫ |a − b|²)^{1/2}` over a shared time grid.
pub fn path_distance(times: &[f64], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let sq: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum())
        .collect();
    let mut s = 0.0;
    for i in 1..times.len().min(sq.len()) {
        s += 0.5 * (times[i] - times[i - 1]) * (sq[i] + sq[i - 1]);
    }
    s.sqrt()
}

fn coeff_series(fields: Vec<CoeffField>) -> Vec<Vec<f64>> {
    fields.into_iter().map(|f| f.coeffs).collect()
}

/// Shared-noise distances of `u^ε` to the run at the last ε (normally 0).
pub fn epsilon_sweep(setup: &Setup, eps_list: &[f64], m: usize, master_seed: u64, workers: usize) -> Result<SweepTable> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(AppError::Config("epsilon sweep values must be nonnegative and decreasing".into()));
    }
    let steppers: Vec<ImexStepper> = eps_list
        .iter()
        .map(|&epsilon| {
            let cfg = SolverConfig {
                epsilon,
                ..setup.solver.clone()
            };
            ImexStepper::new(&setup.basis, &setup.ops, &cfg)
        })
        .collect::<zk_core::Result<_>>()?;
    let times = record_times(&setup.solver);
    let per_traj = par_trajectories(m, workers, |j| {
        let key = NoiseKey::new(master_seed, j);
        let runs: Vec<Option<Vec<Vec<f64>>>> = steppers
            .iter()
            .map(|s| match s.solve_path(&setup.u0, &setup.model, key) {
                Ok(p) => Ok(Some(coeff_series(p.fields))),
                Err(f) if matches!(f.error, ZkError::BlowUp { .. }) => Ok(None),
                Err(f) => Err(AppError::from(f.error)),
            })
            .collect::<Result<_>>()?;
        Ok(distances_to_last(&times, &runs))
    })?;
    Ok(SweepTable::new("epsilon", eps_list, per_traj))
}

fn distances_to_last(times: &[f64], runs: &[Option<Vec<Vec<f64>>>]) -> Vec<f64> {
    let reference = runs.last().and_then(|r| r.as_ref());
    runs.iter()
        .map(|r| match (r, reference) {
            (Some(a), Some(b)) => path_distance(times, a, b),
            _ => f64::NAN,
        })
        .collect()
}

/// Setups at `n_x = n_perp = n` for each `n` that share one initial datum and
/// one set of noise channels. The datum is drawn in the finest basis and
/// restricted to each coarser one; the channels are the lowest modes of the
/// coarsest basis, identified across bases by their tensor indices.
pub fn matched_setups(cfg: &RunConfig, ns: &[usize]) -> Result<Vec<Setup>> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AppError::Config("n values must be increasing".into()));
    }
    let bases: Vec<SpectralBasis> = ns
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.domain.n_x = n;
            c.domain.n_perp = n;
            c.domain.quad_x = None;
            c.domain.quad_perp = None;
            c.resolve();
            SpectralBasis::build(c.domain_config())
        })
        .collect::<zk_core::Result<_>>()?;
    let finest = bases.last().unwrap();
    let coarsest = &bases[0];
    let k = cfg.noise_k().min(coarsest.len());
    let alpha = cfg.noise.alpha.gains(cfg.noise_k())?[..k].to_vec();
    let beta = cfg.noise.beta.gains(cfg.noise_k())?[..k].to_vec();
    let base_model = NoiseModel::diagonal(coarsest, alpha, beta)?;
    let channel_modes: Vec<ModeIndex> = base_model.mode_map.iter().map(|&i| coarsest.modes()[i]).collect();
    let u0_fine = initial_field(cfg, finest)?;
    let solver = cfg.solver_config();
    let mut out = Vec::with_capacity(bases.len());
    for b in &bases {
        let mode_map = channel_modes
            .iter()
            .map(|mi| find_mode(b, mi))
            .collect::<Result<Vec<_>>>()?;
        let model = NoiseModel {
            mode_map,
            ..base_model.clone()
        };
        model.validate(b)?;
        let coeffs = b
            .modes()
            .iter()
            .map(|mi| find_mode(finest, mi).map(|i| u0_fine.coeffs[i]))
            .collect::<Result<Vec<_>>>()?;
        let u0 = CoeffField::from_coeffs(b, coeffs)?;
        out.push(Setup {
            ops: GalerkinOperators::assemble(b, solver.c),
            basis: b.clone(),
            model,
            solver: solver.clone(),
            u0,
        });
    }
    Ok(out)
}

/// Shared-noise distances of runs at `n_x = n_perp = n` to the finest `n`,
/// compared in the finest basis.
pub fn n_sweep(cfg: &RunConfig, ns: &[usize], m: usize, master_seed: u64, workers: usize) -> Result<SweepTable> {
    let setups = matched_setups(cfg, ns)?;
    let finest = &setups.last().unwrap().basis;
    let steppers: Vec<ImexStepper> = setups
        .iter()
        .map(|s| ImexStepper::new(&s.basis, &s.ops, &s.solver))
        .collect::<zk_core::Result<_>>()?;
    let embed: Vec<Vec<usize>> = setups
        .iter()
        .map(|s| s.basis.modes().iter().map(|mi| find_mode(finest, mi)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let times = record_times(&setups[0].solver);
    let nf = finest.len();
    let per_traj = par_trajectories(m, workers, |j| {
        let key = NoiseKey::new(master_seed, j);
        let mut runs = Vec::with_capacity(setups.len());
        for (v, s) in steppers.iter().enumerate() {
            runs.push(match s.solve_path(&setups[v].u0, &setups[v].model, key) {
                Ok(p) => Some(
                    p.fields
                        .iter()
                        .map(|f| {
                            let mut full = vec![0.0; nf];
                            for (c, &i) in f.coeffs.iter().zip(&embed[v]) {
                                full[i] = *c;
                            }
                            full
                        })
                        .collect(),
                ),
                Err(f) if matches!(f.error, ZkError::BlowUp { .. }) => None,
                Err(f) => return Err(f.error.into()),
            });
        }
        Ok(distances_to_last(&times, &runs))
    })?;
    let values: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(SweepTable::new("n", &values, per_traj))
}

pub fn find_mode(b: &SpectralBasis, mi: &ModeIndex) -> Result<usize> {
    b.modes()
        .iter()
        .position(|m| m == mi)
        .ok_or_else(|| AppError::Config(format!("mode ({}, {}, {}) missing from a sweep basis", mi.x, mi.y, mi.z)))
}

/// Shared-noise distances of runs at each dt to the finest dt. Coarse
/// increments are sums of the finest ones, and distances are taken on the
/// coarsest time grid.
pub fn dt_sweep(setup: &Setup, dts: &[f64], m: usize, master_seed: u64, workers: usize) -> Result<SweepTable> {
    if dts.is_empty() || dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(AppError::Config("dt sweep values must be decreasing".into()));
    }
    let t_final = setup.solver.t_final;
    let fine_dt = *dts.last().unwrap();
    let fine_steps = (t_final / fine_dt).round() as u64;
    let ratios: Vec<u64> = dts.iter().map(|dt| (dt / fine_dt).round() as u64).collect();
    let coarse_steps = (t_final / dts[0]).round() as u64;
    let times: Vec<f64> = (0..=coarse_steps).map(|s| s as f64 * dts[0]).collect();
    let steppers: Vec<ImexStepper> = dts
        .iter()
        .map(|&dt| {
            let cfg = SolverConfig {
                dt,
                record_every: 1,
                ..setup.solver.clone()
            };
            ImexStepper::new(&setup.basis, &setup.ops, &cfg)
        })
        .collect::<zk_core::Result<_>>()?;
    let k = setup.model.channels();
    let per_traj = par_trajectories(m, workers, |j| {
        let key = NoiseKey::new(master_seed, j);
        let fine: Vec<Vec<f64>> = (0..fine_steps)
            .map(|s| key.increment(s, k, fine_dt).map(|i| i.dw))
            .collect::<zk_core::Result<_>>()?;
        let runs: Vec<Option<Vec<Vec<f64>>>> = steppers
            .iter()
            .zip(&ratios)
            .map(|(s, &r)| coupled_run(s, setup, &fine, r as usize, ratios[0] as usize / r as usize))
            .collect::<Result<_>>()?;
        Ok(distances_to_last(&times, &runs))
    })?;
    Ok(SweepTable::new("dt", dts, per_traj))
}

/// Step with increments aggregated from `fine`, `agg` fine steps per step,
/// keeping every `keep`-th state. `None` on blow-up.
fn coupled_run(s: &ImexStepper, setup: &Setup, fine: &[Vec<f64>], agg: usize, keep: usize) -> Result<Option<Vec<Vec<f64>>>> {
    let dt = s.config().dt;
    let cap = BLOWUP_FACTOR * setup.u0.l2_norm().max(1.0);
    let k = setup.model.channels();
    let mut u = setup.u0.coeffs.clone();
    let mut out = vec![u.clone()];
    for (m, chunk) in fine.chunks(agg).enumerate() {
        let mut dw = vec![0.0; k];
        for f in chunk {
            for (a, v) in dw.iter_mut().zip(f) {
                *a += v;
            }
        }
        u = match s.step(&u, m as f64 * dt, &setup.model, &WienerIncrement { dw, dt }) {
            Ok(v) => v,
            Err(ZkError::BlowUp { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if u.iter().map(|v| v * v).sum::<f64>().sqrt() > cap {
            return Ok(None);
        }
        if (m + 1) % keep == 0 {
            out.push(u.clone());
        }
    }
    Ok(Some(out))
}

/// Run every sweep listed in the config.
pub fn run_sweeps(cfg: &RunConfig, setup: &Setup, workers: usize) -> Result<Vec<SweepTable>> {
    let m = cfg.ensemble.m;
    let seed = cfg.master_seed();
    cfg.ensemble
        .sweep
        .iter()
        .map(|SweepSpec { parameter, values }| match parameter.as_str() {
            "epsilon" => epsilon_sweep(setup, values, m, seed, workers),
            "dt" => dt_sweep(setup, values, m, seed, workers),
            "n" => {
                let ns: Vec<usize> = values.iter().map(|v| *v as usize).collect();
                n_sweep(cfg, &ns, m, seed, workers)
            }
            other => Err(AppError::Config(format!("unknown sweep parameter {other:?}"))),
        })
        .collect()
}
