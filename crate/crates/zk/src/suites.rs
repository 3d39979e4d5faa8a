//! The `verify` suites. Each check becomes one [`ReportRow`].

use zk_core::basis::{Deriv, TraceKind, TransverseBc};
use zk_core::diagnostics::{
    boundary_slope, check_moment_bound, cubic_integral, energy_budget, trace_convergence, uniqueness_experiment,
    weighted_energy_budget, EnergyLedger, MomentBound,
};
use zk_core::operators::difference_identity_sides;
use zk_core::{CoeffField, GalerkinOperators, ImexStepper, NoiseKey, NoiseModel, SolverConfig, SpectralBasis, Welford};

use crate::config::RunConfig;
use crate::ensemble::{aggregate, matched_setups, par_trajectories, record_times, run_ensemble, run_summaries};
use crate::error::{AppError, Result};
use crate::report::ReportRow;
use crate::setup::{smooth_field, Setup};

pub const SUITES: [&str; 5] = ["identities", "budgets", "moments", "uniqueness", "traces"];

const REF_B: &str = "nonlinearity is energy neutral: (B(u), u) = 0";
const REF_A: &str = "dispersion form: (Au, u) = 1/2 |u_x(0)|^2";
const REF_L: &str = "regularization form: (Lu, u) = [u]_2^2";
const REF_DIFF: &str = "bilinear difference identity with weight (1+x)";
const REF_GRAM: &str = "orthonormal eigenbasis of the fourth-order operator";
const REF_BC: &str = "boundary conditions of the H^4-type space";
const REF_EIG: &str = "eigenrelation [phi_i]_2^2 = lambda_i";
const REF_TRACE1: &str = "trace condition u_x = 0 at x = 1";
const REF_ITO: &str = "Ito energy identity for |u|^2";
const REF_WEIGHTED: &str = "weighted energy identity for |sqrt(1+x) u|^2";
const REF_MOMENT: &str = "moment bound E sup |u|^p via Gronwall";
const REF_UNIQ: &str = "pathwise uniqueness up to the energy stopping time";
const REF_TRACE_LIMIT: &str = "trace u_x(1) recovered in the vanishing regularization limit";

/// Coefficients with independent standard normal entries.
pub fn random_field(basis: &SpectralBasis, seed: u64, stream: u64) -> CoeffField {
    let dw = NoiseKey::new(seed, stream)
        .increment(0, basis.len(), 1.0)
        .expect("unit step is valid")
        .dw;
    CoeffField::from_coeffs(basis, dw).expect("finite draws")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst relative errors of the four operator identities over `count` fields.
pub fn identity_rows(basis: &SpectralBasis, ops: &GalerkinOperators, count: usize, seed: u64) -> Result<Vec<ReportRow>> {
    let grid = basis.grid();
    let d2 = basis.config().d == 2;
    let (mut eb, mut ea, mut el, mut ed) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..count as u64 {
        let u = random_field(basis, seed, 2 * j);
        let v = random_field(basis, seed, 2 * j + 1);
        let ug = basis.synthesize(&u.coeffs, Deriv::NONE);
        let ux = basis.synthesize(&u.coeffs, Deriv::x(1));

        let bu = ops.apply_b(basis, &u, &u)?;
        let scale: f64 = ug
            .iter()
            .zip(&ux)
            .zip(grid.weights())
            .map(|((a, c), w)| (a * a * c).abs() * w)
            .sum();
        eb = eb.max(dot(&bu.coeffs, &u.coeffs).abs() / scale);

        let form = dot(&u.coeffs, &ops.apply_a(basis, &u)?.coeffs);
        let tr = basis.eval_trace(&u, TraceKind::UxAt0)?.norm;
        ea = ea.max((form - 0.5 * tr * tr).abs() / (0.5 * tr * tr));

        let lform = dot(&ops.apply_l(basis, &u)?.coeffs, &u.coeffs);
        let mut energy = 0.0;
        for d in [Deriv::x(2), Deriv::y(2)].into_iter().chain(d2.then_some(Deriv::z(2))) {
            let g = basis.synthesize(&u.coeffs, d);
            energy += grid.inner(&g, &g);
        }
        el = el.max((lform - energy).abs() / energy);

        let (lhs, rhs) = difference_identity_sides(basis, &u, &v)?;
        ed = ed.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Ok(vec![
        ReportRow::at_most("b_energy_neutral", REF_B, eb, 1e-8),
        ReportRow::at_most("a_boundary_form", REF_A, ea, 1e-8),
        ReportRow::at_most("l_second_derivative_form", REF_L, el, 1e-6),
        ReportRow::at_most("difference_identity", REF_DIFF, ed, 1e-8),
    ])
}

/// Largest boundary-condition residual over all modes. Each derivative of
/// order `r` is scaled by `λ_i^{r/4}`, the size of that derivative for mode i.
pub fn boundary_residual(basis: &SpectralBasis) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let pts = [-1.2, -0.3, 0.0, 0.7, 1.4];
    let dirichlet = basis.config().transverse_bc == TransverseBc::Dirichlet;
    let d2 = basis.config().d == 2;
    let mut worst = 0.0f64;
    for i in 0..basis.len() {
        let lam = basis.eigenvalues()[i];
        let s = |r: usize| lam.powf(r as f64 / 4.0);
        for &p in &pts {
            for &q in pts.iter().take(if d2 { pts.len() } else { 1 }) {
                let q = if d2 { q } else { 0.0 };
                let mut checks = vec![
                    basis.mode_value(i, 0.0, p, q, Deriv::NONE).abs(),
                    basis.mode_value(i, 1.0, p, q, Deriv::NONE).abs(),
                    basis.mode_value(i, 1.0, p, q, Deriv::x(1)).abs() / s(1),
                    basis.mode_value(i, 0.0, p, q, Deriv::x(2)).abs() / s(2),
                ];
                if dirichlet {
                    for y in [-half, half] {
                        checks.push(basis.mode_value(i, 0.4, y, q, Deriv::NONE).abs());
                        checks.push(basis.mode_value(i, 0.4, y, q, Deriv::y(2)).abs() / s(2));
                        if d2 {
                            checks.push(basis.mode_value(i, 0.4, p, y, Deriv::NONE).abs());
                            checks.push(basis.mode_value(i, 0.4, p, y, Deriv::z(2)).abs() / s(2));
                        }
                    }
                }
                worst = checks.into_iter().fold(worst, f64::max);
            }
        }
    }
    worst
}

/// `max |G − I|` over the Gram matrix of every mode.
pub fn gram_defect(basis: &SpectralBasis) -> f64 {
    let n = basis.len();
    let g = basis.gram(n);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[i * n + j] - want).abs());
        }
    }
    worst
}

pub fn basis_rows(basis: &SpectralBasis) -> Vec<ReportRow> {
    let grid = basis.grid();
    let d2 = basis.config().d == 2;
    let mut eig = 0.0f64;
    let mut tr1 = 0.0f64;
    let mut e = vec![0.0; basis.len()];
    for i in 0..basis.len() {
        e[i] = 1.0;
        let mut energy = 0.0;
        for d in [Deriv::x(2), Deriv::y(2)].into_iter().chain(d2.then_some(Deriv::z(2))) {
            let g = basis.synthesize(&e, d);
            energy += grid.inner(&g, &g);
        }
        let lam = basis.eigenvalues()[i];
        eig = eig.max((energy - lam).abs() / lam);
        let f = CoeffField::from_coeffs(basis, e.clone()).expect("unit vector");
        let t = basis.eval_trace(&f, TraceKind::UxAt1).expect("own basis").norm;
        tr1 = tr1.max(t / lam.powf(0.25));
        e[i] = 0.0;
    }
    vec![
        ReportRow::at_most("gram_identity", REF_GRAM, gram_defect(basis), 1e-10),
        ReportRow::at_most("boundary_conditions", REF_BC, boundary_residual(basis), 1e-8),
        ReportRow::at_most("eigenrelation", REF_EIG, eig, 1e-6),
        ReportRow::at_most("trace_ux_at_1", REF_TRACE1, tr1, 1e-8),
    ]
}

/// Largest per-step residual of the noiseless linear run, over `dt²·|u0|²`.
fn linear_residuals(setup: &Setup, dt: f64, t_final: f64) -> Result<(f64, f64)> {
    let cfg = SolverConfig {
        dt,
        t_final,
        nonlinear: false,
        record_every: 1,
        ..setup.solver.clone()
    };
    let silent = NoiseModel::silent();
    let path = ImexStepper::new(&setup.basis, &setup.ops, &cfg)?
        .solve_path(&setup.u0, &silent, NoiseKey::new(0, 0))
        .map_err(|f| f.error)?;
    let scale = dt * dt * setup.u0.l2_norm().powi(2).max(f64::MIN_POSITIVE);
    let plain = energy_budget(&setup.basis, &path, &setup.ops, &silent)?;
    let weighted = weighted_energy_budget(&setup.basis, &path, &setup.ops, &silent)?;
    Ok((plain.max_abs_residual() / scale, weighted.max_abs_residual() / scale))
}

/// Per-ensemble ledger summaries for one dt.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetStats {
    /// Summed martingale column per path, plain and weighted.
    pub martingale: [Welford; 2],
    /// Mean `|residual|` per step over all paths, plain and weighted.
    pub mean_abs_residual: [f64; 2],
}

fn ledger_totals(l: &EnergyLedger) -> (f64, f64) {
    let mart = l.total("martingale").expect("martingale column");
    let res: f64 = l.residual.iter().map(|r| r.abs()).sum();
    (mart, res)
}

pub fn budget_ensemble(setup: &Setup, dt: f64, m: usize, seed: u64, workers: usize) -> Result<BudgetStats> {
    let cfg = SolverConfig {
        dt,
        record_every: 1,
        ..setup.solver.clone()
    };
    let stepper = ImexStepper::new(&setup.basis, &setup.ops, &cfg)?;
    let per = par_trajectories(m, workers, |j| {
        let path = stepper
            .solve_path(&setup.u0, &setup.model, NoiseKey::new(seed, j))
            .map_err(|f| f.error)?;
        let a = ledger_totals(&energy_budget(&setup.basis, &path, &setup.ops, &setup.model)?);
        let b = ledger_totals(&weighted_energy_budget(&setup.basis, &path, &setup.ops, &setup.model)?);
        Ok((a, b, path.len() - 1))
    })?;
    let mut martingale = [Welford::new(), Welford::new()];
    let mut res = [0.0, 0.0];
    let mut steps = 0usize;
    for (a, b, s) in per {
        martingale[0].push(a.0);
        martingale[1].push(b.0);
        res[0] += a.1;
        res[1] += b.1;
        steps += s;
    }
    Ok(BudgetStats {
        martingale,
        mean_abs_residual: [res[0] / steps as f64, res[1] / steps as f64],
    })
}

/// Halvings of dt in the deterministic residual ladder.
pub const LINEAR_LEVELS: i32 = 6;

/// Observed per-step order of the noiseless linear budget residual at the
/// finest pair of a dt-halving ladder, plain and weighted. The stiff
/// dispersive modes keep the coarsest levels pre-asymptotic.
pub fn linear_residual_order(setup: &Setup) -> Result<(f64, f64)> {
    let dt = setup.solver.dt;
    let horizon = (10.0 * dt).min(setup.solver.t_final);
    let mut prev = linear_residuals(setup, dt, horizon)?;
    let mut order = (f64::NAN, f64::NAN);
    for k in 1..LINEAR_LEVELS {
        let next = linear_residuals(setup, dt / 2f64.powi(k), horizon)?;
        // Normalized by dt², so a per-step O(dt²) residual gives a ratio of 1.
        order = (2.0 + (prev.0 / next.0).log2(), 2.0 + (prev.1 / next.1).log2());
        prev = next;
    }
    Ok(order)
}

pub fn budget_rows(setup: &Setup, m: usize, seed: u64, workers: usize) -> Result<Vec<ReportRow>> {
    let dt = setup.solver.dt;
    let order = linear_residual_order(setup)?;
    let mut rows = vec![
        ReportRow::within("energy_linear_residual_order", REF_ITO, order.0, 1.8, 2.2),
        ReportRow::within("weighted_linear_residual_order", REF_WEIGHTED, order.1, 1.8, 2.2),
    ];
    let a = budget_ensemble(setup, dt, m, seed, workers)?;
    let b = budget_ensemble(setup, dt / 2.0, m, seed, workers)?;
    let z = |w: &Welford| if w.std_err() > 0.0 { w.mean().abs() / w.std_err() } else { 0.0 };
    rows.push(ReportRow::at_most("energy_martingale_mean_se", REF_ITO, z(&a.martingale[0]), 4.0));
    rows.push(ReportRow::at_most("weighted_martingale_mean_se", REF_WEIGHTED, z(&a.martingale[1]), 4.0));
    rows.push(ReportRow::within(
        "energy_residual_halving_ratio",
        REF_ITO,
        a.mean_abs_residual[0] / b.mean_abs_residual[0],
        1.6,
        2.4,
    ));
    rows.push(ReportRow::within(
        "weighted_residual_halving_ratio",
        REF_WEIGHTED,
        a.mean_abs_residual[1] / b.mean_abs_residual[1],
        1.6,
        2.4,
    ));
    rows.push(ReportRow::at_most(
        "cubic_term_refined_quadrature",
        REF_WEIGHTED,
        cubic_defect(&setup.basis, 10, seed),
        1e-8,
    ));
    Ok(rows)
}

/// Worst `|∫u³ − ∫u³ (4× nodes)| / ∫|u|³` over smooth random fields.
pub fn cubic_defect(basis: &SpectralBasis, count: u64, seed: u64) -> f64 {
    let c = basis.config();
    let fine = basis.grid_with(4 * c.quad_x, 4 * c.quad_perp);
    let mut worst = 0.0f64;
    for j in 0..count {
        let u = smooth_field(basis, 2.0, seed ^ (j + 1)).expect("finite field");
        let coarse = cubic_integral(basis, basis.grid(), &u.coeffs);
        let dense = cubic_integral(basis, &fine, &u.coeffs);
        let g = basis.synthesize(&u.coeffs, Deriv::NONE);
        let abs3 = basis.grid().integrate(&g.iter().map(|v| v.abs().powi(3)).collect::<Vec<_>>());
        worst = worst.max((coarse - dense).abs() / abs3);
    }
    worst
}

/// CI widths at `m/4` and `m` trajectories, and the fitted bound checked on
/// an independent ensemble.
pub fn moment_rows(setup: &Setup, ps: &[f64], m: usize, seed: u64, workers: usize) -> Result<Vec<ReportRow>> {
    if m < 8 {
        return Err(AppError::Config("moment suite needs ensemble.M ≥ 8".into()));
    }
    let times = record_times(&setup.solver);
    let runs = run_summaries(setup, m, seed, workers)?;
    let full = aggregate(&runs, times.clone(), m, seed, ps)?;
    let q = m / 4;
    let quarters = (0..4)
        .map(|i| aggregate(&runs[i * q..(i + 1) * q], times.clone(), q, seed, ps))
        .collect::<Result<Vec<_>>>()?;
    let pilot = run_ensemble(setup, m / 4, seed.wrapping_add(1), workers, ps)?;
    let n = setup.basis.len();
    let mut rows = Vec::new();
    for (k, &p) in ps.iter().enumerate() {
        let last = |s: &crate::ensemble::EnsembleStats| s.moments[k].last().cloned();
        let Some(f) = last(&full) else {
            return Err(AppError::Config("every trajectory blew up".into()));
        };
        // RMS over the four disjoint quarters keeps the variance estimate unbiased.
        let mut w2 = 0.0;
        for s in &quarters {
            let Some(r) = last(s) else {
                return Err(AppError::Config("every trajectory of a quarter blew up".into()));
            };
            w2 += r.ci_width() * r.ci_width() / 4.0;
        }
        rows.push(ReportRow::at_most(
            &format!("moment_p{p}_estimate"),
            REF_MOMENT,
            f.estimate,
            f64::INFINITY,
        ));
        rows.push(ReportRow::within(
            &format!("moment_p{p}_ci_shrink"),
            REF_MOMENT,
            w2.sqrt() / f.ci_width(),
            1.5,
            2.5,
        ));
        let first = last(&quarters[0]).map_or(f64::NAN, |r| r.ci_width());
        rows.push(ReportRow::at_most(
            &format!("moment_p{p}_ci_shrink_first_quarter"),
            REF_MOMENT,
            first / f.ci_width(),
            f64::INFINITY,
        ));
        let bound = MomentBound::new(p, setup.u0.l2_norm().powf(p), &setup.solver.forcing, n, &full.times);
        let check = check_moment_bound(&bound, &pilot.moments[k], &full.moments[k])?;
        rows.push(ReportRow {
            check_id: format!("moment_p{p}_fitted_bound"),
            paper_ref: REF_MOMENT.into(),
            value: check.worst_ratio,
            tolerance: 1.0,
            pass: check.pass,
        });
        rows.push(ReportRow::at_most(
            &format!("moment_p{p}_fitted_constant"),
            REF_MOMENT,
            check.fitted_c,
            f64::INFINITY,
        ));
    }
    Ok(rows)
}

/// Same-noise pairs: identical data, then `delta`-perturbed data on `count`
/// seeds.
pub fn uniqueness_rows(setup: &Setup, count: usize, delta: f64, radius: f64, seed: u64, workers: usize) -> Result<Vec<ReportRow>> {
    let run = |j: u64, d: f64| {
        let cfg = SolverConfig {
            record_every: 1,
            ..setup.solver.clone()
        };
        uniqueness_experiment(
            &setup.basis,
            &setup.ops,
            &setup.model,
            &cfg,
            &setup.u0,
            radius,
            NoiseKey::new(seed, j),
            d,
        )
    };
    let same = run(0, 0.0)?;
    let reports = par_trajectories(count, workers, |j| Ok(run(j, delta)?))?;
    let passed = reports.iter().filter(|r| r.pass).count();
    let worst = reports
        .iter()
        .map(|r| r.ratio / r.factor)
        .fold(0.0f64, f64::max);
    let tau_min = reports.iter().map(|r| r.tau_m).fold(f64::INFINITY, f64::min);
    Ok(vec![
        ReportRow::at_most(
            "uniqueness_identical_data",
            REF_UNIQ,
            same.sup_diff.sqrt() / (1.0 + setup.u0.l2_norm()),
            1e-10,
        ),
        ReportRow::at_least("uniqueness_factor_share", REF_UNIQ, passed as f64 / count as f64, 0.95),
        ReportRow::at_most("uniqueness_worst_ratio_over_factor", REF_UNIQ, worst, f64::INFINITY),
        ReportRow::at_least("uniqueness_min_stopping_time", REF_UNIQ, tau_min, 0.0),
    ])
}

/// In-basis traces along the ε list, and the off-basis slope along `ns`.
pub fn trace_rows(cfg: &RunConfig, eps_list: &[f64], ns: &[usize], seed: u64) -> Result<Vec<ReportRow>> {
    let setups = matched_setups(cfg, ns)?;
    let key = NoiseKey::new(seed, 0);
    let s0 = &setups[0];
    let rows0 = trace_convergence(&s0.basis, &s0.ops, &s0.model, &s0.u0, &s0.solver, eps_list, key)?;
    let scale = 1.0 + s0.u0.l2_norm();
    let in_basis = rows0.iter().map(|r| r.in_basis / scale).fold(0.0f64, f64::max);
    let eps = *eps_list.last().unwrap();
    let mut slopes = Vec::new();
    for s in &setups {
        let r = trace_convergence(&s.basis, &s.ops, &s.model, &s.u0, &s.solver, &[eps], key)?;
        slopes.push(r[0].off_basis);
    }
    let growth = slopes.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    let zero = CoeffField::zeros(&s0.basis);
    Ok(vec![
        ReportRow::at_most("trace_in_basis", REF_TRACE_LIMIT, in_basis, 1e-8),
        ReportRow::at_most("trace_off_basis_decreases_in_n", REF_TRACE_LIMIT, growth, 1.0),
        ReportRow::at_most(
            "trace_off_basis_zero_field",
            REF_TRACE_LIMIT,
            boundary_slope(&s0.basis, &zero.coeffs),
            0.0,
        ),
    ])
}

/// Run one named suite at the sizes the config gives.
pub fn run_suite(name: &str, cfg: &RunConfig, seed: u64) -> Result<Vec<ReportRow>> {
    let workers = cfg.ensemble.workers;
    let m = cfg.ensemble.m;
    match name {
        "identities" => {
            let setup = Setup::build(cfg)?;
            let mut rows = basis_rows(&setup.basis);
            rows.extend(identity_rows(&setup.basis, &setup.ops, 100, seed)?);
            Ok(rows)
        }
        "budgets" => budget_rows(&Setup::build(cfg)?, m, seed, workers),
        "moments" => moment_rows(&Setup::build(cfg)?, &cfg.ensemble.moments, m, seed, workers),
        "uniqueness" => uniqueness_rows(&Setup::build(cfg)?, m, 1e-6, 100.0, seed, workers),
        "traces" => {
            let eps: Vec<f64> = (2..=10).map(|k| 2f64.powi(-k)).collect();
            let n = cfg.domain.n_x.min(cfg.domain.n_perp);
            trace_rows(cfg, &eps, &[n, 2 * n, 4 * n], seed)
        }
        other => Err(AppError::Config(format!(
            "unknown suite {other:?}; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}
