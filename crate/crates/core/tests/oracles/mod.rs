//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here uses the closed-form x-modes.
#![allow(dead_code)]

/// Second differences of the interior vector `w` on `0 = x_0 < … < x_{N+1} = 1`
/// with ghost values for `w(0) = w''(0) = 0` and `w(1) = w'(1) = 0`.
fn second_differences(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    let at = |i: isize| -> f64 {
        match i {
            -1 => -w[0],
            0 => 0.0,
            i if i as usize == n + 1 => 0.0,
            i if i as usize == n + 2 => w[n - 1],
            i => w[i as usize - 1],
        }
    };
    (0..=n + 1)
        .map(|i| {
            let i = i as isize;
            (at(i - 1) - 2.0 * at(i) + at(i + 1)) / (h * h)
        })
        .collect()
}

/// Solve `(u_{i−1} − 2u_i + u_{i+1}) = r_i`, i = 1..n, with `u_0 = left`,
/// `u_{n+1} = right` (Thomas algorithm).
fn second_difference_solve(r: &[f64], left: f64, right: f64) -> Vec<f64> {
    let n = r.len();
    let mut rhs = r.to_vec();
    rhs[0] -= left;
    rhs[n - 1] -= right;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = 1.0 / -2.0;
    d[0] = rhs[0] / -2.0;
    for i in 1..n {
        let m = -2.0 - c[i - 1];
        c[i] = 1.0 / m;
        d[i] = (rhs[i] - d[i - 1]) / m;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    u
}

/// Solve the discrete beam system (stencil 1, −4, 6, −4, 1 with first
/// diagonal 5 and last diagonal 7, scaled by h⁴) as two second-difference
/// solves `v = D²w`, `D²v = h⁴ b`, coupled through the ghost value
/// `v_{N+1} = 2 w_N / h²`.
fn solve_beam(rhs: &[f64], h: f64) -> Vec<f64> {
    let h2 = h * h;
    let r: Vec<f64> = rhs.iter().map(|b| b * h2).collect();
    let solve = |b: &[f64], s: f64| {
        let v = second_difference_solve(b, 0.0, s);
        let vr: Vec<f64> = v.iter().map(|x| x * h2).collect();
        second_difference_solve(&vr, 0.0, 0.0)
    };
    let w0 = solve(&r, 0.0);
    let zero = vec![0.0; rhs.len()];
    let w1 = solve(&zero, 1.0);
    let n = rhs.len();
    let s = 2.0 * w0[n - 1] / (h2 - 2.0 * w1[n - 1]);
    w0.iter().zip(&w1).map(|(a, b)| a + s * b).collect()
}

/// Smallest eigenpair of the discrete beam problem on `n` interior points:
/// the eigenvalue as the Rayleigh quotient of the energy form, the slope
/// `|w'(0)|` of the L²-normalised eigenvector.
pub fn fd_first_mode(n: usize) -> (f64, f64) {
    let h = 1.0 / (n + 1) as f64;
    let mut v: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 * h).sin()).collect();
    for _ in 0..60 {
        v = solve_beam(&v, h);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let d2 = second_differences(&v, h);
    let mut energy = 0.0;
    for (i, d) in d2.iter().enumerate() {
        let weight = if i == n + 1 { 0.5 } else { 1.0 };
        energy += weight * d * d;
    }
    let mass: f64 = v.iter().map(|x| x * x).sum();
    let lambda = energy / mass;
    let scale = 1.0 / (mass * h).sqrt();
    // w(0) = w''(0) = 0 leaves w = a x + O(x³), so (8 w_1 − w_2) / 6h = a + O(h³).
    let slope = ((8.0 * v[0] - v[1]) * scale / (6.0 * h)).abs();
    (lambda, slope)
}

/// Richardson-extrapolated first eigenvalue and slope from three grids
/// `m, 2m, 4m` intervals, assuming an `h²` leading error. Returns the
/// extrapolated values and the observed convergence order.
pub fn fd_first_mode_extrapolated(intervals: usize) -> (f64, f64, f64) {
    let (l1, s1) = fd_first_mode(intervals - 1);
    let (l2, s2) = fd_first_mode(2 * intervals - 1);
    let (l3, s3) = fd_first_mode(4 * intervals - 1);
    let order = ((l1 - l2) / (l2 - l3)).log2();
    let lam = l3 + (l3 - l2) / 3.0;
    let slope = s3 + (s3 - s2) / 3.0;
    let _ = (s1, l1);
    (lam, slope, order)
}
