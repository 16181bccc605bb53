use alloc::vec;

use super::stencil::Stencil;
use super::LinearSolveReport;
use crate::grid::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// `||r||_2 / ||b||_2`.
    Relative,
    /// `scale * ||r||_inf`, used when the residual itself is a physical
    /// quantity (the post-projection divergence).
    AbsoluteInf { scale: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgSettings {
    pub tol: f64,
    pub criterion: Criterion,
    pub max_iter: usize,
    /// Restrict to the mean-zero complement (singular Neumann operators).
    pub mean_free: bool,
}

/// Default iteration cap `10 sqrt(N) ln(1/tol)`.
pub(crate) fn iteration_cap(n: usize, tol: f64) -> usize {
    let log = libm::log(1.0 / tol.min(0.5));
    let cap = 10.0 * libm::sqrt(n as f64) * log;
    (libm::ceil(cap) as usize).max(50)
}

impl CgSettings {
    pub fn relative(n: usize, tol: f64) -> Self {
        Self {
            tol,
            criterion: Criterion::Relative,
            max_iter: iteration_cap(n, tol),
            mean_free: false,
        }
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
}

/// Jacobi-preconditioned conjugate gradients on `op x = b`, starting from the
/// contents of `x`.
pub(crate) fn pcg(op: &Stencil, b: &[f64], x: &mut [f64], s: &CgSettings) -> LinearSolveReport {
    let n = op.len();
    let bnorm = libm::sqrt(dot(b, b));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return LinearSolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let measure = |r: &[f64]| match s.criterion {
        Criterion::Relative => libm::sqrt(dot(r, r)) / bnorm,
        Criterion::AbsoluteInf { scale } => scale * norm_inf(r),
    };
    let inv_diag: vec::Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut ap = vec![0.0; n];
    let mut r = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        op.apply(x, ap);
        for k in 0..n {
            r[k] = b[k] - ap[k];
        }
        if s.mean_free {
            remove_mean(r);
        }
    };
    let precondition = |r: &[f64], z: &mut [f64]| {
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        if s.mean_free {
            remove_mean(z);
        }
    };
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let mut residual;
    // Restart from the true residual whenever the recursive one claims
    // convergence it cannot back up.
    let mut restarts = 0;
    // Best iterate by true residual; past the attainable accuracy the
    // recursion can wander off to overflow.
    let mut best = f64::INFINITY;
    let mut best_x = x.to_vec();
    let mut keep = |x: &[f64], res: f64, best_x: &mut [f64]| {
        if res < best {
            best = res;
            best_x.copy_from_slice(x);
        }
    };
    loop {
        true_residual(x, &mut r, &mut ap);
        residual = measure(&r);
        keep(x, residual, &mut best_x);
        if !residual.is_finite() || residual <= s.tol || iterations >= s.max_iter || restarts > 4 {
            break;
        }
        restarts += 1;
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while residual > s.tol && iterations < s.max_iter {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let step = rz / pap;
            if !step.is_finite() {
                break;
            }
            for k in 0..n {
                x[k] += step * p[k];
                r[k] -= step * ap[k];
            }
            iterations += 1;
            if iterations % 64 == 0 {
                true_residual(x, &mut r, &mut ap);
                let res = measure(&r);
                keep(x, res, &mut best_x);
                if !res.is_finite() {
                    break;
                }
            } else if s.mean_free {
                remove_mean(&mut r);
            }
            residual = measure(&r);
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            if !(rz_new > 0.0) {
                break;
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    if !(residual <= best) {
        x.copy_from_slice(&best_x);
        residual = best;
    }
    if s.mean_free {
        remove_mean(x);
    }
    LinearSolveReport {
        iterations,
        residual,
        converged: residual <= s.tol,
    }
}
