//! Averaged process `z_n` and the Poisson-equation decomposition of
//! `x_n − z_n`, evaluated over a recorded full-resolution window.

use super::{SaSystem, SaTrajectory, WindowRecord};
use crate::error::{Error, Result};
use crate::linalg::vec_inf_norm;
use crate::markov::{solve_poisson, stationary_distribution, stationary_mean, PoissonSolution};
use crate::policy::ControlValue;

/// Largest window accepted by [`noise_decomposition`].
pub const MAX_WINDOW: usize = 5000;

fn window(traj: &SaTrajectory) -> Result<&WindowRecord> {
    traj.window
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory has no full-resolution window".into()))
}

fn at_step(n: u64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NotIrreducible => Error::NotIrreducibleAt(n),
        other => other,
    }
}

fn f_values<S: SaSystem + ?Sized>(system: &S, x: &[f64]) -> Vec<Vec<f64>> {
    (0..system.noise_state_count()).map(|i| system.update_map(x, i)).collect()
}

/// Pinned Poisson solution for kernel `(ζ, w)` and map `F(x, ·)`, plus the
/// stationary mean of `F(x, ·)`.
fn poisson_at<S: SaSystem + ?Sized>(
    system: &S,
    ctrl: &ControlValue,
    w: &[f64],
    x: &[f64],
    i_star: usize,
) -> Result<(PoissonSolution, Vec<f64>, crate::markov::Kernel)> {
    let k = system.kernel_at(ctrl, w)?;
    let mu = stationary_distribution(&k)?;
    let f = f_values(system, x);
    let sol = solve_poisson(&k, &f, &mu, i_star)?;
    Ok((sol, stationary_mean(&f, &mu), k))
}

/// `z` over the window, started from `z_start = x_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedProcess {
    pub start: u64,
    /// `z_n` for `n = start ..= start + len`.
    pub z: Vec<Vec<f64>>,
    /// `F̄^{(ζ_n,x_n)}(x_n)` for `n = start .. start + len`.
    pub fbar: Vec<Vec<f64>>,
}

/// `z_{n+1} = z_n + β_n (F̄^{(ζ_n,x_n)}(x_n) − z_n)` over the recorded window.
pub fn averaged_process<S: SaSystem + ?Sized>(traj: &SaTrajectory, system: &S) -> Result<AveragedProcess> {
    let w = window(traj)?;
    let mut z = vec![w.xs[0].clone()];
    let mut fbar = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let n = w.start + i as u64;
        let k = system.kernel_at(&w.ctrls[i], &w.xs[i])?;
        let mu = stationary_distribution(&k).map_err(at_step(n))?;
        let fb = stationary_mean(&f_values(system, &w.xs[i]), &mu);
        let beta = w.betas[i];
        let next = z[i].iter().zip(&fb).map(|(zi, fi)| zi + beta * (fi - zi)).collect();
        z.push(next);
        fbar.push(fb);
    }
    Ok(AveragedProcess { start: w.start, z, fbar })
}

/// Terms of the decomposition at iterate index `n`, each accumulated as
/// `Σ_{i<n} β_i Π_{j=i+1}^{n−1} (1 − β_j) v_i` from the window start.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub n: u64,
    /// `x_n − z_n`.
    pub gap: Vec<f64>,
    /// Weighted sum of `M_{i+1} + M'_{i+1}`.
    pub martingale_sum: Vec<f64>,
    /// `H_i(y_i) − H_{i+1}(y_{i+1})`.
    pub t1: Vec<f64>,
    /// `H_{i+1}(y_{i+1}) − H^{(ζ_{i+1},x_i)}(y_{i+1})`.
    pub t2: Vec<f64>,
    /// `H^{(ζ_{i+1},x_i)}(y_{i+1}) − H_i(y_{i+1})`.
    pub t3: Vec<f64>,
    /// `‖(x_n − z_n) − (martingale_sum + t1 + t2 + t3)‖∞`.
    pub residual: f64,
    /// `‖F̄^{(ζ_n,x_n)}(x_n) − F̄^{(ζ_n,z_n)}(z_n)‖∞`; absent at the window end.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub start: u64,
    pub i_star: usize,
    pub rows: Vec<DecompositionRow>,
}

impl DecompositionReport {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

fn accumulate(acc: &mut [f64], beta: f64, v: &[f64]) {
    for (a, vi) in acc.iter_mut().zip(v) {
        *a = (1.0 - beta) * *a + beta * vi;
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Evaluates both sides of the martingale/Poisson identity for `x_n − z_n`
/// at every `n` of the recorded window, with `H` pinned at `i_star`.
pub fn noise_decomposition<S: SaSystem + ?Sized>(
    traj: &SaTrajectory,
    system: &S,
    i_star: usize,
) -> Result<DecompositionReport> {
    let w = window(traj)?;
    if w.len() > MAX_WINDOW {
        return Err(Error::WindowTooLarge(w.len()));
    }
    if i_star >= system.noise_state_count() {
        return Err(Error::DimensionMismatch(format!("designated state {i_star} out of range")));
    }
    let d = system.dim();
    let avg = averaged_process(traj, system)?;
    let mut acc_m = vec![0.0; d];
    let mut acc_t = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut rows = Vec::with_capacity(w.len() + 1);

    let mut current = poisson_at(system, &w.ctrls[0], &w.xs[0], &w.xs[0], i_star).map_err(at_step(w.start))?;
    for i in 0..=w.len() {
        let n = w.start + i as u64;
        let gap = sub(&w.xs[i], &avg.z[i]);
        let total: Vec<f64> = (0..d).map(|c| acc_m[c] + acc_t[0][c] + acc_t[1][c] + acc_t[2][c]).collect();
        let delta = if i < w.len() {
            let kz = system.kernel_at(&w.ctrls[i], &avg.z[i])?;
            let mu = stationary_distribution(&kz).map_err(at_step(n))?;
            let fz = stationary_mean(&f_values(system, &avg.z[i]), &mu);
            Some(vec_inf_norm(&sub(&avg.fbar[i], &fz)))
        } else {
            None
        };
        rows.push(DecompositionRow {
            n,
            residual: vec_inf_norm(&sub(&gap, &total)),
            gap,
            martingale_sum: acc_m.clone(),
            t1: acc_t[0].clone(),
            t2: acc_t[1].clone(),
            t3: acc_t[2].clone(),
            delta,
        });
        if i == w.len() {
            break;
        }

        let beta = w.betas[i];
        let (y, y_next) = (w.ys[i], w.ys[i + 1]);
        let (h_i, _, k_i) = &current;
        let next = poisson_at(system, &w.ctrls[i + 1], &w.xs[i + 1], &w.xs[i + 1], i_star).map_err(at_step(n + 1))?;
        let (mixed, _, _) = poisson_at(system, &w.ctrls[i + 1], &w.xs[i], &w.xs[i], i_star).map_err(at_step(n))?;

        let mut expected = vec![0.0; d];
        for (j, hj) in h_i.h.iter().enumerate() {
            let p = k_i.get(y, j);
            for c in 0..d {
                expected[c] += p * hj[c];
            }
        }
        let m_prime = sub(&h_i.h[y_next], &expected);
        let mart: Vec<f64> = (0..d).map(|c| w.ms[i][c] + m_prime[c]).collect();
        accumulate(&mut acc_m, beta, &mart);
        accumulate(&mut acc_t[0], beta, &sub(&h_i.h[y], &next.0.h[y_next]));
        accumulate(&mut acc_t[1], beta, &sub(&next.0.h[y_next], &mixed.h[y_next]));
        accumulate(&mut acc_t[2], beta, &sub(&mixed.h[y_next], &h_i.h[y_next]));
        current = next;
    }
    Ok(DecompositionReport { start: w.start, i_star, rows })
}
