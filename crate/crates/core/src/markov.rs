//! Exact analysis of finite Markov chains: stationary laws, hitting times,
//! the MDP diameter, Poisson equations and kernel-deviation checks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{Mdp, ROW_SUM_TOL};

/// Entries at or below this floor are treated as absent edges.
pub const IRREDUCIBILITY_FLOOR: f64 = 1e-14;
/// Largest number of deterministic policies the diameter search visits.
pub const DIAMETER_POLICY_CAP: f64 = 1e6;

/// Row-stochastic transition matrix over `0..size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct Kernel {
    size: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    size: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawKernel> for Kernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Kernel> {
        if raw.rows.len() != raw.size {
            return Err(Error::DimensionMismatch("row count differs from size".into()));
        }
        Kernel::new(raw.rows)
    }
}

impl From<Kernel> for RawKernel {
    fn from(k: Kernel) -> RawKernel {
        RawKernel { size: k.size, rows: (0..k.size).map(|i| k.row(i).to_vec()).collect() }
    }
}

impl Kernel {
    /// Checked constructor from nested rows.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Kernel> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::DimensionMismatch(format!("row {i} has length {}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Kernel::from_flat(size, data)
    }

    /// Checked constructor from flat row-major storage.
    pub fn from_flat(size: usize, data: Vec<f64>) -> Result<Kernel> {
        if size == 0 || data.len() != size * size {
            return Err(Error::DimensionMismatch("kernel storage has wrong length".into()));
        }
        for i in 0..size {
            let row = &data[i * size..(i + 1) * size];
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSumViolation { s: i, a: 0, sum });
            }
        }
        Ok(Kernel { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.size, self.size, &self.data)
    }

    /// Strong connectivity of the graph of entries above the floor.
    pub fn is_irreducible(&self) -> bool {
        let forward = reach(self.size, 0, |i, j| self.get(i, j) > IRREDUCIBILITY_FLOOR);
        let backward = reach(self.size, 0, |i, j| self.get(j, i) > IRREDUCIBILITY_FLOOR);
        forward.iter().all(|&b| b) && backward.iter().all(|&b| b)
    }

    /// Sup-norm operator distance `‖P - P'‖∞`.
    pub fn dist_inf(&self, other: &Kernel) -> Result<f64> {
        check_same_size(self, other)?;
        Ok(linalg::mat_inf_norm(&(self.to_matrix() - other.to_matrix())))
    }
}

fn check_same_size(p: &Kernel, q: &Kernel) -> Result<()> {
    if p.size != q.size {
        return Err(Error::DimensionMismatch(format!("kernel sizes {} and {}", p.size, q.size)));
    }
    Ok(())
}

/// Nodes reachable from `start` along edges where `edge(i, j)` holds.
fn reach(n: usize, start: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Stationary law of an irreducible kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    pub mu_min: f64,
}

impl StationaryDistribution {
    /// `‖μP − μ‖∞`.
    pub fn residual(&self, k: &Kernel) -> f64 {
        (0..k.size())
            .map(|j| {
                let mp: f64 = (0..k.size()).map(|i| self.probs[i] * k.get(i, j)).sum();
                (mp - self.probs[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `μP = μ`, `Σμ = 1` with the last balance equation replaced by
/// the normalization.
pub fn stationary_distribution(k: &Kernel) -> Result<StationaryDistribution> {
    if !k.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = k.size();
    let mut a = (DMatrix::<f64>::identity(n, n) - k.to_matrix()).transpose();
    let mut b = vec![0.0; n];
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let mut probs = linalg::solve_vec(a, &b)?;
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let mu_min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StationaryDistribution { probs, mu_min })
}

/// Expected hitting times of `target` from every state; zero at the target.
pub fn expected_hitting_times(k: &Kernel, target: usize) -> Result<Vec<f64>> {
    if target >= k.size() {
        return Err(Error::DimensionMismatch(format!("target {target} out of range")));
    }
    if !k.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    hitting_times_to(k.size(), target, |i, j| k.get(i, j))
}

/// Solves `h(i) = 1 + Σ_j p(i,j) h(j)` for `i ≠ target`, `h(target) = 0`.
/// The caller guarantees that the target is reachable from every state.
fn hitting_times_to(n: usize, target: usize, p: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != target).collect();
    let m = others.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (r, &i) in others.iter().enumerate() {
        for (c, &j) in others.iter().enumerate() {
            a[(r, c)] -= p(i, j);
        }
    }
    let h_red = linalg::solve_vec(a, &vec![1.0; m])?;
    let mut h = vec![0.0; n];
    for (r, &i) in others.iter().enumerate() {
        h[i] = h_red[r].max(0.0);
    }
    Ok(h)
}

/// Worst-case expected hitting time over deterministic stationary
/// policies and ordered state pairs. Returns `+∞` when some policy leaves
/// a pair disconnected while another policy connects it.
pub fn mdp_diameter(mdp: &Mdp) -> Result<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let count = (na as f64).powi(ns as i32);
    if count > DIAMETER_POLICY_CAP {
        return Err(Error::InstanceTooLarge(format!("{na}^{ns} deterministic policies")));
    }
    if ns == 1 {
        return Ok(0.0);
    }
    let count = count as usize;
    let per_policy: Vec<(f64, Vec<bool>)> = (0..count)
        .into_par_iter()
        .map(|code| {
            let mut actions = vec![0usize; ns];
            let mut c = code;
            for slot in actions.iter_mut() {
                *slot = c % na;
                c /= na;
            }
            let p = |i: usize, j: usize| mdp.transition_row(i, actions[i])[j];
            let mut worst = 0.0_f64;
            let mut connected = vec![false; ns * ns];
            for t in 0..ns {
                let reaches = reach(ns, t, |i, j| p(j, i) > IRREDUCIBILITY_FLOOR);
                for s in 0..ns {
                    connected[s * ns + t] = reaches[s];
                }
                if reaches.iter().all(|&b| b) {
                    match hitting_times_to(ns, t, p) {
                        Ok(h) => worst = worst.max(h.iter().copied().fold(0.0, f64::max)),
                        Err(_) => worst = f64::INFINITY,
                    }
                } else {
                    worst = f64::INFINITY;
                }
            }
            (worst, connected)
        })
        .collect();
    for s in 0..ns {
        for t in 0..ns {
            if !per_policy.iter().any(|(_, c)| c[s * ns + t]) {
                return Err(Error::Unreachable { from: s, to: t });
            }
        }
    }
    Ok(per_policy.iter().map(|(w, _)| *w).fold(0.0, f64::max))
}

/// Solution of the Poisson equation pinned at a designated state.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// `h[y]` is the d-dimensional value at noise state `y`.
    pub h: Vec<Vec<f64>>,
    pub designated: usize,
}

/// Stationary mean `Σ_j μ(j) F(j)`.
pub fn stationary_mean(f_values: &[Vec<f64>], mu: &StationaryDistribution) -> Vec<f64> {
    let d = f_values.first().map_or(0, |v| v.len());
    let mut mean = vec![0.0; d];
    for (fj, &m) in f_values.iter().zip(&mu.probs) {
        for (acc, v) in mean.iter_mut().zip(fj) {
            *acc += m * v;
        }
    }
    mean
}

/// Solves `H(i) = F(i) − Σμ(j)F(j) + Σ p(i,j)H(j)` with `H(i*) = 0`.
pub fn solve_poisson(
    k: &Kernel,
    f_values: &[Vec<f64>],
    mu: &StationaryDistribution,
    i_star: usize,
) -> Result<PoissonSolution> {
    let n = k.size();
    if f_values.len() != n || mu.probs.len() != n || i_star >= n {
        return Err(Error::DimensionMismatch("Poisson inputs disagree in size".into()));
    }
    if !k.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let d = f_values[0].len();
    let mean = stationary_mean(f_values, mu);
    let mut a = DMatrix::<f64>::identity(n, n) - k.to_matrix();
    let mut b = DMatrix::<f64>::zeros(n, d);
    for i in 0..n {
        if f_values[i].len() != d {
            return Err(Error::DimensionMismatch("F values differ in dimension".into()));
        }
        if i == i_star {
            continue;
        }
        for c in 0..d {
            b[(i, c)] = f_values[i][c] - mean[c];
        }
    }
    for j in 0..n {
        a[(i_star, j)] = if j == i_star { 1.0 } else { 0.0 };
    }
    let x = linalg::solve(a, b)?;
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    h[i_star] = vec![0.0; d];
    Ok(PoissonSolution { h, designated: i_star })
}

/// Entrywise sup of the Poisson identity residual over all states.
pub fn poisson_residual(
    k: &Kernel,
    f_values: &[Vec<f64>],
    mu: &StationaryDistribution,
    sol: &PoissonSolution,
) -> f64 {
    let mean = stationary_mean(f_values, mu);
    let mut worst = 0.0_f64;
    for i in 0..k.size() {
        for c in 0..mean.len() {
            let ph: f64 = (0..k.size()).map(|j| k.get(i, j) * sol.h[j][c]).sum();
            let r = sol.h[i][c] - (f_values[i][c] - mean[c] + ph);
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Result of comparing ℓ-step kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// `‖Pℓ − P'ℓ‖∞`.
    pub deviation: f64,
    /// `ℓ·‖P − P'‖∞`.
    pub bound: f64,
    pub holds: bool,
}

/// Compares `P^ℓ` and `P'^ℓ` by exact matrix powers.
pub fn multistep_kernel_deviation(p: &Kernel, p_prime: &Kernel, ell: u32) -> Result<DeviationReport> {
    check_same_size(p, p_prime)?;
    if ell == 0 {
        return Err(Error::InvalidArgument("ell must be positive".into()));
    }
    let (m, mp) = (p.to_matrix(), p_prime.to_matrix());
    let (mut a, mut b) = (m.clone(), mp.clone());
    for _ in 1..ell {
        a = &a * &m;
        b = &b * &mp;
    }
    let deviation = linalg::mat_inf_norm(&(a - b));
    let bound = ell as f64 * linalg::mat_inf_norm(&(m - mp));
    Ok(DeviationReport { deviation, bound, holds: deviation <= bound + 1e-12 })
}

/// Outcome of the stationary-law sensitivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    /// `‖μ − μ'‖∞`.
    pub lhs: f64,
    /// `constant·‖P − P'‖∞ / muMin`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖μ − μ'‖∞ ≤ constant·‖P − P'‖∞ / muMin`.
pub fn stationary_sensitivity_check(
    p: &Kernel,
    p_prime: &Kernel,
    constant: f64,
    mu_min: f64,
) -> Result<SensitivityReport> {
    check_same_size(p, p_prime)?;
    let mu = stationary_distribution(p)?;
    let mu_p = stationary_distribution(p_prime)?;
    let lhs = linalg::inf_dist(&mu.probs, &mu_p.probs);
    let rhs = constant * p.dist_inf(p_prime)? / mu_min;
    Ok(SensitivityReport { lhs, rhs, holds: lhs <= rhs })
}

/// Smallest stationary state probability over deterministic stationary
/// policies, `min_s inf_π Σ_a μ^π(s, a)`. Maximizing the mean return time
/// to a state is attained by a deterministic policy, so enumeration gives
/// the infimum over all stationary policies. Reducible chains contribute 0.
pub fn min_state_occupancy(mdp: &Mdp) -> Result<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let count = (na as f64).powi(ns as i32);
    if count > DIAMETER_POLICY_CAP {
        return Err(Error::InstanceTooLarge(format!("{na}^{ns} deterministic policies")));
    }
    let best = (0..count as usize)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut rows = Vec::with_capacity(ns);
            for s in 0..ns {
                rows.push(mdp.transition_row(s, c % na).to_vec());
                c /= na;
            }
            match Kernel::new(rows).and_then(|k| stationary_distribution(&k)) {
                Ok(mu) => mu.mu_min,
                Err(_) => 0.0,
            }
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}
