//! Softmax and smoothed ε-greedy action distributions, their derivatives
//! and lower bounds, induced state-action kernels, contraction factors and
//! the softmax sensitivity grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, Kernel};
use crate::mdp::{Mdp, QTable, DEFAULT_TIE_TOL};

/// Temperatures below this are treated as the exact greedy limit.
pub const GREEDY_LAMBDA: f64 = 1e-12;

/// Exploration control `ζ = (ε, λ)`; Boltzmann runs keep `ε = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlValue {
    pub epsilon: f64,
    pub lambda: f64,
}

impl ControlValue {
    pub fn boltzmann(lambda: f64) -> ControlValue {
        ControlValue { epsilon: 0.0, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidControl(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if self.lambda < 0.0 || self.lambda.is_nan() {
            return Err(Error::NegativeLambda(self.lambda));
        }
        Ok(())
    }
}

/// One probability row over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMatrix {
    rows: Vec<Vec<f64>>,
}

impl PolicyMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> PolicyMatrix {
        PolicyMatrix { rows }
    }

    /// Uniform policy.
    pub fn uniform(num_states: usize, num_actions: usize) -> PolicyMatrix {
        PolicyMatrix { rows: vec![vec![1.0 / num_actions as f64; num_actions]; num_states] }
    }

    /// Smoothed ε-greedy policy of a Q-table (softmax when `ε = 0`).
    pub fn from_q(q: &QTable, ctrl: ControlValue) -> Result<PolicyMatrix> {
        let rows = (0..q.num_states()).map(|s| seg_policy(q.row(s), ctrl)).collect::<Result<_>>()?;
        Ok(PolicyMatrix { rows })
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// `σ(q/λ)` with max-subtraction; below [`GREEDY_LAMBDA`] the exact greedy
/// limit with uniform mass over actions tied within the shared tie tolerance.
pub fn softmax_policy(q_row: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::NegativeLambda(lambda));
    }
    let top = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lambda < GREEDY_LAMBDA {
        let ties: Vec<bool> = q_row.iter().map(|q| *q >= top - DEFAULT_TIE_TOL).collect();
        let count = ties.iter().filter(|&&t| t).count() as f64;
        return Ok(ties.iter().map(|&t| if t { 1.0 / count } else { 0.0 }).collect());
    }
    let w: Vec<f64> = q_row.iter().map(|q| ((q - top) / lambda).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// `ε/|A| + (1 − ε) σ(q/λ)`.
pub fn seg_policy(q_row: &[f64], ctrl: ControlValue) -> Result<Vec<f64>> {
    ctrl.validate()?;
    let sigma = softmax_policy(q_row, ctrl.lambda)?;
    if ctrl.epsilon == 0.0 {
        return Ok(sigma);
    }
    let u = ctrl.epsilon / q_row.len() as f64;
    Ok(sigma.into_iter().map(|p| u + (1.0 - ctrl.epsilon) * p).collect())
}

/// Closed-form softmax derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxGradients {
    /// `dq[a][b] = ∂σ(a)/∂q(b)`.
    pub dq: Vec<Vec<f64>>,
    /// `σ(a)·Σ_{b≠a} σ(b) q(b) / λ²`.
    pub dlambda_printed: Vec<f64>,
    /// `σ(a)·Σ_b σ(b)(q(b) − q(a)) / λ²`, the exact derivative.
    pub dlambda_full: Vec<f64>,
}

pub fn softmax_gradients(q_row: &[f64], lambda: f64) -> Result<SoftmaxGradients> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::NegativeLambda(lambda));
    }
    if lambda < GREEDY_LAMBDA {
        return Err(Error::LambdaUnderflow(lambda));
    }
    let s = softmax_policy(q_row, lambda)?;
    let n = q_row.len();
    let l2 = lambda * lambda;
    let dq = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| if a == b { s[a] * (1.0 - s[a]) / lambda } else { -s[a] * s[b] / lambda })
                .collect()
        })
        .collect();
    let mean_q: f64 = s.iter().zip(q_row).map(|(p, q)| p * q).sum();
    let dlambda_printed = (0..n)
        .map(|a| s[a] * (0..n).filter(|&b| b != a).map(|b| s[b] * q_row[b]).sum::<f64>() / l2)
        .collect();
    let dlambda_full = (0..n).map(|a| s[a] * (mean_q - q_row[a]) / l2).collect();
    Ok(SoftmaxGradients { dq, dlambda_printed, dlambda_full })
}

/// Smallest action probability any `Q` in the value range can induce.
pub fn action_prob_lower_bound(ctrl: ControlValue, rmax: f64, gamma: f64, num_actions: usize) -> f64 {
    let na = num_actions as f64;
    let soft = if ctrl.lambda < GREEDY_LAMBDA {
        0.0
    } else {
        1.0 / (na * (rmax / (ctrl.lambda * (1.0 - gamma))).exp())
    };
    ctrl.epsilon / na + (1.0 - ctrl.epsilon) * soft
}

/// Chain on state-action pairs, `p((s,a),(s',a')) = p(s,a,s') π(s',a')`,
/// indexed by `s·|A| + a`.
pub fn induced_kernel(mdp: &Mdp, policy: &PolicyMatrix) -> Result<Kernel> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(Error::DimensionMismatch("policy shape differs from MDP".into()));
    }
    let n = ns * na;
    let mut data = vec![0.0; n * n];
    for s in 0..ns {
        for a in 0..na {
            let y = s * na + a;
            for (sp, p) in mdp.transition_row(s, a).iter().enumerate() {
                for ap in 0..na {
                    data[y * n + sp * na + ap] = p * policy.row(sp)[ap];
                }
            }
        }
    }
    Kernel::from_flat(n, data)
}

/// Returns `(α̃, μ_min)` with `α̃ = (1 − γ) μ_min` for the induced chain.
pub fn contraction_factor(mdp: &Mdp, policy: &PolicyMatrix) -> Result<(f64, f64)> {
    let mu = stationary_distribution(&induced_kernel(mdp, policy)?)?;
    Ok(((1.0 - mdp.gamma()) * mu.mu_min, mu.mu_min))
}

/// One cell of the two-action sensitivity grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityCell {
    pub x: f64,
    pub lambda: f64,
    pub dp_dx_abs: f64,
    pub dp_dlambda_abs: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates `|∂P/∂x|` and `|∂P/∂λ|` for `P(x, λ) = 1/(1 + e^{−x/λ})` on a
/// `resolution × resolution` grid, x-major.
pub fn sensitivity_grid(
    x_range: (f64, f64),
    lambda_range: (f64, f64),
    resolution: usize,
) -> Result<Vec<SensitivityCell>> {
    if !(lambda_range.0 > 0.0 && lambda_range.1 > 0.0) {
        return Err(Error::NegativeLambda(lambda_range.0.min(lambda_range.1)));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let xs = linspace(x_range.0, x_range.1, resolution);
    let ls = linspace(lambda_range.0, lambda_range.1, resolution);
    let mut cells = Vec::with_capacity(resolution * resolution);
    for &x in &xs {
        for &lambda in &ls {
            let p = 1.0 / (1.0 + (-x / lambda).exp());
            let core = p * (1.0 - p);
            cells.push(SensitivityCell {
                x,
                lambda,
                dp_dx_abs: core / lambda,
                dp_dlambda_abs: x.abs() * core / (lambda * lambda),
            });
        }
    }
    Ok(cells)
}

/// Writes the grid as CSV with columns `x, lambda, dP_dx_abs, dP_dlambda_abs`.
pub fn write_sensitivity_csv<W: Write>(cells: &[SensitivityCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "lambda", "dP_dx_abs", "dP_dlambda_abs"])?;
    for c in cells {
        w.write_record([c.x.to_string(), c.lambda.to_string(), c.dp_dx_abs.to_string(), c.dp_dlambda_abs.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
