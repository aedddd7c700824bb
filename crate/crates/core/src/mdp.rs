//! Finite discounted MDPs: validation, the Bellman optimality operator,
//! value iteration, exact policy evaluation and the suboptimality gap.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::policy::PolicyMatrix;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Default value-iteration accuracy.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance for declaring two action values tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// On-disk MDP description, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rmax: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

/// A validated finite MDP. Storage is flat and row-major in `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    rmax: f64,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
}

/// Checks a raw description against the model constraints.
pub fn validate_mdp(raw: &RawMdp) -> Result<Mdp> {
    let (ns, na) = (raw.num_states, raw.num_actions);
    if ns == 0 || na == 0 {
        return Err(Error::DimensionMismatch("empty state or action set".into()));
    }
    if !(raw.gamma > 0.0 && raw.gamma < 1.0) {
        return Err(Error::GammaOutOfRange(raw.gamma));
    }
    if !(raw.rmax > 0.0 && raw.rmax.is_finite()) {
        return Err(Error::InvalidArgument(format!("rmax {} must be positive", raw.rmax)));
    }
    if raw.rewards.len() != ns || raw.transitions.len() != ns {
        return Err(Error::DimensionMismatch("outer length differs from num_states".into()));
    }
    let mut rewards = Vec::with_capacity(ns * na);
    let mut transitions = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        if raw.rewards[s].len() != na || raw.transitions[s].len() != na {
            return Err(Error::DimensionMismatch(format!("state {s} has wrong action count")));
        }
        for a in 0..na {
            let r = raw.rewards[s][a];
            if !(0.0..=raw.rmax).contains(&r) {
                return Err(Error::RewardOutOfRange { s, a, value: r });
            }
            rewards.push(r);
            let row = &raw.transitions[s][a];
            if row.len() != ns {
                return Err(Error::DimensionMismatch(format!("row ({s},{a}) has length {}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSumViolation { s, a, sum });
            }
            transitions.extend_from_slice(row);
        }
    }
    Ok(Mdp { num_states: ns, num_actions: na, gamma: raw.gamma, rmax: raw.rmax, rewards, transitions })
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs.
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    /// Upper end of the value range, `rmax / (1 - gamma)`.
    pub fn vmax(&self) -> f64 {
        self.rmax / (1.0 - self.gamma)
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    /// Next-state distribution `p(s, a, ·)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Copy with the discount factor replaced.
    pub fn with_gamma(&self, gamma: f64) -> Result<Mdp> {
        let mut raw = self.to_raw();
        raw.gamma = gamma;
        validate_mdp(&raw)
    }

    pub fn to_raw(&self) -> RawMdp {
        let (ns, na) = (self.num_states, self.num_actions);
        RawMdp {
            num_states: ns,
            num_actions: na,
            gamma: self.gamma,
            rmax: self.rmax,
            rewards: (0..ns).map(|s| (0..na).map(|a| self.reward(s, a)).collect()).collect(),
            transitions: (0..ns)
                .map(|s| (0..na).map(|a| self.transition_row(s, a).to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Mdp> {
        let raw: RawMdp = serde_json::from_str(text)?;
        validate_mdp(&raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("MDP serializes")
    }

    pub fn load(path: &Path) -> Result<Mdp> {
        Mdp::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Expected optimal continuation `Σ_{s'} p(s,a,s') max_{a'} q(s',a')`.
    pub fn expected_max(&self, q: &QTable, s: usize, a: usize) -> f64 {
        self.transition_row(s, a)
            .iter()
            .enumerate()
            .map(|(sp, p)| p * q.row_max(sp))
            .sum()
    }
}

/// Action-value table with entries in `[0, vmax]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    vmax: f64,
}

impl QTable {
    pub fn zeros(mdp: &Mdp) -> QTable {
        QTable {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            values: vec![0.0; mdp.num_pairs()],
            vmax: mdp.vmax(),
        }
    }

    /// Builds a table from flat row-major values.
    pub fn from_values(mdp: &Mdp, values: Vec<f64>) -> Result<QTable> {
        if values.len() != mdp.num_pairs() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                mdp.num_pairs(),
                values.len()
            )));
        }
        Ok(QTable { num_states: mdp.num_states, num_actions: mdp.num_actions, values, vmax: mdp.vmax() })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn row_max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every entry lies in `[-tol, vmax + tol]`.
    pub fn in_range(&self, tol: f64) -> bool {
        self.values.iter().all(|v| *v >= -tol && *v <= self.vmax + tol)
    }

    /// Sup-norm distance to another table of equal shape.
    pub fn dist_inf(&self, other: &QTable) -> f64 {
        linalg::inf_dist(&self.values, &other.values)
    }

    fn check_shape(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states != mdp.num_states || self.num_actions != mdp.num_actions {
            return Err(Error::DimensionMismatch("Q-table shape differs from MDP".into()));
        }
        Ok(())
    }
}

/// Output of [`solve_optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub q_star: QTable,
    pub v_star: Vec<f64>,
    pub optimal_actions: Vec<Vec<usize>>,
    /// `+∞` when every action is optimal in every state.
    pub gap: f64,
    pub residual: f64,
}

impl SolveResult {
    /// Deterministic policy picking the first optimal action in each state.
    pub fn greedy_policy(&self) -> PolicyMatrix {
        let na = self.q_star.num_actions();
        PolicyMatrix::from_rows(
            self.optimal_actions
                .iter()
                .map(|acts| {
                    let mut row = vec![0.0; na];
                    row[acts[0]] = 1.0;
                    row
                })
                .collect(),
        )
    }
}

/// Applies the Bellman optimality operator once.
pub fn bellman_update(q: &QTable, mdp: &Mdp) -> Result<QTable> {
    q.check_shape(mdp)?;
    let vmax_row: Vec<f64> = (0..mdp.num_states).map(|s| q.row_max(s)).collect();
    let mut out = q.clone();
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let cont: f64 = mdp.transition_row(s, a).iter().zip(&vmax_row).map(|(p, v)| p * v).sum();
            out.set(s, a, mdp.reward(s, a) + mdp.gamma * cont);
        }
    }
    Ok(out)
}

/// Value iteration to sup-norm accuracy `tol`, then classification of
/// optimal actions with tolerance `tie_tol`.
pub fn solve_optimal(mdp: &Mdp, tol: f64, tie_tol: f64) -> Result<SolveResult> {
    if !(tol > 0.0) || !(tie_tol >= 0.0) {
        return Err(Error::InvalidArgument("tol must be positive and tieTol nonnegative".into()));
    }
    let gamma = mdp.gamma;
    let stop = tol * (1.0 - gamma) / gamma;
    // Starting from zero the distance to Q* is at most vmax.
    let needed = ((stop / mdp.vmax()).ln() / gamma.ln()).ceil().max(1.0);
    let max_iters = (10.0 * needed) as usize + 1000;
    let mut q = QTable::zeros(mdp);
    let mut converged = false;
    for _ in 0..max_iters {
        let next = bellman_update(&q, mdp)?;
        let diff = next.dist_inf(&q);
        q = next;
        if diff <= stop {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(max_iters));
    }
    let residual = bellman_update(&q, mdp)?.dist_inf(&q);
    let v_star: Vec<f64> = (0..mdp.num_states).map(|s| q.row_max(s)).collect();
    let mut optimal_actions = Vec::with_capacity(mdp.num_states);
    let mut gap = f64::INFINITY;
    for (s, &v) in v_star.iter().enumerate() {
        let mut opt = Vec::new();
        for a in 0..mdp.num_actions {
            let qa = q.get(s, a);
            if qa >= v - tie_tol {
                opt.push(a);
            } else {
                gap = gap.min(v - qa);
            }
        }
        optimal_actions.push(opt);
    }
    Ok(SolveResult { q_star: q, v_star, optimal_actions, gap, residual })
}

/// Exact value of a stationary randomized policy by a direct linear solve.
pub fn policy_value(mdp: &Mdp, policy: &PolicyMatrix) -> Result<Vec<f64>> {
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(Error::DimensionMismatch("policy shape differs from MDP".into()));
    }
    for s in 0..ns {
        let row = policy.row(s);
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::PolicyRowNotStochastic(s));
        }
    }
    let mut a_mat = DMatrix::<f64>::identity(ns, ns);
    let mut r_pi = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            let pa = policy.row(s)[a];
            if pa == 0.0 {
                continue;
            }
            r_pi[s] += pa * mdp.reward(s, a);
            for (sp, p) in mdp.transition_row(s, a).iter().enumerate() {
                a_mat[(s, sp)] -= mdp.gamma * pa * p;
            }
        }
    }
    linalg::solve_vec(a_mat, &r_pi)
}
