//! Boltzmann and smoothed ε-greedy Q-learning, both as direct online loops
//! and as [`SaSystem`] instantiations.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::checkpoint_grid;
use crate::markov::{mdp_diameter, min_state_occupancy, Kernel};
use crate::mdp::{solve_optimal, Mdp, QTable, DEFAULT_TIE_TOL, DEFAULT_TOL};
use crate::policy::{induced_kernel, seg_policy, ControlValue, PolicyMatrix};
use crate::rng::{sample_index, RngState, StreamPair};
use crate::sa::{
    check_conditions, check_domain, Algo, BoundSpec, ConditionResult, Extras, SaSystem, SaTrajectory, Snapshot,
};
use crate::schedule::{Schedule, ScheduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QAlgo {
    Boltzmann,
    Seg,
}

/// Parameters of one run. Schedules are indexed from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QlearnConfig {
    pub algo: QAlgo,
    pub stepsize: Schedule,
    pub temperature: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_schedule: Option<Schedule>,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Row-major initial Q-table; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_state: usize,
    /// Checkpoint labels; `{0} ∪ ⌊1.2^k⌋ ∪ {steps}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default)]
    pub strict_conditions: bool,
}

impl QlearnConfig {
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        self.stepsize.validate()?;
        self.temperature.validate()?;
        match (self.algo, &self.epsilon_schedule) {
            (QAlgo::Seg, Some(e)) => e.validate()?,
            (QAlgo::Seg, None) => return Err(Error::MissingParameter("epsilonSchedule".into())),
            (QAlgo::Boltzmann, _) => {}
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if self.initial_state >= mdp.num_states() {
            return Err(Error::DimensionMismatch(format!("initial state {}", self.initial_state)));
        }
        if let Some(q0) = &self.q0 {
            let q = QTable::from_values(mdp, q0.clone())?;
            if !q.in_range(0.0) {
                return Err(Error::InvalidArgument("q0 outside [0, rmax/(1-gamma)]".into()));
            }
        }
        Ok(())
    }

    pub fn initial_q(&self, mdp: &Mdp) -> Result<QTable> {
        match &self.q0 {
            Some(v) => QTable::from_values(mdp, v.clone()),
            None => Ok(QTable::zeros(mdp)),
        }
    }

    pub fn checkpoint_labels(&self) -> Vec<u64> {
        let mut c = self.checkpoints.clone().unwrap_or_else(|| checkpoint_grid(1.2, self.steps));
        c.retain(|&n| n <= self.steps);
        c.sort_unstable();
        c.dedup();
        c
    }

    /// `ζ_n`.
    pub fn control(&self, n: u64) -> Result<ControlValue> {
        let lambda = self.temperature.eval(n)?;
        let epsilon = match (self.algo, &self.epsilon_schedule) {
            (QAlgo::Seg, Some(e)) => e.eval(n)?.min(1.0),
            _ => 0.0,
        };
        Ok(ControlValue { epsilon, lambda })
    }
}

/// `Q(s,a) ← Q(s,a) + β (r + γ max Q(s',·) − Q(s,a))`; other entries untouched.
pub fn q_update(q: &mut QTable, gamma: f64, s: usize, a: usize, r: f64, s_next: usize, beta: f64) {
    let old = q.get(s, a);
    q.set(s, a, old + beta * (r + gamma * q.row_max(s_next) - old));
}

/// `F(Q, (s,a))`: `Q` with entry `(s,a)` replaced by `(𝒯Q)(s,a)`.
pub fn f_map(q: &[f64], y: usize, mdp: &Mdp) -> Vec<f64> {
    let na = mdp.num_actions();
    let (s, a) = (y / na, y % na);
    let mut out = q.to_vec();
    let backup: f64 = mdp.transition_row(s, a).iter().enumerate().map(|(sp, p)| p * row_max(q, sp, na)).sum();
    out[y] = mdp.reward(s, a) + mdp.gamma() * backup;
    out
}

/// `M_{n+1}`: zero except at `(s,a)`, where it is
/// `γ (max Q(s',·) − Σ_{s''} p(s,a,s'') max Q(s'',·))`.
pub fn martingale_noise(q: &[f64], s: usize, a: usize, s_next: usize, mdp: &Mdp) -> Vec<f64> {
    let na = mdp.num_actions();
    let mut out = vec![0.0; q.len()];
    let mean: f64 = mdp.transition_row(s, a).iter().enumerate().map(|(sp, p)| p * row_max(q, sp, na)).sum();
    out[s * na + a] = mdp.gamma() * (row_max(q, s_next, na) - mean);
    out
}

fn row_max(q: &[f64], s: usize, na: usize) -> f64 {
    q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Q-learning viewed as a stochastic-approximation system over
/// state-action pairs `y = s·|A| + a`.
pub struct QlearnSystem<'a> {
    mdp: &'a Mdp,
    config: QlearnConfig,
}

impl<'a> QlearnSystem<'a> {
    pub fn new(mdp: &'a Mdp, config: QlearnConfig) -> Result<QlearnSystem<'a>> {
        config.validate(mdp)?;
        Ok(QlearnSystem { mdp, config })
    }

    fn policy_row(&self, ctrl: &ControlValue, x: &[f64], s: usize) -> Result<Vec<f64>> {
        let na = self.mdp.num_actions();
        seg_policy(&x[s * na..(s + 1) * na], *ctrl)
    }
}

impl SaSystem for QlearnSystem<'_> {
    fn dim(&self) -> usize {
        self.mdp.num_pairs()
    }

    fn noise_state_count(&self) -> usize {
        self.mdp.num_pairs()
    }

    fn stepsize(&self) -> &Schedule {
        &self.config.stepsize
    }

    fn control(&self, n: u64) -> Result<ControlValue> {
        self.config.control(n)
    }

    fn kernel_at(&self, ctrl: &ControlValue, x: &[f64]) -> Result<Kernel> {
        let q = QTable::from_values(self.mdp, x.to_vec())?;
        induced_kernel(self.mdp, &PolicyMatrix::from_q(&q, *ctrl)?)
    }

    fn update_map(&self, x: &[f64], y: usize) -> Vec<f64> {
        f_map(x, y, self.mdp)
    }

    fn martingale(&self, x: &[f64], y: usize, exo: usize) -> Vec<f64> {
        let na = self.mdp.num_actions();
        martingale_noise(x, y / na, y % na, exo, self.mdp)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.mdp.vmax())
    }

    fn initial_iterate(&self) -> Vec<f64> {
        self.config.initial_q(self.mdp).map(QTable::into_values).unwrap_or_default()
    }

    fn initial_noise(&self, ctrl: &ControlValue, x: &[f64], rng: &mut StreamPair) -> Result<usize> {
        let s = self.config.initial_state;
        let a = sample_index(&self.policy_row(ctrl, x, s)?, &mut rng.action);
        Ok(s * self.mdp.num_actions() + a)
    }

    /// Draws only the next state; the action is drawn in [`SaSystem::settle`].
    fn draw_exogenous(&self, _ctrl: &ControlValue, _x: &[f64], y: usize, rng: &mut StreamPair) -> Result<usize> {
        let na = self.mdp.num_actions();
        Ok(sample_index(self.mdp.transition_row(y / na, y % na), &mut rng.transition))
    }

    fn settle(
        &self,
        next_ctrl: &ControlValue,
        next_x: &[f64],
        _y: usize,
        exo: usize,
        rng: &mut StreamPair,
    ) -> Result<usize> {
        let a = sample_index(&self.policy_row(next_ctrl, next_x, exo)?, &mut rng.action);
        Ok(exo * self.mdp.num_actions() + a)
    }
}

/// Everything needed to resume a run exactly after `n` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckpointSnapshot {
    pub n: u64,
    pub q: Vec<f64>,
    pub state: usize,
    /// Action already drawn for the next update.
    pub action: usize,
    pub ctrl: ControlValue,
    /// Schedule index of the next update.
    pub schedule_cursor: u64,
    pub rng_state: RngState,
    /// `Σ_{m<n} r(s_m, a_m)`.
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: QlearnConfig,
    pub trajectory: SaTrajectory,
    pub checkpoints: Vec<CheckpointSnapshot>,
    /// Failing condition ids when conditions were checked in warn mode.
    pub warnings: Vec<String>,
}

/// Online learner shared by runs, resumes and continuation rollouts.
pub struct Learner<'a> {
    mdp: &'a Mdp,
    config: &'a QlearnConfig,
}

/// Mutable state of an online run after `n` updates.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub n: u64,
    pub q: QTable,
    pub state: usize,
    pub action: usize,
    pub ctrl: ControlValue,
    pub rng: StreamPair,
    pub cumulative_reward: f64,
}

impl LearnerState {
    pub fn snapshot(&self) -> CheckpointSnapshot {
        CheckpointSnapshot {
            n: self.n,
            q: self.q.values().to_vec(),
            state: self.state,
            action: self.action,
            ctrl: self.ctrl,
            schedule_cursor: self.n + 1,
            rng_state: self.rng.state(),
            cumulative_reward: self.cumulative_reward,
        }
    }
}

impl<'a> Learner<'a> {
    pub fn new(mdp: &'a Mdp, config: &'a QlearnConfig) -> Learner<'a> {
        Learner { mdp, config }
    }

    fn sample_action(&self, q: &QTable, s: usize, ctrl: &ControlValue, rng: &mut StreamPair) -> Result<usize> {
        Ok(sample_index(&seg_policy(q.row(s), *ctrl)?, &mut rng.action))
    }

    /// State before the first update, on stream pair `(seed, 0)`.
    pub fn start(&self) -> Result<LearnerState> {
        let mut rng = StreamPair::new(self.config.seed, 0);
        let q = self.config.initial_q(self.mdp)?;
        let ctrl = self.config.control(1)?;
        let state = self.config.initial_state;
        let action = self.sample_action(&q, state, &ctrl, &mut rng)?;
        Ok(LearnerState { n: 0, q, state, action, ctrl, rng, cumulative_reward: 0.0 })
    }

    /// Rebuilds the state stored in a snapshot.
    pub fn restore(&self, snap: &CheckpointSnapshot) -> Result<LearnerState> {
        Ok(LearnerState {
            n: snap.n,
            q: QTable::from_values(self.mdp, snap.q.clone())?,
            state: snap.state,
            action: snap.action,
            ctrl: snap.ctrl,
            rng: StreamPair::restore(&snap.rng_state),
            cumulative_reward: snap.cumulative_reward,
        })
    }

    /// Replaces the pending action by a fresh draw from the current policy.
    pub fn redraw_action(&self, st: &mut LearnerState) -> Result<()> {
        st.action = self.sample_action(&st.q, st.state, &st.ctrl, &mut st.rng)?;
        Ok(())
    }

    /// One update; returns the reward collected.
    pub fn step(&self, st: &mut LearnerState) -> Result<f64> {
        let beta = self.config.stepsize.eval(st.n + 1)?;
        let (s, a) = (st.state, st.action);
        let s_next = sample_index(self.mdp.transition_row(s, a), &mut st.rng.transition);
        let r = self.mdp.reward(s, a);
        q_update(&mut st.q, self.mdp.gamma(), s, a, r, s_next, beta);
        check_domain(&[st.q.get(s, a)], (0.0, self.mdp.vmax()), st.n + 1)?;
        st.n += 1;
        st.cumulative_reward += r;
        st.ctrl = self.config.control(st.n + 1)?;
        st.state = s_next;
        st.action = self.sample_action(&st.q, s_next, &st.ctrl, &mut st.rng)?;
        Ok(r)
    }

    /// Advances to `until` updates, snapshotting at every label in `labels`.
    pub fn run_to(&self, st: &mut LearnerState, until: u64, labels: &[u64], out: &mut Vec<CheckpointSnapshot>) -> Result<()> {
        let from = st.n;
        let mut pending = labels.iter().copied().filter(|&n| n >= from && n <= until).peekable();
        loop {
            if pending.peek() == Some(&st.n) {
                pending.next();
                out.push(st.snapshot());
            }
            if st.n >= until {
                return Ok(());
            }
            self.step(st)?;
        }
    }
}

fn run_direct(mdp: &Mdp, config: &QlearnConfig, expected: QAlgo) -> Result<RunResult> {
    if config.algo != expected {
        return Err(Error::InvalidArgument(format!("config algo is {:?}", config.algo)));
    }
    config.validate(mdp)?;
    let warnings = enforce_conditions(mdp, config)?;
    let learner = Learner::new(mdp, config);
    let mut st = learner.start()?;
    let labels = config.checkpoint_labels();
    let mut checkpoints = Vec::with_capacity(labels.len());
    learner.run_to(&mut st, config.steps, &labels, &mut checkpoints)?;
    let trajectory = trajectory_from(config, &checkpoints, &st, mdp.num_actions())?;
    Ok(RunResult { config: config.clone(), trajectory, checkpoints, warnings })
}

fn trajectory_from(config: &QlearnConfig, cps: &[CheckpointSnapshot], st: &LearnerState, na: usize) -> Result<SaTrajectory> {
    let snapshots = cps
        .iter()
        .map(|c| {
            let beta = if c.n < config.steps { config.stepsize.eval(c.n + 1)? } else { f64::NAN };
            Ok(Snapshot { n: c.n, x: c.q.clone(), y: c.state * na + c.action, ctrl: c.ctrl, beta })
        })
        .collect::<Result<_>>()?;
    Ok(SaTrajectory {
        seed: config.seed,
        steps: config.steps,
        records: Vec::new(),
        snapshots,
        window: None,
        final_x: st.q.values().to_vec(),
        final_y: st.state * na + st.action,
        final_rng: st.rng.state(),
    })
}

/// Boltzmann Q-learning: `a_n ∼ softmax(Q_n(s_n,·)/λ_n)`.
pub fn run_boltzmann(mdp: &Mdp, config: &QlearnConfig) -> Result<RunResult> {
    run_direct(mdp, config, QAlgo::Boltzmann)
}

/// Smoothed ε-greedy Q-learning.
pub fn run_seg(mdp: &Mdp, config: &QlearnConfig) -> Result<RunResult> {
    run_direct(mdp, config, QAlgo::Seg)
}

/// Dispatches on `config.algo`.
pub fn run(mdp: &Mdp, config: &QlearnConfig) -> Result<RunResult> {
    run_direct(mdp, config, config.algo)
}

/// Continues a run from `snap` for `steps` more updates, snapshotting at `labels`.
pub fn resume(mdp: &Mdp, config: &QlearnConfig, snap: &CheckpointSnapshot, steps: u64, labels: &[u64]) -> Result<Vec<CheckpointSnapshot>> {
    let learner = Learner::new(mdp, config);
    let mut st = learner.restore(snap)?;
    let mut out = Vec::new();
    learner.run_to(&mut st, snap.n + steps, labels, &mut out)?;
    Ok(out)
}

/// Runs one copy of `config` per seed in parallel; results are in seed order.
pub fn run_seeds(mdp: &Mdp, config: &QlearnConfig, seeds: &[u64]) -> Result<Vec<RunResult>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = QlearnConfig { seed, ..config.clone() };
            run(mdp, &cfg).map_err(|e| Error::SeedFailed { seed, source: Box::new(e) })
        })
        .collect()
}

/// `(n, ‖Q_n − Q*‖∞)` at every checkpoint.
pub fn error_series(run: &RunResult, q_star: &QTable) -> Result<Vec<(u64, f64)>> {
    run.checkpoints
        .iter()
        .map(|c| {
            if c.q.len() != q_star.values().len() {
                return Err(Error::DimensionMismatch("checkpoint and Q* differ in size".into()));
            }
            let e = c.q.iter().zip(q_star.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((c.n, e))
        })
        .collect()
}

/// Run export: `n, err_inf, s_n, cumulative_reward`.
pub fn write_run_csv<W: Write>(run: &RunResult, q_star: &QTable, out: W) -> Result<()> {
    let errors = error_series(run, q_star)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "err_inf", "s_n", "cumulative_reward"])?;
    for (c, (_, e)) in run.checkpoints.iter().zip(&errors) {
        w.write_record([c.n.to_string(), e.to_string(), c.state.to_string(), c.cumulative_reward.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Exponents and problem quantities implied by a run configuration.
///
/// Requires a power-law stepsize and the schedule family of the algorithm:
/// inverse-log temperature for Boltzmann, power-law ε and temperature for SεG.
pub fn bound_inputs(mdp: &Mdp, config: &QlearnConfig) -> Result<(BoundSpec, Algo, Extras)> {
    let form = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSchedule(format!("conditions need {what}")))
        }
    };
    form(config.stepsize.kind == ScheduleKind::Power, "a power-law stepsize")?;
    let solved = solve_optimal(mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?;
    let mut extras = Extras {
        gap: solved.gap.is_finite().then_some(solved.gap),
        rmax: Some(mdp.rmax()),
        gamma: Some(mdp.gamma()),
        mu_min_s: Some(min_state_occupancy(mdp)?),
        num_states: Some(mdp.num_states()),
        num_actions: Some(mdp.num_actions()),
        diameter: Some(mdp_diameter(mdp)?),
        q_row_l1: Some(
            (0..mdp.num_states())
                .map(|s| solved.q_star.row(s).iter().map(|v| v.abs()).sum::<f64>())
                .fold(f64::INFINITY, f64::min),
        ),
        ..Extras::default()
    };
    let algo = match config.algo {
        QAlgo::Boltzmann => {
            form(config.temperature.kind == ScheduleKind::InverseLog, "an inverse-log temperature")?;
            extras.b = Some(config.temperature.scale);
            Algo::Boltzmann
        }
        QAlgo::Seg => {
            let eps = config.epsilon_schedule.as_ref().ok_or(Error::MissingParameter("epsilonSchedule".into()))?;
            form(eps.kind == ScheduleKind::Power, "a power-law exploration rate")?;
            form(config.temperature.kind == ScheduleKind::Power, "a power-law temperature")?;
            extras.d = Some(eps.exponent);
            extras.e = Some(config.temperature.exponent);
            Algo::Seg
        }
    };
    let (kappa1, kappa2, kappa3) = crate::sa::identify_kappas(algo, &extras)?;
    let spec = BoundSpec {
        a: 1.0 - config.stepsize.exponent,
        kappa1,
        kappa2,
        kappa3,
        beta: config.stepsize.scale,
        n0: config.stepsize.n0,
        delta: 0.01,
        constants: crate::sa::identify_constants(algo, &extras)?,
        d: mdp.num_pairs(),
    };
    Ok((spec, algo, extras))
}

/// Hyperparameter conditions for a run configuration.
pub fn config_conditions(mdp: &Mdp, config: &QlearnConfig) -> Result<Vec<ConditionResult>> {
    let (spec, algo, extras) = bound_inputs(mdp, config)?;
    check_conditions(&spec, algo, &extras)
}

/// Fails in strict mode; otherwise returns the failing ids as warnings.
fn enforce_conditions(mdp: &Mdp, config: &QlearnConfig) -> Result<Vec<String>> {
    let failing = match config_conditions(mdp, config) {
        Ok(results) => crate::sa::failing_ids(&results),
        Err(e) if !config.strict_conditions => vec![format!("unchecked: {e}")],
        Err(e) => return Err(e),
    };
    if config.strict_conditions && !failing.is_empty() {
        return Err(Error::ConditionViolated(failing));
    }
    Ok(failing)
}
