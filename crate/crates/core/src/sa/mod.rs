//! Contractive stochastic approximation driven by controlled Markov noise:
//! `x_{n+1} = x_n + β_n (F(x_n, y_n) − x_n + M_{n+1})`.

pub mod bounds;
pub mod conditions;
pub mod diagnostics;

use std::io::Write;

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, stationary_mean, Kernel};
use crate::policy::ControlValue;
use crate::rng::{sample_index, RngState, StreamPair};
use crate::schedule::Schedule;

pub use bounds::{
    bound_g, chi, identify_constants, identify_kappas, recursion_bound_check, theorem1_rate, Algo, BoundSpec, Extras,
    RateExponents, RateFunctions, RecursionCheck,
};
pub use conditions::{all_satisfied, check_conditions, check_n0, failing_ids, n0_probe_grid, ConditionResult, N0Result};
pub use diagnostics::{averaged_process, noise_decomposition, AveragedProcess, DecompositionReport, DecompositionRow};

/// Slack allowed outside the iterate box before a run is aborted.
pub const ESCAPE_TOL: f64 = 1e-9;

/// Capabilities an iteration must provide to be driven by [`run_sa`].
///
/// Schedules are indexed from 1: the update producing `x_{k+1}` uses
/// `β = stepsize().eval(k + 1)` and `ζ = control(k + 1)`.
///
/// The noise transition is split in two so that systems whose next noise
/// state depends on the updated iterate can share random streams with a
/// direct implementation. [`SaSystem::draw_exogenous`] runs before the
/// update, [`SaSystem::settle`] after it.
pub trait SaSystem {
    fn dim(&self) -> usize;

    fn noise_state_count(&self) -> usize;

    fn stepsize(&self) -> &Schedule;

    fn control(&self, n: u64) -> Result<ControlValue>;

    fn kernel_at(&self, ctrl: &ControlValue, x: &[f64]) -> Result<Kernel>;

    /// `F(x, y)`.
    fn update_map(&self, x: &[f64], y: usize) -> Vec<f64>;

    /// `M_{n+1}` given the exogenous draw of [`SaSystem::draw_exogenous`].
    fn martingale(&self, x: &[f64], y: usize, exo: usize) -> Vec<f64>;

    /// Entrywise box `[lo, hi]` containing every iterate.
    fn domain(&self) -> (f64, f64);

    fn initial_iterate(&self) -> Vec<f64>;

    /// `y_0`, possibly random.
    fn initial_noise(&self, ctrl: &ControlValue, x: &[f64], rng: &mut StreamPair) -> Result<usize>;

    /// Randomness consumed before the update. The default draws the whole
    /// next noise state from `kernel_at(ctrl, x)` on the transition stream.
    fn draw_exogenous(&self, ctrl: &ControlValue, x: &[f64], y: usize, rng: &mut StreamPair) -> Result<usize> {
        let k = self.kernel_at(ctrl, x)?;
        Ok(sample_index(k.row(y), &mut rng.transition))
    }

    /// Next noise state from the exogenous draw and the updated iterate.
    fn settle(
        &self,
        _next_ctrl: &ControlValue,
        _next_x: &[f64],
        _y: usize,
        exo: usize,
        _rng: &mut StreamPair,
    ) -> Result<usize> {
        Ok(exo)
    }
}

/// `F̄^{(ζ,w)}(x) = Σ_i μ^{(ζ,w)}(i) F(x, i)`.
pub fn stationary_average<S: SaSystem + ?Sized>(system: &S, ctrl: &ControlValue, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mu = stationary_distribution(&system.kernel_at(ctrl, w)?)?;
    let f: Vec<Vec<f64>> = (0..system.noise_state_count()).map(|i| system.update_map(x, i)).collect();
    Ok(stationary_mean(&f, &mu))
}

/// What to keep from a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordOptions {
    /// Iterate counts at which to snapshot; `0` is the initial iterate.
    pub checkpoints: Vec<u64>,
    /// `(start, length)` of a full-resolution window.
    pub window: Option<(u64, u64)>,
    /// Keep `(y_n, ζ_n, β_n, M_{n+1})` for every step.
    pub record_steps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub y: usize,
    pub ctrl: ControlValue,
    pub beta: f64,
    pub m: Vec<f64>,
}

/// State after `n` completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: u64,
    pub x: Vec<f64>,
    pub y: usize,
    pub ctrl: ControlValue,
    /// Stepsize of the next update.
    pub beta: f64,
}

/// Full-resolution record of `x, y, ζ` at `start ..= start + len` and of
/// `β, M` for the `len` updates in between.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub start: u64,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<usize>,
    pub ctrls: Vec<ControlValue>,
    pub betas: Vec<f64>,
    pub ms: Vec<Vec<f64>>,
}

impl WindowRecord {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaTrajectory {
    pub seed: u64,
    pub steps: u64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub window: Option<WindowRecord>,
    pub final_x: Vec<f64>,
    pub final_y: usize,
    pub final_rng: RngState,
}

pub(crate) fn check_domain(x: &[f64], (lo, hi): (f64, f64), n: u64) -> Result<()> {
    let tol = ESCAPE_TOL * (1.0 + hi.abs().max(lo.abs()));
    if x.iter().any(|v| !(*v >= lo - tol && *v <= hi + tol)) {
        return Err(Error::IterateEscaped(n));
    }
    Ok(())
}

/// Runs `steps` updates on stream pair `(seed, 0)`.
pub fn run_sa<S: SaSystem + ?Sized>(system: &S, steps: u64, seed: u64, opts: &RecordOptions) -> Result<SaTrajectory> {
    run_sa_from(system, steps, StreamPair::new(seed, 0), opts)
}

/// As [`run_sa`] with an explicit stream pair.
pub fn run_sa_from<S: SaSystem + ?Sized>(
    system: &S,
    steps: u64,
    mut rng: StreamPair,
    opts: &RecordOptions,
) -> Result<SaTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let seed = rng.state().seed;
    let dom = system.domain();
    let mut checkpoints = opts.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut next_cp = checkpoints.iter().copied().peekable();

    let mut x = system.initial_iterate();
    if x.len() != system.dim() {
        return Err(Error::DimensionMismatch("initial iterate".into()));
    }
    check_domain(&x, dom, 0)?;
    let mut ctrl = system.control(1)?;
    let mut y = system.initial_noise(&ctrl, &x, &mut rng)?;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut window = opts.window.map(|(start, _)| WindowRecord {
        start,
        xs: Vec::new(),
        ys: Vec::new(),
        ctrls: Vec::new(),
        betas: Vec::new(),
        ms: Vec::new(),
    });
    let (w_start, w_end) = opts.window.map_or((1, 0), |(s, l)| (s, s + l));

    for k in 0..=steps {
        let beta = if k < steps { system.stepsize().eval(k + 1)? } else { f64::NAN };
        if next_cp.peek() == Some(&k) {
            next_cp.next();
            snapshots.push(Snapshot { n: k, x: x.clone(), y, ctrl, beta });
        }
        if let Some(w) = window.as_mut() {
            if (w_start..=w_end).contains(&k) {
                w.xs.push(x.clone());
                w.ys.push(y);
                w.ctrls.push(ctrl);
            }
        }
        if k == steps {
            break;
        }
        let exo = system.draw_exogenous(&ctrl, &x, y, &mut rng)?;
        let m = system.martingale(&x, y, exo);
        let f = system.update_map(&x, y);
        let next: Vec<f64> = x.iter().zip(&f).zip(&m).map(|((xi, fi), mi)| xi + beta * (fi - xi + mi)).collect();
        check_domain(&next, dom, k + 1)?;
        if let Some(w) = window.as_mut() {
            if (w_start..w_end).contains(&k) {
                w.betas.push(beta);
                w.ms.push(m.clone());
            }
        }
        if opts.record_steps {
            records.push(StepRecord { y, ctrl, beta, m });
        }
        let next_ctrl = system.control(k + 2)?;
        y = system.settle(&next_ctrl, &next, y, exo, &mut rng)?;
        x = next;
        ctrl = next_ctrl;
    }
    if let Some(w) = &window {
        if w.ys.len() as u64 != w_end - w_start + 1 {
            return Err(Error::InvalidArgument(format!("window [{w_start}, {w_end}] exceeds run length {steps}")));
        }
    }
    Ok(SaTrajectory {
        seed,
        steps,
        records,
        snapshots,
        window,
        final_x: x,
        final_y: y,
        final_rng: rng.state(),
    })
}

/// Distance of an iterate to a reference point.
pub type ErrFn<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Writes one row per snapshot: `n, err_inf, beta_n, epsilon_n, lambda_n, y_n`.
/// `err` fills `err_inf`; without it the column is left empty.
pub fn write_trajectory_csv<W: Write>(
    traj: &SaTrajectory,
    err: Option<ErrFn<'_>>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "err_inf", "beta_n", "epsilon_n", "lambda_n", "y_n"])?;
    for s in &traj.snapshots {
        let e = err.map(|f| f(&s.x).to_string()).unwrap_or_default();
        w.write_record([
            s.n.to_string(),
            e,
            s.beta.to_string(),
            s.ctrl.epsilon.to_string(),
            s.ctrl.lambda.to_string(),
            s.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
