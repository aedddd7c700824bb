//! Regret of an online learner: exact frozen-policy terms, Monte Carlo
//! continuation estimates, cumulative series and exponent fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{policy_value, solve_optimal, Mdp, QTable, DEFAULT_TIE_TOL, DEFAULT_TOL};
use crate::policy::PolicyMatrix;
use crate::qlearn::{CheckpointSnapshot, Learner, QAlgo, QlearnConfig, RunResult};
use crate::rng::{continuation_index, StreamPair};

/// Rollouts per checkpoint unless configured otherwise.
pub const DEFAULT_ROLLOUTS: usize = 64;
/// Longest continuation horizon accepted.
pub const MAX_HORIZON: u64 = 1_000_000;

/// `(1 − γ)(V*(s_n) − V^π(s_n))` with `π` the policy frozen at the snapshot.
pub fn frozen_policy_regret_term(mdp: &Mdp, v_star: &[f64], snap: &CheckpointSnapshot) -> Result<f64> {
    let q = QTable::from_values(mdp, snap.q.clone())?;
    let v = policy_value(mdp, &PolicyMatrix::from_q(&q, snap.ctrl)?)?;
    Ok((1.0 - mdp.gamma()) * (v_star[snap.state] - v[snap.state]))
}

/// `H = ⌈ln(tol (1 − γ)/Rmax) / ln γ⌉`, so the discarded tail is at most `tol`.
pub fn truncation_horizon(gamma: f64, rmax: f64, tol: f64) -> Result<u64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let ratio = tol * (1.0 - gamma) / rmax;
    if ratio >= 1.0 {
        return Ok(1);
    }
    let h = (ratio.ln() / gamma.ln()).ceil();
    if !(h <= MAX_HORIZON as f64) {
        return Err(Error::HorizonOverflow(if h.is_finite() { h as u64 } else { u64::MAX }));
    }
    Ok(h.max(1.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub horizon: u64,
}

/// Clones the snapshot `k` times and runs the actual algorithm forward for
/// the truncation horizon on independent continuation streams. Each clone
/// draws its own first action at `s_n`.
pub fn mc_continuation_regret(
    mdp: &Mdp,
    config: &QlearnConfig,
    v_star: &[f64],
    snap: &CheckpointSnapshot,
    k: usize,
    tol: f64,
) -> Result<McEstimate> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two rollouts".into()));
    }
    let horizon = truncation_horizon(mdp.gamma(), mdp.rmax(), tol)?;
    let learner = Learner::new(mdp, config);
    let returns: Vec<f64> = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = learner.restore(snap)?;
            st.rng = StreamPair::new(config.seed, continuation_index(snap.n, i)?);
            // The snapshot's pending action is not part of ℱ_n.
            learner.redraw_action(&mut st)?;
            let mut ret = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                ret += disc * learner.step(&mut st)?;
                disc *= mdp.gamma();
            }
            Ok(ret)
        })
        .collect::<Result<_>>()?;
    let kf = k as f64;
    let regrets: Vec<f64> = returns.iter().map(|g| (1.0 - mdp.gamma()) * (v_star[snap.state] - g)).collect();
    let mean = regrets.iter().sum::<f64>() / kf;
    let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    Ok(McEstimate { estimate: mean, std_err: (var / kf).sqrt(), horizon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RegretMethod {
    Frozen,
    Mc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretPoint {
    pub n: u64,
    pub frozen: Option<f64>,
    pub mc: Option<f64>,
    pub mc_std_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CumulativePoint {
    pub n: u64,
    pub frozen: Option<f64>,
    pub mc: Option<f64>,
}

/// Interpolation rule between checkpoints.
pub const INTERPOLATION: &str = "left-piecewise-constant";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretEstimate {
    pub method: RegretMethod,
    pub interpolation: &'static str,
    pub per_checkpoint: Vec<RegretPoint>,
    pub cumulative: Vec<CumulativePoint>,
}

/// Options for the Monte Carlo part of [`cumulative_regret`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub rollouts: usize,
    pub tol: f64,
}

impl McOptions {
    /// `K = 64`, `tol = 10⁻⁴ Rmax/(1 − γ)`.
    pub fn defaults(mdp: &Mdp) -> McOptions {
        McOptions { rollouts: DEFAULT_ROLLOUTS, tol: 1e-4 * mdp.vmax() }
    }
}

/// `ℛ_N ≈ Σ_{n=1}^{N} reg⁽ⁿ⁾` with `reg⁽ⁿ⁾` taken from the last grid
/// point at or before `n`. `grid` must start at 1 and be strictly increasing.
pub fn cumulative_regret(
    mdp: &Mdp,
    run: &RunResult,
    method: RegretMethod,
    grid: &[u64],
    mc: Option<McOptions>,
) -> Result<RegretEstimate> {
    if grid.first() != Some(&1) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::GridMismatch("grid must start at 1 and increase strictly".into()));
    }
    let v_star = solve_optimal(mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?.v_star;
    let snaps: Vec<&CheckpointSnapshot> = grid
        .iter()
        .map(|&n| {
            run.checkpoints
                .iter()
                .find(|c| c.n == n)
                .ok_or_else(|| Error::GridMismatch(format!("no checkpoint at n = {n}")))
        })
        .collect::<Result<_>>()?;
    let mc_opts = mc.unwrap_or_else(|| McOptions::defaults(mdp));
    let per_checkpoint: Vec<RegretPoint> = snaps
        .iter()
        .map(|snap| {
            let frozen = match method {
                RegretMethod::Mc => None,
                _ => Some(frozen_policy_regret_term(mdp, &v_star, snap)?),
            };
            let est = match method {
                RegretMethod::Frozen => None,
                _ => Some(mc_continuation_regret(mdp, &run.config, &v_star, snap, mc_opts.rollouts, mc_opts.tol)?),
            };
            Ok(RegretPoint { n: snap.n, frozen, mc: est.map(|e| e.estimate), mc_std_err: est.map(|e| e.std_err) })
        })
        .collect::<Result<_>>()?;

    let mut cumulative = Vec::with_capacity(grid.len());
    let (mut acc_f, mut acc_m) = (0.0, 0.0);
    for (i, p) in per_checkpoint.iter().enumerate() {
        // reg at this grid point covers n = grid[i] .. grid[i+1]-1; report ℛ at grid[i].
        acc_f += p.frozen.unwrap_or(0.0);
        acc_m += p.mc.unwrap_or(0.0);
        cumulative.push(CumulativePoint { n: p.n, frozen: p.frozen.map(|_| acc_f), mc: p.mc.map(|_| acc_m) });
        if let Some(&next) = grid.get(i + 1) {
            let extra = (next - p.n - 1) as f64;
            acc_f += extra * p.frozen.unwrap_or(0.0);
            acc_m += extra * p.mc.unwrap_or(0.0);
        }
    }
    Ok(RegretEstimate { method, interpolation: INTERPOLATION, per_checkpoint, cumulative })
}

/// Exploration parameters entering the regret exponent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegretParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretExponent {
    pub exponent: f64,
    /// The gap-dependent term was dropped because the gap is infinite.
    pub gap_term_dropped: bool,
}

/// Boltzmann: `max{0.5 + 4𝔞, 1 − 𝔟·gap/2}`; SεG:
/// `max{1 − 𝔡, 1/2 + 𝔞 + 3𝔡 + 2𝔢, 2𝔞 + 4𝔡 + 3𝔢, 1 − (𝔡 − 𝔢)}`, which equals
/// `9/10 + 2𝔢` at `𝔞 = 𝔡 = 1/10`. Both are clipped to `(0, 1]`.
pub fn theoretical_regret_exponent(algo: QAlgo, p: RegretParams, gap: f64) -> Result<RegretExponent> {
    let clip = |x: f64| x.min(1.0);
    match algo {
        QAlgo::Boltzmann => {
            if gap.is_nan() || gap < 0.0 {
                return Err(Error::InvalidArgument(format!("gap {gap}")));
            }
            if gap.is_infinite() {
                return Ok(RegretExponent { exponent: clip(0.5 + 4.0 * p.a), gap_term_dropped: true });
            }
            Ok(RegretExponent { exponent: clip((0.5 + 4.0 * p.a).max(1.0 - p.b * gap / 2.0)), gap_term_dropped: false })
        }
        QAlgo::Seg if (p.a - 0.1).abs() <= 1e-12 && (p.d - 0.1).abs() <= 1e-12 => {
            Ok(RegretExponent { exponent: clip(0.9 + 2.0 * p.e), gap_term_dropped: false })
        }
        QAlgo::Seg => {
            let terms = [
                1.0 - p.d,
                0.5 + p.a + 3.0 * p.d + 2.0 * p.e,
                2.0 * p.a + 4.0 * p.d + 3.0 * p.e,
                1.0 - (p.d - p.e),
            ];
            let raw = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(RegretExponent { exponent: clip(raw), gap_term_dropped: false })
        }
    }
}

/// Errors returned by [`theoretical_regret_exponent`] when the dropped
/// gap term must be reported as a failure.
pub fn require_gap(e: RegretExponent) -> Result<f64> {
    if e.gap_term_dropped {
        Err(Error::GapRequired)
    } else {
        Ok(e.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares slope of `ln value` against `ln n` over `n ∈ [lo, hi]`.
pub fn fit_power_law(series: &[(u64, f64)], lo: u64, hi: u64) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, _)| *n >= lo && *n <= hi)
        .map(|&(n, v)| if v > 0.0 { Ok(((n as f64).ln(), v.ln())) } else { Err(Error::NonPositiveValue(v)) })
        .collect::<Result<_>>()?;
    if pts.len() < 5 {
        return Err(Error::TooFewPoints { need: 5, got: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { need: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerFit { exponent: slope, intercept: my - slope * mx, r2 })
}

/// Regret export: `N, regret_frozen, regret_mc, mc_stderr, theoretical_exponent`.
pub fn write_regret_csv<W: Write>(est: &RegretEstimate, theoretical: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "regret_frozen", "regret_mc", "mc_stderr", "theoretical_exponent"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (c, p) in est.cumulative.iter().zip(&est.per_checkpoint) {
        w.write_record([c.n.to_string(), opt(c.frozen), opt(c.mc), opt(p.mc_std_err), theoretical.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
