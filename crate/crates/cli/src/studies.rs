//! Subcommand implementations. Every command validates its inputs before
//! creating the output directory and writes only inside it.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use qlab::grid::geometric_grid;
use qlab::markov::mdp_diameter;
use qlab::mdp::{solve_optimal, DEFAULT_TIE_TOL, DEFAULT_TOL};
use qlab::policy::{sensitivity_grid, write_sensitivity_csv};
use qlab::qlearn::{bound_inputs, error_series, run_seeds, write_run_csv, QAlgo, QlearnConfig, QlearnSystem, RunResult};
use qlab::regret::{
    cumulative_regret, fit_power_law, theoretical_regret_exponent, write_regret_csv, McOptions, RegretEstimate,
    RegretMethod, RegretParams,
};
use qlab::sa::{
    all_satisfied, check_conditions, check_n0, n0_probe_grid, noise_decomposition, run_sa, theorem1_rate, RecordOptions,
};
use qlab::{Mdp, Schedule};

use crate::config::{load_mdp_file, ExperimentConfig, SeedSpec};
use crate::fail::{CliError, Kind};

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Where a command writes.
pub struct Out {
    dir: PathBuf,
}

impl Out {
    pub fn create(dir: PathBuf) -> CliResult<Out> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io_at(&dir, e))?;
        Ok(Out { dir })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io_at(&path, e))
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv_writer(&mut buf);
            w.write_record(header).map_err(csv_err)?;
            for r in rows {
                w.write_record(&r).map_err(csv_err)?;
            }
            w.flush()?;
        }
        self.write(name, &buf)
    }

    pub fn json(&self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::new(Kind::Io, e.to_string())
}

/// Resolved inputs shared by the run-based studies.
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub mdp: Mdp,
    pub run: QlearnConfig,
    pub seeds: Vec<u64>,
}

pub fn prepare(config: &Path, seeds_override: Option<u64>, strict: bool) -> CliResult<(Prepared, PathBuf)> {
    let (mut cfg, base) = ExperimentConfig::load(config)?;
    if let Some(count) = seeds_override {
        let master = cfg.seeds.expand().first().copied().unwrap_or(0);
        cfg.seeds = SeedSpec::Count { count, master };
    }
    cfg.strict_conditions |= strict;
    let mdp = cfg.load_mdp(&base)?;
    let run = cfg.resolved_run(&mdp)?;
    let seeds = cfg.seeds.expand();
    if seeds.is_empty() {
        return Err(CliError::new(Kind::Validation, "seed list is empty"));
    }
    Ok((Prepared { cfg, mdp, run, seeds }, base))
}

/// `--out`, then the config's `output`, then `$QLAB_OUT/<command>`.
pub fn out_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>, base: &Path, root: &Path, command: &str) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.output.as_ref()).map(|p| base.join(p)))
        .unwrap_or_else(|| root.join(command))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn echo_config(out: &Out, p: &Prepared) -> CliResult<()> {
    let mut cfg = p.cfg.clone();
    cfg.run = Some(p.run.clone());
    cfg.seeds = SeedSpec::List(p.seeds.clone());
    out.json("config.json", &serde_json::to_value(&cfg).expect("config serializes"))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn cmd_solve(mdp_path: &Path, out: PathBuf) -> CliResult<bool> {
    let mdp = load_mdp_file(mdp_path)?;
    let solved = solve_optimal(&mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?;
    let diameter = match mdp_diameter(&mdp) {
        Ok(d) => d.to_string(),
        Err(e) => format!("unavailable ({e})"),
    };
    let out = Out::create(out)?;
    let na = mdp.num_actions();
    let mut rows = Vec::new();
    for s in 0..mdp.num_states() {
        println!("state={s} v_star={} q_star={:?}", solved.v_star[s], solved.q_star.row(s));
        for a in 0..na {
            rows.push(vec![
                s.to_string(),
                a.to_string(),
                solved.q_star.get(s, a).to_string(),
                solved.v_star[s].to_string(),
                solved.optimal_actions[s].contains(&a).to_string(),
                solved.gap.to_string(),
            ]);
        }
    }
    out.csv("solve.csv", &["state", "action", "q_star", "v_star", "optimal", "gap"], rows)?;
    println!("gap={} diameter={diameter} residual={}", solved.gap, solved.residual);
    Ok(true)
}

fn run_all(p: &Prepared) -> CliResult<Vec<RunResult>> {
    Ok(run_seeds(&p.mdp, &p.run, &p.seeds)?)
}

pub fn cmd_run(p: &Prepared, expected: QAlgo, out: PathBuf) -> CliResult<bool> {
    if p.run.algo != expected {
        return Err(CliError::new(Kind::Validation, format!("config algo is {:?}", p.run.algo)));
    }
    let runs = run_all(p)?;
    let q_star = solve_optimal(&p.mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?.q_star;
    let out = Out::create(out)?;
    echo_config(&out, p)?;
    for r in &runs {
        let mut buf = Vec::new();
        write_run_csv(r, &q_star, &mut buf)?;
        out.write(&format!("run_seed{}.csv", r.config.seed), &buf)?;
        let last = error_series(r, &q_star)?.last().map_or(f64::NAN, |e| e.1);
        println!("seed={} steps={} final_err_inf={last}", r.config.seed, r.config.steps);
        if !r.warnings.is_empty() {
            println!("warning seed={} failing_conditions={}", r.config.seed, r.warnings.join(","));
        }
    }
    println!("verdict=pass study=run runs={}", runs.len());
    Ok(true)
}

pub fn cmd_concentration(p: &Prepared, out: PathBuf) -> CliResult<bool> {
    let runs = run_all(p)?;
    let q_star = solve_optimal(&p.mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?.q_star;
    let series: Vec<Vec<(u64, f64)>> = runs.iter().map(|r| error_series(r, &q_star)).collect::<Result<_, _>>()?;
    let labels: Vec<u64> = series[0].iter().map(|e| e.0).collect();
    let mut envelope = Vec::with_capacity(labels.len());
    for (i, &n) in labels.iter().enumerate() {
        let mut col: Vec<f64> = series.iter().map(|s| s[i].1).collect();
        col.sort_by(f64::total_cmp);
        envelope.push((n, quantile(&col, 0.1), quantile(&col, 0.5), quantile(&col, 0.9)));
    }
    let window = p.cfg.fit_window(p.run.steps);
    let median: Vec<(u64, f64)> = envelope.iter().map(|e| (e.0, e.2)).collect();
    let fit = fit_power_law(&median, window.lo, window.hi)?;
    let rates = bound_inputs(&p.mdp, &p.run).map(|(spec, _, _)| theorem1_rate(&spec)).ok();
    let pass = match rates {
        Some(r) => fit.exponent <= r.detailed + p.cfg.tolerance,
        None => fit.exponent < 0.0,
    };
    let band = rates.map(|r| (fit.exponent - r.detailed).abs() <= p.cfg.tolerance);

    let out = Out::create(out)?;
    echo_config(&out, p)?;
    for (seed, s) in p.seeds.iter().zip(&series) {
        out.csv(
            &format!("errors_seed{seed}.csv"),
            &["n", "err_inf"],
            s.iter().map(|(n, e)| vec![n.to_string(), e.to_string()]),
        )?;
    }
    out.csv(
        "envelope.csv",
        &["n", "q10", "q50", "q90"],
        envelope.iter().map(|e| vec![e.0.to_string(), e.1.to_string(), e.2.to_string(), e.3.to_string()]),
    )?;
    let summary = json!({
        "study": "concentration",
        "seeds": p.seeds.len(),
        "fitLo": window.lo,
        "fitHi": window.hi,
        "slope": fit.exponent,
        "r2": fit.r2,
        "headlineExponent": rates.map(|r| r.headline),
        "detailedExponent": rates.map(|r| r.detailed),
        "tolerance": p.cfg.tolerance,
        "withinBand": band,
        "verdict": verdict(pass),
    });
    out.json("summary.json", &summary)?;
    let fmt = |v: Option<f64>| v.map_or("unavailable".to_string(), |x| x.to_string());
    println!(
        "verdict={} study=concentration slope={} r2={} theory_detailed={} theory_headline={} within_band={}",
        verdict(pass),
        fit.exponent,
        fit.r2,
        fmt(rates.map(|r| r.detailed)),
        fmt(rates.map(|r| r.headline)),
        band.map_or("unavailable".to_string(), |b| b.to_string()),
    );
    Ok(pass)
}

/// Exploration parameters of a run configuration.
pub fn regret_params(run: &QlearnConfig) -> RegretParams {
    RegretParams {
        a: 1.0 - run.stepsize.exponent,
        b: run.temperature.scale,
        d: run.epsilon_schedule.map_or(0.0, |e: Schedule| e.exponent),
        e: run.temperature.exponent,
    }
}

pub fn cmd_regret(p: &Prepared, out: PathBuf) -> CliResult<bool> {
    let grid = geometric_grid(p.cfg.regret.grid_base, p.run.steps);
    let mut run = p.run.clone();
    let mut cps = run.checkpoint_labels();
    cps.extend(&grid);
    cps.sort_unstable();
    cps.dedup();
    run.checkpoints = Some(cps);
    let runs = run_seeds(&p.mdp, &run, &p.seeds)?;
    let method = p.cfg.regret.method;
    let mut mc = McOptions::defaults(&p.mdp);
    if let Some(k) = p.cfg.regret.rollouts {
        mc.rollouts = k;
    }
    if let Some(t) = p.cfg.regret.tol {
        mc.tol = t;
    }
    let estimates: Vec<RegretEstimate> = runs
        .par_iter()
        .map(|r| cumulative_regret(&p.mdp, r, method, &grid, Some(mc)))
        .collect::<Result<_, _>>()?;
    let gap = solve_optimal(&p.mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?.gap;
    let theory = theoretical_regret_exponent(run.algo, regret_params(&run), gap)?;

    let k = estimates.len() as f64;
    let mean = |f: &dyn Fn(&RegretEstimate, usize) -> Option<f64>, i: usize| -> Option<f64> {
        estimates.iter().map(|e| f(e, i)).sum::<Option<f64>>().map(|s| s / k)
    };
    let cum_f = |e: &RegretEstimate, i: usize| e.cumulative[i].frozen;
    let cum_m = |e: &RegretEstimate, i: usize| e.cumulative[i].mc;
    let se = |e: &RegretEstimate, i: usize| e.per_checkpoint[i].mc_std_err.map(|s| s * s);
    let term_f = |e: &RegretEstimate, i: usize| e.per_checkpoint[i].frozen;
    let term_m = |e: &RegretEstimate, i: usize| e.per_checkpoint[i].mc;

    let use_frozen = method != RegretMethod::Mc;
    type Pick<'a> = &'a dyn Fn(&RegretEstimate, usize) -> Option<f64>;
    let (cum_sel, term_sel): (Pick, Pick) =
        if use_frozen { (&cum_f, &term_f) } else { (&cum_m, &term_m) };
    let cumulative: Vec<(u64, f64)> =
        grid.iter().enumerate().map(|(i, &n)| (n, mean(cum_sel, i).unwrap_or(f64::NAN))).collect();
    let terms: Vec<(u64, f64)> =
        grid.iter().enumerate().map(|(i, &n)| (n, mean(term_sel, i).unwrap_or(f64::NAN))).collect();
    let window = p.cfg.fit_window(run.steps);
    let fit = fit_power_law(&cumulative, window.lo, window.hi)?;
    let positive_terms: Vec<(u64, f64)> = terms.iter().copied().filter(|t| t.1 > 0.0).collect();
    let trend = fit_power_law(&positive_terms, window.lo, window.hi).ok().map(|f| f.exponent <= 0.0);
    let pass = fit.exponent <= theory.exponent + p.cfg.tolerance;

    let out = Out::create(out)?;
    echo_config(&out, p)?;
    for (seed, e) in p.seeds.iter().zip(&estimates) {
        let mut buf = Vec::new();
        write_regret_csv(e, theory.exponent, &mut buf)?;
        out.write(&format!("regret_seed{seed}.csv"), &buf)?;
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.csv(
        "regret.csv",
        &["N", "regret_frozen", "regret_mc", "mc_stderr", "theoretical_exponent"],
        grid.iter().enumerate().map(|(i, &n)| {
            let pooled = estimates.iter().map(|e| se(e, i)).sum::<Option<f64>>().map(|s| s.sqrt() / k);
            vec![n.to_string(), opt(mean(&cum_f, i)), opt(mean(&cum_m, i)), opt(pooled), theory.exponent.to_string()]
        }),
    )?;
    out.json(
        "summary.json",
        &json!({
            "study": "regret",
            "method": method,
            "interpolation": qlab::regret::INTERPOLATION,
            "seeds": p.seeds.len(),
            "fitLo": window.lo,
            "fitHi": window.hi,
            "fittedExponent": fit.exponent,
            "r2": fit.r2,
            "theoreticalExponent": theory.exponent,
            "gapTermDropped": theory.gap_term_dropped,
            "termNonincreasing": trend,
            "tolerance": p.cfg.tolerance,
            "verdict": verdict(pass),
        }),
    )?;
    println!(
        "verdict={} study=regret fitted_exponent={} theoretical_exponent={} term_nonincreasing={}",
        verdict(pass),
        fit.exponent,
        theory.exponent,
        trend.map_or("unavailable".to_string(), |t| t.to_string()),
    );
    Ok(pass)
}

pub fn cmd_decomposition(p: &Prepared, out: PathBuf) -> CliResult<bool> {
    let block = &p.cfg.decomposition;
    let steps = block.start + block.length;
    let run = QlearnConfig { steps: steps.max(1), seed: p.seeds[0], ..p.run.clone() };
    let system = QlearnSystem::new(&p.mdp, run)?;
    let opts = RecordOptions { checkpoints: vec![], window: Some((block.start, block.length)), record_steps: false };
    let traj = run_sa(&system, steps.max(1), p.seeds[0], &opts)?;
    let report = noise_decomposition(&traj, &system, block.i_star)?;
    let max_res = report.max_residual();
    let pass = max_res <= 1e-8;
    let out = Out::create(out)?;
    echo_config(&out, p)?;
    let norm = |v: &[f64]| qlab::linalg::vec_inf_norm(v).to_string();
    out.csv(
        "decomposition.csv",
        &["n", "gap_inf", "martingale_inf", "t1_inf", "t2_inf", "t3_inf", "residual", "delta_inf"],
        report.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                norm(&r.gap),
                norm(&r.martingale_sum),
                norm(&r.t1),
                norm(&r.t2),
                norm(&r.t3),
                r.residual.to_string(),
                r.delta.map(|d| d.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    println!("verdict={} study=decomposition max_residual={max_res} rows={}", verdict(pass), report.rows.len());
    Ok(pass)
}

pub fn cmd_heatmap(x: (f64, f64), lambda: (f64, f64), resolution: usize, out: PathBuf) -> CliResult<bool> {
    let cells = sensitivity_grid(x, lambda, resolution)?;
    let max_dx = cells.iter().map(|c| c.dp_dx_abs).fold(0.0, f64::max);
    let lambda_min = lambda.0.min(lambda.1);
    let expected = 1.0 / (4.0 * lambda_min);
    let out = Out::create(out)?;
    let mut buf = Vec::new();
    write_sensitivity_csv(&cells, &mut buf)?;
    out.write("heatmap.csv", &buf)?;
    let pass = (max_dx - expected).abs() <= 1e-9;
    println!(
        "verdict={} study=heatmap rows={} max_dP_dx={max_dx} expected={expected}",
        verdict(pass),
        cells.len()
    );
    Ok(pass)
}

pub fn cmd_audit(config: &Path, out_flag: Option<PathBuf>, root: &Path) -> CliResult<bool> {
    let (cfg, base) = ExperimentConfig::load(config)?;
    let (spec, algo, extras) = match &cfg.audit {
        Some(block) => (block.bound.clone(), block.algo, block.extras),
        None => {
            let mdp = cfg.load_mdp(&base)?;
            let run = cfg.resolved_run(&mdp)?;
            bound_inputs(&mdp, &run)?
        }
    };
    spec.validate()?;
    let conditions = check_conditions(&spec, algo, &extras)?;
    let n0 = check_n0(&spec, algo, &extras, &n0_probe_grid())?;
    let pass = all_satisfied(&conditions) && n0.iter().all(|r| r.ok());
    let out = Out::create(out_dir(out_flag, Some(&cfg), &base, root, "audit"))?;
    out.json(
        "audit.json",
        &json!({
            "algo": algo,
            "bound": spec,
            "extras": extras,
            "conditions": conditions,
            "n0": n0,
            "verdict": verdict(pass),
        }),
    )?;
    for c in &conditions {
        println!(
            "condition id={} satisfied={} gating={} lhs={} rhs={}",
            c.id, c.satisfied, c.gating, c.lhs, c.rhs
        );
    }
    for r in &n0 {
        println!(
            "n0 id={} applicable={} satisfied={} tail_ok={} witness={}",
            r.id,
            r.applicable,
            r.satisfied,
            r.tail_ok,
            r.witness.map_or("none".to_string(), |w| w.to_string())
        );
    }
    let failing: Vec<String> = conditions
        .iter()
        .filter(|c| c.gating && !c.satisfied)
        .map(|c| c.id.clone())
        .chain(n0.iter().filter(|r| !r.ok()).map(|r| r.id.clone()))
        .collect();
    println!("verdict={} study=audit failing={}", verdict(pass), if failing.is_empty() { "none".into() } else { failing.join(",") });
    Ok(pass)
}
