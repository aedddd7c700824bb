//! Fixed benchmark instances used by tests, studies and the fixtures.

use crate::error::Result;
use crate::mdp::{solve_optimal, validate_mdp, Mdp, RawMdp, DEFAULT_TIE_TOL, DEFAULT_TOL};

fn build(gamma: f64, rmax: f64, rewards: Vec<Vec<f64>>, transitions: Vec<Vec<Vec<f64>>>) -> Result<Mdp> {
    validate_mdp(&RawMdp {
        num_states: rewards.len(),
        num_actions: rewards[0].len(),
        gamma,
        rmax,
        rewards,
        transitions,
    })
}

/// Two states, two actions, `γ = 0.5`.
pub fn two_state() -> Mdp {
    build(
        0.5,
        1.0,
        vec![vec![1.0, 0.0], vec![0.0, 0.5]],
        vec![
            vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            vec![vec![0.6, 0.4], vec![0.3, 0.7]],
        ],
    )
    .expect("two-state benchmark is valid")
}

/// Three states, two actions, `γ = 0.8`.
pub fn three_state() -> Mdp {
    build(
        0.8,
        1.0,
        vec![vec![0.0, 0.4], vec![0.7, 0.2], vec![1.0, 0.1]],
        vec![
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]],
            vec![vec![0.2, 0.2, 0.6], vec![0.4, 0.4, 0.2]],
            vec![vec![0.3, 0.3, 0.4], vec![0.6, 0.2, 0.2]],
        ],
    )
    .expect("three-state benchmark is valid")
}

/// Four states, two actions, `γ = 0.6`, every transition probability positive.
pub fn four_state() -> Mdp {
    build(
        0.6,
        1.0,
        vec![vec![0.2, 0.8], vec![1.0, 0.3], vec![0.5, 0.0], vec![0.1, 0.6]],
        vec![
            vec![vec![0.1, 0.4, 0.3, 0.2], vec![0.4, 0.2, 0.2, 0.2]],
            vec![vec![0.3, 0.3, 0.2, 0.2], vec![0.1, 0.1, 0.5, 0.3]],
            vec![vec![0.25, 0.25, 0.25, 0.25], vec![0.5, 0.1, 0.1, 0.3]],
            vec![vec![0.2, 0.2, 0.2, 0.4], vec![0.3, 0.4, 0.2, 0.1]],
        ],
    )
    .expect("four-state benchmark is valid")
}

/// Two states whose transitions ignore the action; action 0 earns `1`,
/// action 1 earns `1 − gap`, so the suboptimality gap is exactly `gap`.
pub fn gap_instance(gap: f64, gamma: f64) -> Result<Mdp> {
    build(
        gamma,
        1.0,
        vec![vec![1.0, 1.0 - gap], vec![1.0, 1.0 - gap]],
        vec![
            vec![vec![0.6, 0.4], vec![0.6, 0.4]],
            vec![vec![0.3, 0.7], vec![0.3, 0.7]],
        ],
    )
}

/// Two symmetric states with uniform transitions, `Rmax = 10⁴`, gap `10`.
/// Every `max Q(s',·)` is the same, so Q-learning sees no martingale noise
/// and the regret is driven by exploration and initialization alone.
pub fn regret_instance() -> Mdp {
    let (rmax, gap) = (1.0e4, 10.0);
    build(
        0.6,
        rmax,
        vec![vec![rmax, rmax - gap], vec![rmax - gap, rmax]],
        vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ],
    )
    .expect("regret benchmark is valid")
}

/// Initial table that ranks every action backwards: `Rmax/(1−γ)` on
/// suboptimal actions and `0` on optimal ones.
pub fn adversarial_q0(mdp: &Mdp) -> Result<Vec<f64>> {
    let solved = solve_optimal(mdp, DEFAULT_TOL, DEFAULT_TIE_TOL)?;
    let na = mdp.num_actions();
    Ok((0..mdp.num_pairs())
        .map(|y| if solved.optimal_actions[y / na].contains(&(y % na)) { 0.0 } else { mdp.vmax() })
        .collect())
}

/// All benchmarks by name, as stored under `fixtures/`.
pub fn named() -> Vec<(&'static str, Mdp)> {
    vec![
        ("two_state", two_state()),
        ("three_state", three_state()),
        ("four_state", four_state()),
        ("gap_large", gap_instance(1.0, 0.5).expect("valid")),
        ("gap_small", gap_instance(0.1, 0.5).expect("valid")),
        ("regret", regret_instance()),
    ]
}
