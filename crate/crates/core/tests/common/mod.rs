//! Oracles and instance generators shared by the integration tests. Nothing
//! here calls into the solvers under test.

#![allow(dead_code, clippy::needless_range_loop)]

use qlab::markov::Kernel;
use qlab::{Mdp, RawMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = row[..n - 1].iter().sum();
    row[n - 1] = 1.0 - head;
    row
}

pub fn random_kernel<R: Rng>(rng: &mut R, n: usize) -> Kernel {
    Kernel::new((0..n).map(|_| random_row(rng, n)).collect()).expect("random kernel is stochastic")
}

pub fn random_raw<R: Rng>(rng: &mut R, ns: usize, na: usize, gamma: f64) -> RawMdp {
    RawMdp {
        num_states: ns,
        num_actions: na,
        gamma,
        rmax: 1.0,
        rewards: (0..ns).map(|_| (0..na).map(|_| rng.random_range(0.0..1.0)).collect()).collect(),
        transitions: (0..ns).map(|_| (0..na).map(|_| random_row(rng, ns)).collect()).collect(),
    }
}

pub fn random_mdp<R: Rng>(rng: &mut R, ns: usize, na: usize, gamma: f64) -> Mdp {
    qlab::mdp::validate_mdp(&random_raw(rng, ns, na, gamma)).expect("random MDP is valid")
}

pub fn random_q<R: Rng>(rng: &mut R, mdp: &Mdp) -> Vec<f64> {
    (0..mdp.num_pairs()).map(|_| rng.random_range(0.0..mdp.vmax())).collect()
}

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `V^π` from `(I − γP_π) V = r_π`.
pub fn naive_policy_value(mdp: &Mdp, policy: &[Vec<f64>]) -> Vec<f64> {
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let mut a = vec![vec![0.0; ns]; ns];
    let mut b = vec![0.0; ns];
    for s in 0..ns {
        a[s][s] += 1.0;
        for act in 0..na {
            let w = policy[s][act];
            b[s] += w * mdp.reward(s, act);
            for (t, p) in mdp.transition_row(s, act).iter().enumerate() {
                a[s][t] -= g * w * p;
            }
        }
    }
    gauss(a, b)
}

/// `Q*` as the entrywise best `Q^π` over every deterministic policy.
pub fn q_star_by_enumeration(mdp: &Mdp) -> Vec<f64> {
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let mut best = vec![f64::NEG_INFINITY; ns * na];
    for code in 0..na.pow(ns as u32) {
        let mut c = code;
        let policy: Vec<Vec<f64>> = (0..ns)
            .map(|_| {
                let a = c % na;
                c /= na;
                (0..na).map(|b| if a == b { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let v = naive_policy_value(mdp, &policy);
        for s in 0..ns {
            for a in 0..na {
                let q = mdp.reward(s, a) + g * mdp.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum::<f64>();
                best[s * na + a] = best[s * na + a].max(q);
            }
        }
    }
    best
}

/// Stationary row of a kernel by solving `μ(I − P) = 0` with one equation
/// replaced by `Σμ = 1`.
pub fn naive_stationary(k: &Kernel) -> Vec<f64> {
    let n = k.size();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[j][i] = if i == j { 1.0 } else { 0.0 } - k.get(i, j);
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    gauss(a, b)
}

pub fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Draws an index from `probs` by inverse CDF.
pub fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
