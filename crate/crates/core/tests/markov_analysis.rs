#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use proptest::prelude::*;
use qlab::benchmarks::three_state;
use qlab::markov::{
    expected_hitting_times, mdp_diameter, multistep_kernel_deviation, poisson_residual, solve_poisson,
    stationary_distribution, stationary_sensitivity_check, Kernel,
};
use qlab::mdp::validate_mdp;
use qlab::{Error, Mdp, RawMdp};
use rand::Rng;

fn two_state(p: f64, q: f64) -> Kernel {
    Kernel::new(vec![vec![1.0 - p, p], vec![q, 1.0 - q]]).unwrap()
}

/// Expected hitting times of `target` via the test-local solver.
fn naive_hitting(k: &Kernel, target: usize) -> Vec<f64> {
    let n = k.size();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![1.0; n];
    for i in 0..n {
        if i == target {
            a[i][i] = 1.0;
            b[i] = 0.0;
            continue;
        }
        for j in 0..n {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - if j == target { 0.0 } else { k.get(i, j) };
        }
    }
    gauss(a, b)
}

#[test]
fn doubly_stochastic_is_uniform() {
    let k = Kernel::new(vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.2, 0.3], vec![0.3, 0.5, 0.2]]).unwrap();
    let mu = stationary_distribution(&k).unwrap();
    for p in &mu.probs {
        assert!((p - 1.0 / 3.0).abs() <= 1e-12);
    }
}

#[test]
fn two_state_closed_form() {
    let mu = stationary_distribution(&two_state(0.1, 0.2)).unwrap();
    assert!((mu.probs[0] - 2.0 / 3.0).abs() <= 1e-12);
    assert!((mu.probs[1] - 1.0 / 3.0).abs() <= 1e-12);
    assert!((mu.mu_min - 1.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn reducible_kernel_is_rejected() {
    let k = Kernel::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    assert!(matches!(stationary_distribution(&k), Err(Error::NotIrreducible)));
    assert!(matches!(expected_hitting_times(&k, 1), Err(Error::NotIrreducible)));
}

#[test]
fn stationary_matches_long_run_occupancy() {
    let mut r = rng(1);
    let k = random_kernel(&mut r, 6);
    let mu = stationary_distribution(&k).unwrap();
    let steps = 10_000_000u64;
    let mut counts = [0u64; 6];
    let mut y = 0;
    for _ in 0..steps {
        counts[y] += 1;
        y = draw(k.row(y), &mut r);
    }
    let tv: f64 = 0.5 * counts.iter().zip(&mu.probs).map(|(c, p)| (*c as f64 / steps as f64 - p).abs()).sum::<f64>();
    assert!(tv <= 1e-3, "tv {tv}");
}

#[test]
fn hitting_time_of_target_is_zero() {
    let k = random_kernel(&mut rng(2), 5);
    assert_eq!(expected_hitting_times(&k, 3).unwrap()[3], 0.0);
}

#[test]
fn geometric_hitting_time() {
    let h = expected_hitting_times(&two_state(0.25, 0.6), 1).unwrap();
    assert!((h[0] - 4.0).abs() <= 1e-12);
}

#[test]
fn hitting_times_match_simulation() {
    let mut r = rng(3);
    let k = random_kernel(&mut r, 6);
    let h = expected_hitting_times(&k, 0).unwrap();
    assert!(inf_dist(&h, &naive_hitting(&k, 0)) <= 1e-10);
    let episodes = 1_000_000;
    for start in 1..6 {
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..episodes {
            let (mut y, mut t) = (start, 0.0);
            while y != 0 {
                y = draw(k.row(y), &mut r);
                t += 1.0;
            }
            sum += t;
            sq += t * t;
        }
        let mean = sum / episodes as f64;
        let se = ((sq / episodes as f64 - mean * mean) / episodes as f64).sqrt();
        assert!((mean - h[start]).abs() <= 3.0 * se, "start {start}: {mean} vs {}", h[start]);
    }
}

fn one_state_mdp() -> Mdp {
    validate_mdp(&RawMdp {
        num_states: 1,
        num_actions: 2,
        gamma: 0.5,
        rmax: 1.0,
        rewards: vec![vec![0.0, 1.0]],
        transitions: vec![vec![vec![1.0], vec![1.0]]],
    })
    .unwrap()
}

#[test]
fn diameter_of_one_state_is_zero() {
    assert_eq!(mdp_diameter(&one_state_mdp()).unwrap(), 0.0);
}

#[test]
fn diameter_of_swap_chain_is_one() {
    let swap = vec![vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![1.0, 0.0]]];
    let mdp = validate_mdp(&RawMdp {
        num_states: 2,
        num_actions: 2,
        gamma: 0.5,
        rmax: 1.0,
        rewards: vec![vec![0.0; 2]; 2],
        transitions: swap,
    })
    .unwrap();
    assert_eq!(mdp_diameter(&mdp).unwrap(), 1.0);
}

#[test]
fn disconnected_pair_is_unreachable() {
    let stay = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
    let mdp = validate_mdp(&RawMdp {
        num_states: 2,
        num_actions: 1,
        gamma: 0.5,
        rmax: 1.0,
        rewards: vec![vec![0.0]; 2],
        transitions: stay,
    })
    .unwrap();
    assert!(matches!(mdp_diameter(&mdp), Err(Error::Unreachable { .. })));
}

#[test]
fn diameter_cap() {
    let mut r = rng(4);
    let mdp = random_mdp(&mut r, 21, 2, 0.5);
    assert!(matches!(mdp_diameter(&mdp), Err(Error::InstanceTooLarge(_))));
}

#[test]
fn three_state_diameter_matches_simulation() {
    let mdp = three_state();
    let d = mdp_diameter(&mdp).unwrap();
    let (ns, na) = (3usize, 2usize);
    let mut worst = (0.0, 0, 0, 0);
    for code in 0..na * na * na {
        let acts: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
        let k = Kernel::new((0..ns).map(|s| mdp.transition_row(s, acts[s]).to_vec()).collect()).unwrap();
        for t in 0..ns {
            let h = naive_hitting(&k, t);
            for (s, v) in h.iter().enumerate() {
                if *v > worst.0 {
                    worst = (*v, code, s, t);
                }
            }
        }
    }
    assert!((d - worst.0).abs() <= 1e-9);
    let (_, code, start, target) = worst;
    let acts: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
    let mut r = rng(5);
    let episodes = 100_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let (mut s, mut t) = (start, 0.0);
        while s != target {
            s = draw(mdp.transition_row(s, acts[s]), &mut r);
            t += 1.0;
        }
        sum += t;
        sq += t * t;
    }
    let mean = sum / episodes as f64;
    let se = ((sq / episodes as f64 - mean * mean) / episodes as f64).sqrt();
    assert!((mean - d).abs() <= 3.0 * se, "sim {mean} vs {d}");
}

#[test]
fn poisson_iid_closed_form() {
    let mut r = rng(6);
    let mu_row = random_row(&mut r, 5);
    let k = Kernel::new(vec![mu_row.clone(); 5]).unwrap();
    let mu = stationary_distribution(&k).unwrap();
    let f: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let sol = solve_poisson(&k, &f, &mu, 2).unwrap();
    for i in 0..5 {
        for c in 0..3 {
            assert!((sol.h[i][c] - (f[i][c] - f[2][c])).abs() <= 1e-12);
        }
    }
}

#[test]
fn poisson_constant_is_zero() {
    let k = random_kernel(&mut rng(7), 4);
    let mu = stationary_distribution(&k).unwrap();
    let sol = solve_poisson(&k, &vec![vec![0.7, -2.0]; 4], &mu, 0).unwrap();
    assert!(sol.h.iter().flatten().all(|v| v.abs() <= 1e-12));
}

#[test]
fn poisson_residual_on_random_instance() {
    let mut r = rng(8);
    let k = random_kernel(&mut r, 6);
    let mu = stationary_distribution(&k).unwrap();
    let f: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| r.random_range(-5.0..5.0)).collect()).collect();
    let sol = solve_poisson(&k, &f, &mu, 4).unwrap();
    assert_eq!(sol.designated, 4);
    assert_eq!(sol.h[4], vec![0.0; 4]);
    assert!(poisson_residual(&k, &f, &mu, &sol) <= 1e-10);
}

#[test]
fn deviation_of_identical_kernels_is_zero() {
    let k = random_kernel(&mut rng(9), 4);
    for ell in 1..6 {
        assert_eq!(multistep_kernel_deviation(&k, &k, ell).unwrap().deviation, 0.0);
    }
}

#[test]
fn one_step_deviation_is_the_distance() {
    let mut r = rng(10);
    let (p, q) = (random_kernel(&mut r, 4), random_kernel(&mut r, 4));
    let rep = multistep_kernel_deviation(&p, &q, 1).unwrap();
    assert_eq!(rep.deviation, p.dist_inf(&q).unwrap());
}

#[test]
fn five_step_deviation_matches_matrix_powers() {
    let mut r = rng(11);
    let (p, q) = (random_kernel(&mut r, 4), random_kernel(&mut r, 4));
    let pow = |k: &Kernel| {
        let mut m: Vec<Vec<f64>> = (0..4).map(|i| k.row(i).to_vec()).collect();
        for _ in 1..5 {
            m = (0..4).map(|i| (0..4).map(|j| (0..4).map(|l| m[i][l] * k.get(l, j)).sum()).collect()).collect();
        }
        m
    };
    let (pp, qq) = (pow(&p), pow(&q));
    let oracle = (0..4).map(|i| (0..4).map(|j| (pp[i][j] - qq[i][j]).abs()).sum::<f64>()).fold(0.0, f64::max);
    let rep = multistep_kernel_deviation(&p, &q, 5).unwrap();
    assert!((rep.deviation - oracle).abs() <= 1e-14);
    assert!(rep.holds && rep.deviation <= 5.0 * p.dist_inf(&q).unwrap());
}

#[test]
fn size_mismatch_is_reported() {
    let mut r = rng(12);
    let (p, q) = (random_kernel(&mut r, 3), random_kernel(&mut r, 4));
    assert!(matches!(multistep_kernel_deviation(&p, &q, 2), Err(Error::DimensionMismatch(_))));
}

#[test]
fn sensitivity_of_identical_kernels() {
    let k = random_kernel(&mut rng(13), 4);
    let rep = stationary_sensitivity_check(&k, &k, 0.0, 0.1).unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert!(rep.holds);
}

#[test]
fn sensitivity_two_state_family() {
    let (p, q) = (0.1_f64, 0.2_f64);
    let (pp, qp) = (0.15, 0.2);
    let exact = (q / (p + q) - qp / (pp + qp)).abs();
    let rep = stationary_sensitivity_check(&two_state(p, q), &two_state(pp, qp), 1.0, 1.0 / 3.0).unwrap();
    assert!((rep.lhs - exact).abs() <= 1e-12);
    assert!((rep.rhs - 0.1 * 3.0).abs() <= 1e-12);
}

#[test]
fn sensitivity_random_perturbation() {
    let mut r = rng(14);
    let k = random_kernel(&mut r, 5);
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            let raw: Vec<f64> = k.row(i).iter().map(|v| v * (1.0 + r.random_range(-0.05..0.05))).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect();
    let kp = Kernel::new(rows).unwrap();
    let rep = stationary_sensitivity_check(&k, &kp, 1.0, 0.05).unwrap();
    assert!((rep.lhs - inf_dist(&naive_stationary(&k), &naive_stationary(&kp))).abs() <= 1e-12);
    assert!((rep.rhs - k.dist_inf(&kp).unwrap() / 0.05).abs() <= 1e-12);
}

#[test]
fn kernel_json_round_trip() {
    let k = random_kernel(&mut rng(15), 3);
    let text = serde_json::to_string(&k).unwrap();
    assert_eq!(serde_json::from_str::<Kernel>(&text).unwrap(), k);
    assert!(serde_json::from_str::<Kernel>(r#"{"size":2,"rows":[[0.5,0.4],[0.5,0.5]]}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_invariants(seed in any::<u64>(), n in 2usize..8) {
        let k = random_kernel(&mut rng(seed), n);
        let mu = stationary_distribution(&k).unwrap();
        prop_assert!(mu.residual(&k) <= 1e-10);
        prop_assert!((mu.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(mu.probs.iter().all(|p| *p >= 0.0));
        prop_assert!(inf_dist(&mu.probs, &naive_stationary(&k)) <= 1e-10);
    }

    #[test]
    fn hitting_times_nonnegative(seed in any::<u64>(), n in 2usize..8, t in 0usize..8) {
        let k = random_kernel(&mut rng(seed), n);
        let t = t % n;
        let h = expected_hitting_times(&k, t).unwrap();
        prop_assert_eq!(h[t], 0.0);
        prop_assert!(h.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn poisson_invariants(seed in any::<u64>(), n in 2usize..8, d in 1usize..4, i_star in 0usize..8) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, n);
        let mu = stationary_distribution(&k).unwrap();
        let f: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let sol = solve_poisson(&k, &f, &mu, i_star % n).unwrap();
        prop_assert!(sol.h[i_star % n].iter().all(|v| *v == 0.0));
        prop_assert!(poisson_residual(&k, &f, &mu, &sol) <= 1e-10);
    }

    #[test]
    fn multistep_bound_holds(seed in any::<u64>(), n in 2usize..6, ell in 1u32..8) {
        let mut r = rng(seed);
        let (p, q) = (random_kernel(&mut r, n), random_kernel(&mut r, n));
        let rep = multistep_kernel_deviation(&p, &q, ell).unwrap();
        prop_assert!(rep.holds);
        prop_assert!(rep.deviation <= ell as f64 * p.dist_inf(&q).unwrap() + 1e-12);
    }
}
