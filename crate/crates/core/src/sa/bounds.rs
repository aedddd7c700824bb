//! Bound evaluators: the exponent/constant bundle, `χ` products, the
//! `g, g₁, g₂` rate functions, concentration exponents and the recursion
//! lemma check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::KahanSum;
use crate::schedule::Schedule;

/// Which instantiation a condition or constant set refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Algo {
    #[serde(rename = "genericSA")]
    GenericSa,
    Boltzmann,
    Seg,
}

/// Exponents, stepsize scale and the constants `c1 … c10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundSpec {
    pub a: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub beta: f64,
    pub n0: u64,
    pub delta: f64,
    /// Keys `c1` … `c10`.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// Iterate dimension.
    pub d: usize,
}

impl BoundSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta {} outside (0,1)", self.delta)));
        }
        for (name, v) in [("kappa1", self.kappa1), ("kappa2", self.kappa2), ("kappa3", self.kappa3), ("a", self.a)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside [0,1]")));
            }
        }
        if let Some((k, v)) = self.constants.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::InvalidArgument(format!("constant {k} = {v} must be positive")));
        }
        Ok(())
    }

    /// Constant `c{i}`, or `MissingParameter`.
    pub fn c(&self, i: usize) -> Result<f64> {
        let key = format!("c{i}");
        self.constants.get(&key).copied().ok_or(Error::MissingParameter(key))
    }

    /// `(C₁, …, C₆)`; `C₂` is `+∞` when `2𝔞 + 2κ₁ + κ₃ = 0`.
    pub fn big_c(&self) -> Result<[f64; 6]> {
        let c: Vec<f64> = (1..=10).map(|i| self.c(i)).collect::<Result<_>>()?;
        let (c1, c2, c3, c4, c5) = (c[0], c[1], c[2], c[3], c[4]);
        let (c7, c8, c9, c10) = (c[6], c[7], c[8], c[9]);
        let big1 = 16.0 * self.d as f64 * self.beta.sqrt() * c9 * c1 * c2;
        let denom = 2.0 * self.a + 2.0 * self.kappa1 + self.kappa3;
        let num2 = 4.0 * self.beta * c1 * c2 * (c10 + 2.0 * c9 * c1) * c2 * c9 * c5 * (c7 + c8 + c9);
        let big2 = if denom > 0.0 { num2 / denom } else { f64::INFINITY };
        let big3 = 2.0 * c2 * c2 * c1 * c9 * c4 * (c10 + 2.0 * c1);
        let k = 2.0 * c5 * c9 * c10 * c2 / c3;
        Ok([big1, big2, big3, k * big1, k * big2, k * big3])
    }
}

/// `g(n,δ)`, `g₁(n)`, `g₂(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunctions {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

pub fn bound_g(n: u64, spec: &BoundSpec) -> RateFunctions {
    let nf = n as f64;
    let m = (n + spec.n0) as f64;
    let (a, k1, k2, k3) = (spec.a, spec.kappa1, spec.kappa2, spec.kappa3);
    RateFunctions {
        g: ((nf * nf / spec.delta).ln() / m.powf(1.0 - (a + 2.0 * k1))).sqrt(),
        g1: m.ln() / m.powf(1.0 - (a + 2.0 * k1 + k3)),
        g2: 1.0 / m.powf(1.0 - (2.0 * k1 + k2)),
    }
}

/// Polynomial exponents of the concentration bound (negative means decay).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponents {
    /// `−1/2 + 2κ₁ + max{𝔞 + κ₃, κ₂}`.
    pub headline: f64,
    /// Exponents of `n^{2κ₁+κ₃}·g`, `n^{2κ₁+κ₃}·g₁`, `n^{2κ₁+κ₃}·g₂`.
    pub detailed_terms: [f64; 3],
    /// Largest of the three detailed exponents.
    pub detailed: f64,
}

pub fn theorem1_rate(spec: &BoundSpec) -> RateExponents {
    let (a, k1, k2, k3) = (spec.a, spec.kappa1, spec.kappa2, spec.kappa3);
    let lead = 2.0 * k1 + k3;
    let terms = [
        lead - (1.0 - (a + 2.0 * k1)) / 2.0,
        lead - (1.0 - (a + 2.0 * k1 + k3)),
        lead - (1.0 - (2.0 * k1 + k2)),
    ];
    RateExponents {
        headline: -0.5 + 2.0 * k1 + (a + k3).max(k2),
        detailed_terms: terms,
        detailed: terms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// `χ(m, n) = Π_{j=m}^{n} (1 − β_j)`, accumulated in log space.
pub fn chi(m: u64, n: u64, stepsize: &Schedule) -> Result<f64> {
    if m > n {
        return Ok(1.0);
    }
    let mut log = KahanSum::default();
    for j in m..=n {
        let b = stepsize.eval(j)?;
        if b >= 1.0 {
            return Err(Error::StepsizeTooLarge(j));
        }
        log.add((-b).ln_1p());
    }
    Ok(log.value().exp())
}

/// Outcome of [`recursion_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub sn: f64,
    pub bound: f64,
    pub ok: bool,
    /// Which set of preconditions applied (1 or 2).
    pub part: u8,
}

/// Checks `S_n ≤ 2 b_n / a_n` for `a_n = a/(n+n₀)^ρ`, `b_n = b/(n+n₀)^{ρ'}`
/// and `S_n = Σ_{i<n} b_i Π_{j=i+1}^{n−1} (1 − a_j)`.
pub fn recursion_bound_check(a: f64, b: f64, rho: f64, rho_prime: f64, n0: u64, n: u64) -> Result<RecursionCheck> {
    if !(a > 0.0) || b < 0.0 || n0 == 0 {
        return Err(Error::PreconditionUnmet("need a > 0, b ≥ 0, n0 ≥ 1".into()));
    }
    let part = if rho == 1.0 {
        if !(rho_prime > 1.0 && rho_prime <= 2.0) || a < 2.0 * (rho_prime - 1.0) {
            return Err(Error::PreconditionUnmet("part 1: need ρ' ∈ (1,2] and a ≥ 2(ρ'−1)".into()));
        }
        1
    } else if (0.0..1.0).contains(&rho) {
        let need = (2.0 * (rho_prime - rho) / a).powf(1.0 / (1.0 - rho));
        if !(rho_prime > rho) || (n0 as f64) < need {
            return Err(Error::PreconditionUnmet(format!("part 2: need ρ' > ρ and n0 ≥ {need}")));
        }
        2
    } else {
        return Err(Error::PreconditionUnmet(format!("ρ = {rho} outside [0,1]")));
    };
    let an = |k: u64| a / ((k + n0) as f64).powf(rho);
    let bn = |k: u64| b / ((k + n0) as f64).powf(rho_prime);
    let mut s = 0.0;
    for k in 0..n {
        s = (1.0 - an(k)) * s + bn(k);
    }
    let bound = 2.0 * bn(n) / an(n);
    Ok(RecursionCheck { sn: s, bound, ok: s <= bound, part })
}

/// Exploration hyperparameters and problem quantities used to identify
/// exponents and constants and to evaluate conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Extras {
    /// Temperature decay `𝔟` of the inverse-log schedule.
    pub b: Option<f64>,
    /// Exploration decay `𝔡`.
    pub d: Option<f64>,
    /// Temperature decay `𝔢` of the power schedule.
    pub e: Option<f64>,
    pub gap: Option<f64>,
    pub rmax: Option<f64>,
    pub gamma: Option<f64>,
    pub mu_min_s: Option<f64>,
    pub num_states: Option<usize>,
    pub num_actions: Option<usize>,
    pub diameter: Option<f64>,
    /// `min_s ‖Q(s,·)‖₁` for the exploration-probability condition.
    pub q_row_l1: Option<f64>,
}

pub(crate) fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingParameter(name.to_string()))
}

/// Exponents `(κ₁, κ₂, κ₃)` of the Q-learning instantiations.
pub fn identify_kappas(algo: Algo, extras: &Extras) -> Result<(f64, f64, f64)> {
    match algo {
        Algo::GenericSa => Err(Error::InvalidArgument("generic systems carry their own exponents".into())),
        Algo::Boltzmann => {
            let (b, rmax, gamma) = (need(extras.b, "b")?, need(extras.rmax, "rmax")?, need(extras.gamma, "gamma")?);
            Ok((b * rmax / (1.0 - gamma), 0.0, 0.0))
        }
        Algo::Seg => {
            let (d, e) = (need(extras.d, "d")?, need(extras.e, "e")?);
            Ok((d, e, e))
        }
    }
}

/// Default constants `c1 … c10` for the Q-learning instantiations.
pub fn identify_constants(algo: Algo, extras: &Extras) -> Result<BTreeMap<String, f64>> {
    let rmax = need(extras.rmax, "rmax")?;
    let gamma = need(extras.gamma, "gamma")?;
    let mu = need(extras.mu_min_s, "muMinS")?;
    let na = need(extras.num_actions, "numActions")? as f64;
    let ns = need(extras.num_states, "numStates")? as f64;
    let diam = need(extras.diameter, "diameter")?;
    let vmax = rmax / (1.0 - gamma);
    let (c3, c4, c5) = match algo {
        Algo::GenericSa => {
            return Err(Error::InvalidArgument("generic systems carry their own constants".into()));
        }
        Algo::Boltzmann => {
            let b = need(extras.b, "b")?;
            ((1.0 - gamma) * mu / na, b * na * rmax / (1.0 - gamma), ns * ns * na * na * b)
        }
        Algo::Seg => (2.0 * (1.0 - gamma) * mu / na, 2.0 * rmax / (1.0 - gamma), 1.0),
    };
    let values = [diam, 1.0 - gamma, c3, c4, c5, 1.0 + gamma, vmax, vmax, vmax, mu * diam / na];
    Ok(values.iter().enumerate().map(|(i, v)| (format!("c{}", i + 1), *v)).collect())
}
