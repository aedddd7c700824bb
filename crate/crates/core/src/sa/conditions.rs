//! Hyperparameter conditions and the "for all n" conditions on `n₀`.

use serde::Serialize;

use super::bounds::{bound_g, need, Algo, BoundSpec, Extras};
use crate::error::Result;

const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs + EQ_TOL,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs - EQ_TOL,
        }
    }
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: String,
    pub formula: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub satisfied: bool,
    /// Non-gating items are reported but do not fail the set.
    pub gating: bool,
}

/// True when every gating condition holds.
pub fn all_satisfied(results: &[ConditionResult]) -> bool {
    results.iter().all(|r| r.satisfied || !r.gating)
}

/// Ids of failing gating conditions.
pub fn failing_ids(results: &[ConditionResult]) -> Vec<String> {
    results.iter().filter(|r| r.gating && !r.satisfied).map(|r| r.id.clone()).collect()
}

struct Collector {
    out: Vec<ConditionResult>,
}

impl Collector {
    fn push(&mut self, id: &str, formula: &str, lhs: f64, relation: Relation, rhs: f64) {
        self.out.push(ConditionResult {
            id: id.to_string(),
            formula: formula.to_string(),
            lhs,
            relation,
            rhs,
            satisfied: relation.holds(lhs, rhs),
            gating: true,
        });
    }

    fn advisory(&mut self, id: &str, formula: &str, lhs: f64, relation: Relation, rhs: f64) {
        self.push(id, formula, lhs, relation, rhs);
        self.out.last_mut().expect("just pushed").gating = false;
    }
}

/// `(x/y)^p`, zero when the base is nonpositive.
fn root_bound(x: f64, y: f64, p: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x / y).powf(p)
    }
}

/// Evaluates every inequality of the condition set for `algo`, including
/// the case-specific ones (𝔞 = 0; 𝔞 > 0; 𝔞 = κ₁ > 0; 𝔞 > κ₁).
pub fn check_conditions(spec: &BoundSpec, algo: Algo, extras: &Extras) -> Result<Vec<ConditionResult>> {
    let mut c = Collector { out: Vec::new() };
    match algo {
        Algo::GenericSa => generic(&mut c, spec)?,
        Algo::Boltzmann => boltzmann(&mut c, spec, extras)?,
        Algo::Seg => seg(&mut c, spec, extras)?,
    }
    Ok(c.out)
}

fn generic(c: &mut Collector, spec: &BoundSpec) -> Result<()> {
    use Relation::*;
    let (a, k1, k2, k3, beta, n0) = (spec.a, spec.kappa1, spec.kappa2, spec.kappa3, spec.beta, spec.n0 as f64);
    c.push("sa.base.1", "2a+6k1+3k3<1", 2.0 * a + 6.0 * k1 + 3.0 * k3, Lt, 1.0);
    c.push("sa.base.2", "a+6k1+k2+2k3<1", a + 6.0 * k1 + k2 + 2.0 * k3, Lt, 1.0);
    if a == 0.0 {
        c.push("sa.caseA.1", "beta>=2(1-2k1)", beta, Ge, 2.0 * (1.0 - 2.0 * k1));
        c.push("sa.caseA.2", "2k1+k3<1", 2.0 * k1 + k3, Lt, 1.0);
    } else {
        c.push("sa.caseB.1", "a+2k1<1", a + 2.0 * k1, Lt, 1.0);
        c.push("sa.caseB.2", "2k1+k3<1+a", 2.0 * k1 + k3, Lt, 1.0 + a);
        let xs = [
            ("sa.caseB.3", "n0>=(2((1-a)-2k1)/beta)^(1/a)", 2.0 * ((1.0 - a) - 2.0 * k1)),
            ("sa.caseB.4", "n0>=(2(1-a-k1)/beta)^(1/a)", 2.0 * (1.0 - a - k1)),
            ("sa.caseB.5", "n0>=(2(1-(a+2k1+k3))/beta)^(1/a)", 2.0 * (1.0 - (a + 2.0 * k1 + k3))),
            ("sa.caseB.6", "n0>=((1-(2k1+k2))/beta)^(1/a)", 1.0 - (2.0 * k1 + k2)),
        ];
        for (id, f, x) in xs {
            c.push(id, f, n0, Ge, root_bound(x, beta, 1.0 / a));
        }
    }
    if a > 0.0 && (a - k1).abs() <= EQ_TOL {
        let bc3 = beta * spec.c(3)?;
        c.push("sa.caseC.1", "3a+4k1+2k3<1", 3.0 * a + 4.0 * k1 + 2.0 * k3, Lt, 1.0);
        c.push("sa.caseC.2", "beta*c3>=1-(3a+4k1+2k3)", bc3, Ge, 1.0 - (3.0 * a + 4.0 * k1 + 2.0 * k3));
        c.push("sa.caseC.3", "beta*c3>=2-(4a+6k1+4k3)", bc3, Ge, 2.0 - (4.0 * a + 6.0 * k1 + 4.0 * k3));
        c.push("sa.caseC.4", "a+3k1+k2+k3<1", a + 3.0 * k1 + k2 + k3, Lt, 1.0);
        c.push("sa.caseC.5", "beta*c3>=2-(2a+6k1+2k2+2k3)", bc3, Ge, 2.0 - (2.0 * a + 6.0 * k1 + 2.0 * k2 + 2.0 * k3));
    } else if a > k1 + EQ_TOL {
        let bc3 = beta * spec.c(3)?;
        let p = 1.0 / (a - k1);
        c.push("sa.caseD.1", "a+6k1+2k3<1", a + 6.0 * k1 + 2.0 * k3, Lt, 1.0);
        c.push("sa.caseD.2", "4k1+k2+k3<1", 4.0 * k1 + k2 + k3, Lt, 1.0);
        let xs = [
            ("sa.caseD.3", "n0>=((1-(a+6k1+2k3))/(beta*c3))^(1/(a-k1))", 1.0 - (a + 6.0 * k1 + 2.0 * k3)),
            ("sa.caseD.4", "n0>=(2(1-(a+4k1+2k3))/(beta*c3))^(1/(a-k1))", 2.0 * (1.0 - (a + 4.0 * k1 + 2.0 * k3))),
            ("sa.caseD.5", "n0>=(2(1-(4k1+k2+k3))/(beta*c3))^(1/(a-k1))", 2.0 * (1.0 - (4.0 * k1 + k2 + k3))),
        ];
        for (id, f, x) in xs {
            c.push(id, f, n0, Ge, root_bound(x, bc3, p));
        }
    }
    Ok(())
}

fn boltzmann(c: &mut Collector, spec: &BoundSpec, extras: &Extras) -> Result<()> {
    use Relation::*;
    let (a, k1, beta, n0) = (spec.a, spec.kappa1, spec.beta, spec.n0 as f64);
    c.push("boltz.base.1", "2a+6k1<1", 2.0 * a + 6.0 * k1, Lt, 1.0);
    if a == 0.0 {
        c.push("boltz.base.caseA.1", "beta>=2(1-2k1)", beta, Ge, 2.0 * (1.0 - 2.0 * k1));
        c.push("boltz.base.caseA.2", "beta>=2(1-(a+2k1))", beta, Ge, 2.0 * (1.0 - (a + 2.0 * k1)));
        c.push("boltz.base.caseA.3", "2k1<1", 2.0 * k1, Lt, 1.0);
    } else {
        c.push("boltz.base.caseB.1", "a+k1<1", a + k1, Lt, 1.0);
        c.push("boltz.base.caseB.2", "2k1<1+a", 2.0 * k1, Lt, 1.0 + a);
        let xs = [
            ("boltz.base.caseB.3", "n0>=(2((1-a)-2k1)/beta)^(1/a)", 2.0 * ((1.0 - a) - 2.0 * k1)),
            ("boltz.base.caseB.4", "n0>=(2(1-a-k1)/beta)^(1/a)", 2.0 * (1.0 - a - k1)),
            ("boltz.base.caseB.5", "n0>=(2(1-(a+2k1))/beta)^(1/a)", 2.0 * (1.0 - (a + 2.0 * k1))),
            ("boltz.base.caseB.6", "n0>=((1-2k1)/beta)^(1/a)", 1.0 - 2.0 * k1),
        ];
        for (id, f, x) in xs {
            c.push(id, f, n0, Ge, root_bound(x, beta, 1.0 / a));
        }
    }
    if a > 0.0 && (a - k1).abs() <= EQ_TOL {
        let bc3 = beta * spec.c(3)?;
        c.push("boltz.base.caseC.1", "7a<1", 7.0 * a, Lt, 1.0);
        c.push("boltz.base.caseC.2", "beta*c3>=1-7a", bc3, Ge, 1.0 - 7.0 * a);
        c.push("boltz.base.caseC.3", "beta*c3>=2-8a", bc3, Ge, 2.0 - 8.0 * a);
    } else if a > k1 + EQ_TOL {
        let bc3 = beta * spec.c(3)?;
        let p = 1.0 / (a - k1);
        c.push("boltz.base.caseD.1", "a+6k1<1", a + 6.0 * k1, Lt, 1.0);
        let xs = [
            ("boltz.base.caseD.2", "n0>=((1-(a+6k1))/(beta*c3))^(1/(a-k1))", 1.0 - (a + 6.0 * k1)),
            ("boltz.base.caseD.3", "n0>=(2(1-(a+4k1))/(beta*c3))^(1/(a-k1))", 2.0 * (1.0 - (a + 4.0 * k1))),
            ("boltz.base.caseD.4", "n0>=(2(1-4k1)/(beta*c3))^(1/(a-k1))", 2.0 * (1.0 - 4.0 * k1)),
        ];
        for (id, f, x) in xs {
            c.push(id, f, n0, Ge, root_bound(x, bc3, p));
        }
    }
    c.push("boltz.conc.1", "a+3k1<1/2", a + 3.0 * k1, Lt, 0.5);
    c.push("boltz.conc.2", "a+6k1<1", a + 6.0 * k1, Lt, 1.0);
    if a == 0.0 {
        c.push("boltz.conc.caseA.1", "k1<1/2", k1, Lt, 0.5);
        c.push("boltz.conc.caseA.2", "beta>=2(1-2k1)", beta, Ge, 2.0 * (1.0 - 2.0 * k1));
    } else {
        c.push("boltz.conc.caseB.1", "a+2k1<1", a + 2.0 * k1, Lt, 1.0);
    }
    let (b, rmax, gamma) = (need(extras.b, "b")?, need(extras.rmax, "rmax")?, need(extras.gamma, "gamma")?);
    c.push("boltz.regret.1", "b*rmax/(1-gamma)<=a", b * rmax / (1.0 - gamma), Le, a);
    Ok(())
}

fn seg(c: &mut Collector, spec: &BoundSpec, extras: &Extras) -> Result<()> {
    use Relation::*;
    let (a, beta) = (spec.a, spec.beta);
    let (d, e) = (need(extras.d, "d")?, need(extras.e, "e")?);
    c.push("seg.base.1", "2a+6d+3e<1", 2.0 * a + 6.0 * d + 3.0 * e, Lt, 1.0);
    c.push("seg.base.2", "a+6d+3e<1", a + 6.0 * d + 3.0 * e, Lt, 1.0);
    c.push("seg.base.3", "2d+e<1+a", 2.0 * d + e, Lt, 1.0 + a);
    c.push("seg.base.4", "a+d<1", a + d, Lt, 1.0);
    c.push("seg.base.5", "2d+e<1", 2.0 * d + e, Lt, 1.0);
    if a == 0.0 {
        c.push("seg.base.caseA.1", "beta>=2(1-2d)", beta, Ge, 2.0 * (1.0 - 2.0 * d));
    } else if (a - d).abs() <= EQ_TOL {
        let gamma = need(extras.gamma, "gamma")?;
        let mu = need(extras.mu_min_s, "muMinS")?;
        let na = need(extras.num_actions, "numActions")? as f64;
        let worst = (1.0 - (3.0 * a + 4.0 * d + 2.0 * e))
            .max(2.0 - (4.0 * a + 6.0 * d + 4.0 * e))
            .max(2.0 - (2.0 * a + 6.0 * d + 4.0 * e));
        c.push("seg.base.caseB.1", "3a+4d+2e<1", 3.0 * a + 4.0 * d + 2.0 * e, Lt, 1.0);
        c.push(
            "seg.base.caseB.2",
            "beta>=|A|/(2(1-gamma)muMinS)*max{1-(3a+4d+2e),2-(4a+6d+4e),2-(2a+6d+4e)}",
            beta,
            Ge,
            na / (2.0 * (1.0 - gamma) * mu) * worst,
        );
    }
    c.push("seg.conc.1", "2a+6d+3e<1", 2.0 * a + 6.0 * d + 3.0 * e, Lt, 1.0);
    c.push("seg.conc.2", "a+3d+e<1/2", a + 3.0 * d + e, Lt, 0.5);
    if a == 0.0 {
        c.push("seg.conc.caseA.1", "d<1/2", d, Lt, 0.5);
        c.push("seg.conc.caseA.2", "beta>=2(1-2d)", beta, Ge, 2.0 * (1.0 - 2.0 * d));
    } else {
        c.push("seg.conc.caseB.1", "a+2d<1", a + 2.0 * d, Lt, 1.0);
    }
    c.push("seg.regret.1", "2a+6d+4e<1", 2.0 * a + 6.0 * d + 4.0 * e, Lt, 1.0);
    c.push("seg.regret.2", "e<d", e, Lt, d);
    c.push("seg.regret.3", "a-e<1", a - e, Lt, 1.0);
    c.push("seg.regret.4", "d<=a", d, Le, a);
    c.advisory("seg.regret.5", "e>0", e, Gt, 0.0);
    Ok(())
}

/// Leading behaviour `coef · m^power · (ln m)^log` of one side as `m → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asym {
    pub power: f64,
    pub log: f64,
    pub coef: f64,
}

impl Asym {
    pub fn new(coef: f64, power: f64, log: f64) -> Asym {
        Asym { power, log, coef }
    }

    /// Decays faster than any power.
    pub fn vanishing() -> Asym {
        Asym { power: f64::NEG_INFINITY, log: 0.0, coef: 1.0 }
    }

    /// Dominant term of a sum of nonnegative terms.
    pub fn sum(terms: &[Asym]) -> Asym {
        let lead = terms
            .iter()
            .filter(|t| t.coef > 0.0)
            .fold(None::<Asym>, |best, t| match best {
                None => Some(*t),
                Some(b) if t.power > b.power + EQ_TOL => Some(*t),
                Some(b) if (t.power - b.power).abs() <= EQ_TOL && t.log > b.log + EQ_TOL => Some(*t),
                Some(b) => Some(b),
            });
        let Some(lead) = lead else {
            return Asym::new(0.0, 0.0, 0.0);
        };
        let coef = terms
            .iter()
            .filter(|t| (t.power - lead.power).abs() <= EQ_TOL && (t.log - lead.log).abs() <= EQ_TOL)
            .map(|t| t.coef)
            .sum();
        Asym { coef, ..lead }
    }

    pub fn scale(self, c: f64, power: f64, log: f64) -> Asym {
        Asym { power: self.power + power, log: self.log + log, coef: self.coef * c }
    }
}

/// True when `larger` eventually exceeds `smaller`.
pub fn tail_dominates(larger: Asym, smaller: Asym) -> bool {
    if larger.coef <= 0.0 {
        return false;
    }
    if smaller.coef <= 0.0 || smaller.power == f64::NEG_INFINITY {
        return larger.power > f64::NEG_INFINITY;
    }
    if larger.power > smaller.power + EQ_TOL {
        return true;
    }
    if (larger.power - smaller.power).abs() > EQ_TOL {
        return false;
    }
    if larger.log > smaller.log + EQ_TOL {
        return true;
    }
    if (larger.log - smaller.log).abs() > EQ_TOL {
        return false;
    }
    larger.coef > smaller.coef
}

/// Grid evaluation of one "for all n" condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct N0Result {
    pub id: String,
    pub formula: String,
    /// False when a vanishing exponent denominator makes the condition vacuous.
    pub applicable: bool,
    pub satisfied: bool,
    /// First grid point where the condition fails.
    pub witness: Option<u64>,
    /// Sides at the witness, or at the last grid point when none fails.
    pub lhs: f64,
    pub rhs: f64,
    /// The side required to be larger dominates asymptotically.
    pub tail_ok: bool,
}

impl N0Result {
    /// Passing, or vacuous.
    pub fn ok(&self) -> bool {
        !self.applicable || (self.satisfied && self.tail_ok)
    }
}

/// Default probe grid: `{0} ∪ {⌊1.2^k⌋} ∩ [0, 10⁶]`.
pub fn n0_probe_grid() -> Vec<u64> {
    let mut g = vec![0];
    g.extend(crate::grid::geometric_grid(1.2, 1_000_000));
    g
}

struct N0Collector<'a> {
    grid: &'a [u64],
    out: Vec<N0Result>,
}

impl N0Collector<'_> {
    /// Requires `larger(n) > smaller(n)` for every grid point with `n ≥ from`.
    #[allow(clippy::too_many_arguments)]
    fn forall(
        &mut self,
        id: &str,
        formula: &str,
        from: u64,
        larger: impl Fn(u64) -> f64,
        smaller: impl Fn(u64) -> f64,
        big_asym: Asym,
        small_asym: Asym,
        larger_is_lhs: bool,
    ) {
        let mut witness = None;
        let mut last = (f64::NAN, f64::NAN);
        for &n in self.grid.iter().filter(|&&n| n >= from) {
            let (l, s) = (larger(n), smaller(n));
            last = (l, s);
            if !(l > s) {
                witness = Some(n);
                break;
            }
        }
        let (lhs, rhs) = if larger_is_lhs { last } else { (last.1, last.0) };
        self.out.push(N0Result {
            id: id.into(),
            formula: formula.into(),
            applicable: true,
            satisfied: witness.is_none(),
            witness,
            lhs,
            rhs,
            tail_ok: tail_dominates(big_asym, small_asym),
        });
    }

    fn constant(&mut self, id: &str, formula: &str, lhs: f64, rhs: f64) {
        let ok = lhs > rhs;
        self.out.push(N0Result {
            id: id.into(),
            formula: formula.into(),
            applicable: true,
            satisfied: ok,
            witness: if ok { None } else { Some(0) },
            lhs,
            rhs,
            tail_ok: ok,
        });
    }

    fn vacuous(&mut self, id: &str, formula: &str) {
        self.out.push(N0Result {
            id: id.into(),
            formula: formula.into(),
            applicable: false,
            satisfied: true,
            witness: None,
            lhs: f64::NAN,
            rhs: f64::NAN,
            tail_ok: true,
        });
    }
}

/// Evaluates the `n₀` conditions for `algo` on `grid` (values of `n`).
pub fn check_n0(spec: &BoundSpec, algo: Algo, extras: &Extras, grid: &[u64]) -> Result<Vec<N0Result>> {
    let mut col = N0Collector { grid, out: Vec::new() };
    let (a, k1, k2, k3, beta) = (spec.a, spec.kappa1, spec.kappa2, spec.kappa3, spec.beta);
    let n0 = spec.n0;
    let c: Vec<f64> = (1..=10).map(|i| spec.c(i)).collect::<Result<_>>()?;
    let (c1, c2, c3, c5, c6) = (c[0], c[1], c[2], c[4], c[5]);
    let (c7, c8, c9, c10) = (c[6], c[7], c[8], c[9]);
    let m = move |n: u64| (n + n0) as f64;

    col.constant("n0-I", "2*c9*c1*c2*n0^k1>c1", 2.0 * c9 * c1 * c2 * (n0 as f64).powf(k1), c1);

    let d2 = 2.0 * a + 2.0 * k1 + k3;
    let d1 = 2.0 * a + k1;
    if d2 > 0.0 && d1 > 0.0 {
        let kl = 2.0 * beta * c1 * c2 * (c10 + 2.0 * c9 * c1) * c2 * c9 * c5 * (c7 + c8 + c9) / d2;
        let kr = 8.0 * c9 * c1 * c2 / d1;
        let (pl, pr) = (-(1.0 - (a + 2.0 * k1 + k3)), -(1.0 - (a + k1)));
        col.forall(
            "n0-II",
            "[2beta c1 c2 (c10+2c9c1) c2 c9 c5 (c7+c8+c9) / (2a+2k1+k3)] ln(m) m^-(1-(a+2k1+k3)) > [8c9c1c2/(2a+k1)] m^-(1-(a+k1))",
            0,
            |n| kl * m(n).ln() * m(n).powf(pl),
            |n| kr * m(n).powf(pr),
            Asym::new(kl, pl, 1.0),
            Asym::new(kr, pr, 0.0),
            true,
        );
    } else {
        col.vacuous("n0-II", "requires 2a+2k1+k3>0 and 2a+k1>0");
    }

    let k3c = c5 * c9 * c10 * c2;
    col.forall(
        "n0-III",
        "c5 c9 c10 c2 m^(k1+k3) ln(m) > 1",
        0,
        |n| k3c * m(n).powf(k1 + k3) * m(n).ln(),
        |_| 1.0,
        Asym::new(k3c, k1 + k3, 1.0),
        Asym::new(1.0, 0.0, 0.0),
        true,
    );

    if d1 > 0.0 {
        let base = c9 * c1 * c2;
        let kl = 4.0 * base / d1;
        let n0a = (n0 as f64).powf(a);
        col.forall(
            "n0-IV",
            "[4c9c1c2/(2a+k1)] m^-(1-2a-k1) > n0^a 2c9c1c2 m^-(1-k1) + 2c9c1c2 m^-(1-a-k1)",
            0,
            |n| kl * m(n).powf(-(1.0 - 2.0 * a - k1)),
            |n| n0a * 2.0 * base * m(n).powf(-(1.0 - k1)) + 2.0 * base * m(n).powf(-(1.0 - a - k1)),
            Asym::new(kl, -(1.0 - 2.0 * a - k1), 0.0),
            Asym::sum(&[
                Asym::new(n0a * 2.0 * base, -(1.0 - k1), 0.0),
                Asym::new(2.0 * base, -(1.0 - a - k1), 0.0),
            ]),
            true,
        );
    } else {
        col.vacuous("n0-IV", "requires 2a+k1>0");
    }

    let k5 = (c10 + 2.0 * c1) * c9 * c2 * c5;
    col.forall(
        "n0-V",
        "(c10+2c1) c9 c2 c5 ln(m) m^(k1+k3) > 2c6",
        0,
        |n| k5 * m(n).ln() * m(n).powf(k1 + k3),
        |_| 2.0 * c6,
        Asym::new(k5, k1 + k3, 1.0),
        Asym::new(2.0 * c6, 0.0, 0.0),
        true,
    );

    if algo == Algo::GenericSa {
        return Ok(col.out);
    }

    let big = spec.big_c()?;
    let (bc4, bc5, bc6) = (big[3], big[4], big[5]);
    let rates = |n: u64| bound_g(n, spec);
    let g_asym = Asym::new(bc4 * 2.0_f64.sqrt(), -(1.0 - (a + 2.0 * k1)) / 2.0, 0.5);
    let g1_asym = Asym::new(bc5, -(1.0 - (a + 2.0 * k1 + k3)), 1.0);
    let g2_asym = Asym::new(bc6, -(1.0 - (2.0 * k1 + k2)), 0.0);
    let combo = move |n: u64| {
        let r = rates(n);
        bc4 * r.g + bc5 * r.g1 + bc6 * r.g2
    };
    let gap = extras.gap;

    if algo == Algo::Boltzmann {
        if bc5.is_finite() {
            col.forall(
                "n0-VI",
                "C5 g1(n) > C6 g2(n)",
                1,
                |n| bc5 * rates(n).g1,
                |n| bc6 * rates(n).g2,
                g1_asym,
                g2_asym,
                true,
            );
            let gap = need(gap, "gap")?;
            let asym = Asym::sum(&[g_asym, g1_asym, g2_asym]).scale(4.0 / c3, 2.0 * k1, 1.0);
            col.forall(
                "n0-VII",
                "gap/2 > 4 ln(m) m^(2k1)/c3 (C4 g + C5 g1 + C6 g2)",
                1,
                |_| gap / 2.0,
                |n| 4.0 * m(n).ln() * m(n).powf(2.0 * k1) / c3 * combo(n),
                Asym::new(gap / 2.0, 0.0, 0.0),
                asym,
                true,
            );
        } else {
            col.vacuous("n0-VI", "requires 2a+2k1+k3>0");
            col.vacuous("n0-VII", "requires 2a+2k1+k3>0");
        }
        return Ok(col.out);
    }

    let (d, e) = (need(extras.d, "d")?, need(extras.e, "e")?);
    let na = need(extras.num_actions, "numActions")? as f64;
    let gap = need(gap, "gap")?;
    let ql1 = need(extras.q_row_l1, "qRowL1")?;
    col.forall(
        "n0-VIII",
        "d m^-(1+d) < |Q(s',.)|_1 m^-(1-e)",
        0,
        |n| ql1 * m(n).powf(-(1.0 - e)),
        |n| d * m(n).powf(-(1.0 + d)),
        Asym::new(ql1, -(1.0 - e), 0.0),
        Asym::new(d, -(1.0 + d), 0.0),
        false,
    );
    if bc5.is_finite() {
        col.forall(
            "n0-IX.1",
            "C6 g2(n) < C5 g1(n)",
            1,
            |n| bc5 * rates(n).g1,
            |n| bc6 * rates(n).g2,
            g1_asym,
            g2_asym,
            false,
        );
    } else {
        col.vacuous("n0-IX.1", "requires 2a+2k1+k3>0");
    }
    let exp_asym = |rate: f64| {
        if e > 0.0 && rate > 0.0 {
            Asym::vanishing()
        } else {
            Asym::new(na * (-rate).exp(), 0.0, 0.0)
        }
    };
    col.forall(
        "n0-IX.2",
        "m^-d > |A| exp(-m^e gap)",
        0,
        |n| m(n).powf(-d),
        |n| na * (-m(n).powf(e) * gap).exp(),
        Asym::new(1.0, -d, 0.0),
        exp_asym(gap),
        true,
    );
    if bc5.is_finite() {
        let asym = Asym::sum(&[g_asym, g1_asym, g2_asym]).scale(4.0 / c3, 2.0 * k1 + k3, 1.0);
        col.forall(
            "n0-X",
            "gap/2 > 4 ln(m) m^(2k1+k3)/c3 (C4 g + C5 g1 + C6 g2)",
            1,
            |_| gap / 2.0,
            |n| 4.0 * m(n).ln() * m(n).powf(2.0 * k1 + k3) / c3 * combo(n),
            Asym::new(gap / 2.0, 0.0, 0.0),
            asym,
            true,
        );
    } else {
        col.vacuous("n0-X", "requires 2a+2k1+k3>0");
    }
    col.forall(
        "n0-XI",
        "exp(-(gap/2) m^e) < m^-d",
        0,
        |n| m(n).powf(-d),
        |n| (-(gap / 2.0) * m(n).powf(e)).exp(),
        Asym::new(1.0, -d, 0.0),
        if e > 0.0 { Asym::vanishing() } else { Asym::new((-(gap / 2.0)).exp(), 0.0, 0.0) },
        false,
    );
    let k12 = na * (c1 + c2 + c3);
    col.forall(
        "n0-XII",
        "m^-d + |A|(c1+c2+c3) m^-(1+d-a) < |A|(1+e) m^-(d-e)",
        0,
        |n| na * (1.0 + e) * m(n).powf(-(d - e)),
        |n| m(n).powf(-d) + k12 * m(n).powf(-(1.0 + d - a)),
        Asym::new(na * (1.0 + e), -(d - e), 0.0),
        Asym::sum(&[Asym::new(1.0, -d, 0.0), Asym::new(k12, -(1.0 + d - a), 0.0)]),
        false,
    );
    Ok(col.out)
}
