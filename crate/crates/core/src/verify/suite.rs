//! The full check suite behind `semigap verify`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::{
    bounds_for_exponent, c_recursion, kappa_lp, sandwich, spectral_exact, DecayBound,
};
use crate::error::{Error, Result};
use crate::generator::{GeneratorKind, GeneratorRep};
use crate::semigroup::{
    bounded_convex_monotone_check, geometric_time_grid, quantity_curve, uniform_time_grid,
    Evolution, Quantity,
};
use crate::spectral::{poincare_constant, SpectralDecomposition};

use super::best::{estimate_best_constant, transported_median_ratio, BestConstantTarget};
use super::checks::{
    check_envelopes, check_log_convexity, check_pointwise_inequality, check_wang, fmt_num,
    Inequality, GRID_SLACK, SPECTRAL_SLACK,
};
use super::family::{nonnegative_family, FamilyKind, Member, TestFunctionFamily};
use super::gronwall::{check_gronwall_level, replay_entropy_functional};
use super::report::{CheckResult, CheckStatus, VerificationReport, Worst};

/// Relative shortfall allowed when comparing empirical best constants.
pub const BEST_CONSTANT_SHORTFALL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub family_count: usize,
    /// Exponents for the decay envelopes.
    pub p_list: Vec<f64>,
    /// Tolerance of every check; `None` picks 1e−8 on the diagonal backend
    /// and 0.02 on a matrix backend.
    pub slack: Option<f64>,
    /// Extra bounds checked as `envelope/custom/...`.
    pub custom_bounds: Vec<DecayBound>,
    /// Ascent sweeps for each best-constant estimate.
    pub best_constant_budget: usize,
    pub gronwall_k_max: u32,
    /// Steps of the uniform grid on `[0, 2C_P]` used for derivative checks.
    pub gronwall_steps: usize,
    /// Geometric time grid for envelopes: `time_points` points from
    /// `1e−4·t_max` to `t_max` after `t = 0`; `t_max` defaults to `10/λ_1`.
    pub t_max: Option<f64>,
    pub time_points: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            family_count: 200,
            p_list: vec![2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 16.0],
            slack: None,
            custom_bounds: Vec::new(),
            best_constant_budget: 20,
            gronwall_k_max: 3,
            gronwall_steps: 2000,
            t_max: None,
            time_points: 40,
        }
    }
}

impl SuiteConfig {
    pub fn slack_for(&self, g: &GeneratorRep) -> f64 {
        self.slack.unwrap_or(match g.kind() {
            GeneratorKind::DiagonalSpectral => SPECTRAL_SLACK,
            GeneratorKind::Matrix => GRID_SLACK,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.family_count == 0 {
            return Err(Error::Precondition("family_count must be >= 1".into()));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            return Err(Error::Domain(format!("every p must be > 1, got {p}")));
        }
        if self.time_points < 2 {
            return Err(Error::Domain(format!(
                "time_points must be >= 2, got {}",
                self.time_points
            )));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("t_max must be > 0, got {t}")));
            }
        }
        if let Some(s) = self.slack {
            if !(s >= 0.0) {
                return Err(Error::Domain(format!("slack must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Runs every check on one backend and assembles the report. The report
/// depends only on the inputs; checks run concurrently but the report is
/// sorted by check name.
pub fn run_suite(
    g: &GeneratorRep,
    s: &SpectralDecomposition,
    backend: Value,
    cfg: &SuiteConfig,
) -> Result<VerificationReport> {
    cfg.validate()?;
    let c_p = poincare_constant(s)?;
    let gap = s.spectral_gap();
    let slack = cfg.slack_for(g);
    let t_max = cfg.t_max.unwrap_or(10.0 / gap);
    let times = geometric_time_grid(1e-4 * t_max, t_max, cfg.time_points)?;
    let seed = cfg.seed;

    let mixtures =
        TestFunctionFamily::new(FamilyKind::EigenMixtures, seed, cfg.family_count).generate(s)?;
    let smooth = TestFunctionFamily::new(
        FamilyKind::RandomSmooth,
        seed.wrapping_add(1),
        cfg.family_count,
    )
    .generate(s)?;
    let balanced = TestFunctionFamily::new(
        FamilyKind::SignBalanced,
        seed.wrapping_add(2),
        cfg.family_count,
    )
    .generate(s)?;

    let tasks: Vec<Task> = vec![
        Task::Envelopes,
        Task::Convexity,
        Task::Pointwise,
        Task::Gronwall,
        Task::Wang,
        Task::Entropy,
        Task::Monotone,
        Task::Contraction,
        Task::BestConstants,
    ];
    let ctx = Context {
        g,
        s,
        cfg,
        c_p,
        gap,
        slack,
        times: &times,
        mixtures: &mixtures,
        smooth: &smooth,
        balanced: &balanced,
    };
    let groups: Vec<Result<Vec<CheckResult>>> = tasks.par_iter().map(|t| t.run(&ctx)).collect();
    let mut checks = Vec::new();
    for group in groups {
        checks.extend(group?);
    }
    dedupe_names(&mut checks);
    VerificationReport::new(backend, c_p, checks)
}

struct Context<'a> {
    g: &'a GeneratorRep,
    s: &'a SpectralDecomposition,
    cfg: &'a SuiteConfig,
    c_p: f64,
    gap: f64,
    slack: f64,
    times: &'a [f64],
    mixtures: &'a [Member],
    smooth: &'a [Member],
    balanced: &'a [Member],
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Envelopes,
    Convexity,
    Pointwise,
    Gronwall,
    Wang,
    Entropy,
    Monotone,
    Contraction,
    BestConstants,
}

impl Task {
    fn run(self, c: &Context) -> Result<Vec<CheckResult>> {
        match self {
            Task::Envelopes => envelopes(c),
            Task::Convexity => {
                let centered: Vec<Member> = c
                    .smooth
                    .iter()
                    .take(100)
                    .map(|m| Member {
                        id: m.id.clone(),
                        f: m.f.centered(),
                    })
                    .collect();
                let times = uniform_time_grid(5.0 / c.gap, 100)?;
                Ok(vec![check_log_convexity(c.s, &centered, &times)?])
            }
            Task::Pointwise => pointwise(c),
            Task::Gronwall => gronwall(c),
            Task::Wang => {
                let fam =
                    nonnegative_family(c.s, c.cfg.seed.wrapping_add(4), c.cfg.family_count, 3)?;
                [1.5, 2.0]
                    .iter()
                    .map(|&p| check_wang(c.s, &fam, p, c.c_p, c.times, c.slack))
                    .collect()
            }
            Task::Entropy => {
                let mut out = Vec::new();
                for p in [2.0, 4.0] {
                    out.extend(replay_entropy_functional(
                        c.s, c.mixtures, p, c.c_p, c.times, c.slack,
                    )?);
                }
                Ok(out)
            }
            Task::Monotone => monotone(c),
            Task::Contraction => contraction(c),
            Task::BestConstants => best_constants(c),
        }
    }
}

/// Most refinements of the derivative grid before a level is left
/// inapplicable, and the largest grid allowed.
const GRONWALL_REFINEMENTS: usize = 3;
const GRONWALL_MAX_STEPS: usize = 200_000;

/// Each level starts on `gronwall_steps` steps over `[0, 2C_P]` and is rerun
/// on a finer grid when the derivative error bound asks for one.
fn gronwall(c: &Context) -> Result<Vec<CheckResult>> {
    let fam = TestFunctionFamily::new(FamilyKind::EigenMixtures, c.cfg.seed.wrapping_add(3), 24)
        .with_max_mode(3)
        .generate(c.s)?;
    let t_max = 2.0 * c.c_p;
    let mut out = Vec::new();
    for k in 1..=c.cfg.gronwall_k_max {
        let mut steps = c.cfg.gronwall_steps.max(2);
        let mut attempts = 0;
        let level = loop {
            let times = uniform_time_grid(t_max, steps)?;
            let level = check_gronwall_level(c.s, &fam, c.c_p, k, &times, c.slack)?;
            match level.required_step {
                Some(h) if attempts < GRONWALL_REFINEMENTS && steps < GRONWALL_MAX_STEPS => {
                    steps =
                        ((t_max / (0.9 * h)).ceil() as usize).clamp(steps + 1, GRONWALL_MAX_STEPS);
                    attempts += 1;
                }
                _ => break level,
            }
        };
        out.extend(level.into_results());
    }
    Ok(out)
}

fn envelopes(c: &Context) -> Result<Vec<CheckResult>> {
    let mut bounds = vec![spectral_exact(c.gap)?];
    for &p in &c.cfg.p_list {
        bounds.extend(bounds_for_exponent(p, c.c_p)?);
    }
    bounds.extend(c.cfg.custom_bounds.iter().copied());
    // exponents below 2 are measured on mean-zero members like the rest
    check_envelopes(c.s, &bounds, c.mixtures, c.times, c.slack)
}

fn pointwise(c: &Context) -> Result<Vec<CheckResult>> {
    let table = c_recursion(c.c_p, 2)?;
    let c4 = table.value(4).expect("C(4) present");
    let kappa4 = kappa_lp(4.0, c4)?;
    let mut which = vec![
        (
            Inequality::IntegratedLp {
                p: 4.0,
                constant: 3.0 * c4,
            },
            c.smooth,
        ),
        (
            Inequality::LpPoincare {
                p: 2.0,
                kappa: c.c_p,
            },
            c.mixtures,
        ),
        (
            Inequality::LpPoincare {
                p: 4.0,
                kappa: kappa4,
            },
            c.smooth,
        ),
    ];
    for p in [2.0, 4.0] {
        which.push((
            Inequality::MedianLp {
                p,
                constant: p * p / 4.0 * 9.0 * c.c_p,
            },
            c.balanced,
        ));
        which.push((Inequality::MeanMedian { p }, c.smooth));
    }
    let mut out: Vec<CheckResult> = which
        .par_iter()
        .map(|(w, fam)| check_pointwise_inequality(c.g, fam, *w, c.slack))
        .collect::<Result<_>>()?;
    out.push(sandwich_check(c)?);
    Ok(out)
}

/// `N_2/2 ≤ M_2 ≤ 3N_2` turns the Poincaré inequality into `B(2) ≤ 9C_P`
/// and, with `M_2 ≤ N_2`, `B(2) ≥ C_P/4`; reported on the best Poincaré
/// witness as the worse of the two sandwich ratios.
fn sandwich_check(c: &Context) -> Result<CheckResult> {
    let (lo, hi) = sandwich(c.c_p)?;
    let target = BestConstantTarget::MedianLp { p: 2.0 };
    let mut w = Worst::new();
    for m in c.smooth {
        let Some(b2) = target.ratio(c.g, &m.f)? else {
            continue;
        };
        w.offer(b2 / hi, || m.id.clone());
    }
    let e1 = c.s.eigenfunction(1);
    if let Some(b2) = target.ratio(c.g, &e1)? {
        w.offer(lo / b2, || "mode-1".into());
    }
    if w.ratio == f64::NEG_INFINITY {
        return Ok(CheckResult::inapplicable(
            "pointwise/median-sandwich",
            "every member was degenerate",
            c.slack,
        ));
    }
    Ok(CheckResult::from_ratio(
        "pointwise/median-sandwich",
        w.ratio,
        w.witness,
        c.slack,
    ))
}

fn monotone(c: &Context) -> Result<Vec<CheckResult>> {
    let partial: Vec<Result<(Worst, Option<String>)>> = c
        .mixtures
        .par_iter()
        .map(|m| {
            let mut w = Worst::new();
            let var = m.f.variance();
            if var <= 0.0 {
                return Ok((w, Some(format!("{} skipped: constant", m.id))));
            }
            let curve = quantity_curve(
                c.s,
                &m.f.centered(),
                Quantity::LogNorm2,
                2.0,
                c.times,
                &m.id,
            )?;
            let r = bounded_convex_monotone_check(&curve, c.gap, var)?;
            if r.status == CheckStatus::Inapplicable {
                return Ok((w, Some(format!("{} skipped: premise fails", m.id))));
            }
            w.offer(r.worst_ratio, || {
                format!("{} t={}", m.id, fmt_num(r.worst_time))
            });
            Ok((w, None))
        })
        .collect();
    let mut w = Worst::new();
    let mut notes = Vec::new();
    for r in partial {
        let (pw, note) = r?;
        w.merge(pw);
        notes.extend(note);
    }
    let name = "bounded-convex-decay";
    if w.ratio == f64::NEG_INFINITY {
        return Ok(vec![CheckResult::inapplicable(
            name,
            "premise failed for every member",
            c.slack,
        )
        .with_notes(notes)]);
    }
    Ok(vec![CheckResult::from_ratio(
        name, w.ratio, w.witness, c.slack,
    )
    .with_notes(notes)])
}

fn contraction(c: &Context) -> Result<Vec<CheckResult>> {
    let mut ps: Vec<f64> = vec![1.0];
    ps.extend(c.cfg.p_list.iter().copied());
    let partial: Vec<Result<Vec<Worst>>> = c
        .smooth
        .par_iter()
        .take(50)
        .map(|m| {
            let before: Vec<f64> = ps.iter().map(|&p| m.f.norm(p)).collect::<Result<_>>()?;
            let evo = Evolution::new(c.s, &m.f)?;
            let mut worst: Vec<Worst> = ps.iter().map(|_| Worst::new()).collect();
            for &t in c.times.iter().skip(1) {
                let pt = evo.at(t)?;
                for ((p, b), w) in ps.iter().zip(&before).zip(worst.iter_mut()) {
                    if *b > 0.0 {
                        w.offer(pt.norm(*p)? / b, || format!("{} t={}", m.id, fmt_num(t)));
                    }
                }
            }
            Ok(worst)
        })
        .collect();
    let mut worst: Vec<Worst> = ps.iter().map(|_| Worst::new()).collect();
    for r in partial {
        for (acc, w) in worst.iter_mut().zip(r?) {
            acc.merge(w);
        }
    }
    Ok(ps
        .iter()
        .zip(worst)
        .map(|(p, w)| {
            CheckResult::from_ratio(
                format!("contraction/p={}", fmt_num(*p)),
                w.ratio,
                w.witness,
                c.slack,
            )
        })
        .collect())
}

fn best_constants(c: &Context) -> Result<Vec<CheckResult>> {
    let budget = c.cfg.best_constant_budget.max(1);
    let mut out = Vec::new();

    let poincare =
        estimate_best_constant(c.g, c.s, BestConstantTarget::Poincare, c.mixtures, budget)?;
    let ratio = (c.c_p * (1.0 - 1e-6) / poincare.value).max(poincare.value / c.c_p);
    out.push(
        CheckResult::from_ratio(
            "best-constant/poincare",
            ratio,
            poincare.witness_id.clone(),
            c.slack,
        )
        .with_notes(vec![format!("estimate {}", fmt_num(poincare.value))]),
    );

    let b2 = estimate_best_constant(
        c.g,
        c.s,
        BestConstantTarget::MedianLp { p: 2.0 },
        c.balanced,
        budget,
    )?;
    let (lo, hi) = sandwich(c.c_p)?;
    let ratio = (lo * (1.0 - BEST_CONSTANT_SHORTFALL) / b2.value).max(b2.value / hi);
    out.push(
        CheckResult::from_ratio(
            "best-constant/median-lp/p=2",
            ratio,
            b2.witness_id.clone(),
            c.slack,
        )
        .with_notes(vec![format!("estimate {}", fmt_num(b2.value))]),
    );

    // gaps to the recursion constants, reported as found
    let table = c_recursion(c.c_p, 3)?;
    let mut integrated = BTreeMap::new();
    for p in [4u64, 8] {
        let d = table.value(p).expect("entry present") * (p - 1) as f64;
        let est = estimate_best_constant(
            c.g,
            c.s,
            BestConstantTarget::IntegratedLp { p: p as f64 },
            c.smooth,
            budget,
        )?;
        integrated.insert(p, (d, est));
    }
    for (p, (d, est)) in integrated {
        out.push(
            CheckResult::from_ratio(
                format!("best-constant/integrated-lp/p={p}"),
                est.value / d,
                est.witness_id,
                c.slack,
            )
            .with_notes(vec![format!(
                "estimate {} against constant {}",
                fmt_num(est.value),
                fmt_num(d)
            )]),
        );
    }

    let p = 4.0;
    let name = "best-constant/median-transport/p=4";
    match c.g.kind() {
        GeneratorKind::DiagonalSpectral => out.push(CheckResult::inapplicable(
            name,
            "the transported witness leaves the polynomial span of the diagonal backend",
            c.slack,
        )),
        GeneratorKind::Matrix => {
            let t = transported_median_ratio(c.g, &b2.witness, p)?;
            let mut seeded = c.balanced.to_vec();
            seeded.insert(
                0,
                Member {
                    id: format!("transport({})", b2.witness_id),
                    f: t.transported.clone(),
                },
            );
            let bp = estimate_best_constant(
                c.g,
                c.s,
                BestConstantTarget::MedianLp { p },
                &seeded,
                budget,
            )?;
            let expected = p * p / 4.0 * b2.value * (1.0 - BEST_CONSTANT_SHORTFALL);
            out.push(
                CheckResult::from_ratio(name, expected / bp.value, bp.witness_id, c.slack)
                    .with_notes(vec![format!(
                        "B(2) >= {}, B(4) >= {}, transport relation {}",
                        fmt_num(b2.value),
                        fmt_num(bp.value),
                        fmt_num(t.relation(p))
                    )]),
            );
        }
    }
    Ok(out)
}

/// Gives repeated check names a `#n` suffix so every name is unique.
fn dedupe_names(checks: &mut [CheckResult]) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for c in checks.iter_mut() {
        let n = seen.entry(c.name.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            c.name = format!("{}#{}", c.name, n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_ou_hermite;
    use crate::spectral::decompose;
    use serde_json::json;

    #[test]
    fn small_suite_on_ou_is_clean_and_deterministic() {
        let g = build_ou_hermite(24, 97).unwrap();
        let s = decompose(&g).unwrap();
        let cfg = SuiteConfig {
            family_count: 30,
            best_constant_budget: 4,
            gronwall_steps: 1000,
            ..SuiteConfig::default()
        };
        let a = run_suite(&g, &s, json!({"name": "ou"}), &cfg).unwrap();
        for c in &a.checks {
            assert!(c.acceptable(), "{c:?}");
        }
        let b = run_suite(&g, &s, json!({"name": "ou"}), &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let mut names: Vec<&str> = a.checks.iter().map(|c| c.name.as_str()).collect();
        names.dedup();
        assert_eq!(names.len(), a.checks.len());
    }

    #[test]
    fn inflated_custom_bound_fails() {
        let g = build_ou_hermite(12, 60).unwrap();
        let s = decompose(&g).unwrap();
        let cfg = SuiteConfig {
            family_count: 10,
            p_list: vec![2.0],
            custom_bounds: vec![DecayBound::custom(2.0, 2.0, 1.0).unwrap()],
            best_constant_budget: 1,
            gronwall_steps: 500,
            ..SuiteConfig::default()
        };
        let r = run_suite(&g, &s, Value::Null, &cfg).unwrap();
        assert!(!r.all_acceptable());
        let bad: Vec<_> = r.failures().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].name, "envelope/custom/p=2");
        assert!(bad[0].witness.starts_with("mode-1 "));
    }

    #[test]
    fn rejects_bad_config() {
        let g = build_ou_hermite(8, 40).unwrap();
        let s = decompose(&g).unwrap();
        let cfg = SuiteConfig {
            p_list: vec![1.0],
            ..SuiteConfig::default()
        };
        assert!(run_suite(&g, &s, Value::Null, &cfg).is_err());
    }
}
