//! Decay envelopes, log-convexity, pointwise functional inequalities and the
//! Beckner-type decay, each evaluated over a family of test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::DecayBound;
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::generator::GeneratorRep;
use crate::semigroup::{log_convexity_profile, Evolution, CONVEXITY_TOL};
use crate::spectral::SpectralDecomposition;
use crate::state_space::{abs_pow, Observable};

use super::family::Member;
use super::report::{CheckResult, Worst};

/// Default slack for checks on the exact spectral backend.
pub const SPECTRAL_SLACK: f64 = 1e-8;
/// Default slack for checks on a finite-difference grid at `n = 401`.
pub const GRID_SLACK: f64 = 0.02;

/// `N_p` values this small relative to `‖f‖_p` mark a degenerate member.
const DEGENERATE: f64 = 1e-13;

pub(crate) fn fmt_num(x: f64) -> String {
    sig17(x)
}

/// Uncentered `‖f‖_p`, the scale against which degeneracy is judged.
fn scale(f: &Observable, p: f64) -> f64 {
    f.space()
        .integrate(
            &f.values()
                .iter()
                .map(|v| abs_pow(*v, p))
                .collect::<Vec<_>>(),
        )
        .powf(1.0 / p)
}

/// Runs `per_member` over the family in parallel and merges the results in
/// member order.
fn sweep<F>(members: &[Member], per_member: F) -> Result<(Worst, Vec<String>)>
where
    F: Fn(&Member) -> Result<(Worst, Option<String>)> + Sync,
{
    let partial: Vec<Result<(Worst, Option<String>)>> =
        members.par_iter().map(&per_member).collect();
    let mut worst = Worst::new();
    let mut notes = Vec::new();
    for r in partial {
        let (w, note) = r?;
        worst.merge(w);
        notes.extend(note);
    }
    Ok((worst, notes))
}

fn finish(name: String, worst: Worst, notes: Vec<String>, tolerance: f64) -> Result<CheckResult> {
    if worst.ratio == f64::NEG_INFINITY {
        return Ok(CheckResult::inapplicable(
            name,
            "every family member was degenerate",
            tolerance,
        )
        .with_notes(notes));
    }
    Ok(CheckResult::from_ratio(name, worst.ratio, worst.witness, tolerance).with_notes(notes))
}

/// `N_p(P_t f) ≤ K e^{−λt} N_p(f) (1 + slack)` for every member and time.
pub fn check_envelope(
    s: &SpectralDecomposition,
    b: &DecayBound,
    members: &[Member],
    times: &[f64],
    slack: f64,
) -> Result<CheckResult> {
    Ok(check_envelopes(s, std::slice::from_ref(b), members, times, slack)?.remove(0))
}

/// Worst ratio and skip note of one member, per bound.
type PerBound = Vec<(Worst, Option<String>)>;

/// [`check_envelope`] for several bounds at once, evolving each member only
/// once per time. Results come back in the order of `bounds`.
pub fn check_envelopes(
    s: &SpectralDecomposition,
    bounds: &[DecayBound],
    members: &[Member],
    times: &[f64],
    slack: f64,
) -> Result<Vec<CheckResult>> {
    if let Some(b) = bounds.iter().find(|b| !(b.p >= 1.0)) {
        return Err(Error::Domain(format!("envelope needs p >= 1, got {}", b.p)));
    }
    if !(slack >= 0.0) {
        return Err(Error::Domain(format!("slack must be >= 0, got {slack}")));
    }
    let partial: Vec<Result<PerBound>> = members
        .par_iter()
        .map(|m| {
            let n0: Vec<f64> = bounds
                .iter()
                .map(|b| m.f.centered_norm(b.p))
                .collect::<Result<_>>()?;
            let mut out: Vec<(Worst, Option<String>)> = n0
                .iter()
                .zip(bounds)
                .map(|(n, b)| {
                    let degenerate = *n == 0.0 || *n <= DEGENERATE * scale(&m.f, b.p);
                    (
                        Worst::new(),
                        degenerate.then(|| format!("{} skipped: N_p(f) = 0", m.id)),
                    )
                })
                .collect();
            if out.iter().all(|(_, note)| note.is_some()) {
                return Ok(out);
            }
            let evo = Evolution::new(s, &m.f)?;
            for &t in times {
                let ct = evo.centered_at(t)?;
                for ((b, n), (w, note)) in bounds.iter().zip(&n0).zip(out.iter_mut()) {
                    if note.is_none() {
                        let nt = ct.norm(b.p)?;
                        w.offer(nt / (b.envelope(t) * n), || {
                            format!("{} t={}", m.id, fmt_num(t))
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut worst: Vec<Worst> = bounds.iter().map(|_| Worst::new()).collect();
    let mut notes: Vec<Vec<String>> = vec![Vec::new(); bounds.len()];
    for r in partial {
        for (i, (w, note)) in r?.into_iter().enumerate() {
            worst[i].merge(w);
            notes[i].extend(note);
        }
    }
    bounds
        .iter()
        .zip(worst)
        .zip(notes)
        .map(|((b, w), n)| {
            finish(
                format!("envelope/{}/p={}", b.source.as_str(), fmt_num(b.p)),
                w,
                n,
                slack,
            )
        })
        .collect()
}

/// Second differences of `log N_2(P_t f)` stay above `−1e−9`; reported as
/// `worst_ratio = 1 − min D_j` against tolerance `1e−9`.
pub fn check_log_convexity(
    s: &SpectralDecomposition,
    members: &[Member],
    times: &[f64],
) -> Result<CheckResult> {
    let (worst, notes) = sweep(members, |m| {
        let f = m.f.centered();
        let mut w = Worst::new();
        if f.centered_norm(2.0)? <= DEGENERATE * scale(&m.f, 2.0) {
            return Ok((w, Some(format!("{} skipped: N_2(f) = 0", m.id))));
        }
        let profile = log_convexity_profile(s, &f, times)?;
        for (j, d) in profile.second_differences.iter().enumerate() {
            w.offer(1.0 - d, || format!("{} t={}", m.id, fmt_num(times[j + 1])));
        }
        let note = profile
            .truncated
            .then(|| format!("{} truncated at underflow", m.id));
        Ok((w, note))
    })?;
    finish("log-convexity".into(), worst, notes, CONVEXITY_TOL)
}

/// The pointwise functional inequalities that can be checked member by member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "kebab-case")]
pub enum Inequality {
    /// `N_p^p(f) ≤ D ∫|f − μ(f)|^{p−2} Γ(f,f) dμ` with `D = C(p)(p−1)`.
    IntegratedLp { p: f64, constant: f64 },
    /// `N_p^p(f) ≤ κ ∫Γ(f,f)^{p/2} dμ`.
    LpPoincare { p: f64, kappa: f64 },
    /// `M_p^p(f) ≤ B ∫|f − m(f)|^{p−2} Γ(f,f) dμ`.
    MedianLp { p: f64, constant: f64 },
    /// `N_p/2 ≤ M_p ≤ 3N_p` and `|μ(f) − m(f)| ≤ √2 Var(f)^{1/2}`.
    MeanMedian { p: f64 },
}

impl Inequality {
    pub fn name(&self) -> String {
        match self {
            Inequality::IntegratedLp { p, .. } => {
                format!("pointwise/integrated-lp/p={}", fmt_num(*p))
            }
            Inequality::LpPoincare { p, .. } => format!("pointwise/lp-poincare/p={}", fmt_num(*p)),
            Inequality::MedianLp { p, .. } => format!("pointwise/median-lp/p={}", fmt_num(*p)),
            Inequality::MeanMedian { p } => format!("pointwise/mean-median/p={}", fmt_num(*p)),
        }
    }

    fn p(&self) -> f64 {
        match self {
            Inequality::IntegratedLp { p, .. }
            | Inequality::LpPoincare { p, .. }
            | Inequality::MedianLp { p, .. }
            | Inequality::MeanMedian { p } => *p,
        }
    }

    /// `LHS/RHS` for one function; `None` when the right side vanishes.
    pub fn ratio(&self, g: &GeneratorRep, f: &Observable) -> Result<Option<f64>> {
        let p = self.p();
        let needs_two = !matches!(
            self,
            Inequality::MeanMedian { .. } | Inequality::LpPoincare { .. }
        );
        if needs_two && !(p >= 2.0) {
            return Err(Error::Domain(format!(
                "{} needs p >= 2, got {p}",
                self.name()
            )));
        }
        if !(p >= 1.0) {
            return Err(Error::Domain(format!(
                "{} needs p >= 1, got {p}",
                self.name()
            )));
        }
        let scale = scale(f, p);
        Ok(match *self {
            Inequality::IntegratedLp { constant, .. } => {
                let needed = lp_constant_ratio(g, f, p, f.mean())?;
                needed.map(|r| r / constant)
            }
            Inequality::MedianLp { constant, .. } => {
                let needed = lp_constant_ratio(g, f, p, f.weighted_median())?;
                needed.map(|r| r / constant)
            }
            Inequality::LpPoincare { kappa, .. } => {
                let gamma = g.carre_du_champ(f, f)?;
                let rhs = f.space().integrate(
                    &gamma
                        .values()
                        .iter()
                        .map(|v| abs_pow(v.max(0.0), p / 2.0))
                        .collect::<Vec<_>>(),
                );
                let lhs = f.centered_moment(p)?;
                if lhs <= abs_pow(DEGENERATE * scale, p) || rhs <= 0.0 {
                    None
                } else {
                    Some(lhs / (kappa * rhs))
                }
            }
            Inequality::MeanMedian { .. } => {
                let n = f.centered_norm(p)?;
                let m = f.median_centered_norm(p)?;
                if n <= DEGENERATE * scale {
                    None
                } else {
                    let gap = (f.mean() - f.weighted_median()).abs();
                    let sd = f.variance().max(0.0).sqrt();
                    let mut r = (0.5 * n / m).max(m / (3.0 * n));
                    if sd > 0.0 {
                        r = r.max(gap / (2f64.sqrt() * sd));
                    }
                    Some(r)
                }
            }
        })
    }
}

/// `∫|f − c|^p / ∫|f − c|^{p−2} Γ(f,f)`, the smallest constant that makes
/// the inequality hold for this `f`.
pub fn lp_constant_ratio(
    g: &GeneratorRep,
    f: &Observable,
    p: f64,
    center: f64,
) -> Result<Option<f64>> {
    let gamma = g.carre_du_champ(f, f)?;
    let shifted = f.shift(-center);
    let weights: Vec<f64> = shifted
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(v, gm)| {
            if p == 2.0 {
                gm.max(0.0)
            } else {
                abs_pow(*v, p - 2.0) * gm.max(0.0)
            }
        })
        .collect();
    let rhs = f.space().integrate(&weights);
    let lhs = shifted.abs_moment(0.0, p);
    if lhs <= abs_pow(DEGENERATE * scale(f, p), p) || rhs <= 0.0 {
        return Ok(None);
    }
    Ok(Some(lhs / rhs))
}

/// Evaluates one inequality over the family with the given tolerance.
pub fn check_pointwise_inequality(
    g: &GeneratorRep,
    members: &[Member],
    which: Inequality,
    tolerance: f64,
) -> Result<CheckResult> {
    let (worst, notes) = sweep(members, |m| {
        let mut w = Worst::new();
        match which.ratio(g, &m.f)? {
            Some(r) => {
                w.offer(r, || m.id.clone());
                Ok((w, None))
            }
            None => Ok((w, Some(format!("{} skipped: degenerate", m.id)))),
        }
    })?;
    finish(which.name(), worst, notes, tolerance)
}

/// `∫(P_t f)^p − (∫f)^p ≤ e^{−4(p−1)t/(pC_P)} (∫f^p − (∫f)^p)` for
/// nonnegative members and `1 < p ≤ 2`.
pub fn check_wang(
    s: &SpectralDecomposition,
    members: &[Member],
    p: f64,
    c_p: f64,
    times: &[f64],
    tolerance: f64,
) -> Result<CheckResult> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!(
            "Beckner-type decay needs 1 < p <= 2, got {p}"
        )));
    }
    if let Some(m) = members
        .iter()
        .find(|m| m.f.values().iter().any(|v| *v < 0.0))
    {
        return Err(Error::Precondition(format!(
            "member {} takes negative values",
            m.id
        )));
    }
    let rate = 4.0 * (p - 1.0) / (p * c_p);
    let (worst, notes) = sweep(members, |m| {
        let mut w = Worst::new();
        let mean = m.f.mean();
        let mean_p = abs_pow(mean, p);
        let deficit0 = m.f.abs_moment(0.0, p) - mean_p;
        if deficit0 <= 1e-14 * mean_p.max(1e-300) {
            return Ok((w, Some(format!("{} skipped: constant", m.id))));
        }
        let evo = Evolution::new(s, &m.f)?;
        for &t in times {
            let pt = evo.at(t)?.map(|v| v.max(0.0));
            let lhs = pt.abs_moment(0.0, p) - mean_p;
            w.offer(lhs / ((-rate * t).exp() * deficit0), || {
                format!("{} t={}", m.id, fmt_num(t))
            });
        }
        Ok((w, None))
    })?;
    finish(format!("wang/p={}", fmt_num(p)), worst, notes, tolerance)
}
