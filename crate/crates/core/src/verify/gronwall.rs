//! Replays of the two differential-inequality arguments: the doubling
//! recursion `U_k′ ≤ −(3/C_P) U_k + (3/C_P) U_{k−1}²` with its Gronwall
//! conclusion, and the decay of the entropy functional
//! `E_p = a N_p^p + b Var^{p/2}`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::constants::bound_thm_median;
use crate::error::{Error, Result};
use crate::semigroup::Evolution;
use crate::spectral::SpectralDecomposition;
use crate::state_space::{abs_pow, compensated_sum};

use super::checks::fmt_num;
use super::family::Member;
use super::report::{CheckResult, Worst};

/// Tolerance on the Cauchy–Schwarz step `U_{k−1}(0)² ≤ U_k(0)`, which holds
/// exactly up to rounding.
const ROUNDING_TOL: f64 = 1e-12;

/// The derivative estimate must be at most this fraction of the terms it
/// is compared against.
const DERIVATIVE_BUDGET: f64 = 0.1;

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 || times[0] != 0.0 {
        return Err(Error::Precondition(
            "derivative replay needs a uniform grid from 0 with >= 3 points".into(),
        ));
    }
    let h = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(Error::Precondition(
            "derivative replay needs a uniform time grid".into(),
        ));
    }
    Ok(h)
}

fn require_mean_zero(m: &Member) -> Result<()> {
    let scale = m.f.centered_norm(2.0)?.max(f64::MIN_POSITIVE);
    if m.f.mean().abs() > 1e-10 * scale {
        return Err(Error::Precondition(format!(
            "member {} is not mean-zero",
            m.id
        )));
    }
    Ok(())
}

/// `4^{2^k−2} ≥ 1 + 3·4^{2^k−4}` in integers, returned as the ratio
/// `(1 + 3·4^{2^k−4}) / 4^{2^k−2}`; only meaningful for `k ≥ 2`.
pub fn auxiliary_power_ratio(k: u32) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::Domain(format!(
            "auxiliary inequality needs 2 <= k <= 10, got {k}"
        )));
    }
    let p = 1u64 << k;
    let four = |e: u64| BigInt::one() << (2 * e);
    let lhs = four(p - 2);
    let rhs = BigInt::one() + BigInt::from(3) * four(p - 4);
    if rhs > lhs {
        return Ok(f64::INFINITY);
    }
    // exact comparison done; the ratio is only for reporting
    Ok(rhs.to_f64().unwrap_or(f64::INFINITY) / lhs.to_f64().unwrap_or(f64::INFINITY))
}

struct MemberTrace {
    recursion: Worst,
    envelope: Worst,
    cauchy_schwarz: Worst,
    /// Smallest step that would keep the derivative error in budget, if the
    /// grid was too coarse somewhere.
    required_step: Option<f64>,
}

/// The three checks of one level `k` of the doubling recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallLevel {
    pub k: u32,
    pub recursion: CheckResult,
    pub envelope: CheckResult,
    pub auxiliary: CheckResult,
    /// Largest step that keeps the derivative error within budget, when the
    /// given grid was too coarse.
    pub required_step: Option<f64>,
}

impl GronwallLevel {
    pub fn into_results(self) -> Vec<CheckResult> {
        vec![self.recursion, self.envelope, self.auxiliary]
    }
}

/// For each `k = 1..=k_max`, the checks of [`check_gronwall_level`].
pub fn check_gronwall_recursion(
    s: &SpectralDecomposition,
    members: &[Member],
    c_p: f64,
    k_max: u32,
    times: &[f64],
    tolerance: f64,
) -> Result<Vec<CheckResult>> {
    if !(1..=6).contains(&k_max) {
        return Err(Error::Domain(format!(
            "k_max must be in 1..=6, got {k_max}"
        )));
    }
    let mut out = Vec::new();
    for k in 1..=k_max {
        out.extend(check_gronwall_level(s, members, c_p, k, times, tolerance)?.into_results());
    }
    Ok(out)
}

/// At `p = 2^k`, three checks over the members:
///
/// * `recursion`: a central difference `D̂` of `U_k = N_p^p(P_t f)` must
///   satisfy `D̂ + a U_k ≤ a U_{k−1}² + err` with `a = 3/C_P`, where `err`
///   bounds the difference-quotient error. At `k = 1`, `U_0 = N_1(P_t f)`.
/// * `envelope`: `U_k(t) ≤ 4^{p−2} e^{−2t/C_P} U_k(0)`.
/// * `auxiliary`: `U_{k−1}(0)² ≤ U_k(0)` for every member and, for `k ≥ 2`,
///   `4^{2^k−2} ≥ 1 + 3·4^{2^k−4}`.
///
/// `err` must stay below 10% of `a(U_k + U_{k−1}²)`; where it does not,
/// `recursion` is inapplicable and the required step is reported.
pub fn check_gronwall_level(
    s: &SpectralDecomposition,
    members: &[Member],
    c_p: f64,
    k: u32,
    times: &[f64],
    tolerance: f64,
) -> Result<GronwallLevel> {
    if !(1..=6).contains(&k) {
        return Err(Error::Domain(format!("k must be in 1..=6, got {k}")));
    }
    if !(c_p > 0.0) {
        return Err(Error::Domain(format!("C_P must be > 0, got {c_p}")));
    }
    let h = uniform_step(times)?;
    for m in members {
        require_mean_zero(m)?;
    }
    let a = 3.0 / c_p;
    let p = (1u64 << k) as f64;
    let q = p / 2.0;
    let traces: Vec<Result<Option<MemberTrace>>> = members
        .par_iter()
        .map(|m| {
            let evo = Evolution::new(s, &m.f)?;
            let active: Vec<(usize, f64)> = evo
                .coefficients()
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| (j, c.abs()))
                .collect();
            if active.is_empty() {
                return Ok(None);
            }
            let lambda_max = active
                .iter()
                .map(|(j, _)| s.rates()[*j])
                .fold(0.0, f64::max);
            let basis = s.basis();
            let weights = s.space().weights();
            let mut u_k = Vec::with_capacity(times.len());
            let mut u_prev = Vec::with_capacity(times.len());
            for &t in times {
                let g = evo.centered_at(t)?;
                u_k.push(g.abs_moment(0.0, p));
                u_prev.push(g.abs_moment(0.0, q));
            }
            // (pλ_max)^3 times this bounds the third derivative of U_k on [t, ∞)
            let majorant_moment = |t: f64| -> f64 {
                let decayed: Vec<(usize, f64)> = active
                    .iter()
                    .map(|(j, c)| (*j, c * (-s.rates()[*j] * t).exp()))
                    .collect();
                compensated_sum((0..basis.nrows()).map(|i| {
                    let amp: f64 = decayed.iter().map(|(j, c)| c * basis[(i, *j)].abs()).sum();
                    weights[i] * abs_pow(amp, p)
                }))
            };
            let mut trace = MemberTrace {
                recursion: Worst::new(),
                envelope: Worst::new(),
                cauchy_schwarz: Worst::new(),
                required_step: None,
            };
            trace
                .cauchy_schwarz
                .offer(u_prev[0] * u_prev[0] / u_k[0], || m.id.clone());
            for (j, &t) in times.iter().enumerate() {
                let env = 4f64.powf(p - 2.0) * (-2.0 * t / c_p).exp() * u_k[0];
                trace
                    .envelope
                    .offer(u_k[j] / env, || format!("{} t={}", m.id, fmt_num(t)));
                if j == 0 || j + 1 == times.len() {
                    continue;
                }
                let d_hat = (u_k[j + 1] - u_k[j - 1]) / (2.0 * h);
                let truncation = h * h / 6.0 * (p * lambda_max).powi(3) * majorant_moment(t - h);
                let rounding = 64.0 * f64::EPSILON * (u_k[j + 1] + u_k[j - 1]) / (2.0 * h);
                let err = truncation + rounding;
                let scale = a * (u_k[j] + u_prev[j] * u_prev[j]);
                if err > DERIVATIVE_BUDGET * scale {
                    let needed = h * (DERIVATIVE_BUDGET * scale / err).sqrt();
                    trace.required_step =
                        Some(trace.required_step.map_or(needed, |r: f64| r.min(needed)));
                    continue;
                }
                let ratio = (d_hat + a * u_k[j]) / (a * u_prev[j] * u_prev[j] + err);
                trace
                    .recursion
                    .offer(ratio, || format!("{} t={}", m.id, fmt_num(t)));
            }
            Ok(Some(trace))
        })
        .collect();

    let mut recursion = Worst::new();
    let mut envelope = Worst::new();
    let mut aux = Worst::new();
    let mut required: Option<f64> = None;
    let mut notes = Vec::new();
    for (m, t) in members.iter().zip(traces) {
        match t? {
            None => notes.push(format!("{} skipped: zero function", m.id)),
            Some(t) => {
                recursion.merge(t.recursion);
                envelope.merge(t.envelope);
                aux.merge(t.cauchy_schwarz);
                if let Some(r) = t.required_step {
                    required = Some(required.map_or(r, |x: f64| x.min(r)));
                }
            }
        }
    }
    if k >= 2 {
        aux.offer(auxiliary_power_ratio(k)?, || {
            format!("4^(2^{k}-2) >= 1+3*4^(2^{k}-4)")
        });
    }
    let prefix = format!("gronwall/k={k}");
    let finish = |name: String, w: Worst, tol: f64| {
        if w.ratio == f64::NEG_INFINITY {
            CheckResult::inapplicable(name, "every member was zero", tol)
        } else {
            CheckResult::from_ratio(name, w.ratio, w.witness, tol)
        }
    };
    let recursion_result = match required {
        Some(step) => CheckResult::inapplicable(
            format!("{prefix}/recursion"),
            format!(
                "time step {} too coarse for the derivative error budget; need <= {}",
                fmt_num(h),
                fmt_num(step)
            ),
            tolerance,
        ),
        None => finish(format!("{prefix}/recursion"), recursion, tolerance),
    };
    Ok(GronwallLevel {
        k,
        recursion: recursion_result.with_notes(notes.clone()),
        envelope: finish(format!("{prefix}/envelope"), envelope, tolerance)
            .with_notes(notes.clone()),
        auxiliary: finish(format!("{prefix}/auxiliary"), aux, ROUNDING_TOL).with_notes(notes),
        required_step: required,
    })
}

/// With `(a, b, γ)` from the median-route bound at `p`, checks
/// `E_p(P_t f) ≤ e^{−γt} E_p(f)` (`functional`) and
/// `N_p^p(P_t f) ≤ ((a+b)/a) e^{−γt} N_p^p(f)` (`envelope`).
pub fn replay_entropy_functional(
    s: &SpectralDecomposition,
    members: &[Member],
    p: f64,
    c_p: f64,
    times: &[f64],
    tolerance: f64,
) -> Result<Vec<CheckResult>> {
    let mb = bound_thm_median(p, c_p)?;
    for m in members {
        require_mean_zero(m)?;
    }
    let (a, b, gamma) = (mb.a, mb.b, mb.gamma);
    let traces: Vec<Result<Option<(Worst, Worst)>>> = members
        .par_iter()
        .map(|m| {
            let evo = Evolution::new(s, &m.f)?;
            let u0 = m.f.centered_moment(p)?;
            if u0 == 0.0 {
                return Ok(None);
            }
            let e0 = a * u0 + b * m.f.variance().powf(p / 2.0);
            let (mut wf, mut we) = (Worst::new(), Worst::new());
            for &t in times {
                let g = evo.centered_at(t)?;
                let ut = g.abs_moment(0.0, p);
                let et = a * ut + b * evo.variance_at(t)?.powf(p / 2.0);
                let decay = (-gamma * t).exp();
                wf.offer(et / (decay * e0), || format!("{} t={}", m.id, fmt_num(t)));
                we.offer(ut / ((a + b) / a * decay * u0), || {
                    format!("{} t={}", m.id, fmt_num(t))
                });
            }
            Ok(Some((wf, we)))
        })
        .collect();
    let (mut wf, mut we) = (Worst::new(), Worst::new());
    let mut notes = Vec::new();
    for (m, t) in members.iter().zip(traces) {
        match t? {
            Some((f, e)) => {
                wf.merge(f);
                we.merge(e);
            }
            None => notes.push(format!("{} skipped: zero function", m.id)),
        }
    }
    let prefix = format!("entropy/p={}", fmt_num(p));
    if wf.ratio == f64::NEG_INFINITY {
        return Ok(vec![
            CheckResult::inapplicable(
                format!("{prefix}/functional"),
                "every member was zero",
                tolerance,
            ),
            CheckResult::inapplicable(
                format!("{prefix}/envelope"),
                "every member was zero",
                tolerance,
            ),
        ]);
    }
    Ok(vec![
        CheckResult::from_ratio(
            format!("{prefix}/functional"),
            wf.ratio,
            wf.witness,
            tolerance,
        )
        .with_notes(notes.clone()),
        CheckResult::from_ratio(
            format!("{prefix}/envelope"),
            we.ratio,
            we.witness,
            tolerance,
        )
        .with_notes(notes),
    ])
}
