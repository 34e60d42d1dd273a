//! Exact evolution `P_t f = Σ_k e^{−λ_k t} ⟨f, e_k⟩ e_k` and the decay
//! curves built on it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::spectral::SpectralDecomposition;
use crate::state_space::{compensated_sum, Observable};
use crate::verify::CheckStatus;

/// Default tolerance on second differences of `log N_2(P_t f)`.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// `N_2` values below this are treated as underflow and end the curve.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// What a [`DecayCurve`] tracks along the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// `N_p(P_t f)`, the mean-centered norm.
    #[serde(rename = "N_p")]
    CenteredNorm,
    /// `M_p(P_t f)`, the median-centered norm.
    #[serde(rename = "M_p")]
    MedianNorm,
    #[serde(rename = "Var")]
    Variance,
    /// `log N_2(P_t f)`; the only quantity that may be negative.
    #[serde(rename = "log_norm2")]
    LogNorm2,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::CenteredNorm => "N_p",
            Quantity::MedianNorm => "M_p",
            Quantity::Variance => "Var",
            Quantity::LogNorm2 => "log_norm2",
        }
    }
}

/// Samples of a quantity along `t ↦ P_t f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub p: Option<f64>,
    pub f_id: String,
    /// Set when the curve stops early because `N_2` underflowed.
    #[serde(default)]
    pub truncated: bool,
}

impl DecayCurve {
    /// CSV with columns `t,value,quantity,p,f_id`; `p` is empty when unused.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,quantity,p,f_id\n");
        self.append_csv_rows(&mut out);
        out
    }

    /// Rows only, for concatenating several curves under one header.
    pub fn append_csv_rows(&self, out: &mut String) {
        let p = self.p.map(sig17).unwrap_or_default();
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig17(*t),
                sig17(*v),
                self.quantity.as_str(),
                p,
                self.f_id
            );
        }
    }
}

/// Coefficients of `f` cached so that `P_t f` costs one synthesis per time.
#[derive(Debug, Clone)]
pub struct Evolution<'a> {
    decomposition: &'a SpectralDecomposition,
    coeffs: Vec<f64>,
}

impl<'a> Evolution<'a> {
    /// Coefficients below `1e−15·max|c_k|` are round-off from the
    /// projection and are dropped, which keeps low-mode evolutions cheap.
    pub fn new(decomposition: &'a SpectralDecomposition, f: &Observable) -> Result<Self> {
        let mut coeffs = decomposition.coefficients(f)?;
        let top = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for c in coeffs.iter_mut() {
            if c.abs() <= 1e-15 * top {
                *c = 0.0;
            }
        }
        Ok(Self {
            decomposition,
            coeffs,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Spectral coefficients of `P_t f`. Non-constant modes that have decayed
    /// below `1e−17` of the largest one are dropped.
    pub fn coefficients_at(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let mut out: Vec<f64> = self
            .coeffs
            .iter()
            .zip(self.decomposition.rates())
            .map(|(c, r)| if *c == 0.0 { 0.0 } else { c * (-r * t).exp() })
            .collect();
        let top = out[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for c in out[1..].iter_mut() {
            if c.abs() < 1e-17 * top {
                *c = 0.0;
            }
        }
        Ok(out)
    }

    pub fn at(&self, t: f64) -> Result<Observable> {
        Ok(self.decomposition.synthesize(&self.coefficients_at(t)?))
    }

    /// `P_t f − μ(f)`, synthesized without the constant mode.
    pub fn centered_at(&self, t: f64) -> Result<Observable> {
        let mut c = self.coefficients_at(t)?;
        c[0] = 0.0;
        Ok(self.decomposition.synthesize(&c))
    }

    /// `Var(P_t f)` by Parseval.
    pub fn variance_at(&self, t: f64) -> Result<f64> {
        let c = self.coefficients_at(t)?;
        Ok(compensated_sum(c[1..].iter().map(|v| v * v)))
    }

    /// `log N_2(P_t f)` by a log-sum-exp over the modes, so it stays finite
    /// long after `N_2` itself underflows.
    pub fn log_norm2_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let logs: Vec<f64> = self.coeffs[1..]
            .iter()
            .zip(&self.decomposition.rates()[1..])
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, r)| 2.0 * c.abs().ln() - 2.0 * r * t)
            .collect();
        let Some(top) = logs.iter().copied().reduce(f64::max) else {
            return Ok(f64::NEG_INFINITY);
        };
        Ok(0.5 * (top + compensated_sum(logs.iter().map(|l| (l - top).exp())).ln()))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Domain(format!("exponent must be >= 1, got {p}")));
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::Domain(format!(
            "time grid must start at 0, got {}",
            times[0]
        )));
    }
    if let Some(w) = times
        .windows(2)
        .find(|w| !(w[1] > w[0]) || !w[1].is_finite())
    {
        return Err(Error::Domain(format!(
            "time grid must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// `P_t f`.
pub fn evolve(decomposition: &SpectralDecomposition, f: &Observable, t: f64) -> Result<Observable> {
    check_time(t)?;
    Evolution::new(decomposition, f)?.at(t)
}

/// `values[j] = N_p(P_{t_j} f)`.
pub fn decay_curve(
    decomposition: &SpectralDecomposition,
    f: &Observable,
    p: f64,
    times: &[f64],
    f_id: &str,
) -> Result<DecayCurve> {
    quantity_curve(decomposition, f, Quantity::CenteredNorm, p, times, f_id)
}

/// A curve of any [`Quantity`]; `p` is ignored for `Var` and `log_norm2`.
pub fn quantity_curve(
    decomposition: &SpectralDecomposition,
    f: &Observable,
    quantity: Quantity,
    p: f64,
    times: &[f64],
    f_id: &str,
) -> Result<DecayCurve> {
    check_times(times)?;
    let uses_p = matches!(quantity, Quantity::CenteredNorm | Quantity::MedianNorm);
    if uses_p {
        check_exponent(p)?;
    }
    let evo = Evolution::new(decomposition, f)?;
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| match quantity {
            Quantity::CenteredNorm => evo.centered_at(t)?.norm(p),
            Quantity::MedianNorm => evo.at(t)?.median_centered_norm(p),
            Quantity::Variance => evo.variance_at(t),
            Quantity::LogNorm2 => evo.log_norm2_at(t),
        })
        .collect::<Result<_>>()?;
    let mut curve = DecayCurve {
        times: times.to_vec(),
        values,
        quantity,
        p: uses_p.then_some(p),
        f_id: f_id.to_string(),
        truncated: false,
    };
    if quantity == Quantity::LogNorm2 {
        let floor = UNDERFLOW_FLOOR.ln();
        if let Some(cut) = curve.values.iter().position(|v| *v < floor) {
            curve.times.truncate(cut);
            curve.values.truncate(cut);
            curve.truncated = true;
        }
    }
    Ok(curve)
}

/// Outcome of [`contraction_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub passed: bool,
    pub ratio: f64,
}

/// `‖P_t f‖_p ≤ ‖f‖_p` for the uncentered norm; passes iff the ratio is at
/// most `1 + 1e−9`. A zero `f` has ratio 1.
pub fn contraction_check(
    decomposition: &SpectralDecomposition,
    f: &Observable,
    p: f64,
    t: f64,
) -> Result<Contraction> {
    check_exponent(p)?;
    let before = f.norm(p)?;
    let after = evolve(decomposition, f, t)?.norm(p)?;
    let ratio = if before == 0.0 {
        if after == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        after / before
    };
    Ok(Contraction {
        passed: ratio <= 1.0 + 1e-9,
        ratio,
    })
}

/// Second differences of `log N_2(P_t f)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityProfile {
    pub second_differences: Vec<f64>,
    /// Set when `N_2` dropped below [`UNDERFLOW_FLOOR`] before the grid ended.
    pub truncated: bool,
}

impl ConvexityProfile {
    pub fn min(&self) -> f64 {
        self.second_differences
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `D_j = g(t_{j+1}) − 2 g(t_j) + g(t_{j−1})` for `g(t) = log N_2(P_t f)`.
pub fn log_convexity_profile(
    decomposition: &SpectralDecomposition,
    f: &Observable,
    times: &[f64],
) -> Result<ConvexityProfile> {
    check_times(times)?;
    check_uniform(times)?;
    let evo = Evolution::new(decomposition, f)?;
    let n2 = evo.variance_at(0.0)?.sqrt();
    if n2 == 0.0 {
        return Err(Error::Precondition("log-convexity needs N_2(f) > 0".into()));
    }
    if evo.mean().abs() > 1e-10 * n2.max(evo.mean().abs()) {
        return Err(Error::Precondition(format!(
            "log-convexity needs a mean-zero f, mean is {}",
            evo.mean()
        )));
    }
    let curve = quantity_curve(decomposition, f, Quantity::LogNorm2, 2.0, times, "")?;
    let g = &curve.values;
    let second_differences = (1..g.len().saturating_sub(1))
        .map(|j| g[j + 1] - 2.0 * g[j] + g[j - 1])
        .collect();
    Ok(ConvexityProfile {
        second_differences,
        truncated: curve.truncated,
    })
}

fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 3 {
        return Err(Error::Precondition(
            "need at least three times for second differences".into(),
        ));
    }
    let step = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
            return Err(Error::Precondition("time grid is not uniform".into()));
        }
    }
    Ok(())
}

/// Outcome of [`bounded_convex_monotone_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck {
    pub status: CheckStatus,
    /// Largest `N_2(P_t f) / (e^{−βt} N_2(f))` on the grid.
    pub worst_ratio: f64,
    pub worst_time: f64,
}

/// Given the premise `Var(P_t f) ≤ c e^{−2βt}` on the grid, checks the
/// conclusion `N_2(P_t f) ≤ e^{−βt} N_2(f)` at every grid time. A premise
/// that fails on the grid makes the check inapplicable.
pub fn bounded_convex_monotone_check(
    curve: &DecayCurve,
    beta: f64,
    premise_c: f64,
) -> Result<MonotoneCheck> {
    if curve.quantity != Quantity::LogNorm2 {
        return Err(Error::Precondition(
            "monotone check needs a log_norm2 curve".into(),
        ));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
    }
    if !(premise_c > 0.0) {
        return Err(Error::Domain(format!(
            "premise constant must be > 0, got {premise_c}"
        )));
    }
    if curve.times.is_empty() {
        return Err(Error::Precondition("empty curve".into()));
    }
    let log_c = premise_c.ln();
    let premise_holds = curve
        .times
        .iter()
        .zip(&curve.values)
        .all(|(t, g)| 2.0 * g <= log_c - 2.0 * beta * t + 1e-9);
    let g0 = curve.values[0];
    let (mut worst_ratio, mut worst_time) = (f64::NEG_INFINITY, 0.0);
    for (t, g) in curve.times.iter().zip(&curve.values) {
        let r = (g - g0 + beta * t).exp();
        if r > worst_ratio {
            worst_ratio = r;
            worst_time = *t;
        }
    }
    let status = if !premise_holds {
        CheckStatus::Inapplicable
    } else if worst_ratio <= 1.0 + 1e-9 {
        CheckStatus::Passed
    } else {
        CheckStatus::Failed
    };
    Ok(MonotoneCheck {
        status,
        worst_ratio,
        worst_time,
    })
}

/// `{0} ∪ {t_min r^j : j = 0..count}` with `t_min = 1e−3/gap` and the last
/// point at `10/gap`.
pub fn default_time_grid(gap: f64) -> Result<Vec<f64>> {
    geometric_time_grid(1e-3 / gap, 10.0 / gap, 40)
}

/// Zero followed by `count` geometric points from `t_min` to `t_max`.
pub fn geometric_time_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || count < 2 {
        return Err(Error::Domain(format!(
            "invalid geometric grid ({t_min}, {t_max}, {count})"
        )));
    }
    let r = (t_max / t_min).powf(1.0 / (count - 1) as f64);
    let mut times = Vec::with_capacity(count + 1);
    times.push(0.0);
    times.extend((0..count - 1).map(|j| t_min * r.powi(j as i32)));
    times.push(t_max);
    Ok(times)
}

/// `steps + 1` equally spaced times from 0 to `t_max`.
pub fn uniform_time_grid(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return Err(Error::Domain(format!(
            "invalid uniform grid ({t_max}, {steps})"
        )));
    }
    let dt = t_max / steps as f64;
    Ok((0..=steps).map(|j| j as f64 * dt).collect())
}

/// Observed decay rate of `N_p(P_t f)` between `t_a < t_b`:
/// `(log N_p(P_{t_a} f) − log N_p(P_{t_b} f)) / (t_b − t_a)`. `None` when
/// either norm vanishes.
pub fn late_time_rate(
    decomposition: &SpectralDecomposition,
    f: &Observable,
    p: f64,
    t_a: f64,
    t_b: f64,
) -> Result<Option<f64>> {
    check_exponent(p)?;
    check_time(t_a)?;
    check_time(t_b)?;
    if !(t_b > t_a) {
        return Err(Error::Domain(format!(
            "need t_a < t_b, got {t_a} and {t_b}"
        )));
    }
    let evo = Evolution::new(decomposition, f)?;
    let a = evo.centered_at(t_a)?.norm(p)?;
    let b = evo.centered_at(t_b)?.norm(p)?;
    if !(a > 0.0 && b > 0.0) {
        return Ok(None);
    }
    Ok(Some((a.ln() - b.ln()) / (t_b - t_a)))
}
