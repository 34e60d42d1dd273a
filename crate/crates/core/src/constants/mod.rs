//! Explicit decay constants: the three families of rate bounds, the `C(p)`
//! recursion, duality, interpolation and the `L^p` Poincaré constants.
//!
//! Every [`DecayBound`] is per-norm: it claims
//! `N_p(P_t f) ≤ K e^{−λt} N_p(f)`.

pub mod exact;
pub mod recursion;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use recursion::{c_recursion, CRecord, CRecursionTable, MAX_DEPTH};

/// Where a bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    ThmPetit,
    ThmGrand,
    ThmMedian,
    Dual,
    Interpolated,
    SpectralExact,
    /// Supplied by the user rather than derived.
    Custom,
}

impl BoundSource {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundSource::ThmPetit => "thm-petit",
            BoundSource::ThmGrand => "thm-grand",
            BoundSource::ThmMedian => "thm-median",
            BoundSource::Dual => "dual",
            BoundSource::Interpolated => "interpolated",
            BoundSource::SpectralExact => "spectral-exact",
            BoundSource::Custom => "custom",
        }
    }
}

/// `N_p(P_t f) ≤ K e^{−λt} N_p(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    pub p: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub source: BoundSource,
}

impl DecayBound {
    /// A user-supplied bound. Only finiteness and signs are checked, so
    /// deliberately wrong bounds (for falsification runs) are accepted.
    pub fn custom(p: f64, lambda: f64, k: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Domain(format!(
                "bound exponent must be >= 1, got {p}"
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!(
                "bound rate must be finite and >= 0, got {lambda}"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!(
                "bound prefactor must be > 0, got {k}"
            )));
        }
        Ok(Self {
            p,
            lambda,
            k,
            source: BoundSource::Custom,
        })
    }

    /// `K e^{−λt}`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.k * (-self.lambda * t).exp()
    }

    /// Same exponent, `K ≤ K'` and `λ ≥ λ'`.
    pub fn dominates(&self, other: &DecayBound) -> bool {
        self.p == other.p && self.k <= other.k && self.lambda >= other.lambda
    }
}

/// Rounds exponents like `4.000000000000001` (from `q/(q−1)` in floating
/// point) to the integer they denote.
fn snap(p: f64) -> f64 {
    let r = p.round();
    if (p - r).abs() <= 1e-9 * p.abs().max(1.0) {
        r
    } else {
        p
    }
}

fn is_power_of_two(p: f64) -> bool {
    p >= 1.0 && p.fract() == 0.0 && p <= u64::MAX as f64 && (p as u64).is_power_of_two()
}

fn check_c_p(c_p: f64) -> Result<()> {
    if !(c_p.is_finite() && c_p > 0.0) {
        return Err(Error::Domain(format!(
            "C_P must be positive and finite, got {c_p}"
        )));
    }
    Ok(())
}

/// `(2/(pC_P), 4^{1−2/p})` when `p` is a power of two, otherwise
/// `(1/(pC_P), 4^{1−1/p})`. At `p = 2` this is the exact `L²` bound.
pub fn bound_thm_grand(p: f64, c_p: f64) -> Result<DecayBound> {
    check_c_p(c_p)?;
    let p = snap(p);
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Domain(format!("thm-grand needs p >= 2, got {p}")));
    }
    let (lambda, k) = if is_power_of_two(p) {
        (2.0 / (p * c_p), 4f64.powf(1.0 - 2.0 / p))
    } else {
        (1.0 / (p * c_p), 4f64.powf(1.0 - 1.0 / p))
    };
    Ok(DecayBound {
        p,
        lambda,
        k,
        source: BoundSource::ThmGrand,
    })
}

/// The `K = 1` bound with rate `1/C(2^{⌈log₂p⌉})`, together with the
/// closed-form floor it must dominate.
#[derive(Debug, Clone, PartialEq)]
pub struct PetitBound {
    pub bound: DecayBound,
    /// The power of two whose `C` sets the rate.
    pub recursion_p: u64,
    /// `2^{k+6}/(2^{7·2^{k+1}} C_P)` for `2^k < p ≤ 2^{k+1}`, `k > 1`;
    /// `None` for `p ≤ 4`. May underflow to 0 for large `k`.
    pub closed_form_floor: Option<f64>,
}

pub fn bound_thm_petit(p: f64, c_p: f64) -> Result<PetitBound> {
    check_c_p(c_p)?;
    let p = snap(p);
    if !(p.is_finite() && p > 2.0) {
        return Err(Error::Domain(format!("thm-petit needs p > 2, got {p}")));
    }
    let k_ceil = p.log2().ceil() as u32;
    let k_ceil = if (1u64 << (k_ceil - 1)) as f64 >= p {
        k_ceil - 1
    } else {
        k_ceil
    };
    let table = c_recursion(c_p, k_ceil)?;
    let recursion_p = 1u64 << k_ceil;
    let c_rate = exact::rational(c_p)?;
    let rate = (table.multiplier(recursion_p).expect("entry exists") * &c_rate).recip();
    let lambda = rate.to_f64().unwrap_or(0.0);
    if lambda <= 0.0 {
        return Err(Error::Resource(format!(
            "rate 1/C({recursion_p}) underflows double precision"
        )));
    }
    let closed_form_floor = if k_ceil >= 3 {
        let floor = exact::petit_floor(k_ceil - 1, &c_rate)?;
        if rate < floor {
            return Err(Error::Consistency(format!(
                "recursion rate at p = {recursion_p} is below the closed-form floor"
            )));
        }
        Some(floor.to_f64().unwrap_or(0.0))
    } else {
        None
    };
    Ok(PetitBound {
        bound: DecayBound {
            p,
            lambda,
            k: 1.0,
            source: BoundSource::ThmPetit,
        },
        recursion_p,
        closed_form_floor,
    })
}

/// The median-route bound and the entropy-functional weights behind it,
/// normalized by `a = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianBound {
    pub bound: DecayBound,
    pub a: f64,
    pub b: f64,
    /// Decay rate of `E_p = a N_p^p + b Var^{p/2}`; `λ = γ/p`.
    pub gamma: f64,
}

pub fn bound_thm_median(p: f64, c_p: f64) -> Result<MedianBound> {
    check_c_p(c_p)?;
    let p = snap(p);
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Domain(format!("thm-median needs p >= 2, got {p}")));
    }
    let d = delta_fn(p - 2.0)?;
    let c = 9.0 * c_p * p * p / 4.0;
    let two_p = 2f64.powf(p);
    let gamma = p * (p - 1.0) / (c * d * two_p);
    let a0 = two_p * c * 2f64.powf((p - 2.0) / 2.0) * d;
    let b = gamma * a0 / (p / 2.0 - gamma * c_p);
    let k = (1.0 + b).powf(1.0 / p);
    Ok(MedianBound {
        bound: DecayBound {
            p,
            lambda: gamma / p,
            k,
            source: BoundSource::ThmMedian,
        },
        a: 1.0,
        b,
        gamma,
    })
}

/// `δ(p) = max(1, 2^{p−1})`.
pub fn delta_fn(p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Domain(format!("delta needs p >= 0, got {p}")));
    }
    Ok(2f64.powf(p - 1.0).max(1.0))
}

/// Bound at `q` to bound at the dual exponent `q/(q−1)`: `K` doubles,
/// `λ` is kept.
pub fn dualize(b: &DecayBound) -> Result<DecayBound> {
    if !(b.p > 1.0 && b.p.is_finite()) {
        return Err(Error::Domain(format!(
            "dual exponent needs q > 1, got {}",
            b.p
        )));
    }
    Ok(DecayBound {
        p: snap(b.p / (b.p - 1.0)),
        lambda: b.lambda,
        k: 2.0 * b.k,
        source: BoundSource::Dual,
    })
}

/// Riesz–Thorin between bounds at `p0 ≤ p ≤ p1`:
/// `1/p = (1−θ)/p0 + θ/p1`, `K = K0^{1−θ} K1^θ`, `λ = (1−θ)λ0 + θλ1`.
pub fn riesz_thorin_interpolate(b0: &DecayBound, b1: &DecayBound, p: f64) -> Result<DecayBound> {
    if !(b0.p <= p && p <= b1.p) {
        return Err(Error::Domain(format!(
            "p = {p} outside [{}, {}]",
            b0.p, b1.p
        )));
    }
    if p == b0.p {
        return Ok(*b0);
    }
    if p == b1.p {
        return Ok(*b1);
    }
    let theta = (1.0 / b0.p - 1.0 / p) / (1.0 / b0.p - 1.0 / b1.p);
    Ok(DecayBound {
        p,
        lambda: (1.0 - theta) * b0.lambda + theta * b1.lambda,
        k: b0.k.powf(1.0 - theta) * b1.k.powf(theta),
        source: BoundSource::Interpolated,
    })
}

/// Thm-grand at `p` interpolated between the neighbouring powers of two.
pub fn interpolated_grand(p: f64, c_p: f64) -> Result<DecayBound> {
    let p = snap(p);
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::Domain(format!("interpolation needs p > 2, got {p}")));
    }
    let lo = 2f64.powf(p.log2().floor());
    let lo = if lo == p { lo / 2.0 } else { lo };
    let b0 = bound_thm_grand(lo, c_p)?;
    let b1 = bound_thm_grand(2.0 * lo, c_p)?;
    riesz_thorin_interpolate(&b0, &b1, p)
}

/// `(2, λ_1, 1)`: the `L²` decay given by the spectral gap.
pub fn spectral_exact(gap: f64) -> Result<DecayBound> {
    if !(gap.is_finite() && gap > 0.0) {
        return Err(Error::Domain(format!(
            "spectral gap must be > 0, got {gap}"
        )));
    }
    Ok(DecayBound {
        p: 2.0,
        lambda: gap,
        k: 1.0,
        source: BoundSource::SpectralExact,
    })
}

/// `κ(p) = (C(p)(p−1))^{p/2}`.
pub fn kappa_lp(p: f64, c_of_p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) || !(c_of_p > 0.0) {
        return Err(Error::Domain(format!(
            "kappa needs p >= 1 and C(p) > 0, got ({p}, {c_of_p})"
        )));
    }
    Ok((c_of_p * (p - 1.0)).powf(p / 2.0))
}

/// `κ(p) ≤ (6p/p0)^p κ(p0)^{p/p0}` for `p ≥ p0`. At `p = p0` this gives
/// `6^{p0} κ(p0)`, not `κ(p0)`.
pub fn kappa_propagate(p0: f64, kappa0: f64, p: f64) -> Result<f64> {
    if !(p0 >= 1.0 && p >= p0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "propagation needs p >= p0 >= 1, got p0 = {p0}, p = {p}"
        )));
    }
    if !(kappa0 > 0.0) {
        return Err(Error::Domain(format!("kappa0 must be > 0, got {kappa0}")));
    }
    Ok((6.0 * p / p0).powf(p) * kappa0.powf(p / p0))
}

/// `B(p) = (p²/4) B(2)`.
pub fn b_relation(b2: f64, p: f64) -> Result<f64> {
    if !(p >= 2.0 && b2 > 0.0) {
        return Err(Error::Domain(format!(
            "B relation needs p >= 2 and B(2) > 0, got ({b2}, {p})"
        )));
    }
    Ok(p * p / 4.0 * b2)
}

/// Admissible interval `[C_P/4, 9C_P]` for `B(2)`.
pub fn sandwich(c_p: f64) -> Result<(f64, f64)> {
    check_c_p(c_p)?;
    Ok((c_p / 4.0, 9.0 * c_p))
}

/// Every derived bound at `p > 1`. Exponents below 2 are reached
/// through duality from `q = p/(p−1)`.
pub fn bounds_for_exponent(p: f64, c_p: f64) -> Result<Vec<DecayBound>> {
    check_c_p(c_p)?;
    let p = snap(p);
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("bounds need p > 1, got {p}")));
    }
    if p < 2.0 {
        let q = snap(p / (p - 1.0));
        return bounds_for_exponent(q, c_p)?.iter().map(dualize).collect();
    }
    let mut out = vec![bound_thm_grand(p, c_p)?];
    if p > 2.0 {
        match bound_thm_petit(p, c_p) {
            Ok(b) => out.push(b.bound),
            Err(Error::Resource(_)) => {}
            Err(e) => return Err(e),
        }
        if !is_power_of_two(p) {
            out.push(interpolated_grand(p, c_p)?);
        }
    }
    out.push(bound_thm_median(p, c_p)?.bound);
    Ok(out)
}

/// One row of the dominance comparison: `dominant` is at least as strong as
/// `dominated` at exponent `p` (`K` no larger, `λ` no smaller).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dominance {
    pub p: f64,
    pub dominant: BoundSource,
    pub dominated: BoundSource,
}

/// All dominance relations among bounds sharing an exponent.
pub fn dominance_table(bounds: &[DecayBound]) -> Vec<Dominance> {
    let mut rows = Vec::new();
    for (i, a) in bounds.iter().enumerate() {
        for (j, b) in bounds.iter().enumerate() {
            if i != j && a.dominates(b) && !(b.dominates(a) && j < i) {
                rows.push(Dominance {
                    p: a.p,
                    dominant: a.source,
                    dominated: b.source,
                });
            }
        }
    }
    rows
}
