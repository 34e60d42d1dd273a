//! Rational versions of the closed-form bounds, for the cases where the
//! result is rational. Prefactors of the thm-grand family are powers of 4
//! and are carried by their exponent.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact value of an `f64`.
pub fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("{x} has no rational value")))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `2^e` for an integer exponent of either sign.
pub fn pow2(e: i64) -> BigRational {
    let m = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(m)
    } else {
        BigRational::new(BigInt::one(), m)
    }
}

/// `4^e` with rational `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerOfFour(pub BigRational);

impl PowerOfFour {
    pub fn one() -> Self {
        PowerOfFour(BigRational::zero())
    }

    /// The exact value when `2e` is an integer (`4^e = 2^{2e}`).
    pub fn value(&self) -> Option<BigRational> {
        let twice = &self.0 * int(2);
        twice
            .is_integer()
            .then(|| pow2(twice.to_integer().to_i64().expect("moderate exponent")))
    }

    pub fn to_f64(&self) -> f64 {
        4f64.powf(self.0.to_f64().unwrap_or(f64::NAN))
    }

    pub fn times(&self, other: &PowerOfFour) -> PowerOfFour {
        PowerOfFour(&self.0 + &other.0)
    }
}

/// A bound `N_p(P_t f) ≤ K e^{−λt} N_p(f)` with every field exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactBound {
    pub p: BigRational,
    pub lambda: BigRational,
    pub k: PowerOfFour,
}

fn is_power_of_two(p: &BigRational) -> bool {
    if !p.is_integer() || !p.is_positive() {
        return false;
    }
    let n = p.to_integer();
    (&n & (&n - BigInt::one())).is_zero()
}

fn check_c_p(c_p: &BigRational) -> Result<()> {
    if !c_p.is_positive() {
        return Err(Error::Domain(format!("C_P must be positive, got {c_p}")));
    }
    Ok(())
}

/// `(2/(pC_P), 4^{1−2/p})` at powers of two, `(1/(pC_P), 4^{1−1/p})` otherwise.
pub fn grand(p: &BigRational, c_p: &BigRational) -> Result<ExactBound> {
    check_c_p(c_p)?;
    if *p < int(2) {
        return Err(Error::Domain(format!("thm-grand needs p >= 2, got {p}")));
    }
    let (num, shift) = if is_power_of_two(p) {
        (int(2), int(2))
    } else {
        (int(1), int(1))
    };
    Ok(ExactBound {
        p: p.clone(),
        lambda: num / (p * c_p),
        k: PowerOfFour(int(1) - shift / p),
    })
}

/// `2^{k+6} / (2^{7·2^{k+1}} C_P)`, the closed-form rate floor for
/// `2^k < p ≤ 2^{k+1}`, `k > 1`.
pub fn petit_floor(k: u32, c_p: &BigRational) -> Result<BigRational> {
    check_c_p(c_p)?;
    if k < 2 {
        return Err(Error::Domain(format!("closed form needs k > 1, got {k}")));
    }
    Ok(pow2(k as i64 + 6 - 7 * (1i64 << (k + 1))) / c_p)
}

/// `δ(p) = max(1, 2^{p−1})` at integer `p ≥ 0`.
pub fn delta(p: u32) -> BigRational {
    if p <= 1 {
        int(1)
    } else {
        pow2(p as i64 - 1)
    }
}

/// `[C_P/4, 9C_P]`.
pub fn sandwich(c_p: &BigRational) -> (BigRational, BigRational) {
    (c_p / int(4), c_p * int(9))
}

/// `q ↦ q/(q−1)`, `K ↦ 2K`, `λ` unchanged.
pub fn dualize(b: &ExactBound) -> Result<ExactBound> {
    if b.p <= int(1) {
        return Err(Error::Domain(format!(
            "dual exponent needs q > 1, got {}",
            b.p
        )));
    }
    Ok(ExactBound {
        p: &b.p / (&b.p - int(1)),
        lambda: b.lambda.clone(),
        k: b.k
            .times(&PowerOfFour(BigRational::new(1.into(), 2.into()))),
    })
}

/// Interpolation with `1/p = (1−θ)/p0 + θ/p1`.
pub fn riesz_thorin(
    b0: &ExactBound,
    b1: &ExactBound,
    p: &BigRational,
) -> Result<(BigRational, ExactBound)> {
    if !(b0.p <= *p && *p <= b1.p) {
        return Err(Error::Domain(format!(
            "p = {p} outside [{}, {}]",
            b0.p, b1.p
        )));
    }
    let theta = if b0.p == b1.p {
        BigRational::zero()
    } else {
        (b0.p.recip() - p.recip()) / (b0.p.recip() - b1.p.recip())
    };
    let one_minus = int(1) - &theta;
    Ok((
        theta.clone(),
        ExactBound {
            p: p.clone(),
            lambda: &one_minus * &b0.lambda + &theta * &b1.lambda,
            k: PowerOfFour(&one_minus * &b0.k.0 + &theta * &b1.k.0),
        },
    ))
}

/// The median-route constants at an even integer `p ≥ 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactMedian {
    /// Per-norm rate `γ/p`.
    pub lambda: BigRational,
    pub gamma: BigRational,
    /// `b` for the normalization `a = 1`.
    pub b: BigRational,
    /// `K^p = (a + b)/a`.
    pub k_pow_p: BigRational,
}

/// Rates and weights of the entropy functional `a N_p^p + b Var^{p/2}`.
pub fn median(p: u32, c_p: &BigRational) -> Result<ExactMedian> {
    check_c_p(c_p)?;
    if p < 2 || p % 2 == 1 {
        return Err(Error::Domain(format!(
            "exact median constants need an even p >= 2, got {p}"
        )));
    }
    let pr = int(p as i64);
    let d = delta(p - 2);
    let nine_p2_over_4 = int(9) * &pr * &pr / int(4);
    let gamma = &pr * (&pr - int(1)) / (&nine_p2_over_4 * c_p * &d * pow2(p as i64));
    let a0 = pow2(p as i64) * &nine_p2_over_4 * c_p * pow2((p as i64 - 2) / 2) * &d;
    let b = &gamma * a0 / (&pr / int(2) - &gamma * c_p);
    Ok(ExactMedian {
        lambda: &gamma / &pr,
        k_pow_p: int(1) + &b,
        gamma,
        b,
    })
}

/// `4(p−1)/(9p² δ(p−2) 2^p C_P)` exactly as printed.
pub fn median_printed_rate(p: u32, c_p: &BigRational) -> BigRational {
    let pr = int(p as i64);
    int(4) * (&pr - int(1))
        / (int(9) * &pr * &pr * delta(p.saturating_sub(2)) * pow2(p as i64) * c_p)
}

/// `1 + (9p²/4)(p−1)2^{(3p−2)/2}δ(p−2) / ((9p²/4)δ(p−2)2^{p−1} − p + 1)`
/// exactly as printed, at even `p`.
pub fn median_printed_k_pow_p(p: u32) -> BigRational {
    let pr = int(p as i64);
    let d = delta(p.saturating_sub(2));
    let c = int(9) * &pr * &pr / int(4);
    let num = &c * (&pr - int(1)) * pow2((3 * p as i64 - 2) / 2) * &d;
    let den = &c * &d * pow2(p as i64 - 1) - &pr + int(1);
    int(1) + num / den
}

/// `(p²/4) B(2)`.
pub fn b_relation(b2: &BigRational, p: &BigRational) -> BigRational {
    p * p / int(4) * b2
}

/// `numerator/denominator` in lowest terms.
pub fn to_fraction_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}
