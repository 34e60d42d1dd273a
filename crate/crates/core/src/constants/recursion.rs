//! The doubling recursion for the constants `C(p)`, `p = 2^k`, in exact
//! rational arithmetic.
//!
//! `C(2) = C_P`, `C(4) = 108 C_P`, and for `p ≥ 4`
//!
//! ```text
//! D(2p) = 4 (2^{2p−1} + 2^{4p−5}) (2^p + 2^{3p−1}) (p−1) C(p) + p² C_P
//! C(2p) = D(2p) / (2p − 1)
//! ```
//!
//! Every entry is linear in `C_P`, so the table stores multipliers.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};

/// Deepest supported `k` (so `p ≤ 2^20`); the multiplier at that depth
/// already carries several million bits.
pub const MAX_DEPTH: u32 = 20;

/// `C(2^k) / C_P` for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CRecursionTable {
    c_p: f64,
    entries: BTreeMap<u32, BigRational>,
}

impl CRecursionTable {
    pub fn poincare_constant(&self) -> f64 {
        self.c_p
    }

    pub fn k_max(&self) -> u32 {
        *self.entries.keys().next_back().expect("table has C(2)")
    }

    /// `C(p)/C_P` for `p = 2^k`.
    pub fn multiplier(&self, p: u64) -> Option<&BigRational> {
        if !p.is_power_of_two() || p < 2 {
            return None;
        }
        self.entries.get(&p.trailing_zeros())
    }

    /// `C(p)` in floating point; overflows to `+∞` for very deep entries.
    pub fn value(&self, p: u64) -> Option<f64> {
        self.multiplier(p)
            .map(|m| m.to_f64().unwrap_or(f64::INFINITY) * self.c_p)
    }

    /// `D(p)/C_P = (p − 1) C(p)/C_P`, the full coefficient of `∫|f|^{p−2}Γ`.
    pub fn coefficient_multiplier(&self, p: u64) -> Option<BigRational> {
        self.multiplier(p)
            .map(|m| m * BigRational::from_integer(BigInt::from(p - 1)))
    }

    /// `(p, multiplier)` pairs in increasing `p`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.entries.iter().map(|(k, v)| (1u64 << k, v))
    }

    /// Serializable rows with exact numerator and denominator strings.
    pub fn records(&self) -> Vec<CRecord> {
        self.iter()
            .map(|(p, m)| CRecord {
                p,
                numerator: m.numer().to_string(),
                denominator: m.denom().to_string(),
                multiplier: m.to_f64().unwrap_or(f64::INFINITY),
                value: m.to_f64().unwrap_or(f64::INFINITY) * self.c_p,
            })
            .collect()
    }
}

/// One row of [`CRecursionTable::records`]; `numerator/denominator` is the
/// exact multiplier of `C_P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CRecord {
    pub p: u64,
    pub numerator: String,
    pub denominator: String,
    pub multiplier: f64,
    pub value: f64,
}

fn pow2(e: u64) -> BigInt {
    BigInt::one() << e
}

/// Builds `C(2), …, C(2^{k_max})`.
pub fn c_recursion(c_p: f64, k_max: u32) -> Result<CRecursionTable> {
    if !(c_p.is_finite() && c_p > 0.0) {
        return Err(Error::Domain(format!(
            "C_P must be positive and finite, got {c_p}"
        )));
    }
    if k_max < 1 {
        return Err(Error::Domain("k_max must be >= 1".into()));
    }
    if k_max > MAX_DEPTH {
        return Err(Error::Resource(format!(
            "k_max = {k_max} exceeds the supported depth {MAX_DEPTH} (p = 2^{k_max})"
        )));
    }
    let mut entries = BTreeMap::new();
    entries.insert(1, BigRational::one());
    if k_max >= 2 {
        entries.insert(2, BigRational::from_integer(BigInt::from(108)));
    }
    for k in 2..k_max {
        let p = 1u64 << k;
        let c = &entries[&k];
        let factor = BigInt::from(4)
            * (pow2(2 * p - 1) + pow2(4 * p - 5))
            * (pow2(p) + pow2(3 * p - 1))
            * BigInt::from(p - 1);
        let d =
            c * BigRational::from_integer(factor) + BigRational::from_integer(BigInt::from(p * p));
        let next = d / BigRational::from_integer(BigInt::from(2 * p - 1));
        entries.insert(k + 1, next);
    }
    Ok(CRecursionTable { c_p, entries })
}
