//! Empirical lower bounds on best constants: the largest LHS/RHS ratio over
//! a family, refined by coordinate ascent along eigenfunctions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorRep;
use crate::spectral::SpectralDecomposition;
use crate::state_space::Observable;

use super::checks::{fmt_num, lp_constant_ratio};
use super::family::{usable_modes, Member};

/// Which best constant to probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case")]
pub enum BestConstantTarget {
    /// `Var(f) / ℰ(f, f)`, whose supremum is `C_P`.
    Poincare,
    /// `N_p^p(f) / ∫|f − μ(f)|^{p−2} Γ(f,f)`.
    IntegratedLp { p: f64 },
    /// `M_p^p(f) / ∫|f − m(f)|^{p−2} Γ(f,f)`, whose supremum is `B(p)`.
    MedianLp { p: f64 },
}

impl BestConstantTarget {
    pub fn name(&self) -> String {
        match self {
            BestConstantTarget::Poincare => "poincare".into(),
            BestConstantTarget::IntegratedLp { p } => format!("integrated-lp/p={}", fmt_num(*p)),
            BestConstantTarget::MedianLp { p } => format!("median-lp/p={}", fmt_num(*p)),
        }
    }

    /// The ratio for one function; `None` if degenerate.
    pub fn ratio(&self, g: &GeneratorRep, f: &Observable) -> Result<Option<f64>> {
        match *self {
            BestConstantTarget::Poincare => lp_constant_ratio(g, f, 2.0, f.mean()),
            BestConstantTarget::IntegratedLp { p } | BestConstantTarget::MedianLp { p }
                if !(p >= 2.0) =>
            {
                Err(Error::Domain(format!("{} needs p >= 2", self.name())))
            }
            BestConstantTarget::IntegratedLp { p } => lp_constant_ratio(g, f, p, f.mean()),
            BestConstantTarget::MedianLp { p } => lp_constant_ratio(g, f, p, f.weighted_median()),
        }
    }
}

/// A certified lower bound on a best constant and the function attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct BestConstant {
    pub value: f64,
    /// Id of the family member the search started from.
    pub witness_id: String,
    pub witness: Observable,
    /// Ascent sweeps that improved the ratio.
    pub improving_sweeps: usize,
}

/// Largest ratio over `members`, then up to `budget` sweeps of coordinate
/// ascent from the best member along `e_1, …, e_d`. Each direction keeps its
/// own step, starting at a quarter of `N_2` of the witness, doubled after a
/// successful move and halved otherwise.
pub fn estimate_best_constant(
    g: &GeneratorRep,
    s: &SpectralDecomposition,
    target: BestConstantTarget,
    members: &[Member],
    budget: usize,
) -> Result<BestConstant> {
    if budget == 0 {
        return Err(Error::Domain("optimizer budget must be >= 1".into()));
    }
    let ratios: Vec<Result<Option<f64>>> =
        members.par_iter().map(|m| target.ratio(g, &m.f)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in ratios.into_iter().enumerate() {
        if let Some(r) = r? {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
    }
    let Some((index, mut value)) = best else {
        return Err(Error::Precondition(format!(
            "every member is degenerate for {}",
            target.name()
        )));
    };
    let mut witness = members[index].f.clone();

    let directions = ascent_dimension(s);
    let modes: Vec<Observable> = (1..=directions).map(|k| s.eigenfunction(k)).collect();
    let mut steps = vec![0.25 * witness.centered_norm(2.0)?; directions];
    let mut improving_sweeps = 0;
    for _ in 0..budget {
        let mut improved = false;
        for (e, step) in modes.iter().zip(steps.iter_mut()) {
            let mut moved = false;
            for sign in [1.0, -1.0] {
                let trial = witness.axpy(sign * *step, e)?;
                if let Some(r) = target.ratio(g, &trial)? {
                    if r > value {
                        value = r;
                        witness = trial;
                        moved = true;
                        break;
                    }
                }
            }
            *step *= if moved { 2.0 } else { 0.5 };
            improved |= moved;
        }
        if improved {
            improving_sweeps += 1;
        }
    }
    Ok(BestConstant {
        value,
        witness_id: members[index].id.clone(),
        witness,
        improving_sweeps,
    })
}

/// Up to 8 directions, fewer on a truncated basis.
fn ascent_dimension(s: &SpectralDecomposition) -> usize {
    usable_modes(s, 8).max(1)
}

/// Ratios of a `p = 2` median witness `f` and of its transport
/// `h = sign(f − m)|f − m|^{2/p}` under the median inequality at `p`. The
/// transport satisfies `|h|^p = (f − m)²` and, for diffusions,
/// `|h|^{p−2} Γ(h) = (4/p²) Γ(f)`, so `ratio_p(h) = (p²/4) ratio_2(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub ratio_2: f64,
    pub ratio_p: f64,
    pub transported: Observable,
}

impl Transport {
    /// `ratio_p / ((p²/4) ratio_2)`; 1 for an exact chain rule.
    pub fn relation(&self, p: f64) -> f64 {
        self.ratio_p / (p * p / 4.0 * self.ratio_2)
    }
}

pub fn transported_median_ratio(g: &GeneratorRep, f: &Observable, p: f64) -> Result<Transport> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("transport needs p >= 2, got {p}")));
    }
    let centered = f.shift(-f.weighted_median());
    let transported = centered.signed_power(2.0 / p)?;
    let ratio_2 = BestConstantTarget::MedianLp { p: 2.0 }
        .ratio(g, &centered)?
        .ok_or_else(|| Error::Precondition("transport witness is degenerate at p = 2".into()))?;
    let ratio_p = BestConstantTarget::MedianLp { p }
        .ratio(g, &transported)?
        .ok_or_else(|| {
            Error::Precondition(format!("transported witness is degenerate at p = {p}"))
        })?;
    Ok(Transport {
        ratio_2,
        ratio_p,
        transported,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_grid_generator, build_ou_hermite};
    use crate::spectral::{decompose, poincare_constant};
    use crate::state_space::build_grid_space;
    use crate::verify::family::{FamilyKind, TestFunctionFamily};

    #[test]
    fn poincare_estimate_on_ou() {
        let g = build_ou_hermite(24, 97).unwrap();
        let s = decompose(&g).unwrap();
        let fam = TestFunctionFamily::new(FamilyKind::RandomSmooth, 1, 50)
            .generate(&s)
            .unwrap();
        let est = estimate_best_constant(&g, &s, BestConstantTarget::Poincare, &fam, 30).unwrap();
        let c_p = poincare_constant(&s).unwrap();
        assert!(est.value >= c_p * (1.0 - 1e-6), "{}", est.value);
        assert!(est.value <= c_p * (1.0 + 1e-9));
        let c = s.coefficients(&est.witness).unwrap();
        let rest: f64 = c[2..].iter().map(|v| v * v).sum();
        assert!(rest < 1e-6 * c[1] * c[1]);
    }

    #[test]
    fn median_constant_at_two_is_sandwiched() {
        let g = build_ou_hermite(24, 97).unwrap();
        let s = decompose(&g).unwrap();
        let fam = TestFunctionFamily::new(FamilyKind::EigenMixtures, 2, 60)
            .generate(&s)
            .unwrap();
        let est = estimate_best_constant(&g, &s, BestConstantTarget::MedianLp { p: 2.0 }, &fam, 10)
            .unwrap();
        assert!(
            est.value >= 0.25 * 0.95 && est.value <= 9.0,
            "{}",
            est.value
        );
    }

    #[test]
    fn transport_replays_change_of_function() {
        let sp = build_grid_space(|x| 0.5 * x * x, (-8.0, 8.0), 401).unwrap();
        let g = build_grid_generator(&sp).unwrap();
        let s = decompose(&g).unwrap();
        for p in [3.0, 4.0] {
            let t = transported_median_ratio(&g, &s.eigenfunction(1), p).unwrap();
            assert!(t.relation(p) >= 0.95, "p={p}: {}", t.relation(p));
        }
    }

    #[test]
    fn errors() {
        let g = build_ou_hermite(8, 40).unwrap();
        let s = decompose(&g).unwrap();
        let c = vec![Member {
            id: "c".into(),
            f: Observable::constant(s.space(), 1.0),
        }];
        assert!(matches!(
            estimate_best_constant(&g, &s, BestConstantTarget::Poincare, &c, 3),
            Err(Error::Precondition(_))
        ));
        let e1 = vec![Member {
            id: "e".into(),
            f: s.eigenfunction(1),
        }];
        assert!(estimate_best_constant(&g, &s, BestConstantTarget::Poincare, &e1, 0).is_err());
        assert!(BestConstantTarget::MedianLp { p: 1.5 }
            .ratio(&g, &e1[0].f)
            .is_err());
    }
}
