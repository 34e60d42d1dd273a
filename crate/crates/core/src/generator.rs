//! μ-symmetric generators, their carré du champ and Dirichlet form.
//!
//! Two backends share one type:
//!
//! * **matrix**: an explicit `n × n` rate matrix `Q` on a finite space, built
//!   here as the zero-flux finite-difference discretization of
//!   `L = Δ − V'∂` with edge weights `√(μ_i μ_{i±1})`, so detailed balance
//!   holds exactly regardless of the potential;
//! * **diagonal-spectral**: decay rates and an `L²(μ)`-orthonormal eigenbasis
//!   sampled on a quadrature space. The Ornstein–Uhlenbeck model (rates `k`,
//!   Hermite eigenfunctions) is the reference instance; on it the chain rule
//!   and the derivation property of `Γ` hold up to quadrature round-off.
//!
//! Observables handed to a diagonal backend must lie in the span of its
//! basis; anything else is rejected with [`Error::OutOfSpan`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{gauss_hermite_space, orthonormal_hermite};
use crate::state_space::{compensated_sum, Observable, ProbabilitySpace, SpaceKind};

/// Relative projection residual above which an observable is out of span.
pub const SPAN_TOL: f64 = 1e-8;
/// Tolerance for row sums and detailed balance of a rate matrix.
pub const MATRIX_TOL: f64 = 1e-10;
/// Tolerance on the orthonormality of a spectral basis.
pub const BASIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Matrix,
    DiagonalSpectral,
}

/// A μ-symmetric Markov generator.
#[derive(Debug, Clone)]
pub enum GeneratorRep {
    Matrix {
        space: Arc<ProbabilitySpace>,
        q: DMatrix<f64>,
    },
    Diagonal {
        space: Arc<ProbabilitySpace>,
        /// `0 = λ_0 < λ_1 ≤ …`
        rates: Vec<f64>,
        /// Column `k` holds `e_k` at the points of `space`.
        basis: DMatrix<f64>,
    },
}

impl GeneratorRep {
    /// Wraps an explicit rate matrix after checking the generator invariants.
    pub fn from_matrix(space: Arc<ProbabilitySpace>, q: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Construction(format!(
                "rate matrix is {}x{}, space has {n} points",
                q.nrows(),
                q.ncols()
            )));
        }
        let mu = space.weights();
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Construction(format!("Q[{i},{j}] is not finite")));
                }
                if i != j && v < 0.0 {
                    return Err(Error::Construction(format!(
                        "negative off-diagonal Q[{i},{j}] = {v}"
                    )));
                }
                row += v;
            }
            if row.abs() > MATRIX_TOL * q[(i, i)].abs().max(1.0) {
                return Err(Error::Construction(format!("row {i} sums to {row}")));
            }
            for j in i + 1..n {
                let (a, b) = (mu[i] * q[(i, j)], mu[j] * q[(j, i)]);
                if (a - b).abs() > MATRIX_TOL * a.max(b) {
                    return Err(Error::Construction(format!(
                        "detailed balance fails on edge ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(GeneratorRep::Matrix { space, q })
    }

    /// Wraps rates and an orthonormal basis after checking their invariants.
    pub fn from_spectral(
        space: Arc<ProbabilitySpace>,
        rates: Vec<f64>,
        basis: DMatrix<f64>,
    ) -> Result<Self> {
        let n = space.len();
        let m = rates.len();
        if m == 0 || basis.nrows() != n || basis.ncols() != m {
            return Err(Error::Construction(format!(
                "basis is {}x{}, expected {n}x{m}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if rates[0].abs() > 1e-12 {
            return Err(Error::Construction(format!(
                "first rate must be 0, got {}",
                rates[0]
            )));
        }
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) || rates.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Construction(
                "rates must be finite, nonnegative and nondecreasing".into(),
            ));
        }
        if basis.column(0).iter().any(|v| (v - 1.0).abs() > BASIS_TOL) {
            return Err(Error::Construction(
                "rate 0 must carry the constant eigenfunction 1".into(),
            ));
        }
        let gram = weighted_gram(space.weights(), &basis);
        for j in 0..m {
            for k in 0..m {
                let expected = if j == k { 1.0 } else { 0.0 };
                if (gram[(j, k)] - expected).abs() > BASIS_TOL {
                    return Err(Error::Construction(format!(
                        "basis not orthonormal: <e_{j}, e_{k}> = {}",
                        gram[(j, k)]
                    )));
                }
            }
        }
        Ok(GeneratorRep::Diagonal {
            space,
            rates,
            basis,
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            GeneratorRep::Matrix { .. } => GeneratorKind::Matrix,
            GeneratorRep::Diagonal { .. } => GeneratorKind::DiagonalSpectral,
        }
    }

    pub fn space(&self) -> &Arc<ProbabilitySpace> {
        match self {
            GeneratorRep::Matrix { space, .. } | GeneratorRep::Diagonal { space, .. } => space,
        }
    }

    /// Magnitude of the generator, used to scale absolute tolerances.
    pub fn rate_scale(&self) -> f64 {
        match self {
            GeneratorRep::Matrix { q, .. } => {
                q.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()))
            }
            GeneratorRep::Diagonal { rates, .. } => rates.last().copied().unwrap_or(0.0).max(1.0),
        }
    }

    /// The generator `c·L`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!(
                "rescaling factor must be > 0, got {c}"
            )));
        }
        Ok(match self {
            GeneratorRep::Matrix { space, q } => GeneratorRep::Matrix {
                space: space.clone(),
                q: q * c,
            },
            GeneratorRep::Diagonal {
                space,
                rates,
                basis,
            } => GeneratorRep::Diagonal {
                space: space.clone(),
                rates: rates.iter().map(|r| r * c).collect(),
                basis: basis.clone(),
            },
        })
    }

    fn check_space(&self, f: &Observable) -> Result<()> {
        let space = self.space();
        if Arc::ptr_eq(space, f.space()) || **space == **f.space() {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// Basis coefficients `⟨f, e_k⟩_μ` of `f` (diagonal backend only),
    /// rejecting `f` when the projection residual exceeds [`SPAN_TOL`].
    pub fn coefficients(&self, f: &Observable) -> Result<Vec<f64>> {
        self.check_space(f)?;
        match self {
            GeneratorRep::Diagonal { space, basis, .. } => {
                project_in_span(space.weights(), basis, f.values())
            }
            GeneratorRep::Matrix { .. } => Err(Error::Precondition(
                "basis coefficients are only defined for the diagonal backend".into(),
            )),
        }
    }

    /// `Lf`.
    pub fn apply(&self, f: &Observable) -> Result<Observable> {
        self.check_space(f)?;
        match self {
            GeneratorRep::Matrix { q, .. } => {
                let v = DVector::from_column_slice(f.values());
                Ok(f.with_values((q * v).as_slice().to_vec()))
            }
            GeneratorRep::Diagonal {
                space,
                rates,
                basis,
            } => {
                let c = project_in_span(space.weights(), basis, f.values())?;
                let scaled: Vec<f64> = c.iter().zip(rates).map(|(c, r)| -r * c).collect();
                Ok(f.with_values(synthesize(basis, &scaled)))
            }
        }
    }

    /// `Γ(f,g) = ½ (L(fg) − f Lg − g Lf)`, pointwise.
    ///
    /// For a rate matrix this equals `½ Σ_j Q_ij (f_j − f_i)(g_j − g_i)`,
    /// which is what gets evaluated (it is nonnegative by construction when
    /// `f = g`).
    pub fn carre_du_champ(&self, f: &Observable, g: &Observable) -> Result<Observable> {
        self.check_space(f)?;
        self.check_space(g)?;
        match self {
            GeneratorRep::Matrix { q, .. } => {
                let (fv, gv) = (f.values(), g.values());
                let n = fv.len();
                let mut out = vec![0.0; n];
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let rate = q[(i, j)];
                        if j != i && rate != 0.0 {
                            acc += rate * (fv[j] - fv[i]) * (gv[j] - gv[i]);
                        }
                    }
                    *o = 0.5 * acc;
                }
                Ok(f.with_values(out))
            }
            GeneratorRep::Diagonal { .. } => {
                let fg = f.mul(g)?;
                let l_fg = self.apply(&fg)?;
                let l_f = self.apply(f)?;
                let l_g = self.apply(g)?;
                let vals = (0..f.len())
                    .map(|i| {
                        0.5 * (l_fg.values()[i]
                            - f.values()[i] * l_g.values()[i]
                            - g.values()[i] * l_f.values()[i])
                    })
                    .collect();
                Ok(f.with_values(vals))
            }
        }
    }

    /// `ℰ(f,f) = −∫ f Lf dμ`, cross-checked against `∫ Γ(f,f) dμ`.
    pub fn dirichlet_form(&self, f: &Observable) -> Result<f64> {
        let lf = self.apply(f)?;
        let space = f.space();
        let by_generator = -compensated_sum(
            space
                .weights()
                .iter()
                .zip(f.values())
                .zip(lf.values())
                .map(|((w, a), b)| w * a * b),
        );
        let gamma = self.carre_du_champ(f, f)?;
        let by_gamma = gamma.mean();
        let l2 = space.integrate(&f.values().iter().map(|v| v * v).collect::<Vec<_>>());
        let tol = 1e-9 * by_generator.abs().max(by_gamma.abs()) + 1e-12 * l2 * self.rate_scale();
        if (by_generator - by_gamma).abs() > tol {
            return Err(Error::Consistency(format!(
                "Dirichlet form evaluations disagree: -<f,Lf> = {by_generator}, <Γ(f,f)> = {by_gamma}"
            )));
        }
        Ok(by_generator.max(0.0))
    }

    /// `‖L(φ(f)) − φ'(f) Lf − φ''(f) Γ(f,f)‖_{L²(μ)}`: how far the backend is
    /// from a diffusion on this `f` and `φ`.
    pub fn chain_rule_residual<P, D1, D2>(
        &self,
        f: &Observable,
        phi: P,
        dphi: D1,
        d2phi: D2,
    ) -> Result<f64>
    where
        P: Fn(f64) -> f64,
        D1: Fn(f64) -> f64,
        D2: Fn(f64) -> f64,
    {
        let composed = f.map(phi);
        let lhs = self.apply(&composed)?;
        let lf = self.apply(f)?;
        let gamma = self.carre_du_champ(f, f)?;
        let residual: Vec<f64> = (0..f.len())
            .map(|i| {
                let v = f.values()[i];
                let r = lhs.values()[i] - dphi(v) * lf.values()[i] - d2phi(v) * gamma.values()[i];
                r * r
            })
            .collect();
        Ok(f.space().integrate(&residual).max(0.0).sqrt())
    }

    /// Serializable form.
    pub fn to_document(&self) -> GeneratorDocument {
        let space = self.space();
        let mut doc = GeneratorDocument {
            kind: self.kind(),
            n: space.len(),
            points: space.points().to_vec(),
            weights: space.weights().to_vec(),
            matrix: None,
            rates: None,
            basis: None,
        };
        match self {
            GeneratorRep::Matrix { q, .. } => {
                let n = q.nrows();
                doc.matrix = Some(
                    (0..n)
                        .flat_map(|i| (0..n).map(move |j| (i, j)))
                        .map(|ij| q[ij])
                        .collect(),
                );
            }
            GeneratorRep::Diagonal { rates, basis, .. } => {
                doc.rates = Some(rates.clone());
                doc.basis = Some(
                    basis
                        .column_iter()
                        .map(|c| c.iter().copied().collect())
                        .collect(),
                );
            }
        }
        doc
    }

    /// JSON text with sorted keys.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self.to_document())?;
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GeneratorDocument = serde_json::from_str(text)?;
        doc.into_generator()
    }
}

/// On-disk form of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDocument {
    pub kind: GeneratorKind,
    pub n: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl GeneratorDocument {
    pub fn into_generator(self) -> Result<GeneratorRep> {
        let n = self.n;
        if self.points.len() != n {
            return Err(Error::Construction(format!(
                "n = {n} but {} points",
                self.points.len()
            )));
        }
        match self.kind {
            GeneratorKind::Matrix => {
                let space = Arc::new(ProbabilitySpace::new(
                    self.points,
                    self.weights,
                    SpaceKind::Grid,
                )?);
                let flat = self.matrix.ok_or_else(|| {
                    Error::Construction("matrix generator without a matrix".into())
                })?;
                if flat.len() != n * n {
                    return Err(Error::Construction(format!(
                        "matrix has {} entries, expected {}",
                        flat.len(),
                        n * n
                    )));
                }
                GeneratorRep::from_matrix(space, DMatrix::from_row_slice(n, n, &flat))
            }
            GeneratorKind::DiagonalSpectral => {
                let space = Arc::new(ProbabilitySpace::new(
                    self.points,
                    self.weights,
                    SpaceKind::GaussHermite,
                )?);
                let rates = self.rates.ok_or_else(|| {
                    Error::Construction("spectral generator without rates".into())
                })?;
                let columns = self.basis.ok_or_else(|| {
                    Error::Construction("spectral generator without a basis".into())
                })?;
                if columns.len() != rates.len() || columns.iter().any(|c| c.len() != n) {
                    return Err(Error::Construction(
                        "basis shape does not match rates and points".into(),
                    ));
                }
                let basis = DMatrix::from_fn(n, rates.len(), |i, k| columns[k][i]);
                GeneratorRep::from_spectral(space, rates, basis)
            }
        }
    }
}

/// Zero-flux finite-difference generator on a grid space:
/// `(Lf)_i = [w_{i+½}(f_{i+1} − f_i) + w_{i−½}(f_{i−1} − f_i)] / (μ_i h²)`
/// with `w_{i±½} = √(μ_i μ_{i±1})` and no flux through the end points.
pub fn build_grid_generator(space: &Arc<ProbabilitySpace>) -> Result<GeneratorRep> {
    if space.kind() != SpaceKind::Grid {
        return Err(Error::Construction(
            "grid generator needs a grid space".into(),
        ));
    }
    let n = space.len();
    if n < 3 {
        return Err(Error::Construction(format!(
            "grid generator needs n >= 3, got {n}"
        )));
    }
    let h = space.spacing().expect("grid spacing");
    let h2 = h * h;
    let mu = space.weights();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        let w = (mu[i] * mu[i + 1]).sqrt();
        q[(i, i + 1)] = w / (mu[i] * h2);
        q[(i + 1, i)] = w / (mu[i + 1] * h2);
    }
    for i in 0..n {
        let off: f64 = (if i > 0 { q[(i, i - 1)] } else { 0.0 })
            + (if i + 1 < n { q[(i, i + 1)] } else { 0.0 });
        q[(i, i)] = -off;
    }
    GeneratorRep::from_matrix(space.clone(), q)
}

/// Ornstein–Uhlenbeck model: rates `0, 1, …, m−1` with orthonormal Hermite
/// eigenfunctions on a `quad_nodes`-point Gauss–Hermite space.
pub fn build_ou_hermite(m: usize, quad_nodes: usize) -> Result<GeneratorRep> {
    if m < 2 {
        return Err(Error::Precondition(format!(
            "OU model needs m >= 2, got {m}"
        )));
    }
    if quad_nodes < 2 * m {
        return Err(Error::Precondition(format!(
            "quad_nodes = {quad_nodes} < 2m = {}: basis products would not integrate exactly",
            2 * m
        )));
    }
    let space = gauss_hermite_space(quad_nodes)?;
    let mut basis = DMatrix::<f64>::zeros(quad_nodes, m);
    for (i, &x) in space.points().iter().enumerate() {
        for (k, v) in orthonormal_hermite(x, m).into_iter().enumerate() {
            basis[(i, k)] = v;
        }
    }
    let rates = (0..m).map(|k| k as f64).collect();
    GeneratorRep::from_spectral(space, rates, basis)
}

pub(crate) fn weighted_gram(weights: &[f64], basis: &DMatrix<f64>) -> DMatrix<f64> {
    let m = basis.ncols();
    DMatrix::from_fn(m, m, |j, k| {
        compensated_sum(
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * basis[(i, j)] * basis[(i, k)]),
        )
    })
}

/// `c_k = Σ_i μ_i f_i e_k(i)`.
pub(crate) fn project(weights: &[f64], basis: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
    basis
        .column_iter()
        .map(|col| {
            compensated_sum(
                weights
                    .iter()
                    .zip(values)
                    .zip(col.iter())
                    .map(|((w, f), e)| w * f * e),
            )
        })
        .collect()
}

/// `Σ_k c_k e_k`, skipping zero coefficients.
pub(crate) fn synthesize(basis: &DMatrix<f64>, coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis.nrows()];
    for (col, &c) in basis.column_iter().zip(coeffs) {
        if c != 0.0 {
            for (o, e) in out.iter_mut().zip(col.iter()) {
                *o += c * e;
            }
        }
    }
    out
}

pub(crate) fn project_in_span(
    weights: &[f64],
    basis: &DMatrix<f64>,
    values: &[f64],
) -> Result<Vec<f64>> {
    let coeffs = project(weights, basis, values);
    if basis.ncols() < basis.nrows() {
        let back = synthesize(basis, &coeffs);
        let residual = compensated_sum(
            weights
                .iter()
                .zip(values)
                .zip(&back)
                .map(|((w, f), g)| w * (f - g) * (f - g)),
        )
        .max(0.0)
        .sqrt();
        let norm = compensated_sum(weights.iter().zip(values).map(|(w, f)| w * f * f)).sqrt();
        if residual > SPAN_TOL * norm.max(1.0) {
            return Err(Error::OutOfSpan { residual });
        }
    }
    Ok(coeffs)
}
