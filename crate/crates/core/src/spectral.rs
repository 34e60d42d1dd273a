//! Eigendecomposition of generators in the μ-weighted inner product.
//!
//! Rates are stored in increasing order with `rates[0] = 0`; the spectral
//! gap is `rates[1]` (what the classical `H-2` notation calls `λ_2`), and the
//! Poincaré constant is its inverse.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::generator::{project_in_span, synthesize, GeneratorRep, MATRIX_TOL};
use crate::state_space::{Observable, ProbabilitySpace};

/// Below this the first nonzero rate is treated as a zero eigenvalue.
pub const ERGODICITY_THRESHOLD: f64 = 1e-12;

/// `−L = Σ_k λ_k e_k ⊗ e_k` in `L²(μ)`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    space: Arc<ProbabilitySpace>,
    rates: Vec<f64>,
    basis: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn space(&self) -> &Arc<ProbabilitySpace> {
        &self.space
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Columns are the eigenfunctions sampled on the space.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn num_modes(&self) -> usize {
        self.rates.len()
    }

    /// `true` when the basis does not span every function on the space.
    pub fn is_truncated(&self) -> bool {
        self.basis.ncols() < self.basis.nrows()
    }

    /// `λ_1`, the smallest nonzero decay rate.
    pub fn spectral_gap(&self) -> f64 {
        self.rates.get(1).copied().unwrap_or(0.0)
    }

    pub fn eigenfunction(&self, k: usize) -> Observable {
        let values = self.basis.column(k).iter().copied().collect();
        Observable::new(self.space.clone(), values).expect("basis column matches space")
    }

    /// `⟨f, e_k⟩_μ` for every mode, rejecting out-of-span input on a
    /// truncated basis.
    pub fn coefficients(&self, f: &Observable) -> Result<Vec<f64>> {
        if !(Arc::ptr_eq(&self.space, f.space()) || *self.space == **f.space()) {
            return Err(Error::SpaceMismatch);
        }
        project_in_span(self.space.weights(), &self.basis, f.values())
    }

    /// `Σ_k c_k e_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Observable {
        Observable::new(self.space.clone(), synthesize(&self.basis, coeffs))
            .expect("basis matches space")
    }

    /// `Lf` rebuilt from the spectrum.
    pub fn apply(&self, f: &Observable) -> Result<Observable> {
        let c = self.coefficients(f)?;
        let scaled: Vec<f64> = c.iter().zip(&self.rates).map(|(c, r)| -r * c).collect();
        Ok(self.synthesize(&scaled))
    }

    /// CSV with columns `index,rate`.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("index,rate\n");
        for (k, r) in self.rates.iter().enumerate() {
            let _ = writeln!(out, "{k},{}", sig17(*r));
        }
        out
    }
}

/// Full decomposition of `G`. Matrix generators are symmetrized as
/// `D^{1/2} Q D^{-1/2}` with `D = diag(μ)`, diagonalized, and mapped back by
/// `e_k = D^{-1/2} v_k`; spectral generators pass through unchanged.
pub fn decompose(generator: &GeneratorRep) -> Result<SpectralDecomposition> {
    match generator {
        GeneratorRep::Diagonal {
            space,
            rates,
            basis,
        } => Ok(SpectralDecomposition {
            space: space.clone(),
            rates: rates.clone(),
            basis: basis.clone(),
        }),
        GeneratorRep::Matrix { space, q } => decompose_matrix(space, q),
    }
}

fn decompose_matrix(
    space: &Arc<ProbabilitySpace>,
    q: &DMatrix<f64>,
) -> Result<SpectralDecomposition> {
    let n = space.len();
    let mu = space.weights();
    let sqrt_mu: Vec<f64> = mu.iter().map(|w| w.sqrt()).collect();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (mu[i] * q[(i, j)], mu[j] * q[(j, i)]);
            if (a - b).abs() > MATRIX_TOL * a.abs().max(b.abs()) {
                return Err(Error::Precondition(format!(
                    "detailed balance violated on edge ({i},{j}); cannot symmetrize"
                )));
            }
        }
    }
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let a = sqrt_mu[i] * q[(i, j)] / sqrt_mu[j];
        let b = sqrt_mu[j] * q[(j, i)] / sqrt_mu[i];
        -0.5 * (a + b)
    });
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolver(format!("no convergence on a {n}x{n} problem")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    // The kernel of Q contains the constants exactly; pin the ground state to
    // √μ and re-orthogonalize the rest against it.
    let norm_mu: f64 = sqrt_mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ground: Vec<f64> = sqrt_mu.iter().map(|v| v / norm_mu).collect();
    let mut rates = Vec::with_capacity(n);
    let mut basis = DMatrix::<f64>::zeros(n, n);
    for (k, &idx) in order.iter().enumerate() {
        let mut v: Vec<f64> = if k == 0 {
            ground.clone()
        } else {
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let overlap: f64 = v.iter().zip(&ground).map(|(a, b)| a * b).sum();
            for (vi, gi) in v.iter_mut().zip(&ground) {
                *vi -= overlap * gi;
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            v
        };
        let orientation: f64 = v.iter().enumerate().map(|(i, a)| (i + 1) as f64 * a).sum();
        if orientation < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        for i in 0..n {
            basis[(i, k)] = v[i] / sqrt_mu[i];
        }
        rates.push(if k == 0 {
            0.0
        } else {
            eig.eigenvalues[idx].max(0.0)
        });
    }
    Ok(SpectralDecomposition {
        space: space.clone(),
        rates,
        basis,
    })
}

/// `C_P = 1/λ_1`.
pub fn poincare_constant(decomposition: &SpectralDecomposition) -> Result<f64> {
    let gap = decomposition.spectral_gap();
    if gap <= ERGODICITY_THRESHOLD {
        return Err(Error::NonErgodic { gap });
    }
    Ok(1.0 / gap)
}

/// `Var_μ(f) / ℰ(f,f)`; `+∞` when the energy vanishes on a non-constant `f`.
pub fn rayleigh_quotient(generator: &GeneratorRep, f: &Observable) -> Result<f64> {
    let var = f.variance();
    let scale = f
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    if var <= 1e-28 * scale * scale {
        return Err(Error::Precondition(
            "Rayleigh quotient is undefined for a constant function".into(),
        ));
    }
    let energy = generator.dirichlet_form(f)?;
    if energy <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(var / energy)
}
