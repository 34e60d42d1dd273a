//! Orthonormal (probabilists') Hermite polynomials and the matching
//! Gauss–Hermite rule for the standard Gaussian measure.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::state_space::{compensated_sum, ProbabilitySpace, SpaceKind};

/// Values `h_0(x), …, h_{m-1}(x)` of the orthonormal Hermite polynomials,
/// `h_{k+1} = (x h_k − √k h_{k−1}) / √(k+1)`.
pub fn orthonormal_hermite(x: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    out.push(1.0);
    if m == 1 {
        return out;
    }
    out.push(x);
    for k in 1..m - 1 {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Gauss rule for `N(0, 1)` with `n` nodes: exact for polynomials of degree
/// `≤ 2n − 1`. Nodes come from the Jacobi matrix (Golub–Welsch) and are
/// polished by Newton steps; weights use the Christoffel form
/// `w_i = 1 / Σ_k h_k(x_i)²`, which keeps tail weights relatively accurate.
pub fn gauss_hermite_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Construction(
            "quadrature needs at least one node".into(),
        ));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = orthonormal_hermite(*x, n + 1);
            let deriv = (n as f64).sqrt() * h[n - 1];
            if deriv == 0.0 {
                break;
            }
            let step = h[n] / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // exact symmetry of the rule
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let raw: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let h = orthonormal_hermite(x, n);
            1.0 / compensated_sum(h.iter().map(|v| v * v))
        })
        .collect();
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.iter().map(|w| w / total).collect();
    Ok((nodes, weights))
}

/// The Gauss–Hermite probability space with `n` nodes.
pub fn gauss_hermite_space(n: usize) -> Result<Arc<ProbabilitySpace>> {
    let (nodes, weights) = gauss_hermite_rule(n)?;
    ProbabilitySpace::new(nodes, weights, SpaceKind::GaussHermite).map(Arc::new)
}
