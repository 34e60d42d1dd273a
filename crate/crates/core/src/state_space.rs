//! Discretized probability spaces and the observables living on them.
//!
//! A [`ProbabilitySpace`] is a finite, ordered set of real points carrying
//! strictly positive probability weights. An [`Observable`] is a vector of
//! values aligned with those points. Every statistic used elsewhere in the
//! crate (means, variances, centered and median-centered `L^p` norms) is
//! computed here, always as a μ-weighted sum in point order.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig17;

/// Tolerance on `Σ μ_i = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// How the points of a space were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Grid,
    GaussHermite,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Grid => "grid",
            SpaceKind::GaussHermite => "gauss-hermite",
        }
    }
}

/// A finite probability space `(x_i, μ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySpace {
    points: Vec<f64>,
    weights: Vec<f64>,
    kind: SpaceKind,
}

impl ProbabilitySpace {
    /// Validates and wraps points and weights.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, kind: SpaceKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Construction("empty probability space".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Construction(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::Construction(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Construction(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Construction(format!(
                "weight {i} = {} is not strictly positive",
                weights[i]
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Construction(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            points,
            weights,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Node spacing of a grid space; `None` for quadrature spaces.
    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            SpaceKind::Grid if self.len() >= 2 => {
                let n = self.len();
                Some((self.points[n - 1] - self.points[0]) / (n - 1) as f64)
            }
            _ => None,
        }
    }

    /// `Σ_i μ_i g_i`, compensated.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        compensated_sum(self.weights.iter().zip(values).map(|(w, v)| w * v))
    }

    /// `Σ_i μ_i h(x_i)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        compensated_sum(
            self.weights
                .iter()
                .zip(&self.points)
                .map(|(w, &x)| w * h(x)),
        )
    }
}

/// Builds the grid discretization of `μ ∝ e^{-V}` on `[a, b]` with `n` nodes.
pub fn build_grid_space<V>(
    potential: V,
    interval: (f64, f64),
    n: usize,
) -> Result<Arc<ProbabilitySpace>>
where
    V: Fn(f64) -> f64,
{
    let (a, b) = interval;
    if n < 3 {
        return Err(Error::Construction(format!(
            "grid needs n >= 3 nodes, got {n}"
        )));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Construction(format!("invalid interval [{a}, {b}]")));
    }
    let h = (b - a) / (n - 1) as f64;
    let points: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
        .collect();
    let mut energies = Vec::with_capacity(n);
    for (i, &x) in points.iter().enumerate() {
        let v = potential(x);
        if !v.is_finite() {
            return Err(Error::Construction(format!(
                "potential is not finite at node {i} (x = {x})"
            )));
        }
        energies.push(v);
    }
    // Shift by the minimum so the largest unnormalized weight is exactly 1.
    let v_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|v| (-(v - v_min)).exp()).collect();
    if let Some(i) = raw.iter().position(|&w| w <= 0.0) {
        return Err(Error::Construction(format!(
            "weight underflows to zero at node {i} (x = {})",
            points[i]
        )));
    }
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.iter().map(|w| w / total).collect();
    ProbabilitySpace::new(points, weights, SpaceKind::Grid).map(Arc::new)
}

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            carry += (sum - s) + t;
        } else {
            carry += (t - s) + sum;
        }
        sum = s;
    }
    sum + carry
}

/// `|x|^p` through `exp(p ln|x|)`, with `|0|^p = 0`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "norm exponent must be >= 1, got {p}"
        )))
    }
}

/// A real function on a [`ProbabilitySpace`].
#[derive(Debug, Clone)]
pub struct Observable {
    values: Vec<f64>,
    space: Arc<ProbabilitySpace>,
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.values == other.values
    }
}

impl Observable {
    pub fn new(space: Arc<ProbabilitySpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Construction(format!(
                "observable has {} values but the space has {} points",
                values.len(),
                space.len()
            )));
        }
        Ok(Self { values, space })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(space: &Arc<ProbabilitySpace>, f: F) -> Self {
        let values = space.points().iter().map(|&x| f(x)).collect();
        Self {
            values,
            space: Arc::clone(space),
        }
    }

    pub fn constant(space: &Arc<ProbabilitySpace>, c: f64) -> Self {
        Self {
            values: vec![c; space.len()],
            space: Arc::clone(space),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn space(&self) -> &Arc<ProbabilitySpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_space(&self, other: &Observable) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            space: Arc::clone(&self.space),
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two observables on the same space.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Observable, f: F) -> Result<Self> {
        if !self.same_space(other) {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Observable) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Observable) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Observable) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// `f + c·g`.
    pub fn axpy(&self, c: f64, g: &Observable) -> Result<Self> {
        self.zip_map(g, |a, b| a + c * b)
    }

    /// `μ(f) = Σ μ_i f_i`.
    pub fn mean(&self) -> f64 {
        self.space.integrate(&self.values)
    }

    /// `f − μ(f)`.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `Var_μ(f) = Σ μ_i (f_i − μ(f))²`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(
            self.space
                .weights()
                .iter()
                .zip(&self.values)
                .map(|(w, v)| w * (v - m) * (v - m)),
        )
    }

    /// `Σ μ_i |f_i − c|^p`.
    pub fn abs_moment(&self, center: f64, p: f64) -> f64 {
        compensated_sum(
            self.space
                .weights()
                .iter()
                .zip(&self.values)
                .map(|(w, v)| w * abs_pow(v - center, p)),
        )
    }

    /// Uncentered `‖f‖_p`.
    pub fn norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(self.abs_moment(0.0, p).powf(1.0 / p))
    }

    /// `N_p(f) = ‖f − μ(f)‖_p`.
    pub fn centered_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        if p == 2.0 {
            return Ok(self.variance().sqrt());
        }
        Ok(self.abs_moment(self.mean(), p).powf(1.0 / p))
    }

    /// `N_p^p(f)`, without the final root.
    pub fn centered_moment(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        if p == 2.0 {
            return Ok(self.variance());
        }
        Ok(self.abs_moment(self.mean(), p))
    }

    /// Lower weighted median: the smallest attained value `m` with
    /// `μ(f ≤ m) ≥ 1/2`, so that `μ(f < m) ≤ 1/2` and `μ(f > m) ≤ 1/2`.
    pub fn weighted_median(&self) -> f64 {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        let weights = self.space.weights();
        let mut cumulative = 0.0;
        for &i in &order {
            cumulative += weights[i];
            if cumulative >= 0.5 - 1e-12 {
                return self.values[i];
            }
        }
        self.values[*order.last().expect("non-empty observable")]
    }

    /// `M_p(f) = ‖f − m_μ(f)‖_p`.
    pub fn median_centered_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(self.abs_moment(self.weighted_median(), p).powf(1.0 / p))
    }

    /// `sign(f)|f|^h`.
    pub fn signed_power(&self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!(
                "signed power exponent must be > 0, got {h}"
            )));
        }
        Ok(self.map(|v| v.signum() * abs_pow(v, h)))
    }

    /// The 2-Lipschitz cut-off: zero on `|s| ≤ u`, identity on `|s| ≥ 2u`,
    /// linear in between.
    pub fn cutoff_phi(&self, u: f64) -> Result<Self> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::Domain(format!("cut-off level must be > 0, got {u}")));
        }
        Ok(self.map(|s| cutoff(s, u)))
    }

    /// `g = sign(f)|f|^{2/p} 1_{|f| ≥ s} + s^{(2−p)/p} f 1_{|f| < s}` for a
    /// median-zero `f`.
    pub fn truncated_median_test_function(&self, s: f64, p: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!(
                "truncation level must be > 0, got {s}"
            )));
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::Domain(format!("exponent must be >= 2, got {p}")));
        }
        let median = self.weighted_median();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if median.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Precondition(format!(
                "test function requires median 0, found {median}"
            )));
        }
        let inner = s.powf((2.0 - p) / p);
        Ok(self.map(|v| {
            if v.abs() >= s {
                v.signum() * abs_pow(v, 2.0 / p)
            } else {
                inner * v
            }
        }))
    }

    /// CSV with columns `point,weight,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,weight,value\n");
        for ((x, w), v) in self
            .space
            .points()
            .iter()
            .zip(self.space.weights())
            .zip(&self.values)
        {
            let _ = writeln!(out, "{},{},{}", sig17(*x), sig17(*w), sig17(*v));
        }
        out
    }

    /// Parses the [`to_csv`](Self::to_csv) format back into a space and an observable.
    pub fn from_csv(text: &str, kind: SpaceKind) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("point,weight,value") => {}
            other => return Err(Error::Parse(format!("unexpected CSV header {other:?}"))),
        }
        let (mut points, mut weights, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {row}: expected 3 fields")));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: {e}")))
            };
            points.push(parse(fields[0])?);
            weights.push(parse(fields[1])?);
            values.push(parse(fields[2])?);
        }
        let space = Arc::new(ProbabilitySpace::new(points, weights, kind)?);
        Observable::new(space, values)
    }
}

#[inline]
pub(crate) fn cutoff(s: f64, u: f64) -> f64 {
    let a = s.abs();
    if a <= u {
        0.0
    } else if a >= 2.0 * u {
        s
    } else {
        s.signum() * 2.0 * (a - u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Arc<ProbabilitySpace> {
        space_with(&vec![1.0 / n as f64; n])
    }

    fn space_with(weights: &[f64]) -> Arc<ProbabilitySpace> {
        let points = (0..weights.len()).map(|i| i as f64).collect();
        Arc::new(ProbabilitySpace::new(points, weights.to_vec(), SpaceKind::Grid).unwrap())
    }

    fn gaussian_401() -> Arc<ProbabilitySpace> {
        build_grid_space(|x| 0.5 * x * x, (-8.0, 8.0), 401).unwrap()
    }

    /// Composite Simpson rule for `∫ g(x) e^{-x²/2}/√(2π) dx` on [-12, 12].
    fn gaussian_oracle<G: Fn(f64) -> f64>(g: G) -> f64 {
        let n = 20_000;
        let (a, b) = (-12.0f64, 12.0f64);
        let h = (b - a) / n as f64;
        let dens = |x: f64| g(x) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = dens(a) + dens(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * dens(x);
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_weights() {
        let sp = build_grid_space(|_| 0.0, (0.0, 1.0), 4).unwrap();
        for w in sp.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert_eq!(sp.kind(), SpaceKind::Grid);
        assert!((sp.spacing().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_five_nodes_symmetric() {
        let sp = build_grid_space(|x| 0.5 * x * x, (-8.0, 8.0), 5).unwrap();
        let w = sp.weights();
        assert!((w[0] - w[4]).abs() < 1e-18 && (w[1] - w[3]).abs() < 1e-18);
        assert!(w[2] > w[1] && w[1] > w[0]);
    }

    #[test]
    fn gaussian_second_moment_matches_oracle() {
        let sp = gaussian_401();
        let oracle = gaussian_oracle(|x| x * x);
        assert!((oracle - 1.0).abs() < 1e-10);
        let second = sp.expectation(|x| x * x);
        assert!((second - oracle).abs() < 1e-3, "{second}");
        assert!((compensated_sum(sp.weights().iter().copied()) - 1.0).abs() < NORMALIZATION_TOL);
    }

    #[test]
    fn construction_errors() {
        let err =
            build_grid_space(|x| if x > 0.5 { f64::NAN } else { 0.0 }, (0.0, 1.0), 5).unwrap_err();
        assert!(
            matches!(err, Error::Construction(ref m) if m.contains("node 3")),
            "{err}"
        );
        assert!(build_grid_space(|_| 0.0, (0.0, 1.0), 2).is_err());
        assert!(ProbabilitySpace::new(vec![0.0, 1.0], vec![0.5, 0.6], SpaceKind::Grid).is_err());
        assert!(ProbabilitySpace::new(vec![1.0, 0.0], vec![0.5, 0.5], SpaceKind::Grid).is_err());
        assert!(ProbabilitySpace::new(vec![0.0, 1.0], vec![1.0, 0.0], SpaceKind::Grid).is_err());
    }

    #[test]
    fn centered_norm_basics() {
        let sp = uniform(7);
        let c = Observable::constant(&sp, 3.2);
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!(c.centered_norm(p).unwrap().abs() < 1e-15);
        }
        assert!(matches!(c.centered_norm(0.5), Err(Error::Domain(_))));
        let f = Observable::from_fn(&sp, |x| (5.0 * x).sin() + x * x);
        let n2 = f.centered_norm(2.0).unwrap();
        assert!((n2 * n2 - f.variance()).abs() <= 1e-15 * f.variance());
    }

    #[test]
    fn fourth_moment_of_identity_on_gaussian_grid() {
        let sp = gaussian_401();
        let f = Observable::from_fn(&sp, |x| x);
        let expected = gaussian_oracle(|x| x.powi(4)).powf(0.25);
        assert!((expected - 3f64.powf(0.25)).abs() < 1e-9);
        assert!((f.centered_norm(4.0).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn median_examples() {
        let sp = uniform(4);
        let f = Observable::new(sp.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.weighted_median(), 2.0);
        assert_eq!(Observable::constant(&sp, 7.5).weighted_median(), 7.5);

        let sp3 = space_with(&[0.7, 0.2, 0.1]);
        let g = Observable::new(sp3.clone(), vec![5.0, 9.0, 11.0]).unwrap();
        let m = g.weighted_median();
        // brute force: both median inequalities, and no smaller attained value qualifies
        let below: f64 = sp3
            .weights()
            .iter()
            .zip(g.values())
            .filter(|(_, &v)| v < m)
            .map(|(w, _)| w)
            .sum();
        let above: f64 = sp3
            .weights()
            .iter()
            .zip(g.values())
            .filter(|(_, &v)| v > m)
            .map(|(w, _)| w)
            .sum();
        assert!(below <= 0.5 && above <= 0.5);
        assert_eq!(m, 5.0);
    }

    #[test]
    fn median_centered_norm_examples() {
        let sp = uniform(2);
        let f = Observable::new(sp.clone(), vec![0.0, 1.0]).unwrap();
        assert_eq!(f.weighted_median(), 0.0);
        assert!((f.median_centered_norm(2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            Observable::constant(&sp, 2.0)
                .median_centered_norm(3.0)
                .unwrap(),
            0.0
        );
        assert!(f.median_centered_norm(0.9).is_err());
    }

    #[test]
    fn signed_power_examples() {
        let sp = uniform(3);
        let f = Observable::new(sp, vec![-4.0, 0.0, 9.0]).unwrap();
        assert_eq!(f.signed_power(1.0).unwrap(), f);
        let g = f.signed_power(0.5).unwrap();
        assert_eq!(g.values(), &[-2.0, 0.0, 3.0]);
        assert!(f.signed_power(0.0).is_err());
    }

    #[test]
    fn cutoff_examples() {
        let u = 0.7;
        let sp = uniform(5);
        let small = Observable::new(sp.clone(), vec![-0.7, -0.3, 0.0, 0.5, 0.7]).unwrap();
        assert!(small
            .cutoff_phi(u)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let f = Observable::new(sp, vec![3.0 * u, 1.5 * u, -1.5 * u, 2.0 * u, -5.0]).unwrap();
        let g = f.cutoff_phi(u).unwrap();
        assert_eq!(g.values()[0], 3.0 * u);
        assert!((g.values()[1] - u).abs() < 1e-15);
        assert!((g.values()[2] + u).abs() < 1e-15);
        assert_eq!(g.values()[3], 2.0 * u);
        assert_eq!(g.values()[4], -5.0);
        // 2-Lipschitz and continuous at the break points
        let samples: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.01).collect();
        for w in samples.windows(2) {
            let d = (cutoff(w[1], u) - cutoff(w[0], u)).abs();
            assert!(d <= 2.0 * (w[1] - w[0]) + 1e-12);
        }
        assert!(f.cutoff_phi(-1.0).is_err());
    }

    #[test]
    fn truncated_test_function_examples() {
        let sp = uniform(4);
        let f = Observable::new(sp.clone(), vec![-4.0, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(f.weighted_median(), 0.0);
        for s in [0.1, 1.0, 3.0] {
            let g = f.truncated_median_test_function(s, 2.0).unwrap();
            for (a, b) in g.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let g = f.truncated_median_test_function(1.0, 4.0).unwrap();
        let expected = [-2.0, 0.0, 0.5, 2f64.sqrt()];
        for (a, b) in g.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert_eq!(g.weighted_median(), 0.0);

        let big = Observable::new(uniform(5), vec![-9.0, -4.0, 0.0, 1.0, 16.0]).unwrap();
        let g = big.truncated_median_test_function(1e-3, 4.0).unwrap();
        let expected = [-3.0, -2.0, 0.0, 1.0, 4.0];
        for (a, b) in g.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }

        // (-4, 0.5, 2) on three uniform points has median 0.5, not 0
        let sp3 = uniform(3);
        let odd = Observable::new(sp3, vec![-4.0, 0.5, 2.0]).unwrap();
        assert!(matches!(
            odd.truncated_median_test_function(1.0, 4.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let sp = gaussian_401();
        let f = Observable::from_fn(&sp, |x| x.sin() / 3.0);
        let text = f.to_csv();
        let back = Observable::from_csv(&text, SpaceKind::Grid).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.space().points(), sp.points());
        assert_eq!(back.space().weights(), sp.weights());
    }
}
