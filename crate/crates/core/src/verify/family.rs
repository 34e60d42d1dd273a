//! Seeded families of test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralDecomposition;
use crate::state_space::Observable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `Σ_k c_k e_k` with `c_k ~ N(0,1)/k` for `1 ≤ k ≤ max_mode`, plus a
    /// random mean.
    RandomSmooth,
    /// The single modes `e_1, …, e_{max_mode}` first, then random mixtures
    /// of two or three modes; all mean-zero.
    EigenMixtures,
    /// Polynomials `Σ_j a_j x^j / j!`, `a_j ~ N(0,1)`, of degree `max_mode`.
    Polynomial,
    /// Random-smooth members shifted to have median 0.
    SignBalanced,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::RandomSmooth => "random-smooth",
            FamilyKind::EigenMixtures => "eigen-mixtures",
            FamilyKind::Polynomial => "polynomial",
            FamilyKind::SignBalanced => "sign-balanced",
        }
    }
}

/// Default highest mode used by the families. Keeping members at Hermite
/// degree ≤ 6 keeps their squares inside a 24-mode spectral basis.
pub const DEFAULT_MAX_MODE: usize = 6;

/// A family is fully determined by its fields; regenerating it against the
/// same decomposition gives identical members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub seed: u64,
    pub count: usize,
    pub kind: FamilyKind,
    #[serde(default = "default_max_mode")]
    pub max_mode: usize,
}

fn default_max_mode() -> usize {
    DEFAULT_MAX_MODE
}

/// One family member with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: String,
    pub f: Observable,
}

impl TestFunctionFamily {
    pub fn new(kind: FamilyKind, seed: u64, count: usize) -> Self {
        Self {
            seed,
            count,
            kind,
            max_mode: DEFAULT_MAX_MODE,
        }
    }

    pub fn with_max_mode(mut self, max_mode: usize) -> Self {
        self.max_mode = max_mode;
        self
    }

    /// Members sampled on the decomposition's space.
    pub fn generate(&self, s: &SpectralDecomposition) -> Result<Vec<Member>> {
        let modes = usable_modes(s, self.max_mode);
        if modes == 0 {
            return Err(Error::Precondition(
                "family needs at least one non-constant mode".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        for j in 0..self.count {
            let member = match self.kind {
                FamilyKind::RandomSmooth => Member {
                    id: format!("smooth-{j}"),
                    f: random_smooth(s, modes, &mut rng),
                },
                FamilyKind::SignBalanced => {
                    let f = random_smooth(s, modes, &mut rng);
                    let m = f.weighted_median();
                    Member {
                        id: format!("balanced-{j}"),
                        f: f.shift(-m),
                    }
                }
                FamilyKind::EigenMixtures if j < modes => Member {
                    id: format!("mode-{}", j + 1),
                    f: s.eigenfunction(j + 1),
                },
                FamilyKind::EigenMixtures => Member {
                    id: format!("mix-{j}"),
                    f: mixture(s, modes, &mut rng),
                },
                FamilyKind::Polynomial => Member {
                    id: format!("poly-{j}"),
                    f: polynomial(s, modes, &mut rng),
                },
            };
            out.push(member);
        }
        Ok(out)
    }
}

/// Positive members `a + g²`, `a ~ U[0.1, 1]`, `g` a random mixture of
/// modes `≤ max_mode`, with ids `pos-j`.
pub fn nonnegative_family(
    s: &SpectralDecomposition,
    seed: u64,
    count: usize,
    max_mode: usize,
) -> Result<Vec<Member>> {
    let modes = usable_modes(s, max_mode);
    if modes == 0 {
        return Err(Error::Precondition(
            "family needs at least one non-constant mode".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let a = rng.random_range(0.1..=1.0);
            let g = mixture(s, modes, &mut rng);
            Ok(Member {
                id: format!("pos-{j}"),
                f: g.mul(&g)?.shift(a),
            })
        })
        .collect()
}

/// Highest mode a member may use. On a truncated basis products of two
/// members must stay representable, so modes stop at `(num_modes − 1)/2`.
pub(crate) fn usable_modes(s: &SpectralDecomposition, max_mode: usize) -> usize {
    let available = s.num_modes() - 1;
    let cap = if s.is_truncated() {
        available / 2
    } else {
        available
    };
    max_mode.min(cap)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_smooth(s: &SpectralDecomposition, modes: usize, rng: &mut ChaCha8Rng) -> Observable {
    let mut c = vec![0.0; s.num_modes()];
    c[0] = normal(rng);
    for (k, ck) in c.iter_mut().enumerate().take(modes + 1).skip(1) {
        *ck = normal(rng) / k as f64;
    }
    s.synthesize(&c)
}

fn mixture(s: &SpectralDecomposition, modes: usize, rng: &mut ChaCha8Rng) -> Observable {
    let mut c = vec![0.0; s.num_modes()];
    let size = if modes == 1 {
        1
    } else {
        rng.random_range(2..=3.min(modes))
    };
    let mut chosen = Vec::with_capacity(size);
    while chosen.len() < size {
        let k = rng.random_range(1..=modes);
        if !chosen.contains(&k) {
            chosen.push(k);
        }
    }
    for k in chosen {
        c[k] = normal(rng);
    }
    s.synthesize(&c)
}

fn polynomial(s: &SpectralDecomposition, degree: usize, rng: &mut ChaCha8Rng) -> Observable {
    let mut coeffs = Vec::with_capacity(degree + 1);
    let mut factorial = 1.0;
    for j in 0..=degree {
        if j > 0 {
            factorial *= j as f64;
        }
        coeffs.push(normal(rng) / factorial);
    }
    Observable::from_fn(s.space(), |x| {
        coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
    })
}
