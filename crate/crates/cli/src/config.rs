//! Run configuration: one JSON document, with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use semigap_core::semigroup::{geometric_time_grid, uniform_time_grid};
use semigap_core::verify::{FamilyKind, SuiteConfig, TestFunctionFamily};
use semigap_core::{
    build_grid_generator, build_grid_space, build_ou_hermite, DecayBound, GeneratorRep,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Diagonal Hermite model of the Ornstein–Uhlenbeck semigroup.
    Ou {
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_quad_nodes")]
        quad_nodes: usize,
    },
    /// Finite-difference diffusion for `μ ∝ e^{−V}` on an interval.
    Grid {
        #[serde(default)]
        potential: Potential,
        #[serde(default = "default_interval")]
        interval: (f64, f64),
        #[serde(default = "default_n")]
        n: usize,
    },
    /// A generator document written by an earlier run.
    File { path: PathBuf },
}

fn default_m() -> usize {
    24
}
fn default_quad_nodes() -> usize {
    97
}
fn default_interval() -> (f64, f64) {
    (-8.0, 8.0)
}
fn default_n() -> usize {
    401
}

impl BackendConfig {
    pub fn default_ou() -> Self {
        BackendConfig::Ou {
            m: default_m(),
            quad_nodes: default_quad_nodes(),
        }
    }

    pub fn default_grid() -> Self {
        BackendConfig::Grid {
            potential: Potential::default(),
            interval: default_interval(),
            n: default_n(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendConfig::Ou { .. } => "ou",
            BackendConfig::Grid { .. } => "grid",
            BackendConfig::File { .. } => "file",
        }
    }

    /// The same backend at another grid size.
    pub fn with_n(&self, n: usize) -> Result<Self, CliError> {
        match self {
            BackendConfig::Grid {
                potential,
                interval,
                ..
            } => Ok(BackendConfig::Grid {
                potential: potential.clone(),
                interval: *interval,
                n,
            }),
            _ => Err(CliError::Usage("an n-sweep needs a grid backend".into())),
        }
    }

    pub fn descriptor(&self) -> Value {
        serde_json::to_value(self).expect("backend config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        match self {
            BackendConfig::Ou { m, quad_nodes } => {
                if *m < 2 {
                    return Err(CliError::Usage(format!("ou backend needs m >= 2, got {m}")));
                }
                if *quad_nodes < *m {
                    return Err(CliError::Usage(format!(
                        "ou backend needs quad_nodes >= m, got {quad_nodes} < {m}"
                    )));
                }
            }
            BackendConfig::Grid {
                interval,
                n,
                potential,
            } => {
                if *n < 3 {
                    return Err(CliError::Usage(format!(
                        "grid backend needs n >= 3, got {n}"
                    )));
                }
                if !(interval.0 < interval.1 && interval.0.is_finite() && interval.1.is_finite()) {
                    return Err(CliError::Usage(format!(
                        "invalid interval [{}, {}]",
                        interval.0, interval.1
                    )));
                }
                if let Potential::Polynomial { coefficients } = potential {
                    if coefficients.iter().any(|c| !c.is_finite()) {
                        return Err(CliError::Usage(
                            "polynomial coefficients must be finite".into(),
                        ));
                    }
                }
            }
            BackendConfig::File { .. } => {}
        }
        Ok(())
    }

    /// Builds the generator. Failures here are construction failures.
    pub fn build(&self, base: &Path) -> Result<GeneratorRep, CliError> {
        let built = match self {
            BackendConfig::Ou { m, quad_nodes } => build_ou_hermite(*m, *quad_nodes),
            BackendConfig::Grid {
                potential,
                interval,
                n,
            } => {
                let potential = potential.clone();
                build_grid_space(move |x| potential.eval(x), *interval, *n)
                    .and_then(|sp| build_grid_generator(&sp))
            }
            BackendConfig::File { path } => {
                let path = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                std::fs::read_to_string(&path)
                    .map_err(semigap_core::Error::from)
                    .and_then(|text| GeneratorRep::from_json(&text))
            }
        };
        built.map_err(CliError::Construction)
    }
}

/// `V(x)` in `μ ∝ e^{−V}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    /// `x²/2`.
    #[default]
    Gaussian,
    /// `0`.
    Uniform,
    /// `Σ_k a_k x^k`.
    Polynomial { coefficients: Vec<f64> },
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Gaussian => 0.5 * x * x,
            Potential::Uniform => 0.0,
            Potential::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, a| acc * x + a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    pub count: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            kind: FamilyKind::EigenMixtures,
            count: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    /// `t = 0` then geometric points from `1e−4·t_max` to `t_max`.
    #[default]
    Geometric,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Defaults to `10/λ_1`.
    pub t_max: Option<f64>,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_max: None,
            count: 40,
            spacing: Spacing::Geometric,
        }
    }
}

impl TimeConfig {
    pub fn grid(&self, gap: f64) -> Result<Vec<f64>, CliError> {
        let t_max = self.t_max.unwrap_or(10.0 / gap);
        let grid = match self.spacing {
            Spacing::Geometric => geometric_time_grid(1e-4 * t_max, t_max, self.count),
            Spacing::Uniform => uniform_time_grid(t_max, self.count),
        };
        grid.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Grid sizes of the configured grid backend.
    N,
    /// Exponents on the configured backend.
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::P,
            values: vec![2.0, 4.0, 8.0, 16.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub seed: u64,
    pub family: FamilyConfig,
    pub p: Vec<f64>,
    pub times: TimeConfig,
    /// Check tolerance; by default 1e−8 on `ou` and 0.02 on matrix backends.
    pub slack: Option<f64>,
    pub out: PathBuf,
    pub custom_bounds: Vec<DecayBound>,
    pub sweep: SweepConfig,
    pub best_constant_budget: usize,
    pub gronwall_k_max: u32,
    pub gronwall_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let suite = SuiteConfig::default();
        Self {
            backend: BackendConfig::default_ou(),
            seed: suite.seed,
            family: FamilyConfig::default(),
            p: suite.p_list,
            times: TimeConfig::default(),
            slack: None,
            out: PathBuf::from("out"),
            custom_bounds: Vec::new(),
            sweep: SweepConfig::default(),
            best_constant_budget: suite.best_constant_budget,
            gronwall_k_max: suite.gronwall_k_max,
            gronwall_steps: suite.gronwall_steps,
        }
    }
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<String>,
    pub p: Option<Vec<f64>>,
    pub slack: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Reads `path` (or starts from defaults), applies the overrides and
    /// validates. Relative paths inside the config resolve against the
    /// config file's directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<(Self, PathBuf), CliError> {
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (Self::from_json(&text)?, base)
            }
            None => (Self::default(), PathBuf::new()),
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok((cfg, base))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(kind) = &o.backend {
            if kind != self.backend.kind() {
                self.backend = match kind.as_str() {
                    "ou" => BackendConfig::default_ou(),
                    "grid" => BackendConfig::default_grid(),
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown backend '{other}', expected ou or grid"
                        )))
                    }
                };
            }
        }
        if let Some(p) = &o.p {
            self.p = p.clone();
        }
        if let Some(s) = o.slack {
            self.slack = Some(s);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.backend.validate()?;
        if let Some(p) = self.p.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            return Err(CliError::Usage(format!("every p must be > 1, got {p}")));
        }
        if self.family.count == 0 {
            return Err(CliError::Usage("family count must be >= 1".into()));
        }
        if self.times.count == 0 {
            return Err(CliError::Usage("time grid is empty".into()));
        }
        if self.times.spacing == Spacing::Geometric && self.times.count < 2 {
            return Err(CliError::Usage(
                "a geometric time grid needs at least 2 points".into(),
            ));
        }
        if let Some(t) = self.times.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("t_max must be > 0, got {t}")));
            }
        }
        if let Some(s) = self.slack {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CliError::Usage(format!("slack must be >= 0, got {s}")));
            }
        }
        if let Some(b) = self
            .custom_bounds
            .iter()
            .find(|b| !(b.p > 1.0) || !(b.k > 0.0) || !(b.lambda >= 0.0))
        {
            return Err(CliError::Usage(format!("invalid custom bound {b:?}")));
        }
        Ok(())
    }

    pub fn family(&self) -> TestFunctionFamily {
        TestFunctionFamily::new(self.family.kind, self.seed, self.family.count)
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            seed: self.seed,
            family_count: self.family.count,
            p_list: self.p.clone(),
            slack: self.slack,
            custom_bounds: self.custom_bounds.clone(),
            best_constant_budget: self.best_constant_budget,
            gronwall_k_max: self.gronwall_k_max,
            gronwall_steps: self.gronwall_steps,
            t_max: self.times.t_max,
            time_points: self.times.count.max(2),
        }
    }
}
