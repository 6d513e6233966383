//! Run configuration: one JSON document selecting a scenario and every solver
//! setting. Omitted sections take their defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use pmc_core::ambient::{FSpec, PsiSpec};
use pmc_core::iteration::IterationConfig;
use pmc_core::penalized::NewtonConfig;
use pmc_core::scenarios::{self, Scenario};
use pmc_core::surface::SurfaceSpec;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Bundled {
        name: String,
    },
    EuclideanRadial {
        n: usize,
        beta: f64,
    },
    PoincareBall {
        n: usize,
        rho0: f64,
    },
    Manufactured {
        n: usize,
        exact: SurfaceSpec,
        #[serde(default = "euclidean")]
        psi: PsiSpec,
    },
    /// Arbitrary named families; needs an explicit penalty.
    Custom {
        n: usize,
        psi: PsiSpec,
        f: FSpec,
        lower: SurfaceSpec,
        upper: SurfaceSpec,
        #[serde(default)]
        exact: Option<SurfaceSpec>,
    },
}

fn euclidean() -> PsiSpec {
    PsiSpec::Euclidean
}

/// A penalty parameter: a positive number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct SettingVisitor;
        impl Visitor<'_> for SettingVisitor {
            type Value = Setting;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Setting, E> {
                Ok(Setting::Value(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Setting, E> {
                Ok(Setting::Value(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Setting, E> {
                Ok(Setting::Value(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Setting, E> {
                if v == "auto" {
                    Ok(Setting::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(SettingVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub resolution: Vec<usize>,
}

/// Unset entries fall back to the scenario's tuned values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Setting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Setting>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSection {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let n = NewtonConfig::default();
        Self {
            tol: n.tol,
            max_iter: n.max_iter,
            damping: n.damping,
            max_halvings: n.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterSection {
    pub outer_tol: f64,
    /// Defaults to 1e-8 on constant-data scenarios and 1e-4 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature_tol: Option<f64>,
    pub max_outer: usize,
}

impl Default for OuterSection {
    fn default() -> Self {
        let c = IterationConfig::default();
        Self {
            outer_tol: c.outer_tol,
            curvature_tol: None,
            max_outer: c.max_outer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub enabled: bool,
    pub steps: usize,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        Self {
            enabled: false,
            steps: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Summary,
    Trace,
    Fields,
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("pmc-out"),
            formats: vec![
                OutputFormat::Summary,
                OutputFormat::Trace,
                OutputFormat::Fields,
                OutputFormat::Mesh,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub trials: usize,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            trials: 100,
            amplitude: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub levels: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub outer: OuterSection,
    #[serde(default)]
    pub continuation: ContinuationSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid config: {}", list(.0))]
    Invalid(Vec<FieldError>),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    pub fn fields(&self) -> Vec<String> {
        match self {
            ConfigError::Read { .. } => Vec::new(),
            ConfigError::Parse { field, .. } => vec![field.clone()],
            ConfigError::Invalid(errors) => errors.iter().map(|e| e.field.clone()).collect(),
        }
    }

    fn single(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid(vec![FieldError {
            field: field.to_string(),
            message: message.into(),
        }])
    }
}

impl RunConfig {
    pub fn for_bundled(name: &str) -> Self {
        Self {
            scenario: ScenarioConfig::Bundled {
                name: name.to_string(),
            },
            grid: None,
            penalty: PenaltyConfig::default(),
            newton: NewtonSection::default(),
            outer: OuterSection::default(),
            continuation: ContinuationSection::default(),
            output: OutputSection::default(),
            probe: ProbeSection::default(),
            study: StudySection::default(),
        }
    }

    /// Parse and validate; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                field: match e.path().to_string() {
                    p if p == "." => "<root>".to_string(),
                    p => p,
                },
                message: e.inner().to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks that need no solve.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut bad = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        let positive = |x: f64| x > 0.0 && x.is_finite();

        let dim = match &self.scenario {
            ScenarioConfig::Bundled { name } => match scenarios::by_name(name) {
                Ok(s) => Some(s.dim),
                Err(e) => {
                    bad("scenario.name", e.to_string());
                    None
                }
            },
            ScenarioConfig::EuclideanRadial { n, beta } => {
                if !positive(*beta) {
                    bad("scenario.beta", format!("must be positive, got {beta}"));
                }
                Some(*n)
            }
            ScenarioConfig::PoincareBall { n, rho0 } => {
                let r0 = (0.5 * rho0).tanh();
                if !(positive(*rho0) && r0 <= 0.9) {
                    bad(
                        "scenario.rho0",
                        format!("needs rho0 > 0 with tanh(rho0/2) <= 0.9, got {rho0}"),
                    );
                }
                Some(*n)
            }
            ScenarioConfig::Manufactured { n, exact, .. } => {
                if let Err(e) = exact.check(*n) {
                    bad("scenario.exact", e.to_string());
                }
                Some(*n)
            }
            ScenarioConfig::Custom {
                n,
                lower,
                upper,
                exact,
                ..
            } => {
                for (field, s) in [("scenario.lower", Some(lower)), ("scenario.upper", Some(upper)), ("scenario.exact", exact.as_ref())] {
                    if let Some(Err(e)) = s.map(|s| s.check(*n)) {
                        bad(field, e.to_string());
                    }
                }
                if self.penalty.gamma.is_none() {
                    bad("penalty.gamma", "required for custom scenarios".into());
                }
                if self.penalty.mu.is_none() {
                    bad("penalty.mu", "required for custom scenarios".into());
                }
                Some(*n)
            }
        };
        let n_field = match self.scenario {
            ScenarioConfig::Bundled { .. } => None,
            _ => Some("scenario.n"),
        };
        if let (Some(n), Some(field)) = (dim, n_field) {
            if n != 1 && n != 2 {
                bad(field, format!("only 1 and 2 are supported, got {n}"));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.dim != 1 && grid.dim != 2 {
                bad("grid.dim", format!("only 1 and 2 are supported, got {}", grid.dim));
            } else if grid.resolution.len() != grid.dim {
                bad(
                    "grid.resolution",
                    format!("expected {} entries, got {}", grid.dim, grid.resolution.len()),
                );
            } else if let Err(e) = pmc_core::build_grid(grid.dim, &grid.resolution) {
                bad("grid.resolution", e.to_string());
            }
            if let Some(n) = dim {
                if n != grid.dim {
                    bad("grid.dim", format!("scenario lives on S^{n}, grid has dim {}", grid.dim));
                }
            }
        }
        for (field, s) in [("penalty.gamma", self.penalty.gamma), ("penalty.mu", self.penalty.mu)] {
            if let Some(Setting::Value(v)) = s {
                if !positive(v) {
                    bad(field, format!("must be positive or \"auto\", got {v}"));
                }
            }
        }
        if !positive(self.newton.tol) {
            bad("newton.tol", format!("must be positive, got {}", self.newton.tol));
        }
        if self.newton.max_iter == 0 {
            bad("newton.max_iter", "must be at least 1".into());
        }
        if !(self.newton.damping > 0.0 && self.newton.damping < 1.0) {
            bad("newton.damping", format!("must lie in (0, 1), got {}", self.newton.damping));
        }
        if !positive(self.outer.outer_tol) {
            bad("outer.outer_tol", format!("must be positive, got {}", self.outer.outer_tol));
        }
        if let Some(t) = self.outer.curvature_tol {
            if !positive(t) {
                bad("outer.curvature_tol", format!("must be positive, got {t}"));
            }
        }
        if self.outer.max_outer == 0 {
            bad("outer.max_outer", "must be at least 1".into());
        }
        if self.continuation.enabled && self.continuation.steps == 0 {
            bad("continuation.steps", "must be at least 1 when enabled".into());
        }
        if self.probe.trials == 0 {
            bad("probe.trials", "must be at least 1".into());
        }
        if !(self.probe.amplitude >= 0.0 && self.probe.amplitude.is_finite()) {
            bad("probe.amplitude", format!("must be nonnegative, got {}", self.probe.amplitude));
        }
        if self.study.levels < 2 {
            bad("study.levels", format!("needs at least 2 levels, got {}", self.study.levels));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    /// The scenario selected by the config. Custom families take (γ, μ) from the
    /// penalty section, with placeholders when either is "auto".
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let core = |field: &str, r: pmc_core::Result<Scenario>| {
            r.map_err(|e| ConfigError::single(field, e.to_string()))
        };
        match &self.scenario {
            ScenarioConfig::Bundled { name } => core("scenario.name", scenarios::by_name(name)),
            ScenarioConfig::EuclideanRadial { n, beta } => {
                core("scenario", scenarios::euclidean_radial(*n, *beta))
            }
            ScenarioConfig::PoincareBall { n, rho0 } => {
                core("scenario", scenarios::poincare_ball(*n, *rho0))
            }
            ScenarioConfig::Manufactured { n, exact, psi } => {
                core("scenario", scenarios::manufactured(*n, exact.clone(), *psi))
            }
            ScenarioConfig::Custom {
                n,
                psi,
                f,
                lower,
                upper,
                exact,
            } => {
                let value = |s: Option<Setting>| match s {
                    Some(Setting::Value(v)) => v,
                    _ => 1.0,
                };
                Ok(Scenario {
                    name: format!("custom-s{n}"),
                    dim: *n,
                    psi: *psi,
                    f: f.clone(),
                    lower: lower.clone(),
                    upper: upper.clone(),
                    exact: exact.clone(),
                    constant_data: false,
                    gamma: value(self.penalty.gamma),
                    mu: value(self.penalty.mu),
                    default_resolution: if *n == 1 { vec![64] } else { vec![16, 32] },
                })
            }
        }
    }

    /// Grid resolution, refined `level` times by a factor two.
    pub fn resolution(&self, scenario: &Scenario, level: u32) -> Vec<usize> {
        let base = match &self.grid {
            Some(g) => g.resolution.clone(),
            None => scenario.default_resolution.clone(),
        };
        base.iter().map(|n| n << level).collect()
    }

    pub fn iteration(&self, scenario: &Scenario) -> IterationConfig {
        IterationConfig {
            outer_tol: self.outer.outer_tol,
            curvature_tol: self
                .outer
                .curvature_tol
                .unwrap_or(scenario.default_config().curvature_tol),
            max_outer: self.outer.max_outer,
            newton: NewtonConfig {
                tol: self.newton.tol,
                max_iter: self.newton.max_iter,
                damping: self.newton.damping,
                max_halvings: self.newton.max_halvings,
            },
            continuation_steps: self.continuation.enabled.then_some(self.continuation.steps),
        }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }
}
