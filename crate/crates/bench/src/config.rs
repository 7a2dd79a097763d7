//! Run specifications, read from TOML or JSON.

use std::fmt;
use std::path::Path;

use gham::assembly::{BoundaryFunctional, Endpoint, LinearOperator};
use gham::problem::{porous_wall, AuxTag, NonlinearBvp, NonlinearTerm};
use gham::spectral::ChebCoeffs;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

pub const REGISTRY: [&str; 1] = ["porous-wall"];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Gham,
    Sham,
    Newton,
}

impl SolverKind {
    pub fn tag(self) -> &'static str {
        match self {
            SolverKind::Gham => "GHAM",
            SolverKind::Sham => "SHAM",
            SolverKind::Newton => "NEWTON",
        }
    }
}

/// `ħ`, fixed or chosen by sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hbar {
    Auto,
    Fixed(f64),
}

impl<'de> Deserialize<'de> for Hbar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;

        impl de::Visitor<'_> for V {
            type Value = Hbar;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonzero number or \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Hbar, E> {
                if v.is_finite() && v != 0.0 {
                    Ok(Hbar::Fixed(v))
                } else {
                    Err(E::custom(format!("hbar must be finite and nonzero, got {v}")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Hbar, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Hbar, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Hbar, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(V)
    }
}

impl std::str::FromStr for Hbar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Hbar::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v != 0.0 => Ok(Hbar::Fixed(v)),
            _ => Err(format!("hbar must be `auto` or a finite nonzero number, got `{s}`")),
        }
    }
}

fn aux_tag<'de, D: Deserializer<'de>>(d: D) -> Result<AuxTag, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(de::Error::custom)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_re")]
    pub re: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            re: default_re(),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}

fn default_re() -> f64 {
    10.0
}

/// A boundary condition `u^(derivative)(at) = value`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub at: f64,
    #[serde(default)]
    pub derivative: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Monomial coefficients of the term's coefficient function.
    pub coeff: Vec<f64>,
    pub factors: Vec<usize>,
}

/// A user-defined problem; every coefficient function is a list of monomial
/// coefficients, lowest degree first.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    /// `a_0 … a_N` of the linear part.
    pub linear: Vec<Vec<f64>>,
    #[serde(default)]
    pub psi: Vec<f64>,
    pub boundary: Vec<BoundarySpec>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    /// Terms used for `L4`, operator slot last; defaults to `terms`.
    #[serde(default)]
    pub frozen: Option<Vec<TermSpec>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Iteration counts at which residuals are reported; defaults to
    /// `max_iterations`.
    #[serde(default)]
    pub iterations: Vec<usize>,
    /// Iterations per probe when `ħ` is chosen automatically.
    #[serde(default = "default_probe")]
    pub probe_iterations: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            range: default_range(),
            samples: default_samples(),
            iterations: Vec::new(),
            probe_iterations: default_probe(),
        }
    }
}

fn default_range() -> [f64; 2] {
    [-2.0, 2.0]
}

fn default_samples() -> usize {
    41
}

fn default_probe() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    #[serde(default = "default_scaling_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_fit_window")]
    pub fit_window: [usize; 2],
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            n: default_scaling_n(),
            fit_window: default_fit_window(),
        }
    }
}

fn default_scaling_n() -> Vec<usize> {
    (6..=14).map(|k| 1 << k).collect()
}

fn default_fit_window() -> [usize; 2] {
    [40, 80]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            solvers: default_solvers(),
        }
    }
}

fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Gham, SolverKind::Sham, SolverKind::Newton]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub problem: Option<CustomProblem>,
    #[serde(default = "default_aux", deserialize_with = "aux_tag")]
    pub aux: AuxTag,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_hbar")]
    pub hbar: Hbar,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default)]
    pub seed: u64,
    /// Timed runs are preceded by `warmup` discarded runs; the median of
    /// `repeats` is reported.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub scaling: ScalingSpec,
    #[serde(default)]
    pub compare: CompareSpec,
}

fn default_name() -> String {
    REGISTRY[0].into()
}

fn default_aux() -> AuxTag {
    AuxTag::L4
}

fn default_n() -> usize {
    512
}

fn default_hbar() -> Hbar {
    Hbar::Auto
}

fn default_iterations() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_solver() -> SolverKind {
    SolverKind::Gham
}

fn default_warmup() -> usize {
    3
}

fn default_repeats() -> usize {
    5
}

impl Default for ProblemSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ProblemSpec {
    /// Reads a spec; `.json` files are JSON, anything else TOML. Errors carry
    /// the offending line.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let spec = if json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        spec.map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let spec: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => ConfigError(format!("line {l}: {}", e.message())),
                None => ConfigError(e.message().to_string()),
            }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| {
                let text = e.to_string();
                let msg = text.rsplit_once(" at line ").map_or(text.as_str(), |(m, _)| m);
                ConfigError(format!("line {}, column {}: {msg}", e.line(), e.column()))
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.is_none() && !REGISTRY.contains(&self.name.as_str()) {
            return Err(ConfigError(format!(
                "unknown problem `{}`; registry has {REGISTRY:?}, or give a [problem] table",
                self.name
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(ConfigError(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(ConfigError("max_iterations must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(ConfigError("repeats must be at least 1".into()));
        }
        if self.sweep.samples < 5 {
            return Err(ConfigError(format!("sweep needs at least 5 samples, got {}", self.sweep.samples)));
        }
        if self.sweep.range[0] >= self.sweep.range[1] {
            return Err(ConfigError("sweep range must be increasing".into()));
        }
        if self.scaling.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError("scaling n list must be strictly ascending".into()));
        }
        let [lo, hi] = self.scaling.fit_window;
        if lo == 0 || lo >= hi {
            return Err(ConfigError(format!("fit window [{lo}, {hi}] is empty")));
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<NonlinearBvp, ConfigError> {
        match &self.problem {
            None => Ok(porous_wall(self.params.alpha, self.params.re)),
            Some(c) => c.build().map_err(|e| ConfigError(format!("problem: {e}"))),
        }
    }
}

impl CustomProblem {
    fn build(&self) -> Result<NonlinearBvp, Box<dyn std::error::Error>> {
        let poly = |c: &[f64]| -> Result<ChebCoeffs, gham::Error> {
            if c.is_empty() {
                Ok(ChebCoeffs::constant(0.0))
            } else {
                ChebCoeffs::from_monomials(c)
            }
        };
        let linear = LinearOperator::new(self.linear.iter().map(|c| poly(c)).collect::<Result<_, _>>()?)?;
        let mut boundary = Vec::new();
        let mut values = Vec::new();
        for b in &self.boundary {
            let point = Endpoint::from_x(b.at).ok_or_else(|| format!("boundary point {} is not ±1", b.at))?;
            boundary.push(BoundaryFunctional::new(point, b.derivative));
            values.push(b.value);
        }
        let terms = |ts: &[TermSpec]| -> Result<Vec<NonlinearTerm>, gham::Error> {
            ts.iter()
                .map(|t| NonlinearTerm::new(poly(&t.coeff)?, t.factors.clone()))
                .collect()
        };
        let mut p = NonlinearBvp::new(linear, poly(&self.psi)?, boundary, values, terms(&self.terms)?)?;
        if let Some(f) = &self.frozen {
            p = p.with_frozen_terms(terms(f)?)?;
        }
        Ok(p)
    }
}
