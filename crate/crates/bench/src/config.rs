use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use comet_core::solvers::{Method, Variant};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Diagonal least squares from the synthetic generator.
    Synthetic { m: usize, xi: u32 },
    /// Least squares on a LIBSVM file.
    Quadratic {
        path: PathBuf,
        n_features: Option<usize>,
        subset: Option<[usize; 2]>,
    },
    /// Logistic regression on a LIBSVM file.
    Logistic {
        path: PathBuf,
        n_features: Option<usize>,
        subset: Option<[usize; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(deserialize_with = "de_method")]
    pub method: Method,
    /// Output label; derived from the method and variant when absent.
    pub name: Option<String>,
    /// Absolute initial Lipschitz estimate.
    #[serde(rename = "L0")]
    pub l0: Option<f64>,
    /// Initial estimate as a multiple of the problem's smoothness constant.
    #[serde(rename = "L0_mult")]
    pub l0_mult: Option<f64>,
    pub gamma0_variant: Option<u8>,
    /// Strong-convexity value handed to the solver; the problem's own when absent.
    pub mu: Option<f64>,
}

impl SolverSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            name: None,
            l0: None,
            l0_mult: None,
            gamma0_variant: None,
            mu: None,
        }
    }

    /// Parses `comet`, `comet:2`, `fista` or `amgs`.
    pub fn parse(s: &str) -> Result<Self> {
        let (method, variant) = match s.split_once(':') {
            Some((m, v)) => (m, Some(v)),
            None => (s, None),
        };
        let mut spec = Self::new(method.parse()?);
        if let Some(v) = variant {
            if spec.method != Method::Comet {
                bail!("only comet takes a variant, got {s:?}");
            }
            spec.gamma0_variant = Some(v.parse().with_context(|| format!("variant in {s:?}"))?);
        }
        Ok(spec)
    }

    pub fn variant(&self) -> Result<Option<Variant>> {
        match (self.method, self.gamma0_variant) {
            (Method::Comet, v) => Ok(Some(Variant::from_number(v.unwrap_or(1))?)),
            (_, None) => Ok(None),
            (m, Some(_)) => bail!("gamma0_variant only applies to comet, not {}", m.name()),
        }
    }

    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let mut s = self.method.name().to_string();
        if self.method == Method::Comet {
            s.push_str(&format!("-v{}", self.gamma0_variant.unwrap_or(1)));
        }
        if let Some(m) = self.l0_mult {
            s.push_str(&format!("-L0x{m}"));
        } else if let Some(l) = self.l0 {
            s.push_str(&format!("-L0={l}"));
        }
        s
    }
}

fn de_method<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Method, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn default_eta_u() -> f64 {
    2.0
}
fn default_eta_d() -> f64 {
    0.9
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iters() -> usize {
    10_000
}
fn default_target() -> f64 {
    1e-6
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_reg() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_reg")]
    pub lambda: f64,
    #[serde(default = "default_reg")]
    pub tau: f64,
    #[serde(default, rename = "solver")]
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_eta_u")]
    pub eta_u: f64,
    #[serde(default = "default_eta_d")]
    pub eta_d: f64,
    /// Solver stopping tolerance, also used for the reference solution.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Distance to the reference that counts as converged in the summary.
    #[serde(default = "default_target")]
    pub target_dist: f64,
    /// Fill the `elapsed_s` trace column (makes traces differ between runs).
    #[serde(default)]
    pub timing: bool,
    /// Write a bound-verification report next to each COMET trace.
    #[serde(default)]
    pub verify_bounds: bool,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec) -> Self {
        Self {
            problem,
            lambda: default_reg(),
            tau: default_reg(),
            solvers: Vec::new(),
            eta_u: default_eta_u(),
            eta_d: default_eta_d(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            seed: 0,
            out: default_out(),
            target_dist: default_target(),
            timing: false,
            verify_bounds: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            bail!("no solvers configured");
        }
        if !(self.lambda >= 0.0 && self.tau >= 0.0) {
            bail!("lambda and tau must be nonnegative");
        }
        if !(self.target_dist > 0.0) {
            bail!("target_dist must be positive");
        }
        match &self.problem {
            ProblemSpec::Synthetic { m, xi } if *m == 0 || *xi == 0 => {
                bail!("synthetic problems need m >= 1 and xi >= 1")
            }
            _ => {}
        }
        for s in &self.solvers {
            s.variant()?;
            if s.l0.is_some() && s.l0_mult.is_some() {
                bail!("{}: give L0 or L0_mult, not both", s.label());
            }
        }
        let mut labels: Vec<String> = self.solvers.iter().map(SolverSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            bail!(
                "two solvers share the label {:?}; set `name` to tell them apart",
                w[0]
            );
        }
        Ok(())
    }
}
