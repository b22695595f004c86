//! Experiment configuration: TOML with fixed sections, parsed strictly.
//!
//! ```toml
//! s = 0.8
//! n = 0.2
//!
//! [grid]
//! L = 20.0
//! n_points = 401
//!
//! [data]
//! kind = "bump"          # bump | cauchy_tail | vss_like | custom_csv
//! mass = 1.0
//! center = 0.0
//! width = 1.0
//!
//! [ladder]
//! eps = [1e-2, 1e-3, 1e-4]
//! t_end = 1.0
//! n_outputs = 10
//!
//! [checks]
//! names = ["mass", "eps_monotone", "benilan_crandall"]
//! ```
//!
//! Unknown keys and sections are errors. `[stepper]`, `[output]`,
//! `[checks]`, `[barenblatt]` and `[loghalf]` are optional.

use fracdiff_core::evolve::StepperConfig;
use fracdiff_core::experiments::DataSpec;
use fracdiff_core::io::read_custom_csv;
use fracdiff_core::{Field, Grid1D};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub s: f64,
    pub n: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub stepper: StepperOverrides,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub barenblatt: Option<BarenblattConfig>,
    #[serde(default)]
    pub loghalf: Option<LogHalfSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n_points: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid1D, String> {
        Grid1D::new(self.half_width, self.n_points).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Bump { mass: f64, center: f64, width: f64 },
    CauchyTail { mass: f64, gamma: f64 },
    VssLike { amplitude: f64 },
    /// `x,value` rows on the configured grid; relative to the config file.
    CustomCsv { path: PathBuf },
}

impl DataConfig {
    pub fn build(&self, grid: Grid1D, s: f64, n: f64, base: &Path) -> fracdiff_core::Result<Field> {
        let spec = match self {
            DataConfig::Bump { mass, center, width } => DataSpec::Bump { mass: *mass, center: *center, width: *width },
            DataConfig::CauchyTail { mass, gamma } => DataSpec::CauchyTail { mass: *mass, gamma: *gamma },
            DataConfig::VssLike { amplitude } => DataSpec::VssLike { amplitude: *amplitude },
            DataConfig::CustomCsv { path } => return read_custom_csv(&base.join(path), grid),
        };
        spec.build(grid, s, n)
    }

    /// Right edge of the support, for compactly supported data.
    pub fn support_edge(&self) -> Option<f64> {
        match self {
            DataConfig::Bump { center, width, .. } => Some(center + width),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub eps: Vec<f64>,
    pub t_end: f64,
    /// Evenly spaced recorded times over `(0, t_end]`.
    pub n_outputs: usize,
}

/// Optional overrides of the grid-derived stepper defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperOverrides {
    pub dt: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub dt_rel_max: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub damping_min: Option<f64>,
    pub adaptive: Option<bool>,
}

impl StepperOverrides {
    pub fn apply(&self, mut cfg: StepperConfig) -> Result<StepperConfig, String> {
        if let Some(v) = self.dt_max {
            cfg.dt_max = v;
        }
        cfg.dt = self.dt.unwrap_or(cfg.dt.min(cfg.dt_max));
        cfg.dt_min = self.dt_min.unwrap_or(cfg.dt_min.min(cfg.dt));
        if let Some(v) = self.dt_rel_max {
            cfg.dt_rel_max = v;
        }
        if let Some(v) = self.newton_tol {
            cfg.newton_tol = v;
        }
        if let Some(v) = self.newton_max_iter {
            cfg.newton_max_iter = v;
        }
        if let Some(v) = self.damping_min {
            cfg.damping_min = v;
        }
        if let Some(v) = self.adaptive {
            cfg.adaptive = v;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_checks")]
    pub names: Vec<String>,
    /// `sup ū` below this counts as extinction.
    #[serde(default = "default_threshold")]
    pub verdict_threshold: f64,
    /// Relative tolerance of the comparison-type checks.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { names: default_checks(), verdict_threshold: default_threshold(), tol: default_tol() }
    }
}

fn default_checks() -> Vec<String> {
    ["mass", "eps_monotone", "benilan_crandall"].iter().map(|s| s.to_string()).collect()
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_tol() -> f64 {
    1e-3
}

pub const CHECK_NAMES: &[&str] =
    &["mass", "eps_monotone", "benilan_crandall", "aleksandrov", "time_continuity", "very_weak", "lower_bound"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarenblattConfig {
    pub mass: f64,
    pub t_ref: Option<f64>,
    pub t_end: Option<f64>,
    pub n_outputs: Option<usize>,
    pub decades: Option<f64>,
    pub eps: Option<f64>,
    pub bump_cells: Option<f64>,
    pub center: Option<f64>,
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
    #[serde(default = "default_xi_points")]
    pub xi_points: usize,
    /// Number of final snapshots compared during extraction.
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_xi_max() -> f64 {
    400.0
}

fn default_xi_points() -> usize {
    801
}

fn default_count() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHalfSection {
    pub lambda: f64,
    #[serde(rename = "T")]
    pub t_ext: f64,
    pub eps: Option<Vec<f64>>,
    pub t_end_factor: Option<f64>,
    pub n_outputs: Option<usize>,
    pub threshold: Option<f64>,
}

impl ExperimentConfig {
    /// Parses and validates, with `s` and `n` optionally replaced first.
    pub fn parse(text: &str, s: Option<f64>, n: Option<f64>) -> Result<Self, String> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.s = s.unwrap_or(cfg.s);
        cfg.n = n.unwrap_or(cfg.n);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(format!("s = {} must lie in (0, 1)", self.s));
        }
        if !(self.n >= 0.0) {
            return Err(format!("n = {} must be nonnegative", self.n));
        }
        self.grid.build()?;
        if let Some(l) = &self.ladder {
            if l.eps.is_empty() || l.eps.iter().any(|e| !(*e > 0.0)) || l.eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err("ladder.eps must be positive and strictly decreasing".into());
            }
            if !(l.t_end > 0.0) || l.n_outputs == 0 {
                return Err("ladder needs t_end > 0 and n_outputs >= 1".into());
            }
        }
        if let Some(unknown) = self.checks.names.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return Err(format!("unknown check {unknown:?}; known: {}", CHECK_NAMES.join(", ")));
        }
        if !(self.checks.tol > 0.0) || !(self.checks.verdict_threshold > 0.0) {
            return Err("checks.tol and checks.verdict_threshold must be positive".into());
        }
        if let Some(b) = &self.barenblatt {
            if !(b.mass > 0.0) || !(b.xi_max > 0.0) || b.count < 2 {
                return Err("barenblatt needs mass > 0, xi_max > 0 and count >= 2".into());
            }
        }
        if let Some(h) = &self.loghalf {
            if !(h.lambda > 0.0) || !(h.t_ext > 0.0) {
                return Err("loghalf needs lambda > 0 and T > 0".into());
            }
        }
        Ok(())
    }

    /// Recorded times of the ladder: `t_end·k/n_outputs`.
    pub fn output_times(&self) -> Vec<f64> {
        self.ladder
            .as_ref()
            .map(|l| (1..=l.n_outputs).map(|k| l.t_end * k as f64 / l.n_outputs as f64).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
s = 0.8
n = 0.2
[grid]
L = 20.0
n_points = 401
[data]
kind = "bump"
mass = 1.0
center = 0.0
width = 1.0
[ladder]
eps = [1e-2, 1e-3]
t_end = 1.0
n_outputs = 4
"#;

    #[test]
    fn parses_the_base_config() {
        let c = ExperimentConfig::parse(BASE, None, None).unwrap();
        assert_eq!(c.grid.n_points, 401);
        assert_eq!(c.data, Some(DataConfig::Bump { mass: 1.0, center: 0.0, width: 1.0 }));
        assert_eq!(c.output_times(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.checks, ChecksConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(&format!("{BASE}colour = 1\n"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("width = 1.0", "width = 1.0\nheight = 2.0"), None, None).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}[extra]\na = 1\n"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("\"bump\"", "\"gaussian\""), None, None).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(ExperimentConfig::parse(&BASE.replace("s = 0.8", "s = 1.2"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("n = 0.2", "n = -0.1"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("n_points = 401", "n_points = 400"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("L = 20.0", "L = 0.0"), None, None).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("[1e-2, 1e-3]", "[1e-3, 1e-2]"), None, None).is_err());
        let bad = format!("{BASE}[checks]\nnames = [\"mass\", \"magic\"]\n");
        assert!(ExperimentConfig::parse(&bad, None, None).unwrap_err().contains("magic"));
    }

    #[test]
    fn stepper_overrides() {
        let g = Grid1D::new(20.0, 401).unwrap();
        let base = StepperConfig::for_grid(g, 0.8);
        let o = StepperOverrides { dt_max: Some(1e-3), ..Default::default() };
        let c = o.apply(base).unwrap();
        assert_eq!(c.dt_max, 1e-3);
        assert!(c.dt <= 1e-3 && c.dt_min <= c.dt);
        let bad = StepperOverrides { dt: Some(-1.0), ..Default::default() };
        assert!(bad.apply(base).is_err());
    }
}
