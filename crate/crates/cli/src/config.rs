//! Per-subcommand configuration. Every file is a flat TOML table (JSON when
//! the path ends in `.json`); absent keys take the defaults below and unknown
//! keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use up24_core::circulant::Strategy;
use up24_core::frame_torus::DistanceDomain;
use up24_core::gegenbauer::ZonalKernel;
use up24_core::quad_weights::Sampler;
use up24_core::snake::Majorant;
use up24_core::sphere_asymptotics::{ProbeTerm, SphereKernel};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

fn positive(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        bail!("key `{key}` must be at least 1");
    }
    Ok(())
}

fn finite(key: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        bail!("key `{key}` must be finite");
    }
    Ok(())
}

/// Inclusive grid lo, lo+step, ..., hi.
fn check_range(key_lo: &str, lo: f64, key_hi: &str, hi: f64) -> Result<()> {
    finite(key_lo, lo)?;
    finite(key_hi, hi)?;
    if lo > hi {
        bail!("key `{key_lo}` must not exceed `{key_hi}`");
    }
    Ok(())
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub d: usize,
    pub s: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub n: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig { d: 5, s: -1.0, gamma: 1.0, alpha: 1.5, n: 300, restarts: 8, max_iter: 5000, tol: 1e-8 }
    }
}

impl EquilibriumConfig {
    pub fn validate(&self) -> Result<()> {
        positive("d", self.d)?;
        positive("n", self.n)?;
        positive("restarts", self.restarts)?;
        finite("s", self.s)?;
        if !(self.gamma > 0.0) {
            bail!("key `gamma` must be positive");
        }
        if !(self.alpha > 0.0) {
            bail!("key `alpha` must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Ball,
    Cube,
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyConfig {
    pub body: BodyKind,
    pub dim: usize,
    pub s: f64,
    pub n: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub optimize_weights: bool,
    pub rounds: usize,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig {
            body: BodyKind::Ball,
            dim: 3,
            s: -1.0,
            n: 200,
            restarts: 8,
            max_iter: 5000,
            tol: 1e-8,
            optimize_weights: false,
            rounds: 30,
        }
    }
}

impl BodyConfig {
    pub fn validate(&self) -> Result<()> {
        positive("dim", self.dim)?;
        positive("restarts", self.restarts)?;
        finite("s", self.s)?;
        if self.n < 2 {
            bail!("key `n` must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub kernel: SphereKernel,
    /// Explicit N list; overrides the n_min..n_max grid.
    pub n_values: Option<Vec<usize>>,
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Fit window; defaults to the full N range.
    pub window: Option<(usize, usize)>,
    pub probe: ProbeTerm,
    pub free_leading: bool,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            kernel: SphereKernel::Log,
            n_values: None,
            n_min: 20,
            n_max: 150,
            n_step: 10,
            restarts: 8,
            max_iter: 20_000,
            tol: 1e-9,
            window: None,
            probe: ProbeTerm::SqrtN,
            free_leading: false,
        }
    }
}

impl AsymptoticsConfig {
    pub fn n_list(&self) -> Vec<usize> {
        match &self.n_values {
            Some(v) => v.clone(),
            None => (self.n_min..=self.n_max).step_by(self.n_step.max(1)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("restarts", self.restarts)?;
        positive("n_step", self.n_step)?;
        if self.n_values.is_none() && (self.n_min < 2 || self.n_min > self.n_max) {
            bail!("key `n_min` must be at least 2 and not exceed `n_max`");
        }
        if self.n_list().iter().any(|&n| n < 2) {
            bail!("key `n_values` entries must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignScanConfig {
    pub d: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub steps: usize,
    pub max_degree: usize,
}

impl Default for SignScanConfig {
    fn default() -> Self {
        SignScanConfig { d: 3, s_min: -0.9, s_max: 0.9, steps: 19, max_degree: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GegenbauerConfig {
    /// Ambient dimension of S^{d-1}.
    pub d: usize,
    pub max_degree: usize,
    pub kernels: Vec<ZonalKernel>,
    pub scan: Option<SignScanConfig>,
}

impl Default for GegenbauerConfig {
    fn default() -> Self {
        GegenbauerConfig { d: 3, max_degree: 20, kernels: vec![ZonalKernel::AbsPower { p: 2.5 }], scan: None }
    }
}

impl GegenbauerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            bail!("key `d` must be at least 2");
        }
        if let Some(scan) = &self.scan {
            if scan.d < 2 {
                bail!("key `scan.d` must be at least 2");
            }
            positive("scan.steps", scan.steps)?;
            check_range("scan.s_min", scan.s_min, "scan.s_max", scan.s_max)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureProblem {
    /// Minimize the p-frame energy on S^{d-1}.
    Pframe { p: f64, d: usize },
    /// Maximize the distance energy ρ^α on `domain`.
    Distance { domain: DistanceDomain, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PframeConfig {
    pub problem: MeasureProblem,
    pub n_support: usize,
    pub restarts: usize,
    pub rounds: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub polish: bool,
}

impl Default for PframeConfig {
    fn default() -> Self {
        PframeConfig {
            problem: MeasureProblem::Pframe { p: 1.5, d: 3 },
            n_support: 24,
            restarts: 8,
            rounds: 40,
            max_iter: 300,
            tol: 1e-12,
            polish: true,
        }
    }
}

impl PframeConfig {
    pub fn validate(&self) -> Result<()> {
        positive("n_support", self.n_support)?;
        positive("restarts", self.restarts)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusScanConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: usize,
    pub n_support: usize,
    pub restarts: usize,
    pub rounds: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub polish: bool,
}

impl Default for TorusScanConfig {
    fn default() -> Self {
        TorusScanConfig {
            alpha_min: 1.1,
            alpha_max: 1.9,
            steps: 9,
            n_support: 24,
            restarts: 8,
            rounds: 40,
            max_iter: 300,
            tol: 1e-12,
            polish: true,
        }
    }
}

impl TorusScanConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("alpha_min", self.alpha_min, "alpha_max", self.alpha_max)?;
        positive("steps", self.steps)?;
        positive("n_support", self.n_support)?;
        positive("restarts", self.restarts)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeConfig {
    pub majorants: Vec<Majorant>,
    pub degrees: Vec<usize>,
    pub ks: Vec<usize>,
    pub grid_size: usize,
    pub max_exchanges: usize,
    pub tol: f64,
    pub constraint_grid: usize,
    pub eval_grid: usize,
}

impl Default for SnakeConfig {
    fn default() -> Self {
        SnakeConfig {
            majorants: Majorant::catalog(),
            degrees: (2..=8).collect(),
            ks: vec![1, 2],
            grid_size: 2001,
            max_exchanges: 100,
            tol: 1e-13,
            constraint_grid: 2001,
            eval_grid: 513,
        }
    }
}

impl SnakeConfig {
    pub fn validate(&self) -> Result<()> {
        for m in &self.majorants {
            m.validate().with_context(|| format!("key `majorants`: {}", m.name()))?;
        }
        if self.ks.iter().any(|&k| k == 0) {
            bail!("key `ks` entries must be at least 1");
        }
        if self.grid_size < 16 {
            bail!("key `grid_size` must be at least 16");
        }
        if self.constraint_grid < 2 || self.eval_grid < 2 {
            bail!("keys `constraint_grid` and `eval_grid` must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub degrees: Vec<usize>,
    pub trials: usize,
    pub samplers: Vec<Sampler>,
    pub fekete_restarts: usize,
    pub fekete_iters: usize,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            degrees: (1..=8).collect(),
            trials: 5,
            samplers: vec![Sampler::IidUniform, Sampler::Fekete],
            fekete_restarts: 4,
            fekete_iters: 500,
        }
    }
}

/// Largest degree accepted without an explicit override.
pub const WEIGHTS_MAX_DEGREE: usize = 12;

impl WeightsConfig {
    pub fn validate(&self) -> Result<()> {
        positive("trials", self.trials)?;
        positive("fekete_restarts", self.fekete_restarts)?;
        if let Some(&n) = self.degrees.iter().find(|&&n| n > WEIGHTS_MAX_DEGREE) {
            bail!("key `degrees`: degree {n} exceeds {WEIGHTS_MAX_DEGREE}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirculantConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub strategy: Strategy,
    pub restarts: usize,
    pub sweeps: usize,
    pub t0: f64,
    pub cooling: f64,
    /// Random directions for the operator-bound check of each best sequence.
    pub verify_trials: usize,
}

impl Default for CirculantConfig {
    fn default() -> Self {
        CirculantConfig { n_min: 3, n_max: 64, strategy: Strategy::Anneal, restarts: 16, sweeps: 200, t0: 1.0, cooling: 0.995, verify_trials: 100 }
    }
}

impl CirculantConfig {
    pub fn validate(&self) -> Result<()> {
        positive("n_min", self.n_min)?;
        if self.n_min > self.n_max {
            bail!("key `n_min` must not exceed `n_max`");
        }
        positive("restarts", self.restarts)?;
        positive("verify_trials", self.verify_trials)?;
        if !(self.t0 > 0.0) || !(self.cooling > 0.0 && self.cooling <= 1.0) {
            bail!("keys `t0` > 0 and `cooling` in (0, 1] required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChromaticConfig {
    /// Explicit radii; overrides the r_min..r_max grid.
    pub radii: Option<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    pub steps: usize,
}

impl Default for ChromaticConfig {
    fn default() -> Self {
        ChromaticConfig { radii: None, r_min: 0.1, r_max: 10.0, steps: 100 }
    }
}

impl ChromaticConfig {
    pub fn radii(&self) -> Vec<f64> {
        self.radii.clone().unwrap_or_else(|| linspace(self.r_min, self.r_max, self.steps))
    }

    pub fn validate(&self) -> Result<()> {
        check_range("r_min", self.r_min, "r_max", self.r_max)?;
        positive("steps", self.steps)?;
        if self.radii().iter().any(|&r| !(r > 0.0)) {
            bail!("key `radii`: radii must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub d: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub steps: usize,
    pub gamma: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig { d: 10, s_min: -1.9, s_max: 6.9, steps: 89, gamma: 1.0 }
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("s_min", self.s_min, "s_max", self.s_max)?;
        positive("steps", self.steps)?;
        if !(self.gamma > 0.0) {
            bail!("key `gamma` must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionsConfig {
    /// Ambient dimension of the sphere.
    pub d: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: usize,
}

impl Default for TransitionsConfig {
    fn default() -> Self {
        TransitionsConfig { d: 3, alpha_min: 0.5, alpha_max: 3.0, steps: 26 }
    }
}

impl TransitionsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            bail!("key `d` must be at least 2");
        }
        check_range("alpha_min", self.alpha_min, "alpha_max", self.alpha_max)?;
        if !(self.alpha_min > 0.0) {
            bail!("key `alpha_min` must be positive");
        }
        positive("steps", self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeFigureConfig {
    pub degree: usize,
    /// Samples of ω and μ per majorant.
    pub samples: usize,
}

impl Default for SnakeFigureConfig {
    fn default() -> Self {
        SnakeFigureConfig { degree: 6, samples: 401 }
    }
}

impl SnakeFigureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            bail!("key `samples` must be at least 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(src: &str) {
        let a: T = toml::from_str(src).unwrap();
        let echo = serde_json::to_value(&a).unwrap();
        let b: T = serde_json::from_value(echo).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn echo_round_trips() {
        round_trip::<EquilibriumConfig>("d = 4\ns = 0.5\n");
        round_trip::<PframeConfig>("[problem]\nkind = \"distance\"\nalpha = 2.0\n[problem.domain]\nkind = \"torus2\"\n");
        round_trip::<SnakeConfig>("majorants = [{ kind = \"one\" }, { kind = \"abs_x\" }]\ndegrees = [3]\n");
        round_trip::<GegenbauerConfig>("kernels = [{ kind = \"abs_power\", p = 4.0 }]\n[scan]\nsteps = 3\n");
        round_trip::<ConstantsConfig>("");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = toml::from_str::<EquilibriumConfig>("dd = 4\n").unwrap_err().to_string();
        assert!(err.contains("dd"), "{err}");
        let err = EquilibriumConfig { n: 0, ..Default::default() }.validate().unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
    }
}
