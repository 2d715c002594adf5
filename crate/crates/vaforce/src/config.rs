//! Experiment configuration, read from TOML.
//!
//! ```toml
//! duration = 10.0          # seconds of signal
//! repeats = 20             # noise realizations for sweeps
//! method = "proposed"      # proposed | akf | both
//! out_dir = "out"
//! alpha = 0.0              # or a table, see below
//!
//! [model.toy]              # or: [model] manifest = "model.txt"
//! youngs_modulus = 2.1e5
//!
//! [rom]
//! n_modes_struct = 10
//! n_modes_fluid = 10
//!
//! [damping]
//! a1s = 1.0
//! a2s = 1e-6
//!
//! [newmark]
//! dt = 1e-3
//!
//! [selection]
//! acc_idx = [2, 4, 8, 12, 14, 18]
//! force_idx = [4, 8, 14, 18]
//! response_idx = [4, 8]    # displacements to reconstruct
//!
//! [[forces]]
//! name = "f1x"
//! dof = 4
//! terms = [{ amplitude = 200.0, hz = 15.0 }, { amplitude = 370.0, hz = 87.5 }]
//!
//! [[forces]]
//! name = "r"
//! dof = 8
//! random = { n_terms = 8, band_hz = 4.0, max_amplitude = 100.0, seed = 3 }
//!
//! [noise]
//! tau = 0.01
//! seed = 1
//!
//! [alpha.l_curve]          # instead of a fixed alpha
//! lo = 1e-10               # grid bounds, relative to ‖Ŝ·G‖²
//! hi = 1e2
//! points = 13
//! window = 2000            # calibration samples
//!
//! [akf]
//! q_force = 1e4
//! dts = [1e-3, 1e-4, 1e-5]
//! duration = 0.1
//!
//! [sweep]
//! taus = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use vaforce_core::excitation::{SineSum, SineTerm};
use vaforce_core::metrics::NoiseSpec;
use vaforce_core::toy::{Boundary, ToyKind};
use vaforce_core::{DampingSpec, NewmarkParams, RomSpec, SelectionConfig, ToyModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Akf,
    Both,
}

impl Method {
    pub fn runs_proposed(self) -> bool {
        matches!(self, Method::Proposed | Method::Both)
    }

    pub fn runs_akf(self) -> bool {
        matches!(self, Method::Akf | Method::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ToyKindConfig {
    #[default]
    Rod,
    SpringMass,
}

/// Toy rod-and-column parameters; omitted keys take the steel/water
/// defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub kind: ToyKindConfig,
    pub n_struct_elems: usize,
    pub n_fluid_elems: usize,
    pub youngs_modulus: f64,
    pub rho_s: f64,
    pub area: f64,
    pub len_struct: f64,
    pub len_fluid: f64,
    pub rho_f: f64,
    pub sound_speed: f64,
    pub struct_start_fixed: bool,
    pub struct_end_fixed: bool,
    pub fluid_end_open: bool,
    pub coupled: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let d = ToyModelSpec::default();
        Self {
            kind: ToyKindConfig::Rod,
            n_struct_elems: d.n_struct_elems,
            n_fluid_elems: d.n_fluid_elems,
            youngs_modulus: d.youngs_modulus,
            rho_s: d.rho_s,
            area: d.area,
            len_struct: d.len_struct,
            len_fluid: d.len_fluid,
            rho_f: d.rho_f,
            sound_speed: d.sound_speed,
            struct_start_fixed: d.boundary.struct_start_fixed,
            struct_end_fixed: d.boundary.struct_end_fixed,
            fluid_end_open: d.boundary.fluid_end_open,
            coupled: d.coupled,
        }
    }
}

impl ToyConfig {
    pub fn spec(&self) -> ToyModelSpec {
        ToyModelSpec {
            kind: match self.kind {
                ToyKindConfig::Rod => ToyKind::RodTubePiston,
                ToyKindConfig::SpringMass => ToyKind::SpringMassChain,
            },
            n_struct_elems: self.n_struct_elems,
            n_fluid_elems: self.n_fluid_elems,
            youngs_modulus: self.youngs_modulus,
            rho_s: self.rho_s,
            area: self.area,
            len_struct: self.len_struct,
            len_fluid: self.len_fluid,
            rho_f: self.rho_f,
            sound_speed: self.sound_speed,
            boundary: Boundary {
                struct_start_fixed: self.struct_start_fixed,
                struct_end_fixed: self.struct_end_fixed,
                fluid_end_open: self.fluid_end_open,
            },
            coupled: self.coupled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub toy: Option<ToyConfig>,
    /// Manifest path, relative to the config file.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    pub n_modes_struct: usize,
    pub n_modes_fluid: usize,
    #[serde(default = "yes")]
    pub mass_normalize: bool,
}

fn yes() -> bool {
    true
}

impl RomConfig {
    pub fn spec(&self) -> RomSpec {
        RomSpec {
            n_modes_struct: self.n_modes_struct,
            n_modes_fluid: self.n_modes_fluid,
            mass_normalize: self.mass_normalize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DampingConfig {
    pub a1s: f64,
    pub a2s: f64,
    pub a1f: f64,
    pub a2f: f64,
}

impl DampingConfig {
    pub fn spec(&self) -> DampingSpec {
        DampingSpec {
            a1s: self.a1s,
            a2s: self.a2s,
            a1f: self.a1f,
            a2f: self.a2f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewmarkConfig {
    #[serde(default = "quarter")]
    pub beta: f64,
    #[serde(default = "half")]
    pub delta: f64,
    pub dt: f64,
}

fn quarter() -> f64 {
    0.25
}

fn half() -> f64 {
    0.5
}

impl NewmarkConfig {
    pub fn params(&self) -> Result<NewmarkParams> {
        Ok(NewmarkParams::new(self.beta, self.delta, self.dt)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub disp_idx: Vec<usize>,
    pub vel_idx: Vec<usize>,
    pub acc_idx: Vec<usize>,
    pub force_idx: Vec<usize>,
    /// Displacement DOFs reconstructed and scored; defaults to `force_idx`.
    pub response_idx: Option<Vec<usize>>,
}

impl SelectionSection {
    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            disp_idx: self.disp_idx.clone(),
            vel_idx: self.vel_idx.clone(),
            acc_idx: self.acc_idx.clone(),
            force_idx: self.force_idx.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub amplitude: f64,
    pub hz: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomProfile {
    pub n_terms: usize,
    pub band_hz: f64,
    pub max_amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub name: String,
    pub dof: usize,
    pub terms: Option<Vec<TermConfig>>,
    pub random: Option<RandomProfile>,
}

impl ForceConfig {
    pub fn profile(&self) -> Result<SineSum> {
        match (&self.terms, &self.random) {
            (Some(terms), None) => Ok(SineSum::new(
                terms
                    .iter()
                    .map(|t| SineTerm {
                        amplitude: t.amplitude,
                        hz: t.hz,
                        phase: t.phase,
                    })
                    .collect(),
            )),
            (None, Some(r)) => Ok(SineSum::random(r.n_terms, r.band_hz, r.max_amplitude, r.seed)?),
            _ => bail!("force {:?}: give exactly one of `terms` or `random`", self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec {
            tau: self.tau,
            seed: self.seed,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { tau: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LCurveConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Number of leading samples used for calibration; all when absent.
    pub window: Option<usize>,
    /// Bounds are multiples of `‖Ŝ·G‖²_F` when true.
    #[serde(default = "yes")]
    pub relative: bool,
}

impl LCurveConfig {
    /// Log-spaced grid between the bounds, multiplied by `scale`.
    pub fn grid(&self, scale: f64) -> Vec<f64> {
        let (lo, hi) = if self.relative {
            (self.lo * scale, self.hi * scale)
        } else {
            (self.lo, self.hi)
        };
        if self.points == 1 {
            return vec![lo];
        }
        (0..self.points)
            .map(|i| lo * (hi / lo).powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AlphaConfig {
    Fixed(f64),
    LCurve { l_curve: LCurveConfig },
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig::Fixed(0.0)
    }
}

/// Augmented Kalman filter tuning. Covariances are diagonal: `q_state` and
/// `q_force` for the process, `p0_state` and `p0_force` for the prior, and
/// `R_jj = (max(τ, r_floor)·σ_j)²` from the clean channel deviations.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AkfConfig {
    pub q_force: f64,
    pub q_state: f64,
    pub p0_force: f64,
    pub p0_state: f64,
    pub r_floor: f64,
    /// Time steps for the comparison, all at most the proposed `dt`.
    pub dts: Vec<f64>,
    /// Signal length for the comparison; `duration` when absent.
    pub duration: Option<f64>,
}

impl Default for AkfConfig {
    fn default() -> Self {
        Self {
            q_force: 1e4,
            q_state: 1e-20,
            p0_force: 1e4,
            p0_state: 1e-20,
            r_floor: 1e-6,
            dts: vec![1e-3, 1e-4, 1e-5],
            duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
        }
    }
}

fn one() -> usize {
    1
}

fn proposed() -> Method {
    Method::Proposed
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub rom: RomConfig,
    #[serde(default)]
    pub damping: DampingConfig,
    pub newmark: NewmarkConfig,
    pub selection: SelectionSection,
    pub forces: Vec<ForceConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "proposed")]
    pub method: Method,
    #[serde(default)]
    pub alpha: AlphaConfig,
    pub duration: f64,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub akf: AkfConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Directory that relative model paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).with_context(|| format!("in {}", path.display()))
    }

    /// Checks everything that does not need the model itself.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.model.toy.is_some() != self.model.manifest.is_some(),
            "model: give exactly one of `toy` or `manifest`"
        );
        if let Some(toy) = &self.model.toy {
            toy.spec().validate()?;
        }
        ensure!(self.duration > 0.0 && self.duration.is_finite(), "duration must be positive");
        ensure!(self.repeats >= 1, "repeats must be at least 1");
        self.newmark.params()?;
        self.damping.spec().validate()?;
        self.noise.spec().validate()?;
        ensure!(!self.forces.is_empty(), "at least one force is required");
        let force_idx = &self.selection.force_idx;
        for f in &self.forces {
            ensure!(
                force_idx.contains(&f.dof),
                "force {:?} acts on DOF {} which is not in force_idx {:?}",
                f.name,
                f.dof,
                force_idx
            );
            f.profile()?;
        }
        for &i in force_idx {
            let n = self.forces.iter().filter(|f| f.dof == i).count();
            ensure!(n == 1, "force_idx entry {i} needs exactly one force profile, found {n}");
        }
        match self.alpha {
            AlphaConfig::Fixed(a) => ensure!(a >= 0.0 && a.is_finite(), "alpha must be non-negative"),
            AlphaConfig::LCurve { l_curve: l } => {
                ensure!(l.points >= 1, "l_curve.points must be at least 1");
                ensure!(
                    l.lo > 0.0 && l.hi >= l.lo && l.hi.is_finite(),
                    "l_curve bounds must satisfy 0 < lo <= hi"
                );
                ensure!(l.points == 1 || l.hi > l.lo, "l_curve needs lo < hi for several points");
                ensure!(l.window != Some(0), "l_curve.window must be positive");
            }
        }
        let a = &self.akf;
        for (name, v) in [
            ("q_force", a.q_force),
            ("q_state", a.q_state),
            ("p0_force", a.p0_force),
            ("p0_state", a.p0_state),
            ("r_floor", a.r_floor),
        ] {
            ensure!(v >= 0.0 && v.is_finite(), "akf.{name} must be non-negative");
        }
        ensure!(a.r_floor > 0.0, "akf.r_floor must be positive so R stays definite");
        for &dt in &a.dts {
            ensure!(dt > 0.0 && dt.is_finite(), "akf.dts must be positive");
        }
        if let Some(d) = a.duration {
            ensure!(d > 0.0 && d.is_finite(), "akf.duration must be positive");
        }
        for &t in &self.sweep.taus {
            ensure!(t >= 0.0 && t.is_finite(), "sweep.taus must be non-negative");
        }
        Ok(())
    }

    /// Force profiles and names ordered like `force_idx`.
    pub fn ordered_forces(&self) -> Result<(Vec<String>, Vec<SineSum>)> {
        let mut names = Vec::new();
        let mut profiles = Vec::new();
        for &i in &self.selection.force_idx {
            let f = self
                .forces
                .iter()
                .find(|f| f.dof == i)
                .with_context(|| format!("no force profile for DOF {i}"))?;
            names.push(f.name.clone());
            profiles.push(f.profile()?);
        }
        Ok((names, profiles))
    }

    pub fn response_idx(&self) -> Vec<usize> {
        self.selection
            .response_idx
            .clone()
            .unwrap_or_else(|| self.selection.force_idx.clone())
    }

    pub fn akf_duration(&self) -> f64 {
        self.akf.duration.unwrap_or(self.duration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
duration = 1.0
[model.toy]
youngs_modulus = 2.1e5
[rom]
n_modes_struct = 4
n_modes_fluid = 4
[newmark]
dt = 1e-3
[selection]
acc_idx = [2, 4]
force_idx = [4]
[[forces]]
name = "f"
dof = 4
terms = [{ amplitude = 1.0, hz = 2.0 }]
"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(text, Path::new("."))
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.method, Method::Proposed);
        assert_eq!(cfg.alpha, AlphaConfig::Fixed(0.0));
        assert_eq!(cfg.repeats, 1);
        assert_eq!(cfg.newmark.beta, 0.25);
        assert_eq!(cfg.model.toy.as_ref().unwrap().n_struct_elems, 20);
        assert_eq!(cfg.response_idx(), vec![4]);
        assert_eq!(cfg.akf.dts, vec![1e-3, 1e-4, 1e-5]);
    }

    #[test]
    fn alpha_forms() {
        let cfg = parse(&format!("alpha = 1e-6\n{MINIMAL}")).unwrap();
        assert_eq!(cfg.alpha, AlphaConfig::Fixed(1e-6));
        let text = format!("{MINIMAL}\n[alpha.l_curve]\nlo = 1e-8\nhi = 1e2\npoints = 11\n");
        let AlphaConfig::LCurve { l_curve } = parse(&text).unwrap().alpha else {
            panic!("expected an l-curve");
        };
        let g = l_curve.grid(10.0);
        assert_eq!(g.len(), 11);
        assert!((g[0] - 1e-7).abs() < 1e-20 && (g[10] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(parse(&MINIMAL.replace("duration = 1.0", "duration = 0.0")).is_err());
        assert!(parse(&format!("repeats = 0\n{MINIMAL}")).is_err());
        assert!(parse(&MINIMAL.replace("dof = 4", "dof = 5")).is_err());
        assert!(parse(&MINIMAL.replace("force_idx = [4]", "force_idx = [4, 8]")).is_err());
        assert!(parse(&MINIMAL.replace("[model.toy]", "[model]\nmanifest = \"m.txt\"\n[model.toy]")).is_err());
        assert!(parse(&MINIMAL.replace("youngs", "young")).is_err());
        assert!(parse(&format!("method = \"magic\"\n{MINIMAL}")).is_err());
    }

    #[test]
    fn random_profile_is_seeded() {
        let text = MINIMAL.replace(
            "terms = [{ amplitude = 1.0, hz = 2.0 }]",
            "random = { n_terms = 4, band_hz = 2.0, max_amplitude = 5.0, seed = 9 }",
        );
        let cfg = parse(&text).unwrap();
        let (names, p) = cfg.ordered_forces().unwrap();
        assert_eq!(names, ["f"]);
        assert_eq!(p[0], SineSum::random(4, 2.0, 5.0, 9).unwrap());
    }
}
