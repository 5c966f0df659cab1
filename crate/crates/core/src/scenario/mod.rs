//! Scenario files, presets, runs and sweeps.
//!
//! A scenario is a TOML document with a `[chain]` (or `[bell]`) section,
//! an `[initial_state]`, a `[solver]`, a `[grid]` and optional `[outputs]`
//! and `[fit]` sections. Bare frequencies are MHz (`/2π`), bare times are
//! μs; strings with explicit units are accepted as well.

mod presets;
mod run;
mod sweep;
mod units;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{FrameMode, IntegratorSettings};
use crate::protocol::{BellParams, CavityParams, ChainConfig, DriveVariant, QutritCoherence};
use crate::trajectories::TrajectorySettings;

pub use presets::{
    mismatch_cavities, preset, preset_catalog, sweep_preset, sweep_presets, PresetInfo, SweepPreset, BASE_ROW_MHZ,
    MISMATCH_ROWS_MHZ, TARGET_ROW_MHZ,
};
pub use run::{read_timeseries, run_scenario, write_outputs, FitOutcome, RunMetadata, RunOutput};
pub use sweep::{apply_sweep_value, sweep, write_sweep_table, SweepParam, SweepRow};
pub use units::{Freq, Time};

/// Default master-equation dimension ceiling.
pub const DEFAULT_DIM_CEILING: usize = 1000;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellSection>,
    pub initial_state: InitialState,
    pub solver: SolverSection,
    pub grid: GridSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n_sites: usize,
    #[serde(default = "default_n_drive")]
    pub n_drive: u32,
    #[serde(default = "default_cutoff")]
    pub photon_cutoff: usize,
    #[serde(default = "default_variant")]
    pub drive_variant: DriveVariant,
    /// Zero-photon drive amplitude; defaults to `Σκ/(2(N−1))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_0: Option<Freq>,
    /// n-photon drive amplitudes, one per cavity; default `κ_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_n: Option<Vec<Freq>>,
    #[serde(rename = "cavity")]
    pub cavities: Vec<CavitySection>,
    /// One entry for every qutrit, or a single entry shared by all.
    /// Empty means `T₁ = T₂ = 500 μs`.
    #[serde(default, rename = "qutrit", skip_serializing_if = "Vec::is_empty")]
    pub qutrits: Vec<QutritSection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub chi_ge: Freq,
    pub chi_gf: Freq,
    pub chi_ge_prime: Freq,
    pub chi_gf_prime: Freq,
    pub kappa: Freq,
}

/// Coherence times. `t1`/`t2` set both transitions; the `_ge`/`_ef` keys
/// override one. `tphi` replaces `t2` by a pure dephasing time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QutritSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tphi: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_ge: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_ef: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_ge: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_ef: Option<Time>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSection {
    pub chi_a: Freq,
    pub chi_b: Freq,
    pub kappa: Freq,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_0: Option<Freq>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_n: Option<Freq>,
    #[serde(default = "default_n_drive")]
    pub n_drive: u32,
    #[serde(default = "default_cutoff")]
    pub photon_cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Uniform mixture over the qutrit (qubit) product basis, cavities empty.
    MaximallyMixed,
    /// `|g…g⟩ ⊗ |0…0⟩`.
    GroundState,
    /// The AKLT ground state with total `S_z = +1`.
    AkltState,
    /// Uniform mixture of the four AKLT ground states.
    AkltMixture,
    /// A product state such as `"gef"` or `"gf|1"`.
    BasisState { label: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    MasterEquation,
    Trajectories,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    #[serde(default = "default_rtol")]
    pub rel_tol: f64,
    #[serde(default = "default_atol")]
    pub abs_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<Time>,
    #[serde(default = "default_frame")]
    pub frame: FrameMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_norm_tol: Option<f64>,
    #[serde(default = "default_ceiling")]
    pub dim_ceiling: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t_end: Time,
    pub n_points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Observable names to record; empty records everything available.
    #[serde(default)]
    pub observables: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// Rise (or fall) towards a plateau; `C` is the final fidelity.
    #[default]
    Convergence,
    /// Decay out of a prepared subspace; `b` is the dephasing rate.
    Dephasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_fit_observable")]
    pub observable: String,
    #[serde(default = "default_fit_start")]
    pub start: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Time>,
    #[serde(default)]
    pub model: FitModel,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { observable: default_fit_observable(), start: default_fit_start(), end: None, model: FitModel::Convergence }
    }
}

fn default_n_drive() -> u32 {
    2
}
fn default_cutoff() -> usize {
    3
}
fn default_variant() -> DriveVariant {
    DriveVariant::GfRotation
}
fn default_rtol() -> f64 {
    IntegratorSettings::default().rel_tol
}
fn default_atol() -> f64 {
    IntegratorSettings::default().abs_tol
}
fn default_frame() -> FrameMode {
    FrameMode::Interaction
}
fn default_ceiling() -> usize {
    DEFAULT_DIM_CEILING
}
fn default_fit_observable() -> String {
    crate::analysis::AKLT_POPULATION.to_string()
}
fn default_fit_start() -> Time {
    Time(crate::analysis::DEFAULT_FIT_START_NS)
}

impl SolverSection {
    pub fn master_equation() -> Self {
        SolverSection {
            kind: SolverKind::MasterEquation,
            rel_tol: default_rtol(),
            abs_tol: default_atol(),
            max_step: None,
            frame: FrameMode::Interaction,
            trajectories: None,
            seed: None,
            jump_norm_tol: None,
            dim_ceiling: DEFAULT_DIM_CEILING,
        }
    }

    pub fn trajectories(n: usize, rel_tol: f64, abs_tol: f64) -> Self {
        SolverSection {
            kind: SolverKind::Trajectories,
            rel_tol,
            abs_tol,
            trajectories: Some(n),
            seed: Some(DEFAULT_SEED),
            ..SolverSection::master_equation()
        }
    }

    pub fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.map(|t| t.0),
            frame: self.frame,
            ..IntegratorSettings::default()
        }
    }

    pub fn trajectory_settings(&self) -> TrajectorySettings {
        let d = TrajectorySettings::default();
        TrajectorySettings {
            n_trajectories: self.trajectories.unwrap_or(d.n_trajectories),
            master_seed: self.seed.unwrap_or(DEFAULT_SEED),
            jump_norm_tol: self.jump_norm_tol.unwrap_or(d.jump_norm_tol),
            integrator: self.integrator(),
            workers: None,
        }
    }
}

impl GridSection {
    /// `n_points` equally spaced times from 0 to `t_end`, in ns.
    pub fn times(&self) -> Result<Vec<f64>> {
        let t_end = self.t_end.0;
        if self.n_points < 2 || !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::Config("grid needs t_end > 0 and at least two points".into()));
        }
        let n = self.n_points - 1;
        Ok((0..=n).map(|i| t_end * i as f64 / n as f64).collect())
    }
}

impl CavitySection {
    pub fn from_params(c: &CavityParams) -> Self {
        CavitySection {
            chi_ge: Freq(c.chi_ge),
            chi_gf: Freq(c.chi_gf),
            chi_ge_prime: Freq(c.chi_ge_prime),
            chi_gf_prime: Freq(c.chi_gf_prime),
            kappa: Freq(c.kappa),
        }
    }

    pub fn params(&self) -> CavityParams {
        CavityParams {
            chi_ge: self.chi_ge.0,
            chi_gf: self.chi_gf.0,
            chi_ge_prime: self.chi_ge_prime.0,
            chi_gf_prime: self.chi_gf_prime.0,
            kappa: self.kappa.0,
        }
    }
}

impl QutritSection {
    pub fn uniform(t1: f64, t2: f64) -> Self {
        QutritSection { t1: Some(Time(t1)), t2: Some(Time(t2)), ..Default::default() }
    }

    /// Finite or infinite `T₁` with pure dephasing time `T_φ`.
    pub fn with_tphi(t1: f64, tphi: f64) -> Self {
        QutritSection { t1: Some(Time(t1)), tphi: Some(Time(tphi)), ..Default::default() }
    }

    pub fn coherence(&self) -> Result<QutritCoherence> {
        let default = Time(500e3);
        let t1 = self.t1.unwrap_or(default);
        let t1_ge = self.t1_ge.unwrap_or(t1).0;
        let t1_ef = self.t1_ef.unwrap_or(t1).0;
        let (t2_ge, t2_ef) = match self.tphi {
            Some(tphi) => {
                if self.t2.is_some() || self.t2_ge.is_some() || self.t2_ef.is_some() {
                    return Err(Error::Config("give either tphi or t2, not both".into()));
                }
                let t2 = |t1: f64| 1.0 / (0.5 / t1 + 1.0 / tphi.0);
                (t2(t1_ge), t2(t1_ef))
            }
            None => {
                let t2 = self.t2.unwrap_or(default);
                (self.t2_ge.unwrap_or(t2).0, self.t2_ef.unwrap_or(t2).0)
            }
        };
        Ok(QutritCoherence { t1_ge, t1_ef, t2_ge, t2_ef })
    }
}

impl ChainSection {
    /// Uniform chain: the same cavity everywhere, default drives and coherence.
    pub fn uniform(n_sites: usize, cavity: CavityParams) -> Self {
        ChainSection {
            n_sites,
            n_drive: default_n_drive(),
            photon_cutoff: default_cutoff(),
            drive_variant: DriveVariant::GfRotation,
            omega_0: None,
            omega_n: None,
            cavities: vec![CavitySection::from_params(&cavity); n_sites.saturating_sub(1)],
            qutrits: vec![],
        }
    }

    pub fn config(&self) -> Result<ChainConfig> {
        let cavities: Vec<CavityParams> = self.cavities.iter().map(CavitySection::params).collect();
        let mut cfg = ChainConfig {
            n_sites: self.n_sites,
            cavities,
            omega_0: 0.0,
            omega_n: vec![],
            n_drive: self.n_drive,
            photon_cutoff: self.photon_cutoff,
            coherence: vec![],
            drive_variant: self.drive_variant,
        };
        cfg.reset_drive_amplitudes();
        if let Some(w) = self.omega_0 {
            cfg.omega_0 = w.0;
        }
        if let Some(w) = &self.omega_n {
            cfg.omega_n = w.iter().map(|f| f.0).collect();
        }
        cfg.coherence = match self.qutrits.len() {
            0 => vec![QutritSection::default().coherence()?; self.n_sites],
            1 => vec![self.qutrits[0].coherence()?; self.n_sites],
            n if n == self.n_sites => self.qutrits.iter().map(QutritSection::coherence).collect::<Result<_>>()?,
            n => {
                return Err(Error::Config(format!(
                    "{n} [[chain.qutrit]] entries for {} sites (give one shared entry or one per qutrit)",
                    self.n_sites
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl BellSection {
    pub fn params(&self) -> BellParams {
        BellParams {
            chi_a: self.chi_a.0,
            chi_b: self.chi_b.0,
            kappa: self.kappa.0,
            omega_0: self.omega_0.map_or(self.kappa.0 / 2.0, |w| w.0),
            omega_n: self.omega_n.map_or(self.kappa.0, |w| w.0),
            n_drive: self.n_drive,
            photon_cutoff: self.photon_cutoff,
            t1: self.t1.map_or(f64::INFINITY, |t| t.0),
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Forces the trajectory solver with this many trajectories.
    pub trajectories: Option<usize>,
    pub photon_cutoff: Option<usize>,
    pub fit_start_ns: Option<f64>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ScenarioFile::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.trajectories {
            self.solver.kind = SolverKind::Trajectories;
            self.solver.trajectories = Some(n);
        }
        if let Some(s) = o.seed {
            self.solver.seed = Some(s);
        }
        if let Some(c) = o.photon_cutoff {
            if let Some(ch) = &mut self.chain {
                ch.photon_cutoff = c;
            }
            if let Some(b) = &mut self.bell {
                b.photon_cutoff = c;
            }
        }
        if let Some(t) = o.fit_start_ns {
            self.fit.get_or_insert_with(FitSection::default).start = Time(t);
        }
    }

    /// Checks that exactly one model section is present and that everything
    /// resolves.
    pub fn validate(&self) -> Result<()> {
        match (&self.chain, &self.bell) {
            (Some(c), None) => {
                c.config()?;
            }
            (None, Some(b)) => {
                crate::protocol::build_qubit_bell_scenario(&b.params())?;
                if matches!(self.initial_state, InitialState::AkltState | InitialState::AkltMixture) {
                    return Err(Error::Config("AKLT initial states need a qutrit chain".into()));
                }
            }
            _ => return Err(Error::Config("give exactly one of [chain] or [bell]".into())),
        }
        self.grid.times()?;
        if self.solver.kind == SolverKind::Trajectories {
            self.solver.trajectory_settings().validate()?;
        } else {
            self.solver.integrator().validate()?;
        }
        if let Some(f) = &self.fit {
            if !(f.start.0 >= 0.0) || f.end.is_some_and(|e| !(e.0 > f.start.0)) {
                return Err(Error::Config("fit window must satisfy 0 <= start < end".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
name = "pair"

[chain]
n_sites = 2
drive_variant = "sx_rotation"

[[chain.cavity]]
chi_ge = 40
chi_gf = 79.2
chi_ge_prime = 38
chi_gf_prime = 76
kappa = 2

[[chain.qutrit]]
t1 = 10
t2 = "inf"

[initial_state]
kind = "basis_state"
label = "gf"

[solver]
kind = "trajectories"
trajectories = 20
seed = 7

[grid]
t_end = "800 ns"
n_points = 9

[fit]
start = "100 ns"
"#;

    #[test]
    fn parses_documented_schema() {
        let f = ScenarioFile::from_toml(DOC).unwrap();
        f.validate().unwrap();
        let cfg = f.chain.as_ref().unwrap().config().unwrap();
        assert_eq!(cfg.drive_variant, DriveVariant::SxRotation);
        assert_eq!(cfg.cavities[0], CavityParams::from_mhz(BASE_ROW_MHZ));
        assert_eq!(cfg.coherence, vec![QutritCoherence::uniform(10e3, f64::INFINITY); 2]);
        assert_eq!(f.initial_state, InitialState::BasisState { label: "gf".into() });
        assert_eq!(f.grid.times().unwrap()[8], 800.0);
        assert_eq!(f.fit.as_ref().unwrap().observable, "P_AKLT");
        assert_eq!(f.solver.trajectory_settings().master_seed, 7);
    }

    #[test]
    fn echo_round_trips() {
        let mut f = ScenarioFile::from_toml(DOC).unwrap();
        f.chain.as_mut().unwrap().cavities[0].chi_ge = Freq(0.1234567891234);
        let back = ScenarioFile::from_toml(&f.to_toml().unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn tphi_maps_to_pure_dephasing() {
        let q = QutritSection::with_tphi(f64::INFINITY, 20e3).coherence().unwrap();
        let g = QutritCoherence::pure_dephasing_rate(q.t1_ge, q.t2_ge).unwrap();
        assert!((g - 1.0 / 20e3).abs() < 1e-18);
        let q = QutritSection::with_tphi(30e3, 20e3).coherence().unwrap();
        let g = QutritCoherence::pure_dephasing_rate(q.t1_ef, q.t2_ef).unwrap();
        assert!((g - 1.0 / 20e3).abs() < 1e-15);
        let both = QutritSection { tphi: Some(Time(1.0)), t2: Some(Time(1.0)), ..Default::default() };
        assert!(both.coherence().is_err());
    }

    #[test]
    fn overrides_and_validation() {
        let mut f = ScenarioFile::from_toml(DOC).unwrap();
        f.solver.kind = SolverKind::MasterEquation;
        f.apply(&Overrides { seed: Some(3), trajectories: Some(5), photon_cutoff: Some(6), fit_start_ns: Some(50.0) });
        assert_eq!(f.solver.kind, SolverKind::Trajectories);
        assert_eq!((f.solver.trajectories, f.solver.seed), (Some(5), Some(3)));
        assert_eq!(f.chain.as_ref().unwrap().photon_cutoff, 6);
        assert_eq!(f.fit.as_ref().unwrap().start, Time(50.0));

        let mut bad = f.clone();
        bad.chain.as_mut().unwrap().qutrits = vec![QutritSection::default(); 3];
        assert!(bad.validate().is_err());
        let mut bad = f.clone();
        bad.grid.n_points = 1;
        assert!(bad.validate().is_err());
        assert!(ScenarioFile::from_toml("name = 1").is_err());
        assert!(ScenarioFile::from_toml(&DOC.replace("n_points", "npoints")).is_err());
    }
}
