use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{FitModel, InitialState, ScenarioFile, SolverKind};
use crate::algebra::{cavity_number, spin_basis_states, DensityMatrix, PureState, SpaceLayout, C64};
use crate::analysis::{
    build_observable_set, extract_dephasing_rate, fit_exponential, photon_number_name, FitError, FitResult, FitWindow,
    Observable, ObservableKind,
};
use crate::error::{Error, Result};
use crate::integrate::{IntegratorSettings, StepStats};
use crate::mesolve::{evolve, NamedSeries};
use crate::protocol::{
    build_collapse_channels, build_full_hamiltonian, build_qubit_bell_scenario, cavity_factor, CollapseChannel,
    TimeDependentHamiltonian,
};
use crate::spin::aklt_subspace;
use crate::trajectories::{run_ensemble, InitialCondition};

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub observable: String,
    pub model: FitModel,
    pub result: std::result::Result<FitResult, FitError>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub solver: SolverKind,
    pub hilbert_dim: usize,
    pub integrator: IntegratorSettings,
    pub stats: StepStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Jumps per collapse channel, summed over trajectories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_counts: Option<Vec<(String, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trace_error: Option<f64>,
    pub diagnostics: Vec<String>,
    /// SHA-256 of the echoed `config.toml`.
    pub config_hash: String,
    pub wall_clock_s: f64,
    pub version: String,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// The scenario as run, after overrides.
    pub config: ScenarioFile,
    pub times: Vec<f64>,
    pub series: Vec<NamedSeries>,
    /// Per-point standard errors, trajectory runs only.
    pub std_err: Option<Vec<NamedSeries>>,
    pub fit: Option<FitOutcome>,
    pub metadata: RunMetadata,
}

impl RunOutput {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn std_err_of(&self, name: &str) -> Option<&[f64]> {
        self.std_err.as_ref()?.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn fit_result(&self) -> Option<&FitResult> {
        self.fit.as_ref()?.result.as_ref().ok()
    }
}

struct Model {
    layout: Arc<SpaceLayout>,
    h: TimeDependentHamiltonian,
    channels: Vec<CollapseChannel>,
    observables: Vec<Observable>,
    /// Pure states with equal weights; one entry for a pure start.
    initial: Vec<PureState>,
}

/// Lifts a vector on the qutrit factors to the full space with empty cavities.
fn with_vacuum(layout: &Arc<SpaceLayout>, v: &nalgebra::DVector<C64>) -> Result<PureState> {
    let basis = spin_basis_states(layout)?;
    let d = layout.total_dim();
    let mut data = vec![C64::new(0.0, 0.0); d];
    for (b, c) in basis.iter().zip(v.iter()) {
        let i = b.data().iter().position(|z| z.re == 1.0).expect("basis state has a unit entry");
        data[i] = *c;
    }
    PureState::new(layout.clone(), data)
}

fn initial_states(file: &ScenarioFile, layout: &Arc<SpaceLayout>, ground: PureState) -> Result<Vec<PureState>> {
    Ok(match &file.initial_state {
        InitialState::GroundState => vec![ground],
        InitialState::MaximallyMixed => spin_basis_states(layout)?,
        InitialState::BasisState { label } => vec![PureState::from_label(layout.clone(), label)?],
        InitialState::AkltState | InitialState::AkltMixture => {
            let n = file.chain.as_ref().map(|c| c.n_sites).ok_or_else(|| Error::Config("AKLT states need a chain".into()))?;
            let sub = aklt_subspace(n)?;
            if file.initial_state == InitialState::AkltState {
                vec![with_vacuum(layout, &sub.state_sz_plus_one()?)?]
            } else {
                sub.basis.iter().map(|v| with_vacuum(layout, v)).collect::<Result<_>>()?
            }
        }
    })
}

fn build_model(file: &ScenarioFile) -> Result<Model> {
    if let Some(chain) = &file.chain {
        let cfg = chain.config()?;
        let layout = cfg.layout()?;
        let ground = PureState::basis(layout.clone(), 0)?;
        Ok(Model {
            h: build_full_hamiltonian(&cfg, &layout)?,
            channels: build_collapse_channels(&cfg, &layout)?,
            observables: build_observable_set(&layout, cfg.n_sites)?,
            initial: initial_states(file, &layout, ground)?,
            layout,
        })
    } else {
        let bell = file.bell.as_ref().ok_or_else(|| Error::Config("give exactly one of [chain] or [bell]".into()))?;
        let s = build_qubit_bell_scenario(&bell.params())?;
        let n_op = cavity_number(cavity_factor(2, 0), &s.layout)?;
        let observables = vec![
            Observable::new("P_phi_minus", s.target.clone(), ObservableKind::Population),
            Observable::new(photon_number_name(0), n_op, ObservableKind::PhotonNumber),
        ];
        Ok(Model {
            initial: initial_states(file, &s.layout, s.initial.clone())?,
            layout: s.layout,
            h: s.hamiltonian,
            channels: s.channels,
            observables,
        })
    }
}

fn select_observables(file: &ScenarioFile, all: Vec<Observable>) -> Result<Vec<Observable>> {
    let mut wanted = file.outputs.observables.clone();
    if wanted.is_empty() {
        return Ok(all);
    }
    if let Some(f) = &file.fit {
        if !wanted.contains(&f.observable) {
            wanted.push(f.observable.clone());
        }
    }
    let names: Vec<String> = all.iter().map(|o| o.name.clone()).collect();
    let mut out = Vec::new();
    for w in &wanted {
        match all.iter().find(|o| &o.name == w) {
            Some(o) => out.push(o.clone()),
            None => return Err(Error::Config(format!("unknown observable `{w}`; available: {}", names.join(", ")))),
        }
    }
    Ok(out)
}

pub(crate) fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one scenario in memory.
pub fn run_scenario(file: &ScenarioFile) -> Result<RunOutput> {
    let started = Instant::now();
    file.validate()?;
    let echo = file.to_toml()?;
    let model = build_model(file)?;
    let observables = select_observables(file, model.observables)?;
    let grid = file.grid.times()?;
    let dim = model.layout.total_dim();
    let integrator = file.solver.integrator();

    let (series, std_err, mut metadata) = match file.solver.kind {
        SolverKind::MasterEquation => {
            if dim > file.solver.dim_ceiling {
                return Err(Error::SolverRefused(format!(
                    "Hilbert dimension {dim} exceeds the master-equation ceiling {}; use the trajectory solver \
                     ([solver] kind = \"trajectories\", or --trajectories N)",
                    file.solver.dim_ceiling
                )));
            }
            let rho0 = DensityMatrix::mixture(&model.initial)?;
            let r = evolve(&rho0, &model.h, &model.channels, &grid, &integrator, &observables)?;
            let meta = RunMetadata {
                solver: SolverKind::MasterEquation,
                hilbert_dim: dim,
                integrator,
                stats: r.metadata.stats,
                n_trajectories: None,
                seed: None,
                jump_counts: None,
                max_trace_error: Some(r.metadata.max_trace_error),
                diagnostics: r.metadata.diagnostics,
                config_hash: String::new(),
                wall_clock_s: 0.0,
                version: String::new(),
            };
            (r.observables, None, meta)
        }
        SolverKind::Trajectories => {
            let settings = file.solver.trajectory_settings();
            let initial = if model.initial.len() == 1 {
                InitialCondition::Pure(model.initial.into_iter().next().expect("one state"))
            } else {
                InitialCondition::uniform(model.initial)
            };
            let r = run_ensemble(&initial, &model.h, &model.channels, &grid, &settings, &observables)?;
            let meta = RunMetadata {
                solver: SolverKind::Trajectories,
                hilbert_dim: dim,
                integrator,
                stats: r.stats,
                n_trajectories: Some(r.n_trajectories),
                seed: Some(r.master_seed),
                jump_counts: Some(r.channel_labels.iter().cloned().zip(r.channel_jumps.iter().copied()).collect()),
                max_trace_error: None,
                diagnostics: vec![],
                config_hash: String::new(),
                wall_clock_s: 0.0,
                version: String::new(),
            };
            (r.mean, Some(r.std_err), meta)
        }
    };

    let fit = file.fit.as_ref().map(|f| {
        let values = &series.iter().find(|s| s.name == f.observable).expect("fit observable is recorded").values;
        let window = FitWindow { start_ns: f.start.0, end_ns: f.end.map(|t| t.0) };
        let result = match f.model {
            FitModel::Convergence => fit_exponential(&grid, values, window),
            FitModel::Dephasing => extract_dephasing_rate(&grid, values, window),
        };
        FitOutcome { observable: f.observable.clone(), model: f.model, result }
    });

    metadata.config_hash = config_hash(&echo);
    metadata.version = env!("CARGO_PKG_VERSION").to_string();
    metadata.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(RunOutput { config: file.clone(), times: grid, series, std_err, fit, metadata })
}

fn write_table(path: &Path, times: &[f64], columns: &[NamedSeries]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["time_ns".to_string()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(io)?;
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(columns.iter().map(|c| c.values[i].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn fit_json(fit: &FitOutcome) -> serde_json::Value {
    match &fit.result {
        Ok(r) => {
            let [ea, eb, ec] = r.std_errors();
            json!({
                "observable": fit.observable,
                "model": fit.model,
                "A": r.a, "A_err": ea,
                "b_per_ns": r.b, "b_err": eb,
                "C": r.c, "C_err": ec,
                "convergence_time_ns": r.convergence_time_ns(),
                "convergence_time_err_ns": r.convergence_time_err_ns(),
                "window_ns": [r.fit_window.0, r.fit_window.1],
                "residual_rms": r.residual_rms,
                "n_points": r.n_points,
                "iterations": r.iterations,
                "covariance": r.covariance,
            })
        }
        Err(e) => json!({ "observable": fit.observable, "model": fit.model, "error": e.to_string() }),
    }
}

/// Writes `timeseries.csv`, `timeseries_stderr.csv` (trajectory runs),
/// `summary.json` and `config.toml` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_table(&dir.join("timeseries.csv"), &out.times, &out.series)?;
    if let Some(se) = &out.std_err {
        write_table(&dir.join("timeseries_stderr.csv"), &out.times, se)?;
    }
    let echo = out.config.to_toml()?;
    fs::write(dir.join("config.toml"), &echo)?;
    let finals: serde_json::Map<String, serde_json::Value> =
        out.series.iter().map(|s| (s.name.clone(), json!(s.values.last().copied()))).collect();
    let summary = json!({
        "name": out.config.name,
        "config": out.config,
        "metadata": out.metadata,
        "seed": out.metadata.seed,
        "fit": out.fit.as_ref().map(fit_json),
        "final_values": finals,
        "wall_clock_s": out.metadata.wall_clock_s,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}

/// Reads a time-series table written by [`write_outputs`]: the column names
/// after `time_ns`, the times, and one vector per column.
pub fn read_timeseries(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<Vec<f64>>)> {
    let parse_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(parse_err)?;
    let header: Vec<String> = r.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("time_ns") {
        return Err(Error::Parse(format!("{}: first column must be time_ns", path.display())));
    }
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); header.len() - 1];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2)))?;
            if k == 0 {
                times.push(v);
            } else {
                cols[k - 1].push(v);
            }
        }
    }
    Ok((header[1..].to_vec(), times, cols))
}

#[cfg(test)]
mod tests {
    use super::super::{preset, GridSection, Time};
    use super::*;

    fn short(name: &str) -> ScenarioFile {
        let mut f = preset(name).unwrap();
        f.grid = GridSection { t_end: Time(400.0), n_points: 21 };
        f.fit = None;
        f
    }

    #[test]
    fn aklt_start_is_inside_the_subspace() {
        let mut f = short("fig4_N3_aklt");
        f.grid = GridSection { t_end: Time(1.0), n_points: 2 };
        let out = run_scenario(&f).unwrap();
        assert!((out.series("P_AKLT").unwrap()[0] - 1.0).abs() < 1e-12);
        f.initial_state = InitialState::AkltMixture;
        let out = run_scenario(&f).unwrap();
        assert!((out.series("P_AKLT").unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_pair_starts_at_four_ninths() {
        let out = run_scenario(&short("fig3")).unwrap();
        assert!((out.series("P_AKLT").unwrap()[0] - 4.0 / 9.0).abs() < 1e-12);
        assert!((out.series("P_S2").unwrap()[0] - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(out.metadata.config_hash.len(), 64);
        assert!(out.std_err.is_none());
    }

    #[test]
    fn refuses_large_master_equation() {
        let mut f = short("fig4_N4");
        f.solver = super::super::SolverSection::master_equation();
        match run_scenario(&f) {
            Err(Error::SolverRefused(msg)) => assert!(msg.contains("trajectories"), "{msg}"),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn output_selection() {
        let mut f = short("fig3");
        f.outputs.observables = vec!["n_cav0".into()];
        f.fit = Some(Default::default());
        let out = run_scenario(&f).unwrap();
        let names: Vec<_> = out.series.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["n_cav0", "P_AKLT"]);
        f.outputs.observables = vec!["nope".into()];
        assert!(matches!(run_scenario(&f), Err(Error::Config(_))));
    }

    #[test]
    fn files_round_trip() {
        let mut f = short("bell_qubit");
        f.solver = super::super::SolverSection::trajectories(4, 1e-6, 1e-8);
        let out = run_scenario(&f).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&out, dir.path()).unwrap();
        let (names, times, cols) = read_timeseries(&dir.path().join("timeseries.csv")).unwrap();
        assert_eq!(names, ["P_phi_minus", "n_cav0"]);
        assert_eq!(times, out.times);
        assert_eq!(cols[0], out.series[0].values);
        assert!(dir.path().join("timeseries_stderr.csv").exists());
        let echoed = ScenarioFile::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(echoed, f);
        let again = run_scenario(&echoed).unwrap();
        assert_eq!(again.series, out.series);
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["seed"], json!(crate::scenario::DEFAULT_SEED));
        assert_eq!(summary["metadata"]["config_hash"], json!(out.metadata.config_hash));
    }
}
