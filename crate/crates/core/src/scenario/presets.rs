//! Compiled-in scenarios.

use super::{
    ChainSection, FitModel, FitSection, GridSection, InitialState, OutputsSection, QutritSection, ScenarioFile,
    SolverSection, SweepParam, Time,
};
use crate::error::{Error, Result};
use crate::protocol::{mhz_to_rad_per_ns, CavityParams, DriveVariant};

/// `(χ_ge, χ_gf, χ'_ge, χ'_gf, κ)` in MHz used for every chain unless stated.
pub const BASE_ROW_MHZ: [f64; 5] = [40.0, 79.2, 38.0, 76.0, 2.0];
/// Perfectly matched parameters the mismatch sets deviate from.
pub const TARGET_ROW_MHZ: [f64; 5] = [40.0, 80.0, 40.0, 80.0, 2.0];
/// The three cavities of a four-site chain at 10 % mismatch.
pub const MISMATCH_ROWS_MHZ: [[f64; 5]; 3] = [
    [43.64, 87.81, 39.67, 87.81, 1.93],
    [36.66, 79.83, 39.87, 79.83, 1.99],
    [41.52, 76.96, 42.79, 76.96, 1.94],
];

/// Trajectory tolerances for the four-site chain.
const MC_RTOL: f64 = 1e-6;
const MC_ATOL: f64 = 1e-8;
const MC_TRAJECTORIES: usize = 500;

const CHI_SCALES: [(&str, f64); 4] = [("0.25", 0.25), ("0.5", 0.5), ("1", 1.0), ("2", 2.0)];
const PERCENTS: [u32; 4] = [10, 20, 30, 40];

/// Cavities of a four-site chain with every deviation from the target row
/// scaled to `percent` (10 reproduces the stored rows).
pub fn mismatch_cavities(percent: f64) -> Vec<CavityParams> {
    let s = percent / 10.0;
    MISMATCH_ROWS_MHZ
        .iter()
        .map(|row| {
            let mut out = [0.0; 5];
            for k in 0..5 {
                out[k] = TARGET_ROW_MHZ[k] + s * (row[k] - TARGET_ROW_MHZ[k]);
            }
            CavityParams::from_mhz(out)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
}

/// A named sweep: a base preset, the swept parameter and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub base: &'static str,
    pub param: SweepParam,
    pub values: Vec<String>,
}

fn base() -> CavityParams {
    CavityParams::from_mhz(BASE_ROW_MHZ)
}

fn file(name: String, description: String, chain: ChainSection, initial: InitialState, t_end_us: f64) -> ScenarioFile {
    let n = chain.n_sites;
    let (solver, n_points) = if n >= 4 {
        (SolverSection::trajectories(MC_TRAJECTORIES, MC_RTOL, MC_ATOL), 201)
    } else {
        (SolverSection::master_equation(), 201)
    };
    ScenarioFile {
        name,
        description: Some(description),
        chain: Some(chain),
        bell: None,
        initial_state: initial,
        solver,
        grid: GridSection { t_end: Time(t_end_us * 1e3), n_points },
        outputs: OutputsSection::default(),
        fit: Some(FitSection::default()),
    }
}

/// Time span long enough for the protocol to settle from the ground state.
fn settle_time_us(n_sites: usize) -> f64 {
    match n_sites {
        2 => 10.0,
        3 => 15.0,
        _ => 50.0,
    }
}

fn fig4(n: usize, aklt: bool) -> ScenarioFile {
    let (suffix, init, what) = if aklt {
        ("_aklt", InitialState::AkltState, "an AKLT state")
    } else {
        ("", InitialState::GroundState, "|g...g>")
    };
    file(
        format!("fig4_N{n}{suffix}"),
        format!("{n}-site chain, base cavities, starting from {what}"),
        ChainSection::uniform(n, base()),
        init,
        settle_time_us(n),
    )
}

fn four_site(name: String, description: String, chain: ChainSection) -> ScenarioFile {
    file(name, description, chain, InitialState::GroundState, settle_time_us(4))
}

fn dephasing(n: usize, label: &str, scale: f64) -> ScenarioFile {
    let mut chain = ChainSection::uniform(n, base().scale_chi(scale));
    chain.omega_n = Some(vec![super::Freq(0.0); n - 1]);
    let mut f = file(
        format!("figS1_N{n}_chi{label}"),
        format!("{n}-site AKLT state under probe and zero-photon drive only, chi x {label}"),
        chain,
        InitialState::AkltState,
        10.0,
    );
    f.fit = Some(FitSection { model: FitModel::Dephasing, ..FitSection::default() });
    f
}

fn variant(n: usize, v: DriveVariant) -> ScenarioFile {
    let tag = match v {
        DriveVariant::GfRotation => "gf",
        DriveVariant::SxRotation => "sx",
    };
    let mut chain = ChainSection::uniform(n, base());
    chain.drive_variant = v;
    if n == 2 {
        file(
            format!("figS3_variant_{tag}"),
            format!("qutrit pair from the maximally mixed state, {tag} n-photon rotation"),
            chain,
            InitialState::MaximallyMixed,
            10.0,
        )
    } else {
        file(
            format!("figS3_N{n}_{tag}"),
            format!("{n}-site chain from |g...g>, {tag} n-photon rotation"),
            chain,
            InitialState::GroundState,
            settle_time_us(n),
        )
    }
}

fn bell_qubit() -> ScenarioFile {
    let k = mhz_to_rad_per_ns(2.0);
    ScenarioFile {
        name: "bell_qubit".into(),
        description: Some("two qubits sharing one cavity, stabilizing the singlet-like Bell state".into()),
        chain: None,
        bell: Some(super::BellSection {
            chi_a: super::Freq(mhz_to_rad_per_ns(40.0)),
            chi_b: super::Freq(mhz_to_rad_per_ns(40.0)),
            kappa: super::Freq(k),
            omega_0: None,
            omega_n: None,
            n_drive: 2,
            photon_cutoff: 3,
            t1: None,
        }),
        initial_state: InitialState::GroundState,
        solver: SolverSection::master_equation(),
        grid: GridSection { t_end: Time(6e3), n_points: 121 },
        outputs: OutputsSection::default(),
        fit: Some(FitSection { observable: "P_phi_minus".into(), start: Time(0.0), ..FitSection::default() }),
    }
}

/// Every compiled-in scenario, in display order.
pub fn preset_catalog() -> Vec<ScenarioFile> {
    let mut out = Vec::new();
    out.push(bell_qubit());

    let mut fig3 = file(
        "fig3".into(),
        "qutrit pair, base cavity, from the maximally mixed state".into(),
        ChainSection::uniform(2, base()),
        InitialState::MaximallyMixed,
        10.0,
    );
    out.push(fig3.clone());
    fig3.name = "figS2".into();
    fig3.description = Some("fig3 with photon numbers; compare --cutoff 3 against --cutoff 9".into());
    out.push(fig3);

    for n in 2..=4 {
        out.push(fig4(n, false));
        out.push(fig4(n, true));
    }
    for (label, s) in CHI_SCALES {
        out.push(four_site(
            format!("fig5a_chi{label}"),
            format!("4-site chain from |gggg>, dispersive shifts x {label}"),
            ChainSection::uniform(4, base().scale_chi(s)),
        ));
    }
    for p in PERCENTS {
        let mut chain = ChainSection::uniform(4, base());
        chain.cavities = mismatch_cavities(p as f64).iter().map(super::CavitySection::from_params).collect();
        out.push(four_site(
            format!("fig5b_mismatch{p}"),
            format!("4-site chain from |gggg>, cavity parameters {p}% off target"),
            chain,
        ));
    }
    for t in PERCENTS {
        let mut chain = ChainSection::uniform(4, base());
        chain.qutrits = vec![QutritSection::uniform(t as f64 * 1e3, f64::INFINITY)];
        out.push(four_site(format!("fig5c_t1_{t}"), format!("4-site chain, T1 = {t} us, no pure dephasing"), chain));
    }
    for t in PERCENTS {
        let mut chain = ChainSection::uniform(4, base());
        chain.qutrits = vec![QutritSection::with_tphi(f64::INFINITY, t as f64 * 1e3)];
        out.push(four_site(format!("fig5d_tphi_{t}"), format!("4-site chain, Tphi = {t} us, no relaxation"), chain));
    }
    let mut s1 = dephasing(3, "1", 1.0);
    s1.name = "figS1".into();
    out.push(s1);
    for n in [3, 4] {
        for (label, s) in CHI_SCALES {
            out.push(dephasing(n, label, s));
        }
    }
    out.push(variant(2, DriveVariant::GfRotation));
    out.push(variant(2, DriveVariant::SxRotation));
    out.push(variant(3, DriveVariant::GfRotation));
    out.push(variant(3, DriveVariant::SxRotation));
    out
}

pub fn preset(name: &str) -> Result<ScenarioFile> {
    preset_catalog().into_iter().find(|f| f.name == name).ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

pub fn sweep_presets() -> Vec<SweepPreset> {
    let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let scales = strs(&["0.25", "0.5", "1", "2"]);
    let tens = strs(&["10", "20", "30", "40"]);
    vec![
        SweepPreset {
            name: "fig5a",
            description: "4-site chain, dispersive shift scale",
            base: "fig5a_chi1",
            param: SweepParam::ChiScale,
            values: scales.clone(),
        },
        SweepPreset {
            name: "fig5b",
            description: "4-site chain, cavity parameter mismatch in percent",
            base: "fig5b_mismatch10",
            param: SweepParam::MismatchPercent,
            values: tens.clone(),
        },
        SweepPreset {
            name: "fig5c",
            description: "4-site chain, qutrit T1 in us",
            base: "fig5c_t1_10",
            param: SweepParam::T1Us,
            values: tens.clone(),
        },
        SweepPreset {
            name: "fig5d",
            description: "4-site chain, qutrit Tphi in us",
            base: "fig5d_tphi_10",
            param: SweepParam::TphiUs,
            values: tens,
        },
        SweepPreset {
            name: "figS1_N3",
            description: "3-site dephasing rate versus dispersive shift scale",
            base: "figS1_N3_chi1",
            param: SweepParam::ChiScale,
            values: scales.clone(),
        },
        SweepPreset {
            name: "figS1_N4",
            description: "4-site dephasing rate versus dispersive shift scale",
            base: "figS1_N4_chi1",
            param: SweepParam::ChiScale,
            values: scales,
        },
        SweepPreset {
            name: "figS3",
            description: "n-photon rotation variant on the qutrit pair",
            base: "figS3_variant_gf",
            param: SweepParam::DriveVariant,
            values: strs(&["gf_rotation", "sx_rotation"]),
        },
    ]
}

pub fn sweep_preset(name: &str) -> Option<SweepPreset> {
    sweep_presets().into_iter().find(|s| s.name == name)
}

impl PresetInfo {
    pub fn list() -> Vec<PresetInfo> {
        preset_catalog()
            .into_iter()
            .map(|f| PresetInfo { name: f.name, description: f.description.unwrap_or_default() })
            .collect()
    }
}
