use std::path::Path;
use std::str::FromStr;

use super::{mismatch_cavities, run_scenario, write_outputs, CavitySection, Freq, QutritSection, ScenarioFile, Time};
use crate::analysis::FitResult;
use crate::error::{Error, Result};
use crate::protocol::DriveVariant;

/// Parameters a sweep can vary. Scales are relative to the base scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    ChiScale,
    /// Replaces the cavities of a four-site chain by the mismatch set.
    MismatchPercent,
    /// Sets `T₁` on every qutrit, keeping the other times.
    T1Us,
    /// Sets the pure dephasing time on every qutrit, keeping `T₁`.
    TphiUs,
    NSites,
    PhotonCutoff,
    DriveVariant,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::ChiScale,
        SweepParam::MismatchPercent,
        SweepParam::T1Us,
        SweepParam::TphiUs,
        SweepParam::NSites,
        SweepParam::PhotonCutoff,
        SweepParam::DriveVariant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ChiScale => "chi_scale",
            SweepParam::MismatchPercent => "mismatch_percent",
            SweepParam::T1Us => "t1_us",
            SweepParam::TphiUs => "tphi_us",
            SweepParam::NSites => "n_sites",
            SweepParam::PhotonCutoff => "photon_cutoff",
            SweepParam::DriveVariant => "drive_variant",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown sweep parameter `{s}`; choose one of {}", names.join(", ")))
        })
    }
}

fn number(param: SweepParam, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{}: `{v}` is not a number", param.name())))
}

fn integer(param: SweepParam, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Config(format!("{}: `{v}` is not a non-negative integer", param.name())))
}

fn chain_mut(file: &mut ScenarioFile, param: SweepParam) -> Result<&mut super::ChainSection> {
    file.chain.as_mut().ok_or_else(|| Error::Config(format!("{} needs a [chain] scenario", param.name())))
}

fn qutrit_entries(chain: &mut super::ChainSection) -> &mut Vec<QutritSection> {
    if chain.qutrits.is_empty() {
        chain.qutrits.push(QutritSection::default());
    }
    &mut chain.qutrits
}

/// The scenario with `param` set to `value`, renamed `<name>_<param><value>`.
pub fn apply_sweep_value(base: &ScenarioFile, param: SweepParam, value: &str) -> Result<ScenarioFile> {
    let mut f = base.clone();
    f.name = format!("{}_{}{}", base.name, param.name(), value.trim());
    match param {
        SweepParam::ChiScale => {
            let s = number(param, value)?;
            let scale = |x: &mut Freq| x.0 *= s;
            if let Some(b) = &mut f.bell {
                scale(&mut b.chi_a);
                scale(&mut b.chi_b);
            } else {
                for c in &mut chain_mut(&mut f, param)?.cavities {
                    scale(&mut c.chi_ge);
                    scale(&mut c.chi_gf);
                    scale(&mut c.chi_ge_prime);
                    scale(&mut c.chi_gf_prime);
                }
            }
        }
        SweepParam::MismatchPercent => {
            let p = number(param, value)?;
            let chain = chain_mut(&mut f, param)?;
            if chain.n_sites != 4 {
                return Err(Error::Config("mismatch sets are defined for four-site chains".into()));
            }
            chain.cavities = mismatch_cavities(p).iter().map(CavitySection::from_params).collect();
            chain.omega_0 = None;
            chain.omega_n = None;
        }
        SweepParam::T1Us => {
            let t = Time(number(param, value)? * 1e3);
            for q in qutrit_entries(chain_mut(&mut f, param)?) {
                q.t1 = Some(t);
                q.t1_ge = None;
                q.t1_ef = None;
            }
        }
        SweepParam::TphiUs => {
            let t = Time(number(param, value)? * 1e3);
            for q in qutrit_entries(chain_mut(&mut f, param)?) {
                q.tphi = Some(t);
                q.t2 = None;
                q.t2_ge = None;
                q.t2_ef = None;
            }
        }
        SweepParam::NSites => {
            let n = integer(param, value)?;
            let chain = chain_mut(&mut f, param)?;
            let first = *chain.cavities.first().ok_or_else(|| Error::Config("chain has no cavity".into()))?;
            chain.n_sites = n;
            chain.cavities = vec![first; n.saturating_sub(1)];
            chain.omega_0 = None;
            chain.omega_n = None;
            if chain.qutrits.len() > 1 {
                chain.qutrits.truncate(1);
            }
        }
        SweepParam::PhotonCutoff => {
            let c = integer(param, value)?;
            match (&mut f.chain, &mut f.bell) {
                (Some(ch), _) => ch.photon_cutoff = c,
                (_, Some(b)) => b.photon_cutoff = c,
                _ => {}
            }
        }
        SweepParam::DriveVariant => {
            let v: DriveVariant = serde_json::from_value(serde_json::Value::String(value.trim().to_string()))
                .map_err(|_| Error::Config(format!("drive_variant must be gf_rotation or sx_rotation, got `{value}`")))?;
            chain_mut(&mut f, param)?.drive_variant = v;
        }
    }
    f.validate()?;
    Ok(f)
}

/// One line of a sweep table.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: String,
    pub run: String,
    /// The fit, or the error that stopped the run or the fit.
    pub outcome: std::result::Result<FitResult, String>,
}

/// Runs `base` once per value. Failures are recorded in the row and the
/// sweep carries on. With `out`, every run is written to its own
/// subdirectory and the table to `sweep.csv`.
pub fn sweep(
    base: &ScenarioFile,
    param: SweepParam,
    values: &[String],
    out: Option<&Path>,
    mut progress: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for v in values {
        let outcome = apply_sweep_value(base, param, v).and_then(|file| {
            let r = run_scenario(&file)?;
            if let Some(dir) = out {
                write_outputs(&r, &dir.join(&file.name))?;
            }
            Ok(r)
        });
        let run = format!("{}_{}{}", base.name, param.name(), v.trim());
        let outcome = match outcome {
            Ok(r) => match r.fit {
                Some(f) => f.result.map_err(|e| format!("fit: {e}")),
                None => Err("scenario has no [fit] section".to_string()),
            },
            Err(e) => Err(e.to_string()),
        };
        let row = SweepRow { value: v.trim().to_string(), run, outcome };
        progress(&row);
        rows.push(row);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_sweep_table(&dir.join("sweep.csv"), param, &rows)?;
    }
    Ok(rows)
}

pub fn write_sweep_table(path: &Path, param: SweepParam, rows: &[SweepRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        param.name(),
        "run",
        "C",
        "C_err",
        "b_per_ns",
        "b_err",
        "convergence_time_ns",
        "convergence_time_err_ns",
        "error",
    ])
    .map_err(io)?;
    for r in rows {
        let mut rec = vec![r.value.clone(), r.run.clone()];
        match &r.outcome {
            Ok(fit) => {
                let [_, eb, ec] = fit.std_errors();
                for x in [fit.c, ec, fit.b, eb, fit.convergence_time_ns(), fit.convergence_time_err_ns()] {
                    rec.push(x.to_string());
                }
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
