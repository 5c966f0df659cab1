use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::SpaceLayout;
use crate::error::{Error, Result};

/// Converts a frequency quoted as `X MHz` in the `/2π` convention into rad/ns.
pub fn mhz_to_rad_per_ns(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e-3
}

pub fn rad_per_ns_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e-3)
}

/// Dispersive shifts and linewidth of one cavity, in rad/ns. Unprimed shifts
/// belong to the left qutrit of the pair, primed ones to the right qutrit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub chi_ge: f64,
    pub chi_gf: f64,
    pub chi_ge_prime: f64,
    pub chi_gf_prime: f64,
    pub kappa: f64,
}

impl CavityParams {
    /// From a table row `(χ_ge, χ_gf, χ'_ge, χ'_gf, κ)` in MHz (`/2π`).
    pub fn from_mhz(row: [f64; 5]) -> Self {
        CavityParams {
            chi_ge: mhz_to_rad_per_ns(row[0]),
            chi_gf: mhz_to_rad_per_ns(row[1]),
            chi_ge_prime: mhz_to_rad_per_ns(row[2]),
            chi_gf_prime: mhz_to_rad_per_ns(row[3]),
            kappa: mhz_to_rad_per_ns(row[4]),
        }
    }

    pub fn to_mhz(&self) -> [f64; 5] {
        [
            self.chi_ge,
            self.chi_gf,
            self.chi_ge_prime,
            self.chi_gf_prime,
            self.kappa,
        ]
        .map(rad_per_ns_to_mhz)
    }

    /// `χ_ef = χ_gf − χ_ge` for the left qutrit.
    pub fn chi_ef(&self) -> f64 {
        self.chi_gf - self.chi_ge
    }

    pub fn chi_ef_prime(&self) -> f64 {
        self.chi_gf_prime - self.chi_ge_prime
    }

    /// Rotating-frame probe frequency `(χ_gf + χ'_gf)/2`.
    pub fn probe_frequency(&self) -> f64 {
        0.5 * (self.chi_gf + self.chi_gf_prime)
    }

    /// All dispersive shifts multiplied by `factor`; κ untouched.
    pub fn scale_chi(&self, factor: f64) -> Self {
        CavityParams {
            chi_ge: self.chi_ge * factor,
            chi_gf: self.chi_gf * factor,
            chi_ge_prime: self.chi_ge_prime * factor,
            chi_gf_prime: self.chi_gf_prime * factor,
            kappa: self.kappa,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!(
                "cavity {index}: kappa must be positive"
            )));
        }
        for (name, v) in [
            ("chi_ge", self.chi_ge),
            ("chi_gf", self.chi_gf),
            ("chi_ge_prime", self.chi_ge_prime),
            ("chi_gf_prime", self.chi_gf_prime),
        ] {
            if v == 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "cavity {index}: {name} must be finite and nonzero"
                )));
            }
        }
        Ok(())
    }
}

/// Relaxation and coherence times of one qutrit, in ns. Infinite values are
/// allowed and switch the corresponding channel off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QutritCoherence {
    #[serde(with = "time_ns")]
    pub t1_ge: f64,
    #[serde(with = "time_ns")]
    pub t1_ef: f64,
    #[serde(with = "time_ns")]
    pub t2_ge: f64,
    #[serde(with = "time_ns")]
    pub t2_ef: f64,
}

impl QutritCoherence {
    pub fn ideal() -> Self {
        QutritCoherence {
            t1_ge: f64::INFINITY,
            t1_ef: f64::INFINITY,
            t2_ge: f64::INFINITY,
            t2_ef: f64::INFINITY,
        }
    }

    /// Same `T₁` and `T₂` on both transitions.
    pub fn uniform(t1: f64, t2: f64) -> Self {
        QutritCoherence {
            t1_ge: t1,
            t1_ef: t1,
            t2_ge: t2,
            t2_ef: t2,
        }
    }

    /// Pure dephasing rate `1/T_φ = 1/T₂ − 1/(2T₁)`. An infinite `T₂` means
    /// "no pure dephasing" rather than a negative rate.
    pub fn pure_dephasing_rate(t1: f64, t2: f64) -> Result<f64> {
        if t2.is_infinite() {
            return Ok(0.0);
        }
        let rate = 1.0 / t2 - 0.5 / t1;
        if rate < -1e-12 * (1.0 / t2) {
            return Err(Error::Config(format!(
                "T2 = {t2} ns exceeds 2*T1 = {} ns, which implies a negative pure dephasing rate",
                2.0 * t1
            )));
        }
        Ok(rate.max(0.0))
    }

    fn validate(&self, index: usize) -> Result<()> {
        for (name, v) in [
            ("t1_ge", self.t1_ge),
            ("t1_ef", self.t1_ef),
            ("t2_ge", self.t2_ge),
            ("t2_ef", self.t2_ef),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!(
                    "qutrit {index}: {name} must be positive"
                )));
            }
        }
        QutritCoherence::pure_dephasing_rate(self.t1_ge, self.t2_ge)
            .and(QutritCoherence::pure_dephasing_rate(self.t1_ef, self.t2_ef))
            .map_err(|e| Error::Config(format!("qutrit {index}: {e}")))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveVariant {
    /// Antisymmetric direct g↔f rotation on each pair.
    GfRotation,
    /// Antisymmetric spin-1 `S_x` rotation built from the g↔e and e↔f ladders.
    SxRotation,
}

/// Full physical scenario for a chain of qutrits with shared cavities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub cavities: Vec<CavityParams>,
    /// Zero-photon drive Rabi amplitude Ω⁰, rad/ns.
    pub omega_0: f64,
    /// Per-cavity n-photon drive Rabi amplitudes Ωⁿ_i, rad/ns.
    pub omega_n: Vec<f64>,
    /// Photon number `n` the n-photon drive and the probe are tuned to.
    pub n_drive: u32,
    pub photon_cutoff: usize,
    pub coherence: Vec<QutritCoherence>,
    pub drive_variant: DriveVariant,
}

impl ChainConfig {
    /// Uniform chain with the given cavity parameters everywhere and the
    /// default drive amplitudes `Ω⁰ = Σκ/(2(N−1))`, `Ωⁿ_i = κ_i`.
    pub fn uniform(n_sites: usize, cavity: CavityParams) -> Self {
        let cavities = vec![cavity; n_sites.saturating_sub(1)];
        let mut cfg = ChainConfig {
            n_sites,
            cavities,
            omega_0: 0.0,
            omega_n: vec![],
            n_drive: 2,
            photon_cutoff: 3,
            coherence: vec![QutritCoherence::uniform(500e3, 500e3); n_sites],
            drive_variant: DriveVariant::GfRotation,
        };
        cfg.reset_drive_amplitudes();
        cfg
    }

    /// Restores `Ω⁰ = Σ_i κ_i / (2(N−1))` and `Ωⁿ_i = κ_i`.
    pub fn reset_drive_amplitudes(&mut self) {
        let n_cav = self.cavities.len().max(1) as f64;
        self.omega_0 = self.cavities.iter().map(|c| c.kappa).sum::<f64>() / (2.0 * n_cav);
        self.omega_n = self.cavities.iter().map(|c| c.kappa).collect();
    }

    pub fn set_coherence(&mut self, c: QutritCoherence) {
        self.coherence = vec![c; self.n_sites];
    }

    /// Probe amplitude `ε_C^i = κ_i √n / 2`.
    pub fn probe_amplitude(&self, cavity: usize) -> f64 {
        self.cavities[cavity].kappa * (self.n_drive as f64).sqrt() / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::Config(format!(
                "need at least two sites, got {}",
                self.n_sites
            )));
        }
        if self.cavities.len() != self.n_sites - 1 {
            return Err(Error::Config(format!(
                "{} sites need {} cavities, got {}",
                self.n_sites,
                self.n_sites - 1,
                self.cavities.len()
            )));
        }
        if self.omega_n.len() != self.cavities.len() {
            return Err(Error::Config("omega_n needs one entry per cavity".into()));
        }
        if self.coherence.len() != self.n_sites {
            return Err(Error::Config("coherence needs one entry per qutrit".into()));
        }
        if self.photon_cutoff < 1 || self.photon_cutoff < self.n_drive as usize {
            return Err(Error::Config(format!(
                "photon cutoff {} must be >= max(1, n_drive = {})",
                self.photon_cutoff, self.n_drive
            )));
        }
        if !self.omega_0.is_finite() || self.omega_n.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("drive amplitudes must be finite".into()));
        }
        for (i, c) in self.cavities.iter().enumerate() {
            c.validate(i)?;
        }
        for (i, q) in self.coherence.iter().enumerate() {
            q.validate(i)?;
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<Arc<SpaceLayout>> {
        Ok(Arc::new(SpaceLayout::chain(
            self.n_sites,
            self.photon_cutoff,
        )?))
    }

    /// Largest rate or frequency scale in the problem (rad/ns).
    pub fn fastest_scale(&self) -> f64 {
        let mut w = self.omega_0.abs();
        for (c, on) in self.cavities.iter().zip(&self.omega_n) {
            w = w
                .max(c.kappa)
                .max(on.abs())
                .max(c.chi_ge.abs())
                .max(c.chi_gf.abs())
                .max(c.chi_ge_prime.abs())
                .max(c.chi_gf_prime.abs());
        }
        w
    }
}

/// Serde helper writing infinite times as the string `"inf"` so they survive
/// JSON as well as TOML.
pub(crate) mod time_ns {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a time in ns or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
                    other => other
                        .parse()
                        .map_err(|_| E::custom(format!("bad time `{other}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
