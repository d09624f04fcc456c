//! Fiber channel model and named experiment presets.
//!
//! Presets live in a TOML file with one table per preset. The built-in file
//! is compiled in; [`PresetLibrary::from_file`] and [`PresetLibrary::from_dir`]
//! read replacements at run time, and [`PresetOverrides`] patches individual
//! fields using the same keys.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_range, Error, Result};
use crate::photon_stats::{normalized_dark_rate, NormalizedDark, ResolvingPower};

/// Preset file shipped with the crate.
pub const BUILTIN_PRESETS: &str = include_str!("../presets/presets.toml");

/// File name looked up inside a preset directory.
pub const PRESET_FILE_NAME: &str = "presets.toml";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub attenuation_db_per_km: f64,
    pub length_km: f64,
    pub receiver_efficiency: f64,
}

impl ChannelModel {
    pub fn new(attenuation_db_per_km: f64, length_km: f64, receiver_efficiency: f64) -> Result<Self> {
        check_range("attenuation_db_per_km", attenuation_db_per_km, 0.0, f64::MAX, ">= 0")?;
        check_range("length_km", length_km, 0.0, f64::MAX, ">= 0")?;
        check_range(
            "receiver_efficiency",
            receiver_efficiency,
            f64::MIN_POSITIVE,
            1.0,
            "in (0, 1]",
        )?;
        Ok(Self {
            attenuation_db_per_km,
            length_km,
            receiver_efficiency,
        })
    }

    pub fn at_length(&self, length_km: f64) -> Result<Self> {
        Self::new(self.attenuation_db_per_km, length_km, self.receiver_efficiency)
    }
}

/// Overall transmittance `eta_Bob * 10^(-alpha L / 10)`.
pub fn transmittance(channel: &ChannelModel) -> f64 {
    channel.receiver_efficiency
        * 10f64.powf(-channel.attenuation_db_per_km * channel.length_km / 10.0)
}

/// Fiber length at which `channel` (ignoring its own length) reaches `eta`.
pub fn length_for_transmittance(channel: &ChannelModel, eta: f64) -> Result<f64> {
    check_range(
        "eta",
        eta,
        f64::MIN_POSITIVE,
        channel.receiver_efficiency,
        "in (0, receiver_efficiency]",
    )?;
    if channel.attenuation_db_per_km == 0.0 {
        return Err(Error::domain(
            "attenuation_db_per_km",
            0.0,
            "> 0 for a length to be recoverable",
        ));
    }
    Ok(-10.0 * (eta / channel.receiver_efficiency).log10() / channel.attenuation_db_per_km)
}

/// How background clicks are specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkCounts {
    /// Click probability per pulse window.
    PerPulse(f64),
    /// Click rate in Hz, converted with the pulse rate.
    RateHz(f64),
}

impl DarkCounts {
    pub fn rate_hz(self, pulse_rate: f64) -> f64 {
        match self {
            DarkCounts::PerPulse(p) => p * pulse_rate,
            DarkCounts::RateHz(hz) => hz,
        }
    }

    pub fn per_pulse(self, pulse_rate: f64) -> f64 {
        match self {
            DarkCounts::PerPulse(p) => p,
            DarkCounts::RateHz(hz) => hz / pulse_rate,
        }
    }

    /// Dark counts per detected pulse at intensity `mu` and transmittance `eta`.
    pub fn normalized(self, pulse_rate: f64, mu: f64, eta: f64) -> Result<NormalizedDark> {
        normalized_dark_rate(self.rate_hz(pulse_rate), pulse_rate, mu, eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub description: String,
    pub channel: ChannelModel,
    pub e0: f64,
    pub dark: DarkCounts,
    pub pulse_rate: f64,
    pub mu: f64,
    pub resolving_power: ResolvingPower,
}

impl ExperimentPreset {
    pub fn validate(&self) -> Result<()> {
        ChannelModel::new(
            self.channel.attenuation_db_per_km,
            self.channel.length_km,
            self.channel.receiver_efficiency,
        )?;
        check_range("e0", self.e0, 0.0, 0.5, "in [0, 0.5]")?;
        match self.dark {
            DarkCounts::PerPulse(p) => check_range("background_per_pulse", p, 0.0, 1.0, "in [0, 1]")?,
            DarkCounts::RateHz(hz) => check_range("dark_rate_hz", hz, 0.0, f64::MAX, ">= 0")?,
        };
        check_positive("pulse_rate", self.pulse_rate)?;
        check_positive("mu", self.mu)?;
        if self.resolving_power == ResolvingPower::Photons(0) {
            return Err(Error::domain("resolving_power", 0.0, ">= 1"));
        }
        Ok(())
    }

    /// Transmittance at `length_km` with this preset's fiber and receiver.
    pub fn eta_at(&self, length_km: f64) -> Result<f64> {
        Ok(transmittance(&self.channel.at_length(length_km)?))
    }

    pub fn apply_overrides(&self, o: &PresetOverrides) -> Result<Self> {
        let mut p = self.clone();
        if let Some(v) = o.attenuation_db_per_km {
            p.channel.attenuation_db_per_km = v;
        }
        if let Some(v) = o.receiver_efficiency {
            p.channel.receiver_efficiency = v;
        }
        if let Some(v) = o.length_km {
            p.channel.length_km = v;
        }
        if let Some(v) = o.e0 {
            p.e0 = v;
        }
        match (o.background_per_pulse, o.dark_rate_hz) {
            (Some(_), Some(_)) => {
                return Err(Error::PresetFormat(
                    "set either background_per_pulse or dark_rate_hz, not both".into(),
                ))
            }
            (Some(v), None) => p.dark = DarkCounts::PerPulse(v),
            (None, Some(v)) => p.dark = DarkCounts::RateHz(v),
            (None, None) => {}
        }
        if let Some(v) = o.pulse_rate {
            p.pulse_rate = v;
        }
        if let Some(v) = o.mu {
            p.mu = v;
        }
        if let Some(v) = &o.resolving_power {
            p.resolving_power = v.to_resolving_power()?;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResolvingPowerSpec {
    Photons(u32),
    Keyword(String),
}

impl ResolvingPowerSpec {
    fn to_resolving_power(&self) -> Result<ResolvingPower> {
        match self {
            ResolvingPowerSpec::Photons(n) => ResolvingPower::new(*n),
            ResolvingPowerSpec::Keyword(k) if k == "unbounded" => Ok(ResolvingPower::Unbounded),
            ResolvingPowerSpec::Keyword(k) => Err(Error::PresetFormat(format!(
                "resolving_power must be a positive integer or \"unbounded\", got {k:?}"
            ))),
        }
    }
}

/// One table of a preset or override file. Every key is optional here; a
/// full preset must end up with all of them set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOverrides {
    pub description: Option<String>,
    pub attenuation_db_per_km: Option<f64>,
    pub receiver_efficiency: Option<f64>,
    pub length_km: Option<f64>,
    pub e0: Option<f64>,
    pub background_per_pulse: Option<f64>,
    pub dark_rate_hz: Option<f64>,
    pub pulse_rate: Option<f64>,
    pub mu: Option<f64>,
    pub resolving_power: Option<ResolvingPowerSpec>,
}

impl PresetOverrides {
    /// Parses an override file. A table named `preset` wins; otherwise the
    /// file must hold exactly one table.
    pub fn parse(text: &str, preset: &str) -> Result<Self> {
        let mut tables = parse_tables(text)?;
        if let Some(t) = tables.remove(preset) {
            return Ok(t);
        }
        match tables.len() {
            1 => Ok(tables.into_values().next().unwrap()),
            0 => Err(Error::PresetFormat("override file has no tables".into())),
            _ => Err(Error::PresetFormat(format!(
                "override file has several tables and none is named `{preset}`"
            ))),
        }
    }

    pub fn from_file(path: &Path, preset: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::PresetFormat(format!("{}: {e}", path.display())))?;
        Self::parse(&text, preset)
    }

    fn into_preset(self, name: &str) -> Result<ExperimentPreset> {
        let missing = |key: &str| Error::PresetFormat(format!("preset `{name}` is missing `{key}`"));
        let dark = match (self.background_per_pulse, self.dark_rate_hz) {
            (Some(p), None) => DarkCounts::PerPulse(p),
            (None, Some(hz)) => DarkCounts::RateHz(hz),
            (None, None) => return Err(missing("background_per_pulse")),
            (Some(_), Some(_)) => {
                return Err(Error::PresetFormat(format!(
                    "preset `{name}` sets both background_per_pulse and dark_rate_hz"
                )))
            }
        };
        let preset = ExperimentPreset {
            name: name.to_string(),
            description: self.description.unwrap_or_default(),
            channel: ChannelModel {
                attenuation_db_per_km: self
                    .attenuation_db_per_km
                    .ok_or_else(|| missing("attenuation_db_per_km"))?,
                length_km: self.length_km.unwrap_or(0.0),
                receiver_efficiency: self
                    .receiver_efficiency
                    .ok_or_else(|| missing("receiver_efficiency"))?,
            },
            e0: self.e0.ok_or_else(|| missing("e0"))?,
            dark,
            pulse_rate: self.pulse_rate.ok_or_else(|| missing("pulse_rate"))?,
            mu: self.mu.ok_or_else(|| missing("mu"))?,
            resolving_power: self
                .resolving_power
                .ok_or_else(|| missing("resolving_power"))?
                .to_resolving_power()?,
        };
        preset.validate()?;
        Ok(preset)
    }
}

fn parse_tables(text: &str) -> Result<BTreeMap<String, PresetOverrides>> {
    toml::from_str(text).map_err(|e| Error::PresetFormat(e.to_string()))
}

/// An immutable set of named presets.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetLibrary {
    presets: BTreeMap<String, ExperimentPreset>,
}

impl PresetLibrary {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PRESETS).expect("built-in preset file is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let presets = parse_tables(text)?
            .into_iter()
            .map(|(name, table)| Ok((name.clone(), table.into_preset(&name)?)))
            .collect::<Result<_>>()?;
        Ok(Self { presets })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::PresetFormat(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Reads `presets.toml` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        Self::from_file(&dir.join(PRESET_FILE_NAME))
    }

    pub fn names(&self) -> Vec<String> {
        self.presets.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<ExperimentPreset> {
        self.presets
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownPreset {
                name: name.to_string(),
                available: self.names(),
            })
    }
}

/// Looks up a built-in preset by name.
pub fn load_preset(name: &str) -> Result<ExperimentPreset> {
    PresetLibrary::builtin().get(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmittance_examples() {
        let ch = ChannelModel::new(0.21, 0.0, 0.045).unwrap();
        assert_eq!(transmittance(&ch), 0.045);
        let ch = ch.at_length(100.0).unwrap();
        assert!((transmittance(&ch) - 3.574_477_056_259_27e-4).abs() < 1e-16);
        let far = ch.at_length(1e6).unwrap();
        assert_eq!(transmittance(&far), 0.0);
    }

    #[test]
    fn channel_invariants() {
        assert!(ChannelModel::new(-0.1, 0.0, 0.5).is_err());
        assert!(ChannelModel::new(0.2, -1.0, 0.5).is_err());
        assert!(ChannelModel::new(0.2, 1.0, 0.0).is_err());
        assert!(ChannelModel::new(0.2, 1.0, 1.5).is_err());
    }

    #[test]
    fn inverse_length() {
        let ch = ChannelModel::new(0.21, 0.0, 0.045).unwrap();
        for l in [0.0, 1.0, 57.3, 140.2, 400.0] {
            let eta = transmittance(&ch.at_length(l).unwrap());
            assert!((length_for_transmittance(&ch, eta).unwrap() - l).abs() < 1e-9);
        }
        let lossless = ChannelModel::new(0.0, 0.0, 1.0).unwrap();
        assert!(length_for_transmittance(&lossless, 0.5).is_err());
        assert!(length_for_transmittance(&ch, 0.5).is_err());
    }

    #[test]
    fn builtin_presets() {
        let gys = load_preset("gys").unwrap();
        assert_eq!(gys.channel.attenuation_db_per_km, 0.21);
        assert_eq!(gys.channel.receiver_efficiency, 0.045);
        assert_eq!(gys.e0, 0.033);
        assert_eq!(gys.dark, DarkCounts::PerPulse(1.7e-6));

        let ideal = load_preset("ideal").unwrap();
        assert_eq!(ideal.channel.attenuation_db_per_km, 0.0);
        assert_eq!(ideal.channel.receiver_efficiency, 1.0);
        assert_eq!(ideal.e0, 0.0);
        assert_eq!(ideal.dark.per_pulse(ideal.pulse_rate), 0.0);
        assert_eq!(ideal.resolving_power, ResolvingPower::Unbounded);

        match load_preset("bogus") {
            Err(Error::UnknownPreset { available, .. }) => {
                assert!(available.contains(&"gys".to_string()));
                assert!(available.contains(&"ideal".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides() {
        let gys = load_preset("gys").unwrap();
        let o = PresetOverrides::parse("[x]\ne0 = 0.01\ndark_rate_hz = 0.05\n", "gys").unwrap();
        let p = gys.apply_overrides(&o).unwrap();
        assert_eq!(p.e0, 0.01);
        assert_eq!(p.dark, DarkCounts::RateHz(0.05));
        assert_eq!(p.channel, gys.channel);

        let bad = PresetOverrides::parse("[x]\ne0 = 0.9\n", "gys").unwrap();
        assert!(gys.apply_overrides(&bad).is_err());
        assert!(PresetOverrides::parse("[x]\nbogus = 1\n", "gys").is_err());
        let two = "[a]\ne0 = 0.01\n[gys]\ne0 = 0.02\n";
        assert_eq!(PresetOverrides::parse(two, "gys").unwrap().e0, Some(0.02));
        assert!(PresetOverrides::parse(two, "other").is_err());
    }

    #[test]
    fn dark_count_forms_agree() {
        let per_pulse = DarkCounts::PerPulse(1.7e-6);
        let hz = DarkCounts::RateHz(1.7e-6 * 2e6);
        let a = per_pulse.normalized(2e6, 0.1, 1e-3).unwrap();
        let b = hz.normalized(2e6, 0.1, 1e-3).unwrap();
        assert!((a.d - b.d).abs() < 1e-18);
        assert!((a.d - 1.7e-6 / 1e-4).abs() < 1e-15);
    }

    #[test]
    fn incomplete_preset_is_rejected() {
        assert!(PresetLibrary::parse("[p]\ne0 = 0.01\n").is_err());
        let text = "[p]\nattenuation_db_per_km = 0.2\nreceiver_efficiency = 0.1\ne0 = 0.01\n\
                    background_per_pulse = 1e-6\npulse_rate = 1e6\nmu = 0.1\nresolving_power = \"lots\"\n";
        assert!(PresetLibrary::parse(text).is_err());
    }
}
