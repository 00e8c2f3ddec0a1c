//! TOML configuration files. Unknown keys are rejected and type errors name
//! the offending field.

use std::path::Path;

use cwloop_core::dataset::SweepSpec;
use cwloop_core::gbt::Hyperparams;
use cwloop_core::plant::{PlantConfig, SettingsPolicy};
use cwloop_core::pso::SwarmConfig;
use cwloop_core::tariff::TariffSchedule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::format(path, "syntax", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let message = e.into_inner().message().to_string();
        Error::format(path, format!("field `{field}`"), message)
    })
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_toml(&text, path)
}

pub fn save_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_toml(value);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string_pretty(value).expect("configuration types serialize to TOML")
}

pub fn load_plant(path: &Path) -> Result<PlantConfig> {
    let p: PlantConfig = load_toml(path)?;
    p.validate()?;
    Ok(p)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let s: SweepSpec = load_toml(path)?;
    s.validate()?;
    Ok(s)
}

pub fn load_hyperparams(path: &Path) -> Result<Hyperparams> {
    let h: Hyperparams = load_toml(path)?;
    h.validate()?;
    Ok(h)
}

pub fn load_swarm(path: &Path) -> Result<SwarmConfig> {
    let s: SwarmConfig = load_toml(path)?;
    s.validate()?;
    Ok(s)
}

pub fn load_tariff(path: &Path) -> Result<TariffSchedule> {
    let t: TariffSchedule = load_toml(path)?;
    t.validate()?;
    Ok(t)
}

pub fn load_policy(path: &Path) -> Result<SettingsPolicy> {
    load_toml(path)
}

/// Setpoint tracking wet-bulb plus 7 °F within 65–85 °F on all eight fans.
pub fn default_policy() -> SettingsPolicy {
    SettingsPolicy::ApproachReset {
        approach_f: 7.0,
        min_setpoint_f: 65.0,
        max_setpoint_f: 85.0,
        n_fans: 8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let p = Path::new("mem.toml");
        let plant = PlantConfig::default();
        assert_eq!(parse_toml::<PlantConfig>(&to_toml(&plant), p).unwrap(), plant);
        let tariff = TariffSchedule::synthetic_example();
        assert_eq!(parse_toml::<TariffSchedule>(&to_toml(&tariff), p).unwrap(), tariff);
        let swarm = SwarmConfig::default();
        assert_eq!(parse_toml::<SwarmConfig>(&to_toml(&swarm), p).unwrap(), swarm);
        let spec = SweepSpec::standard(2023, 1);
        assert_eq!(parse_toml::<SweepSpec>(&to_toml(&spec), p).unwrap(), spec);
        let policy = default_policy();
        assert_eq!(parse_toml::<SettingsPolicy>(&to_toml(&policy), p).unwrap(), policy);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_toml::<SwarmConfig>("n_iterations = \"many\"", Path::new("s.toml")).unwrap_err();
        assert!(e.to_string().contains("field `n_iterations`"), "{e}");
        let e = parse_toml::<SwarmConfig>("bogus = 1", Path::new("s.toml")).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_toml::<SwarmConfig>("w = ", Path::new("s.toml")).unwrap_err();
        assert!(e.to_string().contains("s.toml:syntax"), "{e}");
        // partial files fill in defaults
        let s: SwarmConfig = parse_toml("seed = 9", Path::new("s.toml")).unwrap();
        assert_eq!(s, SwarmConfig { seed: 9, ..SwarmConfig::default() });
    }
}
