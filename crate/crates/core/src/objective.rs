//! The condenser-loop objective the optimizer minimizes: surrogate-predicted
//! chiller + tower fan + pump power (or its cost rate) at one load and
//! wet-bulb, as a function of supply setpoint and fan count.

use alloc::format;
use alloc::vec::Vec;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::plant::{tower_leaving_temp, PlantConfig};
use crate::pso::Score;
use crate::surrogate::SurrogateBundle;
use crate::tariff::TariffSchedule;
use crate::units::MIN_APPROACH_F;
use crate::{Error, Result};

/// Weight of the squared violation (°F²) in the infeasibility penalty.
pub const PENALTY_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// kW.
    Power,
    /// $/h at the given energy rate.
    Cost { energy_rate_per_kwh: f64 },
}

impl Mode {
    /// Cost mode at the energy rate the tariff charges at `at`.
    pub fn cost_at(tariff: &TariffSchedule, at: NaiveDateTime) -> Result<Mode> {
        Ok(Mode::Cost {
            energy_rate_per_kwh: tariff.energy_rate_at(at)?,
        })
    }

    pub fn multiplier(self) -> f64 {
        match self {
            Mode::Power => 1.0,
            Mode::Cost { energy_rate_per_kwh } => energy_rate_per_kwh,
        }
    }
}

/// Power breakdown at one candidate setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopPower {
    pub p_chiller_kw: f64,
    pub p_fan_kw: f64,
    pub p_pump_kw: f64,
    pub q_rej_tons: f64,
    /// Coldest supply temperature reachable at this setting.
    pub t_cws_floor_f: f64,
}

impl LoopPower {
    pub fn total_kw(&self) -> f64 {
        self.p_chiller_kw + self.p_fan_kw + self.p_pump_kw
    }
}

#[derive(Debug, Clone)]
pub struct LoopObjective<'a> {
    bundle: &'a SurrogateBundle,
    plant: &'a PlantConfig,
    pub q_load: f64,
    pub t_wb: f64,
    pub mode: Mode,
    /// Any penalized value exceeds this; it bounds every feasible value.
    ceiling_kw: f64,
}

impl<'a> LoopObjective<'a> {
    /// Fails when a fan count in `strata` has no tower model.
    pub fn new(
        bundle: &'a SurrogateBundle,
        plant: &'a PlantConfig,
        q_load: f64,
        t_wb: f64,
        mode: Mode,
        strata: &[u8],
    ) -> Result<Self> {
        for &n in strata {
            bundle.tower_model(n)?;
        }
        if !(q_load.is_finite() && t_wb.is_finite()) {
            return Err(Error::Config(format!("non-finite conditions ({q_load}, {t_wb})")));
        }
        if let Mode::Cost { energy_rate_per_kwh } = mode {
            if !(energy_rate_per_kwh.is_finite() && energy_rate_per_kwh >= 0.0) {
                return Err(Error::Config(format!("energy rate {energy_rate_per_kwh}")));
            }
        }
        Ok(Self {
            bundle,
            plant,
            q_load,
            t_wb,
            mode,
            ceiling_kw: bundle.max_power_bound() + pump_kw(plant),
        })
    }

    /// Chained surrogate prediction plus constant pump power.
    pub fn power(&self, t_cws: f64, n_fans: u8) -> Result<LoopPower> {
        let p = self.bundle.predict(self.t_wb, self.q_load, t_cws, n_fans)?;
        let floor = (self.t_wb + MIN_APPROACH_F).max(tower_leaving_temp(
            self.plant,
            self.t_wb,
            p.q_rej_tons,
            n_fans,
        ));
        Ok(LoopPower {
            p_chiller_kw: p.p_chiller_kw,
            p_fan_kw: p.p_fan_kw,
            p_pump_kw: pump_kw(self.plant),
            q_rej_tons: p.q_rej_tons,
            t_cws_floor_f: floor,
        })
    }

    /// Objective value. Below the reachable floor (the approach limit, or
    /// what the tower can do with `n_fans` at full speed) the value is the
    /// feasible ceiling plus `10 · violation²`, so any infeasible point
    /// scores worse than every feasible one.
    pub fn evaluate(&self, t_cws: f64, n_fans: u8) -> Result<Score> {
        let p = self.power(t_cws, n_fans)?;
        let k = self.mode.multiplier();
        let violation = p.t_cws_floor_f - t_cws;
        if violation > 0.0 {
            let value = self.ceiling_kw.max(p.total_kw()) + PENALTY_WEIGHT * violation * violation;
            Ok(Score {
                value: k * value,
                penalty: k * (value - p.total_kw()).max(f64::MIN_POSITIVE),
            })
        } else {
            Ok(Score {
                value: k * p.total_kw(),
                penalty: 0.0,
            })
        }
    }

    /// `evaluate` for strata checked at construction.
    pub fn score(&self, t_cws: f64, n_fans: u8) -> Score {
        self.evaluate(t_cws, n_fans)
            .expect("fan stratum checked when the objective was built")
    }

    pub fn strata(&self) -> Vec<u8> {
        self.bundle.tower_power_models.keys().copied().collect()
    }
}

fn pump_kw(plant: &PlantConfig) -> f64 {
    plant.pump_power_kw + plant.standby_power_kw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{run_sweep, ConditionsSource, SweepSpec};
    use crate::gbt::Hyperparams;
    use crate::surrogate::train_bundle;
    use crate::units::FAN_STAGES;
    use crate::weather::synthetic_year;
    use chrono::NaiveDate;

    fn bundle() -> SurrogateBundle {
        let conditions: Vec<_> = synthetic_year(2023, 2)
            .into_iter()
            .filter(|c| c.q_load_tons > 50.0)
            .step_by(17)
            .take(80)
            .collect();
        let spec = SweepSpec {
            t_cws_values: alloc::vec![65.0, 70.0, 75.0, 80.0, 85.0],
            n_fans_values: FAN_STAGES.to_vec(),
            months: (1..=12).collect(),
            source: ConditionsSource::Synthetic { year: 2023, seed: 2 },
            setpoint_jitter_f: 0.0,
            jitter_seed: 0,
        };
        let data = run_sweep(&PlantConfig::default(), &spec, &conditions).unwrap();
        let hp = Hyperparams {
            n_trees: 40,
            learning_rate: 0.2,
            ..Hyperparams::default()
        };
        train_bundle(&data, &hp, NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()).unwrap()
    }

    #[test]
    fn composition_and_penalty() {
        let b = bundle();
        let plant = PlantConfig::default();
        let obj = LoopObjective::new(&b, &plant, 1500.0, 70.0, Mode::Power, &FAN_STAGES).unwrap();
        let mut feasible_max = f64::NEG_INFINITY;
        for n in FAN_STAGES {
            let t = 84.0;
            let s = obj.evaluate(t, n).unwrap();
            assert_eq!(s.penalty, 0.0);
            let q_rej = b.heat_rejection_model.predict(&[1500.0, t]).unwrap();
            let direct = b.chiller_power_model.predict(&[t, 1500.0]).unwrap().max(0.0)
                + b.tower_power_models[&n].predict(&crate::surrogate::tower_inputs(70.0, q_rej, t)).unwrap().max(0.0)
                + plant.pump_power_kw;
            assert!((s.value - direct).abs() < 1e-9);
            for k in 0..=300 {
                let s = obj.score(60.0 + 0.1 * f64::from(k), n);
                if s.penalty == 0.0 {
                    feasible_max = feasible_max.max(s.value);
                }
            }
        }
        for n in FAN_STAGES {
            let s = obj.evaluate(70.0, n).unwrap();
            assert!(s.penalty > 0.0);
            assert!(s.value > feasible_max);
        }
    }

    #[test]
    fn pump_power_shifts_but_keeps_argmin() {
        let b = bundle();
        let plant = PlantConfig::default();
        let heavy = PlantConfig {
            pump_power_kw: 400.0,
            ..PlantConfig::default()
        };
        let a = LoopObjective::new(&b, &plant, 1200.0, 66.0, Mode::Power, &FAN_STAGES).unwrap();
        let h = LoopObjective::new(&b, &heavy, 1200.0, 66.0, Mode::Power, &FAN_STAGES).unwrap();
        let (ca, _) = crate::pso::grid_oracle(|t, n| a.score(t, n), (60.0, 90.0), 0.5, &FAN_STAGES).unwrap();
        let (ch, _) = crate::pso::grid_oracle(|t, n| h.score(t, n), (60.0, 90.0), 0.5, &FAN_STAGES).unwrap();
        assert_eq!((ca.t_cws, ca.n_fans), (ch.t_cws, ch.n_fans));
        assert!((ch.objective_value - ca.objective_value - 290.0).abs() < 1e-9);
    }

    #[test]
    fn cost_mode_scales_and_unknown_stratum_fails() {
        let b = bundle();
        let plant = PlantConfig::default();
        let p = LoopObjective::new(&b, &plant, 1000.0, 65.0, Mode::Power, &FAN_STAGES).unwrap();
        let c = LoopObjective::new(&b, &plant, 1000.0, 65.0, Mode::Cost { energy_rate_per_kwh: 0.2 }, &FAN_STAGES).unwrap();
        assert!((c.score(75.0, 4).value - 0.2 * p.score(75.0, 4).value).abs() < 1e-9);
        assert!(matches!(
            LoopObjective::new(&b, &plant, 1000.0, 65.0, Mode::Power, &[3]),
            Err(Error::Config(_))
        ));
    }
}
