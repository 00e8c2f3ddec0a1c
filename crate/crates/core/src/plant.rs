//! Physics reference simulator of the condenser water loop: electric
//! chillers, a multi-cell mechanical draft cooling tower and constant-volume
//! condenser water pumps.
//!
//! The chiller follows the DOE-2 electric chiller formulation: available
//! capacity and full-load efficiency are biquadratic in the chilled and
//! condenser water supply temperatures, and part-load efficiency is a
//! quadratic in part-load ratio. Refrigerant-side quantities never appear;
//! the loop is closed through the condenser energy balance
//! `Q_rej = Q_load + P_chiller / 3.517`.
//!
//! The tower is an effectiveness-style approach model calibrated so that the
//! design point (design wet-bulb, design range, every fan at full speed)
//! reproduces the design approach exactly.
//!
//! All default coefficients are synthetic; they describe a plausible plant
//! of the right size, not a measured one.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curves::{Biquadratic, Cubic, Quadratic};
use crate::math;
use crate::units::{
    is_fan_stage, BTU_PER_HR_PER_TON, KW_PER_TON, MIN_APPROACH_F, WATER_SIDE_FACTOR,
};
use crate::weather::{LoadProfile, WeatherSeries};
use crate::{Error, Result};

pub const PLANT_SCHEMA_VERSION: u32 = 1;

/// Valid condenser water supply range for the chiller curves.
pub const CHILLER_T_CWS_RANGE_F: (f64, f64) = (55.0, 95.0);

const MAX_SOLVER_ITERATIONS: usize = 100;
const SOLVER_TOLERANCE_F: f64 = 0.01;
const SPEED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub schema_version: u32,
    pub n_chillers: u32,
    pub chiller_rated_capacity_tons: f64,
    pub chiller_rated_cop: f64,
    /// A single chiller carries the load up to this fraction of its rated
    /// capacity; above it another chiller is staged on and load is split
    /// evenly.
    pub chiller_staging_fraction: f64,
    pub n_tower_cells: u8,
    pub cell_rated_fan_power_kw: f64,
    pub cell_rated_flow_gpm: f64,
    pub pump_power_kw: f64,
    /// Auxiliary load drawn whenever the loop is simulated, even with the
    /// chillers off.
    pub standby_power_kw: f64,
    pub cw_flow_gpm: f64,
    pub chw_supply_temp_f: f64,
    pub design_wet_bulb_f: f64,
    pub design_approach_f: f64,
    pub design_range_f: f64,
    pub curves: PlantCurves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantCurves {
    /// CAP-FT: available capacity fraction vs (t_chws, t_cws).
    pub chiller_capacity: Biquadratic,
    /// EIR-FT: full-load electric input ratio multiplier vs (t_chws, t_cws).
    pub chiller_eir: Biquadratic,
    /// EIR-FPLR: electric input ratio multiplier vs part-load ratio.
    pub chiller_eir_plr: Quadratic,
    /// Fan power fraction vs speed fraction, `fan(1) = 1`.
    pub fan: Cubic,
    pub tower: TowerCoefficients,
}

/// Coefficients of the approach model
///
/// `approach = floor + (design_approach − floor)
///             · (range / design_range)^range_exponent
///             · airflow^(−airflow_exponent)
///             · exp(−wet_bulb_coefficient · (t_wb − design_wet_bulb))`
///
/// where `airflow = natural + (1 − natural) · (n_fans / n_cells) · speed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerCoefficients {
    pub range_exponent: f64,
    pub airflow_exponent: f64,
    pub wet_bulb_coefficient: f64,
    pub natural_draft_fraction: f64,
    pub min_fan_speed: f64,
}

impl Default for PlantCurves {
    fn default() -> Self {
        Self {
            chiller_capacity: Biquadratic::centered(
                44.0,
                85.0,
                [1.0, 0.015, -0.0001, -0.006, -0.00002, 0.0],
            ),
            chiller_eir: Biquadratic::centered(
                44.0,
                85.0,
                [1.0, -0.012, 0.0001, 0.011, 0.00012, -0.0001],
            ),
            chiller_eir_plr: Quadratic {
                coefficients: [0.2, 0.25, 0.55],
            },
            fan: Cubic {
                coefficients: [0.0, 0.04, -0.07, 1.03],
            },
            tower: TowerCoefficients {
                range_exponent: 1.0,
                airflow_exponent: 0.7,
                wet_bulb_coefficient: 0.025,
                natural_draft_fraction: 0.1,
                min_fan_speed: 0.2,
            },
        }
    }
}

impl Default for PlantConfig {
    /// Two 1350-ton chillers, an 8-cell tower, 44 °F chilled water. Flow,
    /// fan and pump ratings are synthetic.
    fn default() -> Self {
        Self {
            schema_version: PLANT_SCHEMA_VERSION,
            n_chillers: 2,
            chiller_rated_capacity_tons: 1350.0,
            chiller_rated_cop: 6.0,
            chiller_staging_fraction: 0.55,
            n_tower_cells: 8,
            cell_rated_fan_power_kw: 30.0,
            cell_rated_flow_gpm: 1100.0,
            pump_power_kw: 110.0,
            standby_power_kw: 0.0,
            cw_flow_gpm: 8100.0,
            chw_supply_temp_f: 44.0,
            design_wet_bulb_f: 76.0,
            design_approach_f: 7.0,
            design_range_f: 10.0,
            curves: PlantCurves::default(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.schema_version != PLANT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported plant schema_version {} (expected {PLANT_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_chillers == 0 {
            return fail("n_chillers must be at least 1");
        }
        let positive = [
            ("chiller_rated_capacity_tons", self.chiller_rated_capacity_tons),
            ("cell_rated_fan_power_kw", self.cell_rated_fan_power_kw),
            ("cell_rated_flow_gpm", self.cell_rated_flow_gpm),
            ("pump_power_kw", self.pump_power_kw),
            ("cw_flow_gpm", self.cw_flow_gpm),
            ("design_range_f", self.design_range_f),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.standby_power_kw.is_finite() && self.standby_power_kw >= 0.0) {
            return fail("standby_power_kw must be non-negative");
        }
        if !(self.chiller_rated_cop > 1.0 && self.chiller_rated_cop < 10.0) {
            return fail("chiller_rated_cop must lie in (1, 10)");
        }
        if !(self.chiller_staging_fraction > 0.0 && self.chiller_staging_fraction <= 1.0) {
            return fail("chiller_staging_fraction must lie in (0, 1]");
        }
        if self.n_tower_cells < 2 || self.n_tower_cells % 2 != 0 {
            return fail("n_tower_cells must be even and at least 2");
        }
        if self.cw_flow_gpm > f64::from(self.n_tower_cells) * self.cell_rated_flow_gpm {
            return fail("cw_flow_gpm exceeds the tower's rated cell flow");
        }
        if !(self.design_approach_f > MIN_APPROACH_F) {
            return fail("design_approach_f must exceed the 2 °F minimum approach");
        }
        if !self.design_wet_bulb_f.is_finite() || !self.chw_supply_temp_f.is_finite() {
            return fail("design temperatures must be finite");
        }
        let fan = &self.curves.fan;
        if math::abs(fan.eval(1.0) - 1.0) > 1e-6 {
            return fail("fan curve must equal 1 at full speed");
        }
        if (0..=100).any(|i| fan.derivative(f64::from(i) / 100.0) <= 0.0 && i > 0) {
            return fail("fan curve must be increasing on (0, 1]");
        }
        let t = &self.curves.tower;
        if !(t.range_exponent > 0.0 && t.airflow_exponent > 0.0 && t.wet_bulb_coefficient >= 0.0) {
            return fail("tower exponents must be positive");
        }
        if !(t.natural_draft_fraction >= 0.0 && t.natural_draft_fraction < 1.0) {
            return fail("natural_draft_fraction must lie in [0, 1)");
        }
        if !(t.min_fan_speed > 0.0 && t.min_fan_speed <= 1.0) {
            return fail("min_fan_speed must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn total_capacity_tons(&self) -> f64 {
        f64::from(self.n_chillers) * self.chiller_rated_capacity_tons
    }

    /// Heat rejection at the design range with the loop's full flow.
    pub fn design_rejection_tons(&self) -> f64 {
        self.design_range_f * WATER_SIDE_FACTOR * self.cw_flow_gpm / BTU_PER_HR_PER_TON
    }

    /// Fan stages this tower supports, a subset of {2, 4, 6, 8}.
    pub fn fan_stages(&self) -> Vec<u8> {
        crate::units::FAN_STAGES
            .iter()
            .copied()
            .filter(|&n| n <= self.n_tower_cells)
            .collect()
    }

    /// Number of chillers running for a given building load.
    pub fn chillers_on(&self, q_load: f64) -> u32 {
        if q_load <= 0.0 {
            return 0;
        }
        let per_stage = self.chiller_staging_fraction * self.chiller_rated_capacity_tons;
        let k = math::ceil(q_load / per_stage) as u32;
        k.clamp(1, self.n_chillers)
    }

    fn check_fans(&self, n_fans: u8) -> Result<()> {
        if is_fan_stage(n_fans) && n_fans <= self.n_tower_cells {
            Ok(())
        } else {
            Err(Error::domain("n_fans", f64::from(n_fans)))
        }
    }
}

/// One operating point of the condenser loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t_wb: f64,
    pub q_load: f64,
    pub t_cws: f64,
    pub t_cwr: f64,
    pub n_fans: u8,
    /// Speed fraction the running fans settle at; 0 with the plant off.
    pub fan_speed: f64,
    pub p_chiller: f64,
    pub p_fan: f64,
    /// Pump power plus any configured standby load.
    pub p_pump: f64,
    pub q_rej: f64,
}

impl PlantState {
    pub fn total_power(&self) -> f64 {
        self.p_chiller + self.p_fan + self.p_pump
    }
}

/// Compressor electric power in kW at a building load, condenser water
/// supply and chilled water supply temperature.
pub fn chiller_power(config: &PlantConfig, q_load: f64, t_cws: f64, t_chws: f64) -> Result<f64> {
    if !(q_load.is_finite() && q_load >= 0.0) {
        return Err(Error::domain("q_load", q_load));
    }
    let capacity = config.total_capacity_tons();
    if q_load > capacity {
        return Err(Error::CapacityExceeded {
            load_tons: q_load,
            capacity_tons: capacity,
        });
    }
    let (lo, hi) = CHILLER_T_CWS_RANGE_F;
    if !(t_cws >= lo && t_cws <= hi) {
        return Err(Error::domain("t_cws", t_cws));
    }
    if q_load == 0.0 {
        return Ok(0.0);
    }
    let curves = &config.curves;
    let cap_ft = curves.chiller_capacity.eval(t_chws, t_cws);
    let eir_ft = curves.chiller_eir.eval(t_chws, t_cws);
    if !(cap_ft > 0.0 && eir_ft > 0.0) {
        return Err(Error::domain("t_chws", t_chws));
    }
    let n_on = config.chillers_on(q_load);
    let per_chiller = q_load / f64::from(n_on);
    let plr = per_chiller / (config.chiller_rated_capacity_tons * cap_ft);
    let rated_kw = config.chiller_rated_capacity_tons * KW_PER_TON / config.chiller_rated_cop;
    let per_chiller_kw = rated_kw * cap_ft * eir_ft * curves.chiller_eir_plr.eval(plr);
    Ok(f64::from(n_on) * per_chiller_kw)
}

/// Condenser heat rejection in tons: the building load plus compressor work.
pub fn heat_rejection(q_load: f64, p_chiller: f64) -> Result<f64> {
    if !(q_load.is_finite() && q_load >= 0.0) {
        return Err(Error::domain("q_load", q_load));
    }
    if !(p_chiller.is_finite() && p_chiller >= 0.0) {
        return Err(Error::domain("p_chiller", p_chiller));
    }
    Ok(q_load + p_chiller / KW_PER_TON)
}

/// Condenser water return temperature from `Q = 500 · gpm · ΔT`.
pub fn cw_return_temp(q_rej: f64, cw_flow: f64, t_cws: f64) -> Result<f64> {
    if !(cw_flow.is_finite() && cw_flow > 0.0) {
        return Err(Error::domain("cw_flow", cw_flow));
    }
    Ok(t_cws + q_rej * BTU_PER_HR_PER_TON / (WATER_SIDE_FACTOR * cw_flow))
}

/// Coldest condenser water supply the tower can deliver with `n_fans`
/// running at full speed.
pub fn tower_leaving_temp(config: &PlantConfig, t_wb: f64, q_rej: f64, n_fans: u8) -> f64 {
    tower_leaving_temp_at_speed(config, t_wb, q_rej, n_fans, 1.0)
}

/// Tower leaving water temperature with `n_fans` running at `speed`.
pub fn tower_leaving_temp_at_speed(
    config: &PlantConfig,
    t_wb: f64,
    q_rej: f64,
    n_fans: u8,
    speed: f64,
) -> f64 {
    let c = &config.curves.tower;
    let range = q_rej.max(0.0) * BTU_PER_HR_PER_TON / (WATER_SIDE_FACTOR * config.cw_flow_gpm);
    let fan_fraction = f64::from(n_fans.min(config.n_tower_cells)) / f64::from(config.n_tower_cells);
    let airflow =
        c.natural_draft_fraction + (1.0 - c.natural_draft_fraction) * fan_fraction * speed;
    let load_term = math::powf(range / config.design_range_f, c.range_exponent);
    let air_term = math::powf(airflow, -c.airflow_exponent);
    let wb_term = math::exp(-c.wet_bulb_coefficient * (t_wb - config.design_wet_bulb_f));
    let approach =
        MIN_APPROACH_F + (config.design_approach_f - MIN_APPROACH_F) * load_term * air_term * wb_term;
    t_wb + approach
}

/// Total tower fan power for `n_fans` cells running at `speed_fraction`.
pub fn fan_power(config: &PlantConfig, n_fans: u8, speed_fraction: f64) -> Result<f64> {
    config.check_fans(n_fans)?;
    if !(speed_fraction > 0.0 && speed_fraction <= 1.0) {
        return Err(Error::domain("speed_fraction", speed_fraction));
    }
    Ok(f64::from(n_fans) * config.cell_rated_fan_power_kw * config.curves.fan.eval(speed_fraction))
}

/// Solves one steady operating point.
///
/// The achieved supply temperature is `max(setpoint, coldest achievable)`,
/// where the coldest achievable temperature itself depends on the heat the
/// chiller rejects at that supply temperature; the pair is iterated to a
/// fixed point. When the tower can beat the setpoint the fans slow down to
/// the speed that just meets it, never below the minimum fan speed (at
/// which point a tower bypass holds the setpoint).
pub fn simulate_point(
    config: &PlantConfig,
    t_wb: f64,
    q_load: f64,
    t_cws_setpoint: f64,
    n_fans: u8,
) -> Result<PlantState> {
    config.check_fans(n_fans)?;
    if !t_wb.is_finite() {
        return Err(Error::domain("t_wb", t_wb));
    }
    if !t_cws_setpoint.is_finite() {
        return Err(Error::domain("t_cws_setpoint", t_cws_setpoint));
    }
    if !(q_load.is_finite() && q_load >= 0.0) {
        return Err(Error::domain("q_load", q_load));
    }
    let capacity = config.total_capacity_tons();
    if q_load > capacity {
        return Err(Error::CapacityExceeded {
            load_tons: q_load,
            capacity_tons: capacity,
        });
    }

    if q_load == 0.0 {
        let t_cws = t_cws_setpoint.max(t_wb + MIN_APPROACH_F);
        return Ok(PlantState {
            t_wb,
            q_load,
            t_cws,
            t_cwr: t_cws,
            n_fans,
            fan_speed: 0.0,
            p_chiller: 0.0,
            p_fan: 0.0,
            p_pump: config.standby_power_kw,
            q_rej: 0.0,
        });
    }

    let chws = config.chw_supply_temp_f;
    let mut t_cws = t_cws_setpoint.max(t_wb + MIN_APPROACH_F);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SOLVER_ITERATIONS {
        let p = chiller_power(config, q_load, t_cws, chws)?;
        let q_rej = heat_rejection(q_load, p)?;
        let coldest = tower_leaving_temp(config, t_wb, q_rej, n_fans);
        let next = t_cws_setpoint.max(coldest);
        residual = math::abs(next - t_cws);
        t_cws = next;
        if residual < SOLVER_TOLERANCE_F {
            break;
        }
    }
    if !(residual < SOLVER_TOLERANCE_F) {
        return Err(Error::NoConvergence {
            iterations: MAX_SOLVER_ITERATIONS,
            residual,
        });
    }

    let p_chiller = chiller_power(config, q_load, t_cws, chws)?;
    let q_rej = heat_rejection(q_load, p_chiller)?;
    let t_cwr = cw_return_temp(q_rej, config.cw_flow_gpm, t_cws)?;
    let fan_speed = if tower_leaving_temp(config, t_wb, q_rej, n_fans) < t_cws {
        modulated_speed(config, t_wb, q_rej, n_fans, t_cws)
    } else {
        1.0
    };
    Ok(PlantState {
        t_wb,
        q_load,
        t_cws,
        t_cwr,
        n_fans,
        fan_speed,
        p_chiller,
        p_fan: fan_power(config, n_fans, fan_speed)?,
        p_pump: config.pump_power_kw + config.standby_power_kw,
        q_rej,
    })
}

// Slowest speed at which the tower still reaches `target`, bisected to
// within SPEED_TOLERANCE and rounded toward the faster end.
fn modulated_speed(config: &PlantConfig, t_wb: f64, q_rej: f64, n_fans: u8, target: f64) -> f64 {
    let min_speed = config.curves.tower.min_fan_speed;
    let leaving = |s: f64| tower_leaving_temp_at_speed(config, t_wb, q_rej, n_fans, s);
    if leaving(min_speed) <= target {
        return min_speed;
    }
    let (mut lo, mut hi) = (min_speed, 1.0);
    while hi - lo > SPEED_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if leaving(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// How the loop is operated hour by hour during a simulated year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SettingsPolicy {
    Constant {
        t_cws_setpoint_f: f64,
        n_fans: u8,
    },
    /// Setpoint tracks wet-bulb at a fixed approach, clamped to limits.
    ApproachReset {
        approach_f: f64,
        min_setpoint_f: f64,
        max_setpoint_f: f64,
        n_fans: u8,
    },
    /// One explicit (setpoint, fans) pair per row.
    Scheduled { settings: Vec<(f64, u8)> },
}

impl SettingsPolicy {
    pub fn settings_at(&self, index: usize, t_wb: f64) -> Result<(f64, u8)> {
        match self {
            SettingsPolicy::Constant {
                t_cws_setpoint_f,
                n_fans,
            } => Ok((*t_cws_setpoint_f, *n_fans)),
            SettingsPolicy::ApproachReset {
                approach_f,
                min_setpoint_f,
                max_setpoint_f,
                n_fans,
            } => Ok(((t_wb + approach_f).clamp(*min_setpoint_f, *max_setpoint_f), *n_fans)),
            SettingsPolicy::Scheduled { settings } => settings.get(index).copied().ok_or_else(|| {
                Error::Schema(format!("scheduled policy has no settings for row {index}"))
            }),
        }
    }
}

/// Simulates every row of an aligned weather / load series.
pub fn simulate_year(
    config: &PlantConfig,
    weather: &WeatherSeries,
    load_profile: &LoadProfile,
    policy: &SettingsPolicy,
) -> Result<Vec<PlantState>> {
    let conditions = crate::weather::align(weather, load_profile)?;
    if let SettingsPolicy::Scheduled { settings } = policy {
        if settings.len() != conditions.len() {
            return Err(Error::Schema(format!(
                "scheduled policy has {} rows for {} hours",
                settings.len(),
                conditions.len()
            )));
        }
    }
    conditions
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (setpoint, n_fans) = policy.settings_at(i, c.t_wb_f)?;
            simulate_point(config, c.t_wb_f, c.q_load_tons, setpoint, n_fans)
        })
        .collect()
}
