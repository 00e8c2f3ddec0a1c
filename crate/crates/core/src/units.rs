//! Unit constants. The whole crate works in °F, tons of refrigeration, kW
//! and gpm.

/// Thermal kW per ton of refrigeration.
pub const KW_PER_TON: f64 = 3.517;

/// One ton of refrigeration in BTU/hr.
pub const BTU_PER_HR_PER_TON: f64 = 12_000.0;

/// Water-side factor: Q[BTU/hr] = 500 × gpm × ΔT[°F].
pub const WATER_SIDE_FACTOR: f64 = 500.0;

/// Smallest approach (T_cws − T_wb) any tower can reach.
pub const MIN_APPROACH_F: f64 = 2.0;

/// Cooling tower fan stages the plant is operated at.
pub const FAN_STAGES: [u8; 4] = [2, 4, 6, 8];

pub fn celsius_to_fahrenheit(c: f64) -> f64 {
    c * 9.0 / 5.0 + 32.0
}

pub fn tons_to_kw(tons: f64) -> f64 {
    tons * KW_PER_TON
}

pub fn kw_to_tons(kw: f64) -> f64 {
    kw / KW_PER_TON
}

pub fn is_fan_stage(n: u8) -> bool {
    FAN_STAGES.contains(&n)
}
