//! Wet-bulb weather and building cooling-load series, plus a seeded
//! synthetic generator for a temperate coastal climate with an office-style
//! occupancy schedule.

use alloc::format;
use alloc::vec::Vec;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherPoint {
    pub timestamp: NaiveDateTime,
    pub t_wb_f: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub points: Vec<WeatherPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub timestamp: NaiveDateTime,
    pub q_load_tons: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub points: Vec<LoadPoint>,
}

/// Weather and load joined on a common timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub timestamp: NaiveDateTime,
    pub t_wb_f: f64,
    pub q_load_tons: f64,
}

/// Joins a weather series and a load profile row by row. Both must have the
/// same length, identical timestamps and strictly increasing time.
pub fn align(weather: &WeatherSeries, load: &LoadProfile) -> Result<Vec<Conditions>> {
    if weather.points.len() != load.points.len() {
        return Err(Error::Schema(format!(
            "weather has {} rows but load profile has {}",
            weather.points.len(),
            load.points.len()
        )));
    }
    let mut out = Vec::with_capacity(weather.points.len());
    let mut prev: Option<NaiveDateTime> = None;
    for (i, (w, l)) in weather.points.iter().zip(&load.points).enumerate() {
        if w.timestamp != l.timestamp {
            return Err(Error::Schema(format!(
                "row {i}: weather timestamp {} does not match load timestamp {}",
                w.timestamp, l.timestamp
            )));
        }
        if prev.is_some_and(|p| p >= w.timestamp) {
            return Err(Error::Schema(format!("row {i}: timestamps not increasing")));
        }
        prev = Some(w.timestamp);
        out.push(Conditions {
            timestamp: w.timestamp,
            t_wb_f: w.t_wb_f,
            q_load_tons: l.q_load_tons,
        });
    }
    Ok(out)
}

/// Splits joined conditions back into the two series.
pub fn split_conditions(conditions: &[Conditions]) -> (WeatherSeries, LoadProfile) {
    let weather = conditions
        .iter()
        .map(|c| WeatherPoint {
            timestamp: c.timestamp,
            t_wb_f: c.t_wb_f,
        })
        .collect();
    let load = conditions
        .iter()
        .map(|c| LoadPoint {
            timestamp: c.timestamp,
            q_load_tons: c.q_load_tons,
        })
        .collect();
    (WeatherSeries { points: weather }, LoadProfile { points: load })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClimate {
    pub annual_mean_wet_bulb_f: f64,
    pub seasonal_amplitude_f: f64,
    /// Day of year with the warmest mean wet-bulb.
    pub peak_day_of_year: f64,
    pub diurnal_amplitude_f: f64,
    /// Hour of day with the warmest wet-bulb.
    pub peak_hour: f64,
    /// Stationary standard deviation of the weather-system noise.
    pub noise_sd_f: f64,
    /// Hour-to-hour autocorrelation of the noise.
    pub hourly_persistence: f64,
    pub max_wet_bulb_f: f64,
}

impl Default for SyntheticClimate {
    fn default() -> Self {
        Self {
            annual_mean_wet_bulb_f: 52.0,
            seasonal_amplitude_f: 20.0,
            peak_day_of_year: 201.0,
            diurnal_amplitude_f: 3.0,
            peak_hour: 15.0,
            noise_sd_f: 2.5,
            hourly_persistence: 0.95,
            max_wet_bulb_f: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLoad {
    /// Weekday occupied window `[start, end)` in hours.
    pub occupied_hours: (u32, u32),
    pub occupied_base_tons: f64,
    pub occupied_tons_per_f: f64,
    pub unoccupied_base_tons: f64,
    pub unoccupied_tons_per_f: f64,
    /// Wet-bulb above which the load grows with weather.
    pub balance_wet_bulb_f: f64,
    /// Below this wet-bulb the chiller plant is shut down.
    pub plant_off_wet_bulb_f: f64,
    /// Relative standard deviation of multiplicative load noise.
    pub noise_fraction: f64,
    pub max_load_tons: f64,
}

impl Default for SyntheticLoad {
    fn default() -> Self {
        Self {
            occupied_hours: (7, 19),
            occupied_base_tons: 500.0,
            occupied_tons_per_f: 100.0,
            unoccupied_base_tons: 150.0,
            unoccupied_tons_per_f: 50.0,
            balance_wet_bulb_f: 55.0,
            plant_off_wet_bulb_f: 45.0,
            noise_fraction: 0.05,
            max_load_tons: 2650.0,
        }
    }
}

impl SyntheticLoad {
    pub fn is_occupied(&self, t: &NaiveDateTime) -> bool {
        let weekday = !matches!(t.weekday(), Weekday::Sat | Weekday::Sun);
        let (start, end) = self.occupied_hours;
        weekday && (start..end).contains(&t.hour())
    }
}

/// Generates `n` points starting at `start`, spaced `interval_minutes`
/// apart. Same seed, same series.
pub fn synthetic_conditions(
    start: NaiveDateTime,
    n: usize,
    interval_minutes: u32,
    climate: &SyntheticClimate,
    load: &SyntheticLoad,
    seed: u64,
) -> Vec<Conditions> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_hours = f64::from(interval_minutes) / 60.0;
    let phi = math::powf(climate.hourly_persistence, step_hours);
    let innovation_sd = climate.noise_sd_f * math::sqrt(1.0 - phi * phi);
    let mut noise = climate.noise_sd_f * standard_normal(&mut rng);
    let two_pi = 2.0 * core::f64::consts::PI;
    let step = Duration::minutes(i64::from(interval_minutes));
    let mut out = Vec::with_capacity(n);
    let mut t = start;
    for _ in 0..n {
        let doy = f64::from(t.ordinal());
        let hour = f64::from(t.hour()) + f64::from(t.minute()) / 60.0;
        let seasonal = climate.seasonal_amplitude_f
            * libm::cos(two_pi * (doy - climate.peak_day_of_year) / 365.25);
        let diurnal =
            climate.diurnal_amplitude_f * libm::cos(two_pi * (hour - climate.peak_hour) / 24.0);
        let t_wb = (climate.annual_mean_wet_bulb_f + seasonal + diurnal + noise)
            .min(climate.max_wet_bulb_f);

        let q = if t_wb < load.plant_off_wet_bulb_f {
            0.0
        } else {
            let excess = (t_wb - load.balance_wet_bulb_f).max(0.0);
            let base = if load.is_occupied(&t) {
                load.occupied_base_tons + load.occupied_tons_per_f * excess
            } else {
                load.unoccupied_base_tons + load.unoccupied_tons_per_f * excess
            };
            let factor = 1.0 + load.noise_fraction * standard_normal(&mut rng);
            (base * factor).clamp(0.0, load.max_load_tons)
        };
        out.push(Conditions {
            timestamp: t,
            t_wb_f: t_wb,
            q_load_tons: q,
        });
        noise = phi * noise + innovation_sd * standard_normal(&mut rng);
        t += step;
    }
    out
}

/// Hourly synthetic conditions for a whole calendar year.
pub fn synthetic_year(year: i32, seed: u64) -> Vec<Conditions> {
    let start = NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid year");
    let days = if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    };
    synthetic_conditions(
        start,
        days * 24,
        60,
        &SyntheticClimate::default(),
        &SyntheticLoad::default(),
        seed,
    )
}

// Box-Muller; one of the pair is discarded to keep the draw order simple.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    math::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_has_8760_hours() {
        let c = synthetic_year(2023, 1);
        assert_eq!(c.len(), 8760);
        assert_eq!(synthetic_year(2024, 1).len(), 8784);
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(synthetic_year(2023, 7), synthetic_year(2023, 7));
        assert_ne!(synthetic_year(2023, 7), synthetic_year(2023, 8));
    }

    #[test]
    fn summer_is_warm_and_loaded() {
        let c = synthetic_year(2023, 3);
        let july: Vec<_> = c.iter().filter(|c| c.timestamp.month() == 7).collect();
        let mean_wb = july.iter().map(|c| c.t_wb_f).sum::<f64>() / july.len() as f64;
        assert!((66.0..76.0).contains(&mean_wb), "{mean_wb}");
        assert!(july.iter().all(|c| c.q_load_tons > 0.0));
        assert!(c.iter().all(|c| c.q_load_tons <= 2650.0 && c.t_wb_f <= 80.0));
    }

    #[test]
    fn align_checks_shape() {
        let c = synthetic_year(2023, 3);
        let (w, mut l) = split_conditions(&c[..10]);
        assert_eq!(align(&w, &l).unwrap(), c[..10].to_vec());
        l.points.pop();
        assert!(matches!(align(&w, &l), Err(Error::Schema(_))));
        let (w, mut l) = split_conditions(&c[..10]);
        l.points[3].timestamp = l.points[4].timestamp;
        assert!(align(&w, &l).is_err());
    }
}
