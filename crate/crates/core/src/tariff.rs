//! Time-of-use tariffs with per-period energy and monthly peak-demand
//! charges.
//!
//! Periods are half-open local-time windows `[start, end)` on a set of
//! weekdays and months; a window whose end is before its start wraps past
//! midnight. Interval timestamps mark the start of the interval. Demand is
//! the single highest interval power in a period over the month. Each line
//! item is rounded half-up to the cent, and the total is the sum of the
//! rounded items.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{math, Error, Result};

pub const TARIFF_SCHEMA_VERSION: u32 = 1;

const WEEK: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

/// Minutes after local midnight, `00:00` through `24:00`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub const MIDNIGHT: TimeOfDay = TimeOfDay(0);
    pub const END_OF_DAY: TimeOfDay = TimeOfDay(1440);

    pub fn hm(hour: u16, minute: u16) -> Result<Self> {
        let m = hour * 60 + minute;
        if minute >= 60 || m > 1440 {
            return Err(Error::Config(format!("invalid time of day {hour:02}:{minute:02}")));
        }
        Ok(TimeOfDay(m))
    }

    pub fn minutes(self) -> u16 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("time of day `{s}` is not HH:MM"));
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        TimeOfDay::hm(h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Period {
    pub label: String,
    pub weekdays: Vec<Weekday>,
    pub start: TimeOfDay,
    pub end: TimeOfDay,
    pub months: Vec<u32>,
}

impl Period {
    fn covers(&self, month: u32, weekday: Weekday, minute: u16) -> bool {
        self.months.contains(&month) && self.weekdays.contains(&weekday) && {
            let (s, e) = (self.start.0, self.end.0);
            if s < e {
                minute >= s && minute < e
            } else {
                minute >= s || minute < e
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSchedule {
    pub schema_version: u32,
    pub name: String,
    /// IANA zone the period times are expressed in. Timestamps handed to
    /// this module are already local.
    pub timezone: String,
    pub periods: Vec<Period>,
    /// $/kWh by period label.
    pub energy_rates: BTreeMap<String, f64>,
    /// $/kW-month by period label.
    pub demand_rates: BTreeMap<String, f64>,
    pub fixed_monthly_charge: f64,
}

impl TariffSchedule {
    /// A single period covering all time.
    pub fn flat(energy_rate: f64, demand_rate: f64, fixed_monthly_charge: f64) -> Self {
        Self {
            schema_version: TARIFF_SCHEMA_VERSION,
            name: "flat".into(),
            timezone: "America/New_York".into(),
            periods: alloc::vec![Period {
                label: "all".into(),
                weekdays: WEEK.to_vec(),
                start: TimeOfDay::MIDNIGHT,
                end: TimeOfDay::END_OF_DAY,
                months: (1..=12).collect(),
            }],
            energy_rates: [("all".to_string(), energy_rate)].into(),
            demand_rates: [("all".to_string(), demand_rate)].into(),
            fixed_monthly_charge,
        }
    }

    /// A made-up summer/winter peak/off-peak schedule for demos and tests.
    /// The numbers are illustrative only and do not come from any utility.
    pub fn synthetic_example() -> Self {
        let weekdays = WEEK[..5].to_vec();
        let summer: Vec<u32> = (6..=9).collect();
        let winter: Vec<u32> = (1..=5).chain(10..=12).collect();
        let window = |label: &str, days: &[Weekday], start: &str, end: &str, months: &[u32]| Period {
            label: label.into(),
            weekdays: days.to_vec(),
            start: start.parse().expect("literal"),
            end: end.parse().expect("literal"),
            months: months.to_vec(),
        };
        Self {
            schema_version: TARIFF_SCHEMA_VERSION,
            name: "synthetic example ToU demand tariff (illustrative rates)".into(),
            timezone: "America/New_York".into(),
            periods: alloc::vec![
                window("summer_peak", &weekdays, "08:00", "22:00", &summer),
                window("summer_off_peak", &weekdays, "22:00", "08:00", &summer),
                window("summer_off_peak", &WEEK[5..], "00:00", "24:00", &summer),
                window("winter_peak", &weekdays, "08:00", "22:00", &winter),
                window("winter_off_peak", &weekdays, "22:00", "08:00", &winter),
                window("winter_off_peak", &WEEK[5..], "00:00", "24:00", &winter),
            ],
            energy_rates: [
                ("summer_peak".to_string(), 0.14),
                ("summer_off_peak".to_string(), 0.08),
                ("winter_peak".to_string(), 0.11),
                ("winter_off_peak".to_string(), 0.07),
            ]
            .into(),
            demand_rates: [
                ("summer_peak".to_string(), 32.0),
                ("summer_off_peak".to_string(), 0.0),
                ("winter_peak".to_string(), 18.0),
                ("winter_off_peak".to_string(), 0.0),
            ]
            .into(),
            fixed_monthly_charge: 250.0,
        }
    }

    /// Months any period applies to.
    pub fn billing_months(&self) -> BTreeSet<u32> {
        self.periods.iter().flat_map(|p| p.months.iter().copied()).collect()
    }

    /// Checks rates and that the periods partition every minute of every
    /// weekday of every billing month.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != TARIFF_SCHEMA_VERSION {
            return bad(format!(
                "tariff schema_version {} is not supported (expected {TARIFF_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.periods.is_empty() {
            return bad("tariff has no periods".into());
        }
        if !(self.fixed_monthly_charge.is_finite() && self.fixed_monthly_charge >= 0.0) {
            return bad("fixed monthly charge must be ≥ 0".into());
        }
        for (kind, rates) in [("energy", &self.energy_rates), ("demand", &self.demand_rates)] {
            for (label, r) in rates {
                if !(r.is_finite() && *r >= 0.0) {
                    return bad(format!("{kind} rate for `{label}` must be ≥ 0"));
                }
            }
        }
        for p in &self.periods {
            if !self.energy_rates.contains_key(&p.label) || !self.demand_rates.contains_key(&p.label) {
                return bad(format!("period `{}` needs both an energy and a demand rate", p.label));
            }
            if p.start == p.end {
                return bad(format!("period `{}` is empty ({} to {})", p.label, p.start, p.end));
            }
            if p.weekdays.is_empty() || p.months.is_empty() {
                return bad(format!("period `{}` has no weekdays or months", p.label));
            }
            if let Some(m) = p.months.iter().find(|m| !(1..=12).contains(*m)) {
                return bad(format!("period `{}`: invalid month {m}", p.label));
            }
        }
        for month in self.billing_months() {
            for day in WEEK {
                for minute in 0..1440u16 {
                    let n = self.periods.iter().filter(|p| p.covers(month, day, minute)).count();
                    if n != 1 {
                        let what = if n == 0 { "gap" } else { "overlap" };
                        return bad(format!(
                            "{what} in tariff periods: month {month}, {day} {}",
                            TimeOfDay(minute)
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn period_of(&self, t: NaiveDateTime) -> Result<&str> {
        let minute = (t.hour() * 60 + t.minute()) as u16;
        self.periods
            .iter()
            .find(|p| p.covers(t.month(), t.weekday(), minute))
            .map(|p| p.label.as_str())
            .ok_or(Error::ScheduleGap(t))
    }

    /// $/kWh in force at `t`.
    pub fn energy_rate_at(&self, t: NaiveDateTime) -> Result<f64> {
        let label = self.period_of(t)?;
        Ok(self.energy_rates[label])
    }
}

/// Whole cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    /// Rounds dollars half-up to the cent. The small slack absorbs binary
    /// representation error, so 5.005 rounds to 5.01.
    pub fn from_dollars(d: f64) -> Money {
        Money(math::floor(d * 100.0 + 0.5 + 1e-7) as i64)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl core::ops::Add for Money {
    type Output = Money;
    fn add(self, o: Money) -> Money {
        Money(self.0 + o.0)
    }
}

impl core::ops::Sub for Money {
    type Output = Money;
    fn sub(self, o: Money) -> Money {
        Money(self.0 - o.0)
    }
}

impl core::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let c = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:02}", c / 100, c % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("invalid month {month}")));
        }
        Ok(Self { year, month })
    }

    pub fn of(t: NaiveDateTime) -> Self {
        Self {
            year: t.year(),
            month: t.month(),
        }
    }

    pub fn start(self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("validated month")
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn contains(self, t: NaiveDateTime) -> bool {
        t >= self.start() && t < self.next().start()
    }

    pub fn hours(self) -> f64 {
        (self.next().start() - self.start()).num_minutes() as f64 / 60.0
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("month `{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPoint {
    /// Start of the interval, local time.
    pub timestamp: NaiveDateTime,
    pub power_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSeries {
    pub interval_minutes: u32,
    pub points: Vec<IntervalPoint>,
}

impl IntervalSeries {
    pub fn new(interval_minutes: u32, points: Vec<IntervalPoint>) -> Result<Self> {
        let s = Self {
            interval_minutes,
            points,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds a series from evenly spaced powers starting at `start`.
    pub fn from_powers(start: NaiveDateTime, interval_minutes: u32, powers: &[f64]) -> Result<Self> {
        let step = Duration::minutes(i64::from(interval_minutes));
        let points = powers
            .iter()
            .enumerate()
            .map(|(k, p)| IntervalPoint {
                timestamp: start + step * k as i32,
                power_kw: *p,
            })
            .collect();
        Self::new(interval_minutes, points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_minutes == 0 || 1440 % self.interval_minutes != 0 {
            return Err(Error::Config(format!(
                "interval of {} minutes does not divide a day",
                self.interval_minutes
            )));
        }
        let step = Duration::minutes(i64::from(self.interval_minutes));
        for (i, p) in self.points.iter().enumerate() {
            if !(p.power_kw.is_finite() && p.power_kw >= 0.0) {
                return Err(Error::Schema(format!("interval {} ({}): power {} kW", i, p.timestamp, p.power_kw)));
            }
            if i > 0 && p.timestamp - self.points[i - 1].timestamp != step {
                return Err(Error::Schema(format!(
                    "interval {} ({}): not {} minutes after the previous one",
                    i, p.timestamp, self.interval_minutes
                )));
            }
        }
        Ok(())
    }

    pub fn hours_per_interval(&self) -> f64 {
        f64::from(self.interval_minutes) / 60.0
    }

    /// Points inside `month`, after checking every interval of the month is
    /// present.
    pub fn month_points(&self, month: YearMonth) -> Result<&[IntervalPoint]> {
        self.validate()?;
        let step = Duration::minutes(i64::from(self.interval_minutes));
        let lo = self.points.partition_point(|p| p.timestamp < month.start());
        let hi = self.points.partition_point(|p| p.timestamp < month.next().start());
        let got = &self.points[lo..hi];
        let mut gaps = Vec::new();
        let mut expected = month.start();
        let mut k = 0;
        while expected < month.next().start() {
            if got.get(k).is_some_and(|p| p.timestamp == expected) {
                k += 1;
            } else {
                gaps.push(expected);
            }
            expected += step;
        }
        if !gaps.is_empty() || k != got.len() {
            return Err(Error::Coverage { gaps });
        }
        Ok(got)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillResult {
    pub month: YearMonth,
    pub energy_kwh_per_period: BTreeMap<String, f64>,
    pub energy_charge_per_period: BTreeMap<String, Money>,
    pub peak_kw_per_period: BTreeMap<String, f64>,
    pub demand_charge_per_period: BTreeMap<String, Money>,
    pub fixed_charge: Money,
    pub total: Money,
}

impl BillResult {
    pub fn energy_charge(&self) -> Money {
        self.energy_charge_per_period.values().copied().sum()
    }

    pub fn demand_charge(&self) -> Money {
        self.demand_charge_per_period.values().copied().sum()
    }

    pub fn total_kwh(&self) -> f64 {
        self.energy_kwh_per_period.values().sum()
    }

    /// Total rebuilt from the line items.
    pub fn recomputed_total(&self) -> Money {
        self.fixed_charge + self.energy_charge() + self.demand_charge()
    }
}

impl fmt::Display for BillResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bill for {}", self.month)?;
        writeln!(f, "{:<20} {:>12} {:>12} {:>10} {:>12}", "period", "kWh", "energy", "peak kW", "demand")?;
        for (label, kwh) in &self.energy_kwh_per_period {
            writeln!(
                f,
                "{:<20} {:>12.1} {:>12} {:>10.1} {:>12}",
                label,
                kwh,
                self.energy_charge_per_period[label].to_string(),
                self.peak_kw_per_period[label],
                self.demand_charge_per_period[label].to_string()
            )?;
        }
        writeln!(f, "fixed {}", self.fixed_charge)?;
        write!(f, "total {}", self.total)
    }
}

pub fn compute_bill(schedule: &TariffSchedule, series: &IntervalSeries, month: YearMonth) -> Result<BillResult> {
    let points = series.month_points(month)?;
    let h = series.hours_per_interval();
    let mut kwh: BTreeMap<String, f64> = BTreeMap::new();
    let mut peak: BTreeMap<String, f64> = BTreeMap::new();
    for p in points {
        let label = schedule.period_of(p.timestamp)?;
        *kwh.entry(label.to_string()).or_default() += p.power_kw * h;
        let e = peak.entry(label.to_string()).or_default();
        *e = e.max(p.power_kw);
    }
    let energy: BTreeMap<String, Money> = kwh
        .iter()
        .map(|(l, e)| (l.clone(), Money::from_dollars(e * schedule.energy_rates[l])))
        .collect();
    let demand: BTreeMap<String, Money> = peak
        .iter()
        .map(|(l, p)| (l.clone(), Money::from_dollars(p * schedule.demand_rates[l])))
        .collect();
    let mut bill = BillResult {
        month,
        energy_kwh_per_period: kwh,
        energy_charge_per_period: energy,
        peak_kw_per_period: peak,
        demand_charge_per_period: demand,
        fixed_charge: Money::from_dollars(schedule.fixed_monthly_charge),
        total: Money(0),
    };
    bill.total = bill.recomputed_total();
    Ok(bill)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub month: YearMonth,
    pub kwh_saved: f64,
    pub kwh_dollar_saved: Money,
    pub demand_dollar_saved: Money,
    pub total_saved: Money,
    pub percent_saved: f64,
    pub baseline: BillResult,
    pub optimized: BillResult,
}

impl SavingsReport {
    pub const HEADER: [&'static str; 5] = ["Month", "kWh Sav. ($)", "kWh Sav. (kWh)", "Total Sav. ($)", "Sav. %"];

    pub fn row(&self) -> [String; 5] {
        [
            self.month.to_string(),
            self.kwh_dollar_saved.to_string(),
            format!("{:.0}", self.kwh_saved),
            self.total_saved.to_string(),
            format!("{:.1}%", self.percent_saved),
        ]
    }
}

impl fmt::Display for SavingsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = self.row();
        writeln!(f, "{:<8} | {:>14} | {:>14} | {:>14} | {:>7}", Self::HEADER[0], Self::HEADER[1], Self::HEADER[2], Self::HEADER[3], Self::HEADER[4])?;
        writeln!(f, "{:<8} | {:>14} | {:>14} | {:>14} | {:>7}", row[0], row[1], row[2], row[3], row[4])?;
        write!(f, "demand savings {}", self.demand_dollar_saved)
    }
}

/// Bills both series for the month and reports the differences.
pub fn compare_costs(
    schedule: &TariffSchedule,
    baseline: &IntervalSeries,
    optimized: &IntervalSeries,
    month: YearMonth,
) -> Result<SavingsReport> {
    if baseline.interval_minutes != optimized.interval_minutes
        || baseline.points.len() != optimized.points.len()
        || baseline
            .points
            .iter()
            .zip(&optimized.points)
            .any(|(a, b)| a.timestamp != b.timestamp)
    {
        return Err(Error::Alignment("baseline and optimized timestamps differ".into()));
    }
    let b = compute_bill(schedule, baseline, month)?;
    let o = compute_bill(schedule, optimized, month)?;
    let total_saved = b.total - o.total;
    Ok(SavingsReport {
        month,
        kwh_saved: b.total_kwh() - o.total_kwh(),
        kwh_dollar_saved: b.energy_charge() - o.energy_charge(),
        demand_dollar_saved: b.demand_charge() - o.demand_charge(),
        total_saved,
        percent_saved: if b.total.0 == 0 {
            0.0
        } else {
            100.0 * total_saved.0 as f64 / b.total.0 as f64
        },
        baseline: b,
        optimized: o,
    })
}
