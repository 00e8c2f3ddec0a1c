//! Tabular operating data: records, parametric sweeps over the plant
//! simulator, cleaning, correlation analysis and train/test splitting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plant::{simulate_point, PlantConfig, PlantState};
use crate::stats;
use crate::units::{is_fan_stage, FAN_STAGES, KW_PER_TON, MIN_APPROACH_F};
use crate::weather::Conditions;
use crate::{math, Error, Result};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Measured,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Synthetic => "synthetic",
            Source::Measured => "measured",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic" => Ok(Source::Synthetic),
            "measured" => Ok(Source::Measured),
            other => Err(Error::Schema(format!("unknown source `{other}`"))),
        }
    }
}

/// One row of operating data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub timestamp: NaiveDateTime,
    pub t_wb: f64,
    pub q_load: f64,
    pub t_cws: f64,
    pub t_cwr: f64,
    pub n_fans: u8,
    pub p_chiller: f64,
    pub p_fan: f64,
    pub p_pump: f64,
    pub q_rej: f64,
    pub source: Source,
}

impl SampleRecord {
    pub fn from_state(timestamp: NaiveDateTime, s: &PlantState, source: Source) -> Self {
        Self {
            timestamp,
            t_wb: s.t_wb,
            q_load: s.q_load,
            t_cws: s.t_cws,
            t_cwr: s.t_cwr,
            n_fans: s.n_fans,
            p_chiller: s.p_chiller,
            p_fan: s.p_fan,
            p_pump: s.p_pump,
            q_rej: s.q_rej,
            source,
        }
    }

    pub fn get(&self, column: Column) -> f64 {
        match column {
            Column::TWb => self.t_wb,
            Column::QLoad => self.q_load,
            Column::TCws => self.t_cws,
            Column::TCwr => self.t_cwr,
            Column::NFans => f64::from(self.n_fans),
            Column::PChiller => self.p_chiller,
            Column::PFan => self.p_fan,
            Column::PPump => self.p_pump,
            Column::QRej => self.q_rej,
            Column::Approach => self.t_cws - self.t_wb,
            Column::RejectionPerApproach => rejection_per_approach(self.q_rej, self.t_cws - self.t_wb),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.p_chiller + self.p_fan + self.p_pump
    }

    /// Checks the record invariants. Measured rows are exempt from the
    /// energy balance, which sensor noise never satisfies exactly.
    pub fn validate(&self) -> Result<()> {
        for c in Column::ALL {
            if !self.get(c).is_finite() {
                return Err(Error::Schema(format!("{} is not finite", c.name())));
            }
        }
        if !is_fan_stage(self.n_fans) {
            return Err(Error::Schema(format!("n_fans {} not in {{2,4,6,8}}", self.n_fans)));
        }
        for c in [Column::PChiller, Column::PFan, Column::PPump] {
            if self.get(c) < 0.0 {
                return Err(Error::Schema(format!("{} is negative", c.name())));
            }
        }
        if self.source == Source::Synthetic {
            let residual = self.q_rej - self.q_load - self.p_chiller / KW_PER_TON;
            if math::abs(residual) / self.q_rej.max(1.0) > 1e-6 {
                return Err(Error::Schema(format!(
                    "energy balance violated by {residual:.6} tons"
                )));
            }
        }
        Ok(())
    }
}

/// Numeric dataset columns, named as in the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Column {
    #[serde(rename = "t_wb_f")]
    TWb,
    #[serde(rename = "q_load_tons")]
    QLoad,
    #[serde(rename = "t_cws_f")]
    TCws,
    #[serde(rename = "t_cwr_f")]
    TCwr,
    #[serde(rename = "n_fans")]
    NFans,
    #[serde(rename = "p_chiller_kw")]
    PChiller,
    #[serde(rename = "p_fan_kw")]
    PFan,
    #[serde(rename = "p_pump_kw")]
    PPump,
    #[serde(rename = "q_rej_tons")]
    QRej,
    /// Derived: `t_cws − t_wb`. Not a CSV column.
    #[serde(rename = "approach_f")]
    Approach,
    /// Derived: rejected heat per degree of approach, `q_rej / approach`.
    /// Not a CSV column.
    #[serde(rename = "q_rej_per_approach")]
    RejectionPerApproach,
}

impl Column {
    pub const ALL: [Column; 9] = [
        Column::TWb,
        Column::QLoad,
        Column::TCws,
        Column::TCwr,
        Column::NFans,
        Column::PChiller,
        Column::PFan,
        Column::PPump,
        Column::QRej,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::TWb => "t_wb_f",
            Column::QLoad => "q_load_tons",
            Column::TCws => "t_cws_f",
            Column::TCwr => "t_cwr_f",
            Column::NFans => "n_fans",
            Column::PChiller => "p_chiller_kw",
            Column::PFan => "p_fan_kw",
            Column::PPump => "p_pump_kw",
            Column::QRej => "q_rej_tons",
            Column::Approach => "approach_f",
            Column::RejectionPerApproach => "q_rej_per_approach",
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Column {
    type Err = Error;

    /// Accepts the CSV header names and their unit-less short forms
    /// (`t_wb`, `p_fan`, ...).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Column::ALL
            .into_iter()
            .chain([Column::Approach, Column::RejectionPerApproach])
            .find(|c| {
                let name = c.name();
                name == s || name.rsplit_once('_').is_some_and(|(short, _)| short == s)
            })
            .or(if s == "n_fans" { Some(Column::NFans) } else { None })
            .ok_or_else(|| Error::Schema(format!("unknown column `{s}`")))
    }
}

/// Tons per °F, with the approach floored at the 2 °F physical minimum.
pub fn rejection_per_approach(q_rej: f64, approach: f64) -> f64 {
    q_rej / approach.max(MIN_APPROACH_F)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u32,
    pub provenance: String,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(provenance: impl Into<String>, records: Vec<SampleRecord>) -> Self {
        Self {
            schema_version: DATASET_SCHEMA_VERSION,
            provenance: provenance.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, column: Column) -> Vec<f64> {
        self.records.iter().map(|r| r.get(column)).collect()
    }

    /// A dataset with the rows matching `keep`, same provenance.
    pub fn filtered(&self, keep: impl Fn(&SampleRecord) -> bool) -> Dataset {
        Dataset {
            schema_version: self.schema_version,
            provenance: self.provenance.clone(),
            records: self.records.iter().filter(|r| keep(r)).copied().collect(),
        }
    }

    /// Validates every record, reporting the first offending row.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            r.validate()
                .map_err(|e| Error::Schema(format!("row {i} ({}): {e}", r.timestamp)))?;
        }
        Ok(())
    }
}

/// Where a sweep gets its hourly weather and load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionsSource {
    /// A `timestamp,t_wb_f,q_load_tons` CSV file.
    File { path: String },
    /// The built-in synthetic climate and occupancy generator.
    Synthetic { year: i32, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub t_cws_values: Vec<f64>,
    pub n_fans_values: Vec<u8>,
    /// Calendar months (1–12) whose hours are simulated.
    pub months: Vec<u32>,
    pub source: ConditionsSource,
    /// Width of a uniform offset added to all of one hour's setpoints, so
    /// the models see supply temperatures between grid values. Shifted
    /// setpoints are clamped to [60, 90]. Zero keeps the grid as given.
    #[serde(default)]
    pub setpoint_jitter_f: f64,
    #[serde(default)]
    pub jitter_seed: u64,
}

impl SweepSpec {
    /// Setpoints 60–90 °F by 2.5 with each hour's grid shifted by up to
    /// ±1.25 °F, every fan stage, May through September of a synthetic year.
    pub fn standard(year: i32, seed: u64) -> Self {
        Self {
            t_cws_values: (0..13).map(|k| 60.0 + 2.5 * f64::from(k)).collect(),
            n_fans_values: FAN_STAGES.to_vec(),
            months: (5..=9).collect(),
            source: ConditionsSource::Synthetic { year, seed },
            setpoint_jitter_f: 2.5,
            jitter_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_cws_values.is_empty() || self.n_fans_values.is_empty() {
            return Err(Error::Config("sweep value lists must be non-empty".into()));
        }
        if let Some(t) = self.t_cws_values.iter().find(|t| !(**t >= 60.0 && **t <= 90.0)) {
            return Err(Error::Config(format!("sweep setpoint {t} °F outside [60, 90]")));
        }
        if let Some(n) = self.n_fans_values.iter().find(|n| !is_fan_stage(**n)) {
            return Err(Error::Config(format!("sweep fan count {n} not in {{2,4,6,8}}")));
        }
        if let Some(m) = self.months.iter().find(|m| !(1..=12).contains(*m)) {
            return Err(Error::Config(format!("invalid month {m}")));
        }
        let mut sorted = self.t_cws_values.clone();
        sorted.sort_by(f64::total_cmp);
        let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if min_gap == 0.0 {
            return Err(Error::Config("sweep setpoints must be distinct".into()));
        }
        // A shift wider than the spacing could clamp two setpoints together.
        let j = self.setpoint_jitter_f;
        if !(j >= 0.0 && j <= min_gap) {
            return Err(Error::Config(format!(
                "setpoint jitter {j} must lie in [0, {min_gap}] (the setpoint spacing)"
            )));
        }
        Ok(())
    }
}

/// Simulates every (hour in the selected months) × setpoint × fan count,
/// time-major, then setpoint, then fans.
pub fn run_sweep(config: &PlantConfig, spec: &SweepSpec, conditions: &[Conditions]) -> Result<Dataset> {
    spec.validate()?;
    config.validate()?;
    let hours: Vec<&Conditions> = conditions
        .iter()
        .filter(|c| spec.months.contains(&c.timestamp.month()))
        .collect();
    let mut records =
        Vec::with_capacity(hours.len() * spec.t_cws_values.len() * spec.n_fans_values.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.jitter_seed);
    for c in hours {
        let shift = if spec.setpoint_jitter_f > 0.0 {
            (rng.random::<f64>() - 0.5) * spec.setpoint_jitter_f
        } else {
            0.0
        };
        for &grid in &spec.t_cws_values {
            let setpoint = (grid + shift).clamp(60.0, 90.0);
            for &n_fans in &spec.n_fans_values {
                let state = simulate_point(config, c.t_wb_f, c.q_load_tons, setpoint, n_fans)
                    .map_err(|e| Error::Sweep {
                        timestamp: c.timestamp,
                        t_cws_setpoint: setpoint,
                        n_fans,
                        source: alloc::boxed::Box::new(e),
                    })?;
                records.push(SampleRecord::from_state(c.timestamp, &state, Source::Synthetic));
            }
        }
    }
    let provenance = format!(
        "sweep setpoints={:?} jitter={} (seed {}) fans={:?} months={:?} source={:?}",
        spec.t_cws_values, spec.setpoint_jitter_f, spec.jitter_seed, spec.n_fans_values, spec.months, spec.source
    );
    Ok(Dataset::new(provenance, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningRules {
    /// Rows at or below this load are plant-off rows and carry no signal.
    pub min_load_tons: f64,
}

impl Default for CleaningRules {
    fn default() -> Self {
        Self { min_load_tons: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_rows: usize,
    pub non_finite: usize,
    pub min_load: usize,
    pub reversed_delta_t: usize,
}

impl CleaningReport {
    pub fn dropped(&self) -> usize {
        self.non_finite + self.min_load + self.reversed_delta_t
    }

    /// Drop count for a rule by its report name.
    pub fn dropped_by(&self, rule: &str) -> Option<usize> {
        match rule {
            "non-finite" => Some(self.non_finite),
            "min-load" => Some(self.min_load),
            "reversed-ΔT" => Some(self.reversed_delta_t),
            _ => None,
        }
    }
}

impl fmt::Display for CleaningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} rows in, {} dropped (non-finite {}, min-load {}, reversed-ΔT {})",
            self.input_rows,
            self.dropped(),
            self.non_finite,
            self.min_load,
            self.reversed_delta_t
        )
    }
}

/// Drops rows with non-finite values, plant-off rows and rows whose return
/// water is not warmer than the supply. Each dropped row is counted under
/// the first rule it fails.
pub fn clean(data: &Dataset, rules: &CleaningRules) -> (Dataset, CleaningReport) {
    let mut report = CleaningReport {
        input_rows: data.len(),
        ..CleaningReport::default()
    };
    let mut kept = Vec::with_capacity(data.len());
    for r in &data.records {
        if Column::ALL.iter().any(|c| !r.get(*c).is_finite()) {
            report.non_finite += 1;
        } else if r.q_load <= rules.min_load_tons {
            report.min_load += 1;
        } else if r.t_cwr <= r.t_cws {
            report.reversed_delta_t += 1;
        } else {
            kept.push(*r);
        }
    }
    let out = Dataset {
        schema_version: data.schema_version,
        provenance: data.provenance.clone(),
        records: kept,
    };
    (out, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == a)?;
        let j = self.columns.iter().position(|c| c == b)?;
        Some(self.values[i][j])
    }
}

impl fmt::Display for CorrelationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0).max(7);
        write!(f, "{:width$}", "")?;
        for c in &self.columns {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f)?;
        for (name, row) in self.columns.iter().zip(&self.values) {
            write!(f, "{name:width$}")?;
            for v in row {
                write!(f, " {v:>width$.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Pearson correlation matrix over named columns.
pub fn pearson_matrix(named: &[(&str, &[f64])]) -> Result<CorrelationMatrix> {
    let rows = named.first().map_or(0, |(_, v)| v.len());
    if rows < 3 {
        return Err(Error::Schema(format!("correlation needs at least 3 rows, got {rows}")));
    }
    if let Some((name, _)) = named.iter().find(|(_, v)| v.len() != rows) {
        return Err(Error::Schema(format!("column `{name}` has a different length")));
    }
    for (name, v) in named {
        if v.iter().all(|x| *x == v[0]) {
            return Err(Error::ZeroVariance(name.to_string()));
        }
    }
    let k = named.len();
    let mut values = alloc::vec![alloc::vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = stats::pearson(named[i].1, named[j].1)
                .ok_or_else(|| Error::ZeroVariance(named[i].0.to_string()))?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        columns: named.iter().map(|(n, _)| n.to_string()).collect(),
        values,
    })
}

pub fn correlation_matrix(data: &Dataset, columns: &[Column]) -> Result<CorrelationMatrix> {
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| data.column(*c)).collect();
    let named: Vec<(&str, &[f64])> = columns
        .iter()
        .zip(&cols)
        .map(|(c, v)| (c.name(), v.as_slice()))
        .collect();
    pearson_matrix(&named)
}

/// Seeded random train/test split. Both halves keep the input row order.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain("split fraction", fraction));
    }
    let n = data.len();
    let n_train = math::round(fraction * n as f64) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::domain("split size", n_train as f64));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = alloc::vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (r, t) in data.records.iter().zip(in_train) {
        if t {
            train.push(*r);
        } else {
            test.push(*r);
        }
    }
    let make = |records, side: &str| Dataset {
        schema_version: data.schema_version,
        provenance: format!("{} [{side} split {fraction} seed {seed}]", data.provenance),
        records,
    };
    Ok((make(train, "train"), make(test, "test")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::synthetic_year;
    use chrono::NaiveDate;

    fn ts(h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 7, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            + chrono::Duration::hours(i64::from(h))
    }

    fn hundred_hours() -> Vec<Conditions> {
        (0..100)
            .map(|h| Conditions {
                timestamp: ts(h),
                t_wb_f: 60.0 + f64::from(h % 15),
                q_load_tons: 300.0 + 20.0 * f64::from(h),
            })
            .collect()
    }

    fn spec(months: Vec<u32>) -> SweepSpec {
        SweepSpec {
            t_cws_values: alloc::vec![75.0, 80.0],
            n_fans_values: alloc::vec![4, 8],
            months,
            source: ConditionsSource::Synthetic { year: 2023, seed: 0 },
            setpoint_jitter_f: 0.0,
            jitter_seed: 0,
        }
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let d = run_sweep(&PlantConfig::default(), &spec(alloc::vec![7]), &hundred_hours()).unwrap();
        assert_eq!(d.len(), 400);
        assert_eq!(d.records[0].n_fans, 4);
        assert_eq!(d.records[1].n_fans, 8);
        assert_eq!(d.records[0].timestamp, d.records[3].timestamp);
        assert_ne!(d.records[3].timestamp, d.records[4].timestamp);
        d.validate().unwrap();
    }

    #[test]
    fn empty_month_filter_is_empty_dataset() {
        let d = run_sweep(&PlantConfig::default(), &spec(alloc::vec![]), &hundred_hours()).unwrap();
        assert!(d.is_empty());
        let d = run_sweep(&PlantConfig::default(), &spec(alloc::vec![1]), &hundred_hours()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn sweep_errors_carry_combination() {
        let mut hours = hundred_hours();
        hours[5].q_load_tons = 5000.0;
        let err = run_sweep(&PlantConfig::default(), &spec(alloc::vec![7]), &hours).unwrap_err();
        match err {
            Error::Sweep {
                timestamp,
                t_cws_setpoint,
                n_fans,
                ..
            } => {
                assert_eq!(timestamp, ts(5));
                assert_eq!((t_cws_setpoint, n_fans), (75.0, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_spec_rejected() {
        let mut s = spec(alloc::vec![7]);
        s.t_cws_values.push(95.0);
        assert!(s.validate().is_err());
        let mut s = spec(alloc::vec![7]);
        s.n_fans_values = alloc::vec![];
        assert!(s.validate().is_err());
    }

    fn small_sweep() -> Dataset {
        let year = synthetic_year(2023, 11);
        let s = SweepSpec {
            t_cws_values: alloc::vec![70.0, 80.0],
            n_fans_values: alloc::vec![2, 8],
            months: alloc::vec![6],
            source: ConditionsSource::Synthetic { year: 2023, seed: 11 },
            setpoint_jitter_f: 0.0,
            jitter_seed: 0,
        };
        run_sweep(&PlantConfig::default(), &s, &year).unwrap()
    }

    #[test]
    fn cleaning_drops_reversed_row() {
        let (clean_data, _) = clean(&small_sweep(), &CleaningRules::default());
        let mut dirty = clean_data.clone();
        let mut bad = dirty.records[10];
        bad.t_cwr = bad.t_cws - 1.0;
        dirty.records.insert(10, bad);
        let (out, report) = clean(&dirty, &CleaningRules::default());
        assert_eq!(out, clean_data);
        assert_eq!(report.dropped_by("reversed-ΔT"), Some(1));
        assert_eq!(report.dropped(), 1);
    }

    #[test]
    fn cleaning_is_idempotent_and_counts_add_up() {
        let mut data = small_sweep();
        data.records[3].p_fan = f64::NAN;
        data.records[7].q_load = 10.0;
        let (once, r1) = clean(&data, &CleaningRules::default());
        assert_eq!(once.len() + r1.dropped(), data.len());
        assert_eq!(r1.non_finite, 1);
        assert!(r1.min_load >= 1);
        let (twice, r2) = clean(&once, &CleaningRules::default());
        assert_eq!(once, twice);
        assert_eq!(r2.dropped(), 0);
    }

    #[test]
    fn correlation_properties() {
        let d = clean(&small_sweep(), &CleaningRules::default()).0;
        let cols = [Column::TWb, Column::QLoad, Column::TCws, Column::TCwr, Column::NFans, Column::PChiller, Column::PFan, Column::QRej];
        let m = correlation_matrix(&d, &cols).unwrap();
        for i in 0..m.columns.len() {
            assert!((m.values[i][i] - 1.0).abs() < 1e-12);
            for j in 0..m.columns.len() {
                assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
                assert!((-1.0..=1.0).contains(&m.values[i][j]));
            }
        }
        let x = d.column(Column::QLoad);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = pearson_matrix(&[("x", &x), ("neg", &neg)]).unwrap();
        assert!((m.get("x", "neg").unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_flags_constant_column() {
        let d = clean(&small_sweep(), &CleaningRules::default()).0;
        let pump = d.column(Column::PPump);
        let load = d.column(Column::QLoad);
        let err = pearson_matrix(&[("q_load_tons", &load), ("p_pump_kw", &pump)]).unwrap_err();
        assert_eq!(err, Error::ZeroVariance("p_pump_kw".into()));
        assert!(pearson_matrix(&[("a", &[1.0, 2.0][..])]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = Dataset::new("t", small_sweep().records[..100].to_vec());
        let (a, b) = split(&d, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        let (a2, _) = split(&d, 0.8, 3).unwrap();
        assert_eq!(a.records, a2.records);
        let (a3, _) = split(&d, 0.8, 4).unwrap();
        assert_ne!(a.records, a3.records);
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&d, 0.999, 1).is_err());
    }

    #[test]
    fn column_names_round_trip() {
        for c in Column::ALL {
            assert_eq!(c.name().parse::<Column>().unwrap(), c);
        }
        assert_eq!("t_wb".parse::<Column>().unwrap(), Column::TWb);
        assert_eq!("p_fan".parse::<Column>().unwrap(), Column::PFan);
        assert!("bogus".parse::<Column>().is_err());
    }
}
