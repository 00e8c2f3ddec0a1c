//! Measured plant data in arbitrary CSV layouts, mapped onto the dataset
//! schema by a user-written mapping file.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use cwloop_core::dataset::{Dataset, SampleRecord, Source};
use cwloop_core::plant::cw_return_temp;
use cwloop_core::units::{celsius_to_fahrenheit, kw_to_tons, KW_PER_TON};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{parse_timestamp, DATASET_HEADER};

pub const DEFAULT_MAX_REJECTED_PERCENT: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    /// The dataset's own unit for the field.
    #[default]
    #[serde(rename = "native")]
    Native,
    #[serde(rename = "F")]
    Fahrenheit,
    #[serde(rename = "C")]
    Celsius,
    #[serde(rename = "tons")]
    Tons,
    /// Thermal kW, for loads.
    #[serde(rename = "kWt")]
    ThermalKw,
    #[serde(rename = "kW")]
    Kw,
    #[serde(rename = "W")]
    Watts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mapped {
    pub column: String,
    #[serde(default)]
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimestampColumn {
    pub column: String,
    /// chrono format string; ISO-8601 forms are accepted when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Columns {
    pub timestamp: TimestampColumn,
    pub t_wb: Mapped,
    pub q_load: Mapped,
    pub t_cws: Mapped,
    pub n_fans: Mapped,
    pub p_chiller: Mapped,
    pub p_fan: Mapped,
    pub p_pump: Mapped,
    /// Derived from `q_rej` and `cw_flow_gpm` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cwr: Option<Mapped>,
    /// Derived from the energy balance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_rej: Option<Mapped>,
    /// Rows are `measured` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Mapped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw_flow_gpm: Option<f64>,
    #[serde(default = "default_max_rejected")]
    pub max_rejected_percent: f64,
    pub columns: Columns,
}

fn default_max_rejected() -> f64 {
    DEFAULT_MAX_REJECTED_PERCENT
}

impl ColumnMapping {
    /// Maps a file already in the dataset layout onto itself.
    pub fn identity() -> Self {
        let m = |c: &str| Mapped {
            column: c.into(),
            unit: Unit::Native,
        };
        ColumnMapping {
            cw_flow_gpm: None,
            max_rejected_percent: DEFAULT_MAX_REJECTED_PERCENT,
            columns: Columns {
                timestamp: TimestampColumn {
                    column: "timestamp".into(),
                    format: None,
                },
                t_wb: m("t_wb_f"),
                q_load: m("q_load_tons"),
                t_cws: m("t_cws_f"),
                n_fans: m("n_fans"),
                p_chiller: m("p_chiller_kw"),
                p_fan: m("p_fan_kw"),
                p_pump: m("p_pump_kw"),
                t_cwr: Some(m("t_cwr_f")),
                q_rej: Some(m("q_rej_tons")),
                source: Some(m("source")),
            },
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        use Unit::*;
        let c = &self.columns;
        let temps = [("t_wb", Some(&c.t_wb)), ("t_cws", Some(&c.t_cws)), ("t_cwr", c.t_cwr.as_ref())];
        let loads = [("q_load", Some(&c.q_load)), ("q_rej", c.q_rej.as_ref())];
        let powers = [("p_chiller", &c.p_chiller), ("p_fan", &c.p_fan), ("p_pump", &c.p_pump)];
        let check = |name: &str, m: &Mapped, ok: &[Unit]| {
            if m.unit == Native || ok.contains(&m.unit) {
                Ok(())
            } else {
                Err(format!("unit {:?} does not apply to {name}", m.unit))
            }
        };
        for (name, m) in temps {
            m.map_or(Ok(()), |m| check(name, m, &[Fahrenheit, Celsius]))?;
        }
        for (name, m) in loads {
            m.map_or(Ok(()), |m| check(name, m, &[Tons, ThermalKw]))?;
        }
        for (name, m) in powers {
            check(name, m, &[Kw, Watts])?;
        }
        check("n_fans", &c.n_fans, &[])?;
        if c.t_cwr.is_none() && !self.cw_flow_gpm.is_some_and(|f| f > 0.0) {
            return Err("t_cwr is not mapped, so cw_flow_gpm (> 0) is needed to derive it".into());
        }
        if !(0.0..=100.0).contains(&self.max_rejected_percent) {
            return Err(format!("max_rejected_percent {} outside [0, 100]", self.max_rejected_percent));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line in the source file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub path: PathBuf,
    pub total_rows: usize,
    pub accepted_rows: usize,
    pub rejected: Vec<RejectedRow>,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} rows, {} accepted, {} rejected",
            self.path.display(),
            self.total_rows,
            self.accepted_rows,
            self.rejected.len()
        )?;
        for r in &self.rejected {
            write!(f, "\n  line {}: {}", r.line, r.reason)?;
        }
        Ok(())
    }
}

fn convert(v: f64, unit: Unit) -> f64 {
    match unit {
        Unit::Celsius => celsius_to_fahrenheit(v),
        Unit::ThermalKw => kw_to_tons(v),
        Unit::Watts => v / 1000.0,
        Unit::Native | Unit::Fahrenheit | Unit::Tons | Unit::Kw => v,
    }
}

struct Layout {
    timestamp: (usize, Option<String>),
    t_wb: (usize, Unit),
    q_load: (usize, Unit),
    t_cws: (usize, Unit),
    n_fans: usize,
    p_chiller: (usize, Unit),
    p_fan: (usize, Unit),
    p_pump: (usize, Unit),
    t_cwr: Option<(usize, Unit)>,
    q_rej: Option<(usize, Unit)>,
    source: Option<usize>,
}

impl Layout {
    fn resolve(mapping: &ColumnMapping, header: &csv::StringRecord) -> std::result::Result<Self, String> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| format!("mapped column `{name}` not in header"))
        };
        let col = |m: &Mapped| Ok::<_, String>((find(&m.column)?, m.unit));
        let c = &mapping.columns;
        Ok(Layout {
            timestamp: (find(&c.timestamp.column)?, c.timestamp.format.clone()),
            t_wb: col(&c.t_wb)?,
            q_load: col(&c.q_load)?,
            t_cws: col(&c.t_cws)?,
            n_fans: find(&c.n_fans.column)?,
            p_chiller: col(&c.p_chiller)?,
            p_fan: col(&c.p_fan)?,
            p_pump: col(&c.p_pump)?,
            t_cwr: c.t_cwr.as_ref().map(col).transpose()?,
            q_rej: c.q_rej.as_ref().map(col).transpose()?,
            source: c.source.as_ref().map(|m| find(&m.column)).transpose()?,
        })
    }

    fn record(&self, rec: &csv::StringRecord, cw_flow_gpm: Option<f64>) -> std::result::Result<SampleRecord, String> {
        let text = |i: usize| rec.get(i).map(str::trim).ok_or_else(|| format!("row has no field {}", i + 1));
        let num = |(i, unit): (usize, Unit)| {
            let s = text(i)?;
            s.parse::<f64>()
                .map(|v| convert(v, unit))
                .map_err(|_| format!("field {} is not a number: `{s}`", i + 1))
        };
        let ts = text(self.timestamp.0)?;
        let timestamp = match &self.timestamp.1 {
            Some(f) => NaiveDateTime::parse_from_str(ts, f).ok(),
            None => parse_timestamp(ts),
        }
        .ok_or_else(|| format!("bad timestamp `{ts}`"))?;
        let fans = text(self.n_fans)?;
        let n_fans = fans
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v))
            .ok_or_else(|| format!("fan count is not a whole number: `{fans}`"))? as u8;
        let q_load = num(self.q_load)?;
        let p_chiller = num(self.p_chiller)?;
        let t_cws = num(self.t_cws)?;
        let q_rej = match self.q_rej {
            Some(c) => num(c)?,
            None => q_load + p_chiller / KW_PER_TON,
        };
        let t_cwr = match self.t_cwr {
            Some(c) => num(c)?,
            None => cw_return_temp(q_rej, cw_flow_gpm.unwrap_or(0.0), t_cws).map_err(|e| e.to_string())?,
        };
        let source = match self.source {
            Some(i) => text(i)?.parse::<Source>().map_err(|e| e.to_string())?,
            None => Source::Measured,
        };
        let r = SampleRecord {
            timestamp,
            t_wb: num(self.t_wb)?,
            q_load,
            t_cws,
            t_cwr,
            n_fans,
            p_chiller,
            p_fan: num(self.p_fan)?,
            p_pump: num(self.p_pump)?,
            q_rej,
            source,
        };
        r.validate().map_err(|e| e.to_string())?;
        Ok(r)
    }
}

/// Reads a measured-data CSV through `mapping`. Rows that do not parse or
/// fail the record checks are skipped and listed in the report by line;
/// more than `max_rejected_percent` of them fails the whole file.
pub fn ingest_measured(path: &Path, mapping: &ColumnMapping) -> Result<(Dataset, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_from(file, path, mapping)
}

pub fn ingest_from<R: std::io::Read>(r: R, path: &Path, mapping: &ColumnMapping) -> Result<(Dataset, IngestReport)> {
    mapping.validate().map_err(|m| Error::format(path, "mapping", m))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::Headers).from_reader(r);
    let header = rdr.headers().map_err(|e| Error::format(path, "line 1", e))?.clone();
    let layout = Layout::resolve(mapping, &header).map_err(|m| Error::format(path, "line 1", m))?;
    let mut records = Vec::new();
    let mut report = IngestReport {
        path: path.into(),
        total_rows: 0,
        accepted_rows: 0,
        rejected: Vec::new(),
    };
    let mut rec = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                report.total_rows += 1;
                match layout.record(&rec, mapping.cw_flow_gpm) {
                    Ok(r) => records.push(r),
                    Err(reason) => report.rejected.push(RejectedRow {
                        line: rec.position().map_or(line, |p| p.line()),
                        reason,
                    }),
                }
            }
            Err(e) => {
                report.total_rows += 1;
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                if !matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    break;
                }
            }
        }
    }
    report.accepted_rows = records.len();
    let rejected = report.rejected.len();
    if rejected as f64 > mapping.max_rejected_percent / 100.0 * report.total_rows as f64 {
        let first = &report.rejected[0];
        return Err(Error::TooManyBadRows {
            path: path.into(),
            rejected,
            total: report.total_rows,
            threshold_percent: mapping.max_rejected_percent,
            first: format!("line {}: {}", first.line, first.reason),
        });
    }
    let data = Dataset::new(format!("ingested {}", path.display()), records);
    Ok((data, report))
}

/// Header names of the dataset layout, for mapping templates.
pub fn dataset_columns() -> &'static [&'static str] {
    &DATASET_HEADER
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW: &str = "\
Time,OAWB_C,Load,CWS_C,Fans,Chiller_W,Fan_kW,Pump_kW
2023-06-01 10:00,20,1000,25,4,600000,40,110
2023-06-01 10:15,21,1010,25.5,4,605000,41,110
2023-06-01 10:30,oops,1020,26,4,610000,42,110
2023-06-01 10:45,21.5,1030,26,3,615000,43,110
";

    fn mapping() -> ColumnMapping {
        let m = |c: &str, unit| Mapped { column: c.into(), unit };
        ColumnMapping {
            cw_flow_gpm: Some(8100.0),
            max_rejected_percent: 60.0,
            columns: Columns {
                timestamp: TimestampColumn { column: "Time".into(), format: None },
                t_wb: m("OAWB_C", Unit::Celsius),
                q_load: m("Load", Unit::Tons),
                t_cws: m("CWS_C", Unit::Celsius),
                n_fans: m("Fans", Unit::Native),
                p_chiller: m("Chiller_W", Unit::Watts),
                p_fan: m("Fan_kW", Unit::Kw),
                p_pump: m("Pump_kW", Unit::Native),
                t_cwr: None,
                q_rej: None,
                source: None,
            },
        }
    }

    #[test]
    fn maps_converts_and_reports_by_line() {
        let (d, report) = ingest_from(RAW.as_bytes(), Path::new("raw.csv"), &mapping()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(report.total_rows, 4);
        let lines: Vec<u64> = report.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, [4, 5]);
        assert!(report.rejected[1].reason.contains("n_fans"), "{report}");
        let r = &d.records[0];
        assert_eq!(r.t_wb, 68.0);
        assert_eq!(r.t_cws, 77.0);
        assert_eq!(r.p_chiller, 600.0);
        assert_eq!(r.source, Source::Measured);
        assert_eq!(r.q_rej, 1000.0 + 600.0 / KW_PER_TON);
        assert!(r.t_cwr > r.t_cws);
    }

    #[test]
    fn too_many_bad_rows_fail() {
        let strict = ColumnMapping {
            max_rejected_percent: 5.0,
            ..mapping()
        };
        let e = ingest_from(RAW.as_bytes(), Path::new("raw.csv"), &strict).unwrap_err();
        assert!(matches!(e, Error::TooManyBadRows { rejected: 2, total: 4, .. }), "{e}");
    }

    #[test]
    fn mapping_problems_are_reported() {
        let mut m = mapping();
        m.columns.p_fan.column = "Nope".into();
        let e = ingest_from(RAW.as_bytes(), Path::new("raw.csv"), &m).unwrap_err();
        assert!(e.to_string().contains("`Nope`"), "{e}");
        let mut m = mapping();
        m.cw_flow_gpm = None;
        assert!(m.validate().is_err());
        let mut m = mapping();
        m.columns.t_wb.unit = Unit::Watts;
        assert!(m.validate().is_err());
    }
}
