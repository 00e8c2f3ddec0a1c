//! CSV interchange: conditions, datasets and interval power series.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use cwloop_core::dataset::{Dataset, SampleRecord, Source};
use cwloop_core::tariff::{IntervalPoint, IntervalSeries};
use cwloop_core::weather::Conditions;

use crate::error::{Error, Result};

pub const CONDITIONS_HEADER: [&str; 3] = ["timestamp", "t_wb_f", "q_load_tons"];
pub const DATASET_HEADER: [&str; 11] = [
    "timestamp",
    "t_wb_f",
    "q_load_tons",
    "t_cws_f",
    "t_cwr_f",
    "n_fans",
    "p_chiller_kw",
    "p_fan_kw",
    "p_pump_kw",
    "q_rej_tons",
    "source",
];
pub const INTERVAL_HEADER: [&str; 2] = ["timestamp", "power_kw"];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Accepts `2023-06-01T13:00:00`, `2023-06-01 13:00:00` and the same
/// without seconds.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::format(path, "line 1", e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            "line 1",
            format!(
                "header is `{}`, expected `{}`",
                header.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> String {
    rec.position().map_or_else(|| "?".to_string(), |p| format!("line {}", p.line()))
}

fn field<'r>(rec: &'r csv::StringRecord, i: usize, name: &str) -> std::result::Result<&'r str, String> {
    rec.get(i).ok_or_else(|| format!("missing `{name}`"))
}

fn number(rec: &csv::StringRecord, i: usize, name: &str) -> std::result::Result<f64, String> {
    let s = field(rec, i, name)?;
    s.parse::<f64>().map_err(|_| format!("`{name}` is not a number: `{s}`"))
}

fn timestamp(rec: &csv::StringRecord, i: usize) -> std::result::Result<NaiveDateTime, String> {
    let s = field(rec, i, "timestamp")?;
    parse_timestamp(s).ok_or_else(|| format!("bad timestamp `{s}`"))
}

pub fn read_conditions(path: &Path) -> Result<Vec<Conditions>> {
    let mut rdr = reader(open(path)?);
    check_header(&mut rdr, path, &CONDITIONS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, "csv", e))?;
        let row = (|| {
            Ok::<_, String>(Conditions {
                timestamp: timestamp(&rec, 0)?,
                t_wb_f: number(&rec, 1, "t_wb_f")?,
                q_load_tons: number(&rec, 2, "q_load_tons")?,
            })
        })()
        .map_err(|m| Error::format(path, line_of(&rec), m))?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_conditions(path: &Path, rows: &[Conditions]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::format(path, "write", e);
    w.write_record(CONDITIONS_HEADER).map_err(wrap)?;
    for c in rows {
        w.write_record([
            format_timestamp(&c.timestamp),
            c.t_wb_f.to_string(),
            c.q_load_tons.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses one dataset row in the fixed column order.
pub fn parse_record(rec: &csv::StringRecord) -> std::result::Result<SampleRecord, String> {
    if rec.len() != DATASET_HEADER.len() {
        return Err(format!("expected {} fields, found {}", DATASET_HEADER.len(), rec.len()));
    }
    let n_fans = field(rec, 5, "n_fans")?;
    let source: Source = field(rec, 10, "source")?.parse().map_err(|e: cwloop_core::Error| e.to_string())?;
    Ok(SampleRecord {
        timestamp: timestamp(rec, 0)?,
        t_wb: number(rec, 1, "t_wb_f")?,
        q_load: number(rec, 2, "q_load_tons")?,
        t_cws: number(rec, 3, "t_cws_f")?,
        t_cwr: number(rec, 4, "t_cwr_f")?,
        n_fans: n_fans.parse().map_err(|_| format!("`n_fans` is not a count: `{n_fans}`"))?,
        p_chiller: number(rec, 6, "p_chiller_kw")?,
        p_fan: number(rec, 7, "p_fan_kw")?,
        p_pump: number(rec, 8, "p_pump_kw")?,
        q_rej: number(rec, 9, "q_rej_tons")?,
        source,
    })
}

/// Reads a dataset CSV; every row must parse and pass the record checks.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_from(open(path)?, path)
}

pub fn read_dataset_from<R: Read>(r: R, path: &Path) -> Result<Dataset> {
    let mut rdr = reader(r);
    check_header(&mut rdr, path, &DATASET_HEADER)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, "csv", e))?;
        let row = parse_record(&rec)
            .and_then(|r| r.validate().map(|_| r).map_err(|e| e.to_string()))
            .map_err(|m| Error::format(path, line_of(&rec), m))?;
        records.push(row);
    }
    Ok(Dataset::new(format!("file {}", path.display()), records))
}

pub fn dataset_row(r: &SampleRecord) -> [String; 11] {
    [
        format_timestamp(&r.timestamp),
        r.t_wb.to_string(),
        r.q_load.to_string(),
        r.t_cws.to_string(),
        r.t_cwr.to_string(),
        r.n_fans.to_string(),
        r.p_chiller.to_string(),
        r.p_fan.to_string(),
        r.p_pump.to_string(),
        r.q_rej.to_string(),
        r.source.as_str().to_string(),
    ]
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_dataset_to(create(path)?, data).map_err(|e| Error::format(path, "write", e))
}

/// Floats are written in shortest round-trip form, so reading the file back
/// gives bit-identical values.
pub fn write_dataset_to<W: Write>(w: W, data: &Dataset) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(DATASET_HEADER)?;
    for r in &data.records {
        w.write_record(dataset_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `timestamp,power_kw` file. The interval is the spacing of the
/// first two rows and the rest must follow it.
pub fn read_intervals(path: &Path) -> Result<IntervalSeries> {
    let mut rdr = reader(open(path)?);
    check_header(&mut rdr, path, &INTERVAL_HEADER)?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, "csv", e))?;
        let p = (|| {
            Ok::<_, String>(IntervalPoint {
                timestamp: timestamp(&rec, 0)?,
                power_kw: number(&rec, 1, "power_kw")?,
            })
        })()
        .map_err(|m| Error::format(path, line_of(&rec), m))?;
        points.push(p);
    }
    if points.len() < 2 {
        return Err(Error::format(path, "data", "need at least two intervals"));
    }
    let minutes = (points[1].timestamp - points[0].timestamp).num_minutes();
    let minutes = u32::try_from(minutes)
        .ok()
        .filter(|m| *m > 0)
        .ok_or_else(|| Error::format(path, "line 3", "timestamps must increase"))?;
    Ok(IntervalSeries::new(minutes, points)?)
}

pub fn write_intervals(path: &Path, series: &IntervalSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::format(path, "write", e);
    w.write_record(INTERVAL_HEADER).map_err(wrap)?;
    for p in &series.points {
        w.write_record([format_timestamp(&p.timestamp), p.power_kw.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn rec(h: u32) -> SampleRecord {
        let q_load = 1000.0 + f64::from(h) / 3.0;
        let p_chiller = 612.345678901234 + f64::from(h);
        SampleRecord {
            timestamp: NaiveDate::from_ymd_opt(2023, 7, 1).unwrap().and_hms_opt(h, 0, 0).unwrap(),
            t_wb: 70.1 + 0.1,
            q_load,
            t_cws: 75.0,
            t_cwr: 85.3,
            n_fans: 4,
            p_chiller,
            p_fan: 33.3,
            p_pump: 110.0,
            q_rej: q_load + p_chiller / cwloop_core::units::KW_PER_TON,
            source: Source::Synthetic,
        }
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let d = Dataset::new("t", (0..5).map(rec).collect());
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&DATASET_HEADER.join(",")));
        let back = read_dataset_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.records, d.records);
    }

    #[test]
    fn bad_header_and_rows_are_located() {
        let e = read_dataset_from("a,b\n1,2\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(e.to_string().contains("x.csv:line 1"), "{e}");
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &Dataset::new("t", (0..3).map(rec).collect())).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",4,", ",5,", 2);
        let e = read_dataset_from(text.as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("n_fans"), "{e}");
    }

    #[test]
    fn timestamps_in_either_form() {
        let a = parse_timestamp("2023-06-01T13:00:00").unwrap();
        assert_eq!(parse_timestamp("2023-06-01 13:00"), Some(a));
        assert_eq!(format_timestamp(&a), "2023-06-01T13:00:00");
        assert!(parse_timestamp("06/01/2023").is_none());
    }
}
