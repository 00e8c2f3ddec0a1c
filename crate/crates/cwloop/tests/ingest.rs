mod common;

use std::path::Path;

use cwloop::files::write_dataset;
use cwloop::ingest::{ingest_from, ingest_measured, ColumnMapping, Mapped, Unit};
use cwloop::Error;

#[test]
fn identity_mapping_reads_a_dataset_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let data = common::measured(common::at(2023, 7, 1, 0), 48, 2);
    write_dataset(&path, &data).unwrap();
    let (back, report) = ingest_measured(&path, &ColumnMapping::identity()).unwrap();
    assert_eq!(report.total_rows, 48);
    assert!(report.rejected.is_empty());
    assert_eq!(back.records, data.records);
}

#[test]
fn metric_columns_are_converted() {
    let text = "\
when,wb,load_kwt,cws,fans,chiller,fan,pump
2023-07-01T12:00:00,25,3517,30,6,500,60000,120
";
    let mut m = ColumnMapping::identity();
    let c = &mut m.columns;
    c.timestamp.column = "when".into();
    let map = |col: &str, unit| Mapped { column: col.into(), unit };
    c.t_wb = map("wb", Unit::Celsius);
    c.q_load = map("load_kwt", Unit::ThermalKw);
    c.t_cws = map("cws", Unit::Celsius);
    c.n_fans = map("fans", Unit::Native);
    c.p_chiller = map("chiller", Unit::Kw);
    c.p_fan = map("fan", Unit::Watts);
    c.p_pump = map("pump", Unit::Native);
    c.t_cwr = None;
    c.q_rej = None;
    c.source = None;
    m.cw_flow_gpm = Some(8000.0);
    let (d, _) = ingest_from(text.as_bytes(), Path::new("metric.csv"), &m).unwrap();
    let r = &d.records[0];
    assert!((r.t_wb - 77.0).abs() < 1e-9);
    assert!((r.t_cws - 86.0).abs() < 1e-9);
    assert!((r.q_load - 1000.0).abs() < 1e-9);
    assert_eq!(r.p_fan, 60.0);
    assert_eq!(r.n_fans, 6);
}

#[test]
fn bad_rows_are_reported_until_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_dataset(&path, &common::measured(common::at(2023, 7, 1, 0), 20, 2)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[1] = "warm";
    lines[3] = fields.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let lenient = ColumnMapping {
        max_rejected_percent: 10.0,
        ..ColumnMapping::identity()
    };
    let (d, report) = ingest_measured(&path, &lenient).unwrap();
    assert_eq!(d.len(), 19);
    assert_eq!(report.rejected.len(), 1);
    assert_eq!(report.rejected[0].line, 4);
    assert!(report.to_string().contains("line 4"), "{report}");

    let strict = ColumnMapping {
        max_rejected_percent: 1.0,
        ..ColumnMapping::identity()
    };
    let e = ingest_measured(&path, &strict).unwrap_err();
    assert!(matches!(e, Error::TooManyBadRows { rejected: 1, total: 20, .. }), "{e}");
}
