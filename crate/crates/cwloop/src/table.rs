//! Look-up table files: CSV with one row per cell, and the whole table as
//! JSON for the heatmap view.

use std::io::Write;
use std::path::Path;

use cwloop_core::advisory::LookupTable;

use crate::error::{Error, Result};

pub const TABLE_HEADER: [&str; 6] = [
    "q_load_tons",
    "t_wb_f",
    "t_cws_opt_f",
    "n_fans_opt",
    "predicted_power_kw",
    "feasible",
];

/// Load-major, wet-bulb minor, matching `LookupTable::iter`.
pub fn write_table_csv_to<W: Write>(w: W, table: &LookupTable) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(TABLE_HEADER)?;
    for c in table.iter() {
        w.write_record([
            c.q_load_tons.to_string(),
            c.t_wb_f.to_string(),
            c.t_cws_opt_f.to_string(),
            c.n_fans_opt.to_string(),
            c.predicted_power_kw.to_string(),
            c.feasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_csv(path: &Path, table: &LookupTable) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table_csv_to(f, table).map_err(|e| Error::format(path, "write", e))
}

pub fn save_table_json(path: &Path, table: &LookupTable) -> Result<()> {
    let text = serde_json::to_string_pretty(table).expect("tables hold only finite numbers");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_table_json(path: &Path) -> Result<LookupTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut de = serde_json::Deserializer::from_slice(&bytes);
    let table: LookupTable = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        Error::format(path, format!("field `{field}`"), e.into_inner())
    })?;
    let rows_ok = table.cells.len() == table.q_load_grid.len()
        && table.cells.iter().all(|r| r.len() == table.t_wb_grid.len());
    if !rows_ok {
        return Err(Error::format(path, "field `cells`", "cell matrix does not match the grids"));
    }
    Ok(table)
}

/// Writes JSON for a `.json` path and CSV otherwise.
pub fn save_table(path: &Path, table: &LookupTable) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        save_table_json(path, table)
    } else {
        write_table_csv(path, table)
    }
}
